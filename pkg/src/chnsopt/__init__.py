"""Optimal boundary control of a two-phase Cahn-Hilliard-Navier-Stokes flow.

Forward, linearized and adjoint solvers on a staggered MAC grid, reduced
boundary gradients with finite-difference verification oracles, and a
projected-gradient optimizer over the admissible control ball.
"""

from .errors import (ChnsError, CompatibilityViolation, FormatError,
                     LinearSolveFailure, MissingInput, ParseError,
                     ShapeMismatch, StabilityBreach, TimeNodeMismatch,
                     TrajectoryIncomplete, ValidationError)
from .grid import (BoundaryTrace, Grid, ScalarField, VelocityField,
                   divergence, gradient_to_faces, laplacian_neumann,
                   normal_derivative_trace)
from .potential import Potential
from .state import (BoundaryControl, SimConfig, State, Trajectory,
                    diagnostics, solve_forward, solve_steady_stokes,
                    step_state)

__version__ = "0.1.0"
