"""Named desk-scale problem instances shared by the CLI and the test suite.

Each builder returns a :class:`ProblemSetup` with everything a run needs.
``rest`` and ``spinodal`` are uncontrolled; ``lid`` drives a regularized
cavity through the top edge; ``inverse_crime`` first generates tracking
targets with a known stirring control and then asks the optimizer to
recover a control from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .grid import Grid, ScalarField, VelocityField, TOP
from .objective import Targets
from .potential import Potential
from .state import BoundaryControl, SimConfig, solve_forward

PRESET_NAMES = ("rest", "spinodal", "lid", "inverse_crime")


@dataclass
class ProblemSetup:
    name: str
    cfg: SimConfig
    pot: Potential
    u0: VelocityField
    phi0: ScalarField
    control: BoundaryControl          # h for simulate; h-dagger for inverse_crime
    targets: Targets = None           # populated for inverse_crime
    control_magnitude: float = 1.0

    @property
    def grid(self) -> Grid:
        return self.cfg.grid


def _lid_profile(grid: Grid) -> np.ndarray:
    """Tangential lid shape vanishing at the corners (regularized cavity)."""
    x = (np.arange(grid.nx) + 0.5) * grid.hx
    return np.sin(np.pi * x / grid.lx) ** 2


def build_rest(nx: int = 16, ny: int = 16, phase: float = 0.0,
               nu: float = 1.0, T: float = 0.5, dt: float = 2.5e-3,
               stabilization: float = None) -> ProblemSetup:
    """All-zero data (or a uniform pure phase); exact steady state."""
    grid = Grid(nx, ny, 1.0, 1.0)
    cfg = SimConfig(grid=grid, nu=nu, T=T, dt=dt)
    pot = Potential() if stabilization is None else Potential(stabilization=stabilization)
    phi0 = ScalarField(grid, np.full((nx, ny), float(phase)))
    return ProblemSetup(
        name="rest", cfg=cfg, pot=pot, u0=VelocityField.zeros(grid),
        phi0=phi0, control=BoundaryControl.zeros(grid, cfg.time_nodes()))


def build_spinodal(nx: int = 32, ny: int = 32, seed: int = 7,
                   amplitude: float = 0.05, nu: float = 1.0,
                   T: float = 0.2, dt: float = 1e-3,
                   stabilization: float = None) -> ProblemSetup:
    """Uncontrolled phase separation from seeded noise on [0, 2 pi]^2."""
    grid = Grid(nx, ny, 2.0 * np.pi, 2.0 * np.pi)
    cfg = SimConfig(grid=grid, nu=nu, T=T, dt=dt)
    pot = Potential() if stabilization is None else Potential(stabilization=stabilization)
    rng = np.random.default_rng(seed)
    phi0 = ScalarField(grid, rng.uniform(-amplitude, amplitude, size=(nx, ny)))
    return ProblemSetup(
        name="spinodal", cfg=cfg, pot=pot, u0=VelocityField.zeros(grid),
        phi0=phi0, control=BoundaryControl.zeros(grid, cfg.time_nodes()))


def build_lid(nx: int = 32, ny: int = 32, nu: float = 1.0, T: float = 0.1,
              dt: float = 2.5e-3, magnitude: float = 1.0,
              phi_amplitude: float = 0.2, stabilization: float = None) -> ProblemSetup:
    """Tangential control on the top edge ramping up from rest."""
    grid = Grid(nx, ny, 1.0, 1.0)
    cfg = SimConfig(grid=grid, nu=nu, T=T, dt=dt)
    pot = Potential() if stabilization is None else Potential(stabilization=stabilization)
    nodes = cfg.time_nodes()
    h = BoundaryControl.zeros(grid, nodes)
    prof = _lid_profile(grid)
    sl = grid.edge_slices()[TOP]
    for n, t in enumerate(nodes):
        h.tangential[n, sl] = magnitude * (t / T) * prof[::-1]
    phi0 = ScalarField.from_function(
        grid, lambda x, y: phi_amplitude * np.cos(np.pi * x / grid.lx)
        * np.cos(np.pi * y / grid.ly))
    return ProblemSetup(
        name="lid", cfg=cfg, pot=pot, u0=VelocityField.zeros(grid),
        phi0=phi0, control=h, control_magnitude=magnitude)


def swirl_control(grid: Grid, time_nodes, magnitude: float) -> BoundaryControl:
    """Counterclockwise stirring on the whole boundary: quadratic ramp in
    time, corners smoothed along each edge."""
    h = BoundaryControl.zeros(grid, np.asarray(time_nodes, dtype=float))
    T = h.time_nodes[-1]
    x = (np.arange(grid.nx) + 0.5) * grid.hx
    y = (np.arange(grid.ny) + 0.5) * grid.hy
    edge_x = np.sin(np.pi * x / grid.lx) ** 2
    edge_y = np.sin(np.pi * y / grid.ly) ** 2
    profile = np.concatenate([edge_x, edge_y, edge_x[::-1], edge_y[::-1]])
    for n, t in enumerate(h.time_nodes):
        h.tangential[n] = magnitude * (t / T) ** 2 * profile
    return h


def build_inverse_crime(nx: int = 32, ny: int = 32, nu: float = 6.0,
                        T: float = 0.1, dt: float = 2.5e-3,
                        magnitude: float = 1.0, phi_amplitude: float = 0.1,
                        stabilization: float = None) -> ProblemSetup:
    """Targets generated by a known stirring control on [0, 2 pi]^2.

    The viscosity is large enough that the generated flow fills the domain
    within the horizon, which makes the tracking terms dominate the control
    effort; recovering most of the cost from h=0 is then possible.
    """
    grid = Grid(nx, ny, 2.0 * np.pi, 2.0 * np.pi)
    cfg = SimConfig(grid=grid, nu=nu, T=T, dt=dt)
    pot = Potential() if stabilization is None else Potential(stabilization=stabilization)
    h_dagger = swirl_control(grid, cfg.time_nodes(), magnitude)
    phi0 = ScalarField.from_function(
        grid, lambda x, y: phi_amplitude * np.cos(x) * np.cos(y))
    u0 = VelocityField.zeros(grid)
    traj = solve_forward(u0, phi0, h_dagger, cfg, pot)
    targets = Targets.from_trajectory(traj)
    return ProblemSetup(
        name="inverse_crime", cfg=cfg, pot=pot, u0=u0, phi0=phi0,
        control=h_dagger, targets=targets, control_magnitude=magnitude)


def build_preset(name: str, **overrides) -> ProblemSetup:
    builders = {
        "rest": build_rest,
        "spinodal": build_spinodal,
        "lid": build_lid,
        "inverse_crime": build_inverse_crime,
    }
    if name not in builders:
        raise ValidationError(
            [f"unknown preset '{name}'; available: {', '.join(PRESET_NAMES)}"])
    return builders[name](**overrides)
