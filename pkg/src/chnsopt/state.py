"""Forward solver for the boundary-controlled two-phase flow system.

The system couples a convective Cahn-Hilliard equation for the phase field
to the incompressible Navier-Stokes equations; the control is the
time-dependent Dirichlet velocity on the whole boundary.

Scheme (first order in time):
  (i)  phase sub-step: semi-implicit with convex-splitting stabilization
       ``S (phi^{n+1} - phi^n)``, explicit centered conservative convection,
       implicit fourth-order part;
  (ii) tentative velocity: implicit diffusion, explicit centered convection
       and explicit capillary force ``mu^{n+1} grad phi^n``, Dirichlet data
       from the incoming control slice;
  (iii) pressure projection with homogeneous Neumann pressure closure;
       pressure normalized to zero mean.

All solves are written in increment form (solve for the change, not the new
value), so exact steady states -- the rest state and any pure phase -- are
preserved bitwise for arbitrarily many steps.

Within a step every boundary-dependent stencil uses the incoming control
slice; the stored boundary faces of the previous state are overwritten on a
working copy.  This makes one step a function of the interior state and the
new boundary data only, which the linearized solver differentiates exactly.

Stability: the phase sub-step is unconditionally stable; explicit convection
requires roughly ``dt <= min(hx, hy) / max|u|``.  A blowup guard turns
floating overflow into a typed error.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (CompatibilityViolation, ShapeMismatch, StabilityBreach,
                     TimeNodeMismatch, ValidationError)
from .grid import (BoundaryTrace, Grid, ScalarField, VelocityField,
                   cell_integral, divergence_values, gradient_to_faces,
                   velocity_trace)
from .linsolve import build_stokes_solver, get_operator_set
from .operators import (VelocityBC, capillary_force, convect_phase_conservative,
                        convective_momentum, project_velocity,
                        velocity_laplacian)
from .potential import Potential

FLUX_TOL = 1e-12
COMPAT_TOL = 1e-10


@dataclass
class SimConfig:
    """Numerical parameters of one solve.

    ``lin_tol`` bounds the normwise backward error of the inner linear
    solves; ``div_tol`` bounds the post-projection divergence.  The
    ``disable_*`` switches are test-only toggles that turn the system into
    a linear Stokes+heat problem (used by the verification oracles).
    """

    grid: Grid
    nu: float
    T: float
    dt: float
    div_tol: float = 1e-10
    lin_tol: float = 1e-10
    blowup_guard: float = 1e8
    disable_convection: bool = False
    disable_capillary: bool = False
    disable_potential: bool = False

    def __post_init__(self):
        problems = []
        if self.nu <= 0:
            problems.append(f"viscosity must be positive, got {self.nu}")
        if self.dt <= 0 or self.T <= 0:
            problems.append("T and dt must be positive")
        else:
            steps = self.T / self.dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                problems.append(f"dt must divide T (T/dt = {steps})")
        if self.div_tol <= 0 or self.lin_tol <= 0:
            problems.append("tolerances must be positive")
        if problems:
            raise ValidationError(problems)

    @property
    def num_steps(self) -> int:
        return int(round(self.T / self.dt))

    def time_nodes(self) -> np.ndarray:
        return np.arange(self.num_steps + 1) * self.dt


@dataclass
class State:
    """One time level of the coupled system."""

    t: float
    u: VelocityField
    phi: ScalarField
    mu: ScalarField
    pi: ScalarField
    div_residual: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.phi.grid


@dataclass
class BoundaryControl:
    """Velocity Dirichlet data on the space-time boundary; the optimization
    variable.

    Stored as tangential and outward-normal traces per time node, face
    centers ordered counterclockwise.  The normal trace must have zero net
    flux at every node (discrete solvability of the projection).
    """

    grid: Grid
    time_nodes: np.ndarray
    tangential: np.ndarray    # (M+1, n_boundary_faces)
    normal: np.ndarray        # (M+1, n_boundary_faces)

    @classmethod
    def zeros(cls, grid: Grid, time_nodes) -> "BoundaryControl":
        nodes = np.asarray(time_nodes, dtype=float)
        nb = grid.n_boundary_faces
        return cls(grid, nodes, np.zeros((nodes.size, nb)), np.zeros((nodes.size, nb)))

    @property
    def num_nodes(self) -> int:
        return self.time_nodes.size

    def slice_traces(self, n: int):
        return (BoundaryTrace(self.grid, self.tangential[n].copy()),
                BoundaryTrace(self.grid, self.normal[n].copy()))

    def bc(self, n: int) -> VelocityBC:
        tan, norm = self.slice_traces(n)
        return VelocityBC.from_traces(tan, norm)

    def copy(self) -> "BoundaryControl":
        return BoundaryControl(self.grid, self.time_nodes.copy(),
                               self.tangential.copy(), self.normal.copy())

    def axpy(self, alpha: float, other: "BoundaryControl") -> "BoundaryControl":
        """Return self + alpha * other."""
        self.check_same_nodes(other)
        return BoundaryControl(self.grid, self.time_nodes.copy(),
                               self.tangential + alpha * other.tangential,
                               self.normal + alpha * other.normal)

    def scaled(self, alpha: float) -> "BoundaryControl":
        return BoundaryControl(self.grid, self.time_nodes.copy(),
                               alpha * self.tangential, alpha * self.normal)

    def check_same_nodes(self, other):
        if (self.num_nodes != other.num_nodes
                or not np.allclose(self.time_nodes, other.time_nodes,
                                   rtol=0.0, atol=1e-12)):
            raise TimeNodeMismatch("controls live on different time grids")

    def time_weights(self) -> np.ndarray:
        """Trapezoid weights over the time nodes (uniform spacing)."""
        w = np.diff(self.time_nodes)
        weights = np.zeros(self.num_nodes)
        weights[:-1] += 0.5 * w
        weights[1:] += 0.5 * w
        return weights

    def inner(self, other: "BoundaryControl") -> float:
        """L2(Sigma) pairing: face-length weighted, trapezoid in time."""
        self.check_same_nodes(other)
        lengths = self.grid.face_lengths()
        per_node = ((self.tangential * other.tangential
                     + self.normal * other.normal) * lengths).sum(axis=1)
        return float(self.time_weights() @ per_node)

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def net_fluxes(self) -> np.ndarray:
        lengths = self.grid.face_lengths()
        return (self.normal * lengths).sum(axis=1)

    def validate(self):
        nb = self.grid.n_boundary_faces
        problems = []
        if self.tangential.shape != (self.num_nodes, nb) or self.normal.shape != (self.num_nodes, nb):
            raise ShapeMismatch("control trace arrays do not match grid/time nodes")
        if not (np.isfinite(self.tangential).all() and np.isfinite(self.normal).all()):
            problems.append("control contains non-finite entries")
        if np.any(np.diff(self.time_nodes) <= 0):
            problems.append("time nodes must be strictly increasing")
        scale = max(1.0, self.grid.perimeter * float(np.abs(self.normal).max(initial=0.0)))
        bad = np.abs(self.net_fluxes()) > FLUX_TOL * scale
        if bad.any():
            problems.append(
                f"nonzero net boundary flux at {int(bad.sum())} time node(s); "
                "the normal trace must integrate to zero")
        if problems:
            raise ValidationError(problems)


@dataclass
class Trajectory:
    """Checkpointed forward solution: one state per time node."""

    dt: float
    states: list
    control: BoundaryControl

    @property
    def grid(self) -> Grid:
        return self.states[0].grid

    @property
    def num_steps(self) -> int:
        return len(self.states) - 1

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def final(self) -> State:
        return self.states[-1]


def _guard(cfg: SimConfig, *arrays):
    for a in arrays:
        m = np.abs(a).max(initial=0.0)
        if not np.isfinite(m) or m > cfg.blowup_guard:
            raise StabilityBreach(
                f"field norm {m:.3e} crossed the blowup guard {cfg.blowup_guard:.1e}")


def make_mu(grid: Grid, phi: np.ndarray, pot: Potential, cfg: SimConfig,
            ops=None, dphi=None) -> np.ndarray:
    """Chemical potential consistent with the scheme.

    ``dphi`` is the last increment; at t=0 it is zero and mu reduces to
    ``-lap(phi) + F'(phi)``.
    """
    ops = ops or get_operator_set(grid, cfg.dt, cfg.nu, pot.stabilization)
    fp = np.zeros_like(phi) if cfg.disable_potential else pot.f_d1(phi)
    mu = -ops.apply_a(phi) + fp
    if dphi is not None:
        mu = mu + pot.stabilization * dphi
    return mu


def step_state(state: State, h_next, cfg: SimConfig, pot: Potential,
               ops=None) -> State:
    """Advance one time step with Dirichlet data ``h_next``.

    ``h_next`` is a :class:`~chnsopt.operators.VelocityBC` or a
    ``(tangential, normal)`` trace pair.
    """
    grid = state.grid
    if isinstance(h_next, tuple):
        h_next = VelocityBC.from_traces(*h_next)
    ops = ops or get_operator_set(grid, cfg.dt, cfg.nu, pot.stabilization)
    dt = cfg.dt

    u_work = state.u.copy()
    h_next.impose_on(u_work)
    phi = state.phi.values

    # -- phase sub-step (increment form; stabilization cancels in the rhs)
    conv_phi = 0.0 if cfg.disable_convection else convect_phase_conservative(grid, u_work, phi)
    fp = np.zeros_like(phi) if cfg.disable_potential else pot.f_d1(phi)
    a_phi = ops.apply_a(phi)
    rhs = -conv_phi + ops.apply_a(fp) - ops.apply_a(a_phi)
    dphi = ops.solve_ch(rhs, cfg.lin_tol)
    phi_new = phi + dphi
    mu_new = -ops.apply_a(phi_new) + fp + pot.stabilization * dphi

    # -- tentative velocity (increment form)
    lap_x, lap_y = velocity_laplacian(grid, u_work, h_next)
    rhs_x = cfg.nu * lap_x
    rhs_y = cfg.nu * lap_y
    if not cfg.disable_convection:
        conv_x, conv_y = convective_momentum(grid, u_work, u_work, h_next)
        rhs_x = rhs_x - conv_x
        rhs_y = rhs_y - conv_y
    if not cfg.disable_capillary:
        cap_x, cap_y = capillary_force(grid, mu_new, phi)
        rhs_x = rhs_x + cap_x
        rhs_y = rhs_y + cap_y
    u_work.ux[1:-1, :] += ops.solve_helm_ux(rhs_x, cfg.lin_tol)
    u_work.uy[:, 1:-1] += ops.solve_helm_uy(rhs_y, cfg.lin_tol)

    # -- projection
    pressure, div_res = project_velocity(ops, u_work, cfg.lin_tol)
    if div_res > cfg.div_tol * max(1.0, np.abs(u_work.ux).max(), np.abs(u_work.uy).max()):
        raise StabilityBreach(
            f"divergence residual {div_res:.3e} exceeds div_tol after projection")
    _guard(cfg, u_work.ux, u_work.uy, phi_new)

    return State(
        t=state.t + dt,
        u=u_work,
        phi=ScalarField(grid, phi_new),
        mu=ScalarField(grid, mu_new),
        pi=ScalarField(grid, pressure),
        div_residual=div_res,
    )


def check_compatibility(u0: VelocityField, control: BoundaryControl,
                        tol: float = COMPAT_TOL):
    """Initial control slice must equal the initial velocity trace."""
    tan0, norm0 = velocity_trace(u0)
    scale = max(1.0, np.abs(u0.ux).max(initial=0.0), np.abs(u0.uy).max(initial=0.0))
    err = max(np.abs(tan0.values - control.tangential[0]).max(initial=0.0),
              np.abs(norm0.values - control.normal[0]).max(initial=0.0))
    if err > tol * scale:
        raise CompatibilityViolation(
            [f"t=0 control slice differs from the initial velocity trace by "
             f"{err:.3e} (tolerance {tol:.1e}); the control must agree with "
             "the initial condition on the boundary"])


def initial_state(u0: VelocityField, phi0: ScalarField, cfg: SimConfig,
                  pot: Potential) -> State:
    grid = phi0.grid
    ops = get_operator_set(grid, cfg.dt, cfg.nu, pot.stabilization)
    mu0 = make_mu(grid, phi0.values, pot, cfg, ops=ops)
    div0 = float(np.abs(divergence_values(grid, u0.ux, u0.uy)).max())
    return State(0.0, u0.copy(), phi0.copy(), ScalarField(grid, mu0),
                 ScalarField.zeros(grid), div0)


def solve_forward(u0: VelocityField, phi0: ScalarField, h: BoundaryControl,
                  cfg: SimConfig, pot: Potential) -> Trajectory:
    """Run the controlled system over [0, T] and checkpoint every step."""
    grid = phi0.grid
    u0.validate()
    phi0.validate()
    h.validate()
    if h.num_nodes != cfg.num_steps + 1 or not np.allclose(
            h.time_nodes, cfg.time_nodes(), rtol=0.0, atol=1e-12):
        raise TimeNodeMismatch("control time nodes do not match the solver grid")
    check_compatibility(u0, h)

    ops = get_operator_set(grid, cfg.dt, cfg.nu, pot.stabilization)
    states = [initial_state(u0, phi0, cfg, pot)]
    _guard(cfg, u0.ux, u0.uy, phi0.values)
    for n in range(cfg.num_steps):
        states.append(step_state(states[-1], h.bc(n + 1), cfg, pot, ops=ops))
    return Trajectory(cfg.dt, states, h.copy())


def solve_steady_stokes(h_slice, cfg: SimConfig) -> VelocityField:
    """Steady Stokes lifting of boundary data (diagnostic solver).

    Solves ``-nu lap(u) + grad(pi) = 0, div u = 0`` with ``u = h`` on the
    boundary via a direct saddle-point solve.
    """
    grid = cfg.grid
    if isinstance(h_slice, tuple):
        h_slice = VelocityBC.from_traces(*h_slice)
    flux = h_slice.net_flux()
    if abs(flux) > FLUX_TOL * max(1.0, grid.perimeter):
        raise ValidationError([f"boundary data has nonzero net flux {flux:.3e}"])

    nu = cfg.nu
    lu, layout = build_stokes_solver(grid, nu)
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    nux, nuy, npp = layout["nux"], layout["nuy"], layout["np"]

    rhs = np.zeros(nux + nuy + npp)
    rx = rhs[:nux].reshape(nx - 1, ny)
    ry = rhs[nux:nux + nuy].reshape(nx, ny - 1)
    rp = rhs[nux + nuy:].reshape(nx, ny)

    rx[0, :] += nu * h_slice.ux_left / hx ** 2
    rx[-1, :] += nu * h_slice.ux_right / hx ** 2
    rx[:, 0] += 2.0 * nu * h_slice.tx_bottom_nodes() / hy ** 2
    rx[:, -1] += 2.0 * nu * h_slice.tx_top_nodes() / hy ** 2

    ry[:, 0] += nu * h_slice.uy_bottom / hy ** 2
    ry[:, -1] += nu * h_slice.uy_top / hy ** 2
    ry[0, :] += 2.0 * nu * h_slice.ty_left_nodes() / hx ** 2
    ry[-1, :] += 2.0 * nu * h_slice.ty_right_nodes() / hx ** 2

    # continuity: move the known boundary-face fluxes to the right-hand side
    rp[0, :] += h_slice.ux_left / hx
    rp[-1, :] -= h_slice.ux_right / hx
    rp[:, 0] += h_slice.uy_bottom / hy
    rp[:, -1] -= h_slice.uy_top / hy
    rhs[nux + nuy] = 0.0  # pinned pressure cell

    sol = lu.solve(rhs)
    u = VelocityField.zeros(grid)
    u.ux[1:-1, :] = sol[:nux].reshape(nx - 1, ny)
    u.uy[:, 1:-1] = sol[nux:nux + nuy].reshape(nx, ny - 1)
    h_slice.impose_on(u)

    div_res = float(np.abs(divergence_values(grid, u.ux, u.uy)).max())
    scale = max(1.0, np.abs(u.ux).max(), np.abs(u.uy).max())
    if div_res > cfg.div_tol * scale:
        from .errors import LinearSolveFailure
        raise LinearSolveFailure(
            f"steady Stokes divergence residual {div_res:.3e} too large",
            residual=div_res, tolerance=cfg.div_tol)
    return u


def kinetic_energy(grid: Grid, u: VelocityField) -> float:
    """Face quadrature with half weights on boundary faces."""
    s = ((u.ux[1:-1, :] ** 2).sum() + 0.5 * (u.ux[0, :] ** 2).sum()
         + 0.5 * (u.ux[-1, :] ** 2).sum()
         + (u.uy[:, 1:-1] ** 2).sum() + 0.5 * (u.uy[:, 0] ** 2).sum()
         + 0.5 * (u.uy[:, -1] ** 2).sum())
    return 0.5 * float(s) * grid.cell_area


def mixing_energy(grid: Grid, phi: ScalarField, pot: Potential) -> float:
    """Discrete free energy: interior-face Dirichlet part plus bulk midpoint."""
    g = gradient_to_faces(phi)
    grad2 = float((g.ux ** 2).sum() + (g.uy ** 2).sum()) * grid.cell_area
    bulk = cell_integral(grid, pot.f_val(phi.values))
    return 0.5 * grad2 + bulk


def diagnostics(traj: Trajectory, pot: Potential) -> dict:
    """Per-checkpoint series: mass, kinetic and mixing energy, divergence."""
    grid = traj.grid
    out = {"t": [], "mass": [], "E_kin": [], "E_mix": [], "div_res": []}
    for s in traj.states:
        out["t"].append(s.t)
        out["mass"].append(cell_integral(grid, s.phi.values))
        out["E_kin"].append(kinetic_energy(grid, s.u))
        out["E_mix"].append(mixing_energy(grid, s.phi, pot))
        out["div_res"].append(float(np.abs(
            divergence_values(grid, s.u.ux, s.u.uy)).max()))
    return {k: np.array(v) for k, v in out.items()}


def tangential_slip(traj: Trajectory) -> float:
    """Max gap between the post-projection tangential trace and the control."""
    worst = 0.0
    for n, s in enumerate(traj.states):
        tan, _ = velocity_trace(s.u)
        worst = max(worst, float(np.abs(tan.values - traj.control.tangential[n]).max()))
    return worst
