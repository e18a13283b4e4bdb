"""Finite-difference and duality oracles for the derivative machinery.

These certify, with code paths independent of the solvers under test:

* ``taylor_test`` -- the linearized solver is the derivative of the
  control-to-state map: remainders of two nonlinear solves against the
  linearized output must shrink quadratically in the step size;
* ``fd_gradient`` / ``gradcheck`` -- the adjoint-based reduced gradient
  matches central differences of the reduced cost;
* ``adjoint_identity_test`` -- the linearized and adjoint solvers satisfy
  the discrete duality identity (tracking pairings of linearized outputs
  equal the boundary pairing of the first multiplier).

The Taylor and FD oracles use only forward solves and cost evaluations, so
a failure localizes blame to the solver being certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (Grid, ScalarField, VelocityField, cell_inner,
                   gradient_to_faces, laplacian_neumann_values,
                   velocity_inner)
from .linearized import solve_linearized
from .adjoint import solve_adjoint
from .objective import Targets, eval_cost, reduced_gradient
from .potential import Potential
from .state import BoundaryControl, SimConfig, Trajectory, solve_forward

DEFAULT_EPS_LADDER = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
DEGENERATE_FLOOR = 1e-12


def random_smooth_direction(grid: Grid, time_nodes, seed: int,
                            modes: int = 3) -> BoundaryControl:
    """Seeded tangential perturbation, smooth along the boundary and in
    time, vanishing at t=0 (feasible as a control variation)."""
    rng = np.random.default_rng(seed)
    eta = BoundaryControl.zeros(grid, np.asarray(time_nodes, dtype=float))
    arc = np.linspace(0.0, 2.0 * np.pi, grid.n_boundary_faces, endpoint=False)
    T = eta.time_nodes[-1]
    profile = np.zeros(grid.n_boundary_faces)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2)
        profile += a * np.sin(k * arc) + b * np.cos(k * arc)
    c_ramp, c_bump = rng.standard_normal(2)
    for n, t in enumerate(eta.time_nodes):
        shape = c_ramp * (t / T) + c_bump * np.sin(np.pi * t / T)
        eta.tangential[n] = shape * profile
    return eta


def _velocity_h1_norm2(grid: Grid, u: VelocityField) -> float:
    l2 = velocity_inner(grid, u, u)
    gx2 = (np.diff(u.ux, axis=0) / grid.hx) ** 2
    gy2 = (np.diff(u.ux, axis=1) / grid.hy) ** 2
    hx2 = (np.diff(u.uy, axis=0) / grid.hx) ** 2
    hy2 = (np.diff(u.uy, axis=1) / grid.hy) ** 2
    grad2 = (gx2.sum() + gy2.sum() + hx2.sum() + hy2.sum()) * grid.cell_area
    return l2 + float(grad2)


def _phase_h1_norm2(grid: Grid, v: np.ndarray) -> float:
    f = ScalarField(grid, v)
    g = gradient_to_faces(f)
    return cell_inner(grid, v, v) + float(
        ((g.ux ** 2).sum() + (g.uy ** 2).sum()) * grid.cell_area)


def _phase_h2_norm2(grid: Grid, v: np.ndarray) -> float:
    lap = laplacian_neumann_values(grid, v)
    return _phase_h1_norm2(grid, v) + cell_inner(grid, lap, lap)


def trajectory_w_norm(base: Trajectory, other: Trajectory,
                      lin_states=None, eps: float = 0.0) -> float:
    """Discrete surrogate of the weak-solution space norm of the remainder
    ``other - base - eps * linearized``: sup-in-time L2 of the velocity part
    plus L2-in-time H1, and sup-in-time H1 of the phase plus L2-in-time H2.
    """
    grid = base.grid
    dt = base.dt
    sup_u = 0.0
    sup_phi = 0.0
    int_u = 0.0
    int_phi = 0.0
    for n in range(len(base.states)):
        du = VelocityField(
            grid,
            other.states[n].u.ux - base.states[n].u.ux,
            other.states[n].u.uy - base.states[n].u.uy)
        dphi = other.states[n].phi.values - base.states[n].phi.values
        if lin_states is not None:
            du.ux -= eps * lin_states[n].w.ux
            du.uy -= eps * lin_states[n].w.uy
            dphi = dphi - eps * lin_states[n].psi.values
        sup_u = max(sup_u, np.sqrt(velocity_inner(grid, du, du)))
        sup_phi = max(sup_phi, np.sqrt(_phase_h1_norm2(grid, dphi)))
        w = dt if 0 < n < len(base.states) - 1 else 0.5 * dt
        int_u += w * _velocity_h1_norm2(grid, du)
        int_phi += w * _phase_h2_norm2(grid, dphi)
    return sup_u + sup_phi + np.sqrt(int_u) + np.sqrt(int_phi)


@dataclass
class TaylorReport:
    eps_list: list
    remainder_norms: list
    fitted_order: float          # None when degenerate
    degenerate: bool = False

    def lines(self):
        out = ["eps            remainder"]
        for e, r in zip(self.eps_list, self.remainder_norms):
            out.append(f"{e:<13.6e}  {r:.6e}")
        if self.degenerate:
            out.append("fitted_order = degenerate (remainders at roundoff)")
        else:
            out.append(f"fitted_order = {self.fitted_order:.4f}")
        return out


def taylor_test(u0, phi0, h_hat: BoundaryControl, eta: BoundaryControl,
                cfg: SimConfig, pot: Potential,
                eps_list=DEFAULT_EPS_LADDER) -> TaylorReport:
    """Fit the order of the Taylor remainder of the control-to-state map.

    Remainders below the roundoff floor (zero directions, linear physics)
    are flagged degenerate instead of fitted.
    """
    eps_list = list(eps_list)
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        from .errors import ValidationError
        raise ValidationError(["eps ladder must be strictly decreasing"])
    base = solve_forward(u0, phi0, h_hat, cfg, pot)
    lin = solve_linearized(base, eta, cfg, pot)
    remainders = []
    for eps in eps_list:
        pert = solve_forward(u0, phi0, h_hat.axpy(eps, eta), cfg, pot)
        remainders.append(trajectory_w_norm(base, pert, lin, eps))
    scale = trajectory_w_norm(base, base)  # zero; use state size instead
    state_size = max(
        np.abs(base.states[-1].u.ux).max(initial=0.0),
        np.abs(base.states[-1].phi.values).max(initial=0.0), 1.0)
    if max(remainders) <= DEGENERATE_FLOOR * state_size:
        return TaylorReport(eps_list, remainders, None, degenerate=True)
    slope = np.polyfit(np.log(eps_list), np.log(remainders), 1)[0]
    return TaylorReport(eps_list, remainders, float(slope))


def fd_gradient(u0, phi0, h: BoundaryControl, eta: BoundaryControl,
                eps: float, cfg: SimConfig, pot: Potential,
                targets: Targets = None, self_targets: bool = False) -> float:
    """Central difference of the reduced cost along ``eta``.

    With ``self_targets`` the tracking data is taken from each perturbed
    trajectory itself, which cancels every tracking term exactly and leaves
    the pure control effort (the quadratic-exactness reference case).
    """
    values = []
    for sgn in (+1.0, -1.0):
        h_p = h.axpy(sgn * eps, eta)
        traj = solve_forward(u0, phi0, h_p, cfg, pot)
        tg = Targets.from_trajectory(traj) if self_targets else targets
        values.append(eval_cost(traj, h_p, tg).total)
    return (values[0] - values[1]) / (2.0 * eps)


@dataclass
class GradCheckReport:
    directions: int
    fd_values: list
    adjoint_values: list
    relative_errors: list
    worst_error: float

    def lines(self):
        out = ["dir   fd_value        adjoint_value   rel_error"]
        for i, (f, a, r) in enumerate(zip(self.fd_values, self.adjoint_values,
                                          self.relative_errors)):
            out.append(f"{i:<4d}  {f:+.8e}  {a:+.8e}  {r:.3e}")
        out.append(f"worst_error = {self.worst_error:.6e}")
        return out


def gradcheck(u0, phi0, h: BoundaryControl, targets: Targets,
              cfg: SimConfig, pot: Potential, n_directions: int = 5,
              eps: float = 1e-4, seed: int = 0) -> GradCheckReport:
    """Adjoint reduced gradient against central differences over seeded
    random smooth directions."""
    base = solve_forward(u0, phi0, h, cfg, pot)
    adj = solve_adjoint(base, targets, cfg, pot)
    grad = reduced_gradient(h, adj)
    fd_vals, adj_vals, rels = [], [], []
    for k in range(n_directions):
        eta = random_smooth_direction(h.grid, h.time_nodes, seed + 101 * k)
        a = grad.inner(eta)
        f = fd_gradient(u0, phi0, h, eta, eps, cfg, pot, targets)
        fd_vals.append(f)
        adj_vals.append(a)
        rels.append(abs(a - f) / max(abs(f), 1e-30))
    return GradCheckReport(n_directions, fd_vals, adj_vals, rels, max(rels))


def adjoint_identity_test(u0, phi0, h: BoundaryControl, eta: BoundaryControl,
                          targets: Targets, cfg: SimConfig, pot: Potential):
    """Relative defect of the discrete duality identity.

    Left side: tracking mismatches of the base trajectory paired with the
    linearized outputs (trapezoid in time, terminal terms included).  Right
    side: boundary pairing of the first multiplier with the perturbation.
    Returns ``(defect, lhs, rhs)``; a zero-zero identity reports defect 0.
    """
    grid = phi0.grid
    base = solve_forward(u0, phi0, h, cfg, pot)
    lin = solve_linearized(base, eta, cfg, pot)
    adj = solve_adjoint(base, targets, cfg, pot)

    times = base.times()
    w = np.zeros(times.size)
    d = np.diff(times)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    lhs = 0.0
    for n, s in enumerate(base.states):
        uq = targets.u_q_at(n)
        du = VelocityField(grid, s.u.ux - uq.ux, s.u.uy - uq.uy)
        lhs += w[n] * velocity_inner(grid, du, lin[n].w)
        lhs += w[n] * cell_inner(grid, s.phi.values - targets.phi_q_at(n).values,
                                 lin[n].psi.values)
    s_t = base.states[-1]
    du_t = VelocityField(grid, s_t.u.ux - targets.u_omega.ux,
                         s_t.u.uy - targets.u_omega.uy)
    lhs += velocity_inner(grid, du_t, lin[-1].w)
    lhs += cell_inner(grid, s_t.phi.values - targets.phi_omega.values,
                      lin[-1].psi.values)

    p1 = reduced_gradient(BoundaryControl.zeros(grid, h.time_nodes.copy()), adj)
    rhs = p1.inner(eta)
    denom = max(abs(lhs), abs(rhs))
    defect = 0.0 if denom == 0.0 else abs(lhs - rhs) / denom
    return defect, lhs, rhs
