"""Backward-in-time adjoint solver and boundary multiplier reconstruction.

The continuous adjoint system is discretized with the forward solver's
operators and marched backward through the substitution ``tau = T - t``
(optimize-then-discretize):

  momentum:  -p_t - nu lap p + (u*.grad)p - (p.grad^T)u* + zeta grad(phi*)
             - grad(phat) = u* - u_Q,     p = 0 on the boundary,
             divergence-free via projection (phat is the negated projection
             pressure, normalized to zero mean);
  phase:     -zeta_t - u*.grad(zeta) - p.grad(lap phi*)
             + div((grad p).grad phi*) + div((Hess phi*).p)
             + lap^2 zeta - F''(phi*) lap(zeta) = phi* - phi_Q,
             with zero normal derivative of zeta and of lap(zeta);
  terminal:  p(T) = u*(T) - u_Omega,  zeta(T) = phi*(T) - phi_Omega.

The two divergence terms are discretized literally (cell-centered stencils);
the product-rule identity that combines them is used only as a cross-check
in the tests.  Tracking mismatches are injected per backward step with
trapezoid panel weights, so their total matches the cost quadrature exactly.
The step from t_{n+1} to t_n evaluates base fields at level n, mirroring
where the linearized step uses them; the gap against the exact transpose is
first order in dt and is measured by the duality and gradient oracles.

Each backward step solves the momentum sub-step first and feeds the fresh
adjoint velocity into the phase sub-step, mirroring (in reverse) the forward
ordering.  All solves are increment-form: zero mismatch data yields an
exactly zero adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrajectoryIncomplete
from .grid import (BoundaryTrace, ScalarField, VelocityField,
                   dirichlet_wall_gradient)
from .linsolve import get_operator_set
from .objective import Targets
from .operators import (VelocityBC, adjoint_phase_coupling, advect_scalar,
                        capillary_force, convective_momentum,
                        extrapolate_cells_to_faces, project_velocity,
                        transpose_gradient_contraction, velocity_laplacian)
from .potential import Potential
from .state import SimConfig, Trajectory


@dataclass
class AdjointState:
    """Adjoint unknowns at one time node.

    ``p`` vanishes on all boundary faces; ``phat`` has zero mean.  ``nu``
    records the viscosity of the solve so the boundary multipliers can be
    reconstructed without the configuration object.

    The boundary multipliers must pair with the solver stage at which the
    control enters the discrete system: the control slice at node m drives
    the tentative solve of the step INTO node m, so ``p_tent`` holds that
    step's pre-projection adjoint velocity and ``phat`` that step's
    projection multiplier.  The marching field ``p`` stays the projected,
    divergence-free one.  Node 0 never pairs with a feasible variation
    (perturbations vanish at t=0); it carries copies of node 1's stage
    fields.
    """

    t: float
    p: VelocityField
    zeta: ScalarField
    phat: ScalarField
    nu: float = 1.0
    p_tent: VelocityField = None

    @property
    def grid(self):
        return self.zeta.grid


def _interior_mismatch(grid, u, target):
    """(u - target) on interior faces, zeros on boundary faces."""
    dx = u.ux - target.ux
    dy = u.uy - target.uy
    dx[0, :] = 0.0
    dx[-1, :] = 0.0
    dy[:, 0] = 0.0
    dy[:, -1] = 0.0
    return dx, dy


def _project_capture(ops, z, lin_tol, div_tol, label):
    pressure, div_res = project_velocity(ops, z, lin_tol)
    scale = max(1.0, np.abs(z.ux).max(), np.abs(z.uy).max())
    if div_res > div_tol * scale:
        from .errors import LinearSolveFailure
        raise LinearSolveFailure(
            f"{label} divergence residual {div_res:.3e} too large",
            residual=div_res, tolerance=div_tol)
    return pressure


def _smoothed_dual(ops, p_state, lin_tol, dt):
    """Tentative-stage dual: the implicit velocity solve applied to the
    projected dual, rescaled to O(1).  This is the field the boundary
    control pairs with."""
    grid = ops.grid
    eff = VelocityField.zeros(grid)
    eff.ux[1:-1, :] = ops.solve_helm_ux(p_state.ux[1:-1, :], lin_tol) / dt
    eff.uy[:, 1:-1] = ops.solve_helm_uy(p_state.uy[:, 1:-1], lin_tol) / dt
    return eff


def solve_adjoint(base: Trajectory, targets: Targets, cfg: SimConfig,
                  pot: Potential) -> list:
    """Solve the adjoint system backward; returns states from t=T down to 0.

    The velocity dual is marched in the transpose order of the forward
    step: tracking source and explicit terms are accumulated first, the
    result is projected (yielding the pressure multiplier), and the
    implicit viscous solve is applied last, yielding the tentative-stage
    dual the boundary data pairs with.  Explicit adjoint terms act on that
    smoothed stage field; this removes the dominant transposition error of
    a naive backward march while keeping the continuous adjoint operators.
    """
    grid = base.grid
    if base.num_steps != cfg.num_steps:
        raise TrajectoryIncomplete(
            f"trajectory has {base.num_steps} steps, config expects {cfg.num_steps}")
    targets.validate(grid, base.num_steps + 1)

    ops = get_operator_set(grid, cfg.dt, cfg.nu, pot.stabilization)
    dt = cfg.dt
    m_steps = cfg.num_steps
    bc0 = VelocityBC.zero(grid)

    final = base.states[-1]
    p = VelocityField.zeros(grid)
    p.ux[1:-1, :] = final.u.ux[1:-1, :] - targets.u_omega.ux[1:-1, :]
    p.uy[:, 1:-1] = final.u.uy[:, 1:-1] - targets.u_omega.uy[:, 1:-1]
    zeta = final.phi.values - targets.phi_omega.values

    out = [AdjointState(final.t, p.copy(), ScalarField(grid, zeta.copy()),
                        None, cfg.nu)]

    # terminal dual: terminal mismatch plus the trapezoid-endpoint share of
    # the running tracking term
    z = VelocityField.zeros(grid)
    mx, my = _interior_mismatch(grid, final.u, targets.u_q_at(m_steps))
    z.ux[1:-1, :] = p.ux[1:-1, :] + 0.5 * dt * mx[1:-1, :]
    z.uy[:, 1:-1] = p.uy[:, 1:-1] + 0.5 * dt * my[:, 1:-1]
    pressure = _project_capture(ops, z, cfg.lin_tol, cfg.div_tol, "adjoint")
    out[0].phat = ScalarField(grid, -pressure)
    p_eff = _smoothed_dual(ops, z, cfg.lin_tol, dt)
    out[0].p_tent = p_eff

    for m in range(m_steps, 0, -1):
        n = m - 1
        s_n = base.states[n]
        s_np1 = base.states[m]
        u_hat = s_n.u
        phi_hat = s_n.phi.values

        # -- adjoint phase sub-step (marching form, increment solve)
        a_zeta = ops.apply_a(zeta)
        rhs = -ops.apply_a(a_zeta)
        if not cfg.disable_potential:
            rhs = rhs + pot.f_d2(phi_hat) * a_zeta
        if not cfg.disable_convection:
            rhs = rhs + advect_scalar(grid, u_hat, zeta)
        if not cfg.disable_capillary:
            coupling, _, _ = adjoint_phase_coupling(grid, p_eff, phi_hat)
            rhs = rhs + coupling
        rhs = rhs + 0.5 * ((s_np1.phi.values - targets.phi_q_at(m).values)
                           + (phi_hat - targets.phi_q_at(n).values))
        zeta_new = zeta + ops.solve_ch(rhs, cfg.lin_tol)

        # -- velocity dual at node n: explicit adjoint terms on the stage
        # field, node-weighted tracking source, then project and smooth
        z = VelocityField.zeros(grid)
        z.ux[1:-1, :] = p_eff.ux[1:-1, :]
        z.uy[:, 1:-1] = p_eff.uy[:, 1:-1]
        ex = np.zeros((grid.nx - 1, grid.ny))
        ey = np.zeros((grid.nx, grid.ny - 1))
        if not cfg.disable_convection:
            cvx, cvy = convective_momentum(grid, u_hat, p_eff, bc0)
            tgx, tgy = transpose_gradient_contraction(grid, p_eff, u_hat)
            capx, capy = capillary_force(grid, zeta, phi_hat)
            ex = ex + cvx - tgx - capx
            ey = ey + cvy - tgy - capy
        w_n = dt if n > 0 else 0.5 * dt
        mx, my = _interior_mismatch(grid, s_n.u, targets.u_q_at(n))
        z.ux[1:-1, :] += dt * ex + w_n * mx[1:-1, :]
        z.uy[:, 1:-1] += dt * ey + w_n * my[:, 1:-1]

        pressure = _project_capture(ops, z, cfg.lin_tol, cfg.div_tol, "adjoint")
        p = z
        p_eff = _smoothed_dual(ops, p, cfg.lin_tol, dt)
        zeta = zeta_new

        out.append(AdjointState(s_n.t, p.copy(), ScalarField(grid, zeta.copy()),
                                ScalarField(grid, -pressure), cfg.nu, p_eff))
    return out


def multiplier_traces(adj_state: AdjointState, phi_star: np.ndarray = None):
    """Boundary multipliers of one adjoint slice.

    Returns ``(p1_x, p1_y, zeta1_flux)`` where
    ``p1 = -phat n - nu dp/dn`` componentwise and ``zeta1_flux`` is the
    prescribed outward-normal derivative of the second multiplier,
    ``-[(grad p).grad phi* + (Hess phi*).p] . n`` (``None`` when ``phi_star``
    is not supplied).  The trace of the second multiplier itself is only
    determined up to a gauge, so the flux is what gets exposed.

    The normal derivative uses the wall-aware differences of
    :func:`~chnsopt.grid.dirichlet_wall_gradient` (the adjoint velocity
    vanishes on the boundary), and it carries the viscosity factor: both
    choices are pinned by the finite-difference gradient oracle.
    """
    grid = adj_state.grid
    normals = grid.face_normals()
    phat_face = extrapolate_cells_to_faces(grid, adj_state.phat.values)
    p_stage = adj_state.p_tent if adj_state.p_tent is not None else adj_state.p
    dpdn_x, dpdn_y = dirichlet_wall_gradient(p_stage)
    nu = adj_state.nu
    p1x = BoundaryTrace(grid, -phat_face.values * normals[:, 0] - nu * dpdn_x.values)
    p1y = BoundaryTrace(grid, -phat_face.values * normals[:, 1] - nu * dpdn_y.values)

    zeta1_flux = None
    if phi_star is not None:
        _, flux_x, flux_y = adjoint_phase_coupling(grid, adj_state.p, phi_star)
        fx = extrapolate_cells_to_faces(grid, flux_x).values
        fy = extrapolate_cells_to_faces(grid, flux_y).values
        zeta1_flux = BoundaryTrace(grid, -(fx * normals[:, 0] + fy * normals[:, 1]))
    return p1x, p1y, zeta1_flux


def boundary_multipliers(adj: list, base: Trajectory) -> dict:
    """Multiplier series for every adjoint slice, keyed by time.

    Returns ``{"t": array, "p1_x": [traces], "p1_y": [traces],
    "zeta1_flux": [traces]}`` ordered like ``adj``.
    """
    dt = base.dt
    out = {"t": [], "p1_x": [], "p1_y": [], "zeta1_flux": []}
    for a in adj:
        n = int(round(a.t / dt))
        phi_star = base.states[n].phi.values
        p1x, p1y, z1 = multiplier_traces(a, phi_star)
        out["t"].append(a.t)
        out["p1_x"].append(p1x)
        out["p1_y"].append(p1y)
        out["zeta1_flux"].append(z1)
    out["t"] = np.array(out["t"])
    return out
