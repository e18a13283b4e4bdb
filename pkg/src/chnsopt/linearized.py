"""Linearized solver: directional derivative of the control-to-state map.

Every discrete operator here is the exact linearization of the
corresponding forward operator (same stencils, same factorizations, same
increment form), including the stabilization term, which linearizes to
``S (psi^{n+1} - psi^n)``.  Consequently the defect

    S(h + eps*eta) - S(h) - eps * (w, psi)

of two nonlinear solves against this solver is exactly quadratic in eps,
which is what the Taylor-test oracle certifies.

The perturbation control must vanish at t=0 (zero initial data must be
compatible with the boundary condition).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TimeNodeMismatch, ValidationError
from .grid import ScalarField, VelocityField, divergence_values
from .linsolve import get_operator_set
from .operators import (capillary_force, convect_phase_conservative,
                        convective_momentum, project_velocity,
                        velocity_laplacian)
from .potential import Potential
from .state import BoundaryControl, SimConfig, Trajectory


@dataclass
class LinearizedState:
    """One time level of the linearized system."""

    t: float
    w: VelocityField
    psi: ScalarField
    mu_psi: ScalarField

    @property
    def grid(self):
        return self.psi.grid


def solve_linearized(base: Trajectory, eta: BoundaryControl, cfg: SimConfig,
                     pot: Potential) -> list:
    """March the linearization of the forward scheme around ``base``.

    ``eta`` shares the base trajectory's time nodes and has a zero t=0
    slice; the result is the exact directional derivative of the discrete
    control-to-state map at the base control in direction ``eta``.
    """
    grid = base.grid
    eta.validate()
    base.control.check_same_nodes(eta)
    if (np.abs(eta.tangential[0]).max(initial=0.0) > 1e-12
            or np.abs(eta.normal[0]).max(initial=0.0) > 1e-12):
        raise ValidationError(
            ["perturbation control must vanish at t=0 (zero initial data)"])
    if base.num_steps != cfg.num_steps:
        raise TimeNodeMismatch("base trajectory does not match the time grid")

    ops = get_operator_set(grid, cfg.dt, cfg.nu, pot.stabilization)
    s_stab = pot.stabilization

    states = [LinearizedState(0.0, VelocityField.zeros(grid),
                              ScalarField.zeros(grid), ScalarField.zeros(grid))]
    w = VelocityField.zeros(grid)
    psi = np.zeros((grid.nx, grid.ny))

    for n in range(cfg.num_steps):
        base_n = base.states[n]
        base_np1 = base.states[n + 1]
        h_bc = base.control.bc(n + 1)
        eta_bc = eta.bc(n + 1)

        u_hat = base_n.u.copy()
        h_bc.impose_on(u_hat)
        phi_hat = base_n.phi.values

        w_work = w.copy()
        eta_bc.impose_on(w_work)

        # -- linearized phase sub-step
        if cfg.disable_convection:
            conv_psi = 0.0
        else:
            conv_psi = (convect_phase_conservative(grid, u_hat, psi)
                        + convect_phase_conservative(grid, w_work, phi_hat))
        fpp_psi = np.zeros_like(psi) if cfg.disable_potential else pot.f_d2(phi_hat) * psi
        rhs = -conv_psi + ops.apply_a(fpp_psi) - ops.apply_a(ops.apply_a(psi))
        dpsi = ops.solve_ch(rhs, cfg.lin_tol)
        psi_new = psi + dpsi
        mu_psi_new = -ops.apply_a(psi_new) + fpp_psi + s_stab * dpsi

        # -- linearized tentative velocity
        lap_x, lap_y = velocity_laplacian(grid, w_work, eta_bc)
        rhs_x = cfg.nu * lap_x
        rhs_y = cfg.nu * lap_y
        if not cfg.disable_convection:
            cx1, cy1 = convective_momentum(grid, u_hat, w_work, eta_bc)
            cx2, cy2 = convective_momentum(grid, w_work, u_hat, h_bc)
            rhs_x = rhs_x - cx1 - cx2
            rhs_y = rhs_y - cy1 - cy2
        if not cfg.disable_capillary:
            cx1, cy1 = capillary_force(grid, mu_psi_new, phi_hat)
            cx2, cy2 = capillary_force(grid, base_np1.mu.values, psi)
            rhs_x = rhs_x + cx1 + cx2
            rhs_y = rhs_y + cy1 + cy2
        w_work.ux[1:-1, :] += ops.solve_helm_ux(rhs_x, cfg.lin_tol)
        w_work.uy[:, 1:-1] += ops.solve_helm_uy(rhs_y, cfg.lin_tol)

        _, div_res = project_velocity(ops, w_work, cfg.lin_tol)
        scale = max(1.0, np.abs(w_work.ux).max(), np.abs(w_work.uy).max())
        if div_res > cfg.div_tol * scale:
            from .errors import LinearSolveFailure
            raise LinearSolveFailure(
                f"linearized divergence residual {div_res:.3e} too large",
                residual=div_res, tolerance=cfg.div_tol)

        w = w_work
        psi = psi_new
        states.append(LinearizedState(
            base_np1.t, w.copy(), ScalarField(grid, psi.copy()),
            ScalarField(grid, mu_psi_new)))
    return states
