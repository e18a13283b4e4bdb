"""Projected-gradient descent over the admissible control set.

The admissible set is the discrete surrogate of the paper-level control
constraints: a closed L2(Sigma) norm ball of radius L, intersected with the
mode constraint (tangential-only data, or free data with zero net flux per
time node) and an optional pointwise cap.  Projection is cheap (no solves);
every objective evaluation is a full forward solve, every gradient an
adjoint solve.

The t=0 control slice is pinned throughout (compatibility with the initial
velocity): descent directions are zeroed there and the slice is restored
after each projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .objective import Targets, eval_cost, reduced_gradient
from .potential import Potential
from .state import BoundaryControl, SimConfig, solve_forward
from .adjoint import solve_adjoint


@dataclass
class AdmissibleSet:
    """Discrete admissible control set.

    ``L`` is the L2(Sigma) norm radius; ``mode`` selects whether the normal
    component is forced to zero or merely flux-corrected; ``hmax`` is an
    optional pointwise bound applied after the ball projection (followed by
    one flux re-correction in free mode).
    """

    L: float
    mode: str = "tangential_only"
    hmax: float = None

    def __post_init__(self):
        if self.L <= 0:
            raise ValidationError(["admissible-set radius L must be positive"])
        if self.mode not in ("tangential_only", "free_with_zero_flux"):
            raise ValidationError([f"unknown admissible-set mode '{self.mode}'"])
        if self.hmax is not None and self.hmax <= 0:
            raise ValidationError(["hmax must be positive when given"])


@dataclass
class OptimizerConfig:
    max_iters: int = 50
    c1: float = 1e-4
    beta: float = 0.5
    step0: float = 1.0
    grad_tol: float = 1e-8
    cost_tol: float = 0.0
    max_backtracks: int = 25

    def __post_init__(self):
        problems = []
        if not 0.0 < self.c1 < 1.0:
            problems.append("armijo constant c1 must lie in (0, 1)")
        if not 0.0 < self.beta < 1.0:
            problems.append("backtrack factor beta must lie in (0, 1)")
        if self.step0 <= 0:
            problems.append("step0 must be positive")
        if self.grad_tol < 0 or self.cost_tol < 0:
            problems.append("tolerances must be nonnegative")
        if self.max_iters < 1:
            problems.append("max_iters must be at least 1")
        if problems:
            raise ValidationError(problems)


@dataclass
class OptimizationResult:
    h_final: BoundaryControl
    cost_history: list
    grad_norm_history: list
    iterations: int
    termination_reason: str
    line_search_failures: int = 0
    trajectory: object = None
    accepted_steps: list = field(default_factory=list)

    def totals(self) -> np.ndarray:
        return np.array([c.total for c in self.cost_history])


def _flux_correct(h: BoundaryControl):
    lengths = h.grid.face_lengths()
    flux = (h.normal * lengths).sum(axis=1)
    h.normal -= (flux / lengths.sum())[:, None]


def project(h: BoundaryControl, aset: AdmissibleSet) -> BoundaryControl:
    """Project onto the admissible set.

    Order: mode constraint, then exact radial projection onto the norm
    ball, then the optional pointwise clamp with one flux re-correction.
    Feasible inputs are returned unchanged.
    """
    out = h.copy()
    if aset.mode == "tangential_only":
        out.normal[:] = 0.0
    else:
        _flux_correct(out)
    nrm = out.norm()
    if nrm > aset.L:
        out = out.scaled(aset.L / nrm)
    if aset.hmax is not None:
        np.clip(out.tangential, -aset.hmax, aset.hmax, out=out.tangential)
        np.clip(out.normal, -aset.hmax, aset.hmax, out=out.normal)
        if aset.mode == "free_with_zero_flux":
            _flux_correct(out)
    return out


def _projected_step(h, g, alpha, aset, h0_slice):
    trial = project(h.axpy(-alpha, g), aset)
    trial.tangential[0] = h0_slice[0].copy()
    trial.normal[0] = h0_slice[1].copy()
    return trial


def optimize(h0: BoundaryControl, u0, phi0, targets: Targets,
             aset: AdmissibleSet, cfg: SimConfig, pot: Potential,
             opt: OptimizerConfig, verbose: bool = False,
             callback=None) -> OptimizationResult:
    """Projected-gradient descent with Armijo backtracking on the true cost.

    Each Armijo trial is a forward solve; the accepted trajectory is reused
    for the next gradient.  The cost history is monotone by construction.
    """
    h = project(h0, aset)
    h.tangential[0] = h0.tangential[0].copy()
    h.normal[0] = h0.normal[0].copy()
    h0_slice = (h0.tangential[0], h0.normal[0])

    traj = solve_forward(u0, phi0, h, cfg, pot)
    cost = eval_cost(traj, h, targets)
    cost_history = [cost]
    grad_norms = []
    steps = []
    reason = "max_iters"
    ls_failures = 0
    it = 0

    for it in range(1, opt.max_iters + 1):
        adj = solve_adjoint(traj, targets, cfg, pot)
        g = reduced_gradient(h, adj)
        g.tangential[0] = 0.0
        g.normal[0] = 0.0

        residual_ctrl = h.axpy(-1.0, _projected_step(h, g, opt.step0, aset, h0_slice))
        grad_norm = residual_ctrl.norm() / opt.step0
        grad_norms.append(grad_norm)
        if verbose:
            print(f"iter {it - 1:3d}: J = {cost.total:.6e}  residual = {grad_norm:.3e}")
        if callback is not None:
            callback(it - 1, h, cost, grad_norm)
        if grad_norm <= opt.grad_tol:
            reason = "grad_tol"
            it -= 1
            break

        alpha = opt.step0
        accepted = False
        for _ in range(opt.max_backtracks):
            trial = _projected_step(h, g, alpha, aset, h0_slice)
            step = h.axpy(-1.0, trial)
            step_sq = step.inner(step)
            if step_sq == 0.0:
                break
            traj_trial = solve_forward(u0, phi0, trial, cfg, pot)
            cost_trial = eval_cost(traj_trial, trial, targets)
            if cost_trial.total <= cost.total - (opt.c1 / alpha) * step_sq:
                h, traj, new_cost = trial, traj_trial, cost_trial
                steps.append(alpha)
                accepted = True
                break
            alpha *= opt.beta
        if not accepted:
            ls_failures += 1
            reason = "line_search_failure"
            break

        prev_total = cost.total
        cost = new_cost
        cost_history.append(cost)
        if opt.cost_tol > 0 and abs(prev_total - cost.total) <= opt.cost_tol * max(
                1.0, cost_history[0].total):
            reason = "cost_tol"
            break

    return OptimizationResult(
        h_final=h,
        cost_history=cost_history,
        grad_norm_history=grad_norms,
        iterations=it,
        termination_reason=reason,
        line_search_failures=ls_failures,
        trajectory=traj,
        accepted_steps=steps,
    )
