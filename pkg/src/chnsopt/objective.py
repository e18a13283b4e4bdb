"""Cost functional and reduced boundary gradient.

The cost is the quadratic tracking functional: two running tracking terms,
two terminal tracking terms and the boundary control effort,

    J = 1/2 int_0^T |u - u_Q|^2 + 1/2 int_0^T |phi - phi_Q|^2
        + 1/2 |u(T) - u_Omega|^2 + 1/2 |phi(T) - phi_Omega|^2
        + 1/2 int_0^T |h|^2_{boundary}.

Time integrals use the composite trapezoid rule over the checkpoints;
velocity norms use interior-face quadrature, phase norms cell midpoint
quadrature, and control norms the face-length weighted trace quadrature
(the same pairing the optimizer and oracles use).

The reduced gradient on the space-time boundary is assembled from the
adjoint solution as

    g = h - phat n - dp/dn     (outward normal, per face, per component),

projected onto the tangential/normal frame of each face.  At an interior
stationary point it vanishes; under an active norm-ball constraint its
nonnegative pairing with feasible variations is the discrete first-order
optimality condition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TimeNodeMismatch
from .grid import (Grid, ScalarField, VelocityField, cell_inner,
                   velocity_inner)
from .state import BoundaryControl, Trajectory


@dataclass
class Targets:
    """Tracking data: running targets (constant or per-node series) and
    terminal targets."""

    u_q: object          # VelocityField or list[VelocityField]
    phi_q: object        # ScalarField or list[ScalarField]
    u_omega: VelocityField
    phi_omega: ScalarField

    @classmethod
    def zero(cls, grid: Grid, num_nodes: int) -> "Targets":
        return cls(VelocityField.zeros(grid), ScalarField.zeros(grid),
                   VelocityField.zeros(grid), ScalarField.zeros(grid))

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "Targets":
        """Tracking data that the generating control reproduces exactly."""
        return cls([s.u.copy() for s in traj.states],
                   [s.phi.copy() for s in traj.states],
                   traj.states[-1].u.copy(), traj.states[-1].phi.copy())

    def u_q_at(self, n: int) -> VelocityField:
        return self.u_q[n] if isinstance(self.u_q, list) else self.u_q

    def phi_q_at(self, n: int) -> ScalarField:
        return self.phi_q[n] if isinstance(self.phi_q, list) else self.phi_q

    def validate(self, grid: Grid, num_nodes: int):
        for series in (self.u_q, self.phi_q):
            if isinstance(series, list) and len(series) != num_nodes:
                raise ShapeMismatch(
                    f"target series has {len(series)} entries, need {num_nodes}")


@dataclass
class CostBreakdown:
    """The five cost terms; ``total`` is their sum."""

    track_u: float
    track_phi: float
    final_u: float
    final_phi: float
    control: float

    @property
    def total(self) -> float:
        return (self.track_u + self.track_phi + self.final_u
                + self.final_phi + self.control)

    def as_dict(self) -> dict:
        return {"track_u": self.track_u, "track_phi": self.track_phi,
                "final_u": self.final_u, "final_phi": self.final_phi,
                "control": self.control, "total": self.total}


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros(times.size)
    d = np.diff(times)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def eval_cost(traj: Trajectory, h: BoundaryControl, targets: Targets) -> CostBreakdown:
    grid = traj.grid
    times = traj.times()
    if h.num_nodes != times.size:
        raise TimeNodeMismatch("control and trajectory node counts differ")
    targets.validate(grid, times.size)
    w = _trapezoid_weights(times)

    track_u = 0.0
    track_phi = 0.0
    for n, s in enumerate(traj.states):
        uq = targets.u_q_at(n)
        du = VelocityField(grid, s.u.ux - uq.ux, s.u.uy - uq.uy)
        track_u += w[n] * velocity_inner(grid, du, du)
        dphi = s.phi.values - targets.phi_q_at(n).values
        track_phi += w[n] * cell_inner(grid, dphi, dphi)

    sT = traj.states[-1]
    duT = VelocityField(grid, sT.u.ux - targets.u_omega.ux, sT.u.uy - targets.u_omega.uy)
    final_u = 0.5 * velocity_inner(grid, duT, duT)
    dphiT = sT.phi.values - targets.phi_omega.values
    final_phi = 0.5 * cell_inner(grid, dphiT, dphiT)

    return CostBreakdown(track_u=0.5 * track_u, track_phi=0.5 * track_phi,
                         final_u=final_u, final_phi=final_phi,
                         control=0.5 * h.inner(h))


def reduced_gradient(h: BoundaryControl, adj: list) -> BoundaryControl:
    """Boundary gradient ``h - phat n - dp/dn`` as a control-shaped object.

    ``adj`` is the adjoint series from :func:`chnsopt.adjoint.solve_adjoint`
    in forward node order.  The outward-normal derivative of the adjoint
    velocity and the face-extrapolated pressure multiplier are combined per
    face and projected on the (tangent, outward normal) frame, so the
    result can be paired with controls through the same trace quadrature.
    """
    from .adjoint import multiplier_traces  # local import to avoid a cycle

    if len(adj) != h.num_nodes:
        raise TimeNodeMismatch("adjoint series and control node counts differ")
    grid = h.grid
    tangents = grid.face_tangents()
    normals = grid.face_normals()
    dt = float(h.time_nodes[1] - h.time_nodes[0])
    last = h.num_nodes - 1

    out = BoundaryControl.zeros(grid, h.time_nodes.copy())
    for a in adj:
        n = int(round(a.t / dt))
        p1x, p1y, _ = multiplier_traces(a)
        # g = h + p1 since p1 = -(phat n + nu dp/dn).  The terminal control
        # slice influences the discrete system through one full step while
        # the trace pairing weights it by the trapezoid endpoint dt/2, so
        # its multiplier part carries a factor two (verified dof-exact
        # against brute-force differentiation of the discrete cost).
        scale = 2.0 if n == last else 1.0
        out.tangential[n] = (h.tangential[n]
                             + scale * (p1x.values * tangents[:, 0]
                                        + p1y.values * tangents[:, 1]))
        out.normal[n] = (h.normal[n]
                         + scale * (p1x.values * normals[:, 0]
                                    + p1y.values * normals[:, 1]))
    return out


def control_inner(a: BoundaryControl, b: BoundaryControl) -> float:
    return a.inner(b)


def control_norm(a: BoundaryControl) -> float:
    return a.norm()
