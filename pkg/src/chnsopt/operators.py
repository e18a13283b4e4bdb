"""Shared MAC-grid stencils for the forward, linearized and adjoint steps.

All three solvers march with the same splitting, so the building blocks live
here: boundary-data bookkeeping, the viscous Laplacian with Dirichlet/ghost
closures, centered convection in conservative (mass-exact) and advective
forms, the capillary force, the transpose-gradient contraction, and the
pressure projection.

Tangential Dirichlet data enters through ghost layers half a cell outside
the wall (ghost = 2*wall - interior); normal data sits exactly on boundary
faces.  Trace values are stored at face centers, so tangential data is
averaged onto the staggered node positions before use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (BOTTOM, LEFT, RIGHT, TOP, BoundaryTrace, Grid,
                   VelocityField, divergence_values, laplacian_neumann_values)


@dataclass
class VelocityBC:
    """One time slice of velocity Dirichlet data in solver-ready form.

    Cartesian tangential components at face centers per edge (ascending cell
    index) plus the normal-component values to impose on boundary faces.
    """

    grid: Grid
    hx_bottom: np.ndarray   # x-velocity along the bottom wall, nx values
    hx_top: np.ndarray
    hy_left: np.ndarray     # y-velocity along the left wall, ny values
    hy_right: np.ndarray
    ux_left: np.ndarray     # normal (x) velocity on the left boundary faces
    ux_right: np.ndarray
    uy_bottom: np.ndarray   # normal (y) velocity on the bottom boundary faces
    uy_top: np.ndarray

    @classmethod
    def from_traces(cls, tangential: BoundaryTrace, normal: BoundaryTrace) -> "VelocityBC":
        g = tangential.grid
        t_b = tangential.edge_values(BOTTOM)
        t_r = tangential.edge_values(RIGHT)
        t_t = tangential.edge_values(TOP)
        t_l = tangential.edge_values(LEFT)
        n_b = normal.edge_values(BOTTOM)
        n_r = normal.edge_values(RIGHT)
        n_t = normal.edge_values(TOP)
        n_l = normal.edge_values(LEFT)
        # cartesian components: h = t*tau + n*n_out per edge
        return cls(
            grid=g,
            hx_bottom=t_b, hx_top=-t_t,
            hy_left=-t_l, hy_right=t_r,
            ux_left=-n_l, ux_right=n_r,
            uy_bottom=-n_b, uy_top=n_t,
        )

    @classmethod
    def zero(cls, grid: Grid) -> "VelocityBC":
        nx, ny = grid.nx, grid.ny
        z_x = np.zeros(nx)
        z_y = np.zeros(ny)
        return cls(grid, z_x, z_x.copy(), z_y, z_y.copy(),
                   z_y.copy(), z_y.copy(), z_x.copy(), z_x.copy())

    # tangential data averaged onto interior staggered node positions
    def tx_bottom_nodes(self):
        return 0.5 * (self.hx_bottom[:-1] + self.hx_bottom[1:])

    def tx_top_nodes(self):
        return 0.5 * (self.hx_top[:-1] + self.hx_top[1:])

    def ty_left_nodes(self):
        return 0.5 * (self.hy_left[:-1] + self.hy_left[1:])

    def ty_right_nodes(self):
        return 0.5 * (self.hy_right[:-1] + self.hy_right[1:])

    def impose_on(self, u: VelocityField):
        """Overwrite the boundary faces of ``u`` with this slice's normal data."""
        u.ux[0, :] = self.ux_left
        u.ux[-1, :] = self.ux_right
        u.uy[:, 0] = self.uy_bottom
        u.uy[:, -1] = self.uy_top

    def net_flux(self) -> float:
        g = self.grid
        return float((self.ux_right.sum() - self.ux_left.sum()) * g.hy
                     + (self.uy_top.sum() - self.uy_bottom.sum()) * g.hx)


def ghosted_ux(grid: Grid, ux: np.ndarray, bc: VelocityBC) -> np.ndarray:
    """ux extended by one tangential ghost row below and above the walls.

    Returns an ``(nx+1, ny+2)`` array; the ghost columns at the corner
    x-positions reuse the nearest face-center data (never consumed by the
    interior stencils).
    """
    nx, ny = grid.nx, grid.ny
    out = np.empty((nx + 1, ny + 2))
    out[:, 1:-1] = ux
    tb = np.empty(nx + 1)
    tt = np.empty(nx + 1)
    tb[1:-1] = bc.tx_bottom_nodes()
    tt[1:-1] = bc.tx_top_nodes()
    tb[0], tb[-1] = bc.hx_bottom[0], bc.hx_bottom[-1]
    tt[0], tt[-1] = bc.hx_top[0], bc.hx_top[-1]
    out[:, 0] = 2.0 * tb - ux[:, 0]
    out[:, -1] = 2.0 * tt - ux[:, -1]
    return out


def ghosted_uy(grid: Grid, uy: np.ndarray, bc: VelocityBC) -> np.ndarray:
    """uy extended by one tangential ghost column beyond the side walls."""
    nx, ny = grid.nx, grid.ny
    out = np.empty((nx + 2, ny + 1))
    out[1:-1, :] = uy
    tl = np.empty(ny + 1)
    tr = np.empty(ny + 1)
    tl[1:-1] = bc.ty_left_nodes()
    tr[1:-1] = bc.ty_right_nodes()
    tl[0], tl[-1] = bc.hy_left[0], bc.hy_left[-1]
    tr[0], tr[-1] = bc.hy_right[0], bc.hy_right[-1]
    out[0, :] = 2.0 * tl - uy[0, :]
    out[-1, :] = 2.0 * tr - uy[-1, :]
    return out


def velocity_laplacian(grid: Grid, u: VelocityField, bc: VelocityBC):
    """Viscous Laplacian stencil on interior faces with the BC closures.

    Matches the assembled implicit operators exactly, which makes the
    increment-form solves preserve steady states to machine precision.
    """
    hx2, hy2 = grid.hx ** 2, grid.hy ** 2
    gx = ghosted_ux(grid, u.ux, bc)       # (nx+1, ny+2)
    lap_x = ((u.ux[2:, :] - 2.0 * u.ux[1:-1, :] + u.ux[:-2, :]) / hx2
             + (gx[1:-1, 2:] - 2.0 * gx[1:-1, 1:-1] + gx[1:-1, :-2]) / hy2)
    gy = ghosted_uy(grid, u.uy, bc)       # (nx+2, ny+1)
    lap_y = ((gy[2:, 1:-1] - 2.0 * gy[1:-1, 1:-1] + gy[:-2, 1:-1]) / hx2
             + (u.uy[:, 2:] - 2.0 * u.uy[:, 1:-1] + u.uy[:, :-2]) / hy2)
    return lap_x, lap_y


def uy_at_ux_faces(uy: np.ndarray) -> np.ndarray:
    """Average uy onto interior vertical faces, shape (nx-1, ny)."""
    return 0.25 * (uy[:-1, :-1] + uy[1:, :-1] + uy[:-1, 1:] + uy[1:, 1:])


def ux_at_uy_faces(ux: np.ndarray) -> np.ndarray:
    """Average ux onto interior horizontal faces, shape (nx, ny-1)."""
    return 0.25 * (ux[:-1, :-1] + ux[:-1, 1:] + ux[1:, :-1] + ux[1:, 1:])


def convective_momentum(grid: Grid, a: VelocityField, b: VelocityField,
                        bc_b: VelocityBC):
    """Centered (a . grad) b on interior faces.

    ``b``'s tangential ghosts come from ``bc_b``; ``a`` is used through its
    stored face values only.  Bilinear in (a, b), so its exact directional
    derivative is ``conv(a, db) + conv(da, b)``.
    """
    hx, hy = grid.hx, grid.hy
    gbx = ghosted_ux(grid, b.ux, bc_b)
    dbx_dx = (b.ux[2:, :] - b.ux[:-2, :]) / (2.0 * hx)          # (nx-1, ny)
    dbx_dy = (gbx[1:-1, 2:] - gbx[1:-1, :-2]) / (2.0 * hy)
    ay = uy_at_ux_faces(a.uy)
    conv_x = a.ux[1:-1, :] * dbx_dx + ay * dbx_dy

    gby = ghosted_uy(grid, b.uy, bc_b)
    dby_dy = (b.uy[:, 2:] - b.uy[:, :-2]) / (2.0 * hy)          # (nx, ny-1)
    dby_dx = (gby[2:, 1:-1] - gby[:-2, 1:-1]) / (2.0 * hx)
    ax = ux_at_uy_faces(a.ux)
    conv_y = a.uy[:, 1:-1] * dby_dy + ax * dby_dx
    return conv_x, conv_y


def transpose_gradient_contraction(grid: Grid, p: VelocityField, u: VelocityField):
    """Vector with components sum_j p_j d_i(u_j) on interior faces."""
    hx, hy = grid.hx, grid.hy
    ux, uy = u.ux, u.uy
    # x component at interior vertical faces
    dux_dx = (ux[2:, :] - ux[:-2, :]) / (2.0 * hx)
    duy_dx = 0.5 * ((uy[1:, :-1] - uy[:-1, :-1]) + (uy[1:, 1:] - uy[:-1, 1:])) / hx
    py = uy_at_ux_faces(p.uy)
    out_x = p.ux[1:-1, :] * dux_dx + py * duy_dx
    # y component at interior horizontal faces
    duy_dy = (uy[:, 2:] - uy[:, :-2]) / (2.0 * hy)
    dux_dy = 0.5 * ((ux[:-1, 1:] - ux[:-1, :-1]) + (ux[1:, 1:] - ux[1:, :-1])) / hy
    px = ux_at_uy_faces(p.ux)
    out_y = p.uy[:, 1:-1] * duy_dy + px * dux_dy
    return out_x, out_y


def capillary_force(grid: Grid, m: np.ndarray, phi: np.ndarray):
    """Face force m * grad(phi) on interior faces (m, phi cell-centered)."""
    fx = 0.5 * (m[:-1, :] + m[1:, :]) * (phi[1:, :] - phi[:-1, :]) / grid.hx
    fy = 0.5 * (m[:, :-1] + m[:, 1:]) * (phi[:, 1:] - phi[:, :-1]) / grid.hy
    return fx, fy


def convect_phase_conservative(grid: Grid, u: VelocityField, phi: np.ndarray) -> np.ndarray:
    """div(u * phi_face) with centered face values; boundary flux one-sided.

    Because the velocity is discretely divergence free, this equals the
    advective form while conserving the phase integral exactly when the
    normal boundary velocity vanishes.
    """
    nx, ny = grid.nx, grid.ny
    flux_x = np.empty((nx + 1, ny))
    flux_x[1:-1, :] = u.ux[1:-1, :] * 0.5 * (phi[:-1, :] + phi[1:, :])
    flux_x[0, :] = u.ux[0, :] * phi[0, :]
    flux_x[-1, :] = u.ux[-1, :] * phi[-1, :]
    flux_y = np.empty((nx, ny + 1))
    flux_y[:, 1:-1] = u.uy[:, 1:-1] * 0.5 * (phi[:, :-1] + phi[:, 1:])
    flux_y[:, 0] = u.uy[:, 0] * phi[:, 0]
    flux_y[:, -1] = u.uy[:, -1] * phi[:, -1]
    return divergence_values(grid, flux_x, flux_y)


def advect_scalar(grid: Grid, u: VelocityField, f: np.ndarray) -> np.ndarray:
    """u . grad(f) at cells, faces averaged back to centers.

    Face gradients vanish on boundary faces (Neumann-consistent); suited to
    fields with zero normal derivative.
    """
    nx, ny = grid.nx, grid.ny
    gx = np.zeros((nx + 1, ny))
    gx[1:-1, :] = (f[1:, :] - f[:-1, :]) / grid.hx
    gy = np.zeros((nx, ny + 1))
    gy[:, 1:-1] = (f[:, 1:] - f[:, :-1]) / grid.hy
    return (0.5 * (u.ux[:-1, :] * gx[:-1, :] + u.ux[1:, :] * gx[1:, :])
            + 0.5 * (u.uy[:, :-1] * gy[:, :-1] + u.uy[:, 1:] * gy[:, 1:]))


# ---------------------------------------------------------------------------
# cell-centered helpers for the adjoint phase couplings
# ---------------------------------------------------------------------------

def velocity_at_centers(u: VelocityField):
    return 0.5 * (u.ux[:-1, :] + u.ux[1:, :]), 0.5 * (u.uy[:, :-1] + u.uy[:, 1:])


def _cc_dx(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Central x-derivative at centers, second-order one-sided at the walls."""
    out = np.empty_like(v)
    out[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * grid.hx)
    out[0, :] = (-3.0 * v[0, :] + 4.0 * v[1, :] - v[2, :]) / (2.0 * grid.hx)
    out[-1, :] = (3.0 * v[-1, :] - 4.0 * v[-2, :] + v[-3, :]) / (2.0 * grid.hx)
    return out


def _cc_dy(grid: Grid, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    out[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * grid.hy)
    out[:, 0] = (-3.0 * v[:, 0] + 4.0 * v[:, 1] - v[:, 2]) / (2.0 * grid.hy)
    out[:, -1] = (3.0 * v[:, -1] - 4.0 * v[:, -2] + v[:, -3]) / (2.0 * grid.hy)
    return out


def adjoint_phase_coupling(grid: Grid, p: VelocityField, phi: np.ndarray):
    """The three p-dependent sources of the adjoint phase equation, literally.

    Returns ``(coupling, flux_x, flux_y)`` where ``coupling`` is the
    cell-centered value of

        p . grad(lap phi) - div((grad p) . grad phi) - div(Hess(phi) . p)

    and ``(flux_x, flux_y)`` is the cell-centered vector
    ``(grad p) . grad phi + Hess(phi) . p`` whose boundary-normal component
    determines the flux of the second boundary multiplier.
    """
    px, py = velocity_at_centers(p)
    dphi_x = _cc_dx(grid, phi)
    dphi_y = _cc_dy(grid, phi)
    lap_phi = laplacian_neumann_values(grid, phi)

    term1 = px * _cc_dx(grid, lap_phi) + py * _cc_dy(grid, lap_phi)

    # [(grad p) . grad phi]_i = sum_j d_i(p_j) d_j(phi)
    a_x = _cc_dx(grid, px) * dphi_x + _cc_dx(grid, py) * dphi_y
    a_y = _cc_dy(grid, px) * dphi_x + _cc_dy(grid, py) * dphi_y
    # [Hess(phi) . p]_i = sum_j d_i d_j(phi) p_j
    b_x = _cc_dx(grid, dphi_x) * px + _cc_dx(grid, dphi_y) * py
    b_y = _cc_dy(grid, dphi_x) * px + _cc_dy(grid, dphi_y) * py

    flux_x = a_x + b_x
    flux_y = a_y + b_y
    div_flux = _cc_dx(grid, flux_x) + _cc_dy(grid, flux_y)
    return term1 - div_flux, flux_x, flux_y


def extrapolate_cells_to_faces(grid: Grid, v: np.ndarray) -> BoundaryTrace:
    """One-cell constant extrapolation of a cell field to boundary faces."""
    return BoundaryTrace.from_edges(grid, v[:, 0], v[-1, :], v[:, -1], v[0, :])


def project_velocity(ops, u_star: VelocityField, lin_tol: float):
    """Chorin projection: restore discrete incompressibility.

    Solves the Neumann pressure Poisson problem for the current divergence,
    corrects interior faces and leaves boundary faces (Dirichlet data)
    untouched.  Returns ``(pressure, max |div|)``; ``u_star`` is corrected
    in place.
    """
    grid, dt = ops.grid, ops.dt
    div = divergence_values(grid, u_star.ux, u_star.uy)
    pressure = ops.solve_pressure(div / dt, lin_tol)
    u_star.ux[1:-1, :] -= dt * (pressure[1:, :] - pressure[:-1, :]) / grid.hx
    u_star.uy[:, 1:-1] -= dt * (pressure[:, 1:] - pressure[:, :-1]) / grid.hy
    residual = np.abs(divergence_values(grid, u_star.ux, u_star.uy)).max()
    return pressure, float(residual)
