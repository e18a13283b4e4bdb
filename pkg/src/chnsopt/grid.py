"""Uniform staggered (MAC) grid on a rectangle and its discrete operators.

Layout conventions
------------------
Cells are indexed ``(i, j)`` with ``i`` along x and ``j`` along y; cell
centers sit at ``((i+1/2)hx, (j+1/2)hy)``.  Scalar unknowns (phase, chemical
potential, pressure, adjoint scalars) live at cell centers.  Velocity
components are staggered: ``ux[i, j]`` lives on the vertical face
``(i*hx, (j+1/2)hy)`` with ``i = 0..nx`` and ``uy[i, j]`` on the horizontal
face ``((i+1/2)hx, j*hy)`` with ``j = 0..ny``.  The columns ``ux[0], ux[nx]``
and rows ``uy[:, 0], uy[:, ny]`` are boundary faces and carry Dirichlet data.

Boundary faces are enumerated counterclockwise starting at the bottom-left
corner: bottom edge (left to right), right edge (bottom to top), top edge
(right to left), left edge (top to bottom) -- ``2*(nx+ny)`` faces in total.
Each face stores one value per trace; tangent vectors follow the
counterclockwise orientation and normals point outward.

Normal-derivative traces report the OUTWARD normal derivative (a field that
increases toward the interior has a negative trace).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch, ValidationError

BOTTOM, RIGHT, TOP, LEFT = 0, 1, 2, 3


@dataclass(frozen=True)
class Grid:
    """Uniform MAC discretization of the rectangle [0, lx] x [0, ly]."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        problems = []
        if self.nx < 4 or self.ny < 4:
            problems.append(f"grid needs nx, ny >= 4, got {self.nx} x {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            problems.append(f"domain lengths must be positive, got {self.lx} x {self.ly}")
        if problems:
            raise ValidationError(problems)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_boundary_faces(self) -> int:
        return 2 * (self.nx + self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.lx + self.ly)

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def ux_positions(self):
        x = np.arange(self.nx + 1) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def uy_positions(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = np.arange(self.ny + 1) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    # -- boundary face enumeration -------------------------------------

    def face_edges(self) -> np.ndarray:
        """Edge id (BOTTOM/RIGHT/TOP/LEFT) per boundary face."""
        nx, ny = self.nx, self.ny
        return np.concatenate([
            np.full(nx, BOTTOM), np.full(ny, RIGHT),
            np.full(nx, TOP), np.full(ny, LEFT),
        ])

    def face_lengths(self) -> np.ndarray:
        nx, ny = self.nx, self.ny
        return np.concatenate([
            np.full(nx, self.hx), np.full(ny, self.hy),
            np.full(nx, self.hx), np.full(ny, self.hy),
        ])

    def face_centers(self) -> np.ndarray:
        nx, ny, hx, hy = self.nx, self.ny, self.hx, self.hy
        xs_b = (np.arange(nx) + 0.5) * hx
        ys_r = (np.arange(ny) + 0.5) * hy
        pts = np.empty((self.n_boundary_faces, 2))
        pts[:nx] = np.column_stack([xs_b, np.zeros(nx)])
        pts[nx:nx + ny] = np.column_stack([np.full(ny, self.lx), ys_r])
        pts[nx + ny:2 * nx + ny] = np.column_stack([xs_b[::-1], np.full(nx, self.ly)])
        pts[2 * nx + ny:] = np.column_stack([np.zeros(ny), ys_r[::-1]])
        return pts

    def face_tangents(self) -> np.ndarray:
        """Unit tangents along the counterclockwise orientation."""
        return np.array([(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)])[self.face_edges()]

    def face_normals(self) -> np.ndarray:
        """Unit outward normals."""
        return np.array([(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)])[self.face_edges()]

    def edge_slices(self):
        """Index ranges of the four edges inside the face ordering."""
        nx, ny = self.nx, self.ny
        return {
            BOTTOM: slice(0, nx),
            RIGHT: slice(nx, nx + ny),
            TOP: slice(nx + ny, 2 * nx + ny),
            LEFT: slice(2 * nx + ny, 2 * (nx + ny)),
        }


def _check_grid(grid, *fields):
    for f in fields:
        if f.grid != grid:
            raise ShapeMismatch("fields live on different grids")


@dataclass
class ScalarField:
    """Cell-centered scalar unknown (phase, chemical potential, pressure)."""

    grid: Grid
    values: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros((grid.nx, grid.ny)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        x, y = grid.cell_centers()
        return cls(grid, np.asarray(fn(x, y), dtype=float))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def validate(self):
        if self.values.shape != (self.grid.nx, self.grid.ny):
            raise ShapeMismatch(
                f"scalar field shape {self.values.shape} does not match grid "
                f"{(self.grid.nx, self.grid.ny)}")
        if not np.isfinite(self.values).all():
            raise ValidationError("scalar field contains non-finite entries")


@dataclass
class VelocityField:
    """Face-staggered vector unknown; ux on vertical, uy on horizontal faces."""

    grid: Grid
    ux: np.ndarray
    uy: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "VelocityField":
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    @classmethod
    def from_functions(cls, grid: Grid, fx, fy) -> "VelocityField":
        xu, yu = grid.ux_positions()
        xv, yv = grid.uy_positions()
        return cls(grid, np.asarray(fx(xu, yu), dtype=float),
                   np.asarray(fy(xv, yv), dtype=float))

    def copy(self) -> "VelocityField":
        return VelocityField(self.grid, self.ux.copy(), self.uy.copy())

    def validate(self):
        g = self.grid
        if self.ux.shape != (g.nx + 1, g.ny) or self.uy.shape != (g.nx, g.ny + 1):
            raise ShapeMismatch("velocity component shapes do not match grid")
        if not (np.isfinite(self.ux).all() and np.isfinite(self.uy).all()):
            raise ValidationError("velocity field contains non-finite entries")


@dataclass
class BoundaryTrace:
    """One value per boundary face, counterclockwise from the bottom-left."""

    grid: Grid
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.values is None:
            self.values = np.zeros(self.grid.n_boundary_faces)
        self.values = np.asarray(self.values, dtype=float)

    @classmethod
    def zeros(cls, grid: Grid) -> "BoundaryTrace":
        return cls(grid, np.zeros(grid.n_boundary_faces))

    @classmethod
    def from_edges(cls, grid: Grid, bottom, right, top, left) -> "BoundaryTrace":
        """Build from per-edge arrays given in ascending cell-index order."""
        vals = np.concatenate([
            np.asarray(bottom, dtype=float),
            np.asarray(right, dtype=float),
            np.asarray(top, dtype=float)[::-1],
            np.asarray(left, dtype=float)[::-1],
        ])
        return cls(grid, vals)

    def edge_values(self, edge: int) -> np.ndarray:
        """Values on one edge in ascending cell-index order (copy for TOP/LEFT)."""
        sl = self.grid.edge_slices()[edge]
        vals = self.values[sl]
        return vals[::-1].copy() if edge in (TOP, LEFT) else vals

    def copy(self) -> "BoundaryTrace":
        return BoundaryTrace(self.grid, self.values.copy())

    def validate(self):
        if self.values.shape != (self.grid.n_boundary_faces,):
            raise ShapeMismatch(
                f"trace length {self.values.shape} != {self.grid.n_boundary_faces}")
        if not np.isfinite(self.values).all():
            raise ValidationError("boundary trace contains non-finite entries")


# ---------------------------------------------------------------------------
# stencil operators
# ---------------------------------------------------------------------------

def laplacian_neumann_values(grid: Grid, v: np.ndarray) -> np.ndarray:
    """5-point Laplacian with mirror-ghost (homogeneous Neumann) closure."""
    vp = np.pad(v, 1, mode="edge")
    return ((vp[2:, 1:-1] - 2.0 * v + vp[:-2, 1:-1]) / grid.hx ** 2
            + (vp[1:-1, 2:] - 2.0 * v + vp[1:-1, :-2]) / grid.hy ** 2)


def laplacian_neumann(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, laplacian_neumann_values(f.grid, f.values))


def biharmonic_neumann(f: ScalarField) -> ScalarField:
    """Composed Laplacians; the intermediate field gets the same Neumann closure."""
    g = f.grid
    return ScalarField(g, laplacian_neumann_values(g, laplacian_neumann_values(g, f.values)))


def divergence_values(grid: Grid, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    return ((ux[1:, :] - ux[:-1, :]) / grid.hx
            + (uy[:, 1:] - uy[:, :-1]) / grid.hy)


def divergence(u: VelocityField) -> ScalarField:
    return ScalarField(u.grid, divergence_values(u.grid, u.ux, u.uy))


def gradient_to_faces(f: ScalarField) -> VelocityField:
    """Face-normal differences; boundary faces carry zero (Neumann closure).

    Adjoint-consistent with :func:`divergence`: for any ``u`` vanishing on
    boundary faces,  <grad f, u>_faces = -<f, div u>_cells  exactly.
    """
    g, v = f.grid, f.values
    gx = np.zeros((g.nx + 1, g.ny))
    gy = np.zeros((g.nx, g.ny + 1))
    gx[1:-1, :] = (v[1:, :] - v[:-1, :]) / g.hx
    gy[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / g.hy
    return VelocityField(g, gx, gy)


def _deriv_half_offset(s0, s1, s2, h):
    # samples at h/2, 3h/2, 5h/2 from the wall; exact for quadratics
    return (-2.0 * s0 + 3.0 * s1 - s2) / h


def _deriv_node_offset(s0, s1, s2, h):
    # samples at 0, h, 2h from the wall; exact for quadratics
    return (-3.0 * s0 + 4.0 * s1 - s2) / (2.0 * h)


def normal_derivative_trace(f: ScalarField) -> BoundaryTrace:
    """Outward-normal derivative of a cell-centered field at face centers.

    Second-order one-sided stencil along the normal; e.g. the field ``y``
    near the bottom wall reports ``-1`` (it grows toward the interior).
    """
    g, v = f.grid, f.values
    hx, hy = g.hx, g.hy
    bottom = -_deriv_half_offset(v[:, 0], v[:, 1], v[:, 2], hy)
    top = -_deriv_half_offset(v[:, -1], v[:, -2], v[:, -3], hy)
    left = -_deriv_half_offset(v[0, :], v[1, :], v[2, :], hx)
    right = -_deriv_half_offset(v[-1, :], v[-2, :], v[-3, :], hx)
    return BoundaryTrace.from_edges(g, bottom, right, top, left)


def velocity_normal_derivative(u: VelocityField):
    """Outward-normal derivative of each velocity component at face centers.

    Returns ``(dudn_x, dudn_y)`` as boundary traces.  Components whose
    degrees of freedom sit on the boundary use the node-offset stencil, the
    staggered ones are averaged to the face center first.
    """
    g = u.grid
    hx, hy = g.hx, g.hy
    ux, uy = u.ux, u.uy

    # ux averaged to cell-center x positions, per row j
    uxc = 0.5 * (ux[:-1, :] + ux[1:, :])          # (nx, ny)
    # uy averaged to cell-center y positions, per column i
    uyc = 0.5 * (uy[:, :-1] + uy[:, 1:])          # (nx, ny)

    dx_bottom = -_deriv_half_offset(uxc[:, 0], uxc[:, 1], uxc[:, 2], hy)
    dx_top = -_deriv_half_offset(uxc[:, -1], uxc[:, -2], uxc[:, -3], hy)
    dx_left = -_deriv_node_offset(ux[0, :], ux[1, :], ux[2, :], hx)
    dx_right = -_deriv_node_offset(ux[-1, :], ux[-2, :], ux[-3, :], hx)

    dy_bottom = -_deriv_node_offset(uy[:, 0], uy[:, 1], uy[:, 2], hy)
    dy_top = -_deriv_node_offset(uy[:, -1], uy[:, -2], uy[:, -3], hy)
    dy_left = -_deriv_half_offset(uyc[0, :], uyc[1, :], uyc[2, :], hx)
    dy_right = -_deriv_half_offset(uyc[-1, :], uyc[-2, :], uyc[-3, :], hx)

    dudn_x = BoundaryTrace.from_edges(g, dx_bottom, dx_right, dx_top, dx_left)
    dudn_y = BoundaryTrace.from_edges(g, dy_bottom, dy_right, dy_top, dy_left)
    return dudn_x, dudn_y


def dirichlet_wall_gradient(u: VelocityField):
    """Outward-normal derivative traces of a velocity that vanishes on the wall.

    Uses the discrete-dual differences of the solver's boundary closures:
    across-the-wall mirror difference ``-2 s0 / h`` for components staggered
    half a cell off the wall and the one-sided ``-(s1 - s0) / h`` for
    components with a node on the wall.  This is the trace the discrete
    adjoint pairing produces; use it for boundary multipliers.  For smooth
    generic fields prefer :func:`normal_derivative_trace`.
    """
    g = u.grid
    hx, hy = g.hx, g.hy
    ux, uy = u.ux, u.uy
    uxc = 0.5 * (ux[:-1, :] + ux[1:, :])
    uyc = 0.5 * (uy[:, :-1] + uy[:, 1:])

    dx_bottom = -2.0 * uxc[:, 0] / hy
    dx_top = -2.0 * uxc[:, -1] / hy
    dx_left = -(ux[1, :] - ux[0, :]) / hx
    dx_right = -(ux[-2, :] - ux[-1, :]) / hx

    dy_bottom = -(uy[:, 1] - uy[:, 0]) / hy
    dy_top = -(uy[:, -2] - uy[:, -1]) / hy
    dy_left = -2.0 * uyc[0, :] / hx
    dy_right = -2.0 * uyc[-1, :] / hx

    dudn_x = BoundaryTrace.from_edges(g, dx_bottom, dx_right, dx_top, dx_left)
    dudn_y = BoundaryTrace.from_edges(g, dy_bottom, dy_right, dy_top, dy_left)
    return dudn_x, dudn_y


def velocity_trace(u: VelocityField):
    """Tangential and outward-normal velocity traces at boundary face centers.

    Normal values are exact MAC face values; tangential values are linear
    extrapolations of the two nearest staggered layers to the wall.
    """
    g = u.grid
    ux, uy = u.ux, u.uy

    n_bottom = -uy[:, 0]
    n_right = ux[-1, :]
    n_top = uy[:, -1]
    n_left = -ux[0, :]
    normal = BoundaryTrace.from_edges(g, n_bottom, n_right, n_top, n_left)

    uxc = 0.5 * (ux[:-1, :] + ux[1:, :])
    uyc = 0.5 * (uy[:, :-1] + uy[:, 1:])
    t_bottom = 1.5 * uxc[:, 0] - 0.5 * uxc[:, 1]
    t_top = -(1.5 * uxc[:, -1] - 0.5 * uxc[:, -2])
    t_right = 1.5 * uyc[-1, :] - 0.5 * uyc[-2, :]
    t_left = -(1.5 * uyc[0, :] - 0.5 * uyc[1, :])
    tangential = BoundaryTrace.from_edges(g, t_bottom, t_right, t_top, t_left)
    return tangential, normal


# ---------------------------------------------------------------------------
# quadrature helpers
# ---------------------------------------------------------------------------

def cell_integral(grid: Grid, values: np.ndarray) -> float:
    return float(values.sum()) * grid.cell_area


def cell_inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return float((a * b).sum()) * grid.cell_area


def velocity_inner(grid: Grid, a: VelocityField, b: VelocityField) -> float:
    """Discrete L2 inner product over interior faces (boundary faces excluded)."""
    s = float((a.ux[1:-1, :] * b.ux[1:-1, :]).sum()
              + (a.uy[:, 1:-1] * b.uy[:, 1:-1]).sum())
    return s * grid.cell_area


def velocity_norm2(grid: Grid, a: VelocityField) -> float:
    return velocity_inner(grid, a, a)


def trace_integral(grid: Grid, values: np.ndarray) -> float:
    return float((values * grid.face_lengths()).sum())
