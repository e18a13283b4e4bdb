"""Prefactorized sparse operators for the semi-implicit time steps.

One :class:`OperatorSet` is built per (grid, dt, nu, stabilization) and
reused across every forward, linearized and adjoint solve with those
parameters; all three solvers share the same implicit operators by design.
Factorizations are SuperLU, which is deterministic, so repeated runs of the
same configuration are bit-identical.

``lin_tol`` bounds the normwise backward error of each inner solve,
``|Mx - b| / (|M| |x| + |b|)`` in the max norm.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LinearSolveFailure
from .grid import Grid


def tridiag_neumann(n: int, h: float) -> sp.csr_matrix:
    """1D Laplacian with mirror ghosts (end diagonal entries -1/h^2)."""
    a = 1.0 / (h * h)
    main = np.full(n, -2.0 * a)
    main[0] = main[-1] = -a
    off = np.full(n - 1, a)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def tridiag_dirichlet_node(n: int, h: float) -> sp.csr_matrix:
    """1D Laplacian whose end neighbors are known Dirichlet nodes (RHS data)."""
    a = 1.0 / (h * h)
    main = np.full(n, -2.0 * a)
    off = np.full(n - 1, a)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def tridiag_ghost_dirichlet(n: int, h: float) -> sp.csr_matrix:
    """1D Laplacian with a wall half a cell outside each end.

    The ghost value is ``2*t - u`` for wall data ``t``, which folds into a
    -3/h^2 end diagonal; the ``2*t/h^2`` part belongs to the RHS.
    """
    a = 1.0 / (h * h)
    main = np.full(n, -2.0 * a)
    main[0] = main[-1] = -3.0 * a
    off = np.full(n - 1, a)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def neumann_laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """2D cell-centered Neumann Laplacian (matches the mirror-ghost stencil)."""
    tx = tridiag_neumann(grid.nx, grid.hx)
    ty = tridiag_neumann(grid.ny, grid.hy)
    return (sp.kron(tx, sp.eye(grid.ny)) + sp.kron(sp.eye(grid.nx), ty)).tocsr()


def _backward_error(m, x, b):
    num = np.abs(m @ x - b).max()
    den = np.abs(m).max() * max(np.abs(x).max(), 0.0) + max(np.abs(b).max(), 0.0)
    if den == 0.0:
        return 0.0
    return num / den


class _CheckedSolve:
    """A factorized solve with an a-posteriori backward-error check."""

    def __init__(self, matrix: sp.spmatrix, name: str):
        self.matrix = matrix.tocsc()
        self.name = name
        self.lu = spla.splu(self.matrix)
        self._mabs = np.abs(self.matrix).max()

    def solve(self, b: np.ndarray, lin_tol: float) -> np.ndarray:
        if not b.any():
            return np.zeros_like(b)
        x = self.lu.solve(b)
        num = np.abs(self.matrix @ x - b).max()
        den = self._mabs * np.abs(x).max() + np.abs(b).max()
        res = num / den if den > 0 else 0.0
        if not np.isfinite(res) or res > lin_tol:
            raise LinearSolveFailure(
                f"{self.name} solve backward error {res:.3e} exceeds {lin_tol:.3e}",
                residual=res, tolerance=lin_tol)
        return x


class OperatorSet:
    """Implicit operators for one (grid, dt, nu, stabilization) combination."""

    def __init__(self, grid: Grid, dt: float, nu: float, stabilization: float):
        self.grid = grid
        self.dt = dt
        self.nu = nu
        self.stabilization = stabilization
        nx, ny = grid.nx, grid.ny

        self.a_cells = neumann_laplacian_matrix(grid)

        n = nx * ny
        m_ch = (sp.eye(n) / dt + self.a_cells @ self.a_cells
                - stabilization * self.a_cells)
        self.ch = _CheckedSolve(m_ch, "phase")

        lap_ux = (sp.kron(tridiag_dirichlet_node(nx - 1, grid.hx), sp.eye(ny))
                  + sp.kron(sp.eye(nx - 1), tridiag_ghost_dirichlet(ny, grid.hy)))
        lap_uy = (sp.kron(tridiag_ghost_dirichlet(nx, grid.hx), sp.eye(ny - 1))
                  + sp.kron(sp.eye(nx), tridiag_dirichlet_node(ny - 1, grid.hy)))
        self.helm_ux = _CheckedSolve(sp.eye((nx - 1) * ny) / dt - nu * lap_ux, "ux")
        self.helm_uy = _CheckedSolve(sp.eye(nx * (ny - 1)) / dt - nu * lap_uy, "uy")

        # pure-Neumann pressure Poisson: pin cell 0, fix the mean afterwards;
        # the RHS always sums to ~0, so the pinned row is consistent
        poisson = self.a_cells.tolil()
        poisson[0, :] = 0.0
        poisson[0, 0] = 1.0
        self.poisson = _CheckedSolve(poisson.tocsc(), "pressure")

    # -- flat <-> grid array helpers ------------------------------------

    def cells_flat(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(-1)

    def cells_grid(self, v: np.ndarray) -> np.ndarray:
        return v.reshape(self.grid.nx, self.grid.ny)

    def apply_a(self, v: np.ndarray) -> np.ndarray:
        """Cell Neumann Laplacian as a matvec on a (nx, ny) array."""
        return self.cells_grid(self.a_cells @ v.reshape(-1))

    def solve_ch(self, rhs: np.ndarray, lin_tol: float) -> np.ndarray:
        return self.cells_grid(self.ch.solve(rhs.reshape(-1), lin_tol))

    def solve_helm_ux(self, rhs: np.ndarray, lin_tol: float) -> np.ndarray:
        nx, ny = self.grid.nx, self.grid.ny
        return self.helm_ux.solve(rhs.reshape(-1), lin_tol).reshape(nx - 1, ny)

    def solve_helm_uy(self, rhs: np.ndarray, lin_tol: float) -> np.ndarray:
        nx, ny = self.grid.nx, self.grid.ny
        return self.helm_uy.solve(rhs.reshape(-1), lin_tol).reshape(nx, ny - 1)

    def solve_pressure(self, rhs: np.ndarray, lin_tol: float) -> np.ndarray:
        """Zero-mean solution of the Neumann Poisson problem."""
        b = rhs.reshape(-1).copy()
        b -= b.mean()          # kill roundoff drift of the compatibility sum
        b[0] = 0.0             # pinned cell
        p = self.poisson.solve(b, lin_tol)
        p -= p.mean()
        return self.cells_grid(p)


_CACHE: dict = {}


def get_operator_set(grid: Grid, dt: float, nu: float, stabilization: float) -> OperatorSet:
    key = (grid.nx, grid.ny, grid.lx, grid.ly, dt, nu, stabilization)
    ops = _CACHE.get(key)
    if ops is None:
        ops = OperatorSet(grid, dt, nu, stabilization)
        _CACHE[key] = ops
    return ops


def build_stokes_solver(grid: Grid, nu: float = 1.0):
    """Direct solver for the steady Stokes saddle problem on the MAC grid.

    Unknowns: interior ux faces, interior uy faces, cell pressures (one cell
    pinned).  Returns ``(solve, layout)`` where ``solve(rhs)`` maps the
    assembled right-hand side to the unknown vector.
    """
    nx, ny = grid.nx, grid.ny
    hx, hy = grid.hx, grid.hy
    nux = (nx - 1) * ny
    nuy = nx * (ny - 1)
    npp = nx * ny

    lap_ux = (sp.kron(tridiag_dirichlet_node(nx - 1, hx), sp.eye(ny))
              + sp.kron(sp.eye(nx - 1), tridiag_ghost_dirichlet(ny, hy)))
    lap_uy = (sp.kron(tridiag_ghost_dirichlet(nx, hx), sp.eye(ny - 1))
              + sp.kron(sp.eye(nx), tridiag_dirichlet_node(ny - 1, hy)))

    def ux_idx(i, j):
        return (i - 1) * ny + j

    def uy_idx(i, j):
        return i * (ny - 1) + (j - 1)

    def p_idx(i, j):
        return i * ny + j

    # pressure gradient onto interior faces
    rows, cols, vals = [], [], []
    for i in range(1, nx):
        for j in range(ny):
            r = ux_idx(i, j)
            rows += [r, r]
            cols += [p_idx(i, j), p_idx(i - 1, j)]
            vals += [1.0 / hx, -1.0 / hx]
    gx = sp.csr_matrix((vals, (rows, cols)), shape=(nux, npp))

    rows, cols, vals = [], [], []
    for i in range(nx):
        for j in range(1, ny):
            r = uy_idx(i, j)
            rows += [r, r]
            cols += [p_idx(i, j), p_idx(i, j - 1)]
            vals += [1.0 / hy, -1.0 / hy]
    gy = sp.csr_matrix((vals, (rows, cols)), shape=(nuy, npp))

    # divergence rows: each interior face feeds its two adjacent cells
    zero_xy = sp.csr_matrix((nux, nuy))
    rows, cols, vals = [], [], []
    for i in range(1, nx):
        for j in range(ny):
            c = ux_idx(i, j)
            rows += [p_idx(i - 1, j), p_idx(i, j)]
            cols += [c, c]
            vals += [1.0 / hx, -1.0 / hx]
    div_ux = sp.csr_matrix((vals, (rows, cols)), shape=(npp, nux))
    rows, cols, vals = [], [], []
    for i in range(nx):
        for j in range(1, ny):
            c = uy_idx(i, j)
            rows += [p_idx(i, j - 1), p_idx(i, j)]
            cols += [c, c]
            vals += [1.0 / hy, -1.0 / hy]
    div_uy = sp.csr_matrix((vals, (rows, cols)), shape=(npp, nuy))

    saddle = sp.bmat([
        [-nu * lap_ux, zero_xy, gx],
        [zero_xy.T, -nu * lap_uy, gy],
        [div_ux, div_uy, sp.csr_matrix((npp, npp))],
    ], format="lil")
    # pin pressure of cell 0 (continuity row 0 is implied by the others)
    prow = nux + nuy
    saddle[prow, :] = 0.0
    saddle[prow, prow] = 1.0
    lu = spla.splu(saddle.tocsc())

    layout = {"nux": nux, "nuy": nuy, "np": npp,
              "ux_idx": ux_idx, "uy_idx": uy_idx, "p_idx": p_idx}
    return lu, layout
