"""Sparse transfer from mesh interior vertices to overlay-grid nodes.

Entry (k, j) is the piecewise-linear basis function of interior vertex j
evaluated at grid node k, i.e. the barycentric coordinate of the node within
its containing simplex.  Grid nodes outside the domain get empty rows (the
basis functions vanish outside), and boundary vertices contribute no column
since their values are pinned to zero.  The column sums d_j form the diagonal
matrix that makes the grid-to-mesh transpose transfer preserve constants.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .core import OverlayGrid
from .mesh import MeshQuality, SimplicialMesh

__all__ = [
    "TransferMatrix",
    "TransferRankWarning",
    "choose_grid",
    "build_transfer",
    "apply_transfer",
    "apply_transfer_transpose",
    "column_rank_check",
    "write_transfer_coo",
]

_CONTAIN_TOL = 1e-12
_DEFAULT_CAPS = {1: 4096, 2: 4096, 3: 256}


class TransferRankWarning(UserWarning):
    """Signals interior vertices whose basis support contains no grid node."""


@dataclass(frozen=True)
class TransferMatrix:
    matrix: scipy.sparse.csr_matrix
    column_sums: np.ndarray
    grid: OverlayGrid

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


def choose_grid(quality: MeshQuality, r_fd: float, mode: str = "practical",
                max_n_fd: int | None = None) -> OverlayGrid:
    """Smallest overlay grid whose spacing satisfies the admissibility
    condition for the given mesh.

    "practical" requires h_fd <= a_h; "strict" uses the conservative bound
    h_fd <= a_h / ((d+1) sqrt(d)) that guarantees full column rank of the
    transfer.  A configurable cap on n_fd guards the memory budget.
    """
    if mode not in ("practical", "strict"):
        raise ValueError(f"mode must be 'practical' or 'strict', got {mode!r}")
    if r_fd <= 0.0:
        raise ValueError("r_fd must be positive")
    target = quality.a_h
    if mode == "strict":
        target = quality.a_h / ((quality.dim + 1) * math.sqrt(quality.dim))
    n_fd = max(1, math.ceil(r_fd / target - 1e-12))
    cap = _DEFAULT_CAPS[quality.dim] if max_n_fd is None else max_n_fd
    if n_fd > cap:
        raise MemoryError(
            f"admissible grid needs n_fd = {n_fd}, beyond the cap {cap}; "
            "raise max_n_fd explicitly to proceed")
    return OverlayGrid(dim=quality.dim, r_fd=r_fd, n_fd=n_fd)


def build_transfer(mesh: SimplicialMesh, grid: OverlayGrid,
                   strict: bool = False) -> TransferMatrix:
    """Assemble the transfer matrix by locating every grid node inside the
    mesh.

    Simplices are scanned in index order and each covered node keeps the
    barycentric coordinates from the first (lowest-index) simplex containing
    it, with containment tolerance 1e-12.  Columns with zero sum are reported
    as a TransferRankWarning, or raise when strict is set.
    """
    if mesh.dim != grid.dim:
        raise ValueError(f"mesh dim {mesh.dim} does not match grid dim {grid.dim}")
    h = grid.h_fd
    n = grid.n_fd
    if np.any(np.abs(mesh.vertices) > grid.r_fd + _CONTAIN_TOL):
        raise ValueError("grid cube does not contain the mesh")

    dim = mesh.dim
    strides = np.array([grid.nodes_per_axis ** (dim - 1 - a) for a in range(dim)])
    claimed = np.zeros(grid.n_nodes, dtype=bool)
    rows, cols, vals = [], [], []

    for e in range(mesh.n_elements):
        simp = mesh.simplices[e]
        pts = mesh.vertices[simp]
        lo = np.ceil((pts.min(axis=0) - _CONTAIN_TOL) / h).astype(np.int64)
        hi = np.floor((pts.max(axis=0) + _CONTAIN_TOL) / h).astype(np.int64)
        lo = np.maximum(lo, -n)
        hi = np.minimum(hi, n)
        if np.any(hi < lo):
            continue
        axes = [np.arange(lo[a], hi[a] + 1) for a in range(dim)]
        mesh_idx = np.meshgrid(*axes, indexing="ij")
        k_multi = np.column_stack([g.ravel() for g in mesh_idx])
        node_ids = (k_multi + n) @ strides
        fresh = ~claimed[node_ids]
        if not np.any(fresh):
            continue
        k_multi = k_multi[fresh]
        node_ids = node_ids[fresh]

        base = pts[0]
        span = (pts[1:] - base).T  # (dim, dim)
        lam_rest = np.linalg.solve(span, (k_multi * h - base).T).T
        lam0 = 1.0 - lam_rest.sum(axis=1)
        lam = np.column_stack([lam0, lam_rest])
        inside = np.all(lam >= -_CONTAIN_TOL, axis=1)
        if not np.any(inside):
            continue
        node_ids = node_ids[inside]
        lam = np.clip(lam[inside], 0.0, 1.0)
        claimed[node_ids] = True
        for t in range(dim + 1):
            j = int(simp[t])
            if j < mesh.n_interior:
                rows.append(node_ids)
                cols.append(np.full(node_ids.shape[0], j, dtype=np.int64))
                vals.append(lam[:, t])

    if rows:
        matrix = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(grid.n_nodes, mesh.n_interior)).tocsr()
    else:
        matrix = scipy.sparse.csr_matrix((grid.n_nodes, mesh.n_interior))
    column_sums = np.asarray(matrix.sum(axis=0)).ravel()

    dead = np.nonzero(column_sums == 0.0)[0]
    if dead.size:
        message = (f"{dead.size} interior vertex column(s) received no grid node "
                   f"(first few: {dead[:8].tolist()}); the transfer is rank deficient")
        if strict:
            raise ValueError(message)
        warnings.warn(message, TransferRankWarning, stacklevel=2)
    return TransferMatrix(matrix=matrix, column_sums=column_sums, grid=grid)


def apply_transfer(transfer: TransferMatrix, u_mesh: np.ndarray) -> np.ndarray:
    """Mesh-to-grid interpolation, returned as a flat grid vector."""
    u_mesh = np.asarray(u_mesh, dtype=float)
    if u_mesh.shape != (transfer.cols,):
        raise ValueError(f"mesh vector must have shape ({transfer.cols},)")
    return transfer.matrix @ u_mesh


def apply_transfer_transpose(transfer: TransferMatrix, v_grid: np.ndarray) -> np.ndarray:
    """Adjoint of apply_transfer; dividing the result by the column sums gives
    the grid-to-mesh transfer that preserves constants."""
    v_grid = np.asarray(v_grid, dtype=float).ravel()
    if v_grid.shape != (transfer.rows,):
        raise ValueError(f"grid vector must have {transfer.rows} entries")
    return transfer.matrix.T @ v_grid


def column_rank_check(transfer: TransferMatrix, mode: str = "auto") -> bool:
    """Full-column-rank test.

    The exact path (available up to 5000 columns) factors the Gram matrix;
    the heuristic path checks that every column sum is positive and that the
    rows carrying each column's largest entry are pairwise distinct.
    """
    if mode not in ("auto", "exact", "heuristic"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "auto":
        mode = "exact" if transfer.cols <= 5000 else "heuristic"
    if mode == "exact":
        if transfer.cols > 5000:
            raise ValueError("exact rank check is limited to 5000 columns")
        if transfer.cols == 0:
            return True
        gram = (transfer.matrix.T @ transfer.matrix).toarray()
        eigvals = np.linalg.eigvalsh(gram)
        return bool(eigvals[0] > 1e-12 * max(eigvals[-1], np.finfo(float).tiny))
    if np.any(transfer.column_sums <= 0.0):
        return False
    csc = transfer.matrix.tocsc()
    leading = np.full(transfer.cols, -1, dtype=np.int64)
    for j in range(transfer.cols):
        seg = slice(csc.indptr[j], csc.indptr[j + 1])
        data = csc.data[seg]
        if data.size == 0:
            return False
        leading[j] = csc.indices[seg][np.argmax(data)]
    return np.unique(leading).size == transfer.cols


def write_transfer_coo(transfer: TransferMatrix, path):
    """Debug dump in coordinate text format 'row col value'."""
    coo = transfer.matrix.tocoo()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.16e}\n")
