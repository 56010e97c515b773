"""Normalized-Laplacian eigenanalysis of a patch adjacency."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ContractError, NumericalError
from .imageio import write_pgm


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray      # ascending
    eigenvectors: np.ndarray     # column j pairs with eigenvalues[j]
    sweeps: int = 0

    def residuals(self, matrix):
        lam, u = self.eigenvalues, self.eigenvectors
        return np.linalg.norm(matrix @ u - u * lam[None, :], axis=0)


def laplacian(a):
    """``I - D^-1/2 A D^-1/2`` (self-loops included in the degrees)."""
    a = np.asarray(a, dtype=np.float64)
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return np.eye(a.shape[0]) - a * inv_sqrt[:, None] * inv_sqrt[None, :]


def off_diagonal_norm(m):
    # summed directly: ||M||^2 - ||diag M||^2 cancels catastrophically near convergence
    off = m - np.diag(np.diag(m))
    return float(np.sqrt((off * off).sum()))


def eigendecompose(matrix, tol=1e-12, max_sweeps=100, sweep=None):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Stops once the off-diagonal Frobenius norm drops below ``tol``; eigenpairs
    come back sorted by ascending eigenvalue.
    """
    m = np.array(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractError(f"eigendecompose needs a square matrix, got {m.shape}")
    if np.abs(m - m.T).max(initial=0.0) > 1e-10:
        raise ContractError("eigendecompose needs a symmetric matrix (tolerance 1e-10)")
    m = 0.5 * (m + m.T)
    sweep = sweep or kernels.jacobi_sweep
    n = m.shape[0]
    v = np.eye(n)
    sweeps = 0
    while off_diagonal_norm(m) >= tol:
        if sweeps == max_sweeps:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps; off-diagonal norm "
                f"{off_diagonal_norm(m):.3e}")
        sweep(m, v)
        sweeps += 1
    lam = np.diag(m).copy()
    order = np.argsort(lam, kind="stable")
    return SpectralResult(lam[order], v[:, order], sweeps)


def _fix_sign(vec):
    # deterministic orientation: largest-magnitude entry positive
    pivot = np.argmax(np.abs(vec))
    return -vec if vec[pivot] < 0 else vec


def fiedler_maps(result, k=3, zero_tol=1e-9):
    """The ``k`` eigenpairs with the smallest eigenvalues above ``zero_tol``."""
    keep = np.flatnonzero(result.eigenvalues > zero_tol)[:k]
    return [(int(j), float(result.eigenvalues[j]), _fix_sign(result.eigenvectors[:, j]))
            for j in keep]


def scatter_to_grid(values, indices, grid):
    h, w = grid
    out = np.zeros(h * w)
    out[np.asarray(indices)] = values
    return out.reshape(h, w)


def emit_eigenmaps(result, patch_indices, grid, out_dir, k=3, zero_tol=1e-9, prefix="eigen"):
    """Write CSV and PGM files for the lowest ``k`` non-trivial eigenvectors.

    Returns the list of written paths.
    """
    if k > len(result.eigenvalues):
        raise ContractError(f"k={k} exceeds the number of eigenpairs")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    h, w = grid
    rows, cols = np.divmod(np.asarray(patch_indices), w)
    written = []
    for rank, (_, lam, vec) in enumerate(fiedler_maps(result, k, zero_tol), 1):
        csv_path = out_dir / f"{prefix}_{rank}.csv"
        lines = ["eigen_rank,eigenvalue", f"{rank},{lam:.17g}",
                 "node_index,grid_row,grid_col,component_value"]
        lines += [f"{i},{r},{c},{x:.17g}" for i, (r, c, x) in enumerate(zip(rows, cols, vec))]
        csv_path.write_text("\n".join(lines) + "\n")
        pgm_path = out_dir / f"{prefix}_{rank}.pgm"
        write_pgm(pgm_path, heatmap(vec, patch_indices, grid))
        written += [csv_path, pgm_path]
    return written


def heatmap(values, indices, grid):
    """Min-max scale ``values`` to 1..255 on the sampled cells; unsampled cells stay 0."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    scaled = np.full_like(values, 128.0) if hi == lo else 1 + 254 * (values - lo) / (hi - lo)
    return np.rint(scatter_to_grid(scaled, indices, grid)).astype(np.uint8)
