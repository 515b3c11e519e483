"""Norms and small helpers for dense d x d complex blocks.

Blocks are plain ``numpy`` arrays of shape ``(d, d)``. Most functions also
accept stacks of shape ``(..., d, d)`` and act on the last two axes, which is
how the trajectory code evaluates thousands of transfer matrices at once.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPositiveSemidefinite

MAX_BLOCK_DIM = 16
PSD_TOL = 1e-10


def as_block(x, d: int | None = None) -> np.ndarray:
    """Coerce ``x`` to a complex ``(d, d)`` array; scalars become 1x1."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square block, got shape {arr.shape}")
    if d is not None and arr.shape[0] != d:
        raise ValueError(f"expected a {d}x{d} block, got {arr.shape}")
    return arr


def singular_values(x: np.ndarray) -> np.ndarray:
    """Singular values in descending order along the last axis."""
    return np.linalg.svd(np.asarray(x), compute_uv=False)


def op_norm(x: np.ndarray):
    """Operator (spectral) norm: the largest singular value."""
    return singular_values(x)[..., 0]


def min_modulus(x: np.ndarray):
    """Smallest singular value, which equals 1/||x^-1|| for invertible x."""
    return singular_values(x)[..., -1]


def hs_norm(x: np.ndarray):
    """Hilbert-Schmidt (Frobenius) norm."""
    x = np.asarray(x)
    return np.sqrt(np.sum(np.abs(x) ** 2, axis=(-2, -1)))


def adjoint(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(np.asarray(x), -1, -2))


def re_part(x: np.ndarray) -> np.ndarray:
    """Hermitian part (x + x*)/2."""
    return 0.5 * (x + adjoint(x))


def im_part(x: np.ndarray) -> np.ndarray:
    """(x - x*)/(2i); Hermitian, so Im W >= 0 reads as a PSD statement."""
    return (x - adjoint(x)) / 2j


def column_embed(v) -> np.ndarray:
    """Block whose first column is ``v`` and whose other columns vanish.

    The embedding is isometric: ``op_norm(column_embed(v)) == norm(v)``.
    """
    v = np.asarray(v, dtype=complex).ravel()
    out = np.zeros((v.size, v.size), dtype=complex)
    out[:, 0] = v
    return out


def trace_bounds(x: np.ndarray) -> tuple[float, float, float]:
    """Return ``(||x||, tr x, d ||x||)`` for a PSD block.

    For x >= 0 these satisfy ``||x|| <= tr x <= d ||x||``. Raises
    NotPositiveSemidefinite when the smallest eigenvalue of the Hermitian part
    is below ``-1e-10 * ||x||`` or x is visibly non-Hermitian.
    """
    x = as_block(x)
    d = x.shape[0]
    norm = float(op_norm(x))
    if np.max(np.abs(x - adjoint(x)), initial=0.0) > PSD_TOL * max(norm, 1.0):
        raise NotPositiveSemidefinite("block is not Hermitian")
    evals = np.linalg.eigvalsh(re_part(x))
    if evals[0] < -PSD_TOL * norm:
        raise NotPositiveSemidefinite(
            "block has a negative eigenvalue", min_eigenvalue=float(evals[0])
        )
    return norm, float(np.trace(x).real), d * norm


def is_hermitian(x: np.ndarray, rtol: float = 1e-12) -> bool:
    x = np.asarray(x)
    scale = max(float(np.max(np.abs(x), initial=0.0)), 1.0)
    return bool(np.max(np.abs(x - adjoint(x)), initial=0.0) <= rtol * scale)
