"""Compiled inner loops for the truncated resolvent.

The top-left d x d block of (J_N - z)^-1 is obtained from the backward
Schur-complement sweep

    G_{N-1} = (B_{N-1} - z)^-1,
    G_n     = (B_n - z - A_n G_{n+1} A_n^*)^-1,

which is block Gaussian elimination of the banded truncation from the bottom
up, so W_N(z) = G_0. The loops are sequential in n and run through numba.
"""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def schur_scalar(a, b, z, keep):
    """d = 1 sweep; returns G_0 and G_0..G_{keep-1}."""
    N = a.shape[0]
    out = np.empty(keep, dtype=np.complex128)
    g = 1.0 / (b[N - 1] - z)
    if N - 1 < keep:
        out[N - 1] = g
    for n in range(N - 2, -1, -1):
        an = a[n]
        g = 1.0 / (b[n] - z - an * g * np.conj(an))
        if n < keep:
            out[n] = g
    return g, out


@numba.njit(cache=True)
def schur_block(a, b, z, keep):
    """General d sweep; ``a`` and ``b`` are (N, d, d) complex arrays."""
    N = a.shape[0]
    d = a.shape[1]
    eye = np.eye(d, dtype=np.complex128)
    out = np.empty((keep, d, d), dtype=np.complex128)
    g = np.linalg.inv(b[N - 1] - z * eye)
    if N - 1 < keep:
        out[N - 1] = g
    for n in range(N - 2, -1, -1):
        an = np.ascontiguousarray(a[n])
        ah = np.ascontiguousarray(np.conj(an).T)
        g = np.linalg.inv(b[n] - z * eye - an @ g @ ah)
        if n < keep:
            out[n] = g
    return g, out
