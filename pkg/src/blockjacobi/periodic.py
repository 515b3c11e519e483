"""Asymptotically periodic and periodically modulated models.

Given one period of limit blocks (Acal_j, Bcal_j), j mod N, the period
products are

    Xfrak_i(z) = Tfrak_{N+i-1}(z) ... Tfrak_i(z),
    Tfrak_j(z) = [[0, I], [-Acal_j^-1 Acal_{j-1}^*, Acal_j^-1 (z - Bcal_j)]],

with all indices reduced mod N. A real x lies in the set Lambda when the
Hermitian part of [[0, -Acal_{N-1}], [Acal_{N-1}^*, 0]] Xfrak_N(x) is
definite. For modulated models the limiting transfer matrices do not depend
on z, so Xfrak_N(0) is used for every probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matspec
from .errors import MissingPeriodData
from .model import JacobiModel
from .recurrence import transfer_stack

DEFINITE_MARGIN = 1e-8


@dataclass
class PeriodicAnalysis:
    """Results of :func:`periodic_analysis`.

    ``d1n`` maps each sequence name to its partial sums of ||X_{n+N} - X_n||
    plus a tail-decay exponent. ``limit_error`` compares the empirical
    N-step products at the horizon with the exact period products.
    """

    N: int
    modulated: bool
    period_products: dict
    empirical: dict
    limit_error: dict
    lambda_window: list
    d1n: dict = field(default_factory=dict)


def _frak_step(period, j: int, z: complex) -> np.ndarray:
    N = period.N
    A = period.A[j % N]
    A_prev = period.A[(j - 1) % N]
    Ainv = np.linalg.inv(A)
    d = A.shape[0]
    eye = np.eye(d, dtype=complex)
    return np.block([[0 * eye, eye],
                     [-Ainv @ matspec.adjoint(A_prev), Ainv @ (z * eye - period.B[j % N])]])


def period_product(period, i: int, z: complex) -> np.ndarray:
    """Xfrak_i(z) = Tfrak_{N+i-1}(z) ... Tfrak_i(z)."""
    X = np.eye(2 * period.A.shape[1], dtype=complex)
    for j in range(i, period.N + i):
        X = _frak_step(period, j, z) @ X
    return X


def lambda_membership(period, x: float) -> dict:
    """Definiteness test of Re([[0, -Acal_{N-1}], [Acal_{N-1}^*, 0]] Xfrak_N(x))."""
    N = period.N
    A_last = period.A[(N - 1) % N]
    d = A_last.shape[0]
    zero = np.zeros((d, d), dtype=complex)
    S = np.block([[zero, -A_last], [matspec.adjoint(A_last), zero]])
    M = S @ period_product(period, N, x)
    ev = np.linalg.eigvalsh(matspec.re_part(M))
    delta = DEFINITE_MARGIN * float(matspec.op_norm(M))
    if ev[0] > delta:
        sign = "positive"
    elif ev[-1] < -delta:
        sign = "negative"
    else:
        sign = None
    return {"lambda": float(x), "eigenvalues": ev.tolist(), "definite": sign is not None,
            "sign": sign}


def _d1n_sequences(model: JacobiModel, horizon: int) -> dict:
    a, b = model.blocks(0, horizon + 1)
    ainv = np.linalg.inv(a)
    return {
        "A_inv": ainv[1:],
        "A_inv_B": (ainv @ b)[1:],
        "A_inv_A_prev_adj": ainv[1:] @ matspec.adjoint(a[:-1]),
    }


def d1n_report(model: JacobiModel, N: int, horizon: int) -> dict:
    """Partial sums of ||X_{n+N} - X_n|| over n = 1..horizon-N for the three sequences.

    ``decay_exponent`` is the slope of log(term) against log(n) on the last half
    (None when the terms vanish); an exponent below -1 indicates summability.
    """
    out = {}
    for name, X in _d1n_sequences(model, horizon).items():
        diff = matspec.op_norm(X[N:] - X[:-N])
        sums = np.cumsum(diff)
        n = np.arange(1, len(diff) + 1)
        tail = slice(len(diff) // 2, None)
        pos = diff[tail] > 0
        slope = None
        if np.count_nonzero(pos) >= 2:
            slope = float(np.polyfit(np.log(n[tail][pos]), np.log(diff[tail][pos]), 1)[0])
        out[name] = {"partial_sums": sums, "total": float(sums[-1]) if len(sums) else 0.0,
                     "decay_exponent": slope}
    return out


def periodic_analysis(model: JacobiModel, z_probe, horizon: int) -> PeriodicAnalysis:
    """Period products, their empirical counterparts, the Lambda test and D_1^N sums.

    ``z_probe`` are real probe points for the Lambda test; the empirical products
    T_{n+N-1} ... T_n are formed at the largest n <= horizon - N + 1 in each
    residue class and evaluated at the first probe.
    """
    period = model.period
    if period is None:
        raise MissingPeriodData(f"model {model.name!r} declares no period data")
    N = period.N
    probes = np.atleast_1d(np.asarray(z_probe, dtype=float))
    z0 = complex(probes[0])
    z_limit = 0.0 if period.modulated else z0

    products, empirical, errors = {}, {}, {}
    for i in range(1, N + 1):
        products[i] = period_product(period, i, z_limit)
    for r in range(N):
        n = (horizon - N + 1) - ((horizon - N + 1 - r) % N)
        T = transfer_stack(model, n, n + N, z0)
        X = np.eye(2 * model.d, dtype=complex)
        for step in T:
            X = step @ X
        key = r if r > 0 else N
        empirical[key] = X
        errors[key] = float(matspec.op_norm(X - products[key]))

    window = [lambda_membership(period, 0.0 if period.modulated else x) | {"lambda": float(x)}
              for x in probes]
    return PeriodicAnalysis(N, period.modulated, products, empirical, errors, window,
                            d1n_report(model, N, horizon))
