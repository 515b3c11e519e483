"""Barriers: upper bounds for ratios of seminorms of normalized solutions.

For real lambda and t >= 1 a barrier b(lambda, t) dominates
(||U||_[0,t] / ||V||_[0,t])^2 over all pairs of matrix solutions normalized
by ||U_{-1}||^2 + ||U_0||^2 = 1. Two barriers are provided:

* the transfer barrier 8 (||R||_[1,t] / floor(R)_[1,t])^2, cheap and explicit;
* the minimal barrier (the supremum itself), exact for d = 1 via 2x2 Gram
  eigenvalues and a certified lower bound for d > 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matspec
from .errors import BudgetExhausted, GrowthOverflow
from .model import JacobiModel
from .recurrence import polynomials, transfer_trajectory
from .seminorm import SeqWindow

DEFAULT_SEED = 0x5EED
DEFAULT_SAMPLES = 2048
DEFAULT_ITERATIONS = 50
ILL_CONDITIONED = 1e-10  # Gram eigenvalue ratio below which the small eigenvalue is recomputed
MINOR_CHUNK = 2048


@dataclass
class BarrierProfile:
    """Barrier values on a (lambda, t) grid; ``values[i, j]`` is b(lam[i], t[j]).

    Cells past a growth overflow are NaN. ``liminf_estimate`` is, per lambda,
    the minimum over the last half of the t grid. ``lower_bound`` marks
    minimal-kind profiles computed by sampling (d > 1).
    """

    lambda_grid: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    kind: str
    horizon: float
    liminf_estimate: np.ndarray = field(default=None)
    lower_bound: bool = False

    def __post_init__(self):
        if self.liminf_estimate is None:
            tail = self.values[:, len(self.t_grid) // 2:]
            with np.errstate(all="ignore"):
                self.liminf_estimate = np.array(
                    [np.nanmin(r) if np.any(np.isfinite(r)) else np.nan for r in tail])


def _window_for(model: JacobiModel, lam: float, t_max: float):
    """Norm and minimum-modulus windows of R_1..R_{floor(t_max)+1}."""
    K = int(np.floor(t_max)) + 1
    traj = transfer_trajectory(model, lam, K)
    return SeqWindow(1, traj.norm), SeqWindow(1, traj.minmod), traj.stopped_at


def transfer_barrier(model: JacobiModel, lam: float, t) -> float | np.ndarray:
    """8 (||R(lam)||_[1,t] / floor(R(lam))_[1,t])^2 for t >= 1 (scalar or array).

    Raises GrowthOverflow when the products overflow before the largest t.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 1):
        raise ValueError("the transfer barrier is defined for t >= 1")
    w_norm, w_min, stopped = _window_for(model, lam, float(t_arr.max()))
    if stopped is not None:
        raise GrowthOverflow(f"transfer products overflow at n={stopped}", index=stopped)
    out = 8.0 * w_norm.interp_sq(1, t_arr) / w_min.interp_sq(1, t_arr)
    return float(out[0]) if np.ndim(t) == 0 else out


def transfer_profile(model: JacobiModel, lambda_grid, t_grid) -> BarrierProfile:
    """Transfer barrier on a grid; cells beyond an overflow are NaN."""
    lam_grid = np.asarray(lambda_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.full((len(lam_grid), len(t_grid)), np.nan)
    for i, lam in enumerate(lam_grid):
        w_norm, w_min, _ = _window_for(model, lam, float(t_grid.max()))
        ok = np.floor(t_grid) + (t_grid % 1 > 0) <= w_norm.end_index
        vals[i, ok] = 8.0 * w_norm.interp_sq(1, t_grid[ok]) / w_min.interp_sq(1, t_grid[ok])
    return BarrierProfile(lam_grid, t_grid, vals, "transfer", float(t_grid.max()))


# ---------------------------------------------------------------------------
# minimal barrier


def _solution_rows(model: JacobiModel, lam: float, t_max: float) -> np.ndarray:
    """Rows r_k = [Q_k, P_k] (d x 2d) for 0 <= k <= floor(t_max) + 1.

    The solution with initial data alpha = (U_{-1}; U_0) is U_k = r_k alpha.
    """
    K = int(np.floor(t_max)) + 1
    s = polynomials(model, K, lam)
    return np.concatenate([s.Q[1:], s.P[1:]], axis=2)


def _gram(rows: np.ndarray, t: float) -> np.ndarray:
    """sum_{k <= floor t} r_k^* r_k + {t} r_{floor t + 1}^* r_{floor t + 1}."""
    fl = int(np.floor(t))
    frac = t - fl
    G = np.einsum("kij,kil->jl", rows[:fl + 1].conj(), rows[:fl + 1])
    if frac > 0:
        G = G + frac * rows[fl + 1].conj().T @ rows[fl + 1]
    return G


def _scalar_extremes(rows: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of the 2x2 Gram matrix for d = 1.

    When the eigensolve cannot resolve the small eigenvalue it is recomputed
    as det(G) / lambda_max, with the determinant taken as the weighted sum of
    squared 2x2 minors of the rows. That sum has no cancellation.
    """
    ev, vecs = np.linalg.eigh(_gram(rows, t))
    if ev[0] > ILL_CONDITIONED * ev[-1]:
        return ev, vecs
    fl = int(np.floor(t))
    frac = t - fl
    v = rows[:fl + 2, 0, :] if frac > 0 else rows[:fl + 1, 0, :]
    w = np.ones(len(v))
    if frac > 0:
        w[-1] = frac
    det = 0.0
    for start in range(0, len(v), MINOR_CHUNK):
        block = v[start:start + MINOR_CHUNK]
        minors = np.abs(np.outer(block[:, 0], v[:, 1]) - np.outer(block[:, 1], v[:, 0])) ** 2
        det += float(w[start:start + MINOR_CHUNK] @ minors @ w)
    ev = ev.copy()
    ev[0] = 0.5 * det / ev[-1]
    return ev, vecs


def vector_barrier(model: JacobiModel, lam: float, t) -> float | np.ndarray:
    """Barrier restricted to vector initial data: lambda_max(G) / lambda_min(G).

    Exact for d = 1, and a lower bound of the matrix supremum for d > 1
    (vector pairs embed isometrically into matrix pairs).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    rows = _solution_rows(model, lam, float(t_arr.max()))
    out = np.empty(len(t_arr))
    for i, tt in enumerate(t_arr):
        if model.d == 1:
            ev, _ = _scalar_extremes(rows, tt)
        else:
            ev = np.linalg.eigvalsh(_gram(rows, tt))
        out[i] = ev[-1] / ev[0]
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass
class MinimalBarrierResult:
    """Lower-bound estimate of the minimal barrier at one (lambda, t).

    ``value = numerator / denominator`` where ``numerator`` (``denominator``)
    is the largest (smallest) normalized squared seminorm found; the maximizing
    and minimizing initial data are kept as a certificate.
    """

    value: float
    numerator: float
    denominator: float
    exact: bool
    certificate: tuple[np.ndarray, np.ndarray]
    evaluations: int = 0


def _objective(rows: np.ndarray, t: float, d: int):
    fl = int(np.floor(t))
    frac = t - fl
    head = rows[:fl + 1]
    last = rows[fl + 1] if frac > 0 else None

    def phi(alpha: np.ndarray) -> float:
        # alpha is (2d, d); normalization ||U_{-1}||^2 + ||U_0||^2
        norm = matspec.op_norm(alpha[:d]) ** 2 + matspec.op_norm(alpha[d:]) ** 2
        val = np.sum(matspec.op_norm(head @ alpha) ** 2)
        if last is not None:
            val += frac * matspec.op_norm(last @ alpha) ** 2
        return float(val / norm)

    return phi


def _refine(phi, alpha: np.ndarray, sign: float, iterations: int, budget: list[int]):
    """Coordinate search with step halving on the real and imaginary parts."""
    x = np.concatenate([alpha.real.ravel(), alpha.imag.ravel()])
    shape = alpha.shape
    half = x.size // 2

    def unpack(v):
        return (v[:half] + 1j * v[half:]).reshape(shape)

    best = sign * phi(alpha)
    step = 0.25 * np.max(np.abs(x))
    for _ in range(iterations):
        improved = False
        for i in range(x.size):
            for delta in (step, -step):
                trial = x.copy()
                trial[i] += delta
                budget[0] -= 1
                if budget[0] < 0:
                    raise BudgetExhausted("minimal barrier refinement ran out of evaluations")
                val = sign * phi(unpack(trial))
                if val > best:
                    x, best, improved = trial, val, True
                    break
        if not improved:
            step *= 0.5
    return unpack(x), sign * best


def minimal_barrier(model: JacobiModel, lam: float, t: float, samples: int = DEFAULT_SAMPLES,
                    iterations: int = DEFAULT_ITERATIONS, seed: int = DEFAULT_SEED,
                    max_evaluations: int = 2_000_000) -> MinimalBarrierResult:
    """Minimal barrier at (lam, t).

    d = 1: exact extreme eigenvalues of the 2x2 window Gram matrix.
    d > 1: starts from the vector-data optimum, adds ``samples`` stratified
    random matrix pairs and refines the best candidates by coordinate search.
    Every candidate is an admissible normalized pair, so the result never
    exceeds the true supremum. Raises BudgetExhausted past ``max_evaluations``.
    """
    if t < 1:
        raise ValueError("barriers are defined for t >= 1")
    d = model.d
    rows = _solution_rows(model, lam, t)
    if d == 1:
        ev, vecs = _scalar_extremes(rows, t)
        return MinimalBarrierResult(float(ev[-1] / ev[0]), float(ev[-1]), float(ev[0]), True,
                                    (vecs[:, -1:], vecs[:, :1]), 0)
    ev, vecs = np.linalg.eigh(_gram(rows, t))

    phi = _objective(rows, t, d)
    budget = [max_evaluations]
    rng = np.random.default_rng(seed)
    hi_alpha = np.zeros((2 * d, d), complex)
    hi_alpha[:, 0] = vecs[:, -1]
    lo_alpha = np.zeros((2 * d, d), complex)
    lo_alpha[:, 0] = vecs[:, 0]
    hi_val, lo_val = phi(hi_alpha), phi(lo_alpha)

    # stratify over the split of the normalization between U_{-1} and U_0
    angles = (np.arange(samples) + rng.random(samples)) / samples * (np.pi / 2)
    cands = []
    for theta in angles:
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        y = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        alpha = np.vstack([np.cos(theta) * x / matspec.op_norm(x),
                           np.sin(theta) * y / matspec.op_norm(y)])
        cands.append((phi(alpha), alpha))
    budget[0] -= samples
    cands.sort(key=lambda c: c[0])
    if cands[-1][0] > hi_val:
        hi_val, hi_alpha = cands[-1]
    if cands[0][0] < lo_val:
        lo_val, lo_alpha = cands[0]

    hi_alpha, hi_val = _refine(phi, hi_alpha, 1.0, iterations, budget)
    lo_alpha, lo_val = _refine(phi, lo_alpha, -1.0, iterations, budget)
    return MinimalBarrierResult(hi_val / lo_val, hi_val, lo_val, False, (hi_alpha, lo_alpha),
                                max_evaluations - budget[0])


def minimal_profile(model: JacobiModel, lambda_grid, t_grid, **kw) -> BarrierProfile:
    lam_grid = np.asarray(lambda_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.full((len(lam_grid), len(t_grid)), np.nan)
    for i, lam in enumerate(lam_grid):
        if model.d == 1:
            try:
                vals[i] = vector_barrier(model, lam, t_grid)
            except GrowthOverflow:
                pass
            continue
        for j, t in enumerate(t_grid):
            try:
                vals[i, j] = minimal_barrier(model, lam, t, **kw).value
            except GrowthOverflow:
                break
    return BarrierProfile(lam_grid, t_grid, vals, "minimal", float(t_grid.max()),
                          lower_bound=model.d > 1)


# ---------------------------------------------------------------------------
# sandwich bounds


def _sandwich_one(rows, w_norm, w_min, ts, initial):
    u_minus, u_zero = (np.asarray(x, dtype=complex) for x in initial)
    vec = u_zero.ndim == 1
    alpha = np.concatenate([u_minus, u_zero]) if vec else np.vstack([u_minus, u_zero])
    sol = rows @ alpha
    w_sol = SeqWindow(0, np.linalg.norm(sol, axis=1) if vec else matspec.op_norm(sol))
    if vec:
        init = np.linalg.norm(u_minus) ** 2 + np.linalg.norm(u_zero) ** 2
        lo_fac, hi_fac = 0.5, 1.0
    else:
        init = matspec.op_norm(u_minus) ** 2 + matspec.op_norm(u_zero) ** 2
        lo_fac, hi_fac = 0.25, 2.0
    return (lo_fac * init * w_min.interp_sq(1, ts), w_sol.interp_sq(0, ts),
            hi_fac * init * w_norm.interp_sq(1, ts))


def sandwich_bounds(model: JacobiModel, lam: float, t: float, initial: tuple,
                    ) -> tuple[float, float, float]:
    """(lower, ||U||^2_[0,t], upper) for one solution with initial data (U_{-1}, U_0).

    Vector data use the factors 1/2 and 1, matrix data 1/4 and 2, applied to
    (||U_{-1}||^2 + ||U_0||^2) times floor(R)^2_[1,t] and ||R||^2_[1,t].
    """
    lo, val, hi = sandwich_batch(model, lam, [t], [initial])
    return float(lo[0, 0]), float(val[0, 0]), float(hi[0, 0])


def sandwich_batch(model: JacobiModel, lam: float, ts, initials,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """:func:`sandwich_bounds` for many initial data and times at one lambda.

    Returns three arrays of shape ``(len(initials), len(ts))``.
    """
    ts = np.asarray(ts, dtype=float)
    t_max = float(ts.max())
    rows = _solution_rows(model, lam, t_max)
    w_norm, w_min, stopped = _window_for(model, lam, t_max)
    if stopped is not None:
        raise GrowthOverflow(f"transfer products overflow at n={stopped}", index=stopped)
    out = [_sandwich_one(rows, w_norm, w_min, ts, init) for init in initials]
    return tuple(np.array([o[k] for o in out]) for k in range(3))
