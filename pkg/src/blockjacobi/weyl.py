"""Matrix Weyl function, the Jitomirskaya-Last type time scale and density estimates.

W(z) is the top-left d x d block of (J - z)^-1. It is approximated by the
same block of the principal N-block truncation, doubling N until successive
values agree to 1e-8 relative. The matrix solution U(z) with U_{-1} = I,
U_0 = W(z) is square summable for Im z != 0; it is the first block column of
the truncated resolvent and is recovered stably from the Schur sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matspec
from ._kernels import schur_block, schur_scalar
from .barrier import transfer_barrier
from .errors import HorizonExceeded, HypothesisUnmet, NonConverged, TruncationSingular
from .model import JacobiModel
from .recurrence import polynomials
from .seminorm import SeqWindow

GAP_TOL = 1e-8
CEILING = 1 << 22
DEFAULT_LADDER = (0.2, 0.1, 0.05, 0.025, 0.0125)
JL_MAX_HORIZON = 1 << 16
THEOREM_SLACK = 1e-6


@dataclass
class WeylSample:
    """W(z) from a truncation of ``truncation_n`` blocks.

    ``convergence_gap`` is ||W_N - W_{N/2}|| and ``converged`` records whether
    it met the 1e-8 relative target before the ceiling.
    """

    z: complex
    W: np.ndarray
    truncation_n: int
    convergence_gap: float
    converged: bool
    im_eigs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.im_eigs is None:
            self.im_eigs = np.linalg.eigvalsh(matspec.im_part(self.W))


def _sweep(model: JacobiModel, z: complex, N: int, keep: int = 1):
    a, b = model.blocks(0, N)
    if model.d == 1:
        g, gs = schur_scalar(np.ascontiguousarray(a[:, 0, 0]), np.ascontiguousarray(b[:, 0, 0]),
                             complex(z), keep)
        g = np.array([[g]])
        gs = gs[:, None, None]
    else:
        g, gs = schur_block(np.ascontiguousarray(a), np.ascontiguousarray(b), complex(z), keep)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(gs))):
        raise TruncationSingular(f"truncation of size {N} is singular at z={z}", N=N)
    return g, gs


def weyl_at(model: JacobiModel, z: complex, N: int) -> np.ndarray:
    """Top-left block of (J_N - z)^-1 for a fixed truncation; retries N + 1 once."""
    try:
        return _sweep(model, z, N)[0]
    except TruncationSingular:
        return _sweep(model, z, N + 1)[0]


def truncated_weyl(model: JacobiModel, z: complex, N: int | None = None,
                   ceiling: int | None = None, strict: bool = False) -> WeylSample:
    """W(z) by adaptive doubling of the truncation, starting at N >= 8d.

    Stops when ||W_{2N} - W_N|| < 1e-8 ||W_N||. Past ``ceiling`` the last
    sample is returned with ``converged=False`` (or NonConverged is raised when
    ``strict``).
    """
    z = complex(z)
    if z.imag == 0:
        raise ValueError("the Weyl function needs Im z != 0")
    d = model.d
    N = max(8 * d, 64) if N is None else int(N)
    if N < 8 * d:
        raise ValueError(f"truncation must be at least 8d = {8 * d}")
    ceiling = (CEILING // (d * d)) if ceiling is None else int(ceiling)
    W = weyl_at(model, z, N)
    while True:
        N2 = 2 * N
        W2 = weyl_at(model, z, N2)
        gap = float(matspec.op_norm(W2 - W))
        if gap < GAP_TOL * float(matspec.op_norm(W)):
            return WeylSample(z, W2, N2, gap, True)
        if 2 * N2 > ceiling:
            if strict:
                raise NonConverged(f"Weyl truncation did not converge by N={N2}", gap=gap, N=N2)
            return WeylSample(z, W2, N2, gap, False)
        N, W = N2, W2


def weyl_solution(model: JacobiModel, z: complex, window: int,
                  sample: WeylSample | None = None) -> tuple[WeylSample, np.ndarray]:
    """U(z) on -1..window in offset layout (``U[n + 1]`` is U_n), with U_{-1} = I.

    Uses U_{n+1} = -G_{n+1} A_n^* U_n from the Schur sweep of the converged
    truncation, which is stable even where U decays.
    """
    if sample is None:
        sample = truncated_weyl(model, z)
    N = max(sample.truncation_n, window + 2)
    g0, gs = _sweep(model, z, N, keep=window + 1)
    d = model.d
    a, _ = model.blocks(0, window)
    U = np.empty((window + 2, d, d), dtype=complex)
    U[0] = np.eye(d)
    U[1] = g0
    for n in range(window):
        U[n + 2] = -gs[n + 1] @ matspec.adjoint(a[n]) @ U[n + 1]
    return sample, U


def l2_decay_profile(model: JacobiModel, z: complex, n_max: int) -> dict:
    """Forward-computed ||P_n(z) W(z) + Q_n(z)|| for 0 <= n <= n_max.

    Forward evaluation cancels two growing terms, so only the prefix where the
    result stays above 1e-12 of the term sizes is trusted; ``ratio`` is the
    fitted geometric decay factor on that prefix and ``stable`` the same norms
    from the resolvent column.
    """
    sample = truncated_weyl(model, z)
    s = polynomials(model, n_max, z)
    U = s.Q[1:] + s.P[1:] @ sample.W
    nrm = matspec.op_norm(U)
    scale = matspec.op_norm(s.P[1:]) * matspec.op_norm(sample.W) + matspec.op_norm(s.Q[1:])
    trusted = nrm > 1e-12 * scale
    cut = int(np.argmin(trusted)) if not np.all(trusted) else n_max + 1
    _, Us = weyl_solution(model, z, n_max, sample)
    stable = matspec.op_norm(Us[1:])
    n = np.arange(cut)
    ratio = float(np.exp(np.polyfit(n, np.log(nrm[:cut]), 1)[0])) if cut >= 2 else None
    return {"norms": nrm, "trusted_length": cut, "ratio": ratio, "stable": stable}


def l2_tail_ratio(model: JacobiModel, z: complex) -> float:
    """||U||_[N/2, N] / ||U||_[0, N/2] for the Weyl solution on a converged truncation."""
    sample, U = weyl_solution(model, z, 0)
    N = sample.truncation_n
    _, U = weyl_solution(model, z, N - 1, sample)
    nrm = matspec.op_norm(U[1:]) ** 2
    half = N // 2
    return float(np.sqrt(nrm[half:].sum() / nrm[:half].sum()))


# ---------------------------------------------------------------------------
# J-L time scale


@dataclass
class JLValue:
    """m solving ||P(lam)||_[0,m] ||Q(lam)||_[0,m] = 1/(2 eps)."""

    lam: float
    eps: float
    m: float
    f_at_m: float


def _pq_windows(model, lam, K):
    s = polynomials(model, K, lam)
    return (SeqWindow(0, matspec.op_norm(s.P[1:])), SeqWindow(0, matspec.op_norm(s.Q[1:])))


def jl_product(model: JacobiModel, lam: float, t) -> float | np.ndarray:
    """f(t) = ||P(lam)||_[0,t] ||Q(lam)||_[0,t]."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    wp, wq = _pq_windows(model, lam, int(np.floor(t_arr.max())) + 1)
    out = np.sqrt(wp.interp_sq(0, t_arr) * wq.interp_sq(0, t_arr))
    return float(out[0]) if np.ndim(t) == 0 else out


def jl_function(model: JacobiModel, lam: float, eps: float, horizon: int = 64) -> JLValue:
    """Solve f(m) = 1/(2 eps) for the strictly increasing f(t) = ||P||_[0,t] ||Q||_[0,t].

    The unit interval containing the root is found from integer values; on it
    f^2 is a product of two affine functions, so the root is the positive
    solution of a quadratic. The horizon doubles up to 2^16 before
    HorizonExceeded (which carries f(horizon)).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    target = 1.0 / (2.0 * eps)
    K = max(int(horizon), 2)
    while True:
        wp, wq = _pq_windows(model, lam, K)
        ints = np.arange(K + 1, dtype=float)
        sp, sq = wp.interp_sq(0, ints), wq.interp_sq(0, ints)
        f_int = np.sqrt(sp * sq)
        hit = np.nonzero(f_int >= target)[0]
        if hit.size:
            break
        if K >= JL_MAX_HORIZON:
            raise HorizonExceeded(f"f({K}) = {f_int[-1]:.6g} < 1/(2 eps) = {target:.6g}",
                                  f_horizon=float(f_int[-1]), horizon=K)
        K = min(2 * K, JL_MAX_HORIZON)
    n = int(hit[0]) - 1
    if n < 0:
        # f(0) = ||P_0|| ||Q_0|| = 0, so the root is never at t <= 0
        n = 0
    p2, q2 = wp.values[n + 1] ** 2, wq.values[n + 1] ** 2
    a2, a1, a0 = p2 * q2, sp[n] * q2 + sq[n] * p2, sp[n] * sq[n] - target ** 2
    if a2 > 0:
        disc = np.sqrt(max(a1 * a1 - 4 * a2 * a0, 0.0))
        s = (-2 * a0) / (a1 + disc) if a1 + disc > 0 else 0.0
    else:
        s = -a0 / a1
    m = n + float(np.clip(s, 0.0, 1.0))
    return JLValue(float(lam), float(eps), m, jl_product(model, lam, m))


# ---------------------------------------------------------------------------
# variation of constants


def apply_L(P: np.ndarray, Q: np.ndarray, F: np.ndarray) -> np.ndarray:
    """(LF)_m = sum_{k<m} (Q_m P_k^* - P_m Q_k^*) F_k for m = 0..len(F)-1.

    ``P``, ``Q`` and ``F`` are stacks indexed from 0 (no offset).
    """
    M = len(F)
    sp = np.zeros((M,) + F.shape[1:], dtype=complex)
    sq = np.zeros_like(sp)
    sp[1:] = np.cumsum(matspec.adjoint(P[:M - 1]) @ F[:M - 1], axis=0)
    sq[1:] = np.cumsum(matspec.adjoint(Q[:M - 1]) @ F[:M - 1], axis=0)
    return Q[:M] @ sp - P[:M] @ sq


def variation_operator(model: JacobiModel, lam: float, eps: float, window_n: int,
                       n_random: int = 20, seed: int = 0x5EED) -> dict:
    """Checks of the variation-of-constants identities at z = lam + i eps.

    Returns a dict with
      ``residual``: max_m ||U_m - i eps (L U)_m - V_m|| / (||U_m|| + eps ||(LU)_m|| + ||V_m||);
      ``bound_ratio``: max over random F and t of ||LF||_[0,t] / (2 ||P|| ||Q|| ||F||);
      ``difference_ok``: ||U_m - V_m|| <= eps ||(L U)_m|| (1 + 1e-8) for every m;
      ``seminorm_ratio``: ||V||_[0,m] / (2 ||U||_[0,m]) at the J-L time m (or None);
      ``energy_error``: relative error of (1/eps) <Im W v, v> = ||U v||^2 over the window.
    """
    if window_n < 4:
        raise ValueError("window_n must be at least 4")
    z = complex(lam, eps)
    sample, U_full = weyl_solution(model, z, window_n)
    W = sample.W
    s = polynomials(model, window_n, lam)
    P, Q = s.P[1:], s.Q[1:]
    U = U_full[1:]
    V = Q + P @ W
    LU = apply_L(P, Q, U)
    nrm = matspec.op_norm
    res = nrm(U - 1j * eps * LU - V) / (nrm(U) + eps * nrm(LU) + nrm(V))
    diff_ok = bool(np.all(nrm(U - V) <= eps * nrm(LU) * (1 + 1e-8) + 1e-14 * nrm(V)))

    rng = np.random.default_rng(seed)
    wp, wq = SeqWindow(0, nrm(P)), SeqWindow(0, nrm(Q))
    ts = np.linspace(0, window_n, 4 * window_n + 1)
    worst = 0.0
    for _ in range(n_random):
        length = int(rng.integers(1, window_n + 2))
        F = np.zeros_like(U)
        F[:length] = rng.standard_normal((length,) + U.shape[1:]) \
            + 1j * rng.standard_normal((length,) + U.shape[1:])
        LF = apply_L(P, Q, F)
        lhs = SeqWindow(0, nrm(LF)).interp(0, ts)
        rhs = 2 * wp.interp(0, ts) * wq.interp(0, ts) * SeqWindow(0, nrm(F)).interp(0, ts)
        ok = rhs > 0
        worst = max(worst, float(np.max(lhs[ok] / rhs[ok], initial=0.0)))

    seminorm_ratio = None
    try:
        m = jl_function(model, lam, eps).m
        if m <= window_n - 1:
            seminorm_ratio = float(SeqWindow(0, nrm(V)).interp(0, m)
                                   / (2 * SeqWindow(0, nrm(U)).interp(0, m)))
    except HorizonExceeded:
        pass

    energy = 0.0
    imw = matspec.im_part(W)
    for v in np.eye(model.d):
        lhs = float(np.real(v @ imw @ v)) / eps
        rhs = float(np.sum(np.abs(U @ v) ** 2))
        energy = max(energy, abs(lhs - rhs) / lhs)
    return {"z": z, "truncation_n": sample.truncation_n, "residual": float(np.max(res)),
            "bound_ratio": worst, "difference_ok": diff_ok, "seminorm_ratio": seminorm_ratio,
            "energy_error": energy}


# ---------------------------------------------------------------------------
# quantitative bounds


def theorem_bounds(model: JacobiModel, lam: float, eps: float) -> dict:
    """Two-sided control of W(lam + i eps) by the transfer barrier at the J-L time.

    With m the J-L time, b = transfer barrier at (lam, m) and
    s_pm = 4 d b +- sqrt((4 d b)^2 - 1), checks
    lambda_min(Im W) >= 1/(8 b) and s_- <= ||W|| <= s_+, each with 1e-6
    relative slack. Raises HypothesisUnmet if m < 1.
    """
    jl = jl_function(model, lam, eps)
    if jl.m < 1:
        raise HypothesisUnmet(f"J-L time m = {jl.m:.6g} < 1 at eps = {eps}", m=jl.m)
    b = float(transfer_barrier(model, lam, jl.m))
    c = 4 * model.d * b
    root = np.sqrt(c * c - 1)
    s_minus, s_plus = c - root, c + root
    if s_minus < 1e-6 * c:
        # c - sqrt(c^2 - 1) cancels; use the conjugate form
        s_minus = 1.0 / (c + root)
    sample = truncated_weyl(model, complex(lam, eps))
    norm_w = float(matspec.op_norm(sample.W))
    min_im = float(sample.im_eigs[0])
    lower = 1.0 / (8 * b)
    return {
        "lambda": float(lam), "eps": float(eps), "m": jl.m, "barrier": b,
        "s_minus": float(s_minus), "s_plus": float(s_plus), "norm_W": norm_w,
        "min_eig_im_W": min_im, "im_lower_bound": lower,
        "im_ok": bool(min_im >= lower * (1 - THEOREM_SLACK)),
        "norm_ok": bool(s_minus * (1 - THEOREM_SLACK) <= norm_w <= s_plus * (1 + THEOREM_SLACK)),
        "converged": sample.converged,
    }


# ---------------------------------------------------------------------------
# density


@dataclass
class DensityEstimate:
    """Extrapolated D(lam) = (1/pi) Im W(lam + i0) on a grid.

    ``D[i]`` is Hermitian; ``fit_residual[i]`` is the largest least-squares
    residual of the linear fit relative to max(||D||, 1e-300);
    ``im_norms[i, r]`` is ||Im W|| on rung r.
    """

    lambda_grid: np.ndarray
    eps_ladder: np.ndarray
    D: np.ndarray
    fit_residual: np.ndarray
    singular_suspect: np.ndarray
    rank: np.ndarray
    im_norms: np.ndarray
    converged: np.ndarray


def density_at(model: JacobiModel, lam: float, ladder=DEFAULT_LADDER) -> dict:
    """Density estimate at one lambda (see :func:`density_estimate`)."""
    ladder = np.asarray(ladder, dtype=float)
    if len(ladder) < 3 or np.any(np.diff(ladder) >= 0):
        raise ValueError("the eps ladder must be strictly decreasing with at least 3 rungs")
    ims, conv = [], True
    for eps in ladder:
        s = truncated_weyl(model, complex(lam, eps))
        conv &= s.converged
        ims.append(matspec.im_part(s.W) / np.pi)
    ims = np.array(ims)
    x = ladder[-3:]
    Y = ims[-3:].reshape(3, -1)
    V = np.vstack([np.ones(3), x]).T
    coef, *_ = np.linalg.lstsq(V, Y, rcond=None)
    resid = Y - V @ coef
    D = coef[0].reshape(model.d, model.d)
    D = matspec.re_part(D)
    dn = float(matspec.op_norm(D))
    norms = matspec.op_norm(ims) * np.pi
    sv = matspec.singular_values(D)
    return {"D": D, "fit_residual": float(np.max(np.abs(resid))) / max(dn, 1e-300),
            "singular_suspect": bool(norms[-1] >= 10 * norms[0]),
            "rank": int(np.count_nonzero(sv > 1e-6 * dn)) if dn > 0 else 0,
            "im_norms": norms, "converged": bool(conv)}


def assemble_density(lambda_grid, eps_ladder, rows: list[dict]) -> DensityEstimate:
    """Stack per-point results of :func:`density_at` in grid order."""
    return DensityEstimate(
        np.asarray(lambda_grid, dtype=float), np.asarray(eps_ladder, dtype=float),
        np.array([r["D"] for r in rows]),
        np.array([r["fit_residual"] for r in rows]),
        np.array([r["singular_suspect"] for r in rows]),
        np.array([r["rank"] for r in rows]),
        np.array([r["im_norms"] for r in rows]),
        np.array([r["converged"] for r in rows]),
    )


def density_estimate(model: JacobiModel, lambda_grid, eps_ladder=DEFAULT_LADDER) -> DensityEstimate:
    """Extrapolate (1/pi) Im W(lam + i eps) to eps = 0 for each grid point.

    Linear least-squares fit in eps over the last three rungs, then the
    Hermitian part is kept. A point is singular-suspect when ||Im W|| grows by
    10x or more from the first to the last rung.
    """
    lam_grid = np.asarray(lambda_grid, dtype=float)
    rows = [density_at(model, lam, eps_ladder) for lam in lam_grid]
    return assemble_density(lam_grid, eps_ladder, rows)
