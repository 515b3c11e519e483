"""Horizon-qualified checks of sufficient conditions for nonsubordinacy.

Each check produces a statistic trajectory for n = 1..horizon and turns it
into a tri-state verdict from dyadic windows [2^j, 2^{j+1}):

* liminf-type conditions (GLS, barrier nonsubordinacy) look at windowed
  minima, limsup-type ones (GBS, H class) at windowed maxima;
* "violated-at-horizon" when the windowed statistic is nondecreasing from
  n >= 8 on and grows by at least 10x in total from there to the horizon;
* "satisfied-at-horizon" when the last window stays within 1.05x of the
  reference level (minimum over n >= 8, or the running maximum over
  8 <= n <= horizon/2);
* "inconclusive" otherwise.

An overflow of the transfer products ends the scan early with verdict
violated-at-horizon, since the statistics then grow exponentially.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matspec
from .barrier import DEFAULT_SEED
from .errors import GrowthOverflow, InvalidSpec
from .model import JacobiModel, carleman
from .recurrence import polynomials, transfer_trajectory

SATISFIED = "satisfied-at-horizon"
VIOLATED = "violated-at-horizon"
INCONCLUSIVE = "inconclusive"

SATISFY_FACTOR = 1.05
GROWTH_FACTOR = 10.0
GROWTH_START = 8


@dataclass
class ConditionReport:
    """Trajectory ``values[i]`` belongs to index ``n[i]``; windows are dyadic."""

    condition: str
    lam: float
    horizon: int
    n: np.ndarray
    values: np.ndarray
    verdict: str
    windows: list = field(default_factory=list)
    stopped_at: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"condition": self.condition, "lambda": self.lam, "horizon": self.horizon,
                "verdict": self.verdict, "stopped_at": self.stopped_at,
                "windows": self.windows, "diagnostics": self.diagnostics}


def dyadic_windows(n: np.ndarray, values: np.ndarray, mode: str) -> list[dict]:
    """Per-window min (``mode="min"``) or max of ``values`` over [2^j, 2^{j+1}).

    Points past the last complete window are merged into it, so a horizon of
    2^k does not leave a one-point final window.
    """
    out = []
    if len(n) == 0:
        return out
    last = max(int(np.floor(np.log2(n[-1] + 1))) - 1, 0)
    for j in range(last + 1):
        hi = 2 ** (j + 1) if j < last else n[-1] + 1
        sel = (n >= 2 ** j) & (n < hi)
        if np.any(sel):
            v = values[sel]
            out.append({"start": int(2 ** j), "end": int(min(hi - 1, n[-1])),
                        "value": float(np.min(v) if mode == "min" else np.max(v))})
    return out


def window_verdict(n: np.ndarray, values: np.ndarray, mode: str,
                   stopped: bool = False) -> tuple[str, list[dict], dict]:
    """Tri-state verdict from dyadic windows; see the module docstring."""
    wins = dyadic_windows(n, values, mode)
    stats = np.array([w["value"] for w in wins])
    late = np.array([w["start"] >= GROWTH_START for w in wins])
    info = {}
    if stopped:
        return VIOLATED, wins, {"reason": "overflow"}
    if len(stats) == 0:
        return INCONCLUSIVE, wins, info
    tail = stats[late] if np.count_nonzero(late) >= 2 else stats
    growth = float(tail[-1] / tail[0]) if tail[0] > 0 else np.inf
    monotone = bool(np.all(np.diff(tail) >= -1e-12 * np.abs(tail[1:])))
    first = wins[int(np.argmax(late))] if np.count_nonzero(late) >= 2 else wins[0]
    decades = np.log10(wins[-1]["end"] / first["start"])
    info = {"growth": growth, "monotone": monotone,
            "growth_per_decade": float(growth ** (1 / decades)) if decades > 0 else None}
    if monotone and growth >= GROWTH_FACTOR:
        return VIOLATED, wins, info
    # references skip the start-up transient n < 8 when the horizon allows it
    settled = n >= GROWTH_START if n[-1] >= 2 * GROWTH_START else np.ones(len(n), bool)
    if mode == "min":
        ref = float(np.min(values[settled]))
    else:
        half = settled & (n <= n[-1] // 2)
        ref = float(np.max(values[half])) if np.any(half) else float(np.max(values))
    info["reference"] = ref
    if stats[-1] <= SATISFY_FACTOR * ref:
        return SATISFIED, wins, info
    return INCONCLUSIVE, wins, info


def _check_horizon(horizon: int) -> None:
    if horizon < 10:
        raise InvalidSpec("condition checks need horizon >= 10")


# ---------------------------------------------------------------------------
# GLS / GBS


def rho_sequence(model: JacobiModel, N: int, power: float = 1.0) -> np.ndarray:
    """sum_{k<n} ||A_k||^-power for n = 1..N."""
    a, _ = model.blocks(0, N)
    return np.cumsum(matspec.op_norm(a) ** (-power))


def _ls_report(model, lam, horizon, condition, mode) -> ConditionReport:
    _check_horizon(horizon)
    traj = transfer_trajectory(model, lam, horizon)
    K = traj.K
    n = np.arange(1, K + 1)
    partial = np.cumsum(traj.norm ** 2)
    rho = rho_sequence(model, horizon)[:K]
    stat = partial / rho
    verdict, wins, info = window_verdict(n, stat, mode, traj.stopped_at is not None)
    # bound: (||R||_[1,n] / floor(R)_[1,n])^2 <= statistic^2
    with np.errstate(over="ignore"):
        ratio = partial / np.cumsum(traj.minmod ** 2)
        bound = stat ** 2
    # sqrt-normalized variant, with rho~_n = sum_{k<=n} ||A_k||^-1/2
    rho_half = rho_sequence(model, horizon + 1, 0.5)[1:K + 1]
    alt = partial / rho_half
    diag = {
        "carleman_rho_final": float(rho[-1]) if K else None,
        "transfer_ratio_bound_holds": bool(np.all(ratio <= bound * (1 + 1e-9))),
        "transfer_ratio_over_bound_max": float(np.max(ratio / bound)) if K else None,
        "sqrt_normalized_statistic": {
            "final": float(alt[-1]) if K else None,
            "max": float(np.max(alt)) if K else None,
            "min": float(np.min(alt)) if K else None,
            "late_max_over_min": float(np.max(alt[K // 8:]) / np.min(alt[K // 8:])) if K >= 8 else None,
        },
        **info,
    }
    return ConditionReport(condition, float(lam), horizon, n, stat, verdict, wins,
                           traj.stopped_at, diag)


def gls_check(model: JacobiModel, lam: float, horizon: int) -> ConditionReport:
    """Trajectory (1/rho_n) sum_{k=1}^n ||R_k(lam)||^2 judged by windowed minima."""
    return _ls_report(model, lam, horizon, "GLS", "min")


def gbs_check(model: JacobiModel, lam: float, horizon: int) -> ConditionReport:
    """Same statistic as gls_check, judged by windowed maxima."""
    return _ls_report(model, lam, horizon, "GBS", "max")


# ---------------------------------------------------------------------------
# H class


def hclass_check(model: JacobiModel, lam: float, horizon: int, probes: int = 20,
                 seed: int = DEFAULT_SEED) -> ConditionReport:
    """H-class constant c_n = ||R_n|| / prod_{k<n} |det T_k|^{1/(2d)} and ||R_n|| / floor(R_n).

    The determinant product telescopes to 1/|det A_{n-1}|. Both trajectories
    must stay bounded (limsup rule) for a satisfied verdict. The report also
    carries the probe max_n max_{v,w} ||R_n v|| / ||R_n w|| over ``probes``
    random unit pairs, which can never exceed max_n ||R_n|| / floor(R_n).
    """
    _check_horizon(horizon)
    d = model.d
    rng = np.random.default_rng(seed)
    vw = rng.standard_normal((2 * d, 2 * probes)) + 1j * rng.standard_normal((2 * d, 2 * probes))
    vw /= np.linalg.norm(vw, axis=0)
    traj = transfer_trajectory(model, lam, horizon, probes=vw)
    K = traj.K
    n = np.arange(1, K + 1)
    a, _ = model.blocks(0, max(K, 1))
    logdet = np.linalg.slogdet(a[:K])[1]
    c = traj.norm * np.exp(logdet / (2 * d))
    cond = traj.norm / traj.minmod
    stopped = traj.stopped_at is not None
    v1, w1, i1 = window_verdict(n, c, "max", stopped)
    v2, w2, i2 = window_verdict(n, cond, "max", stopped)
    if VIOLATED in (v1, v2):
        verdict = VIOLATED
    elif v1 == v2 == SATISFIED:
        verdict = SATISFIED
    else:
        verdict = INCONCLUSIVE
    pn = traj.probe_norms
    probe_ratio = float(np.max(pn[:, :probes] / pn[:, probes:])) if K else None
    diag = {"c_verdict": v1, "ratio_verdict": v2, "c_max": float(np.max(c)) if K else None,
            "ratio_max": float(np.max(cond)) if K else None, "ratio_windows": w2,
            "probe_ratio_max": probe_ratio,
            "probe_within_bound": bool(probe_ratio <= np.max(cond) * (1 + 1e-9)) if K else None,
            "c": i1, "ratio": i2}
    return ConditionReport("Hclass", float(lam), horizon, n, c, verdict, w1, traj.stopped_at, diag)


# ---------------------------------------------------------------------------
# barrier nonsubordinacy


def nonsubordinacy_scan(model: JacobiModel, lam: float, horizon: int,
                        kind: str = "transfer") -> ConditionReport:
    """Trajectory of b(lam, n) for n = 1..horizon judged by windowed minima.

    ``kind="transfer"`` uses the transfer barrier; ``kind="minimal"`` uses the
    vector-data Gram ratio (exact minimal barrier for d = 1, a lower bound for
    d > 1, so only a violated verdict is conclusive there).
    """
    _check_horizon(horizon)
    if kind == "transfer":
        traj = transfer_trajectory(model, lam, horizon)
        K = traj.K
        vals = 8.0 * np.cumsum(traj.norm ** 2) / np.cumsum(traj.minmod ** 2)
        stopped = traj.stopped_at
    elif kind == "minimal":
        vals, stopped = _gram_ratio_trajectory(model, lam, horizon)
        K = len(vals)
    else:
        raise InvalidSpec(f"unknown barrier kind {kind!r}")
    n = np.arange(1, K + 1)
    verdict, wins, info = window_verdict(n, vals, "min", stopped is not None)
    if kind == "minimal" and model.d > 1 and verdict == SATISFIED:
        verdict = INCONCLUSIVE
    return ConditionReport("VectorNonsub", float(lam), horizon, n, vals, verdict, wins,
                           stopped, {"kind": kind, **info})


def _gram_ratio_trajectory(model, lam, horizon):
    stopped = None
    try:
        s = polynomials(model, horizon, lam)
        P, Q = s.P[1:], s.Q[1:]
    except GrowthOverflow as exc:
        stopped = exc.details["index"]
        P, Q = exc.partial[1:, :, :model.d], exc.partial[1:, :, model.d:]
    rows = np.concatenate([Q, P], axis=2)
    G = np.cumsum(np.einsum("kij,kil->kjl", rows.conj(), rows), axis=0)
    ev = np.linalg.eigvalsh(G[1:])
    return ev[:, -1] / ev[:, 0], stopped


def coordinate_ratio(model: JacobiModel, lam: float, horizon: int, i: int, j: int,
                     ) -> tuple[np.ndarray, np.ndarray]:
    """||u||^2_[0,n] / ||v||^2_[0,n] for n = 0..horizon, where u = P(lam) e_i, v = P(lam) e_j.

    For diagonal models these are solutions living in single coordinates.
    """
    s = polynomials(model, horizon, lam)
    P = s.P[1:]
    u = np.cumsum(np.linalg.norm(P[:, :, i], axis=1) ** 2)
    v = np.cumsum(np.linalg.norm(P[:, :, j], axis=1) ** 2)
    return np.arange(horizon + 1), u / v


def coordinate_rate(model: JacobiModel, horizon: int, i: int, j: int) -> np.ndarray:
    """Predicted growth of :func:`coordinate_ratio` for diagonal models, n = 0..horizon.

    A single-coordinate solution has |u_k|^2 of order 1/a_k, so by
    Stolz-Cesaro the ratio of cumulative norms behaves like
    sum_{k<=n} 1/|a_k^(i)| / sum_{k<=n} 1/|a_k^(j)|.
    """
    a, _ = model.blocks(0, horizon + 1)
    return np.cumsum(1.0 / np.abs(a[:, i, i])) / np.cumsum(1.0 / np.abs(a[:, j, j]))


def coordinate_increment_rate(model: JacobiModel, lam: float, horizon: int, i: int, j: int,
                              ) -> tuple[np.ndarray, np.ndarray, float]:
    """Dyadic-window ratios sum |P_k e_i|^2 / sum |P_k e_j|^2 over [2^w, 2^{w+1}) and their
    fitted power-law exponent in n (windows from 16 on, so start-up is skipped)."""
    s = polynomials(model, horizon, lam)
    P = s.P[1:]
    u = np.linalg.norm(P[:, :, i], axis=1) ** 2
    v = np.linalg.norm(P[:, :, j], axis=1) ** 2
    ws = np.arange(4, int(np.log2(horizon + 1)))
    starts = 2.0 ** ws
    ratios = np.array([u[2 ** w:2 ** (w + 1)].sum() / v[2 ** w:2 ** (w + 1)].sum() for w in ws])
    slope = float(np.polyfit(np.log(starts), np.log(ratios), 1)[0]) if len(ws) >= 2 else float("nan")
    return starts, ratios, slope


def carleman_check(model: JacobiModel, horizon: int) -> ConditionReport:
    """Carleman diagnostic wrapped as a report (statistic: rho_n)."""
    rep = carleman(model, horizon)
    n = np.arange(1, horizon + 1)
    verdict = {"yes": SATISFIED, "no": VIOLATED}.get(rep.diverging, INCONCLUSIVE)
    return ConditionReport("Carleman", float("nan"), horizon, n, rep.rho, verdict, [],
                           None, {"diverging": rep.diverging, **rep.growth_fit})
