"""Identity suite run by ``bjs verify``.

Each check returns a :class:`CheckResult`; the suite passes when all do.
Random spectral points are drawn from a seeded generator so runs repeat.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matspec
from .barrier import sandwich_bounds
from .errors import GrowthOverflow
from .model import JacobiModel
from .recurrence import (inverse_products, liouville_ostrogradsky, polynomials, transfer_inverse,
                         transfer_products)
from .weyl import truncated_weyl, variation_operator

IDENTITY_TOL = 1e-8
SANDWICH_SLACK = 1e-10
VARIATION_TOL = 1e-7
HERGLOTZ_FLOOR = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: dict = field(default_factory=dict)


def _points(rng, count: int, im_range=(0.1, 1.5)) -> np.ndarray:
    re = rng.uniform(-2.0, 2.0, count)
    im = rng.uniform(*im_range, count)
    return re + 1j * im


def check_liouville(model, K, rng, count=5) -> CheckResult:
    worst, skipped = 0.0, 0
    for z in _points(rng, count):
        try:
            worst = max(worst, *liouville_ostrogradsky(model, z, K))
        except GrowthOverflow:
            skipped += 1
    return CheckResult("liouville_ostrogradsky", worst < IDENTITY_TOL, worst, IDENTITY_TOL,
                       {"K": K, "skipped": skipped})


def check_inverse(model, K, rng, count=3) -> CheckResult:
    """Closed-form inverse of R_n(z) against the product of stepwise inverses, n = 1..K."""
    worst, skipped = 0.0, 0
    for z in _points(rng, count):
        try:
            Rc = transfer_products(model, K, np.conj(z))
        except GrowthOverflow:
            skipped += 1
            continue
        direct_all = inverse_products(model, K, z)
        for n in range(1, K + 1):
            inv = transfer_inverse(model, n, z, Rc[n])
            direct = direct_all[n]
            err = np.linalg.norm(inv - direct, 2) / np.linalg.norm(direct, 2)
            worst = max(worst, float(err))
    return CheckResult("transfer_inverse", worst < IDENTITY_TOL, worst, IDENTITY_TOL,
                       {"K": K, "skipped": skipped})


def check_layout(model, K, rng, count=3) -> CheckResult:
    """R_n = [[Q_{n-1}, P_{n-1}], [Q_n, P_n]] for n = 0..K."""
    worst, skipped = 0.0, 0
    for z in _points(rng, count):
        try:
            R = transfer_products(model, K, z)
        except GrowthOverflow:
            skipped += 1
            continue
        s = polynomials(model, K, z)
        built = np.block([[s.Q[:-1], s.P[:-1]], [s.Q[1:], s.P[1:]]])
        err = matspec.op_norm(R - built) / matspec.op_norm(R)
        worst = max(worst, float(np.max(err)))
    return CheckResult("transfer_layout", worst < IDENTITY_TOL, worst, IDENTITY_TOL,
                       {"K": K, "skipped": skipped})


def check_sandwich(model, K, rng, count=20) -> CheckResult:
    d = model.d
    violations, checked = 0, 0
    worst = 0.0
    for _ in range(count):
        lam = float(rng.uniform(-1.5, 1.5))
        t = float(rng.uniform(1.0, K))
        if rng.random() < 0.5:
            init = tuple(rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(2))
        else:
            init = tuple(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
                         for _ in range(2))
        try:
            lo, val, hi = sandwich_bounds(model, lam, t, init)
        except GrowthOverflow:
            continue
        checked += 1
        excess = max(lo - val, val - hi) / max(val, 1e-300)
        worst = max(worst, excess)
        violations += excess > SANDWICH_SLACK
    return CheckResult("sandwich_bounds", violations == 0, worst, SANDWICH_SLACK,
                       {"checked": checked, "violations": violations})


def check_variation(model, K, rng) -> CheckResult:
    lam = float(rng.uniform(-1.0, 1.0))
    rep = variation_operator(model, lam, 1.0, max(K, 4))
    ok = rep["residual"] < VARIATION_TOL and rep["difference_ok"] and rep["bound_ratio"] <= 1.0
    return CheckResult("variation_identity", bool(ok), rep["residual"], VARIATION_TOL,
                       {"lambda": lam, "bound_ratio": rep["bound_ratio"],
                        "difference_ok": rep["difference_ok"]})


def check_herglotz(model, rng, count=5, ceiling=1 << 16) -> CheckResult:
    """Im W >= 0 and W(conj z) = W(z)^*; both hold for every truncation, so the
    truncation is capped and convergence is only reported."""
    worst_pos, worst_sym, converged = 0.0, 0.0, 0
    for z in _points(rng, count, (0.05, 2.0)):
        up = truncated_weyl(model, z, ceiling=ceiling)
        down = truncated_weyl(model, np.conj(z), ceiling=ceiling)
        converged += up.converged
        scale = float(matspec.op_norm(up.W))
        worst_pos = max(worst_pos, -float(up.im_eigs[0]) / scale)
        worst_sym = max(worst_sym, float(matspec.op_norm(down.W - matspec.adjoint(up.W))) / scale)
    worst = max(worst_pos, worst_sym)
    return CheckResult("herglotz", worst < HERGLOTZ_FLOOR, worst, HERGLOTZ_FLOOR,
                       {"negativity": worst_pos, "conjugate_asymmetry": worst_sym,
                        "converged": converged, "points": count})


def run_suite(model: JacobiModel, horizon: int = 50, seed: int = 0x5EED) -> list[CheckResult]:
    """All identity checks with K = horizon recurrence steps."""
    rng = np.random.default_rng(seed)
    K = int(horizon)
    return [
        check_liouville(model, K, rng),
        check_inverse(model, K, rng),
        check_layout(model, K, rng),
        check_sandwich(model, K, rng),
        check_variation(model, K, rng),
        check_herglotz(model, rng),
    ]
