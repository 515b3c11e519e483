import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import barrier
from blockjacobi.errors import GrowthOverflow
from blockjacobi.model import free, laguerre, power_diagonal
from blockjacobi.recurrence import polynomials
from conftest import models


def test_free_transfer_barrier_is_eight_at_zero():
    vals = barrier.transfer_barrier(free(), 0.0, np.array([1, 2, 3.5, 10, 100]))
    assert np.allclose(vals, 8.0)


def test_free_minimal_barrier_at_zero():
    # odd t: both solutions carry equal weight; even t: one more nonzero term for P
    vals = barrier.vector_barrier(free(), 0.0, np.array([1, 2, 3, 7, 7.5]))
    assert np.allclose(vals, [1, 2, 1, 1, 1.125])


def test_transfer_barrier_overflow():
    with pytest.raises(GrowthOverflow):
        barrier.transfer_barrier(free(), 3.0, 500)


def test_profile_marks_overflow_with_nan():
    prof = barrier.transfer_profile(free(), [0.0, 3.0], np.arange(1, 600))
    assert np.all(np.isfinite(prof.values[0]))
    assert np.isnan(prof.values[1, -1]) and np.isfinite(prof.values[1, 0])
    assert prof.liminf_estimate[0] == pytest.approx(8.0)


def _angle_sweep(model, lam, t, m=2001):
    """Brute-force extremes of ||u||^2_[0,t] over unit initial data (cos a, e^{ib} sin a)."""
    K = int(np.floor(t)) + 1
    s = polynomials(model, K, lam)
    p, q = s.P[1:, 0, 0], s.Q[1:, 0, 0]
    a = np.linspace(0, np.pi, m)[:, None]
    b = np.linspace(0, 2 * np.pi, 41)[None, :]
    vals = []
    for bb in b[0]:
        u = np.cos(a) * q[None, :] + np.exp(1j * bb) * np.sin(a) * p[None, :]
        w = np.abs(u) ** 2
        fl = int(np.floor(t))
        vals.append(w[:, :fl + 1].sum(axis=1) + (t - fl) * w[:, fl + 1])
    vals = np.array(vals)
    return vals.max() / vals.min()


@pytest.mark.parametrize("lam,t", [(1.0, 5.0), (2.5, 3.7), (0.3, 12.25)])
def test_minimal_barrier_matches_angle_sweep(lam, t):
    m = laguerre(0.0)
    exact = barrier.minimal_barrier(m, lam, t).value
    assert exact == pytest.approx(_angle_sweep(m, lam, t), rel=1e-4)


def test_matrix_pairs_exceed_vector_pairs():
    m = power_diagonal([1.0, 0.5])
    res = barrier.minimal_barrier(m, 0.3, 5.5)
    vec = barrier.vector_barrier(m, 0.3, 5.5)
    assert not res.exact
    assert res.value >= vec
    assert res.value <= barrier.transfer_barrier(m, 0.3, 5.5)


def test_minimal_barrier_is_deterministic():
    m = power_diagonal([1.0, 0.5])
    assert barrier.minimal_barrier(m, 0.2, 3.0).value == barrier.minimal_barrier(m, 0.2, 3.0).value


def test_budget_exhausted():
    from blockjacobi.errors import BudgetExhausted
    with pytest.raises(BudgetExhausted):
        barrier.minimal_barrier(power_diagonal([1.0, 0.5]), 0.2, 3.0, max_evaluations=3000)


@settings(max_examples=20, deadline=None)
@given(models(), st.floats(-1.5, 1.5), st.floats(1.0, 30.0))
def test_minimal_below_transfer(m, lam, t):
    try:
        tr = barrier.transfer_barrier(m, lam, t)
    except GrowthOverflow:
        return
    assert barrier.vector_barrier(m, lam, t) <= tr * (1 + 1e-9)


@settings(max_examples=20, deadline=None)
@given(models(), st.floats(-1.5, 1.5), st.floats(1.0, 30.0), st.integers(0, 2 ** 32 - 1),
       st.booleans())
def test_sandwich_bounds_hold(m, lam, t, seed, vector):
    rng = np.random.default_rng(seed)
    shape = (m.d,) if vector else (m.d, m.d)
    init = tuple(rng.standard_normal(shape) + 1j * rng.standard_normal(shape) for _ in range(2))
    try:
        lo, val, hi = barrier.sandwich_bounds(m, lam, t, init)
    except GrowthOverflow:
        return
    assert lo <= val * (1 + 1e-10)
    assert val <= hi * (1 + 1e-10)


def test_minimal_barrier_resolves_ill_conditioned_gram():
    # far outside the band the Gram matrix is singular to working precision
    m = free()
    t_grid = np.array([30.0, 40.0, 49.5])
    tr = barrier.transfer_barrier(m, -2.5, t_grid)
    vals = np.array([barrier.minimal_barrier(m, -2.5, t).value for t in t_grid])
    assert np.all(np.isfinite(vals)) and np.all(vals <= tr)
    assert np.all(np.diff(vals) > 0)
