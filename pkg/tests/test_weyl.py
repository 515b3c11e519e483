import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi import matspec, weyl
from blockjacobi.errors import HorizonExceeded, HypothesisUnmet, NonConverged
from blockjacobi.model import explicit, free, laguerre, power_diagonal
from blockjacobi.recurrence import polynomials, recurrence_residual
from conftest import upper_half


def semicircle_stieltjes(z):
    """int dmu(t)/(t - z) for the semicircle law on [-2, 2]: the root of
    w^2 + z w + 1 = 0 inside the unit disc."""
    r = np.roots([1.0, z, 1.0])
    return r[np.argmin(np.abs(r))]


def test_free_weyl_at_2i():
    s = weyl.truncated_weyl(free(), 2j)
    assert s.converged
    assert s.W[0, 0] == pytest.approx(1j * (np.sqrt(2) - 1), abs=1e-10)


@pytest.mark.parametrize("z", [0.1j, 1 + 0.3j, -1.5 + 0.05j, 3 + 1j])
def test_free_weyl_matches_semicircle(z):
    s = weyl.truncated_weyl(free(), z)
    assert s.W[0, 0] == pytest.approx(semicircle_stieltjes(z), rel=1e-7)


def test_block_free_weyl_is_scalar_times_identity():
    z = 0.4 + 0.2j
    W = weyl.truncated_weyl(free(3), z).W
    assert np.allclose(W, semicircle_stieltjes(z) * np.eye(3), rtol=1e-7)


def test_truncation_preconditions():
    with pytest.raises(ValueError):
        weyl.truncated_weyl(free(), 1.0)
    with pytest.raises(ValueError):
        weyl.truncated_weyl(free(2), 1j, N=8)


def test_non_converged_flag_and_strict():
    m = power_diagonal([1.0, 0.5])
    s = weyl.truncated_weyl(m, 0.3 + 0.05j, ceiling=1 << 12)
    assert not s.converged and s.convergence_gap > 0
    with pytest.raises(NonConverged):
        weyl.truncated_weyl(m, 0.3 + 0.05j, ceiling=1 << 12, strict=True)


@settings(max_examples=50, deadline=None)
@given(upper_half)
def test_herglotz_laguerre(z):
    s = weyl.truncated_weyl(laguerre(0.5), z)
    assert s.im_eigs[0] >= -1e-8 * matspec.op_norm(s.W)
    down = weyl.truncated_weyl(laguerre(0.5), np.conj(z))
    assert np.allclose(down.W, matspec.adjoint(s.W), rtol=1e-8, atol=1e-12)


def test_l2_solution_decays_geometrically():
    z = 1 + 1j
    prof = weyl.l2_decay_profile(free(), z, 60)
    assert prof["trusted_length"] >= 20
    assert prof["ratio"] == pytest.approx(abs(semicircle_stieltjes(z)), rel=1e-3)
    n = np.arange(61)
    assert np.allclose(prof["stable"], abs(semicircle_stieltjes(z)) ** n * abs(semicircle_stieltjes(z)),
                       rtol=1e-6)


@pytest.mark.parametrize("model", [free(), laguerre(0.5), free(2)])
def test_l2_tail_small(model):
    assert weyl.l2_tail_ratio(model, 0.3 + 0.5j) <= 1e-4


def test_weyl_solution_solves_recurrence():
    m = laguerre(0.5)
    z = 1.0 + 0.2j
    sample, U = weyl.weyl_solution(m, z, 50)
    assert np.allclose(U[0], np.eye(1)) and np.allclose(U[1], sample.W)
    assert np.max(recurrence_residual(m, U, z)) < 1e-10


# ---------------------------------------------------------------------------
# J-L function


def test_jl_fixed_point_at_one():
    m = laguerre(0.0)
    f1 = weyl.jl_product(m, 1.0, 1.0)
    assert weyl.jl_function(m, 1.0, 1 / (2 * f1)).m == pytest.approx(1.0, abs=1e-10)


def test_jl_value_solves_equation():
    m = laguerre(0.0)
    for eps in (0.3, 0.05, 0.011):
        jl = weyl.jl_function(m, 1.0, eps)
        assert jl.f_at_m == pytest.approx(1 / (2 * eps), rel=1e-8)


def test_jl_monotone_in_eps():
    eps = np.geomspace(0.5, 0.005, 10)
    ms = [weyl.jl_function(laguerre(0.0), 1.0, e).m for e in eps]
    assert np.all(np.diff(ms) > 0)


def test_jl_free_model_scale():
    # |p_k(0)|, |q_k(0)| alternate between 0 and 1, so f(n) ~ n/2 and m ~ 1/eps
    for eps in (0.1, 0.01, 0.002):
        m = weyl.jl_function(free(), 0.0, eps).m
        assert abs(m - 1 / eps) <= 2


def test_jl_horizon_exceeded_carries_value():
    with pytest.raises(HorizonExceeded) as info:
        weyl.jl_function(free(), 0.0, 1e-7)
    assert info.value.details["f_horizon"] > 0


# ---------------------------------------------------------------------------
# variation of constants


def test_apply_L_matches_termwise_sum(rng):
    m = laguerre(0.5)
    s = polynomials(m, 12, 0.8)
    P, Q = s.P[1:], s.Q[1:]
    F = np.zeros((13, 1, 1), complex)
    F[4] = 2.0 - 1j
    LF = weyl.apply_L(P, Q, F)
    for k in range(13):
        expected = sum((Q[k] @ P[j].conj().T - P[k] @ Q[j].conj().T) @ F[j] for j in range(k))
        assert np.allclose(LF[k], expected if k else 0)


def test_variation_identity_large_eps():
    rep = weyl.variation_operator(free(), 0.0, 10.0, 20)
    assert rep["residual"] < 1e-7
    assert rep["difference_ok"]
    assert rep["bound_ratio"] <= 1.0


@pytest.mark.parametrize("model,lam,eps", [(laguerre(0.0), 1.0, 0.1), (free(2), 0.5, 0.2),
                                           (power_diagonal([1.0, 0.5]), 0.5, 0.5)])
def test_variation_identity(model, lam, eps):
    rep = weyl.variation_operator(model, lam, eps, 200)
    assert rep["residual"] < 1e-7
    assert rep["bound_ratio"] <= 1.0
    assert rep["difference_ok"]
    assert rep["seminorm_ratio"] is not None and rep["seminorm_ratio"] <= 1.0


def test_energy_identity():
    rep = weyl.variation_operator(free(), 0.0, 0.1, 600)
    assert rep["energy_error"] < 1e-4
    rep = weyl.variation_operator(laguerre(0.5), 1.0, 0.5, 2000)
    assert rep["energy_error"] < 1e-4


# ---------------------------------------------------------------------------
# bounds and density


def test_theorem_bounds_free():
    rep = weyl.theorem_bounds(free(), 0.0, 0.1)
    assert rep["barrier"] == pytest.approx(8.0)
    assert rep["s_plus"] == pytest.approx(32 + np.sqrt(1023))
    assert rep["s_minus"] == pytest.approx(32 - np.sqrt(1023))
    assert rep["norm_W"] == pytest.approx(abs(semicircle_stieltjes(0.1j)), rel=1e-8)
    assert rep["min_eig_im_W"] >= 1 / 64
    assert rep["im_ok"] and rep["norm_ok"]


@pytest.mark.parametrize("eps", [0.5, 0.1, 0.02])
def test_theorem_bounds_laguerre(eps):
    rep = weyl.theorem_bounds(laguerre(0.0), 1.0, eps)
    assert rep["im_ok"] and rep["norm_ok"]


def test_theorem_hypothesis_unmet():
    with pytest.raises(HypothesisUnmet):
        weyl.theorem_bounds(free(), 0.0, 10.0)


def test_density_free_and_laguerre():
    est = weyl.density_estimate(free(), [0.0])
    assert est.D[0, 0, 0].real == pytest.approx(1 / np.pi, rel=1e-3)
    est = weyl.density_estimate(laguerre(0.0), [1.0, -1.0])
    assert est.D[0, 0, 0].real == pytest.approx(np.exp(-1), rel=2e-3)
    assert abs(est.D[1, 0, 0]) < 1e-3


def test_density_block_rank():
    est = weyl.density_estimate(free(2), [0.0])
    assert np.allclose(est.D[0], np.eye(2) / np.pi, rtol=1e-3)
    assert est.rank[0] == 2
    assert matspec.is_hermitian(est.D[0])


def test_density_flags_point_mass():
    # free tail with B_0 = 3 has an eigenvalue at 3 + 1/3 outside the band
    m = explicit([1.0, 1.0], [3.0, 0.0], tail="constant")
    est = weyl.density_estimate(m, [10 / 3, 0.0])
    assert est.singular_suspect[0]
    assert not est.singular_suspect[1]


def test_density_ladder_validation():
    with pytest.raises(ValueError):
        weyl.density_estimate(free(), [0.0], [0.1, 0.2, 0.05])
    with pytest.raises(ValueError):
        weyl.density_estimate(free(), [0.0], [0.1, 0.05])


@settings(max_examples=10, deadline=None)
@given(st.floats(-1.8, 1.8))
def test_density_is_psd(lam):
    est = weyl.density_estimate(free(2), [lam])
    assert np.linalg.eigvalsh(est.D[0])[0] >= -1e-6
