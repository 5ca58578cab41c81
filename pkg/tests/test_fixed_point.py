import math

import numpy as np
import pytest
from scipy import special, stats

from levyruin.errors import NoContractivePower
from levyruin.fixed_point import (
    ArRecursion, YPathRunner, contractive_power, fixed_point_ks, ks_critical, ladder_time_survival,
    reserve_test_function, run_autoregression, sample_ladder_time, truncation_plan, y_infinity_ensemble,
    y_path_ensemble,
)
from levyruin.levy_model import LevyTriplet, ModelPair, gbm_returns


@pytest.fixture(scope="module")
def dufresne():
    return ModelPair(gbm_returns(1.5, 1.0), LevyTriplet(-1.0, 0.0))


def test_contractive_power_example1(ex1):
    # H(q) = -q + q^2/2 decreases on (0, 1]
    assert contractive_power(ex1) == pytest.approx(1.0)


def test_contractive_power_missing(certain):
    with pytest.raises(NoContractivePower):
        truncation_plan(certain, 1e-4)


def test_truncation_depth_meets_eps(ex1):
    plan = truncation_plan(ex1, 1e-4)
    assert plan.rho == pytest.approx(math.exp(-0.5))
    assert plan.trunc_bound <= 1e-4 < plan.rho ** (plan.depth - 1) * plan.q_moment
    assert plan.displacement(0.01) > plan.displacement(0.1)


def test_perpetuity_matches_dufresne(dufresne):
    # [DERIVED] int_0^inf exp(-(W_t + t)) dt is 2 / Gamma(2): inverse gamma, shape 2, scale 2
    y = y_infinity_ensemble(dufresne, 100_000, eps=1e-5, seed=4).values
    assert stats.kstest(y, stats.invgamma(2.0, scale=2.0).cdf).statistic < ks_critical(100_000, 10**9)


def test_perpetuity_worker_invariant(ex2):
    a = y_infinity_ensemble(ex2, 1500, seed=1, steps=1024, workers=1)
    b = y_infinity_ensemble(ex2, 1500, seed=1, steps=1024, workers=2)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.depth == b.depth


def test_path_runner_agrees_with_series(ex2):
    ens = y_infinity_ensemble(ex2, 3000, seed=6)
    y, sup = y_path_ensemble(ex2, 3000, ens.depth, seed=6)
    np.testing.assert_allclose(y, ens.values, rtol=1e-12, atol=1e-12)
    assert np.all(sup >= np.maximum(y, 0) - 1e-12)


def test_path_runner_is_resumable(ex2):
    a = YPathRunner(ex2, 2000, 3, 0, 16, 1).advance_to(4).advance_to(9)
    b = YPathRunner(ex2, 2000, 3, 0, 16, 1).advance_to(9)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.sup, b.sup)


def test_fixed_point_ks_small(ex1):
    res = fixed_point_ks(ex1, 20_000, seed=8)
    assert res["passed"], res


def test_ar_recursion_closed_form():
    a = np.array([2.0, 0.5, 3.0])
    b = np.array([1.0, -1.0, 0.5])
    x = ArRecursion(a, b, 1.0).trajectory()
    np.testing.assert_allclose(x, [1.0, 3.0, 0.5, 2.0])


def test_autoregression_matches_cauchy_form(ex2):
    res = run_autoregression(ex2, 2.0, 6, seed=1)
    # X_n = exp(V_n) (u - Y_n) rebuilt from the coefficients
    a, b = res.recursion.a_seq, res.recursion.b_seq
    v = np.cumsum(np.log(a))
    q = -b / a
    y = np.cumsum(np.exp(-np.concatenate([[0.0], v[:-1]])) * q)
    np.testing.assert_allclose(res.x[1:], np.exp(v) * (2.0 - y), rtol=1e-10, atol=1e-10)


def test_reserve_test_function():
    np.testing.assert_allclose(reserve_test_function([-2.0, -0.5, 0.0, 3.0]), [1.0, 0.5, 0.0, 0.0])


def test_ladder_sparre_andersen(certain):
    # [DERIVED] symmetric continuous steps: P(T_1 > n) = C(2n, n) / 4^n
    n = 100_000
    surv = ladder_time_survival(certain, n, [1, 2, 5, 20], seed=3)
    for k, (p, se) in surv.items():
        exact = special.comb(2 * k, k, exact=True) / 4**k
        assert abs(p - exact) < 4 * max(se, 1 / n), (k, p, exact)


def test_single_ladder_time(certain):
    t = [sample_ladder_time(certain, 1, i) for i in range(400)]
    assert min(t) >= 1
    assert np.mean(np.array(t) == 1) == pytest.approx(0.5, abs=0.1)
