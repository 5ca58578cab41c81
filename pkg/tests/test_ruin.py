import json
import math

import numpy as np
import pytest

from levyruin.errors import InsufficientTail, MethodPreconditionViolated
from levyruin.fixed_point import y_infinity_ensemble
from levyruin.jumps import ParetoPositive
from levyruin.levy_model import LevyTriplet, ModelPair, gbm_returns
from levyruin.ruin import (
    PsiParams, band_deviation, classify_regime, crossing_sups, estimate_psi, estimate_psi_table, exceedance,
    fit_tail, paulsen_applicable, ruin_report,
)


@pytest.fixture(scope="module")
def ex2_ensemble(ex2):
    return y_infinity_ensemble(ex2, 20_000, seed=12)


def test_exceedance_counts():
    pts = exceedance(np.arange(10.0), [-1.0, 4.0, 8.5])
    assert [p.g_bar for p in pts] == [1.0, 0.5, 0.1]
    assert pts[1].se == pytest.approx(math.sqrt(0.25 / 10))


def test_exceedance_warns_on_sparse_tail():
    with pytest.warns(RuntimeWarning):
        exceedance(np.arange(10.0), [100.0])


def test_fit_tail_recovers_pareto_index():
    # [DERIVED] Pareto(1.5) with x_min = 1: G(u) = u^-1.5, so beta = 1.5 and C = 1
    x = np.random.default_rng(0).pareto(1.5, 400_000) + 1.0
    fit = fit_tail(x, seed=1)
    assert abs(fit.beta_hat - 1.5) < max(2 * fit.beta_ci_halfwidth, 0.03)
    assert fit.c_hat == pytest.approx(1.0, rel=0.1)
    assert band_deviation(fit.compensated(1.5)) < 0.1


def test_fit_tail_pairs_exact():
    u = np.geomspace(1, 100, 8)
    fit = fit_tail(pairs=list(zip(u, 3.0 * u**-2.5)))
    assert fit.beta_hat == pytest.approx(2.5)
    assert fit.c_hat == pytest.approx(3.0)
    assert fit.r2 == pytest.approx(1.0)


def test_fit_tail_needs_samples():
    with pytest.raises(InsufficientTail):
        fit_tail(np.ones(100))
    with pytest.raises(InsufficientTail):
        fit_tail(-np.abs(np.random.default_rng(0).normal(size=20_000)) - 1)


def test_band_deviation():
    assert band_deviation(np.full(5, 2.0)) == 0.0
    assert band_deviation(np.array([1.0, 2.0, 3.0])) == pytest.approx(0.5)


def test_regimes(ex1, certain):
    # [reference] Example 1 has beta = 2a/sigma^2 - 1 = 2
    assert classify_regime(ex1).to_json() == {"regime": "PowerTail", "beta": 2.0}
    assert classify_regime(certain).name == "CertainRuin"


def test_heavy_claims_are_inconclusive():
    model = ModelPair(gbm_returns(1.5, 1.0),
                      LevyTriplet.from_compound_drift(-0.1, 0.0, 1.0, ParetoPositive(1.5, 1.0)))
    reg = classify_regime(model)
    assert reg.name == "Inconclusive" and reg.beta == pytest.approx(2.0)


def test_reduction_needs_spectrally_positive_business(certain):
    assert paulsen_applicable(certain) is not None
    with pytest.raises(MethodPreconditionViolated):
        estimate_psi(certain, 1.0, "paulsen_reduction", PsiParams(n_replicates=100))


def test_reduction_monotone_and_bounded(ex2, ex2_ensemble):
    rows = estimate_psi_table(ex2, [0.5, 2.0, 5.0], "paulsen_reduction", ensemble=ex2_ensemble)
    psi = [r.psi_hat for r in rows]
    assert all(0 <= p <= 1 for p in psi) and psi == sorted(psi, reverse=True)
    b = estimate_psi_table(ex2, [0.5, 2.0], "bounds", ensemble=ex2_ensemble)
    assert all(r.psi_hat <= r.psi_upper for r in b)
    # the reduction estimate sits between the bounds
    for lo, mid in zip(b, rows):
        assert lo.psi_hat <= mid.psi_hat <= lo.psi_upper


def test_crossing_sup_grows_with_horizon(ex2):
    a = crossing_sups(ex2, 2000, 4, 16, seed=1)
    b = crossing_sups(ex2, 2000, 8, 16, seed=1)
    assert np.all(b >= a)


def test_crossing_agrees_with_reduction(ex2):
    prm = PsiParams(n_replicates=20_000, seed=2)
    red = estimate_psi(ex2, 2.0, "paulsen_reduction", prm)
    crs = estimate_psi(ex2, 2.0, "crossing_mc", prm)
    assert abs(red.psi_hat - crs.psi_hat) < 4 * math.hypot(red.se, crs.se)
    assert crs.horizon >= prm.horizon


def test_report_is_json(ex1, ex2, ex2_ensemble):
    est = estimate_psi(ex2, 2.0, ensemble=ex2_ensemble)
    js = est.to_json()
    assert "horizon" not in js and js["method"] == "paulsen_reduction"
    rep = ruin_report(est, None, classify_regime(ex1))
    assert json.loads(json.dumps(rep))["regime"] == "PowerTail"
