"""Property-based checks of the structural invariants."""

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from levyruin.errors import NoPositiveRoot
from levyruin.fixed_point import ArRecursion, ks_critical
from levyruin.jumps import DiscreteAtoms, ExponentialPositive, ShiftedLognormal
from levyruin.levy_model import LevyTriplet, ModelPair, evaluate_H, find_root_beta, gbm_returns
from levyruin.path_sim import mq_ensemble
from levyruin.renewal import RenewalGrid, riemann_bounds, smooth
from levyruin.ruin import band_deviation, exceedance, fit_tail

pos = st.floats(0.05, 3.0)
BUSINESS = LevyTriplet(-1.0, 0.0)


@st.composite
def jump_models(draw):
    s2 = draw(st.floats(0.05, 2.0))
    a = draw(st.floats(0.0, 3.0))
    lam = draw(st.floats(0.0, 2.0))
    kind = draw(st.sampled_from(["exp", "lognormal", "atoms"]))
    if kind == "exp":
        law = ExponentialPositive(draw(pos))
    elif kind == "lognormal":
        law = ShiftedLognormal(draw(st.floats(-1.0, 0.5)), draw(st.floats(0.1, 1.0)))
    else:
        v = draw(st.floats(-0.9, 2.0))
        assume(abs(v) > 1e-3)
        law = DiscreteAtoms([(v, 1.0)])
    r = LevyTriplet.from_compound_drift(a, s2, lam, law) if lam > 0 else gbm_returns(a, s2)
    return ModelPair(r, BUSINESS)


@given(jump_models(), st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.floats(0.0, 1.0))
def test_cumulant_convex(model, q1, q2, t):
    h1, h2 = evaluate_H(model, q1), evaluate_H(model, q2)
    assume(math.isfinite(h1) and math.isfinite(h2) and abs(h1) < 1e6 and abs(h2) < 1e6)
    mid = evaluate_H(model, t * q1 + (1 - t) * q2)
    assert mid <= t * h1 + (1 - t) * h2 + 1e-9 * (1 + abs(h1) + abs(h2))


@given(jump_models())
def test_root_is_unique_sign_change(model):
    try:
        beta = find_root_beta(model).beta
    except NoPositiveRoot:
        return
    assert abs(evaluate_H(model, beta)) < 1e-8
    for f in (0.25, 0.5, 0.9):
        assert evaluate_H(model, f * beta) < 0
    h = evaluate_H(model, 1.5 * beta)
    assert not h < 0


@given(st.floats(0.05, 2.0), st.floats(1.05, 6.0))
def test_gbm_root_closed_form(s2, k):
    a = s2 / 2 * k
    beta = find_root_beta(ModelPair(gbm_returns(a, s2), BUSINESS)).beta
    assert abs(beta - (2 * a / s2 - 1)) <= 1e-10 * max(1.0, beta)


@given(st.lists(st.floats(-50, 50), min_size=5, max_size=60),
       st.lists(st.floats(-60, 60), min_size=2, max_size=6))
def test_exceedance_monotone(values, us):
    g = [p.g_bar for p in exceedance(np.array(values), sorted(us))] if max(us) < max(values) else None
    if g is not None:
        assert all(a >= b for a, b in zip(g, g[1:]))
        assert all(0 <= x <= 1 for x in g)


@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=20))
def test_band_deviation_nonnegative_and_scale_free(vals):
    v = np.array(vals)
    d = band_deviation(v)
    assert d >= 0
    assert math.isclose(d, band_deviation(3.7 * v), rel_tol=1e-9, abs_tol=1e-12)


@given(st.floats(0.5, 3.0), st.floats(0.1, 5.0))
def test_fit_tail_exact_power_law(beta, c):
    u = np.geomspace(0.5, 50, 10)
    fit = fit_tail(pairs=list(zip(u, c * u**-beta)))
    assert math.isclose(fit.beta_hat, beta, rel_tol=1e-9)
    assert math.isclose(fit.c_hat, c, rel_tol=1e-9)


@given(st.floats(0.2, 3.0), st.floats(-2.0, 2.0), st.sampled_from([0.02, 0.05]))
def test_smoothing_preserves_mass_and_sign(width, centre, step):
    f = lambda x: np.exp(-0.5 * ((x - centre) / width) ** 2)
    g = RenewalGrid.from_function(f, centre - 12 * width - 1, centre + 40, step)
    sm = smooth(g)  # raises if the mass check fails
    assert np.all(sm.values >= -1e-15)
    rb = riemann_bounds(sm, 10 * step)
    assert rb.lower <= rb.integral <= rb.upper
    assert rb.smoothing_bounds_hold()


@given(st.lists(st.tuples(st.floats(0.1, 3.0), st.floats(-2, 2)), min_size=1, max_size=12), st.floats(-5, 5))
def test_ar_recursion_linear_in_start(coefs, x0):
    a = np.array([c[0] for c in coefs])
    b = np.array([c[1] for c in coefs])
    x1 = ArRecursion(a, b, x0).trajectory()
    x2 = ArRecursion(a, b, x0 + 1.0).trajectory()
    np.testing.assert_allclose(x2 - x1, np.concatenate([[1.0], np.cumprod(a)]), rtol=1e-9, atol=1e-9)


@given(st.integers(100, 10**6), st.integers(100, 10**6))
def test_ks_critical_decreases(n, m):
    assert ks_critical(n, m) > ks_critical(2 * n, 2 * m)


@settings(max_examples=5)
@given(st.integers(0, 2**32), st.integers(1, 3))
def test_ensemble_deterministic_and_worker_invariant(seed, workers):
    model = ModelPair(gbm_returns(1.0, 0.5), LevyTriplet.from_compound_drift(-0.2, 0.0, 1.0, ExponentialPositive(1.0)))
    # 1024 steps give 512-replicate blocks, so 1300 draws span three blocks
    a = mq_ensemble(model, 1300, seed, steps=1024, workers=1)
    b = mq_ensemble(model, 1300, seed, steps=1024, workers=workers)
    np.testing.assert_array_equal(a.q, b.q)
    assert np.all(a.m > 0)
