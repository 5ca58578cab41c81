import math

import numpy as np
import pytest

from levyruin.errors import ArithmeticBandUnavailable, GridTooCoarse
from levyruin.jumps import DiscreteAtoms
from levyruin.path_sim import mq_ensemble
from levyruin.renewal import (
    RenewalGrid, arithmetic_band, estimate_goldie_constant, goldie_terms, lattice_renewal_check,
    renewal_residual, riemann_bounds, smooth, supremum_tail, tilted_log_mean,
)


def test_smooth_indicator_exact():
    # [DERIVED] int_{-inf}^x e^{-(x-y)} 1{y >= 0} dy = 1 - e^{-x}
    g = RenewalGrid.from_function(lambda x: (x >= 0).astype(float), -5.0, 5.0, 0.01)
    out = smooth(g, "step", check_mass=False)
    x = g.x_values
    np.testing.assert_allclose(out.values, np.where(x > 0, -np.expm1(-np.maximum(x, 0)), 0.0), atol=1e-12)


def test_smooth_linear_second_order():
    # [DERIVED] psi(y) = y e^{-y} 1{y >= 0} smooths to x^2 e^{-x} / 2
    f = lambda x: np.where(x >= 0, x * np.exp(-x), 0.0)
    exact = lambda x: np.where(x >= 0, 0.5 * x * x * np.exp(-x), 0.0)
    errs = []
    for d in (0.1, 0.05):
        g = RenewalGrid.from_function(f, -1.0, 40.0, d)
        errs.append(np.max(np.abs(smooth(g).values - exact(g.x_values))))
    # second order: error ratio 1/4 per halving
    assert errs[1] < 0.3 * errs[0] and errs[1] < 2e-4


def test_smooth_rejects_truncated_left_tail():
    g = RenewalGrid.from_function(lambda x: np.exp(-np.abs(x)), -1.0, 20.0, 0.01)
    with pytest.raises(GridTooCoarse):
        smooth(g)


def test_grid_csv_roundtrip(tmp_path):
    g = RenewalGrid.from_function(np.sin, 0.0, 1.0, 0.125)
    g.to_csv(tmp_path / "g.csv")
    h = RenewalGrid.from_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(g.values, h.values)


def test_riemann_bounds_and_smoothing():
    psi = RenewalGrid.from_function(lambda x: np.exp(-np.abs(x)), -30.0, 30.0, 0.01)
    sm = smooth(psi)
    for delta in (0.1, 0.5):
        rb = riemann_bounds(sm, delta)
        assert rb.lower <= rb.integral <= rb.upper
        assert rb.smoothing_bounds_hold()
    assert sm.integral() == pytest.approx(2.0, rel=1e-3)


def test_lattice_renewal_deterministic_exact():
    hat = lambda x: max(0.0, 1 - abs(x))
    rep = lattice_renewal_check(DiscreteAtoms([(0.5, 1.0)]), hat, 0.1, 200, support=(-1, 1))
    # limit (d / m) sum_j F(x + j d) with d = m = 0.5
    assert rep.limit == pytest.approx(hat(0.1) + hat(-0.4) + hat(0.6) + hat(-0.9))
    assert rep.max_deviation < 1e-12


def test_lattice_renewal_two_atoms():
    hat = lambda x: max(0.0, 1 - abs(x))
    rep = lattice_renewal_check(DiscreteAtoms([(1.0, 0.5), (3.0, 0.5)]), hat, 0.0, 300, n_walks=20_000,
                                seed=2, support=(-1, 1))
    assert rep.limit == pytest.approx(0.5)
    assert rep.max_deviation < 0.03


def test_arithmetic_band_needs_fine_grid(lattice):
    mq = mq_ensemble(lattice, 2000, seed=1)
    y = np.ones(2000)
    with pytest.raises(ArithmeticBandUnavailable):
        arithmetic_band(mq.q, mq.m, y, math.log(4), 1.0, 1.0, step=0.5)


def test_goldie_terms_vanish_without_q():
    y = np.array([-1.0, 0.5, 2.0])
    m = np.array([1.0, 2.0, 0.5])
    np.testing.assert_array_equal(goldie_terms(np.zeros(3), m, y, 1.7), 0.0)


def test_tilted_mean_two_ways(ex1):
    # [DERIVED] tilted GBM at beta = 2 has E~ log M = 1
    (imp, imp_se), (direct, direct_se) = tilted_log_mean(ex1, 2.0, 200_000, seed=4)
    assert abs(direct - 1.0) < 4 * direct_se
    assert abs(imp - 1.0) < 4 * imp_se


def test_goldie_estimate_positive(ex2):
    est = estimate_goldie_constant(ex2, n=20_000, seed=3)
    assert est.c_plus_hat > 0 and est.se > 0
    assert est.band is None


def test_goldie_lattice_band(lattice):
    est = estimate_goldie_constant(lattice, n=20_000, seed=3)
    lo, hi = est.band
    assert 0 < lo <= hi


def test_supremum_tail_obeys_lundberg(ex1):
    # P(sup_j -V_j > x) <= exp(-beta x), so P(Z* > u) <= u^-beta
    rows = supremum_tail(ex1, [1.5, 3.0, 10.0], 50_000, seed=2)
    for u, p, se in rows:
        assert p <= u**-2.0 + 3 * se


def test_renewal_residual_small(ex2):
    beta = 1.8963402076891575
    res = renewal_residual(ex2, beta, np.linspace(-1.0, 1.5, 6), 40_000, seed=5)
    assert res.max_z < 5
