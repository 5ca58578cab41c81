import math

import numpy as np
import pytest
from scipy import stats

from levyruin import rng as rngmod
from levyruin.errors import DegenerateModel
from levyruin.levy_model import LevyTriplet, ModelPair, evaluate_H, gbm_returns
from levyruin.path_sim import (
    PathConfig, cauchy_euler_errors, log_price_increments, mq_ensemble, sample_MQ, sample_path,
    simulate_interval, v_ensemble,
)

# [DERIVED] Example 1: E Y_1 = -E P_1 * int_0^1 exp(H(1) s) ds with E P_1 = 0.9, H(1) = -1/2
EX1_MEAN_Y1 = -0.70824481251725983751


def test_path_is_deterministic_and_starts_at_zero(ex2):
    cfg = PathConfig(horizon=2.0, grid_step=2**-6, seed=5)
    a, b = sample_path(ex2, cfg), sample_path(ex2, cfg)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.times[0] == 0 and a.v[0] == 0 and a.y[0] == 0
    assert np.all(np.diff(a.times) > 0)
    assert a.times[-1] == pytest.approx(2.0)
    np.testing.assert_allclose(a.reserve(3.0)[0], 3.0)


def test_path_csv_columns(tmp_path, ex1):
    p = tmp_path / "path.csv"
    sample_path(ex1, PathConfig(horizon=0.25, grid_step=2**-5)).to_csv(p, u=1.0)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,V,P,Y,price,X_u"
    assert len(lines) > 8


def test_degenerate_model_rejected():
    model = ModelPair(LevyTriplet(0.1, 0.0), LevyTriplet(-1.0, 0.0))
    with pytest.raises(DegenerateModel):
        sample_MQ(model, 0, 0)


def test_log_price_moment_generating(ex2):
    v = v_ensemble(ex2, 200_000, seed=3)
    for q in (0.5, 1.0):
        w = np.exp(-q * v)
        z = (w.mean() - math.exp(evaluate_H(ex2, q))) / (w.std() / math.sqrt(v.size))
        assert abs(z) < 4


def test_q_mean_matches_closed_form(ex1):
    ens = mq_ensemble(ex1, 200_000, seed=11)
    se = ens.q.std() / math.sqrt(ens.q.size)
    assert abs(ens.q.mean() - EX1_MEAN_Y1) < 4 * se
    assert abs(ens.m.mean() - math.exp(-0.5)) < 4 * ens.m.std() / math.sqrt(ens.m.size)


def test_drift_only_business_matches_dufresne():
    # [DERIVED] V = W_t + t, P = -t: Y_1 -> int exp(-V) dt on [0, 1]; over a long
    # horizon Y is 2 / Gamma(2) (Dufresne), an inverse gamma law with shape 2 and scale 2
    model = ModelPair(gbm_returns(1.5, 1.0), LevyTriplet(-1.0, 0.0))
    q = []
    for k in range(10):
        gv, gp = rngmod.block_streams(17, k)
        q.append(simulate_interval(model, 2000, 40.0, 40 * 32, gv, gp).q)
    res = stats.kstest(np.concatenate(q), stats.invgamma(2.0, scale=2.0).cdf)
    assert res.pvalue > 0.01


def test_q_max_dominates_end_value(ex2):
    ens = mq_ensemble(ex2, 5000, seed=2, track_max=True)
    assert np.all(ens.q_max >= np.maximum(ens.q, 0.0) - 1e-12)


def test_q_max_sees_pre_jump_peak():
    # P has only a premium and no drift in R noise: peak is at the jump epoch, just before
    # a negative P jump pushes Y back down
    from levyruin.jumps import DiscreteAtoms

    model = ModelPair(gbm_returns(0.5, 1e-12), LevyTriplet.from_compound_drift(-1.0, 0.0, 5.0,
                                                                               DiscreteAtoms([(1.0, 1.0)])))
    gv, gp = rngmod.block_streams(1, 0)
    d = simulate_interval(model, 200, 1.0, 4, gv, gp, track_max=True, record=True)
    assert np.all(d.q_max >= np.nanmax(d.y, axis=1) - 1e-9)


def test_block_layout_is_worker_invariant(ex2):
    a = mq_ensemble(ex2, 3000, seed=9, steps=1024, workers=1)
    b = mq_ensemble(ex2, 3000, seed=9, steps=1024, workers=2)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.m, b.m)


def test_single_draw_is_reproducible(ex1):
    assert sample_MQ(ex1, 4, 7, steps=64) == sample_MQ(ex1, 4, 7, steps=64)
    assert sample_MQ(ex1, 4, 7, steps=64) != sample_MQ(ex1, 4, 8, steps=64)


def test_log_price_increment_variance():
    model = ModelPair(gbm_returns(1.0, 0.64), LevyTriplet(-1.0, 0.0))
    v = log_price_increments(model, np.random.default_rng(0), 100_000, horizon=2.0)
    assert v.mean() == pytest.approx(2 * (1.0 - 0.32), abs=0.02)
    assert v.var() == pytest.approx(2 * 0.64, rel=0.02)


def test_euler_converges_at_half_order(ex1):
    # strong order 1/2: error ratio per halving tends to 2^-1/2
    err = cauchy_euler_errors(ex1, 1.0, [6, 8, 10], seed=5, n_paths=600)
    m = err.mean(axis=0)
    per_halving = (m[-1] / m[0]) ** (1 / 4)
    assert 0.62 < per_halving < 0.78
