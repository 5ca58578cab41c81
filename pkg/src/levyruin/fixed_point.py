"""The perpetuity Y_inf = sum_j Z_{j-1} Q_j, the autoregression
X_n = A_n X_{n-1} + B_n and descending ladder times of the log price.

All three are driven by the same unit-interval pairs (M_j, Q_j) produced by
:func:`levyruin.path_sim.simulate_interval`.  Within an ensemble block the
intervals are drawn one after another from the block's own streams, so the
first N terms of a series of depth 2N coincide with the series of depth N.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import rng as rngmod
from .errors import LadderTimeOverflow, NoContractivePower
from .levy_model import ModelPair, effective_domain, evaluate_H
from .parallel import block_layout, map_blocks, map_items
from .path_sim import ENSEMBLE_STEPS, _check, block_size_for, log_price_increments, mq_ensemble, simulate_interval

PILOT_DRAWS = 10_000
PILOT_SEED = 0x5EED
POWER_GRID = 64
LADDER_CAP = 10_000_000
KS_C_1PCT = 1.628  # two-sample Kolmogorov-Smirnov constant at the 1% level


def ks_critical(n: int, m: int, c: float = KS_C_1PCT) -> float:
    return c * math.sqrt((n + m) / (n * m))


# --- contraction -----------------------------------------------------------------


def contractive_power(model: ModelPair) -> float:
    """Argmin of H over a 64-point grid in (0, min(1, q_upper))."""
    _, q_up = effective_domain(model)
    top = min(1.0, q_up)
    k = np.arange(1, POWER_GRID + 1)
    grid = top * k / (POWER_GRID if q_up > 1.0 else POWER_GRID + 1)
    vals = np.array([evaluate_H(model, float(q)) for q in grid])
    i = int(np.argmin(vals))
    if not vals[i] < 0:
        raise NoContractivePower("H >= 0 on the whole grid in (0, 1]")
    return float(grid[i])


@lru_cache(maxsize=64)
def pilot_q_moment(model: ModelPair, p: float, steps: int = ENSEMBLE_STEPS) -> float:
    """E|Q_1|^p from a fixed pilot ensemble, computed once per (model, p)."""
    gv, gp = rngmod.block_streams(PILOT_SEED, 0, 0xF1)
    d = simulate_interval(model, PILOT_DRAWS, 1.0, steps, gv, gp)
    return float(np.mean(np.abs(d.q) ** p))


@dataclass(frozen=True)
class TruncationPlan:
    p: float
    rho: float
    q_moment: float
    depth: int

    @property
    def trunc_bound(self) -> float:
        return self.rho**self.depth * self.q_moment

    def displacement(self, alpha: float) -> float:
        """Markov bound on the tail sum: P(|tail| > delta) <= alpha."""
        total = self.trunc_bound / (1.0 - self.rho)
        return (total / alpha) ** (1.0 / self.p)


def truncation_plan(model: ModelPair, eps: float, p: Optional[float] = None,
                    steps: int = ENSEMBLE_STEPS, depth: Optional[int] = None) -> TruncationPlan:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if p is None:
        p = contractive_power(model)
    h = evaluate_H(model, p)
    if not (0 < p <= 1 and h < 0):
        raise NoContractivePower(f"H({p}) = {h:.4g} is not negative")
    rho = math.exp(h)
    qm = pilot_q_moment(model, float(p), steps)
    if depth is None:
        depth = 1 if qm <= eps else max(1, math.ceil(math.log(eps / qm) / math.log(rho)))
    return TruncationPlan(float(p), rho, qm, int(depth))


# --- perpetuity --------------------------------------------------------------------


@dataclass
class PerpetuitySample:
    value: float
    depth: int
    rho: float
    p: float
    trunc_bound: float


@dataclass
class PerpetuityEnsemble:
    values: np.ndarray
    depth: int
    rho: float
    p: float
    trunc_bound: float
    sup: Optional[np.ndarray] = None  # running sup of the partial sums, if tracked

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "value", "depth", "trunc_bound"])
            tb = repr(self.trunc_bound)
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v)), self.depth, tb])


def _series(model, size, depth, steps, gv, gp, kind="Y", track_sup=False):
    """Sum of ``depth`` terms.  kind "Y": coefficient M, term Q.
    kind "X": coefficient A = 1/M, term B = -Q/M."""
    total = np.zeros(size)
    z = np.ones(size)
    sup = np.zeros(size) if track_sup else None
    for _ in range(depth):
        d = simulate_interval(model, size, 1.0, steps, gv, gp, track_max=track_sup)
        if kind == "Y":
            if track_sup:
                np.maximum(sup, total + z * d.q_max, out=sup)
            total += z * d.q
            z *= np.exp(-d.v_end)
        else:
            a = np.exp(d.v_end)
            total += z * (-d.q * a)
            z *= a
    return total, sup


def _series_block(k, size, model, seed, stream_id, depth, steps, kind, track_sup):
    gv, gp = rngmod.block_streams(seed, k, stream_id)
    return _series(model, size, depth, steps, gv, gp, kind, track_sup)


def sample_Y_infinity(model: ModelPair, p: Optional[float] = None, eps: float = 1e-4, seed: int = 0,
                      replicate_index: int = 0, steps: int = ENSEMBLE_STEPS,
                      allow_degenerate: bool = False) -> PerpetuitySample:
    _check(model, allow_degenerate)
    plan = truncation_plan(model, eps, p, steps)
    gv, gp = rngmod.replicate_streams(seed, replicate_index)
    val, _ = _series(model, 1, plan.depth, steps, gv, gp)
    return PerpetuitySample(float(val[0]), plan.depth, plan.rho, plan.p, plan.trunc_bound)


def y_infinity_ensemble(model: ModelPair, n: int, eps: float = 1e-4, seed: int = 0, p: Optional[float] = None,
                        stream_id: int = 0, steps: int = ENSEMBLE_STEPS, workers: int = 1,
                        depth: Optional[int] = None, track_sup: bool = False,
                        allow_degenerate: bool = False) -> PerpetuityEnsemble:
    """``n`` draws of the truncated series; ``track_sup`` also returns sup_t Y_t up to the depth."""
    _check(model, allow_degenerate)
    plan = truncation_plan(model, eps, p, steps, depth)
    parts = map_blocks(_series_block, n, block_size_for(steps),
                       (model, seed, stream_id, plan.depth, steps, "Y", track_sup), workers)
    vals = np.concatenate([a for a, _ in parts])
    sup = np.concatenate([b for _, b in parts]) if track_sup else None
    return PerpetuityEnsemble(vals, plan.depth, plan.rho, plan.p, plan.trunc_bound, sup)


def x_infinity_ensemble(model: ModelPair, n: int, depth: int, seed: int = 0, stream_id: int = 0,
                        steps: int = ENSEMBLE_STEPS, workers: int = 1) -> np.ndarray:
    """Truncated series sum_n B_n A_1...A_{n-1}; converges when E V_1 < 0."""
    parts = map_blocks(_series_block, n, block_size_for(steps),
                       (model, seed, stream_id, depth, steps, "X", False), workers)
    return np.concatenate([a for a, _ in parts])


@dataclass
class _BlockState:
    size: int
    gv: np.random.Generator
    gp: np.random.Generator
    y: np.ndarray
    z: np.ndarray
    sup: np.ndarray


def _advance(state: _BlockState, model, n_intervals, steps) -> _BlockState:
    for _ in range(n_intervals):
        d = simulate_interval(model, state.size, 1.0, steps, state.gv, state.gp, track_max=True)
        np.maximum(state.sup, state.y + state.z * d.q_max, out=state.sup)
        state.y += state.z * d.q
        state.z *= np.exp(-d.v_end)
    return state


class YPathRunner:
    """Resumable ensemble of Y paths: advance to T, read (Y_T, sup_{t<=T} Y_t),
    advance further.  Later horizons extend the same paths."""

    def __init__(self, model: ModelPair, n: int, seed: int = 0, stream_id: int = 0,
                 steps: int = ENSEMBLE_STEPS, workers: int = 1, allow_degenerate: bool = False):
        _check(model, allow_degenerate)
        self.model, self.steps, self.workers = model, steps, workers
        self.horizon = 0
        self.states = []
        for k, size in block_layout(n, block_size_for(steps)):
            gv, gp = rngmod.block_streams(seed, k, stream_id)
            self.states.append(_BlockState(size, gv, gp, np.zeros(size), np.ones(size), np.zeros(size)))

    def advance_to(self, horizon: int) -> "YPathRunner":
        extra = int(horizon) - self.horizon
        if extra < 0:
            raise ValueError("cannot move backwards in time")
        if extra:
            self.states = map_items(_advance, self.states, (self.model, extra, self.steps), self.workers)
            self.horizon = int(horizon)
        return self

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([s.y for s in self.states])

    @property
    def sup(self) -> np.ndarray:
        return np.concatenate([s.sup for s in self.states])


def y_path_ensemble(model: ModelPair, n: int, horizon: int, seed: int = 0, stream_id: int = 0,
                    steps: int = ENSEMBLE_STEPS, workers: int = 1, allow_degenerate: bool = False):
    """(Y_T, sup_{t <= T} Y_t) for an integer horizon T; no contraction needed."""
    run = YPathRunner(model, n, seed, stream_id, steps, workers, allow_degenerate).advance_to(horizon)
    return run.y, run.sup


def fixed_point_ks(model: ModelPair, n: int, seed: int, eps: float = 1e-4, workers: int = 1) -> dict:
    """KS two-sample test of Y_inf against Q + M Y_inf' on independent streams."""
    y = y_infinity_ensemble(model, n, eps, seed, stream_id=0, workers=workers).values
    y2 = y_infinity_ensemble(model, n, eps, seed, stream_id=1, workers=workers).values
    mq = mq_ensemble(model, n, seed, stream_id=2, workers=workers)
    res = stats.ks_2samp(y, mq.q + mq.m * y2)
    crit = ks_critical(n, n)
    return {"statistic": float(res.statistic), "critical_1pct": crit, "pvalue": float(res.pvalue),
            "passed": bool(res.statistic < crit)}


# --- autoregression --------------------------------------------------------------


def reserve_test_function(x: np.ndarray) -> np.ndarray:
    """f(x) = 1{x < -1} - x 1{-1 <= x < 0}."""
    x = np.asarray(x, dtype=float)
    return np.where(x < -1.0, 1.0, np.where(x < 0.0, -x, 0.0))


@dataclass
class ArRecursion:
    a_seq: np.ndarray
    b_seq: np.ndarray
    x0: float

    def trajectory(self) -> np.ndarray:
        x = np.empty(self.a_seq.size + 1)
        x[0] = self.x0
        for i, (a, b) in enumerate(zip(self.a_seq, self.b_seq)):
            x[i + 1] = a * x[i] + b
        return x


@dataclass
class ArResult:
    x: np.ndarray
    running_average: np.ndarray
    first_negative: Optional[int]
    recursion: ArRecursion


def _ar_coefficients(d_v_end, d_q):
    a = np.exp(d_v_end)
    return a, -d_q * a


def run_autoregression(model: ModelPair, u: float, n_steps: int, seed: int, replicate_index: int = 0,
                       steps: int = ENSEMBLE_STEPS, allow_degenerate: bool = False) -> ArResult:
    """X_n = X^u at integer times, with A_n = 1/M_n and B_n = -Q_n/M_n."""
    _check(model, allow_degenerate)
    gv, gp = rngmod.replicate_streams(seed, replicate_index, 0xA7)
    d = simulate_interval(model, n_steps, 1.0, steps, gv, gp)
    a, b = _ar_coefficients(d.v_end, d.q)
    rec = ArRecursion(a, b, float(u))
    x = rec.trajectory()
    f = reserve_test_function(x[1:])
    avg = np.cumsum(f) / np.arange(1, n_steps + 1)
    neg = np.flatnonzero(x[1:] < 0)
    return ArResult(x, avg, int(neg[0]) + 1 if neg.size else None, rec)


@dataclass
class ArEnsemble:
    min_x: np.ndarray  # min over n <= n_steps of X_n
    final_x: np.ndarray
    mean_f: np.ndarray  # per-path time average of f(X_n)


def _ar_block(k, size, model, seed, stream_id, u, n_steps, steps, burn_in):
    gv, gp = rngmod.block_streams(seed, k, stream_id)
    x = np.full(size, float(u))
    mn = x.copy()
    acc = np.zeros(size)
    for i in range(n_steps):
        d = simulate_interval(model, size, 1.0, steps, gv, gp)
        a, b = _ar_coefficients(d.v_end, d.q)
        x = a * x + b
        np.minimum(mn, x, out=mn)
        if i >= burn_in:
            acc += reserve_test_function(x)
    return mn, x, acc / max(1, n_steps - burn_in)


def autoregression_ensemble(model: ModelPair, u: float, n_steps: int, n_paths: int, seed: int,
                            stream_id: int = 0xA8, steps: int = ENSEMBLE_STEPS, burn_in: int = 0,
                            workers: int = 1) -> ArEnsemble:
    _check(model, False)
    parts = map_blocks(_ar_block, n_paths, block_size_for(steps),
                       (model, seed, stream_id, u, n_steps, steps, burn_in), workers)
    return ArEnsemble(*(np.concatenate([p[i] for p in parts]) for i in range(3)))


# --- ladder times ------------------------------------------------------------------


def sample_ladder_time(model: ModelPair, seed: int, replicate_index: int, cap: int = LADDER_CAP) -> int:
    """First k >= 1 with V_k < 0."""
    gen = rngmod.stream(seed, rngmod.DOMAIN_SINGLE, replicate_index, rngmod.TAG_V, 0x1D)
    level = 0.0
    done = 0
    chunk = 64
    while done < cap:
        size = min(chunk, cap - done)
        path = level + np.cumsum(log_price_increments(model, gen, size))
        hit = np.flatnonzero(path < 0)
        if hit.size:
            return done + int(hit[0]) + 1
        level = path[-1]
        done += size
        chunk = min(2 * chunk, 1 << 20)
    raise LadderTimeOverflow(f"no descending ladder epoch within {cap} steps")


def _ladder_block(k, size, model, seed, stream_id, horizon):
    gen = rngmod.stream(seed, rngmod.DOMAIN_BLOCK, k, rngmod.TAG_V, stream_id)
    t1 = np.full(size, horizon + 1, dtype=np.int64)  # horizon + 1 means censored
    alive = np.arange(size)
    level = np.zeros(size)
    done = 0
    chunk = 16
    while alive.size and done < horizon:
        width = min(chunk, horizon - done)
        inc = log_price_increments(model, gen, alive.size * width).reshape(alive.size, width)
        path = level[:, None] + np.cumsum(inc, axis=1)
        neg = path < 0
        hit = neg.any(axis=1)
        first = neg.argmax(axis=1)
        t1[alive[hit]] = done + first[hit] + 1
        level = path[~hit, -1]
        alive = alive[~hit]
        done += width
        chunk = min(2 * chunk, 4096)
    return t1


def ladder_time_survival(model: ModelPair, n: int, horizons: Sequence[int], seed: int,
                         stream_id: int = 0x1E, workers: int = 1) -> dict:
    """P(T_1 > k) for every k in ``horizons`` from ``n`` walks censored at max(horizons)."""
    top = int(max(horizons))
    parts = map_blocks(_ladder_block, n, 1 << 14, (model, seed, stream_id, top), workers)
    t1 = np.concatenate(parts)
    out = {}
    for k in horizons:
        p = float(np.mean(t1 > k))
        out[int(k)] = (p, math.sqrt(max(p * (1 - p), 0.0) / n))
    return out
