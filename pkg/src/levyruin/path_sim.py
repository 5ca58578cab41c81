"""Simulation of the log price V, the business process P and the integral
Y_t = -int_0^t exp(-V_{s-}) dP_s.

The engine works on a batch of independent intervals at once.  Each interval
carries a uniform grid refined by the exact jump epochs of both processes;
Brownian increments are exact on every sub-interval.  Integrals against time
use the trapezoidal rule when V has a Brownian part and the exact exponential
formula when it does not.  Jumps of P are integrated exactly with the left
limit exp(-V_{tau-}).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as rngmod
from .errors import DegenerateModel
from .levy_model import ModelPair, validate
from .parallel import map_blocks

DEFAULT_GRID_STEP = 2.0**-10
ENSEMBLE_STEPS = 16
_BLOCK_CELLS = 2**19


def block_size_for(steps: int) -> int:
    """Replicates per ensemble block; a function of the grid only."""
    size = max(64, _BLOCK_CELLS // (steps + 4))
    return 1 << (size.bit_length() - 1)


def _check(model: ModelPair, allow_degenerate: bool):
    if allow_degenerate:
        return
    bad = validate(model)
    if bad:
        raise DegenerateModel(bad)


@dataclass
class IntervalDraws:
    """Batch result for one interval of length ``horizon``."""

    v_end: np.ndarray
    q: np.ndarray
    q_max: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None


def _jump_columns(n, rate, law, horizon, gen, log1p):
    if rate <= 0:
        return np.empty((n, 0)), np.empty((n, 0))
    counts = gen.poisson(rate * horizon, n)
    width = int(counts.max()) if n else 0
    if width == 0:
        return np.empty((n, 0)), np.empty((n, 0))
    t = gen.random((n, width)) * horizon
    size = law.sample_log1p(gen, (n, width)) if log1p else law.sample(gen, (n, width))
    dead = np.arange(width)[None, :] >= counts[:, None]
    t[dead] = horizon
    size[dead] = 0.0
    return t, size


def _phi(x: np.ndarray) -> np.ndarray:
    """(1 - exp(-x)) / x with the removable singularity filled in."""
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = -np.expm1(-x[nz]) / x[nz]
    return out


def simulate_interval(
    model: ModelPair,
    n: int,
    horizon: float,
    steps: int,
    gen_v: np.random.Generator,
    gen_p: np.random.Generator,
    theta: float = 1.0,
    track_max: bool = False,
    record: bool = False,
) -> IntervalDraws:
    """Draw ``n`` independent copies of (V_T, -int_0^T exp(-theta V_{s-}) dP_s) on [0, T].

    ``track_max`` adds the supremum over event epochs of the partial integral
    (zero included); ``record`` keeps the full event arrays.
    """
    r, p = model.r, model.p
    h = horizon / steps
    grid = np.arange(1, steps + 1) * h
    grid[-1] = horizon

    tr, yr = _jump_columns(n, r.jump_intensity, r.jump_law, horizon, gen_v, log1p=True)
    tp, xp = _jump_columns(n, p.jump_intensity, p.jump_law, horizon, gen_p, log1p=False)
    jr, jp = tr.shape[1], tp.shape[1]
    cols = steps + jr + jp

    times = np.empty((n, cols))
    times[:, :steps] = grid
    times[:, steps : steps + jr] = tr
    times[:, steps + jr :] = tp
    jv = np.zeros((n, cols))
    jv[:, steps : steps + jr] = yr
    jpp = np.zeros((n, cols))
    jpp[:, steps + jr :] = xp
    if jr + jp:
        # stable: padding slots sit at the horizon and stay behind the last grid point
        order = np.argsort(times, axis=1, kind="stable")
        times = np.take_along_axis(times, order, axis=1)
        jv = np.take_along_axis(jv, order, axis=1)
        jpp = np.take_along_axis(jpp, order, axis=1)

    dt = np.diff(times, axis=1, prepend=0.0)
    sdt = np.sqrt(dt)
    c_v = model.v_drift
    inc = c_v * dt
    if r.diffusion_var > 0:
        inc += r.sigma * sdt * gen_v.standard_normal((n, cols))
    inc[:, 1:] += jv[:, :-1]
    v_minus = np.cumsum(inc, axis=1)
    v_plus = v_minus + jv if jr else v_minus

    e_minus = np.exp(-theta * v_minus)
    if jr:
        e_plus = e_minus.copy()
        hit = jv != 0
        e_plus[hit] = np.exp(-theta * v_plus[hit])
    else:
        e_plus = e_minus
    left = np.empty_like(e_plus)
    left[:, 0] = 1.0
    left[:, 1:] = e_plus[:, :-1]

    if r.diffusion_var > 0:
        integral = 0.5 * dt * (left + e_minus)
    else:
        integral = left * dt * _phi(theta * c_v * dt)

    dq = -p.compound_drift * integral
    dp = None
    if p.diffusion_var > 0:
        dw = sdt * gen_p.standard_normal((n, cols))
        dq -= p.sigma * left * dw
        if record:
            dp = p.compound_drift * dt + p.sigma * dw + jpp
    if jp:
        dq -= e_minus * jpp
    if record and dp is None:
        dp = p.compound_drift * dt + jpp

    out = IntervalDraws(v_end=v_plus[:, -1].copy(), q=dq.sum(axis=1))
    if track_max or record:
        partial = np.cumsum(dq, axis=1)
        if track_max:
            top = partial.max(axis=1)
            if jp:
                # between P-jumps Y is continuous, so the left limits at jump epochs count too
                top = np.maximum(top, (partial + e_minus * jpp).max(axis=1))
            out.q_max = np.maximum(top, 0.0)
        if record:
            out.times, out.v, out.p, out.y = times, v_plus, np.cumsum(dp, axis=1), partial
    return out


# --- single paths ------------------------------------------------------------


@dataclass(frozen=True)
class PathConfig:
    horizon: float = 1.0
    grid_step: float = DEFAULT_GRID_STEP
    seed: int = 0
    replicate_index: int = 0

    def __post_init__(self):
        if not (self.horizon > 0 and self.grid_step > 0):
            raise ValueError("horizon and grid step must be positive")
        if self.grid_step > self.horizon:
            raise ValueError("grid step exceeds horizon")

    @property
    def steps(self) -> int:
        return max(1, math.ceil(self.horizon / self.grid_step - 1e-9))


@dataclass
class PathSample:
    times: np.ndarray
    v: np.ndarray
    p: np.ndarray
    y: np.ndarray

    @property
    def price(self) -> np.ndarray:
        return np.exp(self.v)

    def reserve(self, u: float) -> np.ndarray:
        """X^u_t = E_t(R) (u - Y_t)."""
        return self.price * (u - self.y)

    def to_csv(self, path, u: float = 0.0) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "V", "P", "Y", "price", "X_u"])
            x = self.reserve(u)
            for row in zip(self.times, self.v, self.p, self.y, self.price, x):
                w.writerow([repr(float(c)) for c in row])


def sample_path(model: ModelPair, cfg: PathConfig, allow_degenerate: bool = False, stream_id: int = 0) -> PathSample:
    _check(model, allow_degenerate)
    gv, gp = rngmod.replicate_streams(cfg.seed, cfg.replicate_index, stream_id)
    d = simulate_interval(model, 1, cfg.horizon, cfg.steps, gv, gp, record=True)
    dt = np.diff(d.times[0], prepend=0.0)
    keep = dt > 0
    keep[0] = True
    return PathSample(
        times=np.concatenate([[0.0], d.times[0][keep]]),
        v=np.concatenate([[0.0], d.v[0][keep]]),
        p=np.concatenate([[0.0], d.p[0][keep]]),
        y=np.concatenate([[0.0], d.y[0][keep]]),
    )


def sample_MQ(model: ModelPair, seed: int, replicate_index: int, steps: int = 1024,
              allow_degenerate: bool = False) -> tuple:
    """One unit-interval draw (M_1, Q_1) = (exp(-V_1), Y_1)."""
    _check(model, allow_degenerate)
    gv, gp = rngmod.replicate_streams(seed, replicate_index)
    d = simulate_interval(model, 1, 1.0, steps, gv, gp)
    return float(np.exp(-d.v_end[0])), float(d.q[0])


def sample_Q_theta(model: ModelPair, theta: int, seed: int, replicate_index: int, steps: int = 1024,
                   allow_degenerate: bool = False) -> float:
    if theta not in (1, -1):
        raise ValueError("theta must be +1 or -1")
    _check(model, allow_degenerate)
    gv, gp = rngmod.replicate_streams(seed, replicate_index)
    return float(simulate_interval(model, 1, 1.0, steps, gv, gp, theta=float(theta)).q[0])


# --- ensembles -----------------------------------------------------------------


@dataclass
class MQEnsemble:
    m: np.ndarray
    q: np.ndarray
    q_max: Optional[np.ndarray] = None


def _mq_block(k, size, model, seed, stream_id, steps, theta, track_max):
    gv, gp = rngmod.block_streams(seed, k, stream_id)
    d = simulate_interval(model, size, 1.0, steps, gv, gp, theta=theta, track_max=track_max)
    return np.exp(-d.v_end), d.q, d.q_max


def mq_ensemble(model: ModelPair, n: int, seed: int, steps: int = ENSEMBLE_STEPS, stream_id: int = 0,
                theta: float = 1.0, track_max: bool = False, workers: int = 1,
                allow_degenerate: bool = False) -> MQEnsemble:
    """``n`` i.i.d. unit-interval draws of (M_1, Q_theta)."""
    _check(model, allow_degenerate)
    parts = map_blocks(_mq_block, n, block_size_for(steps),
                       (model, seed, stream_id, steps, theta, track_max), workers)
    m = np.concatenate([a for a, _, _ in parts]) if parts else np.empty(0)
    q = np.concatenate([b for _, b, _ in parts]) if parts else np.empty(0)
    qm = np.concatenate([c for _, _, c in parts]) if track_max and parts else None
    return MQEnsemble(m, q, qm)


def _v_block(k, size, model, seed, stream_id, horizon):
    gv = rngmod.stream(seed, rngmod.DOMAIN_BLOCK, k, rngmod.TAG_V, stream_id)
    return log_price_increments(model, gv, size, horizon)


def log_price_increments(model: ModelPair, gen: np.random.Generator, size: int, horizon: float = 1.0) -> np.ndarray:
    """Exact draws of V_T: drift, Gaussian part and a compound-Poisson sum."""
    r = model.r
    out = np.full(size, model.v_drift * horizon)
    if r.diffusion_var > 0:
        out += r.sigma * math.sqrt(horizon) * gen.standard_normal(size)
    if r.has_jumps:
        counts = gen.poisson(r.jump_intensity * horizon, size)
        total = int(counts.sum())
        if total:
            jumps = r.jump_law.sample_log1p(gen, total)
            out += np.bincount(np.repeat(np.arange(size), counts), weights=jumps, minlength=size)
    return out


def v_ensemble(model: ModelPair, n: int, seed: int, stream_id: int = 0, horizon: float = 1.0,
               workers: int = 1) -> np.ndarray:
    parts = map_blocks(_v_block, n, 1 << 16, (model, seed, stream_id, horizon), workers)
    return np.concatenate(parts) if parts else np.empty(0)


# --- Cauchy formula versus a direct Euler scheme -------------------------------


def cauchy_euler_errors(model: ModelPair, u: float, levels, seed: int, n_paths: int,
                        horizon: float = 1.0, fine_level: Optional[int] = None) -> np.ndarray:
    """Max-abs gap between an Euler scheme for X = u + P + int X_- dR on the grid
    2^-level and the reference E(R)(u - Y), for every level, on shared noise.

    The reference is the Cauchy reconstruction on the grid 2^-fine_level (two
    levels below the finest Euler grid by default).  Every Euler grid is a
    subset of the reference grid; jump epochs belong to all grids.  Returns an
    array of shape (n_paths, len(levels)).
    """
    levels = list(levels)
    fine = fine_level if fine_level is not None else max(levels) + 2
    if fine < max(levels):
        raise ValueError("fine_level must be at least the finest Euler level")
    nf = int(round(horizon * 2**fine))
    hf = horizon / nf
    r, p = model.r, model.p
    c_r, c_p, c_v = r.compound_drift, p.compound_drift, model.v_drift
    out = np.empty((n_paths, len(levels)))
    for i in range(n_paths):
        gv, gp = rngmod.replicate_streams(seed, i, 7)
        wr = np.concatenate([[0.0], np.cumsum(math.sqrt(hf) * gv.standard_normal(nf))])
        wp = np.concatenate([[0.0], np.cumsum(math.sqrt(hf) * gp.standard_normal(nf))])
        tr, yr = _jump_columns(1, r.jump_intensity, r.jump_law, horizon, gv, log1p=False)
        tp, xp = _jump_columns(1, p.jump_intensity, p.jump_law, horizon, gp, log1p=False)
        ev_t = np.concatenate([tr[0], tp[0]])
        ev_r = np.concatenate([yr[0], np.zeros(tp.shape[1])])
        ev_p = np.concatenate([np.zeros(tr.shape[1]), xp[0]])
        live = (ev_r != 0) | (ev_p != 0)
        ev_t, ev_r, ev_p = ev_t[live], ev_r[live], ev_p[live]
        # Brownian values at jump epochs: bridge on the fine cell
        cell = np.minimum((ev_t / hf).astype(int), nf - 1)
        frac = ev_t / hf - cell
        sd = np.sqrt(frac * (1.0 - frac) * hf)
        z = gv.standard_normal((2, ev_t.size))
        ev_wr = wr[cell] + frac * (wr[cell + 1] - wr[cell]) + sd * z[0]
        ev_wp = wp[cell] + frac * (wp[cell + 1] - wp[cell]) + sd * z[1]
        # merged reference grid; grid index -1 marks jump epochs
        t = np.concatenate([np.arange(nf + 1) * hf, ev_t])
        gidx = np.concatenate([np.arange(nf + 1), np.full(ev_t.size, -1)])
        w_r = np.concatenate([wr, ev_wr])
        w_p = np.concatenate([wp, ev_wp])
        jr = np.concatenate([np.zeros(nf + 1), ev_r])
        jp = np.concatenate([np.zeros(nf + 1), ev_p])
        o = np.argsort(t, kind="stable")
        t, gidx, w_r, w_p, jr, jp = t[o], gidx[o], w_r[o], w_p[o], jr[o], jp[o]

        # reference: Cauchy reconstruction
        dt, dwr, dwp = np.diff(t), np.diff(w_r), np.diff(w_p)
        v_minus = np.concatenate([[0.0], np.cumsum(c_v * dt + r.sigma * dwr + np.log1p(jr[:-1]))])
        v_plus = v_minus + np.log1p(jr)
        left, right = np.exp(-v_plus[:-1]), np.exp(-v_minus[1:])
        if r.diffusion_var > 0:
            integ = 0.5 * dt * (left + right)
        else:
            integ = left * dt * _phi(c_v * dt)
        dy = -(c_p * integ + p.sigma * left * dwp + right * jp[1:])
        y = np.concatenate([[0.0], np.cumsum(dy)])
        x_ref = np.exp(v_plus) * (u - y)

        for j, lev in enumerate(levels):
            keep = (gidx < 0) | (gidx % (2 ** (fine - lev)) == 0)
            tk, jr_, jp_ = t[keep], jr[keep], jp[keep]
            dt = np.diff(tk)
            # continuous increments of R and P over each step, jumps at the right end
            d_r = c_r * dt + r.sigma * np.diff(w_r[keep])
            d_p = c_p * dt + p.sigma * np.diff(w_p[keep])
            x = np.empty(tk.size)
            x[0] = u
            for k in range(dt.size):
                xm = x[k] + d_p[k] + x[k] * d_r[k]
                x[k + 1] = xm + jp_[k + 1] + xm * jr_[k + 1]
            out[i, j] = np.max(np.abs(x - x_ref[keep]))
    return out
