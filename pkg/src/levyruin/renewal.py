"""Renewal-theory numerics for the tail of Y_inf.

Contents: grid functions and the exponential smoothing operator, Riemann sums
over blocks, the Goldie constant C_+ = lim u^beta P(Y_inf > u) via the
Esscher-tilted renewal equation, a lattice renewal check, the tail of
sup_j M_1...M_j, and the renewal-equation residual of an empirical tail.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from . import rng as rngmod
from .errors import ArithmeticBandUnavailable, GridTooCoarse
from .fixed_point import y_infinity_ensemble
from .jumps import DiscreteAtoms
from .levy_model import ModelPair, _reduce_lattice, esscher_tilt, find_root_beta, mean_log_price
from .parallel import map_blocks
from .path_sim import _check, log_price_increments, mq_ensemble, v_ensemble

MASS_RTOL = 1e-6
TAIL_RTOL = 1e-8
SUP_CUTOFF = 40.0


# --- grid functions -------------------------------------------------------------


@dataclass
class RenewalGrid:
    x_values: np.ndarray
    step: float
    values: np.ndarray

    def __post_init__(self):
        self.x_values = np.asarray(self.x_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x_values.shape != self.values.shape or self.x_values.size < 2:
            raise ValueError("grid and values must have the same length >= 2")
        if not np.allclose(np.diff(self.x_values), self.step, rtol=1e-9, atol=1e-12):
            raise ValueError("grid is not uniform with the stated step")

    @classmethod
    def from_function(cls, f: Callable, x0: float, x1: float, step: float) -> "RenewalGrid":
        n = int(round((x1 - x0) / step))
        x = x0 + step * np.arange(n + 1)
        return cls(x, step, np.asarray(f(x), dtype=float))

    def integral(self) -> float:
        return _trapz(self.values, self.step)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for x, v in zip(self.x_values, self.values):
                w.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "RenewalGrid":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        x = np.array([float(r["x"]) for r in rows])
        v = np.array([float(r["value"]) for r in rows])
        return cls(x, float(x[1] - x[0]), v)


def _trapz(v, dx):
    return float(np.sum(v[1:] + v[:-1]) * 0.5 * dx)


def smooth(psi: RenewalGrid, scheme: str = "linear", check_mass: bool = True) -> RenewalGrid:
    """psi_check(x) = int_{-inf}^x exp(-(x - y)) psi(y) dy on the same grid.

    ``scheme`` says how psi is read between grid points: "linear" interpolates,
    "step" holds the left value (exact for right-continuous step functions).
    Each cell is then integrated exactly against the kernel.  psi is taken as
    zero left of the grid and beyond its right end.
    """
    d = psi.step
    v = psi.values
    e = math.exp(-d)
    w_hold = -math.expm1(-d)  # int_0^d exp(-(d - s)) ds
    out = np.empty_like(v)
    out[0] = 0.0
    if scheme == "step":
        inc = w_hold * v[:-1]
    elif scheme == "linear":
        w_ramp = (d - w_hold) / d  # int_0^d exp(-(d - s)) s/d ds
        inc = w_hold * v[:-1] + w_ramp * (v[1:] - v[:-1])
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    # out[k+1] = e * out[k] + inc[k]
    out[1:] = signal.lfilter([1.0], [1.0, -e], inc)
    res = RenewalGrid(psi.x_values.copy(), d, out)
    if check_mass:
        _check_mass(psi, res, scheme)
    return res


def _masses(psi: RenewalGrid, sm: RenewalGrid, scheme: str):
    d = psi.step
    v, c = psi.values, sm.values
    w_hold = -math.expm1(-d)
    if scheme == "step":
        m_psi = d * float(np.sum(v[:-1]))
        # exact integral of the smoothed function between grid points
        m_sm = float(np.sum(c[:-1] * w_hold + v[:-1] * (d - w_hold)))
        tail = c[-1]
    else:
        m_psi = _trapz(v, d)
        m_sm = _trapz(c, d)
        # beyond the grid psi is zero and the smoothed function decays like exp(-(x - x_end))
        tail = c[-1]
    return m_psi, m_sm + tail


def _check_mass(psi: RenewalGrid, sm: RenewalGrid, scheme: str) -> None:
    scale = _abs_mass(psi)
    if scale == 0:
        return
    if abs(psi.values[0]) > TAIL_RTOL * scale:
        raise GridTooCoarse("grid does not reach the left tail of psi")
    m_psi, m_sm = _masses(psi, sm, scheme)
    if abs(m_sm - m_psi) > MASS_RTOL * scale:
        raise GridTooCoarse(f"mass not preserved: {m_sm:.10g} vs {m_psi:.10g}")


def _abs_mass(g: RenewalGrid) -> float:
    return _trapz(np.abs(g.values), g.step)


@dataclass
class RiemannBounds:
    lower: float
    upper: float
    integral: float
    delta: float

    def smoothing_bounds_hold(self, rtol: float = 1e-6) -> bool:
        """upper <= e^{2 delta} int f and lower >= e^{-2 delta} int f."""
        slack = rtol * abs(self.integral)
        return (self.upper <= math.exp(2 * self.delta) * self.integral + slack
                and self.lower >= math.exp(-2 * self.delta) * self.integral - slack)


def riemann_bounds(f: RenewalGrid, delta: float) -> RiemannBounds:
    """delta * sum of inf and sup of f over consecutive closed delta-blocks."""
    m = int(round(delta / f.step))
    if m < 1 or abs(m * f.step - delta) > 1e-9 * delta:
        raise ValueError("delta must be a whole number of grid steps")
    v = f.values
    nb = (v.size - 1) // m
    if nb == 0:
        raise ValueError("grid shorter than one block")
    idx = np.arange(nb)[:, None] * m + np.arange(m + 1)[None, :]
    blocks = v[idx]
    return RiemannBounds(delta * float(blocks.min(axis=1).sum()), delta * float(blocks.max(axis=1).sum()),
                         _trapz(v[: nb * m + 1], f.step), delta)


# --- Goldie constant --------------------------------------------------------------


@dataclass
class GoldieEstimate:
    c_plus_hat: float
    se: float
    beta: float
    m_tilde_hat: float
    n_replicates: int
    m_tilde_se: float = 0.0
    m_tilde_tilted: Optional[float] = None  # direct sampling under the tilted triplet
    m_tilde_tilted_se: Optional[float] = None
    band: Optional[Tuple[float, float]] = None  # arithmetic models: limit band of the smoothed tail

    def to_json(self) -> dict:
        out = {"c_plus_hat": self.c_plus_hat, "se": self.se, "beta": self.beta, "m_tilde_hat": self.m_tilde_hat,
               "m_tilde_se": self.m_tilde_se, "n_replicates": self.n_replicates,
               "m_tilde_tilted": self.m_tilde_tilted, "m_tilde_tilted_se": self.m_tilde_tilted_se}
        if self.band is not None:
            out["band"] = list(self.band)
        return out


def tilted_log_mean(model: ModelPair, beta: float, n: int, seed: int, workers: int = 1):
    """E~ log M two ways: importance weights M^beta under the original law, and
    plain sampling of V under the tilted triplet.  Each with its SE."""
    v = v_ensemble(model, n, seed, stream_id=0x71, workers=workers)
    w = np.exp(-beta * v) * (-v)
    imp = (float(w.mean()), float(w.std(ddof=1) / math.sqrt(n)))
    tm = esscher_tilt(model, beta).model
    vt = -v_ensemble(tm, n, seed, stream_id=0x72, workers=workers)
    direct = (float(vt.mean()), float(vt.std(ddof=1) / math.sqrt(n)))
    return imp, direct


def goldie_terms(q: np.ndarray, m: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    """((Q + M Y)^+)^beta - ((M Y)^+)^beta."""
    eta = m * y
    return np.maximum(q + eta, 0.0) ** beta - np.maximum(eta, 0.0) ** beta


def estimate_goldie_constant(model: ModelPair, beta: Optional[float] = None, n: int = 100_000, seed: int = 0,
                             eps: float = 1e-4, workers: int = 1, allow_degenerate: bool = False,
                             band_step: Optional[float] = None) -> GoldieEstimate:
    """C_+ = E[((Q+MY)^+)^beta - ((MY)^+)^beta] / (beta E~ log M), with (M, Q)
    independent of the Y_inf draw.  Arithmetic models also get the limit band
    of the smoothed tail over one lattice period."""
    _check(model, allow_degenerate)
    rep = find_root_beta(model)
    if beta is None:
        beta = rep.beta
    y = y_infinity_ensemble(model, n, eps, seed, stream_id=0x60, workers=workers,
                            allow_degenerate=allow_degenerate).values
    mq = mq_ensemble(model, n, seed, stream_id=0x61, workers=workers, allow_degenerate=allow_degenerate)
    terms = goldie_terms(mq.q, mq.m, y, beta)
    mean_t, se_t = float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(n))
    (mt, mt_se), (md, md_se) = tilted_log_mean(model, beta, n, seed, workers)
    c = mean_t / (beta * mt)
    se = abs(c) * math.hypot(se_t / mean_t if mean_t else 0.0, mt_se / mt)
    if mean_t == 0:
        se = se_t / (beta * mt)
    est = GoldieEstimate(c, se, beta, mt, n, mt_se, md, md_se)
    if rep.arithmetic:
        est.band = arithmetic_band(mq.q, mq.m, y, beta, mt, rep.lattice_step, band_step)
    return est


def tail_difference_grid(q, m, y, beta, x0, x1, step) -> RenewalGrid:
    """D(x) = e^{beta x} (P(Q + M Y > e^x) - P(M Y > e^x)) on a grid, from paired draws."""
    xi = np.sort(q + m * y)
    eta = np.sort(m * y)
    n = xi.size
    x = x0 + step * np.arange(int(round((x1 - x0) / step)) + 1)
    s = np.exp(x)
    g_xi = (n - np.searchsorted(xi, s, side="right")) / n
    g_eta = (n - np.searchsorted(eta, s, side="right")) / n
    return RenewalGrid(x, step, np.exp(beta * x) * (g_xi - g_eta))


def arithmetic_band(q, m, y, beta, m_tilde, lattice_step, step=None, x_range=None) -> Tuple[float, float]:
    """[min, max] over one lattice period of (d / E~ log M) sum_j D_check(x + j d)."""
    d = lattice_step
    if step is None:
        step = d / 16
    if step > d / 4 + 1e-15:
        raise ArithmeticBandUnavailable(f"grid step {step} exceeds a quarter of the lattice step {d}")
    per = int(round(d / step))
    if abs(per * step - d) > 1e-9 * d:
        raise ArithmeticBandUnavailable("grid step does not divide the lattice step")
    eta = m * y
    if x_range is None:
        pos = eta[eta > 0]
        if pos.size < 100:
            raise ArithmeticBandUnavailable("too few positive draws to resolve D")
        lo = math.floor(math.log(np.quantile(pos, 1e-3)) / d) * d - 10.0
        hi = math.ceil(math.log(max(pos.max(), (q + eta).max())) / d) * d + d
        x_range = (lo, hi)
    D = tail_difference_grid(q, m, y, beta, x_range[0], x_range[1], step)
    Dc = smooth(D, "linear", check_mass=False)
    n_per = (Dc.values.size - 1) // per
    sums = Dc.values[: n_per * per].reshape(n_per, per).sum(axis=0)
    lim = d / m_tilde * sums
    return float(lim.min()), float(lim.max())


# --- lattice renewal ------------------------------------------------------------


@dataclass
class LatticeRenewalReport:
    n_values: np.ndarray
    estimates: np.ndarray
    limit: float
    max_deviation: float  # over the last five n, relative to the limit when it is nonzero

    def to_json(self) -> dict:
        return {"limit": self.limit, "max_deviation": self.max_deviation,
                "last_estimates": self.estimates[-5:].tolist()}


def _visit_counts(step_idx, probs, n_walks, top, seed, margin):
    """Mean number of visits of a lattice walk (in step units) to levels 0..top."""
    gen = rngmod.aux_stream(seed, 0, 0x3E)
    counts = np.zeros(top + 1)
    steps = np.asarray(step_idx)
    mean = float(np.dot(steps, probs))
    length = int((top + margin) / mean * 1.2 + 50 * math.sqrt(top + margin) + 10)
    chunk = max(1, (1 << 22) // length)
    for start in range(0, n_walks, chunk):
        size = min(chunk, n_walks - start)
        draws = steps[gen.choice(steps.size, size=(size, length), p=probs)]
        pos = np.concatenate([np.zeros((size, 1), dtype=np.int64), np.cumsum(draws, axis=1)], axis=1)
        if pos[:, -1].min() < top + margin:
            raise RuntimeError("walk too short; raise the length heuristic")
        keep = (pos >= 0) & (pos <= top)
        counts += np.bincount(pos[keep], minlength=top + 1)[: top + 1]
    return counts / n_walks


def lattice_renewal_check(step_law: DiscreteAtoms, F: Callable, x: float, n_max: int, n_walks: int = 20_000,
                          seed: int = 0, support: Tuple[float, float] = (-10.0, 10.0),
                          margin: int = 0) -> LatticeRenewalReport:
    """E sum_{k>=0} F(x + n d - S_k) for n = 1..n_max against (d/m) sum_j F(x + j d).

    F must vanish outside ``support``.  ``margin`` extends the walks beyond the
    last level of interest when steps can be negative.
    """
    vals = np.array([v for v, p in step_law.atoms])
    probs = np.array([p for v, p in step_law.atoms])
    d = _reduce_lattice(vals.tolist())
    if d is None:
        raise ValueError("step law is not lattice")
    idx = np.rint(vals / d).astype(np.int64)
    m = float(np.dot(vals, probs))
    if not m > 0:
        raise ValueError("step law needs a positive mean")
    j_lo = math.floor((support[0] - x) / d) - 1
    j_hi = math.ceil((support[1] - x) / d) + 1
    j = np.arange(j_lo, j_hi + 1)
    f = np.asarray([F(x + jj * d) for jj in j], dtype=float)
    limit = d / m * float(f.sum())
    top = n_max - j_lo
    if idx.size == 1:
        u = np.zeros(top + 1)
        u[:: int(idx[0])] = 1.0  # deterministic walk
    else:
        u = _visit_counts(idx, probs, n_walks, top, seed, margin)
    n_values = np.arange(1, n_max + 1)
    est = np.empty(n_max)
    for i, n in enumerate(n_values):
        lv = n - j  # levels S_k/d = n - j
        ok = (lv >= 0) & (lv <= top)
        est[i] = float(np.sum(f[ok] * u[lv[ok]]))
    dev = np.abs(est[-5:] - limit)
    if limit != 0:
        dev = dev / abs(limit)
    return LatticeRenewalReport(n_values, est, limit, float(dev.max()))


# --- supremum of the multiplicative walk --------------------------------------------


def _sup_block(k, size, model, seed, stream_id, cutoff, cap):
    """sup_{j>=1} S_j with S_j = -V_j, stopped once S is ``cutoff`` below its running max."""
    gen = rngmod.stream(seed, rngmod.DOMAIN_BLOCK, k, rngmod.TAG_V, stream_id)
    best = np.full(size, -np.inf)
    level = np.zeros(size)
    alive = np.arange(size)
    done = 0
    chunk = 16
    while alive.size and done < cap:
        inc = -log_price_increments(model, gen, alive.size * chunk).reshape(alive.size, chunk)
        path = level[:, None] + np.cumsum(inc, axis=1)
        top = np.maximum(best[alive], path.max(axis=1))
        best[alive] = top
        level = path[:, -1]
        keep = level > top - cutoff
        alive, level = alive[keep], level[keep]
        done += chunk
        chunk = min(2 * chunk, 1024)
    return best


def supremum_sample(model: ModelPair, n: int, seed: int, beta: Optional[float] = None, stream_id: int = 0x5A,
                    workers: int = 1, cap: int = 10_000_000) -> np.ndarray:
    """Draws of log Z*, Z* = sup_{j>=1} M_1...M_j."""
    if not mean_log_price(model) > 0:
        raise ValueError("E log M must be negative for a finite supremum")
    if beta is None:
        beta = find_root_beta(model).beta
    return np.concatenate(map_blocks(_sup_block, n, 1 << 15,
                                     (model, seed, stream_id, SUP_CUTOFF / beta, cap), workers))


def supremum_tail(model: ModelPair, u_list: Sequence[float], n: int, seed: int, beta: Optional[float] = None,
                  workers: int = 1) -> List[Tuple[float, float, float]]:
    """(u, P(Z* > u), SE) for each u."""
    s = np.sort(supremum_sample(model, n, seed, beta, workers=workers))
    out = []
    for u in u_list:
        p = float((n - np.searchsorted(s, math.log(u), side="right")) / n) if u > 0 else 1.0
        out.append((float(u), p, math.sqrt(p * (1 - p) / n)))
    return out


# --- renewal equation residual --------------------------------------------------------


@dataclass
class RenewalResidual:
    x: np.ndarray
    g: np.ndarray
    d: np.ndarray
    shifted: np.ndarray
    residual: np.ndarray
    se: np.ndarray

    @property
    def max_z(self) -> float:
        ok = self.se > 0
        return float(np.max(np.abs(self.residual[ok]) / self.se[ok])) if ok.any() else 0.0


def renewal_residual(model: ModelPair, beta: float, x_grid: Sequence[float], n: int, seed: int,
                     eps: float = 1e-4, workers: int = 1) -> RenewalResidual:
    """g(x) - D(x) - E~ g(x - log M) with g(x) = e^{beta x} P(Y > e^x).

    g comes from one Y_inf ensemble, D from a second ensemble paired with
    independent (M, Q), and the tilted expectation from the first ensemble's
    tail evaluated at e^x / M for fresh M (importance weight M^beta folded in).
    """
    x = np.asarray(x_grid, dtype=float)
    s = np.exp(x)
    y1 = np.sort(y_infinity_ensemble(model, n, eps, seed, stream_id=0x80, workers=workers).values)
    y2 = y_infinity_ensemble(model, n, eps, seed, stream_id=0x81, workers=workers).values
    mq = mq_ensemble(model, n, seed, stream_id=0x82, workers=workers)
    m3 = mq_ensemble(model, n, seed, stream_id=0x83, workers=workers).m
    w = np.exp(beta * x)

    def tail(sorted_v, t):
        return (sorted_v.size - np.searchsorted(sorted_v, t, side="right")) / sorted_v.size

    g_y = tail(y1, s)
    xi = np.sort(mq.q + mq.m * y2)
    eta = np.sort(mq.m * y2)
    g_xi, g_eta = tail(xi, s), tail(eta, s)
    # P(M Y > s) with M independent of the sorted sample y1
    shifted_p = np.array([tail(y1, sv / m3).mean() for sv in s])
    g = w * g_y
    dd = w * (g_xi - g_eta)
    sh = w * shifted_p
    res = g - dd - sh
    var = (g_y * (1 - g_y) + g_xi * (1 - g_xi) + g_eta * (1 - g_eta) + shifted_p * (1 - shifted_p)) / n
    return RenewalResidual(x, g, dd, sh, res, w * np.sqrt(var))


def d_abs_integral(q, m, y, beta, x0, x1, step) -> float:
    return _abs_mass(tail_difference_grid(q, m, y, beta, x0, x1, step))
