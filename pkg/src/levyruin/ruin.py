"""Ruin probabilities: the tail of Y_inf, the Paulsen-Gjessing reduction,
direct crossing Monte Carlo, power-tail fits and the regime classifier.

Ruin of the reserve X^u = E(R)(u - Y) happens exactly when Y reaches u, so
every estimator here works with Y.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientTail, MethodPreconditionViolated, NoPositiveRoot
from .fixed_point import PerpetuityEnsemble, YPathRunner, y_infinity_ensemble, y_path_ensemble
from .levy_model import ModelPair, dplus_H0, effective_domain, find_root_beta
from .path_sim import ENSEMBLE_STEPS

METHODS = ("paulsen_reduction", "crossing_mc", "bounds")
CROSSING_STREAM = 0xC0


# --- tail of Y_inf ----------------------------------------------------------------


@dataclass
class GBarPoint:
    u: float
    g_bar: float
    se: float


def exceedance(values: np.ndarray, u_list: Sequence[float]) -> List[GBarPoint]:
    """P(Y > u) with binomial standard errors, from one sorted pass."""
    v = np.sort(np.asarray(values))
    n = v.size
    out = []
    for u in u_list:
        g = (n - np.searchsorted(v, u, side="right")) / n
        out.append(GBarPoint(float(u), float(g), math.sqrt(g * (1.0 - g) / n)))
    if out and out[-1].g_bar == 0.0:
        warnings.warn("sparse tail: some u lie above every sample", RuntimeWarning, stacklevel=2)
    return out


def estimate_G_bar(model: ModelPair, u_list: Sequence[float], n_replicates: int, eps: float = 1e-4,
                   seed: int = 0, workers: int = 1, ensemble: Optional[PerpetuityEnsemble] = None):
    if len(u_list) == 0:
        raise ValueError("u_list is empty")
    if ensemble is None:
        ensemble = y_infinity_ensemble(model, n_replicates, eps, seed, workers=workers)
    return exceedance(ensemble.values, u_list)


# --- Psi ----------------------------------------------------------------------------


@dataclass
class RuinEstimate:
    u: float
    psi_hat: float
    g_bar_hat: Optional[float]
    g_bar_0_hat: Optional[float]
    method: str
    n_replicates: int
    se: float
    horizon: Optional[float] = None
    psi_upper: Optional[float] = None  # bounds method: upper end; psi_hat is the lower end
    grid_step: Optional[float] = None
    converged: bool = True

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class PsiParams:
    n_replicates: int = 100_000
    eps: float = 1e-4
    seed: int = 0
    workers: int = 1
    horizon: int = 16  # crossing: starting horizon, doubled adaptively
    max_horizon: int = 512
    steps: int = ENSEMBLE_STEPS  # crossing: starting grid, refined adaptively
    max_steps: int = 64
    adapt: bool = True
    target: Optional[float] = None  # crossing: stop doubling T once psi reaches this
    allow_brownian_p: bool = False


def paulsen_applicable(model: ModelPair, allow_brownian_p: bool = False) -> Optional[str]:
    """None if ruin can only happen by continuous crossing, else the reason it cannot be assumed."""
    p = model.p
    if p.has_jumps and p.jump_law.has_negative():
        return "P has negative jumps"
    if p.diffusion_var > 0 and not allow_brownian_p:
        return "P has a Brownian part (override with allow_brownian_p)"
    return None


def _reduction(values: np.ndarray, u: float):
    n = values.size
    g0 = float(np.mean(values > 0))
    gu = float(np.mean(values > u))
    return gu, g0, n


def _paulsen(model, u, prm: PsiParams, ens) -> RuinEstimate:
    why = paulsen_applicable(model, prm.allow_brownian_p)
    if why:
        raise MethodPreconditionViolated(f"paulsen_reduction: {why}")
    gu, g0, n = _reduction(ens.values, u)
    if g0 == 0:
        raise InsufficientTail("no positive Y_inf draws; G(0) is zero")
    psi = gu / g0
    # ratio of nested indicators: binomial in the conditional sample
    se = math.sqrt(psi * (1.0 - psi) / (n * g0))
    return RuinEstimate(u, psi, gu, g0, "paulsen_reduction", n, se)


def _bounds(model, u, prm: PsiParams, ens) -> RuinEstimate:
    gu, g0, n = _reduction(ens.values, u)
    if g0 == 0:
        raise InsufficientTail("no positive Y_inf draws; G(0) is zero")
    se = math.sqrt(gu * (1.0 - gu) / n)
    return RuinEstimate(u, gu, gu, g0, "bounds", n, se, psi_upper=min(1.0, gu / g0))


def crossing_sups(model: ModelPair, n: int, horizon: int, steps: int, seed: int, workers: int = 1,
                  stream_id: int = CROSSING_STREAM) -> np.ndarray:
    """sup_{t <= horizon} Y_t per path (zero included), checked at grid and jump epochs."""
    return y_path_ensemble(model, n, horizon, seed, stream_id, steps, workers)[1]


def _rates(sup: np.ndarray, u: np.ndarray):
    psi = np.mean(sup[None, :] >= u[:, None], axis=1)
    return psi, np.sqrt(psi * (1.0 - psi) / sup.size)


def crossing_many(model: ModelPair, u_list: Sequence[float], prm: PsiParams) -> List[RuinEstimate]:
    """Crossing estimates for several u from one ensemble.

    The horizon is doubled on the same paths until no estimate moves by one SE
    or more (or all reach ``prm.target``).  The grid is then halved at that
    horizon.  Different grids use independent noise, so that comparison is made
    against the combined SE of the two estimates.
    """
    u = np.asarray(u_list, dtype=float)
    floor = 1.0 / prm.n_replicates
    steps = int(prm.steps)
    run = YPathRunner(model, prm.n_replicates, prm.seed, CROSSING_STREAM, steps, prm.workers)
    T = int(prm.horizon)
    psi, se = _rates(run.advance_to(T).sup, u)
    hit_target = lambda v: prm.target is not None and bool(np.all(v >= prm.target))
    t_ok = not prm.adapt or hit_target(psi)
    while not t_ok and 2 * T <= prm.max_horizon:
        T *= 2
        psi2, se2 = _rates(run.advance_to(T).sup, u)
        t_ok = bool(np.all(np.abs(psi2 - psi) < np.maximum(se2, floor))) or hit_target(psi2)
        psi, se = psi2, se2
    h_ok = not prm.adapt
    while not h_ok and 2 * steps <= prm.max_steps:
        steps *= 2
        psi2, se2 = _rates(crossing_sups(model, prm.n_replicates, T, steps, prm.seed, prm.workers), u)
        h_ok = bool(np.all(np.abs(psi2 - psi) < np.maximum(np.hypot(se, se2), floor)))
        psi, se = psi2, se2
    return [RuinEstimate(float(uk), float(pk), None, None, "crossing_mc", prm.n_replicates, float(sk),
                         horizon=float(T), grid_step=1.0 / steps, converged=bool(t_ok and h_ok))
            for uk, pk, sk in zip(u, psi, se)]


def estimate_psi(model: ModelPair, u: float, method: str = "paulsen_reduction",
                 params: Optional[PsiParams] = None, ensemble: Optional[PerpetuityEnsemble] = None) -> RuinEstimate:
    return estimate_psi_table(model, [u], method, params, ensemble)[0]


def estimate_psi_table(model: ModelPair, u_list: Sequence[float], method: str = "paulsen_reduction",
                       params: Optional[PsiParams] = None,
                       ensemble: Optional[PerpetuityEnsemble] = None) -> List[RuinEstimate]:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if len(u_list) == 0 or not all(u > 0 for u in u_list):
        raise ValueError("u values must be positive")
    prm = params or PsiParams()
    if method == "paulsen_reduction":
        why = paulsen_applicable(model, prm.allow_brownian_p)
        if why:
            raise MethodPreconditionViolated(f"paulsen_reduction: {why}")
    if method == "crossing_mc":
        rows = crossing_many(model, u_list, prm)
        if ensemble is not None:
            for r in rows:
                r.g_bar_hat, r.g_bar_0_hat, _ = _reduction(ensemble.values, r.u)
        return rows
    if ensemble is None:
        ensemble = y_infinity_ensemble(model, prm.n_replicates, prm.eps, prm.seed, workers=prm.workers)
    one = _paulsen if method == "paulsen_reduction" else _bounds
    return [one(model, u, prm, ensemble) for u in u_list]


def write_ruin_csv(path, rows: Sequence[RuinEstimate]) -> None:
    cols = ["u", "psi_hat", "se", "method", "g_bar_hat", "g_bar_0_hat", "n_replicates", "horizon", "psi_upper"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            d = asdict(r)
            w.writerow(["" if d.get(c) is None else d.get(c) for c in cols])


# --- tail fit -------------------------------------------------------------------------

DEFAULT_WINDOW = (0.95, 0.999)
DEFAULT_FIT_POINTS = 12
MIN_FIT_POINTS = 6
MIN_SAMPLES = 10_000


@dataclass
class TailFit:
    beta_hat: float
    c_hat: float
    window: Tuple[float, float]
    r2: float
    beta_ci_halfwidth: float
    u_grid: List[float] = field(default_factory=list)
    g_values: List[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"beta_hat": self.beta_hat, "c_hat": self.c_hat, "window": list(self.window), "r2": self.r2,
                "beta_ci_halfwidth": self.beta_ci_halfwidth}

    def compensated(self, beta: float) -> np.ndarray:
        """u^beta * G(u) on the fit grid."""
        return np.asarray(self.u_grid) ** beta * np.asarray(self.g_values)


def _ols(x, y):
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    icpt = ym - slope * xm
    resid = y - icpt - slope * x
    sst = np.sum((y - ym) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return slope, icpt, float(r2), resid, sxx


def fit_tail(samples: Optional[np.ndarray] = None, pairs: Optional[Sequence[Tuple[float, float]]] = None,
             window: Tuple[float, float] = DEFAULT_WINDOW, n_points: int = DEFAULT_FIT_POINTS,
             window_u: Optional[Tuple[float, float]] = None, n_boot: int = 200, seed: int = 0) -> TailFit:
    """Least squares of log G(u) on log u.

    With ``samples`` the window is the quantile range ``window`` (or the explicit
    ``window_u``) and the CI comes from a multinomial bootstrap over the samples.
    With ``pairs`` the points are used as given and the CI is the OLS one.
    """
    if n_points < MIN_FIT_POINTS:
        raise ValueError(f"need at least {MIN_FIT_POINTS} fit points")
    if pairs is not None:
        arr = np.asarray(pairs, dtype=float)
        ok = (arr[:, 0] > 0) & (arr[:, 1] > 0)
        u, g = arr[ok, 0], arr[ok, 1]
        if u.size < MIN_FIT_POINTS:
            raise InsufficientTail(f"only {u.size} usable points")
        x, y = np.log(u), np.log(g)
        slope, icpt, r2, resid, sxx = _ols(x, y)
        s2 = np.sum(resid**2) / max(1, u.size - 2)
        hw = 1.96 * math.sqrt(s2 / sxx)
        return TailFit(-slope, math.exp(icpt), (float(u.min()), float(u.max())), r2, hw, u.tolist(), g.tolist())

    v = np.sort(np.asarray(samples, dtype=float))
    n = v.size
    if n < MIN_SAMPLES:
        raise InsufficientTail(f"{n} samples, need {MIN_SAMPLES}")
    if not v[-1] > 0:
        raise InsufficientTail("no positive samples")
    if window_u is None:
        lo, hi = np.quantile(v, window)
    else:
        lo, hi = window_u
    lo = max(lo, v[v > 0][0])
    if not (0 < lo < hi):
        raise InsufficientTail("quantile window does not reach the positive tail")
    u = np.geomspace(lo, hi, n_points)
    counts = n - np.searchsorted(v, u, side="right")
    ok = counts > 0
    if ok.sum() < MIN_FIT_POINTS:
        raise InsufficientTail(f"only {int(ok.sum())} usable points")
    u, counts = u[ok], counts[ok]
    g = counts / n
    x = np.log(u)
    slope, icpt, r2, _, _ = _ols(x, np.log(g))

    # bootstrap: exceedance counts are cumulative sums of multinomial bin counts
    rng = np.random.default_rng(seed)
    bins = -np.diff(np.concatenate([counts, [0]]))  # samples in [u_k, u_{k+1}) plus the top bin
    probs = np.concatenate([[1.0 - counts[0] / n], bins / n])
    probs = np.clip(probs, 0, None)
    probs /= probs.sum()
    betas = []
    for _ in range(n_boot):
        draw = rng.multinomial(n, probs)[1:]
        c = np.cumsum(draw[::-1])[::-1]
        if np.all(c > 0):
            betas.append(-_ols(x, np.log(c / n))[0])
    hw = float(np.subtract(*np.percentile(betas, [97.5, 2.5])) / 2) if len(betas) > 1 else float("nan")
    return TailFit(-slope, math.exp(icpt), (float(u[0]), float(u[-1])), r2, hw, u.tolist(), g.tolist())


def band_deviation(values: np.ndarray) -> float:
    """Largest relative deviation from the median."""
    v = np.asarray(values, dtype=float)
    med = np.median(v)
    return float(np.max(np.abs(v / med - 1.0)))


# --- regimes -------------------------------------------------------------------------

CERTAIN_RUIN_EPS = 1e-2


@dataclass
class Regime:
    name: str  # PowerTail, CertainRuin or Inconclusive
    beta: Optional[float] = None
    reason: str = ""

    def to_json(self) -> dict:
        out = {"regime": self.name}
        if self.beta is not None:
            out["beta"] = self.beta
        if self.reason:
            out["reason"] = self.reason
        return out


def _p_moment(model: ModelPair, q: float) -> float:
    p = model.p
    return p.jump_law.abs_moment(q) if p.has_jumps else 0.0


def classify_regime(model: ModelPair) -> Regime:
    try:
        rep = find_root_beta(model)
    except NoPositiveRoot as exc:
        lo, hi = effective_domain(model)
        if dplus_H0(model) >= 0 and lo < 0 < hi and math.isfinite(_p_moment(model, CERTAIN_RUIN_EPS)):
            return Regime("CertainRuin", reason="E V_1 <= 0")
        return Regime("Inconclusive", reason=str(exc))
    if not math.isfinite(_p_moment(model, rep.beta)):
        return Regime("Inconclusive", rep.beta, "E|xi_P|^beta is infinite")
    return Regime("PowerTail", rep.beta)


def ruin_report(est: RuinEstimate, fit: Optional[TailFit], regime: Regime) -> dict:
    out = {
        "u": est.u, "psi_hat": est.psi_hat, "se": est.se, "method": est.method,
        "beta_hat": fit.beta_hat if fit else None,
        "c_hat": fit.c_hat if fit else None,
        "window": list(fit.window) if fit else None,
        "regime": regime.name,
    }
    json.dumps(out)  # fail early on non-serializable values
    return out
