"""Acceptance suite: twelve end-to-end checks with fixed seeds and tolerances.

``run_all`` runs every criterion and returns one ``CriterionResult`` each.
``quick`` shrinks sample sizes for smoke runs; verdicts in quick mode are
indicative only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List

import numpy as np
from scipy import stats

from .config import PRESETS, load_preset
from .fixed_point import fixed_point_ks, ks_critical, ladder_time_survival, y_infinity_ensemble
from .jumps import DiscreteAtoms
from .errors import NoPositiveRoot
from .levy_model import LevyTriplet, ModelPair, effective_domain, evaluate_H, find_root_beta, gbm_returns
from .path_sim import cauchy_euler_errors, mq_ensemble, v_ensemble
from .renewal import estimate_goldie_constant, lattice_renewal_check
from .ruin import PsiParams, band_deviation, classify_regime, estimate_psi_table, fit_tail

SEED = 20240601


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: Dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3), "data": self.data}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def _model(name: str) -> ModelPair:
    return load_preset(name).model


@lru_cache(maxsize=2)
def _example1_y(n: int, workers: int) -> np.ndarray:
    """Y_inf draws for Example 1 shared by the tail-fit and Goldie checks."""
    return y_infinity_ensemble(_model("example1_powertail"), n, 1e-4, SEED, stream_id=0x3A, workers=workers).values


# --- criteria -----------------------------------------------------------------------


def c01_beta_closed_form(workers: int, quick: bool) -> CriterionResult:
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(20):
        s2 = rng.uniform(0.05, 2.0)
        a = s2 / 2 * rng.uniform(1.05, 4.0)
        model = ModelPair(gbm_returns(a, s2), LevyTriplet(-1.0, 0.0))
        beta = find_root_beta(model).beta
        worst = max(worst, abs(beta - (2 * a / s2 - 1)))
    return CriterionResult(1, "beta closed form", worst <= 1e-10, f"max |beta - (2a/s2 - 1)| = {worst:.2e}",
                           data={"max_abs_error": worst})


def c02_cumulant_identity(workers: int, quick: bool) -> CriterionResult:
    n = 10_000 if quick else 100_000
    rows, ok = [], True
    for name in PRESETS:
        model = _model(name)
        try:
            beta = find_root_beta(model).beta
        except NoPositiveRoot:
            beta = 1.0  # no root: use q in {0.5, 1, 1.5}
        q_up = effective_domain(model)[1]
        qs = [beta / 2, beta, min(beta + 1, q_up - 0.5)]
        v = v_ensemble(model, n, SEED, stream_id=0x21, workers=workers)
        for q in qs:
            w = np.exp(-q * v)
            mean, se = float(w.mean()), float(w.std(ddof=1) / math.sqrt(n))
            target = math.exp(evaluate_H(model, q))
            z = abs(mean - target) / se
            ok &= z <= 3
            rows.append({"preset": name, "q": q, "mc": mean, "exact": target, "z": z})
    zmax = max(r["z"] for r in rows)
    return CriterionResult(2, "cumulant identity", ok, f"{len(rows)} cases, max |z| = {zmax:.2f}",
                           data={"cases": rows})


def c03_tail_exponent(workers: int, quick: bool) -> CriterionResult:
    n = 100_000 if quick else 1_000_000
    fit = fit_tail(_example1_y(n, workers), seed=SEED)
    dev = band_deviation(fit.compensated(2.0))
    ok = 1.85 <= fit.beta_hat <= 2.15 and dev < 0.25
    return CriterionResult(3, "tail exponent recovery", ok,
                           f"beta_hat = {fit.beta_hat:.3f} +- {fit.beta_ci_halfwidth:.3f}, "
                           f"u^2 G(u) deviation {dev:.1%} on [{fit.window[0]:.3g}, {fit.window[1]:.3g}]",
                           data={"fit": fit.to_json(), "band_deviation": dev})


def c04_fixed_point(workers: int, quick: bool) -> CriterionResult:
    n = 10_000 if quick else 100_000
    res = {name: fixed_point_ks(_model(name), n, SEED, workers=workers)
           for name in ("example1_powertail", "example2_jumps")}
    ok = all(r["passed"] for r in res.values())
    txt = ", ".join(f"{k}: D = {r['statistic']:.4f}" for k, r in res.items())
    return CriterionResult(4, "fixed-point law", ok, f"{txt} (1% critical {ks_critical(n, n):.4f})", data=res)


def c05_q_over_m(workers: int, quick: bool) -> CriterionResult:
    n = 10_000 if quick else 100_000
    model = _model("example1_powertail")
    crit = ks_critical(n, n)
    out = []
    for s in (SEED, SEED + 1, SEED + 2):
        back = mq_ensemble(model, n, s, stream_id=0x51, theta=-1.0, workers=workers).q
        fwd = mq_ensemble(model, n, s, stream_id=0x52, workers=workers)
        d = float(stats.ks_2samp(back, fwd.q / fwd.m).statistic)
        out.append(d)
    ok = all(d < crit for d in out)
    return CriterionResult(5, "Q_-1 versus Q_1/M_1", ok,
                           f"D = {', '.join(f'{d:.4f}' for d in out)} (1% critical {crit:.4f})",
                           data={"statistics": out, "critical": crit})


def c06_paulsen_vs_crossing(workers: int, quick: bool) -> CriterionResult:
    n = 20_000 if quick else 200_000
    model = _model("example2_jumps")
    u = [2.0, 5.0, 10.0]
    prm = PsiParams(n_replicates=n, seed=SEED, workers=workers)
    red = estimate_psi_table(model, u, "paulsen_reduction", prm)
    crs = estimate_psi_table(model, u, "crossing_mc", prm)
    rows, ok = [], True
    for a, b in zip(red, crs):
        z = abs(a.psi_hat - b.psi_hat) / math.hypot(a.se, b.se) if a.se or b.se else 0.0
        ok &= z <= 3
        rows.append({"u": a.u, "reduction": a.psi_hat, "reduction_se": a.se, "crossing": b.psi_hat,
                     "crossing_se": b.se, "horizon": b.horizon, "grid_step": b.grid_step, "z": z})
    txt = ", ".join(f"u={r['u']:g}: {r['reduction']:.4f} vs {r['crossing']:.4f} (z={r['z']:.2f})" for r in rows)
    return CriterionResult(6, "reduction versus crossing", ok, txt, data={"rows": rows})


def c07_certain_ruin(workers: int, quick: bool) -> CriterionResult:
    cfg = load_preset("example1_certain_ruin")
    run = cfg.run
    n = 500 if quick else run["n_replicates"]
    # a finer grid only adds crossings, so the grid is not refined here
    prm = PsiParams(n_replicates=n, seed=cfg.seed, workers=workers, horizon=int(run["horizon"]),
                    max_horizon=int(run["max_horizon"]), steps=run["steps"], max_steps=run["steps"],
                    target=run["target"])
    est = estimate_psi_table(cfg.model, [5.0], "crossing_mc", prm)[0]
    reg = classify_regime(cfg.model)
    ok = est.psi_hat >= 0.95 and reg.name == "CertainRuin"
    return CriterionResult(7, "certain ruin", ok,
                           f"Psi(5, T={est.horizon:g}) = {est.psi_hat:.3f} +- {est.se:.3f}, regime {reg.name}",
                           data={"estimate": est.to_json(), "regime": reg.to_json()})


def c08_goldie_consistency(workers: int, quick: bool) -> CriterionResult:
    n = 100_000 if quick else 1_000_000
    model = _model("example1_powertail")
    y = _example1_y(n, workers)
    fit = fit_tail(y, seed=SEED)
    g0 = float(np.mean(y > 0))
    # a fit of Psi = G/G(0) has constant C_inf, and C_inf * G(0) is the constant of G fitted here
    c_fit = fit.c_hat
    gold = estimate_goldie_constant(model, n=n, seed=SEED, workers=workers)
    rel = abs(gold.c_plus_hat - c_fit) / abs(gold.c_plus_hat)
    deep = fit_tail(y, window=(0.99, 0.9999), seed=SEED)
    rel_deep = abs(gold.c_plus_hat - deep.c_hat) / abs(gold.c_plus_hat)
    return CriterionResult(8, "Goldie constant consistency", rel <= 0.20,
                           f"renewal {gold.c_plus_hat:.3e} +- {gold.se:.1e} vs fit {c_fit:.3e}: {rel:.0%} "
                           f"(window [0.99, 0.9999]: {deep.c_hat:.3e}, {rel_deep:.0%})",
                           data={"goldie": gold.to_json(), "fit": fit.to_json(), "g0": g0,
                                 "relative_difference": rel, "deep_fit": deep.to_json(),
                                 "deep_relative_difference": rel_deep})


def c09_arithmetic_band(workers: int, quick: bool) -> CriterionResult:
    n = 50_000 if quick else 300_000
    model = _model("arithmetic_lattice")
    beta = find_root_beta(model).beta
    y = y_infinity_ensemble(model, n, 1e-4, SEED, stream_id=0x90, workers=workers).values
    lo = float(np.quantile(y, 0.99))
    u = np.geomspace(lo, 10 * lo, 25)
    g = np.array([np.mean(y > x) for x in u])
    comp = u**beta * g
    ratio = float(comp.max() / comp.min()) if comp.min() > 0 else float("inf")
    return CriterionResult(9, "arithmetic boundedness", ratio <= 3.0,
                           f"max/min of u^beta G(u) over [{lo:.3g}, {10 * lo:.3g}] = {ratio:.2f}, "
                           f"{int(np.sum(y > 10 * lo))} draws above the top",
                           data={"u": u.tolist(), "compensated": comp.tolist(), "ratio": ratio})


def _hat(x: float) -> float:
    return max(0.0, 1.0 - abs(x))


def c10_lattice_renewal(workers: int, quick: bool) -> CriterionResult:
    walks = 10_000 if quick else 100_000
    det = lattice_renewal_check(DiscreteAtoms([(1.0, 1.0)]), _hat, 0.3, 1000, seed=SEED, support=(-1, 1))
    two = lattice_renewal_check(DiscreteAtoms([(1.0, 0.7), (2.0, 0.3)]), _hat, 0.3, 1000, n_walks=walks,
                                seed=SEED, support=(-1, 1))
    ok = det.max_deviation <= 0.01 and two.max_deviation <= 0.01
    return CriterionResult(10, "lattice renewal limit", ok,
                           f"deterministic {det.max_deviation:.2%}, two-atom {two.max_deviation:.2%}",
                           data={"deterministic": det.to_json(), "two_atom": two.to_json()})


def c11_ladder_feller(workers: int, quick: bool) -> CriterionResult:
    n = 10_000 if quick else 100_000
    model = _model("example1_certain_ruin")
    ks = (100, 1000, 10_000)
    surv = ladder_time_survival(model, n, ks, SEED, workers=workers)
    scaled = [math.sqrt(k) * surv[k][0] for k in ks]
    ratio = max(scaled) / min(scaled) if min(scaled) > 0 else float("inf")
    return CriterionResult(11, "ladder-time bound", ratio < 3,
                           f"sqrt(n) P(T1 > n) = {', '.join(f'{s:.3f}' for s in scaled)}, ratio {ratio:.2f}",
                           data={"scaled": scaled, "ratio": ratio})


def c12_cauchy_euler(workers: int, quick: bool) -> CriterionResult:
    paths = 20 if quick else 100
    levels = [8, 9, 10, 11]
    err = cauchy_euler_errors(_model("example1_powertail"), 1.0, levels, SEED, paths)
    mean = err.mean(axis=0)
    ratios = (mean[1:] / mean[:-1]).tolist()
    return CriterionResult(12, "Cauchy formula versus Euler", max(ratios) <= 0.75,
                           f"mean errors {', '.join(f'{e:.2e}' for e in mean)}, "
                           f"ratios {', '.join(f'{r:.3f}' for r in ratios)}",
                           data={"mean_errors": mean.tolist(), "ratios": ratios})


CRITERIA: List[Callable[[int, bool], CriterionResult]] = [
    c01_beta_closed_form, c02_cumulant_identity, c03_tail_exponent, c04_fixed_point, c05_q_over_m,
    c06_paulsen_vs_crossing, c07_certain_ruin, c08_goldie_consistency, c09_arithmetic_band,
    c10_lattice_renewal, c11_ladder_feller, c12_cauchy_euler,
]


def run_criterion(number: int, workers: int = 1, quick: bool = False) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number - 1](workers, quick)
    res.seconds = time.perf_counter() - t0
    return res


def run_all(workers: int = 1, quick: bool = False, echo: bool = False) -> List[CriterionResult]:
    out = []
    for k in range(1, len(CRITERIA) + 1):
        res = run_criterion(k, workers, quick)
        if echo:
            print(res.line(), flush=True)
        out.append(res)
    return out
