"""Command-line experiment runner.

    levyruin <command> (--config PATH | --preset NAME) [--seed N] [--workers N]
                       [--out DIR] [--format csv|json]

Exit codes: 0 ok, 1 module error, 2 config error.  Errors are printed to
stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .acceptance import run_all
from .config import ExperimentConfig, load_config, load_preset, preset_names
from .errors import ConfigError, LevyRuinError, NoPositiveRoot
from .fixed_point import y_infinity_ensemble
from .levy_model import (
    CumulantReport, dplus_H0, effective_domain, evaluate_H, find_root_beta, lattice_of_log_price,
)
from .path_sim import PathConfig, mq_ensemble, sample_path
from .ruin import PsiParams, classify_regime, estimate_psi_table, fit_tail, ruin_report
from .renewal import estimate_goldie_constant, supremum_tail, tail_difference_grid

COMMANDS = ("cumulant", "simulate", "perpetuity", "ruin", "tailfit", "regime", "renewal", "verify")
EXIT_OK, EXIT_MODULE, EXIT_CONFIG = 0, 1, 2


def _jsonable(x):
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


class Output:
    """Writes artifacts to the output directory with the run metadata attached."""

    def __init__(self, out_dir: Path, fmt: str, cfg: Optional[ExperimentConfig], command: str):
        self.dir = out_dir
        self.fmt = fmt
        self.meta = {"command": command, "version": __version__}
        if cfg is not None:
            self.meta.update(config_hash=cfg.config_hash(), seed=cfg.seed, source=cfg.source)
        self.files: List[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, payload: dict) -> Path:
        path = self.dir / f"{name}.json"
        doc = {"meta": self.meta, **_jsonable(payload)}
        path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
        self.files.append(str(path))
        return path

    def csv(self, name: str, header: List[str], rows) -> Path:
        path = self.dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            for k in ("config_hash", "seed", "command"):
                if k in self.meta:
                    fh.write(f"# {k}={self.meta[k]}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                            for v in row])
        self.files.append(str(path))
        return path

    def table(self, name: str, header: List[str], rows: list, payload: dict) -> None:
        if self.fmt == "csv":
            self.csv(name, header, rows)
        else:
            self.json(name, payload)


# --- commands -------------------------------------------------------------------


def cmd_cumulant(cfg: ExperimentConfig, out: Output) -> dict:
    m = cfg.model
    try:
        rep = find_root_beta(m)
        report = rep.to_json()
        beta = rep.beta
    except NoPositiveRoot as exc:
        lo, hi = effective_domain(m)
        d = lattice_of_log_price(m)
        report = CumulantReport(None, lo, hi, dplus_H0(m), [], d is not None, d).to_json()
        report["note"] = str(exc)
        beta = None
    qs = cfg.run["q"] or list(np.linspace(0.0, 1.5 * beta if beta else 3.0, 16))
    h = [(float(q), evaluate_H(m, float(q))) for q in qs]
    out.table("cumulant", ["q", "H"], h, {"report": report, "h_values": h})
    if out.fmt == "csv":
        out.json("cumulant_report", {"report": report})
    return report


def cmd_simulate(cfg: ExperimentConfig, out: Output) -> dict:
    run = cfg.run
    u = run["u"][0] if run["u"] else 0.0
    summary = []
    for i in range(run["n_paths"]):
        pc = PathConfig(run["horizon"], run["grid_step"], cfg.seed, i)
        path = sample_path(cfg.model, pc)
        rows = zip(path.times, path.v, path.p, path.y, path.price, path.reserve(u))
        name = f"path_{i}"
        if out.fmt == "csv":
            out.csv(name, ["t", "V", "P", "Y", "price", "X_u"], rows)
        else:
            out.json(name, {"u": u, "columns": ["t", "V", "P", "Y", "price", "X_u"],
                            "rows": [list(map(float, r)) for r in rows]})
        summary.append({"replicate": i, "events": int(path.times.size), "Y_T": float(path.y[-1])})
    return {"paths": summary}


def _perpetuity(cfg):
    run = cfg.run
    return y_infinity_ensemble(cfg.model, run["n_replicates"], run["eps"], cfg.seed, steps=run["steps"],
                               workers=cfg.workers)


def cmd_perpetuity(cfg: ExperimentConfig, out: Output) -> dict:
    ens = _perpetuity(cfg)
    v = ens.values
    summary = {"n": int(v.size), "depth": ens.depth, "rho": ens.rho, "p": ens.p, "trunc_bound": ens.trunc_bound,
               "mean": float(v.mean()), "p_positive": float(np.mean(v > 0)),
               "quantiles": {str(q): float(np.quantile(v, q)) for q in (0.01, 0.5, 0.99)}}
    if out.fmt == "csv":
        out.csv("perpetuity", ["replicate", "value", "depth", "trunc_bound"],
                ((i, float(x), ens.depth, ens.trunc_bound) for i, x in enumerate(v)))
    else:
        out.json("perpetuity", {"summary": summary, "values": v.tolist()})
    return summary


def cmd_ruin(cfg: ExperimentConfig, out: Output) -> dict:
    run = cfg.run
    regime = classify_regime(cfg.model)
    prm = PsiParams(n_replicates=run["n_replicates"], eps=run["eps"], seed=cfg.seed, workers=cfg.workers,
                    horizon=int(run["horizon"]), max_horizon=run["max_horizon"], steps=run["steps"],
                    target=run["target"], allow_brownian_p=run["allow_brownian_p"])
    method = run["method"]
    ens = None
    fit = None
    if method != "crossing_mc":
        ens = _perpetuity(cfg)
        try:
            fit = fit_tail(ens.values, window=tuple(run["window"]), n_points=run["n_points"], seed=cfg.seed)
        except LevyRuinError:
            fit = None
    rows = estimate_psi_table(cfg.model, run["u"], method, prm, ens)
    if fit is not None and method == "paulsen_reduction" and rows[0].g_bar_0_hat:
        # the fit on Y_inf gives C_+; the ruin constant is C_+ / G(0)
        fit.c_hat = fit.c_hat / rows[0].g_bar_0_hat
    reports = [ruin_report(r, fit, regime) for r in rows]
    for rep, r in zip(reports, rows):
        rep.update({k: v for k, v in r.to_json().items() if k not in rep})
    header = ["u", "psi_hat", "se", "method", "beta_hat", "c_hat", "window_lo", "window_hi", "regime", "horizon"]
    table = [[r["u"], r["psi_hat"], r["se"], r["method"], r["beta_hat"], r["c_hat"],
              r["window"][0] if r["window"] else None, r["window"][1] if r["window"] else None,
              r["regime"], r.get("horizon")] for r in reports]
    out.table("ruin", header, table, {"results": reports})
    return {"results": reports}


def cmd_tailfit(cfg: ExperimentConfig, out: Output) -> dict:
    run = cfg.run
    ens = _perpetuity(cfg)
    fit = fit_tail(ens.values, window=tuple(run["window"]), n_points=run["n_points"], seed=cfg.seed)
    g0 = float(np.mean(ens.values > 0))
    res = {**fit.to_json(), "g_bar_0": g0, "c_inf_hat": fit.c_hat / g0 if g0 else None}
    rows = [(u, g, u**fit.beta_hat * g) for u, g in zip(fit.u_grid, fit.g_values)]
    if out.fmt == "csv":
        out.csv("tailfit", ["u", "g_bar", "u_beta_g_bar"], rows)
        out.json("tailfit_summary", res)
    else:
        out.json("tailfit", {**res, "points": rows})
    return res


def cmd_regime(cfg: ExperimentConfig, out: Output) -> dict:
    reg = classify_regime(cfg.model).to_json()
    out.table("regime", ["regime", "beta"], [[reg["regime"], reg.get("beta")]], reg)
    return reg


def cmd_renewal(cfg: ExperimentConfig, out: Output) -> dict:
    run = cfg.run
    reg = classify_regime(cfg.model)
    res = {"regime": reg.to_json()}
    if reg.name != "PowerTail":
        raise NoPositiveRoot("renewal checks need the power-tail regime")
    n = run["n_replicates"]
    est = estimate_goldie_constant(cfg.model, reg.beta, n, cfg.seed, run["eps"], cfg.workers)
    res["goldie"] = est.to_json()
    res["supremum_tail"] = [{"u": u, "p": p, "se": se}
                            for u, p, se in supremum_tail(cfg.model, run["sup_u"], n, cfg.seed, reg.beta,
                                                          cfg.workers)]
    if out.fmt == "csv":
        y = y_infinity_ensemble(cfg.model, n, run["eps"], cfg.seed, stream_id=0x60, workers=cfg.workers).values
        mq = mq_ensemble(cfg.model, n, cfg.seed, stream_id=0x61, workers=cfg.workers)
        grid = tail_difference_grid(mq.q, mq.m, y, reg.beta, -8.0, 8.0, 1.0 / 64)
        out.csv("renewal_D", ["x", "value"], zip(grid.x_values, grid.values))
        rows = [("c_plus_hat", est.c_plus_hat), ("se", est.se), ("m_tilde_hat", est.m_tilde_hat)]
        out.csv("renewal", ["key", "value"], rows)
    else:
        out.json("renewal", res)
    return res


def cmd_verify(cfg: Optional[ExperimentConfig], out: Output, workers: int, quick: bool = False) -> dict:
    results = run_all(workers=workers, quick=quick, echo=True)
    rows = [[r.number, r.name, "PASS" if r.passed else "FAIL", r.detail, round(r.seconds, 2)] for r in results]
    out.table("verify", ["criterion", "name", "status", "detail", "seconds"], rows,
              {"criteria": [r.to_json() for r in results], "all_passed": all(r.passed for r in results)})
    return {"all_passed": all(r.passed for r in results)}


HANDLERS = {"cumulant": cmd_cumulant, "simulate": cmd_simulate, "perpetuity": cmd_perpetuity, "ruin": cmd_ruin,
            "tailfit": cmd_tailfit, "regime": cmd_regime, "renewal": cmd_renewal}


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levyruin", description="Ruin probabilities with risky investments.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    src = ap.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="TOML config file")
    src.add_argument("--preset", choices=preset_names(), help="bundled scenario")
    ap.add_argument("--seed", type=int, help="override run.seed")
    ap.add_argument("--workers", type=int, help="override run.workers")
    ap.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    ap.add_argument("--quick", action="store_true", help="verify: reduced sample sizes")
    return ap


def _error(kind: str, exc: Exception, **extra) -> None:
    doc = {"error": kind, "type": type(exc).__name__, "message": str(exc), **extra}
    print(json.dumps(doc), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = None
        if args.config:
            cfg = load_config(args.config)
        elif args.preset:
            cfg = load_preset(args.preset)
        elif args.command != "verify":
            raise ConfigError("--config", "a config file or preset is required")
        if cfg is not None:
            if args.seed is not None:
                if not 0 <= args.seed < 2**64:
                    raise ConfigError("--seed", "must be a 64-bit unsigned integer")
                cfg.run["seed"] = args.seed
            if args.workers is not None:
                if args.workers < 1:
                    raise ConfigError("--workers", "must be a positive integer")
                cfg.run["workers"] = args.workers
    except ConfigError as exc:
        _error("config", exc, key=exc.key)
        return EXIT_CONFIG
    out = Output(Path(args.out), args.format, cfg, args.command)
    try:
        if args.command == "verify":
            res = cmd_verify(cfg, out, args.workers or 1, args.quick)
            print(json.dumps(_jsonable({"meta": out.meta, "files": out.files, **res})))
            return EXIT_OK if res["all_passed"] else EXIT_MODULE
        res = HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        _error("config", exc, key=exc.key)
        return EXIT_CONFIG
    except LevyRuinError as exc:
        _error("module", exc)
        return EXIT_MODULE
    print(json.dumps(_jsonable({"meta": out.meta, "files": out.files, "result": res})))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
