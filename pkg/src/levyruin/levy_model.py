"""Lévy triplets of the returns and business processes and the cumulant of the log price.

All triplets use the truncation function ``h(x) = x 1{|x| <= 1}``.  Every jump
part is compound Poisson, so a triplet can equivalently be described by its
*compound drift* ``drift - intensity * E h(eta)``, the slope of the process
between jumps.  Simulation works with the compound drift; the truncated drift
is what a user writes into a config file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .errors import ConfigError, InvalidTilt, NoPositiveRoot
from .jumps import INF, DiscreteAtoms, JumpLaw, NegatedLaw, law_from_config, tilt

ROOT_XTOL = 1e-12
ROOT_HTOL = 1e-10
LATTICE_MAX_RATIO = 1e4  # largest atom / span accepted as a lattice
LATTICE_TOL = 1e-9


@dataclass(frozen=True)
class LevyTriplet:
    drift: float
    diffusion_var: float = 0.0
    jump_intensity: float = 0.0
    jump_law: Optional[JumpLaw] = None

    def __post_init__(self):
        if self.diffusion_var < 0:
            raise ValueError("diffusion variance must be nonnegative")
        if self.jump_intensity < 0:
            raise ValueError("jump intensity must be nonnegative")
        if self.jump_intensity > 0 and self.jump_law is None:
            raise ValueError("positive jump intensity needs a jump law")
        if self.jump_intensity == 0 and self.jump_law is not None:
            object.__setattr__(self, "jump_law", None)

    @classmethod
    def from_compound_drift(cls, compound_drift, diffusion_var=0.0, jump_intensity=0.0, jump_law=None):
        """Build a triplet from the between-jumps slope instead of the truncated drift."""
        trunc = jump_intensity * jump_law.trunc_mean() if jump_intensity > 0 else 0.0
        return cls(compound_drift + trunc, diffusion_var, jump_intensity, jump_law)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.diffusion_var)

    @property
    def has_jumps(self) -> bool:
        return self.jump_intensity > 0

    @property
    def compound_drift(self) -> float:
        if not self.has_jumps:
            return self.drift
        return self.drift - self.jump_intensity * self.jump_law.trunc_mean()

    def to_config(self) -> dict:
        jump = {"intensity": self.jump_intensity, "law": "none"}
        if self.jump_law is not None:
            jump.update(self.jump_law.to_config())
        return {"drift": self.drift, "sigma2": self.diffusion_var, "jump": jump}


@dataclass(frozen=True)
class ModelPair:
    """Returns process ``r`` (price = stochastic exponential of r) and business process ``p``."""

    r: LevyTriplet
    p: LevyTriplet

    @property
    def v_drift(self) -> float:
        """Compound drift of the log price V = log E(R)."""
        return self.r.compound_drift - 0.5 * self.r.diffusion_var

    def to_config(self) -> dict:
        return {"r": self.r.to_config(), "p": self.p.to_config()}


@dataclass
class CumulantReport:
    beta: Optional[float]
    q_lower: float
    q_upper: float
    dplus_H0: float
    h_values: List[Tuple[float, float]] = field(default_factory=list)
    arithmetic: bool = False
    lattice_step: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "q_lower": _ext(self.q_lower),
            "q_upper": _ext(self.q_upper),
            "dplus_H0": _ext(self.dplus_H0),
            "arithmetic": self.arithmetic,
            "lattice_step": self.lattice_step,
        }


def _ext(x: float):
    """JSON has no infinities; spell them out."""
    if x == INF:
        return "+inf"
    if x == -INF:
        return "-inf"
    return x


# --- standing assumptions -----------------------------------------------------


def is_subordinator(p: LevyTriplet) -> bool:
    """Finite-activity version of the three-case test: P increases iff it has
    no Brownian part, no negative jumps and a nonnegative slope between jumps."""
    if p.diffusion_var > 0:
        return False
    if p.has_jumps and p.jump_law.has_negative():
        return False
    return p.compound_drift >= 0


def validate(model: ModelPair) -> List[str]:
    """Every violated standing assumption, as human-readable strings."""
    out = []
    r, p = model.r, model.p
    if r.has_jumps and r.jump_law.support()[0] <= -1.0:
        out.append("R jump support leaves ]-1,inf[")
    if r.diffusion_var == 0 and not r.has_jumps:
        out.append("R is deterministic: sigma^2 and Pi vanish simultaneously")
    if is_subordinator(p):
        out.append("P is a subordinator")
    return out


# --- log price ---------------------------------------------------------------


@dataclass(frozen=True)
class LogJumpLaw(JumpLaw):
    """Law of log(1 + eta) for an R-jump law ``base``."""

    base: JumpLaw
    name = "log1p"

    def sample(self, rng, size):
        return self.base.sample_log1p(rng, size)

    def expect(self, f):
        return self.base.expect(lambda x: f(math.log1p(x)))

    def support(self):
        lo, hi = self.base.support()
        return (math.log1p(lo) if lo > -1 else -INF, math.log1p(hi) if hi < INF else INF)

    def trunc_mean(self):
        return self.base.log1p_trunc_mean()

    def to_config(self):
        return {"law": self.name, "params": {"base": self.base.to_config()}}


def log_price_triplet(r: LevyTriplet) -> LevyTriplet:
    """Triplet of V = log E(R): same diffusion, jumps mapped by log(1 + x),
    drift a - sigma^2/2 + Pi(h(log(1+x)) - h)."""
    if not r.has_jumps:
        return LevyTriplet(r.drift - 0.5 * r.diffusion_var, r.diffusion_var)
    law = r.jump_law
    if isinstance(law, DiscreteAtoms):
        vlaw: JumpLaw = DiscreteAtoms(tuple((math.log1p(v), p) for v, p in law.atoms))
    else:
        vlaw = LogJumpLaw(law)
    lam = r.jump_intensity
    a_v = r.drift - 0.5 * r.diffusion_var + lam * (law.log1p_trunc_mean() - law.trunc_mean())
    return LevyTriplet(a_v, r.diffusion_var, lam, vlaw)


def mean_log_price(model: ModelPair) -> float:
    """E V_1 = a_V + Pi(hbar(log(1+x)))."""
    r = model.r
    m = model.v_drift
    if r.has_jumps:
        m += r.jump_intensity * r.jump_law.log1p_mean()
    return m


# --- cumulant ----------------------------------------------------------------


def effective_domain(model: ModelPair) -> Tuple[float, float]:
    r = model.r
    if not r.has_jumps:
        return (-INF, INF)
    return r.jump_law.log1p_domain()


def evaluate_H(model: ModelPair, q: float) -> float:
    """H(q) = log E exp(-q V_1); +inf outside the effective domain."""
    if q == 0:
        return 0.0
    lo, hi = effective_domain(model)
    if not lo < q < hi:
        return INF
    r = model.r
    val = -model.v_drift * q + 0.5 * r.diffusion_var * q * q
    if r.has_jumps:
        val += r.jump_intensity * (r.jump_law.neg_power_mean(q) - 1.0)
    return val


def dplus_H0(model: ModelPair) -> float:
    return -mean_log_price(model)


def _real_gcd(a: float, b: float, tol: float) -> Optional[float]:
    a, b = max(a, b), min(a, b)
    while b > tol:
        r = math.fmod(a, b)
        if r < tol or b - r < tol:
            return b
        a, b = b, r
    return None


def _reduce_lattice(values: Sequence[float], tol: float = LATTICE_TOL) -> Optional[float]:
    """Largest d with every value an integer multiple of d (within tol), else None."""
    vals = sorted({abs(v) for v in values if abs(v) > tol})
    if not vals:
        return None
    d = vals[0]
    for v in vals[1:]:
        d = _real_gcd(v, d, tol)
        if d is None:
            return None
    # a span far below the atom sizes is a rounding artefact, not a lattice
    if vals[-1] / d > LATTICE_MAX_RATIO:
        return None
    for v in vals:
        if abs(v - round(v / d) * d) > tol * max(1.0, v / d):
            return None
    return d


def lattice_of_log_price(model: ModelPair) -> Optional[float]:
    """Span d if V_1 is concentrated on the lattice dZ, else None.

    V_1 = c + sum of log(1+eta_k) with a Poisson number of terms, so it lives on
    dZ exactly when the drift c and every jump atom do.
    """
    r = model.r
    if r.diffusion_var > 0 or not r.has_jumps or not isinstance(r.jump_law, DiscreteAtoms):
        return None
    points = [math.log1p(v) for v, p in r.jump_law.atoms if p > 0]
    points.append(model.v_drift)
    return _reduce_lattice(points)


def find_root_beta(model: ModelPair, grid: Optional[Sequence[float]] = None) -> CumulantReport:
    """Positive root of H by doubling from q = 1 and Brent refinement."""
    lo_dom, hi_dom = effective_domain(model)
    d0 = dplus_H0(model)
    lattice = lattice_of_log_price(model)
    report = CumulantReport(
        beta=None, q_lower=lo_dom, q_upper=hi_dom, dplus_H0=d0,
        arithmetic=lattice is not None, lattice_step=lattice,
    )
    if not d0 < 0:
        raise NoPositiveRoot(f"D+H(0) = {d0 + 0.0:.6g} >= 0")

    H = lambda q: evaluate_H(model, q)
    hi = min(1.0, 0.5 * hi_dom)
    while not H(hi) > 0:
        nxt = 2.0 * hi
        if nxt >= hi_dom:
            # approach a finite domain edge geometrically
            nxt = 0.5 * (hi + hi_dom)
            if hi_dom - hi < ROOT_XTOL:
                raise NoPositiveRoot("H < 0 on the whole positive domain")
        if nxt > 2.0**60:
            raise NoPositiveRoot("H < 0 on the whole positive domain")
        hi = nxt
    lo = hi / 2.0
    while H(lo) >= 0:
        lo /= 2.0
        if lo < 1e-300:
            raise NoPositiveRoot("no sign change found near 0")
    beta = optimize.brentq(H, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(H(beta)) > ROOT_HTOL:
        raise NoPositiveRoot(f"root refinement failed: H(beta) = {H(beta):.3g}")
    report.beta = beta
    if grid is None:
        grid = np.linspace(0.0, 1.5 * beta, 16)
    report.h_values = [(float(q), H(float(q))) for q in grid]
    return report


# --- Esscher tilt --------------------------------------------------------------


@dataclass(frozen=True)
class TiltedModel:
    """The model with V's law changed by the density M^beta = exp(-beta V_1)."""

    model: ModelPair
    beta: float
    m_tilde: float  # E~ log M = E M^beta log M, positive by Jensen


def esscher_tilt(model: ModelPair, beta: float) -> TiltedModel:
    h = evaluate_H(model, beta)
    if not abs(h) <= 1e-8:
        raise InvalidTilt(f"H(beta) = {h:.3g} is not zero")
    r = model.r
    c_v = model.v_drift - beta * r.diffusion_var
    if r.has_jumps:
        lam = r.jump_intensity * r.jump_law.neg_power_mean(beta)
        law = tilt(r.jump_law, beta)
        tilted_r = LevyTriplet.from_compound_drift(c_v + 0.5 * r.diffusion_var, r.diffusion_var, lam, law)
        mean_v = c_v + lam * law.log1p_mean()
    else:
        tilted_r = LevyTriplet(c_v + 0.5 * r.diffusion_var, r.diffusion_var)
        mean_v = c_v
    return TiltedModel(ModelPair(tilted_r, model.p), beta, -mean_v)


# --- config ------------------------------------------------------------------


def triplet_from_config(section: dict, prefix: str) -> LevyTriplet:
    if not isinstance(section, dict):
        raise ConfigError(prefix, "missing section")
    try:
        drift = float(section["drift"])
    except KeyError:
        raise ConfigError(f"{prefix}.drift", "missing") from None
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.drift", "not a number") from None
    try:
        sigma2 = float(section.get("sigma2", 0.0))
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.sigma2", "not a number") from None
    jump = section.get("jump", {}) or {}
    try:
        lam = float(jump.get("intensity", 0.0))
    except (TypeError, ValueError):
        raise ConfigError(f"{prefix}.jump.intensity", "not a number") from None
    law_name = jump.get("law", "none")
    try:
        law = law_from_config(law_name, jump.get("params"))
    except KeyError as exc:
        key = "law" if str(exc).strip("'") == str(law_name) else "params"
        raise ConfigError(f"{prefix}.jump.{key}", f"bad or missing entry {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}.jump.params", str(exc)) from None
    convention = section.get("drift_convention", "truncated")
    try:
        if convention == "truncated":
            return LevyTriplet(drift, sigma2, lam, law)
        if convention == "compound":
            return LevyTriplet.from_compound_drift(drift, sigma2, lam, law)
    except ValueError as exc:
        raise ConfigError(f"{prefix}.jump", str(exc)) from None
    raise ConfigError(f"{prefix}.drift_convention", f"unknown convention {convention!r}")


def model_from_config(cfg: dict) -> ModelPair:
    return ModelPair(triplet_from_config(cfg.get("r"), "r"), triplet_from_config(cfg.get("p"), "p"))


# convenience constructors used by presets and tests


def gbm_returns(a: float, sigma2: float) -> LevyTriplet:
    return LevyTriplet(a, sigma2)


def annuity_business(a0: float, intensity: float, law: JumpLaw, sigma2: float = 0.0) -> LevyTriplet:
    """P_t = -a0 t + sigma_P W + sum of positive jumps (negative risk sums)."""
    return LevyTriplet.from_compound_drift(-a0, sigma2, intensity, law)


def lundberg_business(premium: float, intensity: float, law: JumpLaw) -> LevyTriplet:
    """P_t = premium t - sum of claims."""
    neg = _negate(law)
    return LevyTriplet.from_compound_drift(premium, 0.0, intensity, neg)


def _negate(law: JumpLaw) -> JumpLaw:
    if isinstance(law, DiscreteAtoms):
        return DiscreteAtoms(tuple((-v, p) for v, p in law.atoms))
    return NegatedLaw(law)
