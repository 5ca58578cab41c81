"""Parametric jump laws for compound-Poisson parts.

A law describes the distribution of a single jump ``eta``.  When the law is
attached to the returns process R, ``eta > -1`` and the quantities of interest
are transforms of ``log(1 + eta)``; when attached to the business process P,
only the plain moments matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, special, stats

from .errors import UnsupportedJumpLaw

INF = math.inf
_QUAD = dict(epsabs=1e-13, epsrel=1e-11, limit=400)
_ATOM_SUM_TOL = 1e-12


def _quad(f: Callable[[float], float], a: float, b: float, **kw) -> float:
    opts = dict(_QUAD)
    opts.update(kw)
    value, err = integrate.quad(f, a, b, **opts)
    if not math.isfinite(value) or err > max(1e-10, 1e-8 * abs(value)):
        raise UnsupportedJumpLaw(f"quadrature did not converge (value={value}, err={err})")
    return value


class JumpLaw:
    """Interface shared by every jump law."""

    name = "abstract"

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def sample_log1p(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.log1p(self.sample(rng, size))

    def expect(self, f: Callable[[float], float]) -> float:
        raise NotImplementedError

    # support description
    def support(self) -> Tuple[float, float]:
        raise NotImplementedError

    def has_negative(self) -> bool:
        return self.support()[0] < 0

    def has_positive(self) -> bool:
        return self.support()[1] > 0

    # transforms of log(1 + eta)
    def log1p_domain(self) -> Tuple[float, float]:
        """Open interval of q on which E(1 + eta)^(-q) is finite."""
        return (-INF, INF)

    def neg_power_mean(self, q: float) -> float:
        lo, hi = self.log1p_domain()
        if not lo < q < hi:
            return INF
        return self.expect(lambda x: (1.0 + x) ** (-q))

    def log1p_mean(self) -> float:
        return self.expect(math.log1p)

    def log1p_trunc_mean(self) -> float:
        """E[h(log(1 + eta))] with h(y) = y 1{|y| <= 1}."""
        return self.expect(lambda x: _h(math.log1p(x)))

    def tilted_log1p_mean(self, beta: float) -> float:
        """E[(1 + eta)^(-beta) log(1 + eta)]."""
        return self.expect(lambda x: (1.0 + x) ** (-beta) * math.log1p(x))

    # plain moments
    def trunc_mean(self) -> float:
        """E[h(eta)] with h(x) = x 1{|x| <= 1}."""
        return self.expect(_h)

    def abs_moment(self, p: float) -> float:
        return self.expect(lambda x: abs(x) ** p)

    def to_config(self) -> dict:
        raise NotImplementedError


def _h(x: float) -> float:
    return x if abs(x) <= 1.0 else 0.0


@dataclass(frozen=True)
class ExponentialPositive(JumpLaw):
    rate: float
    name = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def support(self):
        return (0.0, INF)

    def has_negative(self):
        return False

    def pdf(self, x):
        return self.rate * math.exp(-self.rate * x)

    def expect(self, f):
        return _quad(lambda x: f(x) * self.pdf(x), 0.0, INF)

    def neg_power_mean(self, q):
        if q == 0:
            return 1.0
        r = self.rate
        return _quad(lambda x: r * math.exp(-r * x) * (1.0 + x) ** (-q), 0.0, INF)

    def log1p_mean(self):
        return math.exp(self.rate) * special.exp1(self.rate)

    def log1p_trunc_mean(self):
        r = self.rate
        return _quad(lambda x: math.log1p(x) * r * math.exp(-r * x), 0.0, math.e - 1.0)

    def trunc_mean(self):
        r = self.rate
        return (1.0 - (1.0 + r) * math.exp(-r)) / r

    def abs_moment(self, p):
        return math.gamma(p + 1.0) / self.rate**p

    def to_config(self):
        return {"law": self.name, "params": {"rate": self.rate}}


@dataclass(frozen=True)
class ShiftedLognormal(JumpLaw):
    """eta = exp(N(mu, s^2)) - 1, so log(1 + eta) is Gaussian."""

    mu: float
    s: float
    name = "lognormal"

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("lognormal s must be positive")

    def sample(self, rng, size):
        return np.expm1(self.sample_log1p(rng, size))

    def sample_log1p(self, rng, size):
        return self.mu + self.s * rng.standard_normal(size)

    def support(self):
        return (-1.0, INF)

    def expect(self, f):
        mu, s = self.mu, self.s
        return _quad(lambda z: f(math.expm1(mu + s * z)) * stats.norm.pdf(z), -40.0, 40.0)

    def neg_power_mean(self, q):
        return math.exp(-q * self.mu + 0.5 * q * q * self.s * self.s)

    def log1p_mean(self):
        return self.mu

    def log1p_trunc_mean(self):
        mu, s = self.mu, self.s
        a, b = (-1.0 - mu) / s, (1.0 - mu) / s
        return mu * (stats.norm.cdf(b) - stats.norm.cdf(a)) + s * (stats.norm.pdf(a) - stats.norm.pdf(b))

    def tilted_log1p_mean(self, beta):
        mu, s = self.mu, self.s
        return self.neg_power_mean(beta) * (mu - beta * s * s)

    def trunc_mean(self):
        mu, s = self.mu, self.s
        c = math.log(2.0)
        return math.exp(mu + 0.5 * s * s) * stats.norm.cdf((c - mu - s * s) / s) - stats.norm.cdf((c - mu) / s)

    def to_config(self):
        return {"law": self.name, "params": {"mu": self.mu, "s": self.s}}


@dataclass(frozen=True)
class ParetoPositive(JumpLaw):
    """Density alpha x_min^alpha / x^(alpha + 1) on [x_min, inf)."""

    alpha: float
    x_min: float
    name = "pareto"

    def __post_init__(self):
        if not (self.alpha > 0 and self.x_min > 0):
            raise ValueError("pareto alpha and x_min must be positive")

    def sample(self, rng, size):
        return self.x_min * rng.random(size) ** (-1.0 / self.alpha)

    def support(self):
        return (self.x_min, INF)

    def has_negative(self):
        return False

    def expect(self, f):
        # x = x_min / t maps the law to density alpha t^(alpha-1) on (0, 1]
        a, xm = self.alpha, self.x_min
        return _quad(lambda t: a * t ** (a - 1.0) * f(xm / t), 0.0, 1.0)

    def log1p_domain(self):
        return (-self.alpha, INF)

    def neg_power_mean(self, q):
        a, xm = self.alpha, self.x_min
        if q <= -a:
            return INF
        if q == 0:
            return 1.0
        val = _quad(lambda t: (t + xm) ** (-q), 0.0, 1.0, weight="alg", wvar=(a + q - 1.0, 0.0))
        return a * val

    def tilted_log1p_mean(self, beta):
        if beta <= -self.alpha:
            return INF
        return super().tilted_log1p_mean(beta)

    def trunc_mean(self):
        a, xm = self.alpha, self.x_min
        if xm >= 1.0:
            return 0.0
        if a == 1.0:
            return a * xm * math.log(1.0 / xm)
        return a * xm**a * (1.0 - xm ** (1.0 - a)) / (1.0 - a)

    def log1p_trunc_mean(self):
        a, xm = self.alpha, self.x_min
        top = math.e - 1.0
        if xm >= top:
            return 0.0
        return _quad(lambda x: math.log1p(x) * a * xm**a * x ** (-a - 1.0), xm, top)

    def abs_moment(self, p):
        a, xm = self.alpha, self.x_min
        if p >= a:
            return INF
        return a * xm**p / (a - p)

    def to_config(self):
        return {"law": self.name, "params": {"alpha": self.alpha, "x_min": self.x_min}}


@dataclass(frozen=True)
class DiscreteAtoms(JumpLaw):
    """Finitely many atoms ``((value, probability), ...)``."""

    atoms: Tuple[Tuple[float, float], ...]
    name = "atoms"

    def __post_init__(self):
        atoms = tuple((float(v), float(p)) for v, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ValueError("atoms law needs at least one atom")
        probs = [p for _, p in atoms]
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError("atom probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > _ATOM_SUM_TOL:
            raise ValueError(f"atom probabilities sum to {sum(probs)!r}, not 1")

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.atoms])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    def sample(self, rng, size):
        idx = np.searchsorted(np.cumsum(self.probs)[:-1], rng.random(size), side="right")
        return self.values[idx]

    def sample_log1p(self, rng, size):
        idx = np.searchsorted(np.cumsum(self.probs)[:-1], rng.random(size), side="right")
        return np.log1p(self.values)[idx]

    def support(self):
        vals = [v for v, p in self.atoms if p > 0]
        return (min(vals), max(vals))

    def expect(self, f):
        return math.fsum(p * f(v) for v, p in self.atoms if p > 0)

    def neg_power_mean(self, q):
        if self.support()[0] <= -1.0:
            return INF
        return self.expect(lambda x: (1.0 + x) ** (-q))

    def to_config(self):
        return {"law": self.name, "params": {"atoms": [list(a) for a in self.atoms]}}


@dataclass(frozen=True)
class TiltedLaw(JumpLaw):
    """``base`` reweighted by (1 + eta)^(-beta) / E(1 + eta)^(-beta).

    Only used for positive-support bases with beta > 0, where the weight is
    bounded by one and rejection sampling is exact.
    """

    base: JumpLaw
    beta: float
    name = "tilted"

    def __post_init__(self):
        if self.beta < 0 or self.base.has_negative():
            raise UnsupportedJumpLaw("rejection tilt needs beta >= 0 and positive support")

    @property
    def norm(self) -> float:
        return self.base.neg_power_mean(self.beta)

    def sample(self, rng, size):
        n = int(np.prod(size)) if np.ndim(size) else int(size)
        out = np.empty(n)
        filled = 0
        while filled < n:
            want = max(64, int(1.2 * (n - filled) / self.norm))
            cand = self.base.sample(rng, want)
            keep = cand[rng.random(want) < (1.0 + cand) ** (-self.beta)]
            take = min(keep.size, n - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
        return out.reshape(size)

    def support(self):
        return self.base.support()

    def has_negative(self):
        return False

    def expect(self, f):
        b = self.beta
        return self.base.expect(lambda x: f(x) * (1.0 + x) ** (-b)) / self.norm

    def log1p_domain(self):
        lo, hi = self.base.log1p_domain()
        return (lo - self.beta, hi - self.beta)

    def neg_power_mean(self, q):
        return self.base.neg_power_mean(q + self.beta) / self.norm

    def tilted_log1p_mean(self, beta):
        return self.base.tilted_log1p_mean(beta + self.beta) / self.norm

    def log1p_mean(self):
        return self.base.tilted_log1p_mean(self.beta) / self.norm

    def to_config(self):
        return {"law": self.name, "params": {"beta": self.beta, "base": self.base.to_config()}}


@dataclass(frozen=True)
class NegatedLaw(JumpLaw):
    """Law of -xi for a positive-support law xi (claims paid out)."""

    base: JumpLaw
    name = "negated"

    def sample(self, rng, size):
        return -self.base.sample(rng, size)

    def expect(self, f):
        return self.base.expect(lambda x: f(-x))

    def support(self):
        lo, hi = self.base.support()
        return (-hi, -lo)

    def trunc_mean(self):
        return -self.base.trunc_mean()

    def abs_moment(self, p):
        return self.base.abs_moment(p)

    def to_config(self):
        return {"law": self.name, "params": {"base": self.base.to_config()}}


def tilt(law: JumpLaw, beta: float) -> JumpLaw:
    """Law of eta under the (1 + eta)^(-beta) reweighting, closed form when possible."""
    if isinstance(law, ShiftedLognormal):
        return ShiftedLognormal(law.mu - beta * law.s * law.s, law.s)
    if isinstance(law, DiscreteAtoms):
        w = np.array([p * (1.0 + v) ** (-beta) for v, p in law.atoms])
        w = w / w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        return DiscreteAtoms(tuple((v, float(p)) for (v, _), p in zip(law.atoms, w)))
    if isinstance(law, TiltedLaw):
        return TiltedLaw(law.base, law.beta + beta)
    return TiltedLaw(law, beta)


_LAWS = {
    "exponential": lambda p: ExponentialPositive(float(p["rate"])),
    "lognormal": lambda p: ShiftedLognormal(float(p["mu"]), float(p["s"])),
    "pareto": lambda p: ParetoPositive(float(p["alpha"]), float(p["x_min"])),
    "atoms": lambda p: DiscreteAtoms(tuple(tuple(a) for a in p["atoms"])),
}


def law_from_config(name: str, params: dict | None) -> JumpLaw | None:
    name = (name or "none").lower()
    if name == "none":
        return None
    if name == "negated":
        base = params["base"]
        return NegatedLaw(law_from_config(base["law"], base.get("params")))
    if name == "tilted":
        base = params["base"]
        return TiltedLaw(law_from_config(base["law"], base.get("params")), float(params["beta"]))
    if name not in _LAWS:
        raise KeyError(name)
    return _LAWS[name](params or {})
