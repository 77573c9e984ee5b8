"""Transfer-time distribution family.

Every closed-form AAoI expression in this package reduces to expectations of
the form E[T^k e^{-lam*T}; a < T <= b] for k in {0, 1, 2}.  Each family
implements that primitive with a closed form where one exists; the base class
supplies an adaptive-quadrature fallback on the density, truncated at the
1 - 1e-12 quantile (safe because the integrands decay at least as fast as the
tail of T).  Discrete laws (Deterministic, Empirical) evaluate exact sums.

All distributions are immutable after construction and their expectation
methods are pure.  Sampling mutates only the numpy Generator passed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DegenerateConditioning, NonfiniteMoment

_TAIL_MASS = 1e-12
_QUAD_REL_TOL = 1e-9
_MIN_PROB = 1e-300


@dataclass(frozen=True)
class Moments:
    """First two raw moments (E[T], E[T^2]) of a transfer time."""

    m1: float
    m2: float

    def __post_init__(self):
        if not (math.isfinite(self.m1) and math.isfinite(self.m2)):
            raise NonfiniteMoment(f"moments not finite: {self}")
        if self.m1 <= 0 or self.m2 < self.m1 ** 2 - 1e-12 * self.m2:
            raise NonfiniteMoment(f"invalid moment pair: {self}")


def _poly_exp_integral(k: int, s: float, a: float, b: float) -> float:
    """Integral of t^k e^(-s t) over [a, b], for k in {0, 1, 2}, s >= 0."""
    if b <= a:
        return 0.0
    if s == 0.0:
        if math.isinf(b):
            raise NonfiniteMoment("divergent polynomial integral on unbounded support")
        return (b ** (k + 1) - a ** (k + 1)) / (k + 1)

    def antider(t):
        # -d/dt of this equals t^k e^(-s t)
        e = math.exp(-s * t)
        if k == 0:
            return e / s
        if k == 1:
            return e * (s * t + 1.0) / s ** 2
        return e * ((s * t) ** 2 + 2.0 * s * t + 2.0) / s ** 3

    upper = 0.0 if math.isinf(b) else antider(b)
    return antider(a) - upper


class TransferDistribution:
    """Base class: nonnegative transfer-time law T."""

    def mean(self) -> float:
        return self.weighted_moment(1, 0.0)

    def second_moment(self) -> float:
        return self.weighted_moment(2, 0.0)

    def moments(self) -> Moments:
        return Moments(self.mean(), self.second_moment())

    def weighted_moment(self, order: int, lam: float,
                        lo: float = 0.0, hi: float = math.inf) -> float:
        """E[T^order e^(-lam T); lo < T <= hi] with lam >= 0."""
        return self._weighted_moment_quad(order, lam, lo, hi)

    def _weighted_moment_quad(self, order, lam, lo=0.0, hi=math.inf):
        """Quadrature fallback (also the reference path in tests)."""
        a = max(lo, 0.0)
        b = min(hi, self.quantile(1.0 - _TAIL_MASS))
        if b <= a:
            return 0.0
        val, _ = integrate.quad(
            lambda t: t ** order * math.exp(-lam * t) * self.pdf(t),
            a, b, epsabs=1e-14, epsrel=_QUAD_REL_TOL, limit=200)
        if not math.isfinite(val):
            raise NonfiniteMoment(f"divergent integral for {self!r}")
        return val

    def pdf(self, x: float) -> float:
        raise NotImplementedError

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def prob_below(self, x: float) -> float:
        """P(T < x); differs from cdf(x) only for laws with atoms."""
        return self.cdf(x)

    def quantile(self, p: float) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(TransferDistribution):
    rate: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def weighted_moment(self, order, lam, lo=0.0, hi=math.inf):
        s = lam + self.rate
        return self.rate * _poly_exp_integral(order, s, max(lo, 0.0), hi)

    def pdf(self, x):
        return self.rate * math.exp(-self.rate * x) if x >= 0 else 0.0

    def cdf(self, x):
        return 1.0 - math.exp(-self.rate * x) if x > 0 else 0.0

    def quantile(self, p):
        return -math.log1p(-p) / self.rate

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class HyperExponential(TransferDistribution):
    """Mixture of exponentials: branch i has weight p_i and rate mu_i."""

    branches: tuple  # tuple of (weight, rate)

    def __post_init__(self):
        branches = tuple((float(p), float(mu)) for p, mu in self.branches)
        object.__setattr__(self, "branches", branches)
        if not branches:
            raise ValueError("need at least one branch")
        if any(p < 0 or mu <= 0 for p, mu in branches):
            raise ValueError("weights must be >= 0 and rates positive")
        if abs(sum(p for p, _ in branches) - 1.0) > 1e-12:
            raise ValueError("branch weights must sum to 1")

    def weighted_moment(self, order, lam, lo=0.0, hi=math.inf):
        a = max(lo, 0.0)
        return sum(p * mu * _poly_exp_integral(order, lam + mu, a, hi)
                   for p, mu in self.branches)

    def pdf(self, x):
        if x < 0:
            return 0.0
        return sum(p * mu * math.exp(-mu * x) for p, mu in self.branches)

    def cdf(self, x):
        if x <= 0:
            return 0.0
        return sum(p * (1.0 - math.exp(-mu * x)) for p, mu in self.branches)

    def quantile(self, p):
        if p <= 0:
            return 0.0
        # bisection on the monotone mixture CDF
        hi = max(-math.log1p(-p) / mu for _, mu in self.branches) + 1.0
        while self.cdf(hi) < p:
            hi *= 2.0
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def sample(self, rng, size=None):
        probs = np.array([p for p, _ in self.branches])
        rates = np.array([mu for _, mu in self.branches])
        idx = rng.choice(len(rates), size=size, p=probs / probs.sum())
        return rng.exponential(1.0 / rates[idx])


@dataclass(frozen=True)
class Uniform(TransferDistribution):
    """Uniform on (0, width)."""

    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")

    def weighted_moment(self, order, lam, lo=0.0, hi=math.inf):
        a = max(lo, 0.0)
        b = min(hi, self.width)
        return _poly_exp_integral(order, lam, a, b) / self.width

    def pdf(self, x):
        return 1.0 / self.width if 0.0 < x < self.width else 0.0

    def cdf(self, x):
        return min(max(x / self.width, 0.0), 1.0)

    def quantile(self, p):
        return p * self.width

    def sample(self, rng, size=None):
        return rng.uniform(0.0, self.width, size)


@dataclass(frozen=True)
class Erlang(TransferDistribution):
    shape: int
    rate: float

    def __post_init__(self):
        if self.shape < 1 or int(self.shape) != self.shape:
            raise ValueError("shape must be a positive integer")
        if self.rate <= 0:
            raise ValueError("rate must be positive")

    def weighted_moment(self, order, lam, lo=0.0, hi=math.inf):
        m, nu = self.shape, self.rate
        s = lam + nu
        a = max(lo, 0.0)
        mass = special.gammainc(m + order, s * hi) if math.isfinite(hi) else 1.0
        mass -= special.gammainc(m + order, s * a)
        coef = nu ** m * math.gamma(m + order) / (math.gamma(m) * s ** (m + order))
        return coef * mass

    def pdf(self, x):
        if x <= 0:
            return 0.0
        m, nu = self.shape, self.rate
        return nu ** m * x ** (m - 1) * math.exp(-nu * x) / math.gamma(m)

    def cdf(self, x):
        return float(special.gammainc(self.shape, self.rate * x)) if x > 0 else 0.0

    def quantile(self, p):
        return float(special.gammaincinv(self.shape, p)) / self.rate

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True)
class Weibull(TransferDistribution):
    scale: float
    shape: float

    def __post_init__(self):
        if self.scale <= 0 or self.shape <= 0:
            raise ValueError("scale and shape must be positive")

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def second_moment(self):
        return self.scale ** 2 * math.gamma(1.0 + 2.0 / self.shape)

    def pdf(self, x):
        if x <= 0:
            return 0.0
        z = x / self.scale
        return (self.shape / self.scale) * z ** (self.shape - 1) * math.exp(-z ** self.shape)

    def cdf(self, x):
        return 1.0 - math.exp(-((x / self.scale) ** self.shape)) if x > 0 else 0.0

    def quantile(self, p):
        return self.scale * (-math.log1p(-p)) ** (1.0 / self.shape)

    def sample(self, rng, size=None):
        return self.scale * rng.weibull(self.shape, size)


@dataclass(frozen=True)
class LogNormal(TransferDistribution):
    log_mean: float
    log_sd: float

    def __post_init__(self):
        if self.log_sd <= 0:
            raise ValueError("log-sd must be positive")

    def mean(self):
        return math.exp(self.log_mean + 0.5 * self.log_sd ** 2)

    def second_moment(self):
        return math.exp(2.0 * self.log_mean + 2.0 * self.log_sd ** 2)

    def pdf(self, x):
        if x <= 0:
            return 0.0
        z = (math.log(x) - self.log_mean) / self.log_sd
        return math.exp(-0.5 * z * z) / (x * self.log_sd * math.sqrt(2.0 * math.pi))

    def cdf(self, x):
        if x <= 0:
            return 0.0
        return float(special.ndtr((math.log(x) - self.log_mean) / self.log_sd))

    def quantile(self, p):
        return math.exp(self.log_mean + self.log_sd * float(special.ndtri(p)))

    def sample(self, rng, size=None):
        return rng.lognormal(self.log_mean, self.log_sd, size)


@dataclass(frozen=True)
class Deterministic(TransferDistribution):
    value: float

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError("value must be positive")

    def weighted_moment(self, order, lam, lo=0.0, hi=math.inf):
        c = self.value
        if lo < c <= hi:
            return c ** order * math.exp(-lam * c)
        return 0.0

    def cdf(self, x):
        return 1.0 if x >= self.value else 0.0

    def prob_below(self, x):
        return 1.0 if x > self.value else 0.0

    def quantile(self, p):
        return self.value

    def sample(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)


@dataclass(frozen=True)
class Empirical(TransferDistribution):
    """Finite-support escape hatch; expectations are exact sample averages."""

    samples: tuple

    def __post_init__(self):
        samples = tuple(float(x) for x in self.samples)
        object.__setattr__(self, "samples", samples)
        if not samples:
            raise ValueError("need at least one sample")
        if any(x < 0 or not math.isfinite(x) for x in samples):
            raise ValueError("samples must be finite and nonnegative")
        if max(samples) <= 0:
            raise NonfiniteMoment("degenerate empirical law with zero mean")

    def weighted_moment(self, order, lam, lo=0.0, hi=math.inf):
        xs = np.asarray(self.samples)
        mask = (xs > lo) & (xs <= hi)
        return float(np.mean(np.where(mask, xs ** order * np.exp(-lam * xs), 0.0)))

    def cdf(self, x):
        return float(np.mean(np.asarray(self.samples) <= x))

    def prob_below(self, x):
        return float(np.mean(np.asarray(self.samples) < x))

    def quantile(self, p):
        return float(np.quantile(np.asarray(self.samples), p, method="inverted_cdf"))

    def sample(self, rng, size=None):
        return rng.choice(np.asarray(self.samples), size=size)


# --- spec-level operations -------------------------------------------------

def moments(dist: TransferDistribution) -> Moments:
    """(E[T], E[T^2]) of the transfer law."""
    return dist.moments()


def exp_weighted_moment(dist: TransferDistribution, lam: float, order: int) -> float:
    """E[T^order e^(-lam T)]; order 0 is gamma = P(T <= xi), xi ~ Exp(lam)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    return dist.weighted_moment(order, lam)


def restricted_mean(dist: TransferDistribution, theta: float, side: str) -> float:
    """E[T; T <= theta] (side='below') or E[T; T > theta] (side='above')."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if side == "below":
        return dist.weighted_moment(1, 0.0, hi=theta)
    if side == "above":
        return dist.weighted_moment(1, 0.0, lo=theta)
    raise ValueError(f"unknown side {side!r}")


def conditional_restricted_mean(dist: TransferDistribution, lam: float,
                                theta: float, side: str) -> float:
    """E[T; side condition | T <= xi] with xi ~ Exp(lam)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    gamma = dist.weighted_moment(0, lam)
    if gamma < _MIN_PROB:
        raise DegenerateConditioning("P(T <= xi) underflowed")
    if side == "below":
        num = dist.weighted_moment(1, lam, hi=theta)
    elif side == "above":
        num = dist.weighted_moment(1, lam, lo=theta)
    else:
        raise ValueError(f"unknown side {side!r}")
    return num / gamma


def sample(dist: TransferDistribution, rng: np.random.Generator, size=None):
    """Draw from the transfer law using the caller's generator."""
    return dist.sample(rng, size)


# --- config parsing --------------------------------------------------------

def from_spec(spec: dict) -> TransferDistribution:
    """Build a distribution from a tagged config record.

    Examples: {kind: exponential, rate: 2}, {kind: uniform, width: 1.5},
    {kind: hyperexponential, branches: [[0.3, 1.0], [0.7, 4.0]]},
    {kind: empirical, path: samples.txt} or {kind: empirical, samples: [...]}.
    """
    spec = dict(spec)
    kind = str(spec.pop("kind", "")).lower().replace("-", "").replace("_", "")
    if kind == "exponential":
        return Exponential(rate=float(spec["rate"]))
    if kind in ("hyperexponential", "hyperexp"):
        return HyperExponential(branches=tuple(tuple(b) for b in spec["branches"]))
    if kind == "uniform":
        return Uniform(width=float(spec["width"]))
    if kind == "weibull":
        return Weibull(scale=float(spec["scale"]), shape=float(spec["shape"]))
    if kind == "erlang":
        return Erlang(shape=int(spec["shape"]), rate=float(spec["rate"]))
    if kind == "lognormal":
        return LogNormal(log_mean=float(spec["log_mean"]), log_sd=float(spec["log_sd"]))
    if kind == "deterministic":
        return Deterministic(value=float(spec["value"]))
    if kind == "empirical":
        if "path" in spec:
            with open(spec["path"]) as fh:
                samples = [float(line) for line in fh if line.strip()]
        else:
            samples = spec["samples"]
        return Empirical(samples=tuple(samples))
    raise ValueError(f"unknown distribution kind {kind!r}")
