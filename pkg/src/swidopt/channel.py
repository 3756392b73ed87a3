"""Channel models in the SNR and rate domains, samplers, network generators.

Rates are in nats/s/Hz (natural-log capacity) and SNRs are linear power
ratios throughout; dB only appears at the CLI boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .numerics import DEFAULT_QUAD, QuadratureSpec, exp_scaled_e1, integrate


class Family(str, Enum):
    RAYLEIGH_SISO = "rayleigh_siso"


class NetworkKind(str, Enum):
    IDENTICAL = "identical"
    MODEL1 = "model1"
    MODEL2 = "model2"


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def rate_from_snr(snr):
    """AWGN capacity log(1 + snr) in nats."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr must be nonnegative")
    out = np.log1p(snr)
    return float(out) if out.ndim == 0 else out


def snr_from_rate(rate):
    rate = np.asarray(rate, dtype=float)
    out = np.expm1(rate)
    return float(out) if out.ndim == 0 else out


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class ChannelModel:
    """Fading law of one user's channel: family plus linear mean SNR."""

    mean_snr: float
    family: Family = Family.RAYLEIGH_SISO

    def __post_init__(self):
        if not (self.mean_snr > 0 and math.isfinite(self.mean_snr)):
            raise ValueError(f"mean SNR must be positive and finite, got {self.mean_snr}")
        object.__setattr__(self, "family", Family(self.family))

    def snr_pdf(self, snr):
        snr = np.asarray(snr, dtype=float)
        if np.any(snr < 0):
            raise ValueError("snr must be nonnegative")
        return _scalar_or_array(np.exp(-snr / self.mean_snr) / self.mean_snr)

    def snr_cdf(self, snr):
        snr = np.maximum(np.asarray(snr, dtype=float), 0.0)
        return _scalar_or_array(-np.expm1(-snr / self.mean_snr))

    def rate_distribution(self) -> "RayleighRate":
        return RayleighRate(self)


def snr_pdf(model: ChannelModel, snr):
    return model.snr_pdf(snr)


class RateDistribution:
    """Distribution of the achievable rate r >= 0 of one user.

    Subclasses supply ``pdf`` and ``cdf``.  ``partial_mean(t)``, the
    integral of r f(r) over [t, inf), falls back to quadrature; families
    with a closed form override it.
    """

    model: Optional[ChannelModel] = None
    quad: QuadratureSpec = DEFAULT_QUAD

    def pdf(self, r):
        raise NotImplementedError

    def cdf(self, r):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError(f"{type(self).__name__} has no sampler")

    def partial_mean(self, threshold: float) -> float:
        if threshold == math.inf:
            return 0.0
        if threshold < 0:
            raise ValueError("threshold must be nonnegative")
        return integrate(lambda r: r * self.pdf(r), threshold, math.inf, self.quad)

    def mean(self) -> float:
        return self.partial_mean(0.0)


class RayleighRate(RateDistribution):
    """log(1 + gamma) with gamma exponential of mean ``model.mean_snr``."""

    def __init__(self, model: ChannelModel):
        if model.family is not Family.RAYLEIGH_SISO:
            raise ValueError(f"unsupported family {model.family}")
        self.model = model
        self.mean_snr = model.mean_snr

    def __repr__(self):
        return f"RayleighRate(mean_snr={self.mean_snr!r})"

    def __eq__(self, other):
        return isinstance(other, RayleighRate) and other.mean_snr == self.mean_snr

    def __hash__(self):
        return hash(("rayleigh", self.mean_snr))

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore"):
            out = np.exp(r - np.expm1(r) / self.mean_snr) / self.mean_snr
        out = np.where(r < 0, 0.0, out)
        return _scalar_or_array(out)

    def cdf(self, r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        with np.errstate(over="ignore"):
            out = -np.expm1(-np.expm1(r) / self.mean_snr)
        return _scalar_or_array(out)

    def sample(self, rng: np.random.Generator, size=None):
        # inverse CDF of the exponential SNR
        u = rng.random(size)
        return np.log1p(-self.mean_snr * np.log1p(-u))

    def partial_mean(self, threshold: float) -> float:
        if threshold == math.inf:
            return 0.0
        if threshold < 0:
            raise ValueError("threshold must be nonnegative")
        if threshold > 700.0:
            return 0.0
        g_star = math.expm1(threshold)
        if g_star / self.mean_snr > 745.0:
            return 0.0
        # e^{-g*/gbar} [log(1+g*) + e^{x} E1(x)], x = (1+g*)/gbar
        x = (1.0 + g_star) / self.mean_snr
        return math.exp(-g_star / self.mean_snr) * (threshold + exp_scaled_e1(x))

    def mean(self) -> float:
        return exp_scaled_e1(1.0 / self.mean_snr)


class GenericRate(RateDistribution):
    """Rate distribution given by callables; all moments by quadrature.

    Wrapping a closed-form distribution with ``GenericRate.of(dist)`` forces
    the quadrature path, which is how the two evaluation routes are
    cross-checked.
    """

    def __init__(self, pdf: Callable, cdf: Callable, sampler: Optional[Callable] = None,
                 model: Optional[ChannelModel] = None, quad: QuadratureSpec = DEFAULT_QUAD):
        self._pdf = pdf
        self._cdf = cdf
        self._sampler = sampler
        self.model = model
        self.quad = quad

    @classmethod
    def of(cls, dist: RateDistribution, quad: QuadratureSpec = DEFAULT_QUAD) -> "GenericRate":
        sampler = getattr(dist, "sample", None)
        return cls(dist.pdf, dist.cdf, sampler, model=dist.model, quad=quad)

    def pdf(self, r):
        return self._pdf(r)

    def cdf(self, r):
        return self._cdf(r)

    def sample(self, rng, size=None):
        if self._sampler is None:
            return super().sample(rng, size)
        return self._sampler(rng, size)


def as_rate_distribution(x) -> RateDistribution:
    if isinstance(x, RateDistribution):
        return x
    if isinstance(x, ChannelModel):
        return x.rate_distribution()
    raise TypeError(f"expected ChannelModel or RateDistribution, got {type(x).__name__}")


def rate_pdf(dist: RateDistribution, r):
    return dist.pdf(r)


def rate_cdf(dist: RateDistribution, r):
    return dist.cdf(r)


def sample_rate(dist: RateDistribution, rng: np.random.Generator, size=None):
    return dist.sample(rng, size)


@dataclass(frozen=True)
class NetworkSpec:
    users: int
    kind: NetworkKind = NetworkKind.MODEL1
    snr_min: float = 1.0
    snr_max: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NetworkKind(self.kind))
        if int(self.users) != self.users or self.users < 1:
            raise ValueError(f"user count must be a positive integer, got {self.users}")
        if not (self.snr_min > 0 and self.snr_max > 0):
            raise ValueError("SNR limits must be positive")
        if self.snr_min > self.snr_max:
            raise ValueError("snr_min must not exceed snr_max")


def build_network(spec: NetworkSpec) -> list[ChannelModel]:
    """Mean SNRs of users 1..M (1-based index, before any reordering)."""
    m = spec.users
    i = np.arange(1, m + 1)
    frac = (2 * i - 1) / (2 * m)
    if spec.kind is NetworkKind.IDENTICAL:
        snrs = np.full(m, float(spec.snr_max))
    elif spec.kind is NetworkKind.MODEL1:
        snrs = spec.snr_min + frac * (spec.snr_max - spec.snr_min)
    else:
        lo, hi = math.sqrt(spec.snr_min), math.sqrt(spec.snr_max)
        snrs = (lo + frac * (hi - lo)) ** 2
    return [ChannelModel(float(s)) for s in snrs]
