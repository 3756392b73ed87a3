"""Full-feedback selection diversity: the base station serves
argmax_i mu_i r_i every resource unit."""
from __future__ import annotations

import math
from math import comb
from typing import Sequence

import numpy as np
from scipy import optimize

from .analytics import PerformanceReport, Provenance
from .channel import ChannelModel, RayleighRate, as_rate_distribution
from .numerics import DEFAULT_QUAD, NumericalError, QuadratureSpec, exp_scaled_e1, integrate

# above this many users the alternating binomial sum loses too many digits
_ALTERNATING_SUM_MAX_USERS = 30


def _winning_density(dists, weights, i):
    """f_i(r) prod_{j != i} F_j(mu_i r / mu_j) as a vectorized callable."""
    mu_i = weights[i]
    others = [(d, weights[j]) for j, d in enumerate(dists) if j != i]

    def g(r):
        out = np.asarray(dists[i].pdf(r), dtype=float)
        for d, mu_j in others:
            out = out * d.cdf(mu_i * r / mu_j)
        return out
    return g


def seld_rates(models: Sequence, weights: Sequence[float] | None = None,
               ids: Sequence | None = None, spec: QuadratureSpec = DEFAULT_QUAD) -> PerformanceReport:
    """Expected rates and access ratios under weighted max-rate selection.

    Integrates in the rate domain, where the competitors' CDFs are
    evaluated at mu_i r / mu_j rather than at (1+gamma)^(mu_i/mu_j) - 1.
    """
    dists = [as_rate_distribution(m) for m in models]
    m = len(dists)
    if m == 0:
        raise ValueError("need at least one user")
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != m:
        raise ValueError(f"{len(w)} weights for {m} users")
    if np.any(~(w > 0)):
        raise ValueError("selection weights must be positive; drop zero-weight users first")
    rates = np.empty(m)
    access = np.empty(m)
    for i in range(m):
        g = _winning_density(dists, w, i)
        access[i] = integrate(g, 0.0, math.inf, spec)
        rates[i] = integrate(lambda r, g=g: r * g(r), 0.0, math.inf, spec)
    return PerformanceReport(
        user_ids=[str(k + 1) for k in range(m)] if ids is None else [str(x) for x in ids],
        rates=rates,
        access=access,
        conditional=rates.copy(),
        success=access.copy(),
        weights=w,
        provenance=Provenance.ANALYTIC_SELD,
    )


def seld_rates_with_zeros(models: Sequence, weights: Sequence[float], ids=None,
                          spec: QuadratureSpec = DEFAULT_QUAD) -> PerformanceReport:
    """``seld_rates`` that accepts zero weights: those users are never served."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("weights must be nonnegative and not all zero")
    live = np.flatnonzero(w > 0)
    sub = seld_rates([models[k] for k in live], w[live], spec=spec)
    m = len(models)
    rates = np.zeros(m)
    access = np.zeros(m)
    rates[live] = sub.rates
    access[live] = sub.access
    return PerformanceReport(
        user_ids=[str(k + 1) for k in range(m)] if ids is None else [str(x) for x in ids],
        rates=rates, access=access, conditional=rates.copy(), success=access.copy(),
        weights=w, provenance=Provenance.ANALYTIC_SELD)


def seld_iid_sum_capacity(mean_snr: float, users: int) -> float:
    """Sum capacity of max-rate selection over i.i.d. Rayleigh users.

    sum_{i=1}^M (-1)^{i-1} C(M, i) e^{i/g} E1(i/g), summed exactly with
    fsum.  Beyond 30 users the alternating sum is replaced by quadrature
    of r d(F^M).
    """
    if users < 1 or int(users) != users:
        raise ValueError("user count must be a positive integer")
    if not mean_snr > 0:
        raise ValueError("mean SNR must be positive")
    if users > _ALTERNATING_SUM_MAX_USERS:
        return _iid_sum_capacity_quadrature(mean_snr, users)
    terms = [(-1) ** (i - 1) * comb(users, i) * exp_scaled_e1(i / mean_snr)
             for i in range(1, users + 1)]
    return math.fsum(terms)


def _iid_sum_capacity_quadrature(mean_snr: float, users: int) -> float:
    d = RayleighRate(ChannelModel(mean_snr))
    spec = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-11, max_subdivisions=200)
    return integrate(lambda r: r * users * d.cdf(r) ** (users - 1) * d.pdf(r), 0.0, math.inf, spec)


def seld_proportional_fair(models: Sequence, ids=None, tol: float = 1e-10) -> PerformanceReport:
    """Selection with weights mu_i = 1/R_i, R being the rates it produces.

    Solved as mu_i R_i(mu) = mu_M R_M(mu) for i < M in log-weight space,
    starting from mu_i = 1 / (mean rate of i).
    """
    dists = [as_rate_distribution(x) for x in models]
    m = len(dists)
    if m == 1:
        return seld_rates(dists, [1.0], ids=ids)
    x0 = -np.log([d.mean() for d in dists])
    x0 = x0[:-1] - x0[-1]

    def weights(x):
        return np.exp(np.append(x, 0.0))

    def residual(x):
        w = weights(x)
        rep = seld_rates(dists, w)
        u = np.log(w * rep.rates)
        return u[:-1] - u[-1]

    sol = optimize.root(residual, x0, method="hybr", tol=tol)
    if not sol.success or np.max(np.abs(residual(sol.x))) > 1e-8:
        raise NumericalError(f"proportional-fair selection weights did not converge: {sol.message}")
    return seld_rates(dists, weights(sol.x), ids=ids)
