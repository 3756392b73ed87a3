import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as spi, stats
from scipy.special import exp1

from swidopt.channel import (ChannelModel, GenericRate, NetworkKind, NetworkSpec, RayleighRate,
                             build_network, db_to_linear, linear_to_db, rate_cdf, rate_from_snr,
                             rate_pdf, sample_rate, snr_from_rate, snr_pdf)

snr_values = st.floats(0.05, 200.0)


def quad_partial_mean(g, r0):
    def f(r):
        if r > 700:
            return 0.0
        return r * math.exp(r - math.expm1(r) / g) / g
    val, _ = spi.quad(f, r0, r0 + 40.0, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


def test_rate_snr_roundtrip():
    assert rate_from_snr(0.0) == 0.0
    assert rate_from_snr(math.e - 1) == pytest.approx(1.0, rel=1e-15)
    assert snr_from_rate(rate_from_snr(6.5)) == pytest.approx(6.5, rel=1e-14)
    with pytest.raises(ValueError):
        rate_from_snr(-0.1)


def test_db_conversion():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(-10.0) == pytest.approx(0.1)
    assert linear_to_db(100.0) == pytest.approx(20.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_channel_rejects_bad_mean(bad):
    with pytest.raises(ValueError):
        ChannelModel(bad)


def test_snr_pdf_is_exponential():
    m = ChannelModel(4.0)
    x = np.array([0.0, 1.0, 10.0])
    assert np.allclose(snr_pdf(m, x), stats.expon(scale=4.0).pdf(x), rtol=1e-14)
    assert np.allclose(m.snr_cdf(x), stats.expon(scale=4.0).cdf(x), rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(snr_values)
def test_rate_pdf_integrates_to_one(g):
    d = RayleighRate(ChannelModel(g))
    total, _ = spi.quad(lambda r: float(d.pdf(r)), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(snr_values, st.floats(0.0, 8.0))
def test_rate_cdf_matches_snr_cdf(g, r):
    d = RayleighRate(ChannelModel(g))
    assert float(d.cdf(r)) == pytest.approx(1 - math.exp(-math.expm1(r) / g), abs=1e-14)


def test_rate_cdf_monotone_and_limits():
    d = ChannelModel(10.0).rate_distribution()
    r = np.linspace(0, 10, 500)
    c = rate_cdf(d, r)
    assert c[0] == 0.0
    assert np.all(np.diff(c) >= 0)
    assert float(d.cdf(50.0)) == 1.0


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("r0", [0.0, 0.3, 1.7, 4.0])
def test_partial_mean_matches_quadrature(g, r0):
    d = RayleighRate(ChannelModel(g))
    assert d.partial_mean(r0) == pytest.approx(quad_partial_mean(g, r0), rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0, 100.0])
def test_generic_path_agrees_with_closed_form(g):
    d = RayleighRate(ChannelModel(g))
    gen = GenericRate.of(d)
    for r0 in (0.0, 0.5, 2.0, 5.0):
        assert gen.partial_mean(r0) == pytest.approx(d.partial_mean(r0), rel=1e-7, abs=1e-14)


def test_mean_rate_reference():
    # e^{1/g} E1(1/g) at g = 1
    d = ChannelModel(1.0).rate_distribution()
    assert d.mean() == pytest.approx(math.e * exp1(1.0), rel=1e-12)
    assert d.mean() == pytest.approx(0.5963, abs=1e-4)
    assert d.partial_mean(0.0) == pytest.approx(d.mean(), rel=1e-13)


def test_partial_mean_far_tail_is_zero():
    d = ChannelModel(1.0).rate_distribution()
    assert d.partial_mean(800.0) == 0.0
    assert d.partial_mean(math.inf) == 0.0


def test_sampling_ks(rng):
    d = ChannelModel(3.0).rate_distribution()
    x = sample_rate(d, rng, 20000)
    assert stats.kstest(x, lambda r: rate_cdf(d, r)).pvalue > 1e-3
    assert np.all(x >= 0)


def test_rate_pdf_nonnegative():
    d = ChannelModel(0.2).rate_distribution()
    assert np.all(rate_pdf(d, np.linspace(0, 20, 200)) >= 0)


def test_rayleigh_equality_and_hash():
    a = ChannelModel(2.0).rate_distribution()
    b = RayleighRate(ChannelModel(2.0))
    assert a == b and hash(a) == hash(b)
    assert a != ChannelModel(3.0).rate_distribution()


def test_network_model1_and_model2():
    m1 = build_network(NetworkSpec(2, NetworkKind.MODEL1, 1.0, 100.0))
    assert [c.mean_snr for c in m1] == pytest.approx([25.75, 75.25])
    m2 = build_network(NetworkSpec(2, NetworkKind.MODEL2, 1.0, 100.0))
    assert [c.mean_snr for c in m2] == pytest.approx([3.25 ** 2, 7.75 ** 2])
    same = build_network(NetworkSpec(3, NetworkKind.IDENTICAL, 1.0, 100.0))
    assert [c.mean_snr for c in same] == [100.0] * 3


@given(st.integers(1, 40), st.sampled_from([NetworkKind.MODEL1, NetworkKind.MODEL2]))
def test_network_within_limits_and_increasing(m, kind):
    snrs = [c.mean_snr for c in build_network(NetworkSpec(m, kind, 1.0, 100.0))]
    assert all(1.0 <= s <= 100.0 for s in snrs)
    assert all(a < b for a, b in zip(snrs, snrs[1:]))


@pytest.mark.parametrize("kwargs", [dict(users=0), dict(users=2, snr_min=0.0),
                                    dict(users=2, snr_min=10.0, snr_max=1.0)])
def test_network_spec_validation(kwargs):
    with pytest.raises(ValueError):
        NetworkSpec(**kwargs)
