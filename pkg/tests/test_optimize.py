import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as spi
from scipy.special import exp1

from swidopt.analytics import NEVER_FLAG, Scenario, expected_rates
from swidopt.channel import ChannelModel
from swidopt.numerics import BracketError
from swidopt.optimize import (DegenerateThresholdWarning, Objective, ObjectiveKind,
                              gradients_agree, max_weighted_sum, objective_gradient,
                              objective_gradient_fd, optimize_pf, optimize_weighted_sum,
                              pf_statistic, pf_threshold, pf_thresholds, rate_jacobian,
                              rate_jacobian_fd, rate_jacobian_ratio_form,
                              stationarity_residual, thresholds_by_sum_form,
                              weighted_sum_thresholds)


def iid(g, m):
    return Scenario.from_models([ChannelModel(g)] * m)


def pf_stat_oracle(g, r):
    """r F(r) / C(r) with C from scipy quadrature."""
    def f(x):
        return x * math.exp(x - math.expm1(x) / g) / g if x < 700 else 0.0
    c, _ = spi.quad(f, r, r + 40.0, epsabs=0.0, epsrel=1e-12, limit=400)
    return r * (1 - math.exp(-math.expm1(r) / g)) / c


def scan(g, target, lo, hi, step):
    prev = pf_stat_oracle(g, lo) - target
    for k in range(1, int(round((hi - lo) / step)) + 1):
        r = lo + k * step
        cur = pf_stat_oracle(g, r) - target
        if prev < 0 <= cur:
            return r - step, r, prev, cur
        prev = cur
    raise AssertionError("no sign change")


def grid_scan_root(g, target):
    # coarse cell first, then the 1e-4 grid inside it
    lo, _, _, _ = scan(g, target, 0.0, 15.0, 0.05)
    a, b, fa, fb = scan(g, target, lo, lo + 0.05, 1e-4)
    return a - fa * (b - a) / (fb - fa)


def test_two_user_iid_sum_rate_threshold():
    # gamma*_1 = exp(e^{0.1} E1(0.1)) - 1: the last user's mean rate
    expected = math.exp(math.exp(0.1) * exp1(0.1)) - 1
    res = optimize_weighted_sum(iid(10.0, 2))
    assert res.thresholds.snr[0] == pytest.approx(expected, rel=1e-10)
    assert res.thresholds.snr[0] == pytest.approx(6.50, abs=5e-3)
    assert res.thresholds[1] == 0.0


def test_two_user_optimum_beats_grid():
    sc = Scenario.from_models([ChannelModel(3.0), ChannelModel(12.0)])
    res = optimize_weighted_sum(sc)
    grid = np.linspace(0, 5, 2001)
    best = max(expected_rates(sc, [r, 0.0]).sum_rate for r in grid)
    assert res.objective >= best - 1e-12
    assert res.objective == pytest.approx(best, abs=1e-6)
    assert res.objective == pytest.approx(res.report.sum_rate, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 100.0), st.floats(0.05, 5.0)), min_size=1, max_size=8))
def test_recursion_matches_sum_form(pairs):
    sc = Scenario.from_models([ChannelModel(g) for g, _ in pairs], weights=[w for _, w in pairs])
    thr, values = weighted_sum_thresholds(sc)
    assert thresholds_by_sum_form(sc, thr) == pytest.approx(thr, rel=1e-8, abs=1e-12)
    assert max_weighted_sum(sc, thr) == pytest.approx(values[0], rel=1e-8)
    assert expected_rates(sc, thr).weighted_sum == pytest.approx(values[0], rel=1e-8)


def test_recursion_closed_form_vs_quadrature():
    sc = Scenario.from_models([ChannelModel(s) for s in (0.3, 4.0, 25.0, 9.0)],
                              weights=[1.0, 0.5, 2.0, 1.2])
    a, _ = weighted_sum_thresholds(sc)
    b, _ = weighted_sum_thresholds(sc.generic())
    assert b == pytest.approx(a, abs=1e-7)


def test_equal_weight_iid_thresholds_decrease():
    thr = optimize_weighted_sum(iid(5.0, 6)).thresholds
    assert all(x > y for x, y in zip(thr, list(thr)[1:]))


def test_zero_weight_user_never_flags():
    sc = Scenario.from_models([ChannelModel(10.0)] * 3, weights=[0.0, 1.0, 1.0])
    res = optimize_weighted_sum(sc)
    assert res.thresholds[0] == NEVER_FLAG
    assert res.report.rates[0] == 0.0
    assert res.to_dict()["thresholds_rate"][0] is None
    assert res.objective == pytest.approx(optimize_weighted_sum(iid(10.0, 2)).objective, rel=1e-12)


def test_degenerate_zero_threshold_warns():
    sc = Scenario.from_models([ChannelModel(10.0)] * 3, weights=[1.0, 0.0, 0.0])
    with pytest.warns(DegenerateThresholdWarning):
        thr, _ = weighted_sum_thresholds(sc)
    assert thr[0] == 0.0


def test_objective_validation():
    with pytest.raises(ValueError):
        Objective.weighted_sum([0.0, 0.0])
    with pytest.raises(ValueError):
        Objective.weighted_sum([1.0, -1.0])
    with pytest.raises(ValueError):
        weighted_sum_thresholds(iid(1.0, 2), [0.0, 0.0])


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0, 100.0])
@pytest.mark.parametrize("after", [1, 3, 9])
def test_pf_threshold_matches_grid_scan(g, after):
    assert pf_threshold(ChannelModel(g), after) == pytest.approx(grid_scan_root(g, after), abs=1e-6)


def test_pf_statistic_matches_oracle():
    d = ChannelModel(2.0).rate_distribution()
    for r in (0.1, 0.8, 2.5):
        assert pf_statistic(d, r) == pytest.approx(pf_stat_oracle(2.0, r), rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 100.0))
def test_pf_threshold_increases_with_users_after(g):
    thr = [pf_threshold(ChannelModel(g), k) for k in range(0, 8)]
    assert thr[0] == 0.0
    assert all(a < b for a, b in zip(thr, thr[1:]))


def test_pf_threshold_rejects_bad_count():
    with pytest.raises(ValueError):
        pf_threshold(ChannelModel(1.0), -1)


def test_pf_decoupled_from_other_users():
    a = Scenario.from_models([ChannelModel(s) for s in (2.0, 8.0, 30.0)])
    b = Scenario.from_models([ChannelModel(s) for s in (2.0, 0.4, 90.0)])
    assert pf_thresholds(a)[0] == pf_thresholds(b)[0]


def test_pf_consistent_with_inverse_rate_weights():
    sc = Scenario.from_models([ChannelModel(s) for s in (1.0, 20.0, 5.0, 60.0)])
    res = optimize_pf(sc)
    assert res.kind is ObjectiveKind.PROPORTIONAL_FAIR
    assert res.diagnostics["weighted_sum_consistency"] <= 1e-5
    w = 1.0 / res.report.rates
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        thr, _ = weighted_sum_thresholds(sc, w)
    assert thr == pytest.approx(list(res.thresholds), abs=1e-5)


def test_pf_beats_perturbations():
    sc = Scenario.from_models([ChannelModel(s) for s in (1.0, 20.0, 5.0)])
    res = optimize_pf(sc)
    base = res.report.log_utility
    for i in range(2):
        for d in (-0.05, 0.05):
            t = list(res.thresholds)
            t[i] += d
            assert expected_rates(sc, t).log_utility < base


def interior_scenario():
    sc = Scenario.from_models([ChannelModel(s) for s in (3.0, 0.7, 15.0, 40.0)])
    return sc, [1.1, 0.4, 2.0, 0.3]


def test_jacobian_forms_agree():
    sc, thr = interior_scenario()
    j = rate_jacobian(sc, thr)
    assert np.allclose(j, rate_jacobian_ratio_form(sc, thr), rtol=1e-12, atol=0)
    fd = rate_jacobian_fd(sc, thr)
    assert np.allclose(j, fd, rtol=1e-4, atol=1e-12)
    assert np.all(np.tril(j, -1) == 0)
    assert np.all(np.diag(j) < 0)
    upper = np.triu_indices(4, 1)
    assert np.all(j[upper] > 0)


def test_objective_gradient_analytic_vs_fd():
    sc, thr = interior_scenario()
    for obj in (Objective.weighted_sum([1, 2, 0.5, 1]), Objective.proportional_fair()):
        a = objective_gradient(sc, thr, obj)
        n = objective_gradient_fd(sc, thr, obj)
        assert gradients_agree(a, n)


def test_stationarity_small_at_optimum_large_elsewhere():
    sc = Scenario.from_models([ChannelModel(s) for s in (3.0, 0.7, 15.0, 40.0)])
    ws = optimize_weighted_sum(sc)
    pf = optimize_pf(sc)
    assert ws.residual <= 1e-5 and pf.residual <= 1e-5
    assert ws.diagnostics["gradients_agree"] and pf.diagnostics["gradients_agree"]
    t = list(ws.thresholds)
    t[0] -= 1.0
    assert stationarity_residual(sc, t, Objective.weighted_sum()) > 1e-3


def test_result_dict_units():
    res = optimize_weighted_sum(iid(10.0, 2))
    nats, bits = res.to_dict("nats"), res.to_dict("bits")
    assert set(nats) == {"unit", "objective_kind", "thresholds_rate", "thresholds_snr", "objective",
                         "residual", "report", "diagnostics"}
    assert bits["objective"] == pytest.approx(nats["objective"] / math.log(2))
    assert bits["thresholds_snr"] == nats["thresholds_snr"]


def test_single_user():
    res = optimize_pf(iid(1.0, 1))
    assert list(res.thresholds) == [0.0]
    assert res.residual == 0.0
