import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from swidopt.channel import ChannelModel, db_to_linear
from swidopt.region import (Scheme, SequenceStrategy, all_orders, default_grid, dominates,
                            order_users, support, sweep_region, timeshare_hull, under_hull,
                            upper_right_hull)

FIG1 = [ChannelModel(db_to_linear(10.0)), ChannelModel(db_to_linear(0.0))]


@pytest.fixture(scope="module")
def fig1_curves():
    grid = default_grid(41)
    return (sweep_region(FIG1, Scheme.SELD, grid=grid),
            sweep_region(FIG1, Scheme.SWID, SequenceStrategy.ascending(), grid),
            sweep_region(FIG1, Scheme.SWID, SequenceStrategy.descending(), grid))


def test_order_users():
    models = [ChannelModel(s) for s in (5.0, 1.0, 5.0, 20.0)]
    assert order_users(models, SequenceStrategy.ascending()) == [2, 1, 3, 4]
    assert order_users(models, SequenceStrategy.descending()) == [4, 1, 3, 2]
    assert order_users(models, SequenceStrategy.given([3, 1, 2, 4])) == [3, 1, 2, 4]
    with pytest.raises(ValueError):
        order_users(models, SequenceStrategy.given([1, 1, 2, 4]))


def test_all_orders_guarded():
    with pytest.raises(ValueError):
        all_orders(3)
    with pytest.raises(ValueError):
        all_orders(6, allow=True)
    assert len(all_orders(3, allow=True)) == 6


def test_default_grid_endpoints():
    g = default_grid(11)
    assert list(g[0]) == [1.0, 0.0] and list(g[-1]) == [0.0, 1.0]
    assert all(abs(mu.sum() - 1) < 1e-15 for mu in g)


def test_corners_are_single_user_mean_rates(fig1_curves):
    means = [m.rate_distribution().mean() for m in FIG1]
    for curve in fig1_curves:
        first, last = curve.points[0].rates, curve.points[-1].rates
        assert first[0] == pytest.approx(means[0], abs=1e-9) and abs(first[1]) <= 1e-9
        assert last[1] == pytest.approx(means[1], abs=1e-9) and abs(last[0]) <= 1e-9


def test_selection_dominates_switching(fig1_curves):
    seld, asc, desc = fig1_curves
    assert dominates(seld, asc) and dominates(seld, desc)
    assert not dominates(asc, seld, tol=1e-6)


def test_region_matches_order_invariance_of_selection():
    grid = default_grid(9)
    a = sweep_region(FIG1, Scheme.SELD, grid=grid).rate_matrix()
    b = sweep_region(FIG1[::-1], Scheme.SELD, grid=[mu[::-1] for mu in grid]).rate_matrix()
    assert np.allclose(a, b[:, ::-1], atol=1e-12)


def test_swid_sequence_required():
    with pytest.raises(ValueError):
        sweep_region(FIG1, Scheme.SWID)
    with pytest.raises(ValueError):
        sweep_region(FIG1, Scheme.SELD, grid=[np.array([1.0, 0.0, 0.0])])


def test_threads_give_same_points():
    grid = default_grid(7)
    one = sweep_region(FIG1, Scheme.SWID, SequenceStrategy.ascending(), grid).rate_matrix()
    four = sweep_region(FIG1, Scheme.SWID, SequenceStrategy.ascending(), grid, threads=4).rate_matrix()
    assert np.array_equal(one, four)


def test_hull_contains_every_swid_point(fig1_curves):
    _, asc, desc = fig1_curves
    union = timeshare_hull([asc, desc])
    hull = np.array(union.hull)
    assert all(under_hull(hull, p.rates) for p in union.points)
    assert any(p.on_hull for p in union.points)
    assert np.all(np.diff(hull[:, 0]) > 0) and np.all(np.diff(hull[:, 1]) <= 0)


points_2d = st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=40)


@settings(max_examples=60, deadline=None)
@given(points_2d)
def test_hull_properties(pts):
    arr = np.array(pts)
    hull = upper_right_hull(arr)
    assert all(under_hull(hull, p, tol=1e-9) for p in arr)
    vertex_set = {tuple(p) for p in arr}
    assert all(tuple(v) in vertex_set for v in hull)
    # any weight with nonnegative entries is maximised at a hull vertex
    for mu in ((1.0, 0.0), (0.0, 1.0), (0.3, 0.7)):
        assert np.max(hull @ mu) == pytest.approx(np.max(arr @ mu), abs=1e-12)


def test_hull_rejects_more_users():
    with pytest.raises(ValueError):
        upper_right_hull(np.zeros((3, 3)))


def test_support_and_csv(fig1_curves):
    seld = fig1_curves[0]
    assert support(seld, [1.0, 0.0]) == pytest.approx(FIG1[0].rate_distribution().mean(), abs=1e-9)
    lines = seld.to_csv("bits").splitlines()
    assert lines[0] == "scheme,sequence,mu_1,mu_2,R_1,R_2,on_hull,unit"
    assert lines[1].endswith(",bits")
    assert len(lines) == 42


def test_three_user_sweep():
    models = [ChannelModel(s) for s in (1.0, 5.0, 20.0)]
    grid = [np.array(g) for g in ((1, 0, 0), (1, 1, 1), (0.2, 0.3, 0.5))]
    sw = sweep_region(models, Scheme.SWID, SequenceStrategy.given([2, 3, 1]), grid)
    se = sweep_region(models, Scheme.SELD, grid=grid)
    assert dominates(se, sw)
    assert sw.points[0].rates[0] == pytest.approx(models[0].rate_distribution().mean(), abs=1e-9)
