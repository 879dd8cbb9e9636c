
import pytest
from hypothesis import given, settings, strategies as st

from hbct import ChannelRealization, DeadHopError, InfeasibleError, SearchOptions, SystemParams, ab, hbct, jotpa, optimize_lambda
from hbct.checks import allocation_problems

from conftest import draw, scenario


@pytest.mark.parametrize("k, expected", [(1, 1e4), (2, 6e5), (3, 1.26667e6), (4, 1.125e6), (5, 1e6)])
def test_ab_table_values(k, expected):
    p = SystemParams(num_hops=k)
    r = ab(draw(p), p).delivery
    assert float(f"{r:.6g}") == expected


def test_ab_three_hop_slots():
    p = SystemParams()
    a = ab(draw(p), p)
    assert a.tau == pytest.approx((1 / 3,) * 3, rel=1e-15)
    assert a.tau0 == 0.0 and a.c == (1, 1, 1) and a.p == (0.0,) * 3


@given(st.integers(0, 1000), st.floats(0, 60), st.floats(-40, 20), st.floats(0, 1))
def test_ab_ignores_channels_and_power(trial, pt_db, ip_db, zeta):
    base = SystemParams()
    p = SystemParams(pt_power=10 ** (pt_db / 10), interference_threshold=10 ** (ip_db / 10), harvest_efficiency=zeta)
    assert ab(draw(p, trial=trial), p) == ab(draw(base), base)


def test_ab_dead_hop():
    p = SystemParams(backscatter_rates=(1.0, 0.0, 1.0))
    with pytest.raises(DeadHopError):
        ab(draw(p), p)


def _or_infeasible(fn):
    try:
        return fn()
    except InfeasibleError:
        return "infeasible"


def test_jotpa_equals_hybrid_without_backscatter():
    p = scenario(50.0, backscatter_rates=(0.0, 0.0, 0.0))
    opts = SearchOptions(restarts=3)
    seen = set()
    for trial in range(8):
        ch = draw(p, trial=trial)
        a = _or_infeasible(lambda: jotpa(ch, p, opts))
        b = _or_infeasible(lambda: optimize_lambda(ch, p, opts)[1])
        assert a == b
        seen.add(a == "infeasible")
    assert False in seen


def test_jotpa_vanishes_with_transmit_power():
    p = scenario(40.0)
    ch = ChannelRealization(h=(0.5, 0.5, 0.5), g=(1.0, 1.0, 1.0), f=(1e-3,) * 3)
    values = [jotpa(ch, p.replace(pt_power=pt)).delivery for pt in (1e-1, 1e-3, 1e-5)]
    assert values[0] > values[1] > values[2]
    assert values[2] < 1e-3 * values[0]


def test_jotpa_without_harvest_is_infeasible():
    p = SystemParams(pt_power=0.0)
    with pytest.raises(InfeasibleError):
        jotpa(draw(p), p)


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.sampled_from([20.0, 35.0, 50.0]))
def test_jotpa_is_conventional_equal_rate_and_feasible(trial, pt_db):
    p = scenario(pt_db)
    ch = draw(p, seed=3, trial=trial)
    try:
        a = jotpa(ch, p, SearchOptions(restarts=3))
    except InfeasibleError:
        return
    assert a.c == (0, 0, 0)
    assert allocation_problems(a, ch, p) == []


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.floats(10.0, 50.0), st.sampled_from([2, 3]))
def test_hybrid_dominates_both_baselines(trial, pt_db, k):
    p = scenario(pt_db, num_hops=k)
    ch = draw(p, seed=6, trial=trial)
    opts = SearchOptions(restarts=4)
    r_h = hbct(ch, p, opts).allocation.delivery
    assert r_h >= ab(ch, p).delivery - 1e-6 * r_h
    try:
        r_j = jotpa(ch, p, opts).delivery
    except InfeasibleError:
        return
    assert r_h >= r_j - 1e-6 * r_h


def test_search_alone_can_trail_at_default_bandwidth():
    p = scenario(35.0, num_hops=2)
    ch = draw(p, seed=6, trial=1409)
    opts = SearchOptions(restarts=4)
    assert optimize_lambda(ch, p, opts)[1].delivery < jotpa(ch, p, opts).delivery
    assert hbct(ch, p, opts).source == "JOTPA"
