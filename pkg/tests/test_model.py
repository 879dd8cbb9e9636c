import math

import pytest
from hypothesis import given, strategies as st

from hbct import ChannelRealization, DualWeights, SystemParams, ValidationError, db_to_linear, validate_params
from hbct.model import Allocation, table_backscatter_rates


@pytest.mark.parametrize("db, lin", [(0, 1.0), (40, 10000.0), (-30, 0.001)])
def test_db_to_linear_examples(db, lin):
    assert db_to_linear(db) == pytest.approx(lin, rel=1e-15)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_db_to_linear_rejects_non_finite(bad):
    with pytest.raises(ValidationError):
        db_to_linear(bad)


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_db_to_linear_is_a_homomorphism(a, b):
    assert db_to_linear(a + b) == pytest.approx(db_to_linear(a) * db_to_linear(b), rel=1e-12)


@given(st.floats(-100, 100), st.floats(1e-6, 50))
def test_db_to_linear_monotone(a, step):
    assert db_to_linear(a + step) > db_to_linear(a)


def test_default_scenario_accepted():
    p = SystemParams(num_hops=3, block_duration=1, harvest_efficiency=0.8, noise_power=1, pt_power=1e4, interference_threshold=1)
    assert validate_params(p) is p
    assert p.backscatter_rates == (3.8e6,) * 3
    assert p.zeta_pt == pytest.approx(8000.0)


@pytest.mark.parametrize(
    "field, kwargs",
    [
        ("harvest_efficiency", dict(harvest_efficiency=1.2)),
        ("harvest_efficiency", dict(harvest_efficiency=-0.1)),
        ("num_hops", dict(num_hops=0, backscatter_rates=())),
        ("block_duration", dict(block_duration=0.0)),
        ("noise_power", dict(noise_power=0.0)),
        ("bandwidth", dict(bandwidth=-1.0)),
        ("pt_power", dict(pt_power=-1.0)),
        ("interference_threshold", dict(interference_threshold=-1.0)),
        ("path_loss_exponent", dict(path_loss_exponent=0.0)),
        ("reference_distance", dict(reference_distance=0.0)),
        ("backscatter_rates", dict(backscatter_rates=(1.0, -1.0, 1.0))),
        ("backscatter_rates", dict(backscatter_rates=(1.0, 1.0))),
        ("backscatter_rates", dict(num_hops=7)),
    ],
)
def test_invalid_params_name_their_field(field, kwargs):
    with pytest.raises(ValidationError) as info:
        SystemParams(**kwargs)
    assert info.value.field == field
    assert field in str(info.value)
    assert info.value.exit_code == 1


def test_table_rates_and_replace_resets_them():
    assert table_backscatter_rates(1) == (0.01e6,)
    assert table_backscatter_rates(5) == (5e6,) * 5
    p = SystemParams().replace(num_hops=4)
    assert p.backscatter_rates == (4.5e6,) * 4
    q = SystemParams(backscatter_rates=(1.0, 2.0, 3.0)).replace(pt_power=5.0)
    assert q.backscatter_rates == (1.0, 2.0, 3.0)


def test_channel_gamma_is_g_over_noise():
    ch = ChannelRealization(h=(1.0, 2.0), g=(0.5, 3.0), f=(1.0, 1.0), noise_power=2.0)
    assert ch.gamma == (0.25, 1.5)
    assert ch.num_hops == 2


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_channel_rejects_non_positive_gains(bad):
    with pytest.raises(ValidationError):
        ChannelRealization(h=(1.0, bad), g=(1.0, 1.0), f=(1.0, 1.0))


def test_channel_rejects_ragged_vectors():
    with pytest.raises(ValidationError):
        ChannelRealization(h=(1.0,), g=(1.0, 1.0), f=(1.0, 1.0))


def test_dual_weights_normalized_to_max_one():
    w = DualWeights((2.0, 4.0, 1.0))
    assert w.lam == (0.5, 1.0, 0.25)
    assert DualWeights.uniform(3).lam == (1.0, 1.0, 1.0)
    assert DualWeights.from_log((800.0, 799.0)).lam == pytest.approx((1.0, math.exp(-1)))


@pytest.mark.parametrize("lam", [(), (0.0, 0.0), (-1.0, 1.0), (math.inf, 1.0)])
def test_dual_weights_rejects_invalid(lam):
    with pytest.raises(ValidationError):
        DualWeights(lam)


def test_allocation_objective_and_breakdown():
    a = Allocation(0.1, (0.5, 0.4), (0, 1), (1.0, 0.0), (0.5, 0.0), (2.0, 0.0), (2.0, 2.5), (1.0, 1.0), 1.0, True)
    assert a.time_breakdown == (0.1, 0.5, 0.4)
    assert a.objective() == 1.0
    b = Allocation(0.1, (0.5, 0.4), (0, 1), (1.0, 0.0), (0.5, 0.0), (2.0, 0.0), (2.0, 2.5), (1.0, 1.0), 1.0, False)
    assert b.objective() == -math.inf
