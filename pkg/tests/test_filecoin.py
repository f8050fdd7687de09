import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from ledgerwatt import BoundedEstimate, TimeSeries, convert
from ledgerwatt.errors import ConfigError, InsufficientDataError, InvalidObservationError, ValidationError
from ledgerwatt.filecoin import (
    FilecoinParams,
    FilecoinSnapshot,
    RackObservation,
    SealingObservation,
    available_presets,
    energy_over_window,
    instantaneous_power,
    load_params,
    load_preset,
    power_bounds,
    recover_snapshot,
    sealing_constant,
    storage_constant,
)

T0 = datetime(2023, 8, 31, tzinfo=timezone.utc)

# (SR, Cap) recovered from the published lower and average improved-model rows
DERIVED_SR = 170967767505188.84
DERIVED_CAP = 1.2439910455679877e19


@pytest.fixture
def params():
    return load_preset("table5-2023")


@pytest.fixture
def snap():
    return FilecoinSnapshot(T0, DERIVED_SR, DERIVED_CAP)


class TestConstants:
    def test_sealing_by_hand(self):
        assert sealing_constant(SealingObservation(10, 1e13)) == pytest.approx(2.8e-8, rel=1e-12)

    def test_sealing_unit_cancellation(self):
        assert sealing_constant(SealingObservation(1, 28_000)) == pytest.approx(1.0)

    def test_storage_by_hand(self):
        assert storage_constant(RackObservation(5, 1e15)) == pytest.approx(5e-12, rel=1e-12)

    def test_storage_unit_cancellation(self):
        assert storage_constant(RackObservation(1, 1000)) == pytest.approx(1.0)

    @pytest.mark.parametrize("obs", [SealingObservation(10, 0), SealingObservation(0, 1e12)])
    def test_sealing_invalid(self, obs):
        with pytest.raises(InvalidObservationError):
            sealing_constant(obs)

    def test_storage_zero_capacity(self):
        with pytest.raises(InvalidObservationError):
            storage_constant(RackObservation(5, 0))


class TestPower:
    def test_zero_snapshot(self, params):
        zero = FilecoinSnapshot(T0, 0, 0)
        assert instantaneous_power(2.17e-8, 4.16e-12, 1.426, zero) == 0
        assert power_bounds(params, zero).as_tuple() == (0, 0, 0)

    def test_estimate_tier(self, params, snap):
        p = instantaneous_power(params.a.estimate, params.b.estimate, params.pue.estimate, snap)
        assert p == pytest.approx(79.086e6, rel=1e-6)

    def test_bounds_against_published(self, params, snap):
        lo, est, up = power_bounds(params, snap).as_tuple()
        assert lo == pytest.approx(9.39e6, rel=1e-6)
        assert est == pytest.approx(79.086e6, rel=1e-6)
        assert up == pytest.approx(257.917e6, rel=5e-3)

    def test_doubling(self, params, snap):
        one = power_bounds(params, snap).as_tuple()
        two = power_bounds(params, snap.scaled(2)).as_tuple()
        assert two == pytest.approx(tuple(2 * v for v in one), rel=1e-12)

    def test_pue_below_one_rejected(self, snap):
        with pytest.raises(ValidationError):
            instantaneous_power(1e-8, 1e-12, 0.9, snap)

    def test_recover_round_trip(self, params, snap):
        lo, est, _ = power_bounds(params, snap).as_tuple()
        back = recover_snapshot(params, lo, est, T0)
        assert back.sealing_rate == pytest.approx(DERIVED_SR, rel=1e-9)
        assert back.raw_capacity == pytest.approx(DERIVED_CAP, rel=1e-9)


class TestEnergy:
    def test_constant_day(self, params, snap):
        series = TimeSeries([(T0, snap), (T0 + timedelta(hours=24), snap)])
        energy = energy_over_window(params, series)
        power = power_bounds(params, snap)
        assert energy.as_tuple() == pytest.approx(tuple(24 * v for v in power.as_tuple()), rel=1e-12)

    def test_linear_trapezoid(self, params):
        s0 = FilecoinSnapshot(T0, 0, 1e18)
        s1 = FilecoinSnapshot(T0 + timedelta(hours=10), 0, 3e18)
        energy = energy_over_window(params, TimeSeries([(T0, s0), (s1.timestamp, s1)]))
        b, pue = params.b.estimate, params.pue.estimate
        # trapezoid: 10 h times the mean of the two end powers
        assert energy.estimate == pytest.approx(10 * (b * 1e18 + b * 3e18) / 2 * pue, rel=1e-12)

    def test_empty_series(self, params):
        with pytest.raises(InsufficientDataError):
            energy_over_window(params, TimeSeries([]))


class TestPresets:
    def test_table5_values(self, params):
        assert params.a.as_tuple() == (7.86e-09, 2.17e-08, 1.15e-07)
        assert params.b.as_tuple() == (5.21e-13, 4.16e-12, 1.0e-11)
        assert params.pue.as_tuple() == (1.2, 1.426, 1.79)

    def test_listing(self):
        assert {"table5-2023", "filecoin-green-original"} <= set(available_presets())

    def test_unpopulated_preset_refuses(self):
        with pytest.raises(ConfigError, match="populate"):
            load_preset("filecoin-green-original")

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load_preset("nope")

    def test_dict_round_trip(self, params, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps(params.to_dict()))
        assert load_params(path) == params

    def test_invalid_pue(self, params):
        doc = params.to_dict()
        doc["pue"] = {"lower": 0.8, "estimate": 1.0, "upper": 1.2}
        with pytest.raises(ValidationError):
            FilecoinParams.from_dict(doc)


# -- properties ----------------------------------------------------------------

pos = st.floats(min_value=1e-14, max_value=1e-6)
pues = st.floats(min_value=1.0, max_value=3.0)
rates = st.floats(min_value=0, max_value=1e16)
caps = st.floats(min_value=0, max_value=1e21)


@settings(max_examples=1000, deadline=None)
@given(a=pos, b=pos, pue=pues, sr1=rates, cap1=caps, sr2=rates, cap2=caps, k=st.floats(0, 1e3))
def test_linearity(a, b, pue, sr1, cap1, sr2, cap2, k):
    p = lambda sr, cap: instantaneous_power(a, b, pue, FilecoinSnapshot(T0, sr, cap))
    assert p(sr1 + sr2, cap1 + cap2) == pytest.approx(p(sr1, cap1) + p(sr2, cap2), rel=1e-9, abs=1e-12)
    assert p(k * sr1, k * cap1) == pytest.approx(k * p(sr1, cap1), rel=1e-9, abs=1e-12)


@settings(max_examples=1000, deadline=None)
@given(
    base=st.tuples(pos, pos, pues, rates, caps),
    which=st.integers(0, 4),
    bump=st.floats(min_value=0, max_value=10),
)
def test_monotone_in_every_input(base, which, bump):
    a, b, pue, sr, cap = base
    before = instantaneous_power(a, b, pue, FilecoinSnapshot(T0, sr, cap))
    args = list(base)
    args[which] = args[which] * (1 + bump) + (bump if which >= 3 else 0)
    a, b, pue, sr, cap = args
    after = instantaneous_power(a, b, pue, FilecoinSnapshot(T0, sr, cap))
    assert after >= before


@settings(max_examples=1000, deadline=None)
@given(a=pos, b=pos, pue=pues, sr_day=st.floats(0, 1e17), cap_pib=st.floats(0, 1e4))
def test_dimensional_soundness(a, b, pue, sr_day, cap_pib):
    # the same snapshot expressed per day / in PiB, converted at the boundary
    direct = instantaneous_power(a, b, pue, FilecoinSnapshot(T0, sr_day / 24, cap_pib * 2**50))
    via = instantaneous_power(
        a, b, pue, FilecoinSnapshot(T0, convert(sr_day, "B/day", "B/h"), convert(cap_pib, "PiB", "B"))
    )
    assert via == pytest.approx(direct, rel=1e-9, abs=1e-12)


@settings(max_examples=1000, deadline=None)
@given(
    tiers=st.lists(st.tuples(pos, pos, st.floats(1.0, 2.0)), min_size=3, max_size=3),
    sr=rates,
    cap=caps,
)
def test_power_bounds_ordered(tiers, sr, cap):
    cols = [sorted(col) for col in zip(*tiers)]
    params = FilecoinParams(*(BoundedEstimate(*c) for c in cols))
    out = power_bounds(params, FilecoinSnapshot(T0, sr, cap))
    assert out.lower <= out.estimate <= out.upper
