from __future__ import annotations

from datetime import time

import pytest

from iotfence.errors import InvariantError
from iotfence.policy.rates import (
    UNIT_TOKENS,
    BandwidthSpec,
    RateSpec,
    Schedule,
    TimeUnit,
    format_bandwidth,
    format_rate,
    format_schedule,
    parse_bandwidth,
    parse_rate,
    parse_schedule,
)


@pytest.mark.parametrize("token", sorted(UNIT_TOKENS))
def test_rate_grammar_roundtrips_every_unit_token(token: str):
    for count in (1, 6, 12, 3600):
        rate = parse_rate(f"{count}/{token}")
        assert rate.count == count
        assert rate.unit is UNIT_TOKENS[token]
        assert parse_rate(format_rate(rate)) == rate
        assert format_rate(rate) == f"{count}/{token}"


def test_rate_built_in_code_uses_canonical_token():
    assert format_rate(RateSpec(6, TimeUnit.HOUR)) == "6/hr"
    assert format_rate(RateSpec(2, TimeUnit.DAY)) == "2/d"


def test_rate_equality_ignores_token():
    assert parse_rate("6/hr") == parse_rate("6/hour") == RateSpec(6, TimeUnit.HOUR)
    assert parse_rate("6/hr").period_seconds == 3600


@pytest.mark.parametrize("text", ["6/fortnight", "six/hr", "0/hr", "6", "/hr", "-1/hr"])
def test_rate_rejects(text: str):
    with pytest.raises(InvariantError):
        parse_rate(text)


def test_bandwidth_multipliers_are_decimal():
    assert parse_bandwidth("10M/w").bytes == 10_000_000
    assert parse_bandwidth("3K/day").bytes == 3_000
    assert parse_bandwidth("1G/h").bytes == 1_000_000_000
    assert parse_bandwidth("512/s").bytes == 512
    assert parse_bandwidth("10M/w").period_seconds == 7 * 86400
    assert format_bandwidth(parse_bandwidth("10M/week")) == "10M/week"


@pytest.mark.parametrize("text", ["10T/w", "10M", "0M/w", "10m/w", "M/w"])
def test_bandwidth_rejects(text: str):
    with pytest.raises(InvariantError):
        parse_bandwidth(text)


def test_bandwidth_rejects_unknown_multiplier_in_code():
    with pytest.raises(InvariantError):
        BandwidthSpec(amount=1, multiplier="T", unit=TimeUnit.DAY)


def test_schedule_window():
    day = parse_schedule("08:00-20:00")
    assert day.contains(time(8, 0))
    assert day.contains(time(19, 59))
    assert not day.contains(time(20, 0))
    assert not day.contains(time(3, 0))
    assert format_schedule(day) == "08:00-20:00"


def test_schedule_wraps_midnight():
    night = parse_schedule("22:30-6:00")
    assert night.contains(time(23, 0))
    assert night.contains(time(0, 15))
    assert not night.contains(time(6, 0))
    assert not night.contains(time(12, 0))
    assert format_schedule(night) == "22:30-06:00"


@pytest.mark.parametrize("text", ["08:00-08:00", "24:00-01:00", "8-20", "08:60-09:00"])
def test_schedule_rejects(text: str):
    with pytest.raises(InvariantError):
        parse_schedule(text)


def test_schedule_empty_window_in_code():
    with pytest.raises(InvariantError):
        Schedule(start=time(1, 0), end=time(1, 0))
