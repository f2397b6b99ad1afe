import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from atomwire.units import SI_UNITS, UNITS, format_quantity, parse_quantity, to_unit


def test_parse_common_quantities():
    assert parse_quantity("1.0 ueV", "energy") == pytest.approx(1.602176634e-25, rel=1e-15)
    assert parse_quantity("0.1 um", "length") == pytest.approx(1e-7)
    assert parse_quantity("0.33 pC_per_cm", "linear_charge") == pytest.approx(3.3e-11)
    assert parse_quantity("10 deg", "angle") == pytest.approx(math.radians(10))
    assert parse_quantity(1000, "dimensionless") == 1000.0


@pytest.mark.parametrize(
    "text, kind, message",
    [
        ("1.0", "energy", "expected"),
        (1.0, "length", "missing unit"),
        ("1.0 furlong", "length", "unknown unit"),
        ("1.0 um", "energy", "length unit"),
        ("abc um", "length", "not a number"),
        ("inf um", "length", "non-finite"),
        (True, "length", "expected"),
    ],
)
def test_parse_rejects_bad_quantities(text, kind, message):
    with pytest.raises(ValueError, match=message):
        parse_quantity(text, kind)


@given(st.sampled_from(sorted(SI_UNITS)), st.floats(allow_nan=False, allow_infinity=False))
def test_canonical_format_round_trips_exactly(kind, value):
    assert parse_quantity(format_quantity(value, kind), kind) == value


def test_every_unit_has_a_known_kind():
    assert {kind for kind, _ in UNITS.values()} <= set(SI_UNITS)
    assert all(UNITS[unit] == (kind, 1.0) for kind, unit in SI_UNITS.items())


def test_to_unit():
    assert to_unit(3.3e-11, "pC_per_cm") == pytest.approx(0.33)
