"""Unit-suffixed quantity parsing.

Config files never carry bare physical numbers: every quantity is written as
``"<number> <unit>"`` (for example ``"1.0 ueV"`` or ``"0.33 pC_per_cm"``) and
converted to SI here. Each unit belongs to a single kind so that a length can
never be silently accepted where an energy is expected.
"""

import math

from scipy import constants as sc

# kind -> canonical SI unit name used when serializing
SI_UNITS = {
    "energy": "J",
    "length": "m",
    "inverse_length": "per_m",
    "linear_charge": "C_per_m",
    "charge": "C",
    "frequency": "Hz",
    "angular_rate": "rad_per_s",
    "angle": "rad",
    "number_density": "per_m3",
    "area": "m2",
    "volume": "m3",
    "mass": "kg",
    "c3": "J_m3",
    "dimensionless": "1",
}

_E = sc.e
_EV = sc.electron_volt

UNITS = {
    # energy
    "J": ("energy", 1.0),
    "eV": ("energy", _EV),
    "meV": ("energy", 1e-3 * _EV),
    "ueV": ("energy", 1e-6 * _EV),
    "neV": ("energy", 1e-9 * _EV),
    "K": ("energy", sc.k),
    "mK": ("energy", 1e-3 * sc.k),
    "uK": ("energy", 1e-6 * sc.k),
    # length
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "um": ("length", 1e-6),
    "nm": ("length", 1e-9),
    # inverse length
    "per_m": ("inverse_length", 1.0),
    "per_cm": ("inverse_length", 1e2),
    "per_mm": ("inverse_length", 1e3),
    "per_um": ("inverse_length", 1e6),
    "per_nm": ("inverse_length", 1e9),
    # line charge density
    "C_per_m": ("linear_charge", 1.0),
    "pC_per_m": ("linear_charge", 1e-12),
    "pC_per_cm": ("linear_charge", 1e-10),
    "pC_per_mm": ("linear_charge", 1e-9),
    "pC_per_um": ("linear_charge", 1e-6),
    "e_per_um": ("linear_charge", _E * 1e6),
    # charge
    "C": ("charge", 1.0),
    "pC": ("charge", 1e-12),
    "fC": ("charge", 1e-15),
    "e": ("charge", _E),
    # frequency
    "Hz": ("frequency", 1.0),
    "kHz": ("frequency", 1e3),
    "MHz": ("frequency", 1e6),
    "rad_per_s": ("angular_rate", 1.0),
    "MHz_2pi": ("angular_rate", 2 * math.pi * 1e6),
    # angle
    "rad": ("angle", 1.0),
    "deg": ("angle", math.pi / 180),
    # number density
    "per_m3": ("number_density", 1.0),
    "per_cm3": ("number_density", 1e6),
    # area / volume
    "m2": ("area", 1.0),
    "um2": ("area", 1e-12),
    "m3": ("volume", 1.0),
    "A3": ("volume", 1e-30),
    # mass
    "kg": ("mass", 1.0),
    "u": ("mass", sc.atomic_mass),
    # van der Waals C3
    "J_m3": ("c3", 1.0),
    "neV_um3": ("c3", 1e-9 * _EV * 1e-18),
    "1": ("dimensionless", 1.0),
}


def parse_quantity(text, kind):
    """Convert ``"<number> <unit>"`` to an SI float of the requested kind.

    Raises ``ValueError`` with a readable message on a missing unit, an
    unknown unit, or a unit of the wrong kind.
    """
    if isinstance(text, bool) or not isinstance(text, (str, int, float)):
        raise ValueError(f"expected a '<number> <unit>' string, got {text!r}")
    if not isinstance(text, str):
        if kind == "dimensionless":
            return float(text)
        raise ValueError(f"missing unit for {kind} quantity {text!r}")
    parts = text.split()
    if len(parts) == 1 and kind == "dimensionless":
        parts.append("1")
    if len(parts) != 2:
        raise ValueError(f"expected '<number> <unit>', got {text!r}")
    number, unit = parts
    try:
        value = float(number)
    except ValueError:
        raise ValueError(f"not a number: {number!r}") from None
    if unit not in UNITS:
        raise ValueError(f"unknown unit {unit!r}")
    unit_kind, factor = UNITS[unit]
    if unit_kind != kind:
        raise ValueError(f"unit {unit!r} is a {unit_kind} unit, expected {kind}")
    if not math.isfinite(value):
        raise ValueError(f"non-finite quantity {text!r}")
    return value * factor


def format_quantity(value, kind):
    """Inverse of :func:`parse_quantity` in canonical SI; round-trips exactly."""
    return f"{float(value)!r} {SI_UNITS[kind]}"


def to_unit(value, unit):
    return value / UNITS[unit][1]
