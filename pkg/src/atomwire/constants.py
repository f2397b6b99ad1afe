"""Physical constants and the built-in atomic species registry.

The species values below are standard ground-state data, not numbers taken
from the trap tables: static polarizability volumes (alpha/4 pi eps0),
D-line wavelengths and natural linewidths. Any entry can be overridden by a
YAML/JSON file named in the ``ATOMWIRE_CONSTANTS`` environment variable::

    species:
      Li:
        polarizability_volume: 24.3 A3
"""

import math
import os
from dataclasses import dataclass

import yaml
from scipy import constants as sc

from .units import parse_quantity

EPS0 = sc.epsilon_0
HBAR = sc.hbar
E_CHARGE = sc.e
EV = sc.electron_volt
AMU = sc.atomic_mass
G_ACCEL = sc.g

ENV_OVERRIDE = "ATOMWIRE_CONSTANTS"


@dataclass(frozen=True)
class AtomSpecies:
    """Atom data needed by the trap models (all SI).

    ``polarizability_volume`` is the alpha of U = -2 pi eps0 alpha |E|^2,
    i.e. the SI polarizability divided by 4 pi eps0.
    """

    name: str
    mass: float  # kg
    polarizability_volume: float  # m^3
    transition_wavelength: float  # m
    natural_linewidth: float  # rad/s

    def __post_init__(self):
        for field in ("mass", "polarizability_volume", "transition_wavelength", "natural_linewidth"):
            value = getattr(self, field)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{field} must be positive and finite, got {value!r}")

    @property
    def k_transition(self):
        """Optical wavenumber 2 pi / lambda used for Lamb-Dicke parameters."""
        return 2 * math.pi / self.transition_wavelength


# Li-7 and Rb-87. Static polarizabilities 164 a.u. and 319 a.u.
BUILTIN_SPECIES = {
    "Li": AtomSpecies(
        name="Li",
        mass=7.0160034 * AMU,
        polarizability_volume=24.3e-30,
        transition_wavelength=671e-9,
        natural_linewidth=2 * math.pi * 5.87e6,
    ),
    "Rb": AtomSpecies(
        name="Rb",
        mass=86.9091805 * AMU,
        polarizability_volume=47.3e-30,
        transition_wavelength=780e-9,
        natural_linewidth=2 * math.pi * 6.07e6,
    ),
}

_SPECIES_FIELDS = {
    "mass": "mass",
    "polarizability_volume": "volume",
    "transition_wavelength": "length",
    "natural_linewidth": "angular_rate",
}


def species_from_mapping(name, mapping, base=None):
    """Build a species from unit-suffixed strings, filling gaps from ``base``."""
    unknown = set(mapping) - set(_SPECIES_FIELDS) - {"name"}
    if unknown:
        raise ValueError(f"unknown species field(s): {sorted(unknown)}")
    values = {}
    for field, kind in _SPECIES_FIELDS.items():
        if field in mapping:
            values[field] = parse_quantity(mapping[field], kind)
        elif base is not None:
            values[field] = getattr(base, field)
        else:
            raise ValueError(f"species {name!r} is missing {field!r}")
    return AtomSpecies(name=mapping.get("name", name), **values)


def species_registry(environ=None):
    """Built-in species with any ``ATOMWIRE_CONSTANTS`` overrides applied."""
    environ = os.environ if environ is None else environ
    registry = dict(BUILTIN_SPECIES)
    path = environ.get(ENV_OVERRIDE)
    if not path:
        return registry
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    for name, mapping in (data.get("species") or {}).items():
        registry[name] = species_from_mapping(name, mapping, registry.get(name))
    return registry


def registry_summary(registry):
    """Plain dict view of a registry, for provenance headers."""
    return {
        name: {
            "mass_kg": atom.mass,
            "polarizability_volume_m3": atom.polarizability_volume,
            "transition_wavelength_m": atom.transition_wavelength,
            "natural_linewidth_rad_per_s": atom.natural_linewidth,
        }
        for name, atom in sorted(registry.items())
    }
