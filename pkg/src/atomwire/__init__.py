"""Electrostatic guides and traps for neutral atoms above atom mirrors."""

from .constants import BUILTIN_SPECIES, AtomSpecies, species_registry
from .eigen import (
    Grid1D,
    Grid2D,
    Spectrum,
    SpacingFit,
    dot_bound_count,
    solve_1d,
    solve_dot,
    solve_wire_cross_section,
    spacing_law_check,
)
from .errors import (
    AtomWireError,
    ConfigError,
    DomainError,
    GridLeakError,
    ImmediateLossError,
    NoTrapError,
    NotAMinimumError,
    SingularityError,
    UnsupportedMirrorError,
)
from .geometry import PlaneSpec, build_straight_wire, build_y_splitter, sample_plane
from .potentials import (
    FiniteSegment,
    InfiniteLine,
    MirrorSpec,
    PointCharge,
    PotentialStack,
    dot_potential_closed_form,
    electric_field,
    mirror_potential,
    polarization_energy,
    surface_dot,
    surface_wire,
    total_potential,
    vdw_potential,
    wire_potential_closed_form,
)
from .trap import TrapReport, analyze, find_minimum, harmonic_modes, harmonic_report, loading_estimate, trap_depth, wkb_lifetime

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
