"""Mirror, electrode and surface potentials for atoms above an atom mirror.

Positions are 3-vectors in the surface frame ``(n, t, a)``: ``n`` is the
height above the mirror plane, ``t`` the in-surface coordinate transverse to
a guide and ``a`` the in-surface axial coordinate. Every function accepts a
single point of shape ``(3,)`` or a stack of points of shape ``(..., 3)``.

The canonical potential is built by superposing the electrode fields and
feeding ``|E|^2`` into the induced-dipole energy. The closed-form wire and
dot expressions are kept alongside as cross-checks.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .constants import EPS0, G_ACCEL, AtomSpecies
from .errors import DomainError, SingularityError

N, T, A = 0, 1, 2

# Points closer than this to a line or point charge are treated as coincident.
_COINCIDENT = 1e-15

_K_E = 1.0 / (4.0 * math.pi * EPS0)


def _vec(x):
    arr = np.array(x, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite components")
    return arr


def _dot3(a, b):
    # explicit sum keeps every element's rounding independent of array shape
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _points(r):
    pts = np.asarray(r, dtype=float)
    if pts.shape[-1:] != (3,):
        raise ValueError(f"points must have trailing dimension 3, got {pts.shape}")
    return pts


@dataclass(frozen=True)
class MirrorSpec:
    """Exponential atom mirror ``U0 exp(-kappa n)``.

    ``detuning_in_linewidths`` (Delta/Gamma) is required for an evanescent
    wave mirror and must be absent for a magnetic one.
    """

    kind: str
    barrier_height: float  # J
    decay_constant: float  # 1/m
    detuning_in_linewidths: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("evanescent", "magnetic"):
            raise ValueError(f"unknown mirror kind {self.kind!r}")
        if not (self.barrier_height > 0 and math.isfinite(self.barrier_height)):
            raise ValueError("barrier_height must be positive")
        if not (self.decay_constant > 0 and math.isfinite(self.decay_constant)):
            raise ValueError("decay_constant must be positive")
        if self.kind == "evanescent":
            if self.detuning_in_linewidths is None or not self.detuning_in_linewidths > 0:
                raise ValueError("evanescent mirror needs a positive detuning_in_linewidths")
        elif self.detuning_in_linewidths is not None:
            raise ValueError("magnetic mirror takes no detuning")

    @property
    def decay_length(self):
        return 1.0 / self.decay_constant


@dataclass(frozen=True)
class InfiniteLine:
    """Infinitely long uniformly charged line through ``foot_point``."""

    foot_point: np.ndarray
    direction: np.ndarray
    linear_density: float  # C/m

    def __post_init__(self):
        object.__setattr__(self, "foot_point", _vec(self.foot_point))
        d = _vec(self.direction)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "direction", d)

    def field(self, r):
        rel = _points(r) - self.foot_point
        along = _dot3(rel, self.direction)
        perp = rel - along[..., None] * self.direction
        rho2 = _dot3(perp, perp)
        if np.any(rho2 <= _COINCIDENT**2):
            raise SingularityError("field evaluated on a line charge")
        # |E| = lambda / (2 pi eps0 rho), radial
        return (2.0 * _K_E * self.linear_density / rho2)[..., None] * perp

    def highest_height(self):
        return float(self.foot_point[N]) if abs(self.direction[N]) < 1e-15 else math.inf


@dataclass(frozen=True)
class FiniteSegment:
    """Straight segment from ``end_a`` to ``end_b`` with uniform line charge."""

    end_a: np.ndarray
    end_b: np.ndarray
    linear_density: float  # C/m

    def __post_init__(self):
        object.__setattr__(self, "end_a", _vec(self.end_a))
        object.__setattr__(self, "end_b", _vec(self.end_b))
        if not self.length > 0:
            raise ValueError("segment length must be positive")

    @property
    def length(self):
        return float(np.linalg.norm(self.end_b - self.end_a))

    @property
    def total_charge(self):
        return self.linear_density * self.length

    def field(self, r):
        pts = _points(r)
        u = (self.end_b - self.end_a) / self.length
        rel = pts - self.end_a
        z_a = -_dot3(rel, u)  # end_a coordinate measured from the foot of r
        z_b = z_a + self.length
        perp = rel + z_a[..., None] * u  # r minus its foot on the line
        d2 = _dot3(perp, perp)
        r_a = np.sqrt(d2 + z_a**2)
        r_b = np.sqrt(d2 + z_b**2)
        on_line = d2 <= _COINCIDENT**2
        if np.any(on_line & (z_a <= 0) & (z_b >= 0)):
            raise SingularityError("field evaluated on a line segment")
        with np.errstate(divide="ignore", invalid="ignore"):
            e_perp = np.where(on_line, 0.0, (z_b / r_b - z_a / r_a) / d2)
        e_par = 1.0 / r_b - 1.0 / r_a
        k = _K_E * self.linear_density
        return k * (e_perp[..., None] * perp + e_par[..., None] * u)

    def highest_height(self):
        return float(max(self.end_a[N], self.end_b[N]))


@dataclass(frozen=True)
class PointCharge:
    position: np.ndarray
    charge: float  # C

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))

    def field(self, r):
        rel = _points(r) - self.position
        dist2 = _dot3(rel, rel)
        if np.any(dist2 <= _COINCIDENT**2):
            raise SingularityError("field evaluated on a point charge")
        return (_K_E * self.charge / (dist2 * np.sqrt(dist2)))[..., None] * rel

    def highest_height(self):
        return float(self.position[N])


ChargeElement = Union[InfiniteLine, FiniteSegment, PointCharge]


@dataclass(frozen=True)
class PotentialStack:
    """Mirror plus electrodes plus optional surface terms.

    All electrodes must lie on or below the mirror plane ``n = 0``.
    ``gravity`` adds ``m g n`` (off by default).
    """

    mirror: MirrorSpec
    charges: Sequence[ChargeElement] = field(default_factory=tuple)
    vdw_coefficient: Optional[float] = None  # C3, J m^3
    gravity: bool = False

    def __post_init__(self):
        object.__setattr__(self, "charges", tuple(self.charges))
        for element in self.charges:
            if element.highest_height() > 1e-15:
                raise ValueError("charge elements must lie on or below the surface (n <= 0)")
        if self.vdw_coefficient is not None and self.vdw_coefficient < 0:
            raise ValueError("vdw_coefficient must be non-negative")

    def with_charges(self, charges):
        return PotentialStack(self.mirror, tuple(charges), self.vdw_coefficient, self.gravity)

    def scaled_charges(self, factor):
        """Same geometry with every charge multiplied by ``factor``."""
        return self.with_charges(_scale_element(c, factor) for c in self.charges)


def _scale_element(element, factor):
    if isinstance(element, InfiniteLine):
        return InfiniteLine(element.foot_point, element.direction, element.linear_density * factor)
    if isinstance(element, FiniteSegment):
        return FiniteSegment(element.end_a, element.end_b, element.linear_density * factor)
    return PointCharge(element.position, element.charge * factor)


def _check_height(n, strict):
    n = np.asarray(n, dtype=float)
    bad = n <= 0 if strict else n < 0
    if np.any(bad):
        raise DomainError("point lies below the mirror surface" if not strict else "point is not above the surface")
    return n


def mirror_potential(mirror, n):
    """Repulsive mirror barrier ``U0 exp(-kappa n)`` at height ``n`` >= 0."""
    n = _check_height(n, strict=False)
    return mirror.barrier_height * np.exp(-mirror.decay_constant * n)


def electric_field(charges, r):
    """Superposed electrostatic field (V/m) of all charge elements at ``r``."""
    pts = _points(r)
    total = np.zeros(pts.shape, dtype=float)
    for element in charges:
        total = total + element.field(pts)
    return total


def polarization_energy(atom: AtomSpecies, E):
    """Induced-dipole energy ``-2 pi eps0 alpha |E|^2`` (never positive)."""
    E = np.asarray(E, dtype=float)
    if not np.all(np.isfinite(E)):
        raise ValueError("non-finite field")
    return -2.0 * math.pi * EPS0 * atom.polarizability_volume * _dot3(E, E)


def wire_potential_closed_form(atom, linear_density, rho):
    """The thin-wire attraction written as ``-(1/2 pi eps0) alpha q^2 / (2 rho^2)``.

    This is half of what the composed path gives for an infinite line.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("rho must be positive")
    return -(1.0 / (2.0 * math.pi * EPS0)) * atom.polarizability_volume * linear_density**2 / (2.0 * rho**2)


def dot_potential_closed_form(atom, charge, r):
    """Point-charge attraction ``-alpha Q^2 / (8 pi eps0 r^4)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("r must be positive")
    return -(1.0 / (8.0 * math.pi * EPS0)) * atom.polarizability_volume * charge**2 / r**4


def vdw_potential(c3, n):
    """Nonretarded surface attraction ``-C3 / n^3``; zero when ``c3`` is None."""
    n = _check_height(n, strict=True)
    if not c3:
        return np.zeros_like(n)
    return -c3 / n**3


def total_potential(stack: PotentialStack, atom: AtomSpecies, r):
    """Mirror + induced dipole + van der Waals (+ gravity) at ``r`` (J)."""
    pts = _points(r)
    n = _check_height(pts[..., N], strict=True)
    energy = mirror_potential(stack.mirror, n)
    if stack.charges:
        energy = energy + polarization_energy(atom, electric_field(stack.charges, pts))
    if stack.vdw_coefficient:
        energy = energy + vdw_potential(stack.vdw_coefficient, n)
    if stack.gravity:
        energy = energy + atom.mass * G_ACCEL * n
    return energy


def surface_wire(linear_density, t=0.0):
    """Infinite line on the surface along ``a``, crossing the ``t`` axis at ``t``."""
    return InfiniteLine(np.array([0.0, t, 0.0]), np.array([0.0, 0.0, 1.0]), linear_density)


def surface_dot(charge, t=0.0, a=0.0):
    return PointCharge(np.array([0.0, t, a]), charge)
