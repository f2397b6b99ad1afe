"""Electrode layouts on the mirror surface and planar potential sampling."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import EV
from .errors import SingularityError
from .potentials import N, FiniteSegment, total_potential

JUNCTION_TOLERANCE = 1e-9  # m


@dataclass(frozen=True)
class Layout:
    elements: tuple
    anchors: dict = field(default_factory=dict)

    @property
    def total_charge(self):
        return sum(e.total_charge for e in self.elements)


def _check_chain(elements, junctions):
    """Every declared junction must touch at least two segment ends."""
    for name, point in junctions.items():
        ends = [p for e in elements for p in (e.end_a, e.end_b)]
        touching = sum(np.linalg.norm(p - point) <= JUNCTION_TOLERANCE for p in ends)
        if touching < 2:
            raise ValueError(f"segments are not connected at junction {name!r}")


def build_straight_wire(length, linear_density):
    """One segment of ``length`` centred on the origin along the ``a`` axis."""
    if not length > 0:
        raise ValueError("length must be positive")
    start = np.array([0.0, 0.0, -0.5 * length])
    end = np.array([0.0, 0.0, 0.5 * length])
    return Layout((FiniteSegment(start, end, linear_density),), {"start": start, "end": end})


def build_y_splitter(stem, half_angle, arms, linear_density):
    """Stem along ``a`` ending at the origin, then two arms at +-half_angle.

    The layout is mirror-symmetric under ``t -> -t``.
    """
    if not 0 < half_angle < math.pi / 2:
        raise ValueError("half_angle must lie strictly between 0 and pi/2")
    if not (stem > 0 and arms > 0):
        raise ValueError("stem and arm lengths must be positive")
    junction = np.zeros(3)
    stem_end = np.array([0.0, 0.0, -stem])
    dt, da = arms * math.sin(half_angle), arms * math.cos(half_angle)
    arm_plus = np.array([0.0, dt, da])
    arm_minus = np.array([0.0, -dt, da])
    elements = (
        FiniteSegment(stem_end, junction, linear_density),
        FiniteSegment(junction, arm_plus, linear_density),
        FiniteSegment(junction, arm_minus, linear_density),
    )
    _check_chain(elements, {"junction": junction})
    anchors = {"stem_end": stem_end, "junction": junction, "arm_end_plus": arm_plus, "arm_end_minus": arm_minus}
    return Layout(elements, anchors)


def refine_layout(layout, pieces=2):
    """Split every segment into ``pieces`` equal collinear segments."""
    out = []
    for seg in layout.elements:
        fractions = np.arange(pieces + 1) / pieces
        points = [seg.end_a + f * (seg.end_b - seg.end_a) for f in fractions]
        out.extend(FiniteSegment(p, q, seg.linear_density) for p, q in zip(points[:-1], points[1:]))
    return Layout(tuple(out), dict(layout.anchors))


@dataclass(frozen=True)
class PlaneSpec:
    """Rectangular sampling window centred on ``origin``.

    ``resolution`` counts cells along each axis, so the window holds
    ``(cells_u + 1) x (cells_v + 1)`` points; doubling the resolution
    reproduces every old point exactly.
    """

    origin: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    extent: tuple  # (length along u, length along v), m
    resolution: tuple  # (cells along u, cells along v)

    def __post_init__(self):
        for name in ("origin", "axis_u", "axis_v"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        u, v = self.axis_u, self.axis_v
        if abs(u @ u - 1) > 1e-12 or abs(v @ v - 1) > 1e-12 or abs(u @ v) > 1e-12:
            raise ValueError("plane axes must be orthonormal")
        if not (self.extent[0] > 0 and self.extent[1] > 0):
            raise ValueError("plane extent must be positive along both axes")
        if not (int(self.resolution[0]) >= 1 and int(self.resolution[1]) >= 1):
            raise ValueError("plane resolution must be at least one cell per axis")

    def offsets(self):
        cu, cv = int(self.resolution[0]), int(self.resolution[1])
        su = (np.arange(cu + 1) / cu - 0.5) * self.extent[0]
        sv = (np.arange(cv + 1) / cv - 0.5) * self.extent[1]
        return su, sv

    def points(self):
        su, sv = self.offsets()
        return (
            self.origin
            + su[:, None, None] * self.axis_u
            + sv[None, :, None] * self.axis_v
        )


@dataclass
class PlaneSample:
    plane: PlaneSpec
    values: np.ndarray  # J, NaN where masked
    mask: np.ndarray  # True where the point is below the surface or singular

    def argmin(self):
        filled = np.where(self.mask, np.inf, self.values)
        return np.unravel_index(int(np.argmin(filled)), filled.shape)

    def local_minima(self):
        """Interior grid points lower than all 8 neighbours."""
        v = np.where(self.mask, np.inf, self.values)
        core = v[1:-1, 1:-1]
        is_min = np.ones(core.shape, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                nb = v[1 + di : v.shape[0] - 1 + di, 1 + dj : v.shape[1] - 1 + dj]
                is_min &= core < nb
        return [(i + 1, j + 1) for i, j in zip(*np.nonzero(is_min))]


def sample_plane(stack, atom, plane):
    """Total potential on a plane, row-major in (u, v); sub-surface points masked."""
    pts = plane.points()
    mask = pts[..., N] <= 0
    values = np.full(pts.shape[:-1], np.nan)
    valid = ~mask
    try:
        values[valid] = total_potential(stack, atom, pts[valid])
    except SingularityError:
        for idx in zip(*np.nonzero(valid)):
            try:
                values[idx] = total_potential(stack, atom, pts[idx])
            except SingularityError:
                mask[idx] = True
    return PlaneSample(plane, values, mask)


def _fmt_vec(v):
    return " ".join(repr(float(x)) for x in v)


def contour_payload(sample, provenance=None):
    neV = sample.values / EV * 1e9
    return {
        "axes": {"u": [float(x) for x in sample.plane.axis_u], "v": [float(x) for x in sample.plane.axis_v]},
        "origin": [float(x) for x in sample.plane.origin],
        "extent_m": [float(x) for x in sample.plane.extent],
        "resolution": [int(x) for x in sample.plane.resolution],
        "units": "neV",
        "values": [[None if m else float(x) for x, m in zip(row, mrow)] for row, mrow in zip(neV, sample.mask)],
        "mask": sample.mask.astype(int).tolist(),
        "provenance": provenance or {},
    }


def write_contour_csv(sample, path, provenance=None):
    """Header lines, one row of neV values per u index, then the mask block.

    Masked points are written as ``nan`` in the value block and flagged 1 in
    the mask block.
    """
    p = sample.plane
    lines = [
        f"# axes u={_fmt_vec(p.axis_u)} v={_fmt_vec(p.axis_v)}",
        f"# origin {_fmt_vec(p.origin)}",
        f"# resolution {int(p.resolution[0])} {int(p.resolution[1])}",
        f"# extent_m {_fmt_vec(p.extent)}",
        "# units neV; masked points are nan, see '# mask' block",
    ]
    if provenance is not None:
        lines.append("# provenance " + json.dumps(provenance, sort_keys=True))
    neV = sample.values / EV * 1e9
    for row, mrow in zip(neV, sample.mask):
        lines.append(",".join("nan" if m else repr(float(x)) for x, m in zip(row, mrow)))
    lines.append("# mask")
    for mrow in sample.mask:
        lines.append(",".join("1" if m else "0" for m in mrow))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_contour_csv(path):
    """Parse a contour CSV back into (header dict, values in neV, mask)."""
    header, values, mask = {}, [], []
    target = values
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line == "# mask":
                target = mask
            elif line.startswith("# "):
                key, _, rest = line[2:].partition(" ")
                header[key] = rest
            elif line:
                target.append([float(x) for x in line.split(",")])
    return header, np.array(values), np.array(mask, dtype=bool)
