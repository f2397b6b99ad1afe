"""Side-by-side reproduction of the published wire and dot trap tables.

The printed charge columns have no stated length unit (wires) and the
atomic constants behind them are unknown, so each table gets one global
charge scale fitted on its calibration row (matching the trap depth) and
applied unchanged to every other row of that table.
"""

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml
from scipy import optimize

from .constants import EV, species_registry
from .potentials import MirrorSpec, PotentialStack, surface_dot, surface_wire, total_potential
from .trap import analyze, find_minimum
from .units import UNITS, parse_quantity

# report column -> (reference key, TrapReport accessor, scale to reference units)
COLUMNS = (
    ("depth", "depth [neV]"),
    ("distance", "distance [um]"),
    ("nu_z", "nu_n [kHz]"),
    ("nu_x", "nu_t [kHz]"),
    ("size_z", "sigma_n [um]"),
    ("size_x", "sigma_t [um]"),
    ("scat", "scat. rate [kHz]"),
)


def load_reference_tables():
    text = resources.files("atomwire").joinpath("data/reference_tables.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def mirror_from_block(block):
    """MirrorSpec from a unit-suffixed mapping (decay_length or decay_constant)."""
    allowed = {"kind", "barrier_height", "decay_length", "decay_constant", "detuning_in_linewidths"}
    unknown = set(block) - allowed
    if unknown:
        raise ValueError(f"unknown mirror key(s): {sorted(unknown)}")
    if ("decay_length" in block) == ("decay_constant" in block):
        raise ValueError("give exactly one of decay_length or decay_constant")
    if "decay_length" in block:
        kappa = 1.0 / parse_quantity(block["decay_length"], "length")
    else:
        kappa = parse_quantity(block["decay_constant"], "inverse_length")
    detuning = block.get("detuning_in_linewidths")
    return MirrorSpec(
        kind=block.get("kind"),
        barrier_height=parse_quantity(block["barrier_height"], "energy"),
        decay_constant=kappa,
        detuning_in_linewidths=None if detuning is None else parse_quantity(detuning, "dimensionless"),
    )


def row_stack(data, table, row, scale=1.0):
    mirror = mirror_from_block(data["mirrors"][row["mirror"]])
    charge = row["charge"] * UNITS[table["charge_unit"]][1] * scale
    element = surface_wire(charge) if table["layout"] == "wire" else surface_dot(charge)
    return PotentialStack(mirror, (element,))


def _report_row(report):
    f = report.frequencies
    s = report.ground_sizes
    return {
        "depth": report.depth / EV * 1e9,
        "distance": report.distance_to_surface * 1e6,
        "nu_z": f["n"] * 1e-3,
        "nu_x": f["t"] * 1e-3,
        "size_z": s["n"] * 1e6,
        "size_x": s["t"] * 1e6,
        "scat": None if report.scattering_rate is None else report.scattering_rate * 1e-3,
    }


def calibrate(data, table, registry):
    """Charge scale that reproduces the calibration row's depth."""
    row = table["rows"][table["calibration_row"]]
    atom = registry[row["atom"]]
    target = row["depth"] * 1e-9 * EV

    def mismatch(log_scale):
        stack = row_stack(data, table, row, math.exp(log_scale))
        r = find_minimum(stack, atom)
        return math.log(-float(total_potential(stack, atom, r))) - math.log(-target)

    # Too much charge destroys the trap, so grow the bracket outward from 1.
    step = math.log(1.1)
    f0 = mismatch(0.0)
    direction = -1.0 if f0 > 0 else 1.0
    a, fa = 0.0, f0
    for _ in range(12):
        b = a + direction * step
        fb = mismatch(b)
        if fa * fb <= 0:
            lo, hi = sorted((a, b))
            return math.exp(optimize.brentq(mismatch, lo, hi, xtol=1e-10))
        a, fa = b, fb
    raise ValueError("calibration did not bracket the target depth")


@dataclass
class RowResult:
    table: int
    index: int
    atom: str
    mirror: str
    charge: float
    charge_unit: str
    scale: float
    computed: dict
    reference: dict
    report: object

    def ratios(self):
        out = {}
        for key, _ in COLUMNS:
            c, p = self.computed.get(key), self.reference.get(key)
            out[key] = None if c is None or p is None else c / p
        return out


def reproduce_tables(registry=None, calibrated=True):
    """Compute every table row; returns (results, {table id: scale})."""
    registry = species_registry() if registry is None else registry
    data = load_reference_tables()
    results, scales = [], {}
    for table in data["tables"]:
        scale = calibrate(data, table, registry) if calibrated else 1.0
        scales[table["id"]] = scale
        for i, row in enumerate(table["rows"]):
            atom = registry[row["atom"]]
            stack = row_stack(data, table, row, scale)
            report = analyze(stack, atom)
            results.append(
                RowResult(
                    table=table["id"],
                    index=i,
                    atom=row["atom"],
                    mirror=row["mirror"],
                    charge=row["charge"],
                    charge_unit=table["charge_unit"],
                    scale=scale,
                    computed=_report_row(report),
                    reference={key: row[key] for key, _ in COLUMNS},
                    report=report,
                )
            )
    return results, scales


def _fmt(x):
    if x is None:
        return "-"
    return f"{x:.4g}"


def format_tables(results, scales):
    """Aligned text: one line per row with computed | reference | ratio cells."""
    lines = []
    for table_id in sorted(scales):
        rows = [r for r in results if r.table == table_id]
        lines.append(f"Table {table_id}: charge calibration scale = {scales[table_id]:.6g}")
        header = ["atom", "mirror", "charge"] + [label for _, label in COLUMNS]
        lines.append(" | ".join(f"{h:>22}" if i > 2 else f"{h:>10}" for i, h in enumerate(header)))
        for r in rows:
            cells = [f"{r.atom:>10}", f"{r.mirror:>10}", f"{_fmt(r.charge) + ' ' + r.charge_unit:>10}"]
            ratios = r.ratios()
            for key, _ in COLUMNS:
                c, p, q = r.computed[key], r.reference[key], ratios[key]
                cells.append(f"{_fmt(c):>8}/{_fmt(p):>6} x{_fmt(q):>5}")
            lines.append(" | ".join(cells))
        lines.append("")
    return "\n".join(lines)


def tables_payload(results, scales):
    return {
        "scales": {str(k): v for k, v in sorted(scales.items())},
        "rows": [
            {
                "table": r.table,
                "index": r.index,
                "atom": r.atom,
                "mirror": r.mirror,
                "charge": r.charge,
                "charge_unit": r.charge_unit,
                "computed": r.computed,
                "reference": r.reference,
                "ratio": r.ratios(),
                "log10_tunneling_lifetime_s": None if r.report.tunneling is None else r.report.tunneling.log10_lifetime,
            }
            for r in results
        ],
    }


def within_factor(computed, reference, factor):
    return computed is not None and reference is not None and np.sign(computed) == np.sign(reference) and (
        1.0 / factor <= computed / reference <= factor
    )
