"""Command-line front end: ``atomwire <command> --config PATH [--out DIR] [--format text|json]``.

Exit codes: 0 ok, 1 configuration error, 2 no trap, 3 numerical failure,
4 I/O failure.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .config import config_to_dict, load_config
from .constants import EV, HBAR, registry_summary, species_registry
from .eigen import (
    Grid1D,
    Grid2D,
    barrier_height_position,
    default_wire_grid,
    dot_bound_count,
    solve_1d,
    solve_dot,
    solve_wire_cross_section,
    spacing_law_check,
)
from .errors import AtomWireError, ConfigError, GridLeakError, NoTrapError
from .geometry import contour_payload, sample_plane, write_contour_csv
from .potentials import N, T
from .tables import format_tables, reproduce_tables, tables_payload
from .trap import SIZE_CONVENTION, analyze, find_minimum, harmonic_modes
from .units import UNITS

EXIT_OK, EXIT_CONFIG, EXIT_NO_TRAP, EXIT_NUMERICS, EXIT_IO = 0, 1, 2, 3, 4

CONVENTIONS = {
    "frame": "n = height above mirror, t = in-surface transverse, a = along the guide",
    "frequency": "nu = omega / (2 pi)",
    "ground_size": SIZE_CONVENTION,
    "polarization": "U = -2 pi eps0 alpha |E|^2 with alpha a polarizability volume",
    "scattering_rate": "U_mirror(n_min) * Gamma / (hbar * Delta), evanescent mirrors only",
    "energy_unit": "neV",
}


class _IOFailure(Exception):
    pass


def _neV(x):
    return float(x) / EV * 1e9


def _dumps(payload):
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _jsonable(x):
    """Replace non-finite floats by None so JSON stays strict and portable."""
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write(out_dir, name, text):
    if out_dir is None:
        return None
    path = os.path.join(out_dir, name)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def _provenance(cfg, registry, calibration):
    return {
        "tool": f"atomwire {__version__}",
        "config": config_to_dict(cfg),
        "constants": registry_summary(registry),
        "conventions": dict(CONVENTIONS, charge_calibration=calibration),
    }


def _header_lines(provenance):
    lines = [f"# {provenance['tool']}"]
    for name, c in provenance["constants"].items():
        lines.append(
            f"# species {name}: mass {c['mass_kg']:.6e} kg, alpha {c['polarizability_volume_m3']:.4e} m^3, "
            f"lambda {c['transition_wavelength_m'] * 1e9:.6g} nm, Gamma {c['natural_linewidth_rad_per_s']:.6e} rad/s"
        )
    for key, value in sorted(provenance["conventions"].items()):
        lines.append(f"# {key}: {value}")
    return lines


def _charge_cell(cfg):
    lay = cfg.layout
    if "linear_density" in lay:
        return f"{lay['linear_density'] / UNITS['pC_per_cm'][1]:.4g} pC/cm"
    if lay["kind"] == "none":
        return "none"
    if lay["kind"] == "dot":
        return f"{lay['charge'] / UNITS['e'][1]:.4g} e"
    total = sum(e.total_charge if hasattr(e, "total_charge") else e.charge for e in cfg.elements())
    return f"{total * 1e12:.4g} pC"


# --- commands ----------------------------------------------------------------


def run_report(cfg, registry, out_dir, fmt):
    atom = cfg.species(registry)
    stack = cfg.stack()
    box = cfg.analysis_params.get("search_box")
    report = analyze(stack, atom, search_box=box)
    prov = _provenance(cfg, registry, "none; charges are taken in SI exactly as configured")
    payload = _jsonable({"provenance": prov, "report": report.to_dict(), "atom": atom.name})
    text = _dumps(payload)
    _write(out_dir, "report.json", text)
    if fmt == "json":
        return text
    d = payload["report"]
    f, s = d["frequency_kHz"], d["ground_size_um"]
    scat = d["scattering_rate_kHz"]
    cols = ["charge", "depth [neV]", "distance [um]", "nu_n [kHz]", "nu_t [kHz]", "sigma_n [um]", "sigma_t [um]",
            "scat. rate [kHz]"]
    cells = [
        _charge_cell(cfg),
        f"{d['depth_neV']:.4g}",
        f"{d['distance_um']:.4g}",
        f"{f['n']:.4g}",
        f"{f['t']:.4g}",
        f"{s['n']:.4g}",
        f"{s['t']:.4g}",
        "-" if scat is None else f"{scat:.4g}",
    ]
    widths = [max(len(c), len(v)) for c, v in zip(cols, cells)]
    lines = _header_lines(prov)
    lines.append(" | ".join(c.rjust(w) for c, w in zip(cols, widths)))
    lines.append(" | ".join(v.rjust(w) for v, w in zip(cells, widths)))
    life = d["log10_tunneling_lifetime_s"]
    axial = "free" if "a" not in f else f"{f['a']:.4g}"
    lines.append(f"nu_a [kHz]: {axial}; free axes: {', '.join(d['free_axes']) or 'none'}")
    lines.append(
        "Lamb-Dicke: " + ", ".join(f"{k} {v:.4g}" for k, v in d["lamb_dicke"].items() if v is not None)
    )
    lines.append("tunneling lifetime: " + ("n/a" if life is None else f"10^{life:.4g} s"))
    return "\n".join(lines) + "\n"


def run_tables(cfg, registry, out_dir, fmt):
    calibrate = cfg.analysis_params.get("calibrate", True)
    results, scales = reproduce_tables(registry, calibrated=calibrate)
    calib = (
        "per-table charge scale fitted on the calibration row depth: "
        + ", ".join(f"table {k} x{v:.6g}" for k, v in sorted(scales.items()))
        if calibrate
        else "none"
    )
    prov = _provenance(cfg, registry, calib)
    payload = _jsonable({"provenance": prov, "tables": tables_payload(results, scales)})
    text = _dumps(payload)
    _write(out_dir, "tables.json", text)
    if fmt == "json":
        return text
    return "\n".join(_header_lines(prov)) + "\n" + format_tables(results, scales)


def _enlarge(grid, solver, grow=1.5):
    """Same spacing, domain grown away from the mirror (and the axis for dots)."""
    n, t = grid.axis_n, grid.axis_t
    n_new = Grid1D(n.lo, n.lo + grow * (n.hi - n.lo), round(grow * (n.points + 1)) - 1)
    if solver == "dot":
        t_new = Grid1D(0.0, grow * t.hi, round(grow * (t.points + 0.5) - 0.5))
    else:
        t_new = t.scaled(grow)
    return Grid2D(n_new, t_new, grid.max_points)


def _suggest(grid, solver):
    """Enlarged grid in config syntax."""
    second = "rho" if solver == "dot" else "t"
    n, t = grid.axis_n, grid.axis_t
    try:
        big = _enlarge(grid, solver)
        n, t = big.axis_n, big.axis_t
    except ValueError:  # over the point cap: suggest the domain anyway
        pass

    def fmt(axis):
        return f"[{axis.lo!r} m, {axis.hi!r} m, {axis.points}]"

    return f"grid: {{n: {fmt(n)}, {second}: {fmt(t)}}}"


def _spectrum_grid(cfg, stack, atom, solver, n_states):
    p = cfg.analysis_params
    if "grid_n" in p:
        return Grid2D(Grid1D(*p["grid_n"]), Grid1D(*p["grid_t"]))
    r = find_minimum(stack, atom)
    if solver == "wire":
        modes = harmonic_modes(stack, atom, r)
        return default_wire_grid(stack, atom, r, modes, widths=12.0 + 2.0 * n_states)
    barrier = barrier_height_position(stack, atom, r)
    span = 8.0 * float(r[N])
    return Grid2D(Grid1D(barrier, barrier + span, 200), Grid1D(0.0, span, 200))


def _harmonic_selftest(cfg, atom):
    p = cfg.analysis_params
    omega = 2 * math.pi * p["frequency"]
    sigma = math.sqrt(HBAR / (atom.mass * omega))
    grid = Grid1D(-12 * sigma, 12 * sigma, p["points"])
    x = grid.nodes
    spec = solve_1d(0.5 * atom.mass * omega**2 * x**2, atom.mass, grid, p["n_states"])
    rows = []
    for k, E in enumerate(spec.energies):
        exact = (k + 0.5) * HBAR * omega
        rows.append({"n": k, "computed_neV": _neV(E), "exact_neV": _neV(exact), "relative_error": E / exact - 1})
    return spec, rows


def _wavefunction_csv(spec, k, solver, prov):
    g = spec.grid
    second = "rho" if solver == "dot" else "t"
    lines = [
        f"# grid n {g.axis_n.lo!r} {g.axis_n.hi!r} {g.axis_n.points}",
        f"# grid {second} {g.axis_t.lo!r} {g.axis_t.hi!r} {g.axis_t.points}",
        f"# state {k} energy_neV {_neV(spec.energies[k])!r}",
        "# rows: one per n grid line; columns: " + second + " grid nodes; values: psi [1/m]",
        "# provenance " + json.dumps(prov, sort_keys=True),
    ]
    lines.extend(",".join(repr(float(v)) for v in row) for row in spec.wavefunctions[k])
    return "\n".join(lines) + "\n"


def run_spectrum(cfg, registry, out_dir, fmt):
    p = cfg.analysis_params
    atom = cfg.species(registry)
    solver, n_states = p["solver"], p["n_states"]
    prov = _provenance(cfg, registry, "none; charges are taken in SI exactly as configured")
    result = {"solver": solver, "n_states": n_states}
    oracle = None
    if solver == "harmonic_selftest":
        spec, oracle = _harmonic_selftest(cfg, atom)
        result["oracle"] = oracle
        grid = None
    elif n_states == 0:
        spec, grid = None, None
    else:
        stack = cfg.stack()
        grid = _spectrum_grid(cfg, stack, atom, solver, n_states)
        # a default grid may grow a few times; an explicit one is taken as given
        attempts = 1 if "grid_n" in p else 4
        for attempt in range(attempts):
            try:
                if solver == "wire":
                    spec = solve_wire_cross_section(stack, atom, grid, n_states)
                else:
                    spec = solve_dot(stack, atom, grid, p["angular_m"], n_states)
                break
            except GridLeakError as exc:
                if attempt == attempts - 1:
                    exc.suggested_grid = _suggest(grid, solver)
                    raise
                try:
                    grid = _enlarge(grid, solver)
                except ValueError:
                    exc.suggested_grid = _suggest(grid, solver)
                    raise exc from None
        if solver == "dot":
            result["bound_count_all_m"] = dot_bound_count(stack, atom, grid)
    energies = [] if spec is None else [_neV(E) for E in spec.energies]
    bound = sum(e < 0 for e in energies) if solver != "harmonic_selftest" else 0
    result["energies_neV"] = energies
    result["bound_count"] = bound
    if spec is not None and "widths" in spec.info:
        result["rms_widths_um"] = [[w * 1e6 for w in pair] for pair in spec.info["widths"]]
    if spec is not None and spec.box_limited is not None:
        result["box_limited"] = [bool(b) for b in spec.box_limited]
    if grid is not None:
        second = "rho" if solver == "dot" else "t"
        result["grid"] = {
            "n": [grid.axis_n.lo, grid.axis_n.hi, grid.axis_n.points],
            second: [grid.axis_t.lo, grid.axis_t.hi, grid.axis_t.points],
        }
    fit = spacing_law_check(spec) if spec is not None and solver != "harmonic_selftest" else None
    if fit is not None:
        result["spacing_fit"] = {
            "applicable": fit.applicable,
            "ratio": fit.ratio,
            "amplitude_neV": _neV(fit.amplitude) if fit.applicable else None,
            "rms_log_residual": fit.rms_log_residual,
            "states_used": fit.states_used,
            "reason": fit.reason,
        }
    payload = _jsonable({"provenance": prov, "spectrum": result})
    text = _dumps(payload)
    _write(out_dir, "spectrum.json", text)
    if p["wavefunctions"] and spec is not None and grid is not None and out_dir is not None:
        for k in range(len(spec.energies)):
            _write(out_dir, f"wavefunction_{k:03d}.csv", _wavefunction_csv(spec, k, solver, prov))
    if fmt == "json":
        return text
    lines = _header_lines(prov)
    if oracle is not None:
        lines.append("harmonic self-test: n | computed [neV] | exact [neV] | relative error")
        for row in oracle:
            lines.append(
                f"{row['n']:>3} | {row['computed_neV']:.9g} | {row['exact_neV']:.9g} | {row['relative_error']:.3e}"
            )
        return "\n".join(lines) + "\n"
    lines.append(f"bound_count: {bound}")
    if "bound_count_all_m" in result:
        lines.append(f"bound_count over all m: {result['bound_count_all_m']}")
    for k, e in enumerate(energies):
        flag = " (box-limited)" if result.get("box_limited", [False] * (k + 1))[k] else ""
        lines.append(f"E[{k}] = {e:.6g} neV{flag}")
    if fit is None:
        lines.append("spacing fit: no states")
    elif fit.applicable:
        lines.append(
            f"spacing fit: |E_k| ~ A c^k with c = {fit.ratio:.4g}, rms log residual {fit.rms_log_residual:.3g} "
            f"over {fit.states_used} states"
        )
    else:
        lines.append(f"spacing fit: not applicable ({fit.reason})")
    return "\n".join(lines) + "\n"


def run_contour(cfg, registry, out_dir, fmt):
    atom = cfg.species(registry)
    sample = sample_plane(cfg.stack(), atom, cfg.plane())
    prov = _provenance(cfg, registry, "none; charges are taken in SI exactly as configured")
    payload = _jsonable(contour_payload(sample, prov))
    text = _dumps(payload)
    if out_dir is not None:
        try:
            write_contour_csv(sample, os.path.join(out_dir, "contour.csv"), prov)
        except OSError as exc:
            raise _IOFailure(f"cannot write contour.csv: {exc.strerror or exc}") from None
        _write(out_dir, "contour.json", text)
    if np.all(sample.mask):
        summary = {"min_neV": None, "max_neV": None, "argmin_m": None, "local_minima": 0}
    else:
        i, j = sample.argmin()
        vals = sample.values[~sample.mask]
        summary = {
            "min_neV": _neV(vals.min()),
            "max_neV": _neV(vals.max()),
            "argmin_m": [float(x) for x in sample.plane.points()[i, j]],
            "local_minima": len(sample.local_minima()),
        }
    if fmt == "json":
        return _dumps(_jsonable({"summary": summary}))
    if summary["min_neV"] is None:
        return "contour: every point is masked\n"
    pos = " ".join(f"{x:.6g}" for x in summary["argmin_m"])
    return (
        f"contour: min {summary['min_neV']:.6g} neV at ({pos}) m, max {summary['max_neV']:.6g} neV, "
        f"{summary['local_minima']} interior local minima\n"
    )


COMMANDS = {"report": run_report, "tables": run_tables, "spectrum": run_spectrum, "contour": run_contour}


def build_parser():
    parser = argparse.ArgumentParser(prog="atomwire", description="Atom guides and traps above atom mirrors.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML experiment description")
    parser.add_argument("--out", help="directory for output files (created if missing)")
    parser.add_argument("--format", choices=("text", "json"), default="text", help="standard output format")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        registry = species_registry()
    except (OSError, ValueError) as exc:
        print(f"error: constants override: {exc}", file=err)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, registry)
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=err)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror or exc}", file=err)
        return EXIT_CONFIG
    if cfg.analysis != args.command:
        print(f"error: config holds a '{cfg.analysis}' analysis but the command is '{args.command}'", file=err)
        return EXIT_CONFIG
    if args.out is not None:
        try:
            os.makedirs(args.out, exist_ok=True)
        except OSError as exc:
            print(f"error: cannot create output directory {args.out}: {exc.strerror or exc}", file=err)
            return EXIT_IO
    try:
        output = COMMANDS[args.command](cfg, registry, args.out, args.format)
    except _IOFailure as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    except NoTrapError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_NO_TRAP
    except GridLeakError as exc:
        print(f"error: {exc}", file=err)
        if exc.suggested_grid:
            print(f"suggestion: enlarge the grid, e.g. {exc.suggested_grid}", file=err)
        return EXIT_NUMERICS
    except (AtomWireError, ValueError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=err)
        return EXIT_NUMERICS
    sys.stdout.write(output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
