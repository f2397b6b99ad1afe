"""Strict YAML experiment configuration.

Every physical quantity carries an explicit unit (``"0.1 um"``), unknown
keys are rejected, and every error points at a line and column of the
source file. A parsed :class:`ExperimentConfig` holds SI floats only;
:func:`dump_config` writes it back in canonical SI units so that
``parse(dump(parse(text))) == parse(text)``.

Example::

    atom: Li
    mirror:
      kind: evanescent
      barrier_height: 1.0 ueV
      decay_length: 0.1 um
      detuning_in_linewidths: 1000
    layout:
      kind: wire
      linear_density: 0.33 pC_per_cm
    analysis:
      report: {}
"""

import difflib
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .constants import AtomSpecies, species_from_mapping, species_registry
from .errors import ConfigError
from .geometry import PlaneSpec, build_straight_wire, build_y_splitter
from .potentials import FiniteSegment, InfiniteLine, MirrorSpec, PointCharge, PotentialStack, surface_dot, surface_wire
from .units import format_quantity, parse_quantity

ANALYSES = ("report", "tables", "spectrum", "contour")


class _Marked(dict):
    """dict that remembers where each key and value sat in the source."""

    def __init__(self):
        super().__init__()
        self.key_marks = {}
        self.value_marks = {}
        self.mark = None


class _MarkedList(list):
    def __init__(self):
        super().__init__()
        self.marks = []
        self.mark = None


def _pos(mark):
    return (mark.line + 1, mark.column + 1) if mark is not None else (None, None)


def _construct(node, loader):
    if isinstance(node, yaml.MappingNode):
        out = _Marked()
        out.mark = node.start_mark
        for key_node, value_node in node.value:
            key = loader.construct_object(key_node, deep=True)
            if not isinstance(key, str):
                raise ConfigError(f"keys must be strings, got {key!r}", *_pos(key_node.start_mark))
            if key in out:
                raise ConfigError(f"duplicate key {key!r}", *_pos(key_node.start_mark))
            out[key] = _construct(value_node, loader)
            out.key_marks[key] = key_node.start_mark
            out.value_marks[key] = value_node.start_mark
        return out
    if isinstance(node, yaml.SequenceNode):
        out = _MarkedList()
        out.mark = node.start_mark
        for item in node.value:
            out.append(_construct(item, loader))
            out.marks.append(item.start_mark)
        return out
    return loader.construct_object(node, deep=True)


def _load_marked(text):
    loader = yaml.SafeLoader(text)
    try:
        node = loader.get_single_node()
        if node is None:
            raise ConfigError("empty configuration", 1, 1)
        return _construct(node, loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax error: {exc.problem}", *_pos(mark)) from None
    finally:
        loader.dispose()


class _Section:
    """Accessor over one mapping that turns problems into ConfigErrors."""

    def __init__(self, mapping, path, parent_mark=None):
        if not isinstance(mapping, dict):
            line, col = _pos(parent_mark)
            raise ConfigError(f"{path or 'top level'} must be a mapping", line, col)
        self.m = mapping
        self.path = path
        self.used = set()
        self.mark = getattr(mapping, "mark", parent_mark)

    def _where(self, key, value=True):
        marks = getattr(self.m, "value_marks" if value else "key_marks", {})
        return _pos(marks.get(key, self.mark))

    def fail(self, key, message, value=True):
        line, col = self._where(key, value)
        name = f"{self.path}.{key}" if self.path else key
        raise ConfigError(f"{name}: {message}", line, col)

    def has(self, key):
        return key in self.m

    def raw(self, key, default=None, required=False):
        if key not in self.m:
            if required:
                typo = difflib.get_close_matches(key, [k for k in self.m if k not in self.used], n=1)
                if typo:
                    self.fail(typo[0], f"unknown key (did you mean {key!r}?)", value=False)
                line, col = _pos(self.mark)
                raise ConfigError(f"{self.path or 'top level'}: missing required key {key!r}", line, col)
            return default
        self.used.add(key)
        return self.m[key]

    def quantity(self, key, kind, default=None, required=True):
        value = self.raw(key, required=required and default is None)
        if value is None:
            return default
        try:
            return parse_quantity(value, kind)
        except ValueError as exc:
            self.fail(key, str(exc))

    def number(self, key, default=None, integer=False, minimum=None):
        value = self.raw(key, required=default is None)
        if value is None:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)) or (integer and not isinstance(value, int)):
            self.fail(key, f"expected {'an integer' if integer else 'a number'}, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(key, f"must be >= {minimum}")
        return int(value) if integer else float(value)

    def flag(self, key, default=False):
        value = self.raw(key, default)
        if not isinstance(value, bool):
            self.fail(key, f"expected true or false, got {value!r}")
        return value

    def choice(self, key, options, default=None):
        value = self.raw(key, default, required=default is None)
        if value not in options:
            self.fail(key, f"expected one of {list(options)}, got {value!r}")
        return value

    def sub(self, key, required=True, default=None):
        value = self.raw(key, required=required)
        if value is None:
            return None if default is None else _Section(default, f"{self.path}.{key}".lstrip("."), self.mark)
        marks = getattr(self.m, "value_marks", {})
        return _Section(value, f"{self.path}.{key}".lstrip("."), marks.get(key, self.mark))

    def quantity_list(self, key, kinds, required=True):
        value = self.raw(key, required=required)
        if value is None:
            return None
        if not isinstance(value, list) or len(value) != len(kinds):
            self.fail(key, f"expected a list of {len(kinds)} entries")
        out = []
        for i, (item, kind) in enumerate(zip(value, kinds)):
            if kind == "int":
                if isinstance(item, bool) or not isinstance(item, int):
                    self.fail(key, f"entry {i} must be an integer")
                out.append(int(item))
            elif kind == "float":
                if isinstance(item, bool) or not isinstance(item, (int, float)):
                    self.fail(key, f"entry {i} must be a number")
                out.append(float(item))
            else:
                try:
                    out.append(parse_quantity(item, kind))
                except ValueError as exc:
                    self.fail(key, f"entry {i}: {exc}")
        return tuple(out)

    def finish(self):
        unknown = [k for k in self.m if k not in self.used]
        if unknown:
            self.fail(unknown[0], "unknown key", value=False)


def _freeze(obj):
    """Nested dict/list -> hashable, order-stable tuples for equality checks."""
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    return obj


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run description (SI floats throughout).

    ``atom`` is a built-in species name or a dict of SI species fields;
    ``layout`` and ``analysis_params`` are plain dicts whose quantities are SI.
    """

    atom: object
    mirror: dict
    layout: dict
    analysis: str
    analysis_params: dict = field(default_factory=dict)
    vdw_c3: float = 0.0
    gravity: bool = False

    def __eq__(self, other):
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (
            _freeze(self.atom),
            _freeze(self.mirror),
            _freeze(self.layout),
            self.analysis,
            _freeze(self.analysis_params),
            self.vdw_c3,
            self.gravity,
        )

    # --- model construction -------------------------------------------------
    def species(self, registry=None):
        registry = species_registry() if registry is None else registry
        if isinstance(self.atom, str):
            return registry[self.atom]
        return AtomSpecies(**self.atom)

    def mirror_spec(self):
        return MirrorSpec(**self.mirror)

    def elements(self):
        kind = self.layout["kind"]
        p = self.layout
        if kind == "none":
            return ()
        if kind == "wire":
            return (surface_wire(p["linear_density"], p.get("offset", 0.0)),)
        if kind == "dot":
            return (surface_dot(p["charge"]),)
        if kind == "straight_wire":
            return build_straight_wire(p["length"], p["linear_density"]).elements
        if kind == "y_splitter":
            return build_y_splitter(p["stem"], p["half_angle"], p["arms"], p["linear_density"]).elements
        out = []
        for e in p["elements"]:
            if e["type"] == "line":
                out.append(InfiniteLine(e["foot_point"], e["direction"], e["linear_density"]))
            elif e["type"] == "segment":
                out.append(FiniteSegment(e["end_a"], e["end_b"], e["linear_density"]))
            else:
                out.append(PointCharge(e["position"], e["charge"]))
        return tuple(out)

    def stack(self):
        return PotentialStack(self.mirror_spec(), self.elements(), self.vdw_c3 or None, self.gravity)

    def plane(self):
        p = self.analysis_params
        return PlaneSpec(p["origin"], p["axis_u"], p["axis_v"], p["extent"], p["resolution"])


_SPECIES_KINDS = {
    "mass": "mass",
    "polarizability_volume": "volume",
    "transition_wavelength": "length",
    "natural_linewidth": "angular_rate",
}

_VEC = ("length", "length", "length")


def _parse_atom(top, registry):
    value = top.raw("atom", required=True)
    if isinstance(value, str):
        if value not in registry:
            top.fail("atom", f"unknown species {value!r}; known: {sorted(registry)}")
        return value
    sec = top.sub("atom")
    base_name = sec.raw("base")
    base = None
    if base_name is not None:
        if base_name not in registry:
            sec.fail("base", f"unknown species {base_name!r}")
        base = registry[base_name]
    mapping = {}
    for key, kind in _SPECIES_KINDS.items():
        if sec.has(key):
            mapping[key] = sec.quantity(key, kind)
        elif base is not None:
            mapping[key] = getattr(base, key)
        else:
            sec.raw(key, required=True)
    mapping["name"] = sec.raw("name", base_name or "custom")
    sec.finish()
    try:
        AtomSpecies(**mapping)
    except ValueError as exc:
        raise ConfigError(f"atom: {exc}", *_pos(sec.mark)) from None
    return mapping


def _parse_mirror(top):
    sec = top.sub("mirror")
    kind = sec.choice("kind", ("evanescent", "magnetic"))
    height = sec.quantity("barrier_height", "energy")
    if sec.has("decay_length") == sec.has("decay_constant"):
        raise ConfigError("mirror: give exactly one of decay_length or decay_constant", *_pos(sec.mark))
    if sec.has("decay_length"):
        kappa = 1.0 / sec.quantity("decay_length", "length")
    else:
        kappa = sec.quantity("decay_constant", "inverse_length")
    detuning = None
    if kind == "evanescent":
        detuning = sec.number("detuning_in_linewidths", minimum=0)
    sec.finish()
    mirror = {"kind": kind, "barrier_height": height, "decay_constant": kappa, "detuning_in_linewidths": detuning}
    try:
        MirrorSpec(**mirror)
    except ValueError as exc:
        raise ConfigError(f"mirror: {exc}", *_pos(sec.mark)) from None
    return mirror


def _parse_layout(top):
    sec = top.sub("layout")
    kind = sec.choice("kind", ("none", "wire", "dot", "straight_wire", "y_splitter", "elements"))
    out = {"kind": kind}
    if kind == "none":
        pass
    elif kind == "wire":
        out["linear_density"] = sec.quantity("linear_density", "linear_charge")
        out["offset"] = sec.quantity("offset", "length", default=0.0, required=False)
    elif kind == "dot":
        out["charge"] = sec.quantity("charge", "charge")
    elif kind == "straight_wire":
        out["length"] = sec.quantity("length", "length")
        out["linear_density"] = sec.quantity("linear_density", "linear_charge")
    elif kind == "y_splitter":
        out["stem"] = sec.quantity("stem", "length", default=100e-6, required=False)
        out["half_angle"] = sec.quantity("half_angle", "angle", default=math.radians(10.0), required=False)
        out["arms"] = sec.quantity("arms", "length", default=100e-6, required=False)
        out["linear_density"] = sec.quantity("linear_density", "linear_charge")
    else:
        items = sec.raw("elements", required=True)
        if not isinstance(items, list) or not items:
            sec.fail("elements", "expected a non-empty list")
        elements = []
        for i, item in enumerate(items):
            mark = items.marks[i] if hasattr(items, "marks") else sec.mark
            es = _Section(item, f"layout.elements[{i}]", mark)
            etype = es.choice("type", ("line", "segment", "point"))
            if etype == "line":
                e = {
                    "type": etype,
                    "foot_point": es.quantity_list("foot_point", _VEC),
                    "direction": es.quantity_list("direction", ("float",) * 3),
                    "linear_density": es.quantity("linear_density", "linear_charge"),
                }
            elif etype == "segment":
                e = {
                    "type": etype,
                    "end_a": es.quantity_list("end_a", _VEC),
                    "end_b": es.quantity_list("end_b", _VEC),
                    "linear_density": es.quantity("linear_density", "linear_charge"),
                }
            else:
                e = {"type": etype, "position": es.quantity_list("position", _VEC), "charge": es.quantity("charge", "charge")}
            es.finish()
            elements.append(e)
        out["elements"] = elements
    sec.finish()
    return out


def _parse_grid(sec, key, required=False):
    return sec.quantity_list(key, ("length", "length", "int"), required=required)


def _parse_analysis(top):
    sec = top.sub("analysis")
    present = [k for k in sec.m if k in ANALYSES]
    if len(present) != 1:
        raise ConfigError(
            f"analysis: exactly one of {list(ANALYSES)} is required, found {present or 'none'}", *_pos(sec.mark)
        )
    kind = present[0]
    raw = sec.raw(kind)
    body = _Section(raw if raw is not None else {}, f"analysis.{kind}", sec.mark)
    params = {}
    if kind == "report":
        box = body.sub("search_box", required=False)
        if box is not None:
            params["search_box"] = tuple(box.quantity_list(axis, ("length", "length")) for axis in ("n", "t", "a"))
            box.finish()
    elif kind == "tables":
        params["calibrate"] = body.flag("calibrate", True)
    elif kind == "spectrum":
        solver = body.choice("solver", ("wire", "dot", "harmonic_selftest"))
        params["solver"] = solver
        params["n_states"] = body.number("n_states", 6, integer=True, minimum=0)
        params["wavefunctions"] = body.flag("wavefunctions", False)
        if solver == "dot":
            params["angular_m"] = body.number("angular_m", 0, integer=True)
        if solver == "harmonic_selftest":
            params["frequency"] = body.quantity("frequency", "frequency", default=100e3, required=False)
            params["points"] = body.number("points", 2000, integer=True, minimum=16)
        else:
            grid = body.sub("grid", required=False)
            if grid is not None:
                params["grid_n"] = _parse_grid(grid, "n", required=True)
                params["grid_t"] = _parse_grid(grid, "t" if solver == "wire" else "rho", required=True)
                grid.finish()
    else:
        params["origin"] = body.quantity_list("origin", _VEC)
        params["axis_u"] = body.quantity_list("axis_u", ("float",) * 3, required=False) or (1.0, 0.0, 0.0)
        params["axis_v"] = body.quantity_list("axis_v", ("float",) * 3, required=False) or (0.0, 1.0, 0.0)
        params["extent"] = body.quantity_list("extent", ("length", "length"))
        params["resolution"] = body.quantity_list("resolution", ("int", "int"))
        if min(params["extent"]) <= 0:
            body.fail("extent", "plane has zero area")
        if min(params["resolution"]) < 1:
            body.fail("resolution", "need at least one cell per axis")
        u, v = np.array(params["axis_u"]), np.array(params["axis_v"])
        if abs(u @ u - 1) > 1e-12 or abs(v @ v - 1) > 1e-12 or abs(u @ v) > 1e-12:
            body.fail("axis_u", "plane axes must be orthonormal")
    body.finish()
    sec.finish()
    return kind, params


def parse_config(text, registry=None):
    """Parse and validate YAML text into an :class:`ExperimentConfig`."""
    registry = species_registry() if registry is None else registry
    data = _load_marked(text)
    top = _Section(data, "")
    kind, params = _parse_analysis(top)
    # tables and the harmonic self-test carry their own model; the blocks are optional there
    optional = kind == "tables" or params.get("solver") == "harmonic_selftest"
    atom = _parse_atom(top, registry) if not optional or top.has("atom") else None
    mirror = _parse_mirror(top) if not optional or top.has("mirror") else None
    layout = _parse_layout(top) if not optional or top.has("layout") else None
    vdw = top.quantity("vdw_c3", "c3", default=0.0, required=False)
    if vdw < 0:
        top.fail("vdw_c3", "must be non-negative")
    gravity = top.flag("gravity", False)
    top.finish()
    return ExperimentConfig(atom, mirror, layout, kind, params, vdw, gravity)


def load_config(path, registry=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), registry)


# --- serialization -----------------------------------------------------------


def _q(value, kind):
    return format_quantity(value, kind)


def config_to_dict(cfg):
    """Canonical plain-data form (SI unit strings), stable key order."""
    if cfg.atom is None or isinstance(cfg.atom, str):
        atom = cfg.atom
    else:
        atom = {"name": cfg.atom["name"]}
        atom.update({k: _q(cfg.atom[k], kind) for k, kind in _SPECIES_KINDS.items()})
    m = cfg.mirror or {}
    mirror = None if cfg.mirror is None else {
        "kind": m["kind"],
        "barrier_height": _q(m["barrier_height"], "energy"),
        "decay_constant": _q(m["decay_constant"], "inverse_length"),
    }
    if mirror is not None and m["detuning_in_linewidths"] is not None:
        mirror["detuning_in_linewidths"] = m["detuning_in_linewidths"]
    lay = cfg.layout or {}
    kinds = {
        "linear_density": "linear_charge",
        "offset": "length",
        "charge": "charge",
        "length": "length",
        "stem": "length",
        "arms": "length",
        "half_angle": "angle",
    }
    layout = {"kind": lay["kind"]} if lay else None
    for key, value in lay.items():
        if key in kinds:
            layout[key] = _q(value, kinds[key])
    if lay.get("kind") == "elements":
        items = []
        for e in lay["elements"]:
            item = {"type": e["type"]}
            for key, value in e.items():
                if key in ("foot_point", "end_a", "end_b", "position"):
                    item[key] = [_q(x, "length") for x in value]
                elif key == "direction":
                    item[key] = [float(x) for x in value]
                elif key in kinds:
                    item[key] = _q(value, kinds[key])
            items.append(item)
        layout["elements"] = items
    p = cfg.analysis_params
    body = {}
    if cfg.analysis == "report":
        if "search_box" in p:
            body["search_box"] = {
                axis: [_q(x, "length") for x in pair] for axis, pair in zip(("n", "t", "a"), p["search_box"])
            }
    elif cfg.analysis == "tables":
        body["calibrate"] = p["calibrate"]
    elif cfg.analysis == "spectrum":
        body = {"solver": p["solver"], "n_states": p["n_states"], "wavefunctions": p["wavefunctions"]}
        if "angular_m" in p:
            body["angular_m"] = p["angular_m"]
        if "frequency" in p:
            body["frequency"] = _q(p["frequency"], "frequency")
            body["points"] = p["points"]
        if "grid_n" in p:
            second = "t" if p["solver"] == "wire" else "rho"
            body["grid"] = {
                "n": [_q(p["grid_n"][0], "length"), _q(p["grid_n"][1], "length"), p["grid_n"][2]],
                second: [_q(p["grid_t"][0], "length"), _q(p["grid_t"][1], "length"), p["grid_t"][2]],
            }
    else:
        body = {
            "origin": [_q(x, "length") for x in p["origin"]],
            "axis_u": [float(x) for x in p["axis_u"]],
            "axis_v": [float(x) for x in p["axis_v"]],
            "extent": [_q(x, "length") for x in p["extent"]],
            "resolution": [int(x) for x in p["resolution"]],
        }
    out = {}
    for key, value in (("atom", atom), ("mirror", mirror), ("layout", layout)):
        if value is not None:
            out[key] = value
    if cfg.vdw_c3:
        out["vdw_c3"] = _q(cfg.vdw_c3, "c3")
    if cfg.gravity:
        out["gravity"] = True
    out["analysis"] = {cfg.analysis: body}
    return out


def dump_config(cfg):
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=False)
