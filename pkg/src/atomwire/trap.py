"""Minimum search, harmonic analysis and trap figures of merit.

A trap is characterised at its local minimum by the Hessian of the total
potential: its positive eigenvalues give the harmonic frequencies, ground
state widths and Lamb-Dicke parameters. Eigenvalues that vanish relative to
the stiffest one mark free (guided) directions, e.g. along an infinite wire.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .constants import G_ACCEL, HBAR
from .errors import ImmediateLossError, NoTrapError, NotAMinimumError, UnsupportedMirrorError
from .potentials import N, mirror_potential, total_potential

AXIS_LABELS = ("n", "t", "a")

# Hessian eigenvalues below this fraction of the largest are free directions.
FREE_AXIS_RATIO = 1e-6

# Ground-state width convention: sigma = sqrt(hbar / (2 m omega)).
SIZE_CONVENTION = "sigma = sqrt(hbar/(2 m omega)) (rms width)"


def default_search_box(stack):
    """Region above the mirror barrier in units of the decay length."""
    ell = stack.mirror.decay_length
    return ((2.5 * ell, 40.0 * ell), (-10.0 * ell, 10.0 * ell), (-10.0 * ell, 10.0 * ell))


def _box_arrays(search_box):
    box = np.asarray(search_box, dtype=float)
    if box.shape != (3, 2) or np.any(box[:, 1] < box[:, 0]):
        raise ValueError("search_box must be three (lo, hi) pairs with lo <= hi")
    if box[N, 0] <= 0:
        raise ValueError("search_box must lie strictly above the surface")
    return box[:, 0], box[:, 1] - box[:, 0]


def gradient(stack, atom, r, step):
    """Central-difference gradient of the total potential."""
    r = np.asarray(r, dtype=float)
    offsets = np.eye(3) * step
    plus = total_potential(stack, atom, r + offsets)
    minus = total_potential(stack, atom, r - offsets)
    return (plus - minus) / (2 * step)


def _hessian_once(stack, atom, r, h):
    eye = np.eye(3)
    stencil = [r]
    for i in range(3):
        stencil += [r + h * eye[i], r - h * eye[i]]
    pairs = [(0, 1), (0, 2), (1, 2)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            stencil.append(r + h * (si * eye[i] + sj * eye[j]))
    u = total_potential(stack, atom, np.array(stencil))
    H = np.empty((3, 3))
    for i in range(3):
        H[i, i] = (u[1 + 2 * i] - 2 * u[0] + u[2 + 2 * i]) / h**2
    for k, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = u[7 + 4 * k : 11 + 4 * k]
        H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * h**2)
    return H


def hessian(stack, atom, r, step=None, rtol=1e-6, max_halvings=12):
    """Symmetric 3x3 Hessian (J/m^2) by central differences.

    The step starts at ``step`` (default 1e-3 of the height above the mirror)
    and is halved until successive Hessians agree to ``rtol``; the returned
    matrix is the Richardson extrapolation of the last two.
    """
    r = np.asarray(r, dtype=float)
    h = 1e-3 * r[N] if step is None else float(step)
    previous = _hessian_once(stack, atom, r, h)
    for _ in range(max_halvings):
        h /= 2
        current = _hessian_once(stack, atom, r, h)
        scale = np.max(np.abs(current))
        change = np.max(np.abs(current - previous))
        extrapolated = (4 * current - previous) / 3
        if scale == 0 or change <= rtol * scale:
            break
        previous = current
    H = 0.5 * (extrapolated + extrapolated.T)
    k_max = np.max(np.abs(np.diag(H)))
    if np.any(np.diag(H) < -FREE_AXIS_RATIO * k_max):
        raise NotAMinimumError(f"negative curvature at claimed minimum: diag = {np.diag(H)}")
    return H


def _confined_modes(H):
    k, vecs = np.linalg.eigh(H)
    k_max = np.max(np.abs(k))
    if np.any(k < -FREE_AXIS_RATIO * k_max):
        raise NotAMinimumError(f"Hessian has negative eigenvalue(s): {k}")
    confined = k > FREE_AXIS_RATIO * k_max
    return k, vecs, confined


def _label_modes(vecs):
    """Assign each eigenvector the frame axis it is most aligned with."""
    rows, cols = optimize.linear_sum_assignment(-np.abs(vecs))
    labels = [None] * 3
    for axis, mode in zip(rows, cols):
        labels[mode] = AXIS_LABELS[axis]
    return labels


def _polish(stack, atom, r, lo, extent, iterations=30):
    """Newton iterations in the confined subspace, FD gradient and Hessian."""
    r = r.copy()
    for _ in range(iterations):
        scale = r[N]
        H = hessian(stack, atom, r, step=1e-3 * scale)
        k, vecs, confined = _confined_modes(H)
        g = gradient(stack, atom, r, 1e-5 * scale)
        coeff = (vecs.T @ g)[confined] / k[confined]
        step = -(vecs[:, confined] @ coeff)
        limit = 0.05 * scale
        norm = np.linalg.norm(step)
        if norm > limit:
            step *= limit / norm
        r = np.clip(r + step, lo, lo + extent)
        if norm < 1e-13 * scale:
            break
    return r


def find_minimum(stack, atom, search_box=None, n_descents=4):
    """Local minimizer of the total potential inside ``search_box``.

    ``search_box`` is ``((n_lo, n_hi), (t_lo, t_hi), (a_lo, a_hi))`` in metres
    with ``n_lo > 0``. A fixed 5x5x5 grid of cell-centred seeds is ranked by
    energy; the ``n_descents`` lowest are refined with bounded Nelder-Mead and
    a Newton polish. Raises :class:`NoTrapError` when the best candidate sits
    on the box boundary, i.e. the potential has no interior minimum there.
    """
    if search_box is None:
        search_box = default_search_box(stack)
    lo, extent = _box_arrays(search_box)
    frac = (np.arange(5) + 0.5) / 5
    grid = np.stack(np.meshgrid(frac, frac, frac, indexing="ij"), axis=-1).reshape(-1, 3)
    seeds = lo + grid * extent
    u_seeds = total_potential(stack, atom, seeds)
    order = np.lexsort((seeds[:, 2], seeds[:, 1], seeds[:, 0], u_seeds))
    energy_scale = float(np.max(np.abs(u_seeds))) or 1.0
    safe_extent = np.where(extent > 0, extent, 1.0)

    def scaled(x):
        return float(total_potential(stack, atom, lo + x * extent)) / energy_scale

    bounds = [(0.0, 1.0)] * 3
    candidates = []
    for idx in order[:n_descents]:
        x0 = grid[idx]
        res = optimize.minimize(
            scaled,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": 1e-7, "fatol": 1e-13, "maxiter": 4000, "maxfev": 8000},
        )
        r = lo + np.clip(res.x, 0, 1) * extent
        candidates.append((float(total_potential(stack, atom, r)), tuple(r)))
    candidates.sort()
    best = np.array(candidates[0][1])

    rel = (best - lo) / safe_extent
    tol = 1e-4
    g = gradient(stack, atom, best, 1e-5 * best[N])
    for i in range(3):
        if extent[i] == 0:
            continue
        pushing_low = rel[i] < tol and g[i] > 0
        pushing_high = rel[i] > 1 - tol and g[i] < 0
        if pushing_low or pushing_high:
            raise NoTrapError("no interior minimum in the search region")
    try:
        return _polish(stack, atom, best, lo, extent)
    except NotAMinimumError:
        raise NoTrapError("no interior minimum in the search region") from None


@dataclass
class HarmonicModes:
    """Principal-axis harmonic data at a minimum (confined axes only)."""

    labels: list
    vectors: np.ndarray  # columns are principal axes
    curvatures: np.ndarray  # J/m^2
    frequencies: np.ndarray  # Hz
    ground_sizes: np.ndarray  # m
    lamb_dicke: np.ndarray
    free_axes: list = field(default_factory=list)

    def by_label(self, name):
        """Dict label -> value for one of the per-axis arrays."""
        return dict(zip(self.labels, getattr(self, name)))


def harmonic_modes(stack, atom, min_position, step=None):
    """Frequencies, ground-state widths and Lamb-Dicke parameters at a minimum."""
    H = hessian(stack, atom, min_position, step=step)
    return modes_from_hessian(H, atom)


def modes_from_hessian(H, atom):
    k, vecs, confined = _confined_modes(H)
    labels = _label_modes(vecs)
    omega = np.sqrt(k[confined] / atom.mass)
    sizes = np.sqrt(HBAR / (2 * atom.mass * omega))
    keep = [labels[i] for i in range(3) if confined[i]]
    free = [labels[i] for i in range(3) if not confined[i]]
    return HarmonicModes(
        labels=keep,
        vectors=vecs[:, confined],
        curvatures=k[confined],
        frequencies=omega / (2 * math.pi),
        ground_sizes=sizes,
        lamb_dicke=atom.k_transition * sizes,
        free_axes=free,
    )


def _ray_directions(free_vectors, count=64):
    """Uniform directions in the confined subspace plus the frame axes."""
    basis = np.eye(3)
    if free_vectors.shape[1]:
        proj = basis - free_vectors @ free_vectors.T
    else:
        proj = basis
    dims = 3 - free_vectors.shape[1]
    if dims == 3:
        i = np.arange(count) + 0.5
        polar = np.arccos(1 - 2 * i / count)
        azim = math.pi * (1 + 5**0.5) * i
        dirs = np.stack([np.cos(polar), np.sin(polar) * np.cos(azim), np.sin(polar) * np.sin(azim)], -1)
    elif dims == 2:
        w, v = np.linalg.eigh(proj)
        e1, e2 = v[:, 1], v[:, 2]
        ang = 2 * math.pi * np.arange(count) / count
        dirs = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
    else:
        w, v = np.linalg.eigh(proj)
        dirs = np.array([v[:, 2], -v[:, 2]])
    axes = np.concatenate([basis, -basis]) @ proj.T
    norms = np.linalg.norm(axes, axis=1)
    axes = axes[norms > 1e-6] / norms[norms > 1e-6, None]
    return np.concatenate([dirs, axes])


def _ray_asymptote(stack, atom, origin, direction):
    """Potential at infinity along a ray that never reaches the surface."""
    value = 0.0
    if direction[N] <= 1e-12:  # horizontal: surface terms persist
        n = origin[N]
        value += float(mirror_potential(stack.mirror, n))
        if stack.vdw_coefficient:
            value -= stack.vdw_coefficient / n**3
        if stack.gravity:
            value += atom.mass * G_ACCEL * n
    elif stack.gravity:
        return math.inf
    return value


def _ray_maximum(stack, atom, origin, direction, samples=400):
    n0 = origin[N]
    if direction[N] < -1e-12:
        s_end = (n0 * (1 - 1e-4)) / -direction[N]
        s = s_end * np.linspace(0, 1, samples)[1:]
        asymptote = -math.inf
    else:
        s = n0 * np.geomspace(1e-3, 1e6, samples)
        asymptote = _ray_asymptote(stack, atom, origin, direction)
    pts = origin + s[:, None] * direction
    u = total_potential(stack, atom, pts)
    i = int(np.argmax(u))
    peak = float(u[i])
    if 0 < i < len(s) - 1:
        res = optimize.minimize_scalar(
            lambda x: -float(total_potential(stack, atom, origin + x * direction)),
            bounds=(s[i - 1], s[i + 1]),
            method="bounded",
            options={"xatol": 1e-12 * n0},
        )
        peak = max(peak, -float(res.fun))
    return max(peak, asymptote)


def escape_threshold(stack, atom, min_position, modes=None):
    """Lowest barrier over straight escape rays from the minimum."""
    r = np.asarray(min_position, dtype=float)
    if modes is None:
        modes = harmonic_modes(stack, atom, r)
    H_vecs = modes.vectors
    # Free directions are the orthogonal complement of the confined modes.
    proj_conf = H_vecs @ H_vecs.T
    w, v = np.linalg.eigh(np.eye(3) - proj_conf)
    free_vectors = v[:, w > 0.5]
    dirs = _ray_directions(free_vectors)
    return min(_ray_maximum(stack, atom, r, d) for d in dirs)


def trap_depth(stack, atom, min_position, modes=None):
    """``U(min)`` minus the lowest escape threshold (negative when bound)."""
    r = np.asarray(min_position, dtype=float)
    u_min = float(total_potential(stack, atom, r))
    return u_min - escape_threshold(stack, atom, r, modes)


def scattering_rate(mirror, atom, min_position):
    """Photon scattering rate (1/s) from the evanescent light at the minimum.

    Two-level far-detuned relation: rate = U_light * Gamma / (hbar * Delta).
    """
    if mirror.kind != "evanescent":
        raise UnsupportedMirrorError("scattering rate is only defined for evanescent-wave mirrors")
    u_light = float(mirror_potential(mirror, np.asarray(min_position, dtype=float)[N]))
    detuning = mirror.detuning_in_linewidths * atom.natural_linewidth
    return u_light * atom.natural_linewidth / (HBAR * detuning)


@dataclass(frozen=True)
class Tunneling:
    lifetime: float  # s, may be inf
    log10_lifetime: float
    action: float  # dimensionless WKB exponent integral
    energy: float  # J
    turning_points: tuple  # heights (m)


def wkb_tunneling(stack, atom, min_position, modes=None, samples=4000):
    """WKB tunneling toward the surface along the straight path ``-n``."""
    r = np.asarray(min_position, dtype=float)
    if modes is None:
        modes = harmonic_modes(stack, atom, r)
    freqs = modes.by_label("frequencies")
    if "n" not in freqs:
        raise NotAMinimumError("no confined mode along the surface normal")
    nu_n = freqs["n"]
    u_min = float(total_potential(stack, atom, r))
    energy = u_min + 0.5 * HBAR * 2 * math.pi * nu_n
    n0 = r[N]

    def profile(n):
        p = np.array(r, dtype=float)
        p = np.broadcast_to(p, np.shape(n) + (3,)).copy()
        p[..., N] = n
        return total_potential(stack, atom, p) - energy

    n_grid = n0 * np.linspace(1.0, 1e-6, samples)
    v = profile(n_grid)
    above = np.nonzero(v > 0)[0]
    if above.size == 0:
        raise ImmediateLossError("no barrier between the minimum and the surface")
    i1 = above[0]
    n_in = optimize.brentq(profile, n_grid[i1], n_grid[i1 - 1], xtol=1e-15 * n0, rtol=1e-14)
    below_after = np.nonzero(v[i1:] <= 0)[0]
    if below_after.size:
        i2 = i1 + below_after[0]
        n_out = optimize.brentq(profile, n_grid[i2], n_grid[i2 - 1], xtol=1e-15 * n0, rtol=1e-14)
    else:
        n_out = n_grid[-1]

    def integrand(n):
        return math.sqrt(max(2 * atom.mass * float(profile(n)), 0.0)) / HBAR

    # break the interval at the sampled barrier top for quad's benefit
    seg = v[i1 : (i1 + below_after[0]) if below_after.size else None]
    n_peak = n_grid[i1 + int(np.argmax(seg))]
    points = [n_peak] if n_out < n_peak < n_in else None
    action, _ = integrate.quad(integrand, n_out, n_in, epsrel=1e-6, epsabs=0, limit=400, points=points)
    log_rate = math.log(nu_n) - 2 * action
    log10_lifetime = -log_rate / math.log(10)
    lifetime = math.exp(-log_rate) if -log_rate < 700 else math.inf
    return Tunneling(lifetime, log10_lifetime, action, energy, (n_out, n_in))


def wkb_lifetime(stack, atom, min_position, modes=None):
    """Tunneling lifetime (s) of the harmonic ground state; may be ``inf``."""
    return wkb_tunneling(stack, atom, min_position, modes).lifetime


def loading_estimate(density, cross_section, length):
    """Expected atom count: density x guide cross section x guide length."""
    if density < 0 or cross_section < 0 or length < 0:
        raise ValueError("loading inputs must be non-negative")
    return density * cross_section * length


@dataclass
class TrapReport:
    min_position: np.ndarray
    potential_at_min: float
    depth: float
    distance_to_surface: float
    modes: HarmonicModes
    scattering_rate: Optional[float]
    tunneling: Optional[Tunneling]

    @property
    def frequencies(self):
        return self.modes.by_label("frequencies")

    @property
    def ground_sizes(self):
        return self.modes.by_label("ground_sizes")

    @property
    def lamb_dicke(self):
        return self.modes.by_label("lamb_dicke")

    @property
    def tunneling_lifetime(self):
        return None if self.tunneling is None else self.tunneling.lifetime

    def to_dict(self):
        """JSON-ready dict in report units (neV, um, kHz)."""
        from .constants import EV

        def per_axis(values, scale):
            return {k: float(v) * scale for k, v in values.items()}

        tun = self.tunneling
        return {
            "min_position_um": [float(x) * 1e6 for x in self.min_position],
            "depth_neV": self.depth / EV * 1e9,
            "potential_at_min_neV": self.potential_at_min / EV * 1e9,
            "distance_um": self.distance_to_surface * 1e6,
            "frequency_kHz": per_axis(self.frequencies, 1e-3),
            "ground_size_um": per_axis(self.ground_sizes, 1e6),
            "lamb_dicke": per_axis(self.lamb_dicke, 1.0),
            "free_axes": list(self.modes.free_axes),
            "scattering_rate_kHz": None if self.scattering_rate is None else self.scattering_rate * 1e-3,
            "tunneling_lifetime_s": None if tun is None or math.isinf(tun.lifetime) else tun.lifetime,
            "log10_tunneling_lifetime_s": None if tun is None else tun.log10_lifetime,
        }


def harmonic_report(stack, atom, min_position):
    """TrapReport at a known minimum (no search)."""
    return analyze(stack, atom, min_position=min_position)


def analyze(stack, atom, search_box=None, min_position=None):
    """Full trap characterisation at the (found or given) minimum."""
    r = find_minimum(stack, atom, search_box) if min_position is None else np.asarray(min_position, float)
    modes = harmonic_modes(stack, atom, r)
    depth = trap_depth(stack, atom, r, modes)
    rate = scattering_rate(stack.mirror, atom, r) if stack.mirror.kind == "evanescent" else None
    try:
        tun = wkb_tunneling(stack, atom, r, modes)
    except ImmediateLossError:
        tun = None
    return TrapReport(
        min_position=r,
        potential_at_min=float(total_potential(stack, atom, r)),
        depth=depth,
        distance_to_surface=float(r[N]),
        modes=modes,
        scattering_rate=rate,
        tunneling=tun,
    )
