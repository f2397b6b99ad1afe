"""Finite-difference bound states of mirror-plus-electrode potentials.

All Hamiltonians use the three-point Laplacian with Dirichlet walls. A
``Grid1D`` holds ``points`` interior nodes strictly between ``lo`` and
``hi``; the wavefunction vanishes on both walls. Eigenvalues are in joules,
and the escape threshold is 0 J, so a state is bound when its energy is
negative.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sla

from .constants import HBAR
from .errors import DomainError, GridLeakError
from .potentials import InfiniteLine, FiniteSegment, N, T, total_potential

MAX_GRID_POINTS = 512 * 512
LEAK_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Grid1D:
    lo: float
    hi: float
    points: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")
        if self.points < 16:
            raise ValueError("grid needs at least 16 points")

    @property
    def spacing(self):
        return (self.hi - self.lo) / (self.points + 1)

    @property
    def nodes(self):
        return self.lo + self.spacing * np.arange(1, self.points + 1)

    def scaled(self, factor):
        """Same centre, extent and point count multiplied by ``factor``."""
        mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo) * factor
        return Grid1D(mid - half, mid + half, int(math.ceil(self.points * factor)))


@dataclass(frozen=True)
class Grid2D:
    axis_n: Grid1D
    axis_t: Grid1D
    max_points: int = MAX_GRID_POINTS

    def __post_init__(self):
        if self.axis_n.points * self.axis_t.points > self.max_points:
            raise ValueError(
                f"grid has {self.axis_n.points * self.axis_t.points} points, cap is {self.max_points}"
            )

    @property
    def shape(self):
        return (self.axis_n.points, self.axis_t.points)


@dataclass
class Spectrum:
    """Lowest eigenpairs of a grid Hamiltonian.

    ``wavefunctions[k]`` has the grid shape and unit discrete L2 norm.
    ``box_limited[k]`` is set when the state is classically allowed somewhere
    on the grid boundary, i.e. its energy is set by the box, not the trap.
    """

    energies: np.ndarray
    wavefunctions: Optional[np.ndarray] = None
    box_limited: Optional[np.ndarray] = None
    grid: object = None
    info: dict = field(default_factory=dict)

    @property
    def bound_count(self):
        return int(np.count_nonzero(self.energies < 0.0))

    def bound_energies(self, converged_only=False):
        mask = self.energies < 0.0
        if converged_only and self.box_limited is not None:
            mask &= ~self.box_limited
        return self.energies[mask]


def _fix_sign(vec):
    i = int(np.argmax(np.abs(vec)))
    return -vec if vec[i] < 0 else vec


def _boundary_mask(shape):
    mask = np.zeros(shape, dtype=bool)
    if len(shape) == 1:
        mask[[0, -1]] = True
    else:
        mask[[0, -1], :] = True
        mask[:, [0, -1]] = True
    return mask


def _check_boundaries(energies, psis, potential, check, open_edges=None):
    """Flag box-limited states and raise on leaking trap states.

    Only states forbidden on the whole boundary (V > E everywhere there) are
    tested: their edge amplitude must stay below ``LEAK_TOLERANCE`` of the
    maximum. States allowed somewhere on the edge are box-limited and only
    flagged. ``open_edges`` masks out walls that are physical (e.g.
    the regular axis of a cylindrical grid).
    """
    edge = _boundary_mask(potential.shape) if open_edges is None else open_edges
    box_limited = np.zeros(len(energies), dtype=bool)
    for k, (E, psi) in enumerate(zip(energies, psis)):
        amp = np.abs(psi)
        forbidden = edge & (potential > E)
        box_limited[k] = bool(np.any(edge & (potential <= E)))
        if box_limited[k]:
            continue  # the box sets this energy; flagged rather than fatal
        if check and np.any(amp[forbidden] > LEAK_TOLERANCE * amp.max()):
            worst = float(amp[forbidden].max() / amp.max())
            raise GridLeakError(
                f"state {k} (E = {E:.6g} J) reaches the grid boundary with relative amplitude {worst:.2g}"
            )
    return box_limited


def kinetic_1d(grid, mass):
    h = grid.spacing
    t = HBAR**2 / (2 * mass * h**2)
    n = grid.points
    return sparse.diags([np.full(n - 1, -t), np.full(n, 2 * t), np.full(n - 1, -t)], [-1, 0, 1], format="csr")


def solve_1d(potential_samples, mass, grid, n_states, check_boundary=True):
    """Lowest ``n_states`` eigenpairs of ``-(hbar^2/2m) d^2/dx^2 + V`` on ``grid``.

    The tridiagonal problem is solved directly. Raises
    :class:`GridLeakError` if a state that should decay at the walls does not.
    """
    V = np.asarray(potential_samples, dtype=float)
    if V.shape != (grid.points,):
        raise ValueError("potential_samples must have one value per grid node")
    if n_states <= 0:
        return Spectrum(np.empty(0), np.empty((0, grid.points)), np.zeros(0, bool), grid)
    n_states = min(n_states, grid.points)
    h = grid.spacing
    t = HBAR**2 / (2 * mass * h**2)
    energies, vecs = linalg.eigh_tridiagonal(
        2 * t + V, np.full(grid.points - 1, -t), select="i", select_range=(0, n_states - 1)
    )
    psis = np.array([_fix_sign(v) for v in vecs.T]) / math.sqrt(h)
    limited = _check_boundaries(energies, psis, V, check_boundary)
    return Spectrum(energies, psis, limited, grid)


def _eigsh_lowest(H, n_states, V):
    n = H.shape[0]
    n_states = min(n_states, n - 2)
    vmin = float(V.min())
    sigma = vmin - 1e-3 * (abs(vmin) + 1e-40)
    v0 = np.ones(n)
    energies, vecs = sla.eigsh(H, k=n_states, sigma=sigma, which="LM", v0=v0, tol=0)
    order = np.argsort(energies)
    return energies[order], vecs[:, order]


def hamiltonian_2d(V, grid, mass):
    Tn = kinetic_1d(grid.axis_n, mass)
    Tt = kinetic_1d(grid.axis_t, mass)
    I_n = sparse.identity(grid.axis_n.points, format="csr")
    I_t = sparse.identity(grid.axis_t.points, format="csr")
    return (sparse.kron(Tn, I_t) + sparse.kron(I_n, Tt) + sparse.diags(V.ravel())).tocsc()


def _potential_floor(stack, atom, grid):
    """Potential half a cell above each surface wire crossing of the plane."""
    h = 0.5 * grid.axis_n.spacing
    values = []
    for element in stack.charges:
        if isinstance(element, InfiniteLine):
            t0 = element.foot_point[T]
        elif isinstance(element, FiniteSegment):
            t0 = 0.5 * (element.end_a[T] + element.end_b[T])
        else:
            continue
        values.append(float(total_potential(stack, atom, np.array([h, t0, 0.0]))))
    return min(values) if values else -math.inf


def sample_cross_section(stack, atom, grid, axial=0.0, floor=True):
    n = grid.axis_n.nodes
    t = grid.axis_t.nodes
    if n[0] <= 0:
        raise DomainError("cross-section grid must lie above the surface")
    pts = np.stack(np.meshgrid(n, t, [axial], indexing="ij"), axis=-1)[:, :, 0, :]
    V = total_potential(stack, atom, pts)
    if floor:
        V = np.maximum(V, _potential_floor(stack, atom, grid))
    return V


def _second_moments(psis, grid):
    n = grid.axis_n.nodes[:, None]
    t = grid.axis_t.nodes[None, :]
    cell = grid.axis_n.spacing * grid.axis_t.spacing
    out = []
    for psi in psis:
        p = psi**2 * cell
        mn, mt = np.sum(p * n), np.sum(p * t)
        out.append((math.sqrt(np.sum(p * (n - mn) ** 2)), math.sqrt(np.sum(p * (t - mt) ** 2))))
    return np.array(out)


def solve_wire_cross_section(stack, atom, grid, n_states, check_boundary=True, floor=True):
    """Transverse bound states of a guide translation-invariant along ``a``.

    The wavefunctions come back with shape ``grid.shape`` (``n`` rows, ``t``
    columns); ``info["widths"]`` holds the rms widths (sigma_n, sigma_t) of
    each state from its second moments.
    """
    if n_states <= 0:
        return Spectrum(np.empty(0), np.empty((0,) + grid.shape), np.zeros(0, bool), grid)
    V = sample_cross_section(stack, atom, grid, floor=floor)
    H = hamiltonian_2d(V, grid, atom.mass)
    energies, vecs = _eigsh_lowest(H, n_states, V)
    cell = grid.axis_n.spacing * grid.axis_t.spacing
    psis = np.array([_fix_sign(v) for v in vecs.T]).reshape((-1,) + grid.shape) / math.sqrt(cell)
    limited = _check_boundaries(energies, psis, V, check_boundary)
    return Spectrum(energies, psis, limited, grid, info={"widths": _second_moments(psis, grid)})


def radial_nodes(axis):
    """Cell-centred radii with the outer Dirichlet wall exactly at ``axis.hi``."""
    if axis.lo != 0:
        raise DomainError("radial axis must start at rho = 0")
    h = axis.hi / (axis.points + 0.5)
    return (np.arange(axis.points) + 0.5) * h, h


def solve_dot(stack, atom, grid, angular_m, n_states, check_boundary=True):
    """Bound states of an axially symmetric dot for angular quantum number m.

    ``grid.axis_t`` is the radial axis (``lo`` must be 0) and ``grid.axis_n``
    the height above the mirror; the dot sits on the axis ``rho = 0``. The
    grid function is ``sqrt(rho) * psi``, so its discrete norm is the
    cylindrical integral of ``|psi|^2 rho drho dn``.
    """
    if angular_m != int(angular_m):
        raise ValueError("angular_m must be an integer")
    m = abs(int(angular_m))
    if n_states <= 0:
        return Spectrum(np.empty(0), np.empty((0,) + grid.shape), np.zeros(0, bool), grid)
    rho, h_r = radial_nodes(grid.axis_t)
    n = grid.axis_n.nodes
    if n[0] <= 0:
        raise DomainError("dot grid must lie above the surface")
    centre = stack.charges[0].position if stack.charges else np.zeros(3)
    pts = np.zeros((len(n), len(rho), 3))
    pts[..., N] = n[:, None]
    pts[..., T] = centre[T] + rho[None, :]
    pts[..., 2] = centre[2]
    V = total_potential(stack, atom, pts)
    k = HBAR**2 / (2 * atom.mass)
    V_eff = V + k * m**2 / rho[None, :] ** 2

    # symmetrised (1/rho) d/drho (rho d/drho); rho_{-1/2} = 0 is the regular axis
    outer = rho + 0.5 * h_r
    inner = rho - 0.5 * h_r
    diag_r = k * (outer + inner) / (rho * h_r**2)
    off_r = -k * outer[:-1] / (np.sqrt(rho[:-1] * rho[1:]) * h_r**2)
    Tr = sparse.diags([off_r, diag_r, off_r], [-1, 0, 1], format="csr")
    Tn = kinetic_1d(grid.axis_n, atom.mass)
    I_n = sparse.identity(len(n), format="csr")
    I_r = sparse.identity(len(rho), format="csr")
    H = (sparse.kron(Tn, I_r) + sparse.kron(I_n, Tr) + sparse.diags(V_eff.ravel())).tocsc()
    energies, vecs = _eigsh_lowest(H, n_states, V_eff)
    cell = grid.axis_n.spacing * h_r
    psis = np.array([_fix_sign(v) for v in vecs.T]).reshape((-1, len(n), len(rho))) / math.sqrt(cell)
    edges = _boundary_mask(V.shape)
    edges[1:-1, 0] = False  # rho = 0 is a regular axis, not a wall
    limited = _check_boundaries(energies, psis, V_eff, check_boundary, open_edges=edges)
    return Spectrum(energies, psis, limited, grid, info={"angular_m": m, "rho": rho})


def dot_bound_count(stack, atom, grid, m_max=3, n_states=8):
    """Bound states summed over |m| <= m_max, counting +m and -m separately."""
    total = 0
    for m in range(m_max + 1):
        count = solve_dot(stack, atom, grid, m, n_states, check_boundary=False).bound_count
        if count == 0:
            break
        total += count if m == 0 else 2 * count
    return total


@dataclass(frozen=True)
class SpacingFit:
    applicable: bool
    ratio: float = math.nan
    amplitude: float = math.nan
    rms_log_residual: float = math.nan
    states_used: int = 0
    reason: str = ""


def spacing_law_check(spectrum, min_states=6, converged_only=True):
    """Fit ``|E_n| = A c^n`` to the upper half of the bound spectrum.

    Returns a :class:`SpacingFit`; with fewer than ``min_states`` bound
    states the result is marked not applicable instead of raising.
    """
    if isinstance(spectrum, Spectrum):
        bound = spectrum.bound_energies(converged_only)
    else:
        bound = np.asarray(spectrum, dtype=float)
        bound = bound[bound < 0]
    bound = np.sort(bound)
    if len(bound) < min_states:
        return SpacingFit(False, states_used=len(bound), reason=f"only {len(bound)} bound states")
    start = len(bound) // 2
    idx = np.arange(start, len(bound))
    y = np.log(np.abs(bound[start:]))
    slope, intercept = np.polyfit(idx, y, 1)
    resid = y - (slope * idx + intercept)
    return SpacingFit(
        True,
        ratio=math.exp(slope),
        amplitude=math.exp(intercept),
        rms_log_residual=float(np.sqrt(np.mean(resid**2))),
        states_used=len(idx),
    )


def default_wire_grid(stack, atom, min_position, modes, widths=12.0, points=(160, 160), n_floor=None):
    """Grid centred on a wire minimum, spanning ``widths`` ground-state sizes."""
    sizes = modes.by_label("ground_sizes")
    n0 = float(min_position[N])
    lo = max(n0 - widths * sizes["n"], barrier_height_position(stack, atom, min_position) if n_floor is None else n_floor)
    hi = n0 + 1.5 * widths * sizes["n"]
    half_t = widths * sizes["t"]
    t0 = float(min_position[T])
    return Grid2D(Grid1D(lo, hi, points[0]), Grid1D(t0 - half_t, t0 + half_t, points[1]))


def barrier_height_position(stack, atom, min_position, samples=2000):
    """Height of the potential maximum on the way from the minimum to the surface."""
    r = np.asarray(min_position, dtype=float)
    n = r[N] * np.linspace(1e-3, 1.0, samples)
    pts = np.repeat(r[None, :], samples, axis=0)
    pts[:, N] = n
    u = total_potential(stack, atom, pts)
    return float(n[int(np.argmax(u))])
