import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from atomwire.constants import HBAR
from atomwire.eigen import (
    Grid1D,
    Grid2D,
    Spectrum,
    default_wire_grid,
    radial_nodes,
    solve_1d,
    solve_dot,
    solve_wire_cross_section,
    spacing_law_check,
)
from atomwire.errors import DomainError, GridLeakError
from atomwire.potentials import MirrorSpec, PotentialStack, total_potential
from atomwire.trap import find_minimum, harmonic_modes


def _harmonic(atom, omega, points=400, half_width=10.0):
    sigma = math.sqrt(HBAR / (atom.mass * omega))
    grid = Grid1D(-half_width * sigma, half_width * sigma, points)
    x = grid.nodes
    return grid, 0.5 * atom.mass * omega**2 * x**2


def _sign_changes(psi, floor=1e-6):
    significant = psi[np.abs(psi) > floor * np.abs(psi).max()]
    return int(np.count_nonzero(np.diff(np.sign(significant)) != 0))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid1D(1.0, 0.0, 100)
    with pytest.raises(ValueError):
        Grid1D(0.0, 1.0, 8)
    with pytest.raises(ValueError):
        Grid2D(Grid1D(0.0, 1.0, 1000), Grid1D(0.0, 1.0, 1000))


def test_grid_nodes_exclude_walls():
    g = Grid1D(0.0, 1.0, 99)
    assert g.spacing == pytest.approx(0.01)
    assert g.nodes[0] == pytest.approx(0.01) and g.nodes[-1] == pytest.approx(0.99)


def test_harmonic_levels_orthonormal_with_node_counts(rb):
    omega = 2 * math.pi * 50e3
    grid, V = _harmonic(rb, omega)
    spec = solve_1d(V, rb.mass, grid, 6)
    exact = (np.arange(6) + 0.5) * HBAR * omega
    assert np.allclose(spec.energies, exact, rtol=2e-3)
    overlap = spec.wavefunctions @ spec.wavefunctions.T * grid.spacing
    assert np.allclose(overlap, np.eye(6), atol=1e-10)
    assert [_sign_changes(psi) for psi in spec.wavefunctions] == list(range(6))


def test_square_well_levels(li):
    L = 1e-6
    grid = Grid1D(0.0, L, 1000)
    spec = solve_1d(np.zeros(grid.points), li.mass, grid, 4)
    exact = (np.arange(1, 5) * math.pi * HBAR / L) ** 2 / (2 * li.mass)
    assert np.allclose(spec.energies, exact, rtol=1e-5)


def test_zero_states_gives_empty_spectrum(li):
    grid, V = _harmonic(li, 1e5)
    spec = solve_1d(V, li.mass, grid, 0)
    assert spec.energies.size == 0 and spec.bound_count == 0


def test_narrow_box_leaks(li):
    omega = 2 * math.pi * 10e3
    grid, V = _harmonic(li, omega, half_width=2.0)
    V = V - V.max() - 1e-30  # every node bound, walls forbidden only for low states
    with pytest.raises(GridLeakError):
        solve_1d(V, li.mass, grid, 3)


@pytest.fixture(scope="module")
def wire_spectrum(li, li_wire_stack):
    r = find_minimum(li_wire_stack, li)
    modes = harmonic_modes(li_wire_stack, li, r)
    grid = default_wire_grid(li_wire_stack, li, r, modes, widths=20.0, points=(120, 120))
    return solve_wire_cross_section(li_wire_stack, li, grid, 5)


def test_wire_states_are_bound_and_orthonormal(wire_spectrum):
    spec = wire_spectrum
    assert spec.bound_count == 5
    assert not spec.box_limited.any()
    g = spec.grid
    cell = g.axis_n.spacing * g.axis_t.spacing
    flat = spec.wavefunctions.reshape(len(spec.energies), -1)
    assert np.allclose(flat @ flat.T * cell, np.eye(5), atol=1e-8)


def test_wire_ground_state_is_nodeless_and_symmetric(wire_spectrum):
    psi0 = wire_spectrum.wavefunctions[0]
    assert np.all(psi0 > -1e-8 * psi0.max())
    assert np.allclose(psi0, psi0[:, ::-1], atol=1e-6 * psi0.max())


def test_wire_first_excited_state_is_odd_in_t(wire_spectrum):
    psi1 = wire_spectrum.wavefunctions[1]
    assert np.allclose(psi1, -psi1[:, ::-1], atol=1e-6 * np.abs(psi1).max())


def test_wire_widths_recorded(wire_spectrum):
    widths = wire_spectrum.info["widths"]
    assert widths.shape == (5, 2) and np.all(widths > 0)


def test_radial_nodes_need_axis_at_zero():
    rho, h = radial_nodes(Grid1D(0.0, 1.0, 19))
    assert rho[0] == pytest.approx(0.5 * h) and rho[-1] + 0.5 * h == pytest.approx(1.0 - 0.5 * h)
    with pytest.raises(DomainError):
        radial_nodes(Grid1D(0.1, 1.0, 19))


def test_dot_free_particle_in_cylinder(li):
    """Bessel zeros give the radial levels of a hollow cylinder."""
    R, Ln = 1e-6, 1e-6
    flat = PotentialStack(MirrorSpec("magnetic", 1e-40, 1.0))  # negligible barrier
    grid = Grid2D(Grid1D(1e-6, 1e-6 + Ln, 60), Grid1D(0.0, R, 120))
    k = HBAR**2 / (2 * li.mass)
    for m in (0, 1):
        spec = solve_dot(flat, li, grid, m, 2, check_boundary=False)
        j = jn_zeros(m, 2)
        exact = k * ((j / R) ** 2 + (math.pi / Ln) ** 2) + 1e-40
        assert np.allclose(spec.energies, exact, rtol=5e-3)


def test_dot_levels_depend_on_abs_m(li, li_dot_stack):
    grid = Grid2D(Grid1D(0.33e-6, 3e-6, 60), Grid1D(0.0, 3e-6, 60))
    plus = solve_dot(li_dot_stack, li, grid, 1, 2, check_boundary=False)
    minus = solve_dot(li_dot_stack, li, grid, -1, 2, check_boundary=False)
    assert np.array_equal(plus.energies, minus.energies)
    with pytest.raises(ValueError):
        solve_dot(li_dot_stack, li, grid, 0.5, 2)


def test_spacing_law_on_geometric_sequence():
    energies = -3.0 * 0.7 ** np.arange(10)
    fit = spacing_law_check(energies)
    assert fit.applicable
    assert fit.ratio == pytest.approx(0.7, rel=1e-12)
    assert fit.rms_log_residual < 1e-12


def test_spacing_law_not_applicable_with_few_states():
    fit = spacing_law_check(np.array([-3.0, -2.0, -1.0, 0.5]))
    assert not fit.applicable and fit.states_used == 3


def test_spacing_law_skips_box_limited_states():
    spec = Spectrum(-(0.5 ** np.arange(8)), box_limited=np.array([False] * 6 + [True] * 2))
    assert spacing_law_check(spec).states_used == 3
    assert spacing_law_check(spec, converged_only=False).states_used == 4


def test_flat_potential_has_no_bound_states(li):
    grid = Grid1D(0.0, 1e-6, 200)
    assert solve_1d(np.zeros(grid.points), li.mass, grid, 3).bound_count == 0


def test_wire_ground_level_matches_harmonic_estimate(li, li_wire_stack, wire_spectrum):
    r = find_minimum(li_wire_stack, li)
    f = harmonic_modes(li_wire_stack, li, r).by_label("frequencies")
    zero_point = 0.5 * HBAR * 2 * math.pi * (f["n"] + f["t"])
    ratio = (wire_spectrum.energies[0] - total_potential(li_wire_stack, li, r)) / zero_point
    assert abs(ratio - 1) < 0.10
