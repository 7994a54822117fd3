import math

import numpy as np
import pytest

from hartree_lab.errors import InstabilityError, InvalidArgumentError
from hartree_lab.lattice import build_grid, convolve, field, lp_norm
from hartree_lab.meanfield import (
    HartreeParams,
    Orbital,
    TrapProtocol,
    evolve_hartree,
    hartree_energy,
    hartree_step,
    mean_field_potential,
    orbital_norm_series,
)

from conftest import even_field, random_orbital


@pytest.fixture
def grid():
    return build_grid(2 * np.pi, 16)


def harmonic_trap(grid, kind="constant", amplitude=1.0, ramp_time=1.0):
    x = grid.positions()
    return TrapProtocol(kind, field(amplitude * (1 - np.cos(x - grid.length / 2)), grid), ramp_time)


def test_orbital_norm_validated(grid):
    with pytest.raises(InvalidArgumentError):
        Orbital.from_values(grid, np.ones(16)).validate()
    phi = Orbital.from_values(grid, np.ones(16), normalize=True)
    assert abs(phi.norm() - 1) < 1e-14


def test_mean_field_potential_examples(grid, rng):
    phi = random_orbital(grid, rng)
    assert np.allclose(mean_field_potential(phi, field(np.zeros(16), grid)).values, 0)
    np.testing.assert_allclose(mean_field_potential(phi, field(np.full(16, 1.5), grid)).values, 1.5, atol=1e-13)
    v = field(even_field(grid, rng), grid)
    out = mean_field_potential(phi, v).values
    M, h = 16, grid.spacing
    dens = np.abs(phi.values) ** 2
    direct = [sum(h * v.values[(i - j) % M] * dens[j] for j in range(M)) for i in range(M)]
    np.testing.assert_allclose(out, direct, atol=1e-12)
    assert np.max(np.abs(np.imag(out))) <= 1e-12


def test_trap_protocol_factors(grid):
    ramp = harmonic_trap(grid, "linear-ramp-off", ramp_time=2.0)
    assert [ramp.factor(t) for t in (0, 1, 2, 3)] == [1.0, 0.5, 0.0, 0.0]
    quench = harmonic_trap(grid, "quench", ramp_time=0.5)
    assert (quench.factor(0.49), quench.factor(0.5)) == (1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        harmonic_trap(grid, "linear-ramp-off", ramp_time=0.0)
    with pytest.raises(InvalidArgumentError):
        TrapProtocol("wobble", field(np.zeros(16), grid))


def test_hartree_params_validation():
    assert HartreeParams(0.1, 1.0).steps == 10
    for bad in [(0.0, 1.0), (0.1, -1.0), (0.3, 1.0)]:
        with pytest.raises(InvalidArgumentError):
            HartreeParams(*bad)
    with pytest.raises(InvalidArgumentError):
        HartreeParams(0.1, 1.0, "euler")


@pytest.mark.parametrize("m", [0, 2, -3])
def test_free_plane_wave_phase(grid, m):
    x = grid.positions()
    phi = Orbital.from_values(grid, np.exp(2j * np.pi * m * x / grid.length), normalize=True)
    E = (2 / grid.spacing**2) * (1 - np.cos(2 * np.pi * m / grid.points))
    out = hartree_step(phi, TrapProtocol.zero(grid), field(np.zeros(16), grid), 0.0, 0.05)
    np.testing.assert_allclose(out.values, np.exp(-1j * E * 0.05) * phi.values, atol=1e-12)


@pytest.mark.parametrize("scheme", ["splitting", "explicit-rk4"])
def test_single_step_norm(grid, rng, scheme):
    phi = random_orbital(grid, rng)
    v = field(even_field(grid, rng), grid)
    out = hartree_step(phi, harmonic_trap(grid), v, 0.0, 1e-3, scheme)
    assert abs(out.norm() - 1) <= 1e-10


def test_instability_raised(grid, rng):
    phi = random_orbital(grid, rng)
    v = field(10 * even_field(grid, rng), grid)
    with pytest.raises(InstabilityError):
        hartree_step(phi, harmonic_trap(grid, amplitude=50.0), v, 0.0, 0.5, "explicit-rk4")


def _final(phi, trap, v, dt, T=0.5):
    return evolve_hartree(phi, trap, v, HartreeParams(dt, T)).final.values


def test_second_order_convergence(grid, rng):
    phi = Orbital.from_values(grid, np.exp(-((grid.positions() - np.pi) ** 2)) * np.exp(1j * grid.positions()),
                              normalize=True)
    v = field(2 * np.exp(-grid.displacements() ** 2), grid)
    trap = harmonic_trap(grid, "linear-ramp-off", ramp_time=0.5)
    ref = _final(phi, trap, v, 1e-4)
    e1 = np.linalg.norm(_final(phi, trap, v, 4e-3) - ref)
    e2 = np.linalg.norm(_final(phi, trap, v, 2e-3) - ref)
    assert 3.2 <= e1 / e2 <= 4.8


def test_empty_evolution(grid, rng):
    phi = random_orbital(grid, rng)
    traj = evolve_hartree(phi, TrapProtocol.zero(grid), field(np.zeros(16), grid), HartreeParams(0.1, 0.0))
    assert len(traj) == 1 and traj.final is phi


def _energy_drift(dt):
    grid = build_grid(2 * np.pi, 16)
    x = grid.positions()
    phi = Orbital.from_values(grid, np.exp(-((x - 2.0) ** 2)) * np.exp(1j * x), normalize=True)
    trap = harmonic_trap(grid)
    v = field(np.zeros(16), grid)
    traj = evolve_hartree(phi, trap, v, HartreeParams(dt, 1.0))
    energies = [hartree_energy(p, trap, v) for p in traj.orbitals]
    return max(abs(e - energies[0]) for e in energies)


def test_energy_conserved_free_trap():
    # splitting conserves a modified energy; the true one drifts like dt^2
    assert _energy_drift(1e-4) <= 1e-8


def test_energy_drift_is_second_order():
    assert 12 <= _energy_drift(1e-3) / _energy_drift(2.5e-4) <= 20


def test_reversibility(grid, rng):
    phi = random_orbital(grid, rng)
    v = field(even_field(grid, rng), grid)
    trap = harmonic_trap(grid)
    params = HartreeParams(1e-2, 1.0)
    fwd = evolve_hartree(phi, trap, v, params).final
    back = evolve_hartree(fwd, trap, v, params, t0=1.0, backward=True).final
    assert np.sqrt(grid.spacing) * np.linalg.norm(back.values - phi.values) <= 1e-6


def test_long_norm_conservation(grid, rng):
    phi = random_orbital(grid, rng)
    v = field(even_field(grid, rng), grid)
    traj = evolve_hartree(phi, harmonic_trap(grid, "linear-ramp-off", ramp_time=3.0), v, HartreeParams(1e-3, 10.0))
    assert max(abs(p.norm() - 1) for p in traj.orbitals) <= 1e-9


def test_gauge_covariance(grid, rng):
    phi = random_orbital(grid, rng)
    v = field(even_field(grid, rng), grid)
    trap = harmonic_trap(grid, "linear-ramp-off", ramp_time=2.0)
    c = 0.7
    base = TrapProtocol("constant", trap.base_profile, 1.0)
    shifted = TrapProtocol("constant", field(trap.base_profile.values + c, grid))
    T = 1.0
    a = evolve_hartree(phi, base, v, HartreeParams(1e-2, T)).final.values
    b = evolve_hartree(phi, shifted, v, HartreeParams(1e-2, T)).final.values
    np.testing.assert_allclose(b, np.exp(-1j * c * T) * a, atol=1e-10)


def test_linearity_without_interaction(grid, rng):
    p1, p2 = random_orbital(grid, rng), random_orbital(grid, rng)
    a, b = 0.3 - 0.2j, 1.1
    combo = Orbital(field(a * p1.values + b * p2.values, grid))
    trap = harmonic_trap(grid, "linear-ramp-off")
    v = field(np.zeros(16), grid)
    params = HartreeParams(1e-2, 0.5)
    lhs = evolve_hartree(combo, trap, v, params).final.values
    rhs = a * evolve_hartree(p1, trap, v, params).final.values + b * evolve_hartree(p2, trap, v, params).final.values
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_orbital_norm_series(grid, rng):
    phi = random_orbital(grid, rng)
    v = field(even_field(grid, rng), grid)
    traj = evolve_hartree(phi, harmonic_trap(grid), v, HartreeParams(0.05, 0.5))
    np.testing.assert_allclose(orbital_norm_series(traj, 1), 1.0, atol=1e-12)
    s2 = orbital_norm_series(traj, 2)
    np.testing.assert_allclose(s2, [lp_norm(p.field, 4) for p in traj.orbitals], rtol=1e-12)
    flat = Orbital.from_values(grid, np.ones(16), normalize=True)
    flat_traj = evolve_hartree(flat, TrapProtocol.zero(grid), field(np.zeros(16), grid), HartreeParams(0.1, 0.3))
    np.testing.assert_allclose(orbital_norm_series(flat_traj, math.inf), 1 / math.sqrt(grid.length), rtol=1e-12)
