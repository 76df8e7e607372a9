"""Cubic 1d dynamics: closed forms, conservation, convergence order."""

import cmath
import math

import numpy as np
import pytest

from quasi1d import gpe1d
from quasi1d.errors import DomainError, ResolutionError


def test_free_gaussian_dispersion():
    # H = k^2: the complex width sigma^2 + i t evolves the packet exactly
    grid = gpe1d.Grid1D(32.0, 512)
    sigma, t_final = 1.0, 1.0
    phi0 = gpe1d.gaussian_packet(grid, sigma=sigma)
    traj = gpe1d.evolve_1d(phi0, t_final, 0.01)
    z = sigma**2 + 1j * t_final
    amp = (2.0 * math.pi * sigma**2) ** -0.25
    exact = amp * sigma / np.sqrt(z) * np.exp(-grid.x**2 / (4.0 * z))
    assert np.max(np.abs(traj.final.values - exact)) < 1e-8
    # second moment of the density: sigma^2 + t^2 / sigma^2
    density = np.abs(traj.final.values) ** 2
    moment = float(np.sum(grid.x**2 * density)) * grid.dx
    assert moment == pytest.approx(sigma**2 + t_final**2 / sigma**2, rel=1e-8)


def test_plane_wave_rotates_at_nonlinear_frequency():
    grid = gpe1d.Grid1D(16.0, 256)
    b, t_final = 2.0, 1.0
    phi0 = gpe1d.plane_wave(grid, 2)
    traj = gpe1d.evolve_1d(phi0, t_final, 0.001, b=b)
    k = 2.0 * math.pi * 2 / grid.length
    omega = k**2 + b / grid.length
    exact = phi0.values * cmath.exp(-1j * omega * t_final)
    assert np.max(np.abs(traj.final.values - exact)) < 1e-10
    density_wobble = np.abs(traj.final.values) ** 2 - 1.0 / grid.length
    assert np.max(np.abs(density_wobble)) < 1e-12
    assert traj.max_norm_drift() < 1e-13
    # energy: k^2 + b / (2 L)
    assert traj.energies[0] == pytest.approx(k**2 + 0.5 * b / grid.length,
                                             rel=1e-12)


def test_constant_profile_rotates_at_mean_field_rate():
    grid = gpe1d.Grid1D(16.0, 128)
    b, t_final = 3.0, 0.5
    values = np.full(grid.n, 1.0 / math.sqrt(grid.length), dtype=complex)
    phi0 = gpe1d.Field1D(grid, values)
    traj = gpe1d.evolve_1d(phi0, t_final, 0.001, b=b)
    exact = values * cmath.exp(-1j * b / grid.length * t_final)
    assert np.max(np.abs(traj.final.values - exact)) < 1e-12
    assert traj.energies[0] == pytest.approx(0.5 * b / grid.length, rel=1e-12)


def test_time_reversal():
    grid = gpe1d.Grid1D(16.0, 256)
    phi = gpe1d.gaussian_packet(grid, sigma=0.8, k0=1.0)
    start = phi.values.copy()
    v = lambda t, x: 0.3 * x**2
    for _ in range(100):
        phi = gpe1d.strang_step(phi, 0.01, v, b=1.3)
    for _ in range(100):
        phi = gpe1d.strang_step(phi, -0.01, v, b=1.3)
    assert np.max(np.abs(phi.values - start)) < 1e-10
    assert abs(phi.time) < 1e-12


def test_conservation_drifts():
    grid = gpe1d.Grid1D(16.0, 256)
    phi0 = gpe1d.gaussian_packet(grid, sigma=1.5, k0=1.0)
    traj = gpe1d.evolve_1d(phi0, 1.0, 0.001, b=2.0)
    steps = len(traj.times) - 1
    assert traj.max_norm_drift() / steps < 1e-12
    assert traj.max_energy_drift() < 1e-8


def test_second_order_convergence():
    # reference at dt/16: coarse/fine error ratio tends to 255/63 ~ 4.05
    grid = gpe1d.Grid1D(16.0, 256)
    phi0 = gpe1d.gaussian_packet(grid, sigma=1.0)
    t_final, dt = 1.0, 0.01
    finals = [gpe1d.evolve_1d(phi0, t_final, dt / den, b=4.0).final.values
              for den in (1.0, 2.0, 16.0)]
    scale = math.sqrt(grid.dx)
    err_coarse = float(np.linalg.norm(finals[0] - finals[2])) * scale
    err_fine = float(np.linalg.norm(finals[1] - finals[2])) * scale
    assert err_coarse / err_fine == pytest.approx(4.0, abs=0.5)


def test_gauge_shift_of_potential():
    grid = gpe1d.Grid1D(16.0, 256)
    phi0 = gpe1d.gaussian_packet(grid, sigma=1.0)
    t_final, shift = 0.5, 2.0
    base = gpe1d.evolve_1d(phi0, t_final, 0.005,
                           v_par=lambda t, x: 0.3 * x**2, b=1.0)
    lifted = gpe1d.evolve_1d(phi0, t_final, 0.005,
                             v_par=lambda t, x: 0.3 * x**2 + shift, b=1.0)
    exact = base.final.values * cmath.exp(-1j * shift * t_final)
    assert np.max(np.abs(lifted.final.values - exact)) < 1e-10


def test_harmonic_ground_state():
    # H = k^2 + x^2 has E0 = 1 with a width-sqrt(1/2) Gaussian (m = 1/2)
    grid = gpe1d.Grid1D(16.0, 256)
    v = lambda t, x: x**2
    phi = gpe1d.ground_state_1d(grid, v_par=v)
    energy = gpe1d.energy_1d(phi, v)
    assert abs(energy - 1.0) < 1e-6
    exact = (math.pi ** -0.25) * np.exp(-0.5 * grid.x**2)
    aligned = gpe1d.align_phase(phi, gpe1d.Field1D(grid, exact.astype(complex)))
    assert np.max(np.abs(aligned.values - exact)) < 1e-3   # O(dt^2) state bias


def test_ground_state_is_stationary():
    grid = gpe1d.Grid1D(16.0, 256)
    v = lambda t, x: x**2
    phi = gpe1d.ground_state_1d(grid, v_par=v, b=1.0)
    traj = gpe1d.evolve_1d(phi, 0.2, 0.002, v_par=v, b=1.0)
    # density wobble is bounded by the imaginary-time state bias; an
    # off-equilibrium profile would slosh at O(1)
    drift = np.abs(np.abs(traj.final.values) ** 2 - np.abs(phi.values) ** 2)
    assert np.max(drift) < 1e-3


def test_interacting_ground_state_flattens():
    # repulsion pushes density toward the inverted-parabola profile
    grid = gpe1d.Grid1D(16.0, 256)
    v = lambda t, x: x**2
    b = 50.0
    phi = gpe1d.ground_state_1d(grid, v_par=v, b=b)
    density = np.abs(phi.values) ** 2
    mu = (0.75 * b) ** (2.0 / 3.0)       # from normalizing (mu - x^2)/b
    center = density[grid.n // 2]
    assert center == pytest.approx(mu / b, rel=0.05)
    half_width = math.sqrt(mu)
    inside = np.abs(grid.x) < 0.7 * half_width
    tf = (mu - grid.x[inside] ** 2) / b
    assert np.max(np.abs(density[inside] - tf)) < 0.05 * mu / b


def test_phase_alignment_helpers():
    grid = gpe1d.Grid1D(16.0, 64)
    phi = gpe1d.gaussian_packet(grid, sigma=1.0)
    rotated = gpe1d.Field1D(grid, phi.values * cmath.exp(1j * 0.7), 0.0)
    assert gpe1d.phase_distance(rotated, phi) < 1e-12
    aligned = gpe1d.align_phase(rotated, phi)
    assert np.max(np.abs(aligned.values - phi.values)) < 1e-12
    other = gpe1d.gaussian_packet(grid, sigma=2.0)
    assert gpe1d.phase_distance(other, phi) > 0.1


def test_error_paths():
    with pytest.raises(DomainError):
        gpe1d.Grid1D(16.0, 63)
    with pytest.raises(DomainError):
        gpe1d.Grid1D(16.0, 2)
    with pytest.raises(DomainError):
        gpe1d.Grid1D(-1.0, 64)
    grid = gpe1d.Grid1D(16.0, 64)
    phi0 = gpe1d.gaussian_packet(grid)
    with pytest.raises(DomainError):
        gpe1d.evolve_1d(phi0, -1.0, 0.01)
    with pytest.raises(DomainError):
        gpe1d.evolve_1d(phi0, 1.0, 0.0)
    poisoned = gpe1d.Field1D(grid, np.full(grid.n, np.nan, dtype=complex))
    with pytest.raises(ResolutionError):
        gpe1d.evolve_1d(poisoned, 0.1, 0.01)


def test_sampling_stride():
    grid = gpe1d.Grid1D(16.0, 64)
    phi0 = gpe1d.gaussian_packet(grid)
    traj = gpe1d.evolve_1d(phi0, 0.1, 0.01, sample_stride=5)
    # initial state plus stride hits; the final step is a hit here
    assert len(traj.samples) == 3
    assert traj.samples[0].time == 0.0
    assert traj.samples[1].time == pytest.approx(0.05)
    assert traj.samples[-1].time == pytest.approx(0.1)
