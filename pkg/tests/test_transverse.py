"""Transverse confinement modes: oracles, invariants, rescaling."""

import dataclasses
import math

import numpy as np
import pytest

from quasi1d import transverse
from quasi1d.errors import (DomainError, GridTooSmallError, InterfaceError,
                            ResolutionError)


@pytest.fixture(scope="module")
def harmonic_mode():
    return transverse.ground_state_2d(transverse.harmonic_profile)


def grid_quantities(mode):
    h = mode.spacing
    k = 2.0 * math.pi * np.fft.fftfreq(mode.n, h)
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    y = mode.axis()
    y1, y2 = np.meshgrid(y, y, indexing="ij")
    return h * h, k2, y1, y2


def test_harmonic_oracle(harmonic_mode):
    mode = harmonic_mode
    # closed form in hbar = 1, m = 1/2 units: E0 = 2, chi = exp(-|y|^2/2)/sqrt(pi)
    assert abs(mode.E0 - 2.0) < 1e-9
    assert abs(mode.quartic - 1.0 / (2.0 * math.pi)) < 1e-9
    da, _k2, y1, y2 = grid_quantities(mode)
    exact = np.exp(-0.5 * (y1**2 + y2**2)) / math.sqrt(math.pi)
    assert np.max(np.abs(mode.chi - exact)) < 1e-8
    assert abs(float(np.sum(mode.chi**2)) * da - 1.0) < 1e-12
    assert np.all(mode.chi >= -1e-12)


def test_virial_balance(harmonic_mode):
    mode = harmonic_mode
    da, k2, y1, y2 = grid_quantities(mode)
    chi_hat = np.fft.fft2(mode.chi)
    kinetic = float(np.sum(k2 * np.abs(chi_hat) ** 2)) * da / mode.chi.size
    potential = float(np.sum((y1**2 + y2**2) * mode.chi**2)) * da
    assert abs(kinetic - potential) < 1e-6
    assert abs(kinetic + potential - mode.E0) < 1e-9


def test_constant_shift_is_exact_gauge(harmonic_mode):
    shifted = transverse.ground_state_2d(lambda y1, y2: y1**2 + y2**2 + 3.5)
    assert abs(shifted.E0 - harmonic_mode.E0 - 3.5) < 1e-10
    assert np.max(np.abs(shifted.chi - harmonic_mode.chi)) < 1e-10


def test_energy_history_monotone():
    # stiffened trap so the seed state is not already the minimizer
    mode, history = transverse.ground_state_2d(
        lambda y1, y2: 4.0 * (y1**2 + y2**2), return_history=True)
    diffs = np.diff(history)
    assert np.all(diffs <= 1e-12)       # round-off slack only
    assert history[0] > history[-1]
    assert abs(mode.E0 - 4.0) < 1e-9    # E0 scales as sqrt(c) * 2


def test_grid_refinement_stability():
    coarse = transverse.ground_state_2d(transverse.harmonic_profile, n=96)
    fine = transverse.ground_state_2d(transverse.harmonic_profile, n=128)
    assert abs(coarse.E0 - fine.E0) < 1e-9
    assert abs(coarse.quartic - fine.quartic) < 1e-9


def test_smooth_well_binds_below_plateau():
    depth, radius = 8.0, 2.0
    width = 0.25 * radius

    def well(y1, y2):
        r = np.sqrt(y1**2 + y2**2)
        return depth * 0.5 * (1.0 + np.tanh((r - radius) / width))

    mode = transverse.ground_state_2d(well, extent=20.0, n=160)
    assert 0.0 < mode.E0 < depth


def test_rescale_identities(harmonic_mode):
    eps = 0.1
    scaled = transverse.rescale_mode(harmonic_mode, eps)
    assert scaled.E0 == harmonic_mode.E0 / eps**2
    assert scaled.extent == pytest.approx(harmonic_mode.extent * eps)
    assert abs(eps**2 * scaled.quartic - harmonic_mode.quartic) < 1e-12
    da = scaled.spacing**2
    assert abs(float(np.sum(scaled.chi**2)) * da - 1.0) < 1e-12
    with pytest.raises(InterfaceError):
        transverse.rescale_mode(scaled, 0.5)    # already rescaled
    with pytest.raises(DomainError):
        transverse.rescale_mode(harmonic_mode, 0.0)


def test_coupling_b(harmonic_mode):
    a = 0.37
    b = transverse.coupling_b(a, harmonic_mode)
    assert b == pytest.approx(4.0 * a, abs=1e-8)
    assert transverse.coupling_b(0.0, harmonic_mode) == 0.0
    with pytest.raises(DomainError):
        transverse.coupling_b(-0.1, harmonic_mode)
    # a consistent rescaled mode reproduces the base coupling ...
    scaled = transverse.rescale_mode(harmonic_mode, 0.25)
    assert transverse.coupling_b(a, scaled) == pytest.approx(b, rel=1e-10)
    # ... and a tampered one is rejected
    broken = dataclasses.replace(scaled, base_quartic=scaled.base_quartic * 2.0)
    with pytest.raises(InterfaceError):
        transverse.coupling_b(a, broken)


def test_box_too_small_raises():
    with pytest.raises(GridTooSmallError):
        transverse.ground_state_2d(transverse.harmonic_profile, extent=6.0,
                                   n=64)


def test_domain_errors():
    with pytest.raises(DomainError):
        transverse.ground_state_2d(transverse.harmonic_profile, n=65)
    with pytest.raises(DomainError):
        transverse.ground_state_2d(transverse.harmonic_profile, n=2)
    with pytest.raises(DomainError):
        transverse.ground_state_2d(
            lambda y1, y2: np.where(y1 == 0.0, np.inf, y1**2 + y2**2))


def test_imaginary_time_budget_respected():
    with pytest.raises(ResolutionError):
        transverse.ground_state_2d(transverse.harmonic_profile, max_iters=2)
