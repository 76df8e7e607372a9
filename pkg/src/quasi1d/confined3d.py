"""Confined 3d dynamics and its reduction to the 1d line.

The mean-field dynamics of N bosons squeezed into an eps-thin tube reads

    i dpsi/dt = (-Laplace + V_perp(y/eps)/eps^2 + V_par(t, z)
                 + 8 pi a eps^2 |psi|^2) psi,

with z = (x, y).  The transverse box is scaled with eps (fixed number of
points across the mode), so the confinement is equally resolved at every
eps.  The longitudinal profile is extracted by projecting on the rescaled
transverse mode and removing the confinement phase exp(-i E0 t / eps^2);
for shrinking eps it converges to the cubic 1d dynamics with coupling
b = 8 pi a int |chi|^4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, GridTooSmallError, InterfaceError, ResolutionError
from .gpe1d import Field1D, Grid1D, energy_1d, evolve_1d, phase_distance
from .transverse import TransverseMode, coupling_b, ground_state_2d, rescale_mode

__all__ = ["Grid3D", "Field3D", "Trajectory3D", "make_grid", "product_state",
           "evolve_3d", "energy_3d", "extract_profile", "ReductionScenario",
           "ReductionRow", "ReductionTable", "reduction_sweep"]

# V_par(t, x, y1, y2) with broadcastable arrays; y-independent potentials may
# ignore the trailing arguments.
Potential3D = Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Periodic box: x side (length_x, n_x), two transverse sides scaled by eps."""

    length_x: float
    n_x: int
    extent_y: float            # transverse box side, already eps-scaled
    n_y: int
    epsilon: float

    def __post_init__(self) -> None:
        if self.n_x % 2 or self.n_y % 2 or self.n_x < 4 or self.n_y < 4:
            raise DomainError("grid sides need even point counts >= 4")
        points_across_mode = 4.0 * self.epsilon / self.dy
        if points_across_mode < 8.0:
            raise GridTooSmallError(
                f"transverse spacing {self.dy:g} resolves the eps-wide mode with "
                f"only {points_across_mode:.1f} points across; need at least 8")

    @property
    def dx(self) -> float:
        return self.length_x / self.n_x

    @property
    def dy(self) -> float:
        return self.extent_y / self.n_y

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_x) - self.n_x // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.n_y) - self.n_y // 2) * self.dy

    @property
    def dvol(self) -> float:
        return self.dx * self.dy * self.dy

    def k_squared(self) -> np.ndarray:
        kx = 2.0 * math.pi * np.fft.fftfreq(self.n_x, self.dx)
        ky = 2.0 * math.pi * np.fft.fftfreq(self.n_y, self.dy)
        return (kx[:, None, None] ** 2 + ky[None, :, None] ** 2
                + ky[None, None, :] ** 2)

    def x_grid(self) -> Grid1D:
        return Grid1D(self.length_x, self.n_x)


def make_grid(length_x: float, n_x: int, base_extent_y: float, n_y: int,
              epsilon: float) -> Grid3D:
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    return Grid3D(length_x, n_x, base_extent_y * epsilon, n_y, epsilon)


@dataclass(eq=False)
class Field3D:
    grid: Grid3D
    values: np.ndarray         # (n_x, n_y, n_y) complex
    time: float = 0.0

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.dvol)

    def normalized(self) -> "Field3D":
        return Field3D(self.grid, self.values / self.norm(), self.time)


def _check_mode_grid(mode: TransverseMode, grid: Grid3D) -> None:
    if mode.epsilon is None:
        raise InterfaceError("3d operations need a rescaled transverse mode")
    if not math.isclose(mode.epsilon, grid.epsilon, rel_tol=1e-12):
        raise InterfaceError(f"mode eps {mode.epsilon} does not match grid eps "
                             f"{grid.epsilon}")
    if mode.n != grid.n_y or not math.isclose(mode.extent, grid.extent_y,
                                              rel_tol=1e-12):
        raise InterfaceError("transverse mode grid does not match the 3d box")


def product_state(phi: Field1D, mode: TransverseMode, grid: Grid3D) -> Field3D:
    """psi(x, y) = Phi(x) chi_eps(y), normalized on the 3d grid."""
    _check_mode_grid(mode, grid)
    if phi.grid.n != grid.n_x or not math.isclose(phi.grid.length, grid.length_x,
                                                  rel_tol=1e-12):
        raise InterfaceError("longitudinal grid does not match the 3d box")
    values = phi.values[:, None, None] * mode.chi[None, :, :]
    return Field3D(grid, values.astype(complex), phi.time).normalized()


def _confinement(grid: Grid3D,
                 v_perp: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """V_perp(y / eps) / eps^2 on the transverse plane."""
    yb = grid.y / grid.epsilon
    y1, y2 = np.meshgrid(yb, yb, indexing="ij")
    return np.asarray(v_perp(y1, y2), dtype=float) / grid.epsilon**2


def _v_par_values(v_par: Potential3D, t: float, grid: Grid3D):
    if v_par is None:
        return 0.0
    x = grid.x[:, None, None]
    y1 = grid.y[None, :, None]
    y2 = grid.y[None, None, :]
    return v_par(t, x, y1, y2)


@dataclass(eq=False)
class Trajectory3D:
    times: np.ndarray
    norms: np.ndarray
    energies: np.ndarray
    final: Field3D
    samples: list[Field3D] = field(default_factory=list)

    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    def max_energy_drift(self) -> float:
        return float(np.max(np.abs(self.energies - self.energies[0])))


def energy_3d(psi: Field3D, a: float,
              v_perp: Callable[[np.ndarray, np.ndarray], np.ndarray],
              v_par: Potential3D = None) -> float:
    """<psi, (-Laplace + V_conf + V_par + (g/2)|psi|^2) psi>, g = 8 pi a eps^2."""
    grid = psi.grid
    g = 8.0 * math.pi * a * grid.epsilon**2
    psi_hat = np.fft.fftn(psi.values)
    kinetic = float(np.sum(grid.k_squared() * np.abs(psi_hat) ** 2)) \
        * grid.dvol / psi.values.size
    density = np.abs(psi.values) ** 2
    pot = _confinement(grid, v_perp)[None, :, :] + np.asarray(
        _v_par_values(v_par, psi.time, grid))
    potential = float(np.sum(pot * density)) * grid.dvol
    interaction = 0.5 * g * float(np.sum(density**2)) * grid.dvol
    return kinetic + potential + interaction


def evolve_3d(psi0: Field3D, a: float,
              v_perp: Callable[[np.ndarray, np.ndarray], np.ndarray],
              v_par: Potential3D, t_final: float, dt: float,
              sample_stride: int = 0) -> Trajectory3D:
    """Strang splitting with the full 3d spectral kinetic step."""
    if t_final <= 0.0 or dt <= 0.0:
        raise DomainError("t_final and dt must be positive")
    if a < 0.0:
        raise DomainError("scattering length must be non-negative")
    grid = psi0.grid
    n_steps = max(1, round(t_final / dt))
    dt = t_final / n_steps
    g = 8.0 * math.pi * a * grid.epsilon**2

    conf = _confinement(grid, v_perp)[None, :, :]
    kin = np.exp(-1j * dt * grid.k_squared())

    psi = psi0.values.copy()
    t = psi0.time
    times = np.empty(n_steps + 1)
    norms = np.empty(n_steps + 1)
    energies = np.empty(n_steps + 1)
    times[0] = t
    norms[0] = math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid.dvol)
    energies[0] = energy_3d(psi0, a, v_perp, v_par)
    samples = [Field3D(grid, psi.copy(), t)] if sample_stride else []
    for i in range(1, n_steps + 1):
        v_static = conf + np.asarray(_v_par_values(v_par, t + 0.5 * dt, grid))
        psi = psi * np.exp(-0.5j * dt * (v_static + g * np.abs(psi) ** 2))
        psi = np.fft.ifftn(kin * np.fft.fftn(psi))
        psi = psi * np.exp(-0.5j * dt * (v_static + g * np.abs(psi) ** 2))
        t = psi0.time + i * dt
        if not np.all(np.isfinite(psi.view(float))):
            raise ResolutionError(f"non-finite field at step {i} (t = {t:g})")
        times[i] = t
        norms[i] = math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid.dvol)
        energies[i] = energy_3d(Field3D(grid, psi, t), a, v_perp, v_par)
        if sample_stride and (i % sample_stride == 0 or i == n_steps):
            samples.append(Field3D(grid, psi.copy(), t))
    return Trajectory3D(times, norms, energies, Field3D(grid, psi, t), samples)


def extract_profile(psi: Field3D, mode: TransverseMode):
    """Project on the transverse mode and strip the confinement phase.

    Returns (Phi_eff, orthogonal_mass): Phi_eff(x) = exp(i E0 t) *
    <chi_eps, psi(x, .)>, and the mass of the transverse complement.
    """
    _check_mode_grid(mode, psi.grid)
    grid = psi.grid
    da = grid.dy * grid.dy
    coeff = np.tensordot(psi.values, mode.chi, axes=([1, 2], [0, 1])) * da
    coeff = coeff * np.exp(1j * mode.E0 * psi.time)
    phi_eff = Field1D(grid.x_grid(), coeff, psi.time)
    captured = float(np.sum(np.abs(coeff) ** 2)) * grid.dx
    # discrete Cauchy-Schwarz keeps captured <= ||psi||^2; clamp round-off
    orthogonal_mass = max(0.0, float(psi.norm() ** 2) - captured)
    return phi_eff, orthogonal_mass


# ---------------------------------------------------------------------------
# reduction sweep


@dataclass(eq=False)
class ReductionScenario:
    """Shared setup for a family of runs at decreasing eps.

    The 1d reference uses the same longitudinal grid, the same time step and
    the coupling b = 8 pi a int |chi|^4, so the measured gap is the genuine
    dimensional-reduction error, not a solver mismatch.  V_par must not
    depend on the transverse coordinates for the comparison to make sense.
    """

    a: float
    v_perp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    v_par_1d: Callable[[float, np.ndarray], np.ndarray] | None
    t_final: float
    dt_ref: float              # step used at eps_ref, scaled with (eps/eps_ref)^2
    eps_ref: float
    length_x: float = 16.0
    n_x: int = 128
    base_extent_y: float = 13.0
    n_y: int = 48
    mode_n: int = 96
    phi0_sigma: float = 1.0
    phi0_k0: float = 0.0


@dataclass(frozen=True)
class ReductionRow:
    epsilon: float
    err_l2: float
    orthogonal_mass: float
    energy_drift: float
    steps: int


@dataclass(eq=False)
class ReductionTable:
    rows: list[ReductionRow]
    monotone_err: bool
    monotone_orth: bool

    def err_ratios(self) -> list[float]:
        errs = [row.err_l2 for row in self.rows]
        return [errs[i + 1] / errs[i] if errs[i] > 0.0 else math.inf
                for i in range(len(errs) - 1)]


def reduction_sweep(scenario: ReductionScenario,
                    eps_list: Sequence[float]) -> ReductionTable:
    """Run the 3d model against its 1d reduction for each eps (descending)."""
    eps_values = list(eps_list)
    if any(e2 >= e1 for e1, e2 in zip(eps_values, eps_values[1:])):
        raise DomainError("eps_list must be strictly decreasing")

    from .gpe1d import gaussian_packet  # local import keeps module deps one-way

    base_mode = ground_state_2d(scenario.v_perp, extent=scenario.base_extent_y,
                                n=scenario.mode_n)
    b = coupling_b(scenario.a, base_mode)
    x_grid = Grid1D(scenario.length_x, scenario.n_x)
    phi0 = gaussian_packet(x_grid, sigma=scenario.phi0_sigma, k0=scenario.phi0_k0)

    v_par_1d = scenario.v_par_1d
    if v_par_1d is None:
        v_par_3d = None
    else:
        def v_par_3d(t, x, y1, y2):
            return v_par_1d(t, x) * np.ones_like(y1 + y2)

    rows: list[ReductionRow] = []
    for eps in eps_values:
        grid = make_grid(scenario.length_x, scenario.n_x, scenario.base_extent_y,
                         scenario.n_y, eps)
        mode_grid = ground_state_2d(scenario.v_perp, extent=scenario.base_extent_y,
                                    n=scenario.n_y)
        mode = rescale_mode(mode_grid, eps)
        psi0 = product_state(phi0, mode, grid)
        dt = scenario.dt_ref * (eps / scenario.eps_ref) ** 2
        traj3 = evolve_3d(psi0, scenario.a, scenario.v_perp, v_par_3d,
                          scenario.t_final, dt)
        n_steps = traj3.times.size - 1
        traj1 = evolve_1d(phi0, scenario.t_final, scenario.t_final / n_steps,
                          v_par_1d, b)
        phi_eff, orth = extract_profile(traj3.final, mode)
        err = phase_distance(phi_eff, traj1.final)
        rows.append(ReductionRow(epsilon=eps, err_l2=err, orthogonal_mass=orth,
                                 energy_drift=traj3.max_energy_drift(),
                                 steps=n_steps))

    errs = [row.err_l2 for row in rows]
    orths = [row.orthogonal_mass for row in rows]
    monotone_err = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    monotone_orth = all(orths[i + 1] < orths[i] for i in range(len(orths) - 1))
    return ReductionTable(rows, monotone_err, monotone_orth)
