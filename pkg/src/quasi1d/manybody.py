"""Finite-N counting formalism on dense grid tensors.

States of N bosons live as rank-N tensors over a small single-particle grid
(a periodic line or a flattened 3d box).  For a reference orbital phi the
slot projectors p = |phi><phi| and q = 1 - p generate the symmetrized
counters P_k (exactly k particles outside phi); weighted sums f_hat =
sum_k f(k) P_k and their shifted variants are the bookkeeping operators of
condensation estimates.  The weight

    m(k) = sqrt(k / N)                        for k >= N^(1 - 2 xi),
    m(k) = (k N^(xi - 1) + N^(-xi)) / 2       otherwise,

interpolates between counting and its square root; its first and second
discrete differences are small (order N^(xi - 1) and N^(3 xi - 2)), which is
what makes the weighted counters almost commute with the dynamics.  The
deviation functional combines <m_hat> with an energy-per-particle gap and
controls the trace-norm distance of the one-particle reduced density matrix
to the condensate projector in both directions:

    tracedist <= sqrt(8 alpha),   alpha <= gap + sqrt(tracedist) + N^(-xi)/2.

Everything here is exact dense linear algebra at desk scale: no truncation,
no sampling shortcuts, so the inequalities can be checked sample by sample.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable

import numpy as np

from .errors import DomainError, InterfaceError, ResolutionError
from .gpe1d import Field1D, Grid1D, energy_1d
from .scattering import CorrectionProfile
from .transverse import TransverseMode

__all__ = ["ManyBodyState", "random_symmetric_state", "product_state_mb",
           "symmetrize", "apply_projector", "projector_components",
           "apply_weighted", "expectation_weighted", "WeightTable", "rdm",
           "trace_norm_vs_pure", "HamiltonianSpec", "line_hamiltonian",
           "box_hamiltonian", "confined_hamiltonian", "orbital_from_fields",
           "energy_per_particle", "alpha_functional", "pair_indicator_form",
           "correlation_diagnostic"]

MAX_PARTICLES = 4


# ---------------------------------------------------------------------------
# states


@dataclass(eq=False)
class ManyBodyState:
    n_particles: int
    dim: int
    tensor: np.ndarray     # shape (dim,) * n_particles, plain l2 normalization

    def __post_init__(self) -> None:
        if not 2 <= self.n_particles <= MAX_PARTICLES:
            raise DomainError(f"n_particles must be 2..{MAX_PARTICLES} "
                              f"for dense tensors")
        if self.tensor.shape != (self.dim,) * self.n_particles:
            raise DomainError("tensor shape does not match (dim,) * n_particles")

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensor.ravel()))

    def normalized(self) -> "ManyBodyState":
        return ManyBodyState(self.n_particles, self.dim, self.tensor / self.norm())


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    n = tensor.ndim
    out = np.zeros_like(tensor)
    for perm in itertools.permutations(range(n)):
        out += tensor.transpose(perm)
    return out / math.factorial(n)


def random_symmetric_state(n_particles: int, dim: int,
                           rng: np.random.Generator) -> ManyBodyState:
    """Symmetrized complex-Gaussian tensor, normalized."""
    shape = (dim,) * n_particles
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return ManyBodyState(n_particles, dim, symmetrize(raw)).normalized()


def product_state_mb(orbital: np.ndarray, n_particles: int) -> ManyBodyState:
    orb = np.asarray(orbital, dtype=complex)
    orb = orb / np.linalg.norm(orb)
    tensor = reduce(np.multiply.outer, [orb] * n_particles)
    return ManyBodyState(n_particles, orb.size, tensor).normalized()


# ---------------------------------------------------------------------------
# slot projectors and weighted counters


def _check_orbital(state: ManyBodyState, orbital: np.ndarray) -> np.ndarray:
    orb = np.asarray(orbital, dtype=complex)
    if orb.shape != (state.dim,):
        raise InterfaceError("orbital length does not match the state's grid")
    nrm = np.linalg.norm(orb)
    if not math.isclose(nrm, 1.0, rel_tol=1e-10):
        raise InterfaceError("orbital must be normalized")
    return orb


def _apply_p(tensor: np.ndarray, orb: np.ndarray, slot: int) -> np.ndarray:
    d = orb.size
    moved = np.moveaxis(tensor, slot, 0).reshape(d, -1)
    projected = np.outer(orb, orb.conj() @ moved)
    return np.moveaxis(projected.reshape((d,) + tensor.shape[1:]), 0, slot)


def projector_components(state: ManyBodyState, orbital: np.ndarray) -> list[np.ndarray]:
    """[P_0 psi, ..., P_N psi]: the tensor split by number of slots outside phi.

    Built by running over slots and collecting p/q choices with exactly k
    q-factors; numerically stable because only sums of projections appear.
    """
    orb = _check_orbital(state, orbital)
    comps = [state.tensor]
    for slot in range(state.n_particles):
        p_parts = [_apply_p(c, orb, slot) for c in comps]
        new = []
        for k in range(len(comps) + 1):
            acc = None
            if k < len(comps):
                acc = p_parts[k]
            if k > 0:
                q_part = comps[k - 1] - p_parts[k - 1]
                acc = q_part if acc is None else acc + q_part
            new.append(acc)
        comps = new
    return comps


def apply_projector(state: ManyBodyState, orbital: np.ndarray, which: str,
                    index: int) -> ManyBodyState:
    """Apply p_j, q_j or P_k; the result is returned unnormalized."""
    orb = _check_orbital(state, orbital)
    n = state.n_particles
    if which in ("p", "q"):
        if not 0 <= index < n:
            raise DomainError(f"slot index must be in 0..{n - 1}")
        p_tensor = _apply_p(state.tensor, orb, index)
        out = p_tensor if which == "p" else state.tensor - p_tensor
    elif which == "P":
        if index < 0 or index > n:
            out = np.zeros_like(state.tensor)
        else:
            out = projector_components(state, orb)[index]
    else:
        raise DomainError(f"unknown projector kind {which!r}")
    return ManyBodyState(n, state.dim, out)


def apply_weighted(state: ManyBodyState, weights, orbital: np.ndarray,
                   shift: int = 0) -> ManyBodyState:
    """f_hat psi = sum_k f(k) P_k psi, or its shifted version.

    With a shift d the operator is sum_j f(j + d) P_j over the window where
    both j and j + d index valid counters; outside contributions vanish.
    ``weights`` is a length N + 1 array (f(0) ... f(N)).
    """
    w = np.asarray(weights, dtype=float)
    n = state.n_particles
    if w.shape != (n + 1,):
        raise DomainError(f"weights must have length {n + 1}")
    if abs(shift) > n:
        raise DomainError(f"shift {shift} leaves no overlap with counters 0..{n}")
    comps = projector_components(state, orbital)
    out = np.zeros_like(state.tensor)
    for j in range(n + 1):
        k = j + shift
        if 0 <= k <= n:
            out += w[k] * comps[j]
    return ManyBodyState(n, state.dim, out)


@dataclass(frozen=True, eq=False)
class WeightTable:
    """m(k) and its discrete difference families on k = 0..N.

    Differences are taken with the formula's natural extension past k = N,
    so every array has length N + 1.  First differences (one or two steps)
    stay below N^(xi - 1); the six second-difference combinations stay below
    N^(3 xi - 2).
    """

    n_particles: int
    xi: float
    m: np.ndarray
    m_a: np.ndarray   # m(k) - m(k+1)
    m_b: np.ndarray   # m(k) - m(k+2)
    m_c: np.ndarray   # m_a(k) - m_a(k+1)
    m_d: np.ndarray   # m_a(k) - m_a(k+2)
    m_e: np.ndarray   # m_b(k) - m_b(k+1)
    m_f: np.ndarray   # m_b(k) - m_b(k+2)

    @staticmethod
    def m_value(k, n: int, xi: float) -> np.ndarray:
        ks = np.asarray(k, dtype=float)
        crossover = n ** (1.0 - 2.0 * xi)
        return np.where(ks >= crossover, np.sqrt(np.maximum(ks, 0.0) / n),
                        0.5 * (ks * n ** (xi - 1.0) + n ** (-xi)))

    @classmethod
    def build(cls, n_particles: int, xi: float) -> "WeightTable":
        if not 0.0 < xi < 0.5:
            raise DomainError(f"xi must lie in (0, 1/2), got {xi}")
        if n_particles < 1:
            raise DomainError("need at least one particle")
        n = n_particles
        mv = cls.m_value(np.arange(n + 5), n, xi)
        a_full = mv[:-1] - mv[1:]
        b_full = mv[:-2] - mv[2:]
        return cls(n_particles=n, xi=xi, m=mv[:n + 1],
                   m_a=a_full[:n + 1], m_b=b_full[:n + 1],
                   m_c=a_full[:n + 1] - a_full[1:n + 2],
                   m_d=a_full[:n + 1] - a_full[2:n + 3],
                   m_e=b_full[:n + 1] - b_full[1:n + 2],
                   m_f=b_full[:n + 1] - b_full[2:n + 3])

    def bounds_report(self) -> dict:
        first = self.n_particles ** (self.xi - 1.0)
        second = self.n_particles ** (3.0 * self.xi - 2.0)
        sups = {name: float(np.max(np.abs(getattr(self, name))))
                for name in ("m_a", "m_b", "m_c", "m_d", "m_e", "m_f")}
        slack = 1.0 + 1e-12
        return {"sups": sups, "first_bound": first, "second_bound": second,
                "first_ok": sups["m_a"] <= first * slack
                            and sups["m_b"] <= first * slack,
                "second_ok": all(sups[name] <= second * slack
                                 for name in ("m_c", "m_d", "m_e", "m_f"))}


def expectation_weighted(state: ManyBodyState, weights, orbital: np.ndarray) -> float:
    """<psi, f_hat psi> via the counter decomposition (real for real f)."""
    w = np.asarray(weights, dtype=float)
    comps = projector_components(state, orbital)
    return float(sum(w[k] * np.vdot(comps[k], comps[k]).real
                     for k in range(state.n_particles + 1)))


# ---------------------------------------------------------------------------
# reduced density matrices


def rdm(state: ManyBodyState, k: int) -> np.ndarray:
    """k-particle reduced density matrix (trace normalized to 1).

    Requires k < N: at least one slot must actually be traced out.
    """
    n = state.n_particles
    if not 1 <= k < n:
        raise DomainError(f"k must be in 1..{n - 1}")
    mat = state.tensor.reshape(state.dim**k, state.dim ** (n - k))
    gamma = mat @ mat.conj().T
    return gamma / np.trace(gamma).real


def trace_norm_vs_pure(gamma: np.ndarray, orbital: np.ndarray) -> float:
    """Trace norm of gamma - |phi><phi| via exact eigendecomposition."""
    orb = np.asarray(orbital, dtype=complex)
    diff = gamma - np.outer(orb, orb.conj())
    diff = 0.5 * (diff + diff.conj().T)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# desk-scale Hamiltonians


@dataclass(eq=False)
class HamiltonianSpec:
    """Single-particle grid data for the N-body energy per particle.

    ``sp_shape`` is the unflattened single-particle grid; tensors index the
    flattened dimension.  ``e0_shift`` removes the confinement offset so the
    energy per particle is directly comparable with the 1d functional, whose
    potential and coupling are carried along for that purpose.
    """

    sp_shape: tuple
    spacings: tuple
    ksq: np.ndarray                        # shape sp_shape
    v_diag: np.ndarray                     # flattened (d,)
    coords: np.ndarray                     # (d, ndim) site coordinates
    box_lengths: tuple
    pair_potential: Callable[[np.ndarray], np.ndarray] | None
    e0_shift: float
    v_par_line: Callable[[float, np.ndarray], np.ndarray] | None
    b_effective: float
    pair_range: float | None = None
    _pair_matrix: np.ndarray | None = None
    _distances: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.pair_potential is not None and self.pair_range is not None:
            coarsest = max(self.spacings)
            if self.pair_range < 4.0 * coarsest:
                raise ResolutionError(
                    f"pair interaction range {self.pair_range:g} spans fewer "
                    f"than 4 grid points at spacing {coarsest:g}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.sp_shape))

    def pair_distances(self) -> np.ndarray:
        """Minimum-image distances between all site pairs, cached."""
        if self._distances is None:
            total = np.zeros((self.dim, self.dim))
            for axis, box in enumerate(self.box_lengths):
                delta = np.abs(self.coords[:, None, axis]
                               - self.coords[None, :, axis])
                delta = np.minimum(delta, box - delta)
                total += delta**2
            self._distances = np.sqrt(total)
        return self._distances

    def pair_matrix(self) -> np.ndarray | None:
        if self.pair_potential is None:
            return None
        if self._pair_matrix is None:
            self._pair_matrix = np.asarray(
                self.pair_potential(self.pair_distances()), dtype=float)
        return self._pair_matrix


def line_hamiltonian(grid: Grid1D,
                     v_par: Callable[[float, np.ndarray], np.ndarray] | None = None,
                     pair_potential: Callable[[np.ndarray], np.ndarray] | None = None,
                     b_effective: float = 0.0,
                     pair_range: float | None = None) -> HamiltonianSpec:
    """Dimensionally reduced single-particle grid: a periodic line."""
    x = grid.x
    v = np.asarray(v_par(0.0, x), dtype=float) if v_par is not None \
        else np.zeros_like(x)
    return HamiltonianSpec(sp_shape=(grid.n,), spacings=(grid.dx,),
                           ksq=grid.k**2, v_diag=v, coords=x[:, None],
                           box_lengths=(grid.length,),
                           pair_potential=pair_potential, e0_shift=0.0,
                           v_par_line=v_par, b_effective=b_effective,
                           pair_range=pair_range)


def box_hamiltonian(length: float, n: int,
                    pair_potential: Callable[[np.ndarray], np.ndarray] | None = None,
                    pair_range: float | None = None) -> HamiltonianSpec:
    """Bare periodic cube: kinetic plus pair term only.

    This is the substrate for pair-correlation checks where no external
    potential belongs in the form.
    """
    if n < 4 or length <= 0.0:
        raise DomainError("box needs n >= 4 points and positive length")
    dx = length / n
    x = dx * np.arange(n)
    k = 2.0 * math.pi * np.fft.fftfreq(n, dx)
    ksq = k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2
    g1, g2, g3 = np.meshgrid(x, x, x, indexing="ij")
    coords = np.stack([g1.ravel(), g2.ravel(), g3.ravel()], axis=1)
    return HamiltonianSpec(sp_shape=(n, n, n), spacings=(dx, dx, dx),
                           ksq=ksq, v_diag=np.zeros(n**3), coords=coords,
                           box_lengths=(length, length, length),
                           pair_potential=pair_potential, e0_shift=0.0,
                           v_par_line=None, b_effective=0.0,
                           pair_range=pair_range)


def confined_hamiltonian(x_grid: Grid1D, mode: TransverseMode,
                         v_perp: Callable[[np.ndarray, np.ndarray], np.ndarray],
                         v_par: Callable[[float, np.ndarray], np.ndarray] | None = None,
                         pair_potential: Callable[[np.ndarray], np.ndarray] | None = None,
                         b_effective: float = 0.0,
                         pair_range: float | None = None) -> HamiltonianSpec:
    """Flattened 3d box with the scaled confinement and its energy offset.

    ``mode`` must be a rescaled transverse mode; V_par acts on x only.
    """
    if mode.epsilon is None:
        raise InterfaceError("confined Hamiltonian needs a rescaled mode")
    eps = mode.epsilon
    x = x_grid.x
    y = mode.axis()
    yb = y / eps
    y1, y2 = np.meshgrid(yb, yb, indexing="ij")
    conf = np.asarray(v_perp(y1, y2), dtype=float) / eps**2
    v_line = np.asarray(v_par(0.0, x), dtype=float) if v_par is not None \
        else np.zeros_like(x)
    v_diag = (v_line[:, None, None] + conf[None, :, :]).ravel()

    kx = x_grid.k
    ky = 2.0 * math.pi * np.fft.fftfreq(mode.n, mode.spacing)
    ksq = kx[:, None, None] ** 2 + ky[None, :, None] ** 2 + ky[None, None, :] ** 2

    gx, gy1, gy2 = np.meshgrid(x, y, y, indexing="ij")
    coords = np.stack([gx.ravel(), gy1.ravel(), gy2.ravel()], axis=1)
    return HamiltonianSpec(sp_shape=(x_grid.n, mode.n, mode.n),
                           spacings=(x_grid.dx, mode.spacing, mode.spacing),
                           ksq=ksq, v_diag=v_diag, coords=coords,
                           box_lengths=(x_grid.length, mode.extent, mode.extent),
                           pair_potential=pair_potential, e0_shift=mode.E0,
                           v_par_line=v_par, b_effective=b_effective,
                           pair_range=pair_range)


def orbital_from_fields(phi: Field1D, mode: TransverseMode | None) -> np.ndarray:
    """Plain-normalized grid orbital Phi (x) chi_eps(y), flattened."""
    line = phi.values * math.sqrt(phi.grid.dx)
    if mode is None:
        orb = line
    else:
        orb = (line[:, None, None] * (mode.chi * mode.spacing)[None, :, :]).ravel()
    return orb / np.linalg.norm(orb)


def energy_per_particle(state: ManyBodyState, ham: HamiltonianSpec) -> float:
    """E_psi = <psi, H psi> / N minus the confinement offset."""
    if state.dim != ham.dim:
        raise InterfaceError("state dimension does not match the Hamiltonian grid")
    n = state.n_particles
    sp_ndim = len(ham.sp_shape)
    full = state.tensor.reshape(ham.sp_shape * n)
    slot_size = ham.dim

    total = 0.0
    density = np.abs(state.tensor) ** 2
    for slot in range(n):
        axes = tuple(range(slot * sp_ndim, (slot + 1) * sp_ndim))
        psi_hat = np.fft.fftn(full, axes=axes)
        shape = [1] * full.ndim
        for i, ax in enumerate(axes):
            shape[ax] = ham.sp_shape[i]
        total += float(np.sum(ham.ksq.reshape(shape)
                              * np.abs(psi_hat) ** 2)) / slot_size
        dens_slot = density.sum(axis=tuple(i for i in range(n) if i != slot))
        total += float(ham.v_diag @ dens_slot)

    w_mat = ham.pair_matrix()
    if w_mat is not None:
        for i, j in itertools.combinations(range(n), 2):
            other = tuple(s for s in range(n) if s not in (i, j))
            dens_pair = density.sum(axis=other) if other else density
            total += float(np.sum(w_mat * dens_pair))
    return total / n - ham.e0_shift


def alpha_functional(state: ManyBodyState, phi: Field1D, weights: WeightTable,
                     ham: HamiltonianSpec,
                     mode: TransverseMode | None = None) -> float:
    """Counting expectation of m_hat plus the energy-per-particle gap."""
    if weights.n_particles != state.n_particles:
        raise InterfaceError("weight table built for a different particle number")
    orb = orbital_from_fields(phi, mode)
    counting = expectation_weighted(state, weights.m, orb)
    e_psi = energy_per_particle(state, ham)
    e_phi = energy_1d(phi, ham.v_par_line, ham.b_effective)
    return counting + abs(e_psi - e_phi)


# ---------------------------------------------------------------------------
# pair-correlation checks


def pair_indicator_form(state: ManyBodyState, ham: HamiltonianSpec,
                        corr: CorrectionProfile) -> float:
    """||1_{|z1-z2|<R} grad_1 psi||^2 + <psi, (w_mu - U) psi> / 2 for N = 2.

    Non-negative in the continuum because the compensated profile has zero
    scattering length; evaluated here exactly on the grid.
    """
    if state.n_particles != 2:
        raise DomainError("the pair quadratic form is defined for N = 2")
    if state.dim != ham.dim:
        raise InterfaceError("state dimension does not match the Hamiltonian grid")
    sp_ndim = len(ham.sp_shape)
    full = state.tensor.reshape(ham.sp_shape * 2)

    dist = ham.pair_distances()
    mask = dist < corr.outer_radius

    grad_sq = np.zeros((ham.dim, ham.dim))
    for axis in range(sp_ndim):
        k_axis = 2.0 * math.pi * np.fft.fftfreq(ham.sp_shape[axis],
                                                ham.spacings[axis])
        shape = [1] * full.ndim
        shape[axis] = ham.sp_shape[axis]
        grad = np.fft.ifftn(1j * k_axis.reshape(shape)
                            * np.fft.fftn(full, axes=(axis,)), axes=(axis,))
        grad_sq += np.abs(grad.reshape(ham.dim, ham.dim)) ** 2

    density = np.abs(state.tensor) ** 2
    sol = corr.solution
    w_vals = sol.potential.scaled(dist, sol.mu)
    u_vals = corr.u_potential(dist)
    return float(np.sum(mask * grad_sq)
                 + 0.5 * np.sum((w_vals - u_vals) * density))


def correlation_diagnostic(state: ManyBodyState, phi: Field1D,
                           weights: WeightTable, corr: CorrectionProfile,
                           ham: HamiltonianSpec,
                           mode: TransverseMode | None = None) -> float:
    """|<psi, g_12 r_hat psi>| with r_hat the shifted-weight pair operator.

    r_hat = m_b_hat p1 p2 + m_a_hat (p1 q2 + q1 p2); reported magnitude only,
    as a smallness diagnostic for the correlation energy bookkeeping.
    """
    orb = orbital_from_fields(phi, mode)
    n = state.n_particles
    p1 = apply_projector(state, orb, "p", 0)
    p1p2 = apply_projector(p1, orb, "p", 1)
    p2 = apply_projector(state, orb, "p", 1)
    mixed = ManyBodyState(n, state.dim,
                          p1.tensor + p2.tensor - 2.0 * p1p2.tensor)
    part_b = apply_weighted(p1p2, weights.m_b, orb)
    part_a = apply_weighted(mixed, weights.m_a, orb)
    r_psi = part_b.tensor + part_a.tensor

    g_vals = corr.g(ham.pair_distances())
    r_full = r_psi.reshape(ham.dim, ham.dim, -1)
    psi_full = state.tensor.reshape(ham.dim, ham.dim, -1)
    value = np.vdot(psi_full, g_vals[:, :, None] * r_full)
    return abs(complex(value))
