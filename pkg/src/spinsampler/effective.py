"""Effective models for 2M qubits coupled through an M-port circuit.

Coherent case (closed circuit): second-order virtual-photon exchange gives a
bipartite XY Hamiltonian with coupling matrix ``J_mn = sum_k Re[U_mn(nu_k)]
g_k^2 / (delta - omega_k)`` and a renormalized splitting. The inverse problem
(symmetric J -> unitary with Re[U] proportional to J) is solved by spectral
synthesis.

Dissipative case (open circuit): the reduced qubit dynamics is a Lindblad
generator whose sandwich terms carry the site coefficient matrix::

    C = [[ I      , Re[U]^T ],
         [ Re[U]  , I       ]]        (sites ordered in_0..in_{M-1}, out_0..)

i.e. local lowering at rate gamma on every qubit plus cross sandwiches
``gamma Re[U_nm] (sigma^-_out,n rho sigma^+_in,m + h.c.)`` with matching
anticommutators, together with the coherent part
``H_eff = gamma sum_mn Im[U_mn] sigma^+_out,m sigma^-_in,n + h.c.``.
C is positive semidefinite (singular values of Re[U] are at most 1), so its
eigendecomposition factorizes the generator into proper jump operators. For
real orthogonal U this reproduces the collective-operator form with overall
scale 2*gamma, which is the normalization used for all reported decay rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .errors import (
    DegenerateInputError,
    DispersiveViolationError,
    InvalidSectorError,
    InvalidUnitaryError,
    ShapeError,
    SymmetryError,
)
from .interferometer import InterferometerMesh, mesh_unitary
from .linalg import UnitaryMatrix, as_matrix, unitarity_residual

SYMMETRY_TOL = 1e-10
EIGENVALUE_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class CouplingConfig:
    """Qubit splitting plus the photonic environment it couples to.

    ``modes`` lists resonator modes as ``(omega, g)`` pairs for the closed
    circuit; ``resonant_amplitude`` and ``density_of_states`` describe the
    continuum for the open circuit.
    """

    delta: float
    modes: tuple = ()
    resonant_amplitude: float | None = None
    density_of_states: float | None = None

    def __post_init__(self):
        if self.delta <= 0:
            raise ShapeError(f"qubit splitting must be positive, got {self.delta}")
        modes = tuple((float(w), float(g)) for w, g in self.modes)
        offending = []
        for i, (w, g) in enumerate(modes):
            if w <= 0:
                raise ShapeError(f"mode {i} has non-positive frequency {w}")
            if g <= 0:
                raise ShapeError(f"mode {i} has non-positive coupling {g}")
            if abs(self.delta - w) <= g:
                offending.append(i)
        if offending:
            raise DispersiveViolationError(offending)
        object.__setattr__(self, "modes", modes)


def emission_rate(resonant_amplitude: float, density_of_states: float) -> float:
    """Spontaneous emission rate of one qubit onto its channel, 2 g^2 D."""
    return 2.0 * resonant_amplitude**2 * density_of_states


@dataclass(frozen=True)
class SpinHamiltonian:
    """Renormalized splitting plus the bipartite output-to-input coupling matrix."""

    m: int
    delta_tilde: float
    j: np.ndarray

    def __post_init__(self):
        jm = np.asarray(self.j, dtype=float)
        if jm.shape != (self.m, self.m):
            raise ShapeError(f"J must be {self.m}x{self.m}, got {jm.shape}")
        if not np.all(np.isfinite(jm)):
            raise ShapeError("J contains non-finite entries")
        jm.flags.writeable = False
        object.__setattr__(self, "j", jm)


def _circuit_provider(circuit):
    if isinstance(circuit, InterferometerMesh):
        return circuit.ports, lambda nu: np.asarray(mesh_unitary(circuit, nu))
    if callable(circuit):
        probe = as_matrix(circuit(1.0))
        return probe.shape[0], lambda nu: as_matrix(circuit(nu))
    const = as_matrix(circuit)
    return const.shape[0], lambda nu: const


def resonator_couplings(cfg: CouplingConfig, circuit) -> SpinHamiltonian:
    """Dispersive coupling matrix of the closed-circuit setup.

    ``circuit`` may be an InterferometerMesh (evaluated at nu = omega/delta,
    assuming linear dispersion), a constant matrix, or a callable nu -> U.
    """
    if not cfg.modes:
        raise ShapeError("resonator configuration requires a non-empty mode list")
    m, provider = _circuit_provider(circuit)
    shift = 0.0
    j = np.zeros((m, m), dtype=float)
    for omega, g in cfg.modes:
        weight = g**2 / (cfg.delta - omega)
        shift += weight
        u = provider(omega / cfg.delta)
        if u.shape != (m, m):
            raise ShapeError(f"circuit returned shape {u.shape}, expected {(m, m)}")
        j += weight * u.real
    return SpinHamiltonian(m=m, delta_tilde=cfg.delta + shift, j=j)


def unitary_from_couplings(j) -> tuple[UnitaryMatrix, float]:
    """Unitary U with Re[U] = J / delta for a real symmetric J.

    Diagonalize J, set delta to the largest eigenvalue magnitude, and lift
    each eigenvalue lambda to the phase e^{i arccos(lambda/delta)}.
    """
    jm = as_matrix(j).real.astype(float)
    if jm.shape[0] != jm.shape[1]:
        raise ShapeError(f"J must be square, got {jm.shape}")
    asym = float(np.max(np.abs(jm - jm.T)))
    if asym > SYMMETRY_TOL:
        raise SymmetryError(f"J is not symmetric (max |J - J^T| = {asym:.2e})")
    jm = (jm + jm.T) / 2.0
    lam, vec = np.linalg.eigh(jm)
    delta = float(np.max(np.abs(lam)))
    if delta == 0.0:
        raise DegenerateInputError("J is the zero matrix")
    ratio = np.clip(lam / delta, -1.0 - EIGENVALUE_CLAMP_TOL, 1.0 + EIGENVALUE_CLAMP_TOL)
    theta = np.arccos(np.clip(ratio, -1.0, 1.0))
    u = (vec * np.exp(1j * theta)) @ vec.T
    return UnitaryMatrix(u), delta


def build_spin_hamiltonian(delta_tilde: float, j, n_excited: int):
    """Sector-restricted matrix of the bipartite XY Hamiltonian.

    Returns ``(basis, matrix)`` for the ``n_excited`` sector of the 2M
    qubits: the splitting term (delta_tilde/2) sum sigma^z plus the
    excitation-conserving exchange sum J_mn sigma^+_out,m sigma^-_in,n + h.c.
    """
    jm = as_matrix(j)
    m = jm.shape[0]
    if n_excited > 2 * m or n_excited < 0:
        raise InvalidSectorError(f"sector {n_excited} invalid for {2 * m} qubits")
    basis = dynamics.enumerate_sector(2 * m, n_excited)
    h = dynamics.bipartite_xy_matrix(basis, jm)
    # sum sigma^z = 2 N - sites is constant inside a sector
    h += np.eye(basis.dim) * (delta_tilde / 2.0) * (2 * n_excited - 2 * m)
    return basis, h


@dataclass
class RealizedGenerator:
    """Dense matrices of a Lindblad generator on one truncated space."""

    h: np.ndarray
    jumps: list  # (weight, lowering matrix) pairs
    k: np.ndarray  # sum_r w_r J_r^dag J_r
    rate: float

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h @ rho - rho @ self.h)
        for w, jm in self.jumps:
            out += w * (jm @ rho @ jm.conj().T)
        out -= 0.5 * (self.k @ rho + rho @ self.k)
        return out

    def superoperator(self) -> np.ndarray:
        """Column-stacked matrix of the generator (small spaces only)."""
        dim = self.h.shape[0]
        sup = np.zeros((dim * dim, dim * dim), dtype=complex)
        for a in range(dim):
            for b in range(dim):
                e = np.zeros((dim, dim), dtype=complex)
                e[a, b] = 1.0
                sup[:, a * dim + b] = self.rhs(e).reshape(-1)
        return sup


@dataclass(frozen=True)
class Lindbladian:
    """Effective open-circuit generator, fixed by the resonant unitary and gamma."""

    m: int
    gamma: float
    u: np.ndarray

    def coefficient_matrix(self) -> np.ndarray:
        """Site coefficient matrix C of the sandwich terms (PSD, 2M x 2M)."""
        re = self.u.real
        c = np.zeros((2 * self.m, 2 * self.m))
        c[: self.m, : self.m] = np.eye(self.m)
        c[self.m :, self.m :] = np.eye(self.m)
        c[: self.m, self.m :] = re.T
        c[self.m :, : self.m] = re
        return c

    def h_eff_coefficients(self) -> np.ndarray:
        """Single-particle coefficients gamma * Im[U] of the coherent part."""
        return self.gamma * self.u.imag

    def realize(self, space: dynamics.TruncatedSpace) -> RealizedGenerator:
        if space.sites != 2 * self.m:
            raise ShapeError(f"space has {space.sites} sites, generator needs {2 * self.m}")
        im = self.u.imag

        def h_block(sec):
            block = np.zeros((sec.dim, sec.dim), dtype=complex)
            for out_port in range(self.m):
                for in_port in range(self.m):
                    w = im[out_port, in_port]
                    if w != 0.0:
                        block += w * dynamics.hop_matrix(sec, self.m + out_port, in_port)
            return self.gamma * (block + block.conj().T)

        h = dynamics.space_number_conserving(space, h_block)
        lam, q = np.linalg.eigh(self.coefficient_matrix())
        jumps = []
        k = np.zeros((space.dim, space.dim), dtype=complex)
        for r in range(len(lam)):
            if lam[r] <= 1e-12:
                continue
            weight = self.gamma * float(lam[r])
            lower = dynamics.space_lowering(space, q[:, r])
            jumps.append((weight, lower))
            k += weight * (lower.conj().T @ lower)
        return RealizedGenerator(h=h, jumps=jumps, k=k, rate=self.gamma)


def build_lindbladian(u, gamma: float) -> Lindbladian:
    """Validate the resonant unitary and assemble the master-equation generator."""
    um = as_matrix(u)
    res = unitarity_residual(um)
    if res > 1e-8:
        raise InvalidUnitaryError(f"unitarity residual {res:.3e} too large for a circuit matrix")
    if gamma <= 0:
        raise ShapeError(f"decay rate must be positive, got {gamma}")
    um = um.copy()
    um.flags.writeable = False
    return Lindbladian(m=um.shape[0], gamma=float(gamma), u=um)


@dataclass(frozen=True)
class CollectiveOperatorSet:
    """The M collective raising operators of the orthogonal-circuit dissipator.

    ``S^+_m`` raises input qubit m with weight 1/sqrt(2) and output qubit n
    with weight O_nm/sqrt(2); its site-coefficient vector can be realized as
    a matrix between any pair of adjacent sectors.
    """

    o: np.ndarray

    @property
    def m(self) -> int:
        return self.o.shape[0]

    def site_coefficients(self, index: int) -> np.ndarray:
        coeffs = np.zeros(2 * self.m, dtype=complex)
        coeffs[index] = 1.0 / math.sqrt(2.0)
        coeffs[self.m :] = self.o[:, index] / math.sqrt(2.0)
        return coeffs

    def raising_matrix(self, basis_to, basis_from, index: int) -> np.ndarray:
        return dynamics.transition_matrix(
            basis_to, basis_from, self.site_coefficients(index), raising=True
        )

    def lowering_matrix(self, basis_to, basis_from, index: int) -> np.ndarray:
        return dynamics.transition_matrix(
            basis_to, basis_from, np.conj(self.site_coefficients(index)), raising=False
        )


def collective_ops(o) -> CollectiveOperatorSet:
    om = np.asarray(o, dtype=float)
    res = float(np.max(np.abs(om.T @ om - np.eye(om.shape[0]))))
    if res > 1e-8:
        raise InvalidUnitaryError(f"orthogonality residual {res:.3e} too large")
    om = om.copy()
    om.flags.writeable = False
    return CollectiveOperatorSet(o=om)


def collective_generator(o, gamma: float, space: dynamics.TruncatedSpace) -> RealizedGenerator:
    """Realized generator of ``gamma sum_m D[S^-_m]`` on a truncated space."""
    ops = collective_ops(o)
    jumps = []
    k = np.zeros((space.dim, space.dim), dtype=complex)
    for m in range(ops.m):
        lower = dynamics.space_lowering(space, np.conj(ops.site_coefficients(m)))
        jumps.append((gamma, lower))
        k += gamma * (lower.conj().T @ lower)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    return RealizedGenerator(h=h, jumps=jumps, k=k, rate=gamma)
