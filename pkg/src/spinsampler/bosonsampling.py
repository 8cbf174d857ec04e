"""Bosonic target states and the adiabatic sweeps that prepare them in qubits.

The target of a circuit U fed with N single excitations is the state whose
amplitude on an output occupation pattern S is ``Per(U_S) / sqrt(prod s!)``
(U_S repeats the row of each occupied mode). Its hard-core analogue keeps
only collision-free patterns, with plain submatrix permanents as amplitudes.

Both preparation sweeps integrate a time-dependent Hamiltonian

    H(t) = delta * (coupling through U) + eps * (2 lambda(t) - 1) * (N_in - N_out)

inside the fixed-N excitation sector, starting from the first N input
modes excited. The detuning is written in the traceless splitting form, so
the energy gap between an input and an output excitation is 2 eps (2 lambda
- 1); the occupation-number form differs from it only by a time-dependent
multiple of the identity, i.e. a global phase. Using the same form for the
bosonic and the hard-core sweep makes the two dynamics coincide exactly at
N = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import dynamics
from .errors import InvalidFillingError, InvalidSpecError, ShapeError, TruncationError
from .linalg import as_matrix, permanent


# -- Fock basis with per-mode cutoff -------------------------------------------


def _occupation_tuples(modes: int, total: int, cutoff: int):
    if modes == 1:
        if total <= cutoff:
            yield (total,)
        return
    for first in range(0, min(total, cutoff) + 1):
        for rest in _occupation_tuples(modes - 1, total - first, cutoff):
            yield (first,) + rest


@dataclass(frozen=True)
class FockBasis:
    """All occupation patterns of ``modes`` bosonic modes with ``n_total`` quanta."""

    modes: int
    n_total: int
    cutoff: int
    patterns: tuple

    @property
    def dim(self) -> int:
        return len(self.patterns)

    def index(self, pattern) -> int:
        return self._lookup[tuple(pattern)]

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {p: i for i, p in enumerate(self.patterns)})


def fock_basis(modes: int, n_total: int, cutoff: int | None = None) -> FockBasis:
    if cutoff is None:
        cutoff = n_total
    if modes < 1 or n_total < 0:
        raise InvalidSpecError(f"invalid Fock space: modes={modes}, n={n_total}")
    if cutoff < 0 or (modes * cutoff) < n_total:
        raise TruncationError(f"cutoff {cutoff} cannot hold {n_total} quanta in {modes} modes")
    patterns = tuple(_occupation_tuples(modes, n_total, cutoff))
    return FockBasis(modes=modes, n_total=n_total, cutoff=cutoff, patterns=patterns)


@dataclass
class BosonSamplingState:
    """Amplitudes over a Fock basis."""

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ShapeError(f"expected {self.basis.dim} amplitudes, got {amps.shape}")
        self.amplitudes = amps

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def boson_hop_matrix(basis: FockBasis, to_mode: int, from_mode: int) -> np.ndarray:
    """Dense matrix of ``a^dag_to a_from`` on the truncated Fock basis."""
    h = np.zeros((basis.dim, basis.dim), dtype=complex)
    for idx, occ in enumerate(basis.patterns):
        nq = occ[from_mode]
        if nq == 0:
            continue
        if to_mode == from_mode:
            h[idx, idx] = nq
            continue
        npp = occ[to_mode]
        if npp >= basis.cutoff:
            continue
        new = list(occ)
        new[from_mode] -= 1
        new[to_mode] += 1
        h[basis.index(new), idx] = math.sqrt(nq * (npp + 1))
    return h


def boson_occupation_diagonal(basis: FockBasis, modes) -> np.ndarray:
    sel = list(modes)
    return np.array([sum(occ[i] for i in sel) for occ in basis.patterns], dtype=float)


# -- target states --------------------------------------------------------------


def bs_state(u, n_excited: int) -> BosonSamplingState:
    """Output state of the circuit fed with one boson in each of the first N modes.

    Amplitude on pattern S is Per(U_S)/sqrt(prod_m s_m!) with U_S built from
    the occupied rows (with multiplicity) and the first N columns. The norm
    comes out as 1 up to roundoff for a unitary circuit.
    """
    um = as_matrix(u)
    m = um.shape[0]
    if n_excited > m or n_excited < 1:
        raise InvalidFillingError(f"need 1 <= N <= M, got N={n_excited}, M={m}")
    basis = fock_basis(m, n_excited)
    cols = um[:, :n_excited]
    amps = np.zeros(basis.dim, dtype=complex)
    for idx, occ in enumerate(basis.patterns):
        rows = np.repeat(np.arange(m), occ)
        denom = math.prod(math.factorial(s) for s in occ)
        amps[idx] = permanent(cols[rows, :]) / math.sqrt(denom)
    return BosonSamplingState(basis=basis, amplitudes=amps)


def hardcore_bs_state(u, n_excited: int) -> dynamics.SectorState:
    """Hard-core truncation of the target: collision patterns dropped.

    Lives on the N-excitation sector of M qubit sites (the output register);
    amplitudes are permanents of row-distinct submatrices and the state is
    returned unnormalized, with its norm available from ``.norm()``.
    """
    um = as_matrix(u)
    m = um.shape[0]
    if n_excited > m or n_excited < 1:
        raise InvalidFillingError(f"need 1 <= N <= M, got N={n_excited}, M={m}")
    basis = dynamics.enumerate_sector(m, n_excited)
    cols = um[:, :n_excited]
    amps = np.zeros(basis.dim, dtype=complex)
    for idx in range(basis.dim):
        rows = list(basis.occupations(idx))
        amps[idx] = permanent(cols[rows, :])
    return dynamics.SectorState(basis=basis, amplitudes=amps)


# -- sweep schedule and integration ----------------------------------------------


def _smoothstep_lambda(s: float) -> float:
    return 1.0 - (3.0 * s * s - 2.0 * s * s * s)


@dataclass(frozen=True)
class SweepSchedule:
    """Detuning amplitude, total time, and the switching profile lambda(t).

    lambda must interpolate monotonically from exactly 1 at t=0 to exactly 0
    at t=T; the default is the smoothstep polynomial (zero slope at both
    ends).
    """

    epsilon: float
    total_time: float
    profile: object = "smoothstep"

    def __post_init__(self):
        if self.total_time <= 0:
            raise InvalidSpecError(f"total_time must be positive, got {self.total_time}")
        lam0 = self.lambda_at(0.0)
        lam1 = self.lambda_at(self.total_time)
        if abs(lam0 - 1.0) > 1e-12 or abs(lam1) > 1e-12:
            raise InvalidSpecError(f"profile must have lambda(0)=1, lambda(T)=0; got {lam0}, {lam1}")
        samples = [self.lambda_at(t) for t in np.linspace(0.0, self.total_time, 101)]
        if any(b - a > 1e-12 for a, b in zip(samples, samples[1:])):
            raise InvalidSpecError("profile must be monotone non-increasing")

    def lambda_at(self, t: float) -> float:
        s = min(max(t / self.total_time, 0.0), 1.0)
        if self.profile == "smoothstep":
            return _smoothstep_lambda(s)
        return float(self.profile(t))


def default_schedule(delta: float, epsilon: float | None = None, total_time: float | None = None) -> SweepSchedule:
    """Schedule with the stock choices eps = 10 delta, T = 100 / delta."""
    d = abs(delta)
    return SweepSchedule(
        epsilon=10.0 * d if epsilon is None else epsilon,
        total_time=100.0 / d if total_time is None else total_time,
    )


def integrate_detuned_sweep(
    hj: np.ndarray,
    detuning_diag: np.ndarray,
    epsilon: float,
    lambda_fn,
    t_end: float,
    psi0: np.ndarray,
    n_records: int = 101,
    rtol: float = 1e-9,
) -> dynamics.Trajectory:
    """Integrate H(t) = hj + eps (2 lambda(t) - 1) diag, recording n_records times.

    Shared by the bosonic and hard-core sweeps (and usable with a frozen
    lambda for detuning-suppression checks).
    """
    if dynamics._hermiticity_residual(hj) > 1e-10:
        raise ShapeError("sweep coupling matrix is not Hermitian")

    def rhs(t, y):
        coef = epsilon * (2.0 * lambda_fn(t) - 1.0)
        return -1j * (hj @ y + coef * (detuning_diag * y))

    t_eval = np.linspace(0.0, t_end, n_records)
    sol = solve_ivp(rhs, (0.0, t_end), psi0.astype(complex), method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=rtol)
    if not sol.success:
        raise InvalidSpecError(f"sweep integration failed: {sol.message}")
    return dynamics.Trajectory(times=sol.t, states=sol.y.T.copy())


def _warn_if_diabatic(schedule: SweepSchedule, delta: float) -> None:
    if schedule.epsilon < 5.0 * abs(delta):
        warnings.warn(
            f"detuning epsilon = {schedule.epsilon} is not large compared to the "
            f"coupling delta = {delta}; the sweep may not stay adiabatic",
            stacklevel=3,
        )


@dataclass
class BosonSweepResult:
    basis: FockBasis
    trajectory: dynamics.Trajectory
    final_state: BosonSamplingState
    target: np.ndarray  # target amplitudes over the same basis
    fidelity: float


def adiabatic_sweep_boson(
    u, n_excited: int, schedule: SweepSchedule, delta: float, cutoff: int | None = None
) -> BosonSweepResult:
    """Transfer N bosons from the input modes into the circuit's output state.

    Modes 0..M-1 are inputs and M..2M-1 outputs; the coupling is J = delta*U.
    For slow sweeps the final state approaches ``bs_state(u, N)`` on the
    output register.
    """
    um = as_matrix(u)
    m = um.shape[0]
    if n_excited > m or n_excited < 1:
        raise InvalidFillingError(f"need 1 <= N <= M, got N={n_excited}, M={m}")
    if cutoff is None:
        cutoff = n_excited
    if cutoff < n_excited:
        raise TruncationError(f"per-mode cutoff {cutoff} < N = {n_excited}")
    _warn_if_diabatic(schedule, delta)
    basis = fock_basis(2 * m, n_excited, cutoff)
    hj = np.zeros((basis.dim, basis.dim), dtype=complex)
    for out_port in range(m):
        for in_port in range(m):
            if um[out_port, in_port] != 0:
                hj += delta * um[out_port, in_port] * boson_hop_matrix(basis, m + out_port, in_port)
    hj = hj + hj.conj().T
    detuning = boson_occupation_diagonal(basis, range(m)) - boson_occupation_diagonal(
        basis, range(m, 2 * m)
    )
    start = tuple((1 if i < n_excited else 0) for i in range(m)) + (0,) * m
    psi0 = np.zeros(basis.dim, dtype=complex)
    psi0[basis.index(start)] = 1.0
    traj = integrate_detuned_sweep(
        hj, detuning, schedule.epsilon, schedule.lambda_at, schedule.total_time, psi0
    )
    target_out = bs_state(um, n_excited)
    target = np.zeros(basis.dim, dtype=complex)
    for idx, occ in enumerate(target_out.basis.patterns):
        target[basis.index((0,) * m + occ)] = target_out.amplitudes[idx]
    fid = float(np.abs(np.vdot(target, traj.final)) ** 2 / (np.vdot(target, target).real))
    return BosonSweepResult(
        basis=basis,
        trajectory=traj,
        final_state=BosonSamplingState(basis=basis, amplitudes=traj.final),
        target=target,
        fidelity=fid,
    )


@dataclass
class SpinSweepResult:
    basis: dynamics.SectorBasis
    trajectory: dynamics.Trajectory
    final_state: dynamics.SectorState
    target: np.ndarray  # normalized hard-core target embedded in the sector
    fidelity: float


def adiabatic_sweep_spin(
    u, n_excited: int, schedule: SweepSchedule, delta: float
) -> SpinSweepResult:
    """Hard-core version of the sweep on the 2M qubits.

    Requires a real coupling matrix (the orthogonal-circuit case); the final
    state is compared against the normalized hard-core target.
    """
    um = as_matrix(u)
    m = um.shape[0]
    if float(np.max(np.abs(um.imag))) > 1e-12:
        raise InvalidSpecError("spin sweep requires a real coupling matrix")
    jr = um.real.astype(float)
    if n_excited > m or n_excited < 1:
        raise InvalidFillingError(f"need 1 <= N <= M, got N={n_excited}, M={m}")
    _warn_if_diabatic(schedule, delta)
    basis = dynamics.enumerate_sector(2 * m, n_excited)
    hj = dynamics.bipartite_xy_matrix(basis, delta * jr)
    detuning = dynamics.occupation_diagonal(basis, range(m)) - dynamics.occupation_diagonal(
        basis, range(m, 2 * m)
    )
    psi0 = dynamics.basis_state(basis, range(n_excited))
    traj = integrate_detuned_sweep(
        hj, detuning, schedule.epsilon, schedule.lambda_at, schedule.total_time,
        psi0.amplitudes,
    )
    hc = hardcore_bs_state(jr, n_excited)
    target = np.zeros(basis.dim, dtype=complex)
    for idx in range(hc.basis.dim):
        mask = int(hc.basis.masks[idx]) << m  # output sites sit above the input register
        target[basis.index(mask)] = hc.amplitudes[idx]
    target /= np.linalg.norm(target)
    fid = float(np.abs(np.vdot(target, traj.final)) ** 2)
    return SpinSweepResult(
        basis=basis,
        trajectory=traj,
        final_state=dynamics.SectorState(basis=basis, amplitudes=traj.final),
        target=target,
        fidelity=fid,
    )


# -- distances -------------------------------------------------------------------


def state_distance(a, b) -> tuple[float, complex]:
    """Euclidean distance after optimal global phase alignment, plus raw overlap."""
    av = np.asarray(a, dtype=complex).ravel()
    bv = np.asarray(b, dtype=complex).ravel()
    if av.shape != bv.shape:
        raise ShapeError(f"states live in different spaces: {av.shape} vs {bv.shape}")
    na2 = float(np.vdot(av, av).real)
    nb2 = float(np.vdot(bv, bv).real)
    ov = complex(np.vdot(av, bv))
    dist = math.sqrt(max(na2 + nb2 - 2.0 * abs(ov), 0.0))
    return dist, ov


def boson_to_hardcore(state: BosonSamplingState) -> tuple[dynamics.SectorState, float]:
    """Project a Fock state onto collision-free patterns, mapped to qubit bitmasks.

    Returns the sector-state projection and the kept squared weight relative
    to the input's squared norm.
    """
    basis = state.basis
    sector = dynamics.enumerate_sector(basis.modes, basis.n_total)
    amps = np.zeros(sector.dim, dtype=complex)
    kept = 0.0
    for idx, occ in enumerate(basis.patterns):
        if max(occ) <= 1:
            mask = sum(1 << i for i, v in enumerate(occ) if v)
            amps[sector.index(mask)] = state.amplitudes[idx]
            kept += float(np.abs(state.amplitudes[idx]) ** 2)
    total = float(np.vdot(state.amplitudes, state.amplitudes).real)
    weight = kept / total if total > 0 else 0.0
    return dynamics.SectorState(basis=sector, amplitudes=amps), weight
