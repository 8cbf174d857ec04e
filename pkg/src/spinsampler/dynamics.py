"""Fixed-excitation sector bases and time integrators.

Site layout convention used everywhere: a circuit with M ports carries
2M qubits, sites ``0 .. M-1`` are the input qubits and sites ``M .. 2M-1``
the output qubits. A sector basis enumerates the bitmasks with a fixed
number of excited sites in lexicographic (ascending-integer) order.

Hamiltonians restricted to one sector are dense complex matrices; density
matrices live on the direct sum of sectors ``0 .. n_max`` (small systems
only, the basis grows like C(2M, N)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InvalidFillingError, InvalidHamiltonianError, InvalidSectorError, ShapeError
from .linalg import as_matrix, permanent

MAX_SITES = 62  # bitmasks are held in int64 arrays


@dataclass(frozen=True)
class SectorBasis:
    """Basis of all ``n_excited``-excitation states of ``sites`` qubits."""

    sites: int
    n_excited: int
    masks: np.ndarray  # sorted int64 bitmasks

    @property
    def dim(self) -> int:
        return len(self.masks)

    def index(self, mask: int) -> int:
        pos = int(np.searchsorted(self.masks, mask))
        if pos >= len(self.masks) or self.masks[pos] != mask:
            raise InvalidSectorError(f"bitmask {mask:#x} not in this sector")
        return pos

    def occupations(self, i: int) -> tuple[int, ...]:
        mask = int(self.masks[i])
        return tuple(s for s in range(self.sites) if mask >> s & 1)


def enumerate_sector(sites: int, n_excited: int) -> SectorBasis:
    """Deterministic enumeration of the fixed-excitation sector."""
    if sites < 1 or sites > MAX_SITES:
        raise InvalidSectorError(f"sites must be in 1..{MAX_SITES}, got {sites}")
    if n_excited < 0 or n_excited > sites:
        raise InvalidSectorError(f"need 0 <= N <= sites, got N={n_excited}, sites={sites}")
    masks = np.sort(
        np.fromiter(
            (sum(1 << s for s in combo) for combo in combinations(range(sites), n_excited)),
            dtype=np.int64,
            count=math.comb(sites, n_excited),
        )
    )
    masks.flags.writeable = False
    return SectorBasis(sites=sites, n_excited=n_excited, masks=masks)


@dataclass
class SectorState:
    """Amplitude vector over one sector basis."""

    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ShapeError(f"expected {self.basis.dim} amplitudes, got {amps.shape}")
        self.amplitudes = amps

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def basis_state(basis: SectorBasis, occupied_sites) -> SectorState:
    """Computational state with the given sites excited."""
    occupied = sorted(set(int(s) for s in occupied_sites))
    if len(occupied) != basis.n_excited:
        raise InvalidSectorError(
            f"{len(occupied)} distinct sites given for an N={basis.n_excited} sector"
        )
    mask = sum(1 << s for s in occupied)
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.index(mask)] = 1.0
    return SectorState(basis=basis, amplitudes=amps)


# -- operator builders (dense, sector-restricted) ------------------------------


def hop_matrix(basis: SectorBasis, to_site: int, from_site: int) -> np.ndarray:
    """Matrix of sigma^+_to sigma^-_from within one sector (number operator if equal)."""
    masks = basis.masks
    if to_site == from_site:
        return np.diag(((masks >> to_site) & 1).astype(float)).astype(complex)
    occ_from = (masks >> from_site) & 1
    free_to = 1 - ((masks >> to_site) & 1)
    sel = np.nonzero(occ_from & free_to)[0]
    new = (masks[sel] ^ (np.int64(1) << from_site)) | (np.int64(1) << to_site)
    rows = np.searchsorted(masks, new)
    h = np.zeros((basis.dim, basis.dim), dtype=complex)
    h[rows, sel] = 1.0
    return h


def transition_matrix(
    basis_to: SectorBasis, basis_from: SectorBasis, site_coeffs, raising: bool = True
) -> np.ndarray:
    """Matrix of ``sum_s c_s sigma^+_s`` (or sigma^-) between adjacent sectors."""
    coeffs = np.asarray(site_coeffs, dtype=complex)
    if coeffs.shape != (basis_from.sites,):
        raise ShapeError(f"need one coefficient per site, got {coeffs.shape}")
    expected = basis_from.n_excited + (1 if raising else -1)
    if basis_to.n_excited != expected or basis_to.sites != basis_from.sites:
        raise InvalidSectorError("sector bases are not adjacent in excitation number")
    masks = basis_from.masks
    out = np.zeros((basis_to.dim, basis_from.dim), dtype=complex)
    for s in range(basis_from.sites):
        if coeffs[s] == 0:
            continue
        bit = np.int64(1) << np.int64(s)
        if raising:
            sel = np.nonzero((masks & bit) == 0)[0]
            new = masks[sel] | bit
        else:
            sel = np.nonzero((masks & bit) != 0)[0]
            new = masks[sel] ^ bit
        rows = np.searchsorted(basis_to.masks, new)
        out[rows, sel] += coeffs[s]
    return out


def occupation_diagonal(basis: SectorBasis, sites) -> np.ndarray:
    """Diagonal (as a vector) of the summed occupation over a set of sites."""
    total = np.zeros(basis.dim, dtype=float)
    for s in sites:
        total += ((basis.masks >> int(s)) & 1).astype(float)
    return total


def bipartite_xy_matrix(basis: SectorBasis, j) -> np.ndarray:
    """Sector matrix of ``sum_mn J_mn sigma^+_out,m sigma^-_in,n + h.c.``.

    Sites ``0..M-1`` are inputs, ``M..2M-1`` outputs; J rows index output
    ports and columns input ports.
    """
    jm = as_matrix(j)
    m = jm.shape[0]
    if jm.shape != (m, m) or basis.sites != 2 * m:
        raise ShapeError(f"J shape {jm.shape} incompatible with {basis.sites} sites")
    h = np.zeros((basis.dim, basis.dim), dtype=complex)
    for out_port in range(m):
        for in_port in range(m):
            if jm[out_port, in_port] == 0:
                continue
            h += jm[out_port, in_port] * hop_matrix(basis, m + out_port, in_port)
    return h + h.conj().T


# -- truncated direct-sum space and density matrices ---------------------------


@dataclass(frozen=True)
class TruncatedSpace:
    """Direct sum of the sectors ``0 .. n_max`` of ``sites`` qubits."""

    sites: int
    n_max: int
    sectors: tuple[SectorBasis, ...]
    offsets: tuple[int, ...]

    @property
    def dim(self) -> int:
        return self.offsets[-1]


def truncated_space(sites: int, n_max: int) -> TruncatedSpace:
    if n_max < 0 or n_max > sites:
        raise InvalidSectorError(f"need 0 <= n_max <= sites, got {n_max}")
    sectors = tuple(enumerate_sector(sites, n) for n in range(n_max + 1))
    offsets = [0]
    for sec in sectors:
        offsets.append(offsets[-1] + sec.dim)
    return TruncatedSpace(sites=sites, n_max=n_max, sectors=sectors, offsets=tuple(offsets))


def space_number_conserving(space: TruncatedSpace, sector_builder) -> np.ndarray:
    """Assemble a block-diagonal operator from a per-sector dense builder."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for sec, off in zip(space.sectors, space.offsets):
        out[off : off + sec.dim, off : off + sec.dim] = sector_builder(sec)
    return out


def space_lowering(space: TruncatedSpace, site_coeffs) -> np.ndarray:
    """Assemble ``sum_s c_s sigma^-_s`` over the truncated space."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for n in range(1, space.n_max + 1):
        src = space.sectors[n]
        dst = space.sectors[n - 1]
        block = transition_matrix(dst, src, site_coeffs, raising=False)
        r0 = space.offsets[n - 1]
        c0 = space.offsets[n]
        out[r0 : r0 + dst.dim, c0 : c0 + src.dim] = block
    return out


def space_occupation_diagonal(space: TruncatedSpace, sites) -> np.ndarray:
    return np.concatenate([occupation_diagonal(sec, sites) for sec in space.sectors])


def embed_sector_vector(space: TruncatedSpace, state: SectorState) -> np.ndarray:
    n = state.basis.n_excited
    if n > space.n_max or state.basis.sites != space.sites:
        raise InvalidSectorError("state does not fit in the truncated space")
    vec = np.zeros(space.dim, dtype=complex)
    off = space.offsets[n]
    vec[off : off + state.basis.dim] = state.amplitudes
    return vec


class DensityMatrix:
    """Hermitian, unit-trace density matrix over a truncated space."""

    def __init__(self, space: TruncatedSpace, matrix, tol_herm=1e-12, tol_trace=1e-10, tol_psd=1e-8):
        rho = np.asarray(matrix, dtype=complex)
        if rho.shape != (space.dim, space.dim):
            raise ShapeError(f"expected {(space.dim, space.dim)}, got {rho.shape}")
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > tol_herm:
            raise ShapeError(f"density matrix not Hermitian (residual {herm:.2e})")
        tr = complex(np.trace(rho))
        if abs(tr - 1.0) > tol_trace:
            raise ShapeError(f"density matrix trace {tr} != 1")
        evals = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
        if evals.min() < -tol_psd:
            raise ShapeError(f"density matrix has negative eigenvalue {evals.min():.2e}")
        self.space = space
        self.matrix = rho

    @classmethod
    def from_pure(cls, space: TruncatedSpace, state: SectorState) -> "DensityMatrix":
        vec = embed_sector_vector(space, state)
        vec = vec / np.linalg.norm(vec)
        return cls(space, np.outer(vec, vec.conj()))


# -- Schroedinger evolution -----------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_records, dim)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _hermiticity_residual(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - h.conj().T)))


def evolve_schrodinger(
    hamiltonian,
    psi0,
    t_end: float,
    dt: float | None = None,
    record_every: int | None = None,
    adaptive: bool = False,
    herm_tol: float = 1e-10,
    adaptive_tol: float = 1e-9,
) -> Trajectory:
    """Integrate i d|psi>/dt = H(t) |psi> from t=0 to ``t_end``.

    ``hamiltonian`` is a dense matrix or a callable ``t -> matrix``. The
    default integrator is fixed-step RK4 (time-dependent H sampled at the
    stage nodes); ``adaptive=True`` switches to DOP853 at tolerance 1e-9.
    Each sampled H is checked for Hermiticity.
    """
    psi = np.asarray(psi0.amplitudes if isinstance(psi0, SectorState) else psi0, dtype=complex).copy()
    time_dependent = callable(hamiltonian)
    if time_dependent:
        h_fn = hamiltonian
    else:
        h_const = np.asarray(hamiltonian, dtype=complex)
        h_fn = lambda t: h_const  # noqa: E731
    h0 = np.asarray(h_fn(0.0), dtype=complex)
    if _hermiticity_residual(h0) > herm_tol:
        raise InvalidHamiltonianError("H(0) is not Hermitian")
    if t_end <= 0:
        return Trajectory(times=np.array([0.0]), states=psi[None, :].copy())

    if adaptive:
        n_rec = 201
        t_eval = np.linspace(0.0, t_end, n_rec)
        sol = solve_ivp(
            lambda t, y: -1j * (np.asarray(h_fn(t), dtype=complex) @ y),
            (0.0, t_end),
            psi,
            method="DOP853",
            t_eval=t_eval,
            rtol=adaptive_tol,
            atol=adaptive_tol,
        )
        if not sol.success:
            raise InvalidHamiltonianError(f"adaptive integration failed: {sol.message}")
        return Trajectory(times=sol.t, states=sol.y.T.copy())

    if dt is None:
        hnorm = float(np.linalg.norm(h0, 2))
        dt = 0.01 / hnorm if hnorm > 0 else t_end / 100.0
    if dt <= 0:
        raise InvalidHamiltonianError(f"dt must be positive, got {dt}")
    steps = max(1, math.ceil(t_end / dt))
    dt = t_end / steps
    if record_every is None:
        record_every = max(1, steps // 200)
    times = [0.0]
    states = [psi.copy()]
    for k in range(steps):
        t = k * dt
        h1 = np.asarray(h_fn(t), dtype=complex)
        if time_dependent and _hermiticity_residual(h1) > herm_tol:
            raise InvalidHamiltonianError(f"H({t}) is not Hermitian")
        h2 = np.asarray(h_fn(t + dt / 2), dtype=complex)
        h3 = np.asarray(h_fn(t + dt), dtype=complex)
        k1 = -1j * (h1 @ psi)
        k2 = -1j * (h2 @ (psi + 0.5 * dt * k1))
        k3 = -1j * (h2 @ (psi + 0.5 * dt * k2))
        k4 = -1j * (h3 @ (psi + dt * k3))
        psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % record_every == 0 or k == steps - 1:
            times.append((k + 1) * dt)
            states.append(psi.copy())
    return Trajectory(times=np.array(times), states=np.array(states))


# -- Lindblad evolution ---------------------------------------------------------


@dataclass
class LindbladTrajectory:
    times: np.ndarray
    rhos: np.ndarray  # (n_records, dim, dim)

    @property
    def final(self) -> np.ndarray:
        return self.rhos[-1]


def evolve_lindblad(
    lindbladian,
    rho0: DensityMatrix,
    t_end: float,
    dt: float | None = None,
    record_every: int | None = None,
) -> LindbladTrajectory:
    """Fixed-step RK4 integration of a realized Lindblad generator.

    ``lindbladian`` must provide ``realize(space)`` returning an object with
    dense ``h``, a list of ``(weight, jump_matrix)`` pairs, and the summed
    damping operator ``k = sum_r w_r J_r^dag J_r`` (see the effective module).
    """
    gen = lindbladian.realize(rho0.space)
    h = gen.h
    jumps = [(w, j, j.conj().T) for w, j in gen.jumps]
    kk = gen.k
    rho = rho0.matrix.copy()

    def rhs(r):
        out = -1j * (h @ r - r @ h)
        for w, j, jd in jumps:
            out += w * (j @ r @ jd)
        out -= 0.5 * (kk @ r + r @ kk)
        return out

    if dt is None:
        hnorm = float(np.linalg.norm(h, 2))
        scale = max(gen.rate, hnorm)
        dt = 0.01 / scale if scale > 0 else t_end / 100.0
    steps = max(1, math.ceil(t_end / dt))
    dt = t_end / steps
    if record_every is None:
        record_every = max(1, steps // 200)
    times = [0.0]
    rhos = [rho.copy()]
    for k in range(steps):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % record_every == 0 or k == steps - 1:
            times.append((k + 1) * dt)
            rhos.append(rho.copy())
    return LindbladTrajectory(times=np.array(times), rhos=np.array(rhos))


# -- spin sampling --------------------------------------------------------------


@dataclass
class SpinSamplingResult:
    probe_time: float
    coupling_scale: float
    transfer_probability: float
    pattern_probs: dict  # output-port tuple -> probability
    conditional_probs: dict  # renormalized over all-excitations-transferred events


def spin_sampling_run(u, n_excited: int, probe_time: float | None = None) -> SpinSamplingResult:
    """Excite the first N input qubits, evolve under J = Re[U], read out patterns.

    The coupling scale delta is the largest singular value of J; the default
    probe time pi/(2 delta) is the transfer peak of a single pair. Returns
    the probability of each pattern of N excitations sitting entirely on the
    output qubits.
    """
    um = as_matrix(u)
    m = um.shape[0]
    if n_excited > m:
        raise InvalidFillingError(f"cannot place {n_excited} excitations in {m} ports")
    j = um.real.astype(float)
    delta = float(np.linalg.norm(j, 2))
    if probe_time is None:
        probe_time = math.pi / (2.0 * delta)
    basis = enumerate_sector(2 * m, n_excited)
    psi0 = basis_state(basis, range(n_excited))
    h = bipartite_xy_matrix(basis, j)
    traj = evolve_schrodinger(h, psi0, probe_time, adaptive=True)
    amps = traj.final
    in_mask = (1 << m) - 1
    pattern_probs = {}
    for idx in range(basis.dim):
        mask = int(basis.masks[idx])
        if mask & in_mask:
            continue
        pattern = tuple(s - m for s in range(m, 2 * m) if mask >> s & 1)
        pattern_probs[pattern] = float(np.abs(amps[idx]) ** 2)
    transfer = float(sum(pattern_probs.values()))
    conditional = (
        {k: v / transfer for k, v in pattern_probs.items()} if transfer > 0 else dict(pattern_probs)
    )
    return SpinSamplingResult(
        probe_time=probe_time,
        coupling_scale=delta,
        transfer_probability=transfer,
        pattern_probs=pattern_probs,
        conditional_probs=conditional,
    )


def boson_pattern_distribution(u, n_excited: int, t: float) -> dict:
    """Collision-free output distribution of the matching soft-boson dynamics.

    Single-particle modes evolve under exp(-i H1 t) with H1 the bipartite
    hopping matrix of J = Re[U]; the amplitude for the excitations to land
    on a distinct output pattern S is the permanent of the corresponding
    block of the propagator.
    """
    from scipy.linalg import expm

    um = as_matrix(u)
    m = um.shape[0]
    j = um.real.astype(float)
    h1 = np.zeros((2 * m, 2 * m), dtype=complex)
    h1[m:, :m] = j
    h1[:m, m:] = j.conj().T
    v = expm(-1j * h1 * t)
    block = v[m:, :n_excited]  # output rows, initially excited input columns
    probs = {}
    for pattern in combinations(range(m), n_excited):
        amp = permanent(block[list(pattern), :])
        probs[pattern] = float(np.abs(amp) ** 2)
    total = sum(probs.values())
    if total > 0:
        probs = {k: p / total for k, p in probs.items()}
    return probs
