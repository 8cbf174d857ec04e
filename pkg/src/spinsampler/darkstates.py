"""Exact and crowded dark states of the orthogonal-circuit dissipator.

A dark-state quasiparticle on port m is created by
``W^+_m = (sum_n O_mn sigma^+_in,n - sigma^+_out,m) / sqrt(2)``; single
quasiparticles are annihilated by every collective lowering operator, and
products of N of them decay at a rate suppressed by powers of 1/M.

States are stored sparsely: a term is an input-register bitmask plus an
occupation pattern over the N output sites that can ever be excited, packed
into a single int64 key. This keeps Monte Carlo estimates cheap up to
M = 50, N = 5 (behind the ``large`` flag; the default budget is M <= 30).

The decay estimator averages, over Haar orthogonal draws and over the M
collective channels, the squared normalized remainder ``|S^-_i psi|^2 /
|psi|^2`` and reports its square root in units of gamma. The channel mean is
evaluated through the identity
``sum_i S^+_i S^-_i = (N_hat + W_hat + W_hat^dag) / 2`` with
``W_hat = sum_{n,i} O_ni sigma^+_in,i sigma^-_out,n``, which avoids
materializing the lowered state for every channel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .errors import InvalidFillingError, InvalidSpecError, InvalidUnitaryError, SizeLimitError
from .linalg import RngStream

SQRT2 = math.sqrt(2.0)

DEFAULT_MAX_PORTS = 30
LARGE_MAX_PORTS = 50
MAX_QUASIPARTICLES = 5


def _check_budget(m: int, n: int, large: bool) -> None:
    cap = LARGE_MAX_PORTS if large else DEFAULT_MAX_PORTS
    if m > cap:
        raise SizeLimitError(
            f"M = {m} exceeds the budget of {cap} ports"
            + ("" if large else " (pass large=True for up to 50)")
        )
    if n > MAX_QUASIPARTICLES:
        raise SizeLimitError(f"N = {n} exceeds the budget of {MAX_QUASIPARTICLES} quasiparticles")


@dataclass(frozen=True)
class DarkStateSpec:
    """Orthogonal circuit matrix plus the distinct ports carrying quasiparticles."""

    o: np.ndarray
    indices: tuple

    def __post_init__(self):
        om = np.asarray(self.o, dtype=float)
        res = float(np.max(np.abs(om.T @ om - np.eye(om.shape[0]))))
        if res > 1e-8:
            raise InvalidUnitaryError(f"orthogonality residual {res:.3e} too large")
        idx = tuple(int(i) for i in self.indices)
        if len(idx) < 1:
            raise InvalidSpecError("need at least one quasiparticle index")
        if len(set(idx)) != len(idx):
            raise InvalidSpecError(f"repeated quasiparticle indices in {idx}")
        if any(i < 0 or i >= om.shape[0] for i in idx):
            raise InvalidSpecError(f"indices {idx} out of range for {om.shape[0]} ports")
        om = om.copy()
        om.flags.writeable = False
        object.__setattr__(self, "o", om)
        object.__setattr__(self, "indices", idx)

    @property
    def m(self) -> int:
        return self.o.shape[0]

    @property
    def n(self) -> int:
        return len(self.indices)


@dataclass
class SparseState:
    """Sparse amplitudes over (input bitmask, occupied-output pattern) terms.

    ``out_sites`` lists the only output ports that can be excited; a key is
    ``in_mask * 2**len(out_sites) + out_pattern`` with the pattern bit b
    standing for port ``out_sites[b]``. Keys are sorted and unique.
    """

    ports: int
    out_sites: tuple
    keys: np.ndarray
    amps: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @property
    def nnz(self) -> int:
        return len(self.keys)

    def to_sector_state(self, n_excited: int) -> dynamics.SectorState:
        """Expand onto the dense 2M-site sector basis (small systems only)."""
        b = len(self.out_sites)
        basis = dynamics.enumerate_sector(2 * self.ports, n_excited)
        amps = np.zeros(basis.dim, dtype=complex)
        for key, amp in zip(self.keys, self.amps):
            in_mask = int(key) >> b
            pattern = int(key) & ((1 << b) - 1)
            mask = in_mask
            for bit in range(b):
                if pattern >> bit & 1:
                    mask |= 1 << (self.ports + self.out_sites[bit])
            amps[basis.index(mask)] = amp
        return dynamics.SectorState(basis=basis, amplitudes=amps)


def _combine(keys: np.ndarray, amps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(keys) == 0:
        return keys.astype(np.int64), amps.astype(complex)
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    amps = amps[order]
    starts = np.concatenate(([0], np.nonzero(np.diff(keys))[0] + 1))
    ukeys = keys[starts]
    sums = np.add.reduceat(amps, starts)
    keep = sums != 0
    return ukeys[keep], sums[keep]


def dark_state(spec: DarkStateSpec, large: bool = False) -> SparseState:
    """Apply the N quasiparticle creation operators to the vacuum, hard-core truncated.

    The returned amplitudes are unnormalized; the norm is available from
    ``.norm()`` (it is below one once quasiparticles crowd).
    """
    m, n = spec.m, spec.n
    _check_budget(m, n, large)
    b = n
    keys = np.zeros(1, dtype=np.int64)
    amps = np.ones(1, dtype=complex)
    out_pattern_mask = np.int64((1 << b) - 1)
    site_bits = np.int64(1) << np.arange(m, dtype=np.int64)
    for step, port in enumerate(spec.indices):
        in_masks = keys >> b
        patterns = keys & out_pattern_mask
        # input-register raises, all sites at once; already-occupied targets
        # keep their key but contribute zero amplitude
        cand = ((in_masks[None, :] | site_bits[:, None]) << b) | patterns[None, :]
        camps = (spec.o[port][:, None] / SQRT2) * amps[None, :]
        camps[(in_masks[None, :] & site_bits[:, None]) != 0] = 0.0
        lbit = np.int64(1) << step
        out_cand = (in_masks << b) | (patterns | lbit)
        out_amps = np.where((patterns & lbit) == 0, amps * (-1.0 / SQRT2), 0.0)
        keys, amps = _combine(
            np.concatenate((cand.ravel(), out_cand)),
            np.concatenate((camps.ravel(), out_amps)),
        )
    return SparseState(ports=m, out_sites=spec.indices, keys=keys, amps=amps)


def _apply_collective_lowering(state: SparseState, o: np.ndarray, channel: int) -> SparseState:
    """S^-_channel applied to a sparse state (one excitation fewer)."""
    b = len(state.out_sites)
    in_masks = state.keys >> b
    patterns = state.keys & np.int64((1 << b) - 1)
    chunks_k = []
    chunks_a = []
    ibit = np.int64(1) << channel
    sel = (in_masks & ibit) != 0
    chunks_k.append(((in_masks[sel] ^ ibit) << b) | patterns[sel])
    chunks_a.append(state.amps[sel] / SQRT2)
    for bit, port in enumerate(state.out_sites):
        coeff = o[port, channel] / SQRT2
        if coeff == 0.0:
            continue
        lbit = np.int64(1) << bit
        sel = (patterns & lbit) != 0
        chunks_k.append((in_masks[sel] << b) | (patterns[sel] ^ lbit))
        chunks_a.append(state.amps[sel] * coeff)
    keys, amps = _combine(np.concatenate(chunks_k), np.concatenate(chunks_a))
    return SparseState(ports=state.ports, out_sites=state.out_sites, keys=keys, amps=amps)


def decay_norm(spec: DarkStateSpec, channel: int, large: bool = False) -> float:
    """Normalized remainder ``|S^-_channel psi| / |psi|`` of a crowded dark state."""
    if channel < 0 or channel >= spec.m:
        raise InvalidSpecError(f"channel {channel} out of range for {spec.m} ports")
    state = dark_state(spec, large=large)
    lowered = _apply_collective_lowering(state, spec.o, channel)
    return lowered.norm() / state.norm()


def _mean_channel_decay_sq(state: SparseState, o: np.ndarray) -> float:
    """Mean over channels of the squared normalized remainder.

    Uses ``mean_i |S^-_i psi|^2 = (N |psi|^2 + 2 Re <psi|W_hat|psi>) / (2M)``.
    """
    m = state.ports
    n = len(state.out_sites)
    b = n
    keys = state.keys
    amps = state.amps
    norm_sq = float(np.vdot(amps, amps).real)
    acc = 0.0j
    in_bits = np.int64(1) << (np.arange(m, dtype=np.int64) + b)
    for bit, port in enumerate(state.out_sites):
        lbit = np.int64(1) << bit
        sel = np.nonzero((keys & lbit) != 0)[0]
        if len(sel) == 0:
            continue
        base = keys[sel] - lbit
        a_sel = amps[sel]
        # move the quasiparticle's out excitation onto every free input site
        cand = base[None, :] + in_bits[:, None]
        blocked = (base[None, :] & in_bits[:, None]) != 0
        pos = np.searchsorted(keys, cand)
        pos[pos >= len(keys)] = 0
        hit = (keys[pos] == cand) & ~blocked
        weights = (o[port][:, None] * a_sel[None, :])[hit]
        acc += np.vdot(amps[pos[hit]], weights)
    mean_sq = (n * norm_sq + 2.0 * acc.real) / (2.0 * m * norm_sq)
    return float(max(mean_sq, 0.0))


def analytic_rate(m: int, n: int) -> float:
    """Haar-averaged decay rate of an N-quasiparticle state, in units of gamma.

    The single-quasiparticle rate is exactly zero; for N >= 2 the rate is the
    square root of the alternating combinatorial series in 1/M.
    """
    if n < 1 or n > m:
        raise InvalidFillingError(f"need 1 <= N <= M, got N={n}, M={m}")
    if n == 1:
        return 0.0
    total = 0.0
    for k in range(2, n + 1):
        total += (
            (-1.0) ** k
            / 2.0 ** (k + 1)
            * (math.factorial(n) / math.factorial(n - k))
            * math.factorial(k)
            / m**k
        )
    return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class DecayEstimate:
    """Monte Carlo decay-rate estimate alongside the analytic prediction."""

    m: int
    n: int
    samples: int
    mean: float
    stderr: float
    analytic: float


def _sample_generator(rng: RngStream, sample_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=rng.seed, spawn_key=(rng.stream, sample_index))
    return np.random.default_rng(ss)


def _decay_sample(m: int, n: int, rng: RngStream, sample_index: int, channel_agg: str) -> float:
    """One Monte Carlo draw: Haar orthogonal O, random distinct indices, channel-aggregated rate."""
    from .linalg import haar_orthogonal

    gen = _sample_generator(rng, sample_index)
    o = np.asarray(haar_orthogonal(m, gen))
    indices = tuple(sorted(int(i) for i in gen.choice(m, size=n, replace=False)))
    state = dark_state(DarkStateSpec(o=o, indices=indices), large=True)
    value = _mean_channel_decay_sq(state, o)
    if channel_agg == "sum":
        value *= m
    return value


def _decay_sample_star(args) -> float:
    return _decay_sample(*args)


def monte_carlo_decay(
    m: int,
    n: int,
    samples: int,
    rng: RngStream,
    channel_agg: str = "mean",
    large: bool = False,
    workers: int = 1,
) -> DecayEstimate:
    """Estimate the Haar-averaged decay rate of N-quasiparticle states.

    Every sample derives its own generator from ``(rng.seed, rng.stream,
    sample index)``, so the estimate is identical for any worker count.
    ``channel_agg`` selects the per-channel mean (default, matches the
    analytic rate) or the channel sum.
    """
    _check_budget(m, n, large)
    if n < 1 or n > m:
        raise InvalidFillingError(f"need 1 <= N <= M, got N={n}, M={m}")
    if samples < 1:
        raise InvalidSpecError(f"need at least one sample, got {samples}")
    if channel_agg not in ("mean", "sum"):
        raise InvalidSpecError(f"channel_agg must be 'mean' or 'sum', got {channel_agg!r}")
    analytic = analytic_rate(m, n)
    if channel_agg == "sum":
        analytic *= math.sqrt(m)
    if n == 1:
        # single quasiparticles are exactly dark, no sampling noise to report
        return DecayEstimate(m=m, n=n, samples=samples, mean=0.0, stderr=0.0, analytic=analytic)
    args = [(m, n, rng, s, channel_agg) for s in range(samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = np.fromiter(pool.map(_decay_sample_star, args, chunksize=8), dtype=float, count=samples)
    else:
        values = np.fromiter((_decay_sample(*a) for a in args), dtype=float, count=samples)
    mean_sq = float(np.mean(values))
    gamma = math.sqrt(max(mean_sq, 0.0))
    if samples > 1 and gamma > 0:
        se_sq = float(np.std(values, ddof=1)) / math.sqrt(samples)
        stderr = se_sq / (2.0 * gamma)
    else:
        stderr = 0.0
    return DecayEstimate(m=m, n=n, samples=samples, mean=gamma, stderr=stderr, analytic=analytic)


def dark_state_site_coefficients(o, index: int) -> np.ndarray:
    """Site-coefficient vector of W^+_index over the 2M qubits (inputs first)."""
    om = np.asarray(o, dtype=float)
    m = om.shape[0]
    coeffs = np.zeros(2 * m, dtype=complex)
    coeffs[:m] = om[index, :] / SQRT2
    coeffs[m + index] = -1.0 / SQRT2
    return coeffs
