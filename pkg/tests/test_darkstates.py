import math

import numpy as np
import pytest

from spinsampler import darkstates as ds
from spinsampler import dynamics
from spinsampler.errors import InvalidFillingError, InvalidSpecError, SizeLimitError
from spinsampler.linalg import RngStream, haar_orthogonal


def test_single_quasiparticle_norm_is_one():
    o = np.asarray(haar_orthogonal(7, RngStream(1)))
    for j in range(7):
        state = ds.dark_state(ds.DarkStateSpec(o=o, indices=(j,)))
        assert state.norm() == pytest.approx(1.0, abs=1e-12)


def test_identity_circuit_disjoint_pairs():
    spec = ds.DarkStateSpec(o=np.eye(6), indices=(0, 1))
    state = ds.dark_state(spec)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)


def test_exact_darkness_single_quasiparticle():
    o = np.asarray(haar_orthogonal(10, RngStream(2)))
    worst = 0.0
    for j in range(10):
        spec = ds.DarkStateSpec(o=o, indices=(j,))
        for i in range(10):
            worst = max(worst, ds.decay_norm(spec, i))
    assert worst <= 1e-12


def test_identity_circuit_crowded_states_stay_dark():
    for indices in [(0, 1), (0, 2, 4), (1, 2, 3, 4)]:
        spec = ds.DarkStateSpec(o=np.eye(5), indices=indices)
        assert max(ds.decay_norm(spec, i) for i in range(5)) <= 1e-12


def test_sparse_state_against_dense_oracle():
    # full 2^(2M) vector construction at M=6, N=3
    m = 6
    o = np.asarray(haar_orthogonal(m, RngStream(4)))
    spec = ds.DarkStateSpec(o=o, indices=(0, 2, 5))
    sector = ds.dark_state(spec).to_sector_state(3)

    dim = 1 << (2 * m)
    vec = np.zeros(dim, dtype=complex)
    vec[0] = 1.0
    idx = np.arange(dim)

    def raise_site(v, site, coeff):
        out = np.zeros_like(v)
        free = (idx >> site) & 1 == 0
        out[idx[free] | (1 << site)] += coeff * v[free]
        return out

    for j in spec.indices:
        new = np.zeros_like(vec)
        for site in range(m):
            new += raise_site(vec, site, o[j, site] / math.sqrt(2))
        new += raise_site(vec, m + j, -1 / math.sqrt(2))
        vec = new
    for i, mask in enumerate(sector.basis.masks):
        assert abs(sector.amplitudes[i] - vec[int(mask)]) <= 1e-14


def test_decay_norm_leading_order_consistency():
    # N=2: leading term of the commutator expansion, relative deviation <= 0.2
    m = 10
    o = np.asarray(haar_orthogonal(m, RngStream(9)))
    spec = ds.DarkStateSpec(o=o, indices=(2, 7))
    for i in range(m):
        lead = math.sqrt(o[2, i] ** 2 * o[7, i] ** 2 / 2)
        if lead < 1e-6:
            continue
        got = ds.decay_norm(spec, i)
        assert abs(got - lead) / lead <= 0.2


def test_channel_mean_identity_matches_direct_application():
    o = np.asarray(haar_orthogonal(8, RngStream(11)))
    spec = ds.DarkStateSpec(o=o, indices=(1, 4, 6))
    state = ds.dark_state(spec)
    direct = np.mean([ds.decay_norm(spec, i) ** 2 for i in range(8)])
    fast = ds._mean_channel_decay_sq(state, o)
    assert abs(direct - fast) <= 1e-14


def test_analytic_rate_values():
    assert ds.analytic_rate(10, 1) == 0.0
    assert ds.analytic_rate(10, 2) == pytest.approx(1 / (math.sqrt(2) * 10), abs=1e-15)
    assert ds.analytic_rate(10, 3) == pytest.approx(math.sqrt(0.015 - 0.00225), abs=1e-15)


def test_analytic_rate_closed_form_n2():
    for m in range(2, 101):
        assert abs(ds.analytic_rate(m, 2) - 1 / (math.sqrt(2) * m)) <= 1e-14


def test_analytic_rate_invalid_filling():
    with pytest.raises(InvalidFillingError):
        ds.analytic_rate(3, 4)


def test_spec_validation():
    o = np.eye(4)
    with pytest.raises(InvalidSpecError):
        ds.DarkStateSpec(o=o, indices=(1, 1))
    with pytest.raises(InvalidSpecError):
        ds.DarkStateSpec(o=o, indices=(5,))
    with pytest.raises(InvalidSpecError):
        ds.DarkStateSpec(o=o, indices=())


def test_budget_limits():
    with pytest.raises(SizeLimitError):
        ds.monte_carlo_decay(35, 2, 4, RngStream(0))
    with pytest.raises(SizeLimitError):
        ds.monte_carlo_decay(10, 6, 4, RngStream(0))
    # the large flag unlocks M up to 50
    est = ds.monte_carlo_decay(35, 2, 2, RngStream(0), large=True)
    assert est.samples == 2


def test_monte_carlo_single_quasiparticle_is_exact_zero():
    est = ds.monte_carlo_decay(12, 1, 50, RngStream(3))
    assert est.mean == 0.0 and est.stderr == 0.0 and est.analytic == 0.0


def test_monte_carlo_matches_analytic_n2():
    est = ds.monte_carlo_decay(10, 2, 500, RngStream(42))
    tol = max(3 * est.stderr, 0.2 * est.analytic)
    assert abs(est.mean - est.analytic) <= tol


def test_monte_carlo_decreases_with_m():
    means = [ds.monte_carlo_decay(m, 3, 200, RngStream(5, m)).mean for m in (10, 20, 30)]
    assert means[0] > means[1] > means[2]


def test_stderr_scaling_with_samples():
    a = ds.monte_carlo_decay(10, 2, 150, RngStream(8))
    b = ds.monte_carlo_decay(10, 2, 600, RngStream(8))
    # quadrupling the samples should roughly halve the standard error
    assert b.stderr < a.stderr * 0.75


def test_channel_sum_aggregation():
    mean_est = ds.monte_carlo_decay(10, 2, 50, RngStream(13), channel_agg="mean")
    sum_est = ds.monte_carlo_decay(10, 2, 50, RngStream(13), channel_agg="sum")
    assert sum_est.mean == pytest.approx(mean_est.mean * math.sqrt(10), rel=1e-12)
    assert sum_est.analytic == pytest.approx(mean_est.analytic * math.sqrt(10), rel=1e-12)


def test_worker_count_does_not_change_results():
    serial = ds.monte_carlo_decay(10, 2, 24, RngStream(21), workers=1)
    parallel = ds.monte_carlo_decay(10, 2, 24, RngStream(21), workers=4)
    assert serial.mean == parallel.mean
    assert serial.stderr == parallel.stderr


def test_estimator_scale_matches_short_time_lindblad_decay():
    # survival derivative of a pure crowded state under the full generator
    # equals -2 gamma M times the channel-mean squared remainder (collective
    # scale 2 gamma), tying the reported rates to the master equation
    from spinsampler import effective

    m, n = 3, 2
    gamma = 1.3
    o = np.asarray(haar_orthogonal(m, RngStream(71)))
    spec = ds.DarkStateSpec(o=o, indices=(0, 2))
    sparse = ds.dark_state(spec)
    mean_sq = ds._mean_channel_decay_sq(sparse, o)

    sector = sparse.to_sector_state(n)
    sector.amplitudes /= sector.norm()
    space = dynamics.truncated_space(2 * m, n)
    vec = dynamics.embed_sector_vector(space, sector)
    gen = effective.build_lindbladian(o, gamma=gamma).realize(space)
    pdot = float(np.vdot(vec, gen.rhs(np.outer(vec, vec.conj())) @ vec).real)
    assert abs(pdot + 2 * gamma * m * mean_sq) <= 1e-12


def test_full_lindblad_stationarity_of_quasiparticle():
    # cross-module check: a W+ projector does not move under the full generator
    from spinsampler import effective

    m = 4
    o = np.asarray(haar_orthogonal(m, RngStream(31)))
    lind = effective.build_lindbladian(o, gamma=1.0)
    space = dynamics.truncated_space(2 * m, 1)
    coeffs = ds.dark_state_site_coefficients(o, 2)
    vec = dynamics.transition_matrix(space.sectors[1], space.sectors[0], coeffs, raising=True)[:, 0]
    rho0 = dynamics.DensityMatrix.from_pure(
        space, dynamics.SectorState(basis=space.sectors[1], amplitudes=vec)
    )
    traj = dynamics.evolve_lindblad(lind, rho0, t_end=10.0)
    assert np.max(np.abs(np.diag(traj.final) - np.diag(rho0.matrix))) <= 1e-8
