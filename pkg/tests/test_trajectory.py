import math

import numpy as np
import pytest

from cavmetro.errors import TruncationTooSmall
from cavmetro.fock import CavityState, FockTruncation, annihilation, fock_state, number, vacuum
from cavmetro.lindblad import GeneratorKind, evolve, evolve_path
from cavmetro.trajectory import (
    RNG_STREAM,
    TrajectoryConfig,
    _Propagators,
    arrival_times,
    ensemble_average,
    simulate_trajectory,
    trajectory_truncation,
)

from conftest import make_params, random_density


def test_no_arrivals_is_pure_decay():
    p = make_params(n_c=0.0)
    t = FockTruncation(4)
    cfg = TrajectoryConfig(p, 3.0, 4, seed=1, sample_times=(0.5, 1.0, 2.0), initial=fock_state(t, 1))
    res = ensemble_average(cfg)
    assert np.allclose(res.mean_n, np.exp(-res.times), rtol=1e-12)
    assert np.all(res.se_n == 0)


def test_zero_coupling_matches_decay_evolution():
    p = make_params(g_tau=0.0)
    t = FockTruncation(12)
    rho0 = CavityState(random_density(np.random.default_rng(2), t.dim, support=4), t)
    cfg = TrajectoryConfig(p, 1.5, 3, seed=0, initial=rho0)
    got = simulate_trajectory(cfg, 0).final_state
    ref = evolve(rho0, p, GeneratorKind.DECAY, 1.5, reltol=1e-11)
    assert np.allclose(got.matrix, ref.matrix, atol=1e-9)


def test_decay_channel_closed_form():
    p = make_params()
    t = FockTruncation(10)
    rho = random_density(np.random.default_rng(4), t.dim, support=7)
    prop = _Propagators(p, t)
    got = prop.decay(rho[None], np.array([0.7]))[0]
    ref = evolve(CavityState(rho, t), p, GeneratorKind.DECAY, 0.7, reltol=1e-12).matrix
    assert np.allclose(got, ref, atol=1e-10)


def test_determinism_and_chunking(e2):
    a = ensemble_average(TrajectoryConfig(e2, 2.0, 300, seed=7, chunk_size=100))
    b = ensemble_average(TrajectoryConfig(e2, 2.0, 300, seed=7, chunk_size=100))
    assert np.array_equal(a.mean_n, b.mean_n) and np.array_equal(a.mean_a, b.mean_a)
    assert np.array_equal(a.final_state.matrix, b.final_state.matrix)
    c = ensemble_average(TrajectoryConfig(e2, 2.0, 300, seed=7, chunk_size=64))
    assert np.allclose(a.mean_n, c.mean_n, rtol=1e-13)
    assert a.metadata["rng_stream"] == RNG_STREAM


def test_distinct_streams(e2):
    cfg = TrajectoryConfig(e2, 5.0, 2, seed=3)
    x, y = arrival_times(cfg, 0), arrival_times(cfg, 1)
    assert len(x) > 10 and not np.array_equal(x[: min(len(x), len(y))], y[: min(len(x), len(y))])
    assert np.array_equal(arrival_times(cfg, 0), x)
    other = TrajectoryConfig(e2, 5.0, 2, seed=4)
    assert not np.array_equal(arrival_times(other, 0)[:5], x[:5])


def test_trajectory_matches_batched(e2):
    cfg = TrajectoryConfig(e2, 2.0, 20, seed=9, sample_times=(1.0,))
    single = simulate_trajectory(cfg, 13)
    res = ensemble_average(cfg)
    # per-trajectory results must not depend on which batch they ran in
    solo = [simulate_trajectory(cfg, i).n for i in range(20)]
    assert np.allclose(np.mean(solo, axis=0), res.mean_n, rtol=1e-13)
    assert single.final_state.min_eigenvalue >= -1e-10


def test_states_stay_valid(e2):
    cfg = TrajectoryConfig(e2, 10.0, 20, seed=5)
    for i in range(20):
        s = simulate_trajectory(cfg, i).final_state
        assert s.min_eigenvalue >= -1e-10
        assert abs(np.trace(s.matrix) - 1) <= 1e-12


def test_standard_error_scaling(e2):
    ratios = []
    for seed in range(4):
        small = ensemble_average(TrajectoryConfig(e2, 2.0, 400, seed=seed))
        large = ensemble_average(TrajectoryConfig(e2, 2.0, 800, seed=100 + seed))
        ratios.append(small.se_n[-1] / large.se_n[-1])
    assert abs(np.mean(ratios) / math.sqrt(2) - 1) <= 0.2


def test_no_coherence_no_amplitude():
    p = make_params(g_tau=0.03, lam=0.0)
    res = ensemble_average(TrajectoryConfig(p, 5.0, 200, seed=0))
    se = math.hypot(res.se_a_re[-1], res.se_a_im[-1])
    assert abs(res.mean_a[-1]) <= 3 * se + 1e-15


def test_agrees_with_full_master_equation(e2):
    assert e2.r * e2.tau <= 0.01
    times = (2.0, 10.0)
    res = ensemble_average(TrajectoryConfig(e2, 10.0, 2000, seed=11, sample_times=times))
    trunc = trajectory_truncation(e2)
    ref = evolve_path(vacuum(trunc), e2, GeneratorKind.FULL, list(times), reltol=1e-10)
    for k, s in enumerate(ref):
        n_ref = s.expect(number(trunc)).real
        a_ref = s.expect(annihilation(trunc))
        assert abs(res.mean_n[k] - n_ref) <= 3 * res.se_n[k]
        assert abs(res.mean_a[k] - a_ref) <= 3 * math.hypot(res.se_a_re[k], res.se_a_im[k])


def test_truncation_overflow_detected():
    p = make_params(g_tau=0.3, n_c=30)
    with pytest.raises(TruncationTooSmall):
        ensemble_average(TrajectoryConfig(p, 5.0, 4, seed=0, trunc=FockTruncation(3)))


def test_config_validation(e1):
    with pytest.raises(ValueError):
        TrajectoryConfig(e1, 1.0, 0, seed=0)
    with pytest.raises(ValueError):
        TrajectoryConfig(e1, 1.0, 2, seed=0, sample_times=(2.0,))
    with pytest.raises(ValueError):
        ensemble_average(TrajectoryConfig(e1, 1.0, 1, seed=0))
    cfg = TrajectoryConfig(e1, 1.0, 2, seed=0, sample_times=(0.5,))
    assert cfg.sample_times == (0.5, 1.0)
