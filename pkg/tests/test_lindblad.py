import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmetro import lindblad
from cavmetro.errors import (
    DegenerateNullSpace,
    NoConvergence,
    StepSizeUnderflow,
    TruncationTooSmall,
    UnstableSystem,
)
from cavmetro.fock import CavityState, FockTruncation, annihilation, fock_state, number, vacuum
from cavmetro.lindblad import (
    GeneratorKind,
    SteadyMethod,
    apply_decay_dissipator,
    apply_generator,
    evolve,
    evolve_path,
    generator_superoperator,
    kernel_vector,
    steady_state,
)
from cavmetro.moments import closed_form_moments

from conftest import make_params, random_density

KINDS = list(GeneratorKind)


def test_decay_dissipator_examples():
    t = FockTruncation(4)
    assert np.all(apply_decay_dissipator(vacuum(t), 2.0) == 0)
    out = apply_decay_dissipator(fock_state(t, 1), 2.0)
    ref = np.zeros((5, 5))
    ref[0, 0], ref[1, 1] = 2.0, -2.0
    assert np.allclose(out, ref, atol=1e-15)


@pytest.mark.parametrize("kind", KINDS)
def test_generators_traceless_and_hermitian(kind, e2):
    rng = np.random.default_rng(3)
    t = FockTruncation(15)
    # the kick map leaks trace from |e, n_max>, so FULL inputs keep the top level empty
    support = t.dim - 1 if kind is GeneratorKind.FULL else None
    for _ in range(25):
        rho = CavityState(random_density(rng, t.dim, support=support), t)
        out = apply_generator(rho, e2, kind)
        assert abs(np.trace(out)) <= 1e-12
        assert np.max(np.abs(out - out.conj().T)) <= 1e-12


def test_zero_lambda_keeps_diagonal():
    p = make_params(lam=0.0)
    assert p.xi == 0
    t = FockTruncation(8)
    rho = CavityState(np.diag(np.linspace(1, 2, 9) / np.linspace(1, 2, 9).sum()), t)
    out = apply_generator(rho, p, GeneratorKind.EFFECTIVE)
    assert np.allclose(out - np.diag(np.diag(out)), 0)


def test_effective_drive_on_vacuum(e1):
    t = FockTruncation(6)
    out = apply_generator(vacuum(t), e1, GeneratorKind.EFFECTIVE)
    da = np.sum(out.T * annihilation(t).entries)
    assert da == pytest.approx(-1j * e1.xi, abs=1e-15)


def test_full_minus_effective_is_third_order():
    t = FockTruncation(10)

    def defect(gt):
        p = make_params(g_tau=gt)
        full = apply_generator(vacuum(t), p, GeneratorKind.FULL)
        eff = apply_generator(vacuum(t), p, GeneratorKind.EFFECTIVE)
        return np.linalg.norm(full - eff)

    for gt in (0.02, 0.01):
        assert defect(gt) / defect(gt / 2) >= 8.0


@pytest.mark.parametrize("kind", KINDS)
def test_superoperator_matches_apply(kind, e2):
    rng = np.random.default_rng(8)
    t = FockTruncation(6)
    rho = random_density(rng, t.dim)
    sup = generator_superoperator(e2, kind, t)
    vec = sup @ rho.ravel(order="F")
    direct = apply_generator(CavityState(rho, t), e2, kind)
    assert np.allclose(vec.reshape(t.dim, t.dim, order="F"), direct, atol=1e-14)


def test_full_generator_reports_boundary_leak(e2):
    t = FockTruncation(5)
    out = apply_generator(fock_state(t, 5), e2, GeneratorKind.FULL)
    assert np.trace(out).real < 0


def test_decay_law():
    t = FockTruncation(5)
    p = make_params()
    out = evolve(fock_state(t, 1), p, GeneratorKind.DECAY, 1.0, reltol=1e-9)
    assert abs(out.expect(number(t)).real - math.exp(-1.0)) <= 1e-8


def test_effective_relaxes_to_closed_form(e1):
    t = FockTruncation(12)
    out = evolve(vacuum(t), e1, GeneratorKind.EFFECTIVE, 60.0)
    assert out.expect(annihilation(t)) == pytest.approx(-0.1j, abs=1e-9)


def test_semigroup(e2):
    t = FockTruncation(14)
    rho0 = vacuum(t)
    both = evolve(rho0, e2, GeneratorKind.FULL, 1.5, reltol=1e-10)
    split = evolve(evolve(rho0, e2, GeneratorKind.FULL, 0.6, reltol=1e-10), e2, GeneratorKind.FULL, 0.9, reltol=1e-10)
    assert np.max(np.abs(both.matrix - split.matrix)) <= 10 * 1e-10


def test_evolution_stays_positive(e2):
    t = FockTruncation(14)
    for s in evolve_path(vacuum(t), e2, GeneratorKind.FULL, np.linspace(0, 5, 6)):
        assert s.min_eigenvalue >= -1e-9


def test_reltol_bounds(e1):
    with pytest.raises(ValueError):
        evolve(vacuum(4), e1, GeneratorKind.DECAY, 1.0, reltol=1e-2)


def test_step_size_underflow_mapped(monkeypatch, e1):
    fake = SimpleNamespace(status=-1, message="Required step size is less than spacing between numbers.")
    monkeypatch.setattr(lindblad, "solve_ivp", lambda *a, **k: fake)
    with pytest.raises(StepSizeUnderflow):
        evolve(vacuum(4), e1, GeneratorKind.DECAY, 1.0)


def test_leakage_detected():
    p = make_params(g_tau=0.3, n_c=50)
    with pytest.raises(TruncationTooSmall):
        evolve(vacuum(FockTruncation(3)), p, GeneratorKind.FULL, 5.0)


@pytest.mark.parametrize(
    "g_tau,lam,n_ref,a_ref",
    [(0.01, 0.0, 5e-4, 0), (0.01, 0.5, 0.0105, -0.1j), (0.03, 0.0, 0.0045, 0), (0.03, 0.5, 0.0945, -0.3j)],
)
def test_steady_effective_examples(g_tau, lam, n_ref, a_ref):
    p = make_params(g_tau=g_tau, lam=lam)
    for method in SteadyMethod:
        rho = steady_state(p, GeneratorKind.EFFECTIVE, method)
        t = rho.trunc
        assert rho.expect(number(t)).real == pytest.approx(n_ref, rel=1e-8)
        assert rho.expect(annihilation(t)) == pytest.approx(a_ref, abs=1e-9)
        if lam == 0:
            assert np.allclose(rho.matrix - np.diag(np.diag(rho.matrix)), 0, atol=1e-12)
            assert rho.expect(number(t)).real == pytest.approx(p.gamma1 / (p.gamma2 - p.gamma1), rel=1e-8)


def test_steady_satisfies_all_closed_forms(e2):
    rho = steady_state(e2)
    t = rho.trunc
    a = annihilation(t).entries
    cf = closed_form_moments(e2)
    assert rho.expect(a) == pytest.approx(cf["a"], rel=1e-8)
    assert rho.expect(a @ a) == pytest.approx(cf["a2"], rel=1e-8)
    assert rho.expect(a.conj().T @ a).real == pytest.approx(cf["n"], rel=1e-8)


@pytest.mark.parametrize("g_tau", [0.01, 0.03])
def test_full_and_effective_steady_agree(g_tau):
    p = make_params(g_tau=g_tau)
    n_eff = closed_form_moments(p)["n"]
    rho = steady_state(p, GeneratorKind.FULL)
    n_full = rho.expect(number(rho.trunc)).real
    assert abs(n_full / n_eff - 1) <= 3 * p.expansion_parameter


def test_degenerate_null_space():
    # two decoupled decaying blocks: two stationary states
    m = np.zeros((4, 4), dtype=complex)
    m[1, 1] = m[3, 3] = -1.0
    with pytest.raises(DegenerateNullSpace):
        kernel_vector(m, 1.0)
    # decay generator alone has a unique kernel
    assert kernel_vector(generator_superoperator(make_params(), GeneratorKind.DECAY, 3), 1.0).shape == (16,)


def test_long_time_no_convergence(e1):
    with pytest.raises(NoConvergence):
        lindblad._steady_longtime(e1, GeneratorKind.EFFECTIVE, FockTruncation(10), max_units=1)


def test_unstable_effective():
    p = make_params(g_tau=0.5, n_c=10, p_e=1.0, lam=0.0)
    assert not p.is_stable
    with pytest.raises(UnstableSystem):
        apply_generator(vacuum(4), p, GeneratorKind.EFFECTIVE)
    with pytest.raises(UnstableSystem):
        steady_state(p)


@settings(max_examples=50, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    g_tau=st.floats(0, 0.05),
    n_c=st.floats(0, 20),
    pe=st.floats(0, 1),
    frac=st.floats(0, 1),
    seed=st.integers(0, 2**32 - 1),
)
def test_generator_invariants_property(kind, g_tau, n_c, pe, frac, seed):
    p = make_params(g_tau=g_tau, n_c=n_c, p_e=pe, lam=frac * math.sqrt(pe * (1 - pe)))
    if kind is GeneratorKind.EFFECTIVE and not p.is_stable:
        return
    t = FockTruncation(8)
    support = t.dim - 1 if kind is GeneratorKind.FULL else None
    rho = CavityState(random_density(np.random.default_rng(seed), t.dim, support=support), t)
    out = apply_generator(rho, p, kind)
    assert abs(np.trace(out)) <= 1e-12
    assert np.max(np.abs(out - out.conj().T)) <= 1e-12
