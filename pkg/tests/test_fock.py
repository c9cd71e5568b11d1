import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmetro.errors import DimensionMismatch, InvalidState, TruncationTooSmall
from cavmetro.fock import (
    CavityState,
    FockTruncation,
    annihilation,
    coherent_state,
    creation,
    displacement,
    expectation,
    fidelity,
    fock_state,
    identity,
    number,
    thermal_state,
    trace_distance,
    vacuum,
)


def test_ladder_small():
    t = FockTruncation(2)
    a = annihilation(t).entries
    one = fock_state(t, 1).matrix[:, 1]
    zero = fock_state(t, 0).matrix[:, 0]
    assert np.allclose(a @ one, zero)
    assert np.allclose(a @ zero, 0)


def test_commutator_interior_levels():
    t = FockTruncation(12)
    a = annihilation(t)
    comm = (a @ creation(t) - creation(t) @ a).entries
    assert np.allclose(np.diag(comm)[:-1], 1.0, atol=1e-14)
    # the top level is where truncation breaks the algebra
    assert np.diag(comm)[-1].real == pytest.approx(-12)


def test_number_diagonal():
    t = FockTruncation(7)
    assert np.allclose(np.diag(number(t).entries), np.arange(8))


def test_displacement_zero_is_identity():
    t = FockTruncation(10)
    assert np.allclose(displacement(t, 0).entries, identity(t).entries)


def test_displacement_unitarity():
    t = FockTruncation(30)
    prod = displacement(t, 0.3).entries @ displacement(t, -0.3).entries
    assert np.linalg.norm(prod - np.eye(31)) <= 1e-8
    dag = displacement(t, 0.3).dag().entries
    assert np.linalg.norm(dag - displacement(t, -0.3).entries) <= 1e-8


def test_displaced_vacuum_amplitudes():
    t = FockTruncation(20)
    alpha = -0.1j
    psi = displacement(t, alpha).entries[:, 0]
    ref = np.array([np.exp(-abs(alpha) ** 2 / 2) * alpha**n / math.sqrt(math.factorial(n)) for n in range(21)])
    assert np.allclose(psi, ref, atol=1e-14)
    st_ = CavityState(np.outer(psi, psi.conj()), t)
    assert expectation(st_, number(t)).real == pytest.approx(0.01, rel=1e-12)


def test_displacement_guidance_enforced():
    with pytest.raises(TruncationTooSmall):
        displacement(FockTruncation(5), 2.0)


def test_thermal_state():
    t = FockTruncation(10)
    assert np.allclose(thermal_state(t, 0).matrix, vacuum(t).matrix)
    p = thermal_state(t, 5e-4).populations()
    assert p[1] / p[0] == pytest.approx(5e-4 / (1 + 5e-4), rel=1e-12)
    t40 = FockTruncation(40)
    assert abs(expectation(thermal_state(t40, 0.5), number(t40)) - 0.5) <= 1e-9


def test_expectation_examples():
    t = FockTruncation(20)
    assert expectation(vacuum(t), number(t)) == 0
    assert expectation(coherent_state(t, -0.1j), annihilation(t)) == pytest.approx(-0.1j, abs=1e-14)


def test_expectation_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        expectation(vacuum(3), number(4))


def test_fidelity_examples():
    t = FockTruncation(30)
    rho = thermal_state(t, 0.3)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-12)
    assert fidelity(vacuum(t), fock_state(t, 1)) == pytest.approx(0.0, abs=1e-14)
    f = fidelity(vacuum(t), coherent_state(t, 0.3))
    assert f == pytest.approx(math.exp(-0.09), rel=1e-10)
    assert f == pytest.approx(0.9139, abs=5e-5)


def test_state_validation():
    t = FockTruncation(2)
    with pytest.raises(InvalidState):
        CavityState(np.diag([0.5, 0.3, 0.1]), t)
    bad = np.array([[0.5, 1j, 0], [0, 0.5, 0], [0, 0, 0]])
    with pytest.raises(InvalidState):
        CavityState(bad, t)


def test_positivity_report_and_clip():
    t = FockTruncation(1)
    m = np.diag([1.0 + 1e-6, -1e-6])
    with pytest.warns(RuntimeWarning):
        s = CavityState(m, t)
    assert s.min_eigenvalue < 0
    c = CavityState(m, t, positivity="clip")
    assert c.min_eigenvalue >= 0
    assert np.trace(c.matrix).real == pytest.approx(1.0, abs=1e-15)


def test_leakage_reported():
    t = FockTruncation(3)
    assert fock_state(t, 3).leakage == pytest.approx(1.0)
    assert vacuum(t).leakage == 0


@settings(max_examples=40, deadline=None)
@given(
    a=st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False),
    b=st.complex_numbers(max_magnitude=0.8, allow_nan=False, allow_infinity=False),
    nbar=st.floats(0.0, 0.5),
    u=st.complex_numbers(max_magnitude=0.5, allow_nan=False, allow_infinity=False),
)
def test_fidelity_symmetric_and_unitarily_invariant(a, b, nbar, u):
    t = FockTruncation(40)
    rho = coherent_state(t, a)
    d = displacement(FockTruncation(40), b, check=False).entries
    th = thermal_state(t, nbar).matrix
    sigma = CavityState(d @ th @ d.conj().T, t)
    f1 = fidelity(rho, sigma)
    assert f1 == pytest.approx(fidelity(sigma, rho), abs=1e-8)
    # common conjugation by a displacement small enough to stay inside the truncation
    du = displacement(t, u, check=False).entries
    rho_u = CavityState(du @ rho.matrix @ du.conj().T, t, positivity="clip")
    sig_u = CavityState(du @ sigma.matrix @ du.conj().T, t, positivity="clip")
    assert fidelity(rho_u, sig_u) == pytest.approx(f1, abs=1e-6)
    assert 0 <= trace_distance(rho, sigma) <= 1 + 1e-12
