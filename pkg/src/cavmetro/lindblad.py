"""Cavity master equations: generators, time evolution and steady states.

Three generators are available:

* ``FULL``: coarse-grained repeated interactions, ``r (M - 1) rho + L rho``,
  with ``M`` the exact single-atom kick map.
* ``EFFECTIVE``: the second-order reduction, a coherent drive
  ``xi a^dag + xi^* a`` plus gain ``gamma1`` and loss ``gamma2``.
* ``DECAY``: zero-temperature cavity damping alone.
"""

from __future__ import annotations

import enum
import logging
import math
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse.linalg
from scipy.integrate import solve_ivp

from .atom import apply_kraus, kraus_operators
from .errors import (
    DegenerateNullSpace,
    NoConvergence,
    StepSizeUnderflow,
    TruncationTooSmall,
    UnstableSystem,
)
from .fock import (
    LEAKAGE_TOL,
    CavityState,
    FockTruncation,
    _as_trunc,
    annihilation,
    number,
    vacuum,
)
from .params import SystemParams

logger = logging.getLogger(__name__)

__all__ = [
    "GeneratorKind",
    "SteadyMethod",
    "SystemParams",
    "apply_decay_dissipator",
    "apply_generator",
    "auto_truncation",
    "evolve",
    "evolve_path",
    "generator_superoperator",
    "steady_state",
]


class GeneratorKind(enum.Enum):
    FULL = "full"
    EFFECTIVE = "effective"
    DECAY = "decay"


class SteadyMethod(enum.Enum):
    LONG_TIME = "longtime"
    NULL_SPACE = "nullspace"


def _dissipate(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``op rho op^dag - {op^dag op, rho}/2``."""
    od = op.conj().T
    odo = od @ op
    return op @ rho @ od - 0.5 * (odo @ rho + rho @ odo)


def _raw(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, CavityState) else np.asarray(rho, dtype=complex)


def apply_decay_dissipator(rho, kappa: float) -> np.ndarray:
    m = _raw(rho)
    a = annihilation(m.shape[0] - 1).entries
    return kappa * _dissipate(a, m)


def _check_kind(params: SystemParams, kind: GeneratorKind) -> None:
    if kind is GeneratorKind.EFFECTIVE and not params.is_stable:
        raise UnstableSystem(
            f"gamma2={params.gamma2} <= gamma1={params.gamma1}: no steady state"
        )


def make_rhs(
    params: SystemParams, kind: GeneratorKind, trunc
) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``rho -> d rho / dt`` on raw matrices for repeated use."""
    trunc = _as_trunc(trunc)
    a = annihilation(trunc).entries
    ad = a.conj().T
    kappa = params.kappa
    if kind is GeneratorKind.DECAY:
        return lambda rho: kappa * _dissipate(a, rho)
    if kind is GeneratorKind.EFFECTIVE:
        h = params.xi * ad + np.conj(params.xi) * a
        g1, g2 = params.gamma1, params.gamma2

        def rhs(rho):
            return (
                1j * (rho @ h - h @ rho)
                + g1 * _dissipate(ad, rho)
                + g2 * _dissipate(a, rho)
            )

        return rhs
    ops = kraus_operators(params.atom, params.g_tau, trunc)
    r = params.r

    def rhs(rho):
        return r * (apply_kraus(ops, rho) - rho) + kappa * _dissipate(a, rho)

    return rhs


def apply_generator(rho, params: SystemParams, kind: GeneratorKind) -> np.ndarray:
    m = _raw(rho)
    _check_kind(params, kind)
    return make_rhs(params, kind, m.shape[0] - 1)(m)


def _dissipator_super(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    eye = np.eye(d)
    odo = op.conj().T @ op
    return np.kron(op.conj(), op) - 0.5 * np.kron(eye, odo) - 0.5 * np.kron(odo.T, eye)


def generator_superoperator(
    params: SystemParams, kind: GeneratorKind, trunc
) -> np.ndarray:
    """Generator as a ``dim^2 x dim^2`` matrix acting on column-stacked ``rho``."""
    trunc = _as_trunc(trunc)
    _check_kind(params, kind)
    d = trunc.dim
    eye = np.eye(d)
    a = annihilation(trunc).entries
    ad = a.conj().T
    sup = params.kappa * _dissipator_super(a)
    if kind is GeneratorKind.EFFECTIVE:
        h = params.xi * ad + np.conj(params.xi) * a
        sup = (
            1j * (np.kron(h.T, eye) - np.kron(eye, h))
            + params.gamma1 * _dissipator_super(ad)
            + params.gamma2 * _dissipator_super(a)
        )
    elif kind is GeneratorKind.FULL:
        kick = sum(np.kron(k.conj(), k) for k in kraus_operators(params.atom, params.g_tau, trunc))
        sup = sup + params.r * (kick - np.eye(d * d))
    return sup


def _check_leakage(states: Sequence[CavityState], tol: float = LEAKAGE_TOL) -> None:
    worst = max(s.leakage for s in states)
    if worst > tol:
        raise TruncationTooSmall(
            f"population {worst:.3e} on level n_max={states[0].trunc.n_max} exceeds {tol:g}"
        )


def evolve_path(
    rho0: CavityState,
    params: SystemParams,
    kind: GeneratorKind,
    times: Sequence[float],
    reltol: float = 1e-9,
    abstol: float = 1e-12,
    leakage_tol: float = LEAKAGE_TOL,
) -> list[CavityState]:
    """Integrate from ``t = 0`` and return the state at each of ``times``."""
    if not 1e-12 <= reltol <= 1e-3:
        raise ValueError(f"reltol={reltol} outside [1e-12, 1e-3]")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be a non-empty, non-decreasing list of t >= 0")
    _check_kind(params, kind)
    d = rho0.trunc.dim
    rhs = make_rhs(params, kind, rho0.trunc)

    def f(_t, y):
        return rhs(y.reshape(d, d)).ravel()

    t_end = float(times[-1])
    if t_end == 0.0:
        return [rho0 for _ in times]
    sol = solve_ivp(
        f,
        (0.0, t_end),
        rho0.matrix.ravel().copy(),
        method="DOP853",
        t_eval=times,
        rtol=reltol,
        atol=abstol,
    )
    if sol.status != 0:
        if "step size" in sol.message.lower():
            raise StepSizeUnderflow(sol.message)
        raise NoConvergence(sol.message)
    states = []
    for y in sol.y.T:
        m = y.reshape(d, d)
        m = 0.5 * (m + m.conj().T)
        drift = abs(np.trace(m).real - 1.0)
        if drift > 1e-9:
            raise TruncationTooSmall(f"trace drifted by {drift:.3e} during evolution")
        m = m / np.trace(m).real
        states.append(CavityState(m, rho0.trunc))
    _check_leakage(states, leakage_tol)
    return states


def evolve(
    rho0: CavityState,
    params: SystemParams,
    kind: GeneratorKind,
    t_final: float,
    reltol: float = 1e-9,
) -> CavityState:
    return evolve_path(rho0, params, kind, [t_final], reltol=reltol)[-1]


def auto_truncation(params: SystemParams) -> FockTruncation:
    """Initial truncation guess from the displaced-thermal support bound."""
    n0 = abs(params.alpha0) ** 2
    return FockTruncation(int(math.ceil(n0 + 10.0 * math.sqrt(n0 + 1.0) + 10.0)))


def _relaxation_unit(params: SystemParams, kind: GeneratorKind) -> float:
    if kind is GeneratorKind.DECAY or not params.is_stable:
        return 1.0 / params.kappa
    return 1.0 / (params.gamma2 - params.gamma1)


def kernel_vector(sup: np.ndarray, scale: float, zero_tol: float = 1e-9) -> np.ndarray:
    """Unique null vector of ``sup`` found by shift-invert eigen-decomposition.

    ``scale`` is a typical relaxation rate; eigenvalues with modulus below
    ``zero_tol * scale`` count as zero.
    """
    n = sup.shape[0]
    sigma = -1e-3 * scale
    v0 = np.ones(n, dtype=complex)
    if n <= 64:
        w, v = np.linalg.eig(sup)
    else:
        w, v = scipy.sparse.linalg.eigs(sup, k=2, sigma=sigma, which="LM", v0=v0, tol=0)
    order = np.argsort(np.abs(w))
    w, v = w[order], v[:, order]
    zeros = int(np.sum(np.abs(w[:2]) <= zero_tol * scale))
    if zeros != 1:
        raise DegenerateNullSpace(
            f"found {zeros} zero eigenvalues (smallest moduli {np.abs(w[:2])})"
        )
    return v[:, 0]


def _state_from_vec(vec: np.ndarray, trunc: FockTruncation) -> CavityState:
    d = trunc.dim
    m = vec.reshape(d, d, order="F")
    m = m / np.trace(m)
    m = 0.5 * (m + m.conj().T)
    return CavityState(m / np.trace(m).real, trunc)


def _steady_nullspace(params, kind, trunc) -> CavityState:
    sup = generator_superoperator(params, kind, trunc)
    rate = 1.0 / _relaxation_unit(params, kind)
    return _state_from_vec(kernel_vector(sup, rate), trunc)


def _steady_longtime(params, kind, trunc, tol=1e-11, max_units=20000, reltol=1e-10):
    unit = _relaxation_unit(params, kind)
    rho = vacuum(trunc)
    chunk = 20
    done = 0
    while done < max_units:
        path = evolve_path(
            rho, params, kind, unit * np.arange(chunk + 1), reltol=reltol, abstol=1e-14
        )
        for prev, cur in zip(path, path[1:]):
            change = np.sum(np.abs(np.linalg.eigvalsh(cur.matrix - prev.matrix)))
            if change < tol:
                return cur
        rho = path[-1]
        done += chunk
    raise NoConvergence(f"no convergence after {max_units} relaxation units")


def steady_state(
    params: SystemParams,
    kind: GeneratorKind = GeneratorKind.EFFECTIVE,
    method: Union[SteadyMethod, str] = SteadyMethod.NULL_SPACE,
    trunc: Optional[Union[FockTruncation, int]] = None,
    max_n_max: int = 400,
) -> CavityState:
    """Stationary state of the chosen generator.

    With ``trunc=None`` the truncation starts from :func:`auto_truncation` and
    is doubled until the mean photon number changes by less than ``1e-8``
    relative between successive truncations.
    """
    method = SteadyMethod(method)
    _check_kind(params, kind)
    solve = _steady_nullspace if method is SteadyMethod.NULL_SPACE else _steady_longtime
    if trunc is not None:
        rho = solve(params, kind, _as_trunc(trunc))
        _check_leakage([rho])
        return rho
    t = auto_truncation(params)
    rho = solve(params, kind, t)
    n_prev = rho.expect(number(t)).real
    while True:
        if 2 * t.n_max > max_n_max:
            raise TruncationTooSmall(f"truncation did not converge below n_max={max_n_max}")
        t = FockTruncation(2 * t.n_max)
        rho = solve(params, kind, t)
        n_cur = rho.expect(number(t)).real
        if abs(n_cur - n_prev) <= 1e-8 * max(abs(n_cur), 1e-300) or n_cur == n_prev:
            logger.debug("steady state converged at n_max=%d", t.n_max)
            _check_leakage([rho])
            return rho
        n_prev = n_cur
