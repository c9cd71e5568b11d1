"""Single-mode Gaussian description of the steady state.

A Gaussian state is written ``D(z0) U0 rho0 U0^dag D(z0)^dag`` with ``rho0`` a
thermal state of ``Q = coth(beta/2)`` and
``U0 = exp[-(r0/2) e^{i theta0} a^dag^2 + h.c.] exp(-i theta1 a^dag a)``.
Its low moments are

    <a> = z0,  <a^2> = z0^2 - 2 mu^*,  <a^dag a> = t0 - 1/2 + |z0|^2,
    mu = (Q/4) sinh(2 r0) e^{-i theta0},  t0 = (Q/2) cosh(2 r0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import TruncationTooSmall, UnphysicalMoments
from .fock import (
    TRACE_TOL,
    CavityState,
    FockTruncation,
    _as_trunc,
    annihilation,
    displacement,
    thermal_state,
)
from .moments import MomentVector
from .params import SystemParams

PHYS_TOL = 1e-10


@dataclass(frozen=True)
class GaussianSpec:
    z0: complex
    Q: float
    r0: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0

    @property
    def nbar(self) -> float:
        """Thermal occupation of the undisplaced, unsqueezed core."""
        return (self.Q - 1.0) / 2.0


def reconstruct(moments: MomentVector) -> GaussianSpec:
    z0 = complex(moments.a)
    mu = np.conj((z0**2 - complex(moments.a2)) / 2)
    t0 = moments.n + 0.5 - abs(z0) ** 2
    if t0 < 0.5 - PHYS_TOL:
        raise UnphysicalMoments(f"tau0 = {t0} below 1/2")
    ratio = 2 * abs(mu) / t0
    if ratio >= 1:
        raise UnphysicalMoments(f"2|mu| = {2 * abs(mu)} >= tau0 = {t0}")
    x0 = math.atanh(ratio)
    q = 2 * t0 / math.cosh(x0)
    theta0 = float(-np.angle(mu)) if abs(mu) > 0 else 0.0
    if theta0 <= -math.pi:
        theta0 += 2 * math.pi
    if q < 1 - PHYS_TOL:
        raise UnphysicalMoments(f"Q = {q} < 1 violates the uncertainty relation")
    return GaussianSpec(z0=z0, Q=float(max(q, 1.0)), r0=x0 / 2, theta0=theta0)


def steady_q(params: SystemParams) -> float:
    """``Q`` implied by the steady moments: ``(gamma1 + gamma2)/(gamma2 - gamma1)``."""
    return (params.gamma1 + params.gamma2) / (params.gamma2 - params.gamma1)


def alternate_q(params: SystemParams) -> float:
    """Alternative closed form ``[1 + p_e s]/[1 + (1 - 2 p_e) s]``, ``s = N_c (g tau)^2``.

    It disagrees with :func:`steady_q` at first order in ``s``; kept for comparison only.
    """
    s = params.expansion_parameter
    pe = params.atom.p_e
    return (1 + pe * s) / (1 + (1 - 2 * pe) * s)


def build_state(spec: GaussianSpec, trunc, pad: Optional[int] = None) -> CavityState:
    """Density matrix of ``spec`` on ``trunc``.

    The state is assembled on a padded space so the truncated exponentials are
    exact on the retained levels, then cropped.
    """
    trunc = _as_trunc(trunc)
    if spec.Q < 1 - 1e-12:
        raise UnphysicalMoments(f"Q = {spec.Q} < 1")
    if pad is None:
        pad = 20 + int(4 * math.sqrt(abs(spec.z0) ** 2 + spec.nbar + math.sinh(spec.r0) ** 2 + 1))
    big = FockTruncation(trunc.n_max + pad)
    rho = thermal_state(big, max(spec.nbar, 0.0)).matrix
    if spec.r0 != 0 or spec.theta1 != 0:
        a = annihilation(big).entries
        ad = a.conj().T
        zeta = spec.r0 * np.exp(1j * spec.theta0)
        s = scipy.linalg.expm(-0.5 * zeta * (ad @ ad) + 0.5 * np.conj(zeta) * (a @ a))
        rot = np.diag(np.exp(-1j * spec.theta1 * np.arange(big.dim)))
        u = s @ rot
        rho = u @ rho @ u.conj().T
    if spec.z0 != 0:
        d = displacement(big, spec.z0, check=False).entries
        rho = d @ rho @ d.conj().T
    out = rho[: trunc.dim, : trunc.dim]
    lost = 1.0 - np.trace(out).real
    if lost > TRACE_TOL:
        raise TruncationTooSmall(f"state has weight {lost:.3e} above n_max={trunc.n_max}")
    return CavityState(out / np.trace(out).real, trunc)


@dataclass(frozen=True)
class SteadyDecomposition:
    """Steady state as ``(1 - x)|a0><a0| + x D(a0)|1><1|D(a0)^dag``."""

    alpha0: complex
    x: float

    @property
    def weights(self) -> tuple:
        return (1.0 - self.x, self.x)

    @property
    def mean_photon_number(self) -> float:
        return (1 - self.x) * abs(self.alpha0) ** 2 + self.x * (abs(self.alpha0) ** 2 + 1)

    def component_vectors(self, trunc) -> list:
        """``|psi_1> = D(a0)|0>`` and ``|psi_2> = D(a0)|1>`` as Fock vectors."""
        trunc = _as_trunc(trunc)
        pad = 20 + int(4 * math.sqrt(abs(self.alpha0) ** 2 + 2))
        big = FockTruncation(trunc.n_max + pad)
        d = displacement(big, self.alpha0, check=False).entries
        vecs = [d[: trunc.dim, 0].copy(), d[: trunc.dim, 1].copy()]
        for v in vecs:
            if 1 - np.vdot(v, v).real > TRACE_TOL:
                raise TruncationTooSmall(f"n_max={trunc.n_max} too small for alpha0={self.alpha0}")
        return vecs

    def component_states(self, trunc) -> list:
        trunc = _as_trunc(trunc)
        return [CavityState(np.outer(v, v.conj()) / np.vdot(v, v).real, trunc)
                for v in self.component_vectors(trunc)]

    def mixture(self, trunc) -> CavityState:
        trunc = _as_trunc(trunc)
        s1, s2 = self.component_states(trunc)
        p1, p2 = self.weights
        return CavityState(p1 * s1.matrix + p2 * s2.matrix, trunc)


def decompose(params: SystemParams) -> SteadyDecomposition:
    x = params.atom.p_e * params.expansion_parameter
    if x >= 0.5:
        raise ValueError(f"mixing weight x = {x} outside the expansion's validity")
    if x > 0.1:
        warnings.warn(f"mixing weight x = {x:.3g} is not small", RuntimeWarning, stacklevel=2)
    return SteadyDecomposition(alpha0=params.alpha0, x=x)

