"""Injected two-level atom, the resonant Jaynes-Cummings kick and the
single-atom map it induces on the cavity.

Joint operators act on ``atom (x) cavity`` with the atom basis ordered
``(|e>, |g>)``, so index ``i * dim + n`` is atom level ``i`` with ``n`` photons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidAtomState, TruncationTooSmall
from .fock import CavityState, FockTruncation, TRACE_TOL, _as_trunc

PROB_TOL = 1e-12


@dataclass(frozen=True)
class AtomParams:
    p_e: float
    p_g: float
    lam: complex = 0.0

    def __post_init__(self):
        if not (-PROB_TOL <= self.p_e <= 1 + PROB_TOL):
            raise InvalidAtomState(f"p_e={self.p_e} is not a probability")
        if abs(self.p_e + self.p_g - 1.0) > PROB_TOL:
            raise InvalidAtomState(f"p_e + p_g = {self.p_e + self.p_g} != 1")
        if abs(self.lam) ** 2 > self.p_e * self.p_g + PROB_TOL:
            raise InvalidAtomState(
                f"|lambda|^2 = {abs(self.lam) ** 2} exceeds p_e p_g = {self.p_e * self.p_g}"
            )

    @classmethod
    def from_excited(cls, p_e: float, lam: complex = 0.0) -> AtomParams:
        return cls(p_e=p_e, p_g=1.0 - p_e, lam=lam)


def atom_density(params: AtomParams) -> np.ndarray:
    return np.array(
        [[params.p_e, params.lam], [np.conj(params.lam), params.p_g]], dtype=complex
    )


@dataclass(frozen=True, eq=False)
class JointOperator:
    entries: np.ndarray
    trunc: FockTruncation


def jc_unitary(trunc, g_tau: float) -> JointOperator:
    """Resonant Jaynes-Cummings propagator for a dimensionless pulse area ``g_tau``.

    The pair ``|e,n>`` / ``|g,n+1>`` rotates by ``g_tau sqrt(n+1)``.  For the top
    level ``|e,n_max>`` the partner lies outside the truncation, so only the
    cosine is kept; the missing norm is the boundary leakage.
    """
    trunc = _as_trunc(trunc)
    d = trunc.dim
    n = np.arange(d)
    u = np.zeros((2 * d, 2 * d), dtype=complex)
    u[n, n] = np.cos(g_tau * np.sqrt(n + 1))
    u[d + n, d + n] = np.cos(g_tau * np.sqrt(n))
    m = n[:-1]
    s = -1j * np.sin(g_tau * np.sqrt(m + 1))
    u[m, d + m + 1] = s
    u[d + m + 1, m] = s
    return JointOperator(u, trunc)


def kraus_operators(atom: AtomParams, g_tau: float, trunc) -> list[np.ndarray]:
    """Kraus operators of ``rho -> Tr_a[U (rho (x) rho_a) U^dag]``.

    With ``rho_a = sum_k w_k |phi_k><phi_k|`` they are
    ``sqrt(w_k) <j| U |phi_k>`` for atom outcomes ``j``.
    """
    trunc = _as_trunc(trunc)
    d = trunc.dim
    u = jc_unitary(trunc, g_tau).entries.reshape(2, d, 2, d)
    w, v = np.linalg.eigh(atom_density(atom))
    ops = []
    for wk, phi in zip(w, v.T):
        if wk <= 1e-15:
            continue
        block = np.einsum("jnim,i->jnm", u, phi)
        for j in range(2):
            ops.append(np.sqrt(wk) * block[j])
    return ops


def boundary_loss(rho: np.ndarray, atom: AtomParams, g_tau: float) -> float:
    """Trace lost by one kick through the ``|e,n_max>`` boundary level."""
    n_max = rho.shape[0] - 1
    return float(atom.p_e * np.sin(g_tau * np.sqrt(n_max + 1)) ** 2 * rho[-1, -1].real)


def apply_kraus(ops: list[np.ndarray], rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for k in ops:
        out += k @ rho @ k.conj().T
    return out


def interaction_map(rho: CavityState, atom: AtomParams, g_tau: float) -> CavityState:
    loss = boundary_loss(rho.matrix, atom, g_tau)
    if loss > TRACE_TOL:
        raise TruncationTooSmall(
            f"kick loses {loss:.3e} of trace through level n_max={rho.trunc.n_max}"
        )
    out = apply_kraus(kraus_operators(atom, g_tau, rho.trunc), rho.matrix)
    return CavityState(out, rho.trunc)
