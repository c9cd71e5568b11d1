"""Truncated Fock-space linear algebra for a single cavity mode.

Everything is dense: the largest spaces used here have a few hundred levels at
most, so sparse storage buys nothing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidState, TruncationTooSmall

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-9
LEAKAGE_TOL = 1e-8


@dataclass(frozen=True)
class FockTruncation:
    """Keeps Fock levels ``0 .. n_max``."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1


def _as_trunc(trunc: Union[FockTruncation, int]) -> FockTruncation:
    return trunc if isinstance(trunc, FockTruncation) else FockTruncation(int(trunc))


@dataclass(frozen=True, eq=False)
class CavityOperator:
    entries: np.ndarray
    trunc: FockTruncation

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (self.trunc.dim, self.trunc.dim):
            raise DimensionMismatch(
                f"operator shape {m.shape} does not match dimension {self.trunc.dim}"
            )
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def dag(self) -> CavityOperator:
        return CavityOperator(self.entries.conj().T, self.trunc)

    def __matmul__(self, other: CavityOperator) -> CavityOperator:
        _check_same(self.trunc, other.trunc)
        return CavityOperator(self.entries @ other.entries, self.trunc)

    def __add__(self, other: CavityOperator) -> CavityOperator:
        _check_same(self.trunc, other.trunc)
        return CavityOperator(self.entries + other.entries, self.trunc)

    def __sub__(self, other: CavityOperator) -> CavityOperator:
        _check_same(self.trunc, other.trunc)
        return CavityOperator(self.entries - other.entries, self.trunc)


@dataclass(frozen=True, eq=False)
class CavityState:
    """Density matrix of the cavity mode.

    Hermiticity and unit trace are enforced on construction.  Negative
    eigenvalues below ``-1e-9`` are reported with a warning unless
    ``positivity="clip"``, in which case they are projected to zero and the
    state is renormalized.
    """

    matrix: np.ndarray
    trunc: FockTruncation
    positivity: str = field(default="report", repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.trunc.dim
        if m.shape != (d, d):
            raise DimensionMismatch(f"state shape {m.shape} does not match dimension {d}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
            raise InvalidState("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidState(f"density matrix has trace {tr!r}")
        if self.positivity not in ("report", "clip"):
            raise ValueError("positivity must be 'report' or 'clip'")
        w, v = np.linalg.eigh(m)
        if w[0] < -POSITIVITY_TOL:
            if self.positivity == "clip":
                w = np.clip(w, 0.0, None)
                m = (v * w) @ v.conj().T
                m /= np.trace(m).real
            else:
                warnings.warn(
                    f"density matrix has eigenvalue {w[0]:.3e} below -{POSITIVITY_TOL:g}",
                    RuntimeWarning,
                    stacklevel=3,
                )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def leakage(self) -> float:
        """Population of the highest retained level."""
        return float(self.matrix[-1, -1].real)

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def expect(self, op: Union[CavityOperator, np.ndarray]) -> complex:
        return expectation(self, op)


def _check_same(t1: FockTruncation, t2: FockTruncation) -> None:
    if t1.dim != t2.dim:
        raise DimensionMismatch(f"truncations differ: n_max={t1.n_max} vs n_max={t2.n_max}")


def annihilation(trunc) -> CavityOperator:
    trunc = _as_trunc(trunc)
    return CavityOperator(np.diag(np.sqrt(np.arange(1, trunc.dim)), 1).astype(complex), trunc)


def creation(trunc) -> CavityOperator:
    return annihilation(trunc).dag()


def number(trunc) -> CavityOperator:
    trunc = _as_trunc(trunc)
    return CavityOperator(np.diag(np.arange(trunc.dim)).astype(complex), trunc)


def identity(trunc) -> CavityOperator:
    trunc = _as_trunc(trunc)
    return CavityOperator(np.eye(trunc.dim, dtype=complex), trunc)


def displacement_guidance(alpha: complex) -> float:
    """Smallest ``n_max`` recommended for displacing by ``alpha``."""
    n = abs(alpha) ** 2
    return n + 10.0 * math.sqrt(n + 1.0)


def displacement(trunc, alpha: complex, check: bool = True) -> CavityOperator:
    """``exp(alpha a^dag - alpha^* a)`` exponentiated on the truncated space."""
    trunc = _as_trunc(trunc)
    if check and alpha != 0 and trunc.n_max < displacement_guidance(alpha):
        raise TruncationTooSmall(
            f"n_max={trunc.n_max} too small for alpha={alpha}; "
            f"need >= {displacement_guidance(alpha):.1f}"
        )
    a = annihilation(trunc).entries
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return CavityOperator(scipy.linalg.expm(gen), trunc)


def fock_state(trunc, n: int) -> CavityState:
    trunc = _as_trunc(trunc)
    if not 0 <= n <= trunc.n_max:
        raise ValueError(f"level {n} outside truncation n_max={trunc.n_max}")
    m = np.zeros((trunc.dim, trunc.dim), dtype=complex)
    m[n, n] = 1.0
    return CavityState(m, trunc)


def vacuum(trunc) -> CavityState:
    return fock_state(trunc, 0)


def pure_state(psi: np.ndarray, trunc) -> CavityState:
    trunc = _as_trunc(trunc)
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return CavityState(np.outer(psi, psi.conj()), trunc)


def coherent_amplitudes(trunc, alpha: complex) -> np.ndarray:
    """Fock amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)``, truncated (not renormalized)."""
    trunc = _as_trunc(trunc)
    n = np.arange(trunc.dim)
    out = np.empty(trunc.dim, dtype=complex)
    out[0] = np.exp(-abs(alpha) ** 2 / 2)
    for k in n[1:]:
        out[k] = out[k - 1] * alpha / np.sqrt(k)
    return out


def coherent_state(trunc, alpha: complex) -> CavityState:
    trunc = _as_trunc(trunc)
    if trunc.n_max < displacement_guidance(alpha) and alpha != 0:
        raise TruncationTooSmall(f"n_max={trunc.n_max} too small for alpha={alpha}")
    return pure_state(coherent_amplitudes(trunc, alpha), trunc)


def thermal_state(trunc, nbar: float) -> CavityState:
    trunc = _as_trunc(trunc)
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    n = np.arange(trunc.dim)
    q = nbar / (1.0 + nbar)
    p = q**n if nbar > 0 else (n == 0).astype(float)
    p = p / p.sum()
    return CavityState(np.diag(p).astype(complex), trunc)


def _matrix(x) -> np.ndarray:
    return x.entries if isinstance(x, CavityOperator) else np.asarray(x)


def expectation(state: CavityState, op) -> complex:
    m = _matrix(op)
    if isinstance(op, CavityOperator):
        _check_same(state.trunc, op.trunc)
    elif m.shape != state.matrix.shape:
        raise DimensionMismatch(f"operator shape {m.shape} vs state {state.matrix.shape}")
    # Tr(rho O) without forming the product
    return complex(np.sum(state.matrix.T * m))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    # eigenvalues at roundoff level would otherwise contribute ~sqrt(eps)
    w = np.where(w > m.shape[0] * np.finfo(float).eps * max(w.max(), 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def fidelity(rho: CavityState, sigma: CavityState) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2``, computed as the
    squared trace norm of ``sqrt(rho) sqrt(sigma)``."""
    _check_same(rho.trunc, sigma.trunc)
    sv = np.linalg.svd(_psd_sqrt(rho.matrix) @ _psd_sqrt(sigma.matrix), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def trace_distance(rho: CavityState, sigma: CavityState) -> float:
    _check_same(rho.trunc, sigma.trunc)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix))))
