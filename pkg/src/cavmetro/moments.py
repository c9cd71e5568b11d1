"""Closed first/second-moment dynamics of the effectively driven cavity.

The moment vector is ordered as

    (<(a^dag a)^2>, <a^dag a a^dag>, <a a^dag a>, <a^dag^2>,
     <a^dag a>, <a^2>, <a^dag>, <a>)

and obeys ``dA/dt = M A + B`` exactly under the effective generator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import UnstableSystem
from .fock import CavityState, annihilation
from .params import SystemParams

MOMENT_NAMES = ("n2", "ada_ad", "a_ada", "ad2", "n", "a2", "ad", "a")


@dataclass(frozen=True, eq=False)
class MomentVector:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).copy()
        if v.shape != (8,):
            raise ValueError("moment vector needs exactly 8 entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    n2 = property(lambda self: self.values[0].real)
    ada_ad = property(lambda self: self.values[1])
    a_ada = property(lambda self: self.values[2])
    ad2 = property(lambda self: self.values[3])
    n = property(lambda self: self.values[4].real)
    a2 = property(lambda self: self.values[5])
    ad = property(lambda self: self.values[6])
    a = property(lambda self: self.values[7])

    @property
    def variance(self) -> float:
        return self.n2 - self.n**2

    def is_consistent(self, tol: float = 1e-10) -> bool:
        v = self.values
        return bool(
            abs(v[0].imag) <= tol
            and abs(v[4].imag) <= tol
            and abs(v[3] - np.conj(v[5])) <= tol
            and abs(v[6] - np.conj(v[7])) <= tol
            and self.variance >= -tol
        )

    @classmethod
    def from_state(cls, state: CavityState) -> MomentVector:
        a = annihilation(state.trunc).entries
        ad = a.conj().T
        n = ad @ a
        ops = (n @ n, ad @ a @ ad, a @ ad @ a, ad @ ad, n, a @ a, ad, a)
        rho_t = state.matrix.T
        return cls(np.array([np.sum(rho_t * o) for o in ops]))

    def as_dict(self) -> dict:
        return dict(zip(MOMENT_NAMES, (complex(x) for x in self.values)))


@dataclass(frozen=True, eq=False)
class MomentDrift:
    M: np.ndarray
    B: np.ndarray


def drift(params: SystemParams, alt_sign: bool = False) -> MomentDrift:
    """Drift matrix and source vector of the moment equations.

    ``alt_sign=True`` puts ``-i xi^*`` in the ``<a a^dag a>`` row, a sign
    variant kept for comparison.  The default ``+i xi^*`` is what the effective
    generator yields (that row is the complex conjugate of the
    ``<a^dag a a^dag>`` row).
    """
    g1, g2 = params.gamma1, params.gamma2
    xi = complex(params.xi)
    xc = xi.conjugate()
    d = g1 - g2
    s1 = 3 * g1 + g2
    s2 = g1 + g2
    i = 1j
    row3_a2 = -i * xc if alt_sign else i * xc
    M = np.array(
        [
            [2 * d, -2 * i * xi, 2 * i * xc, 0, s1, 0, i * xi, -i * xc],
            [0, 1.5 * d, 0, -i * xi, 2 * i * xc, 0, s2, 0],
            [0, 0, 1.5 * d, 0, -2 * i * xi, row3_a2, 0, s2],
            [0, 0, 0, d, 0, 0, 2 * i * xc, 0],
            [0, 0, 0, 0, d, 0, -i * xi, i * xc],
            [0, 0, 0, 0, 0, d, 0, -2 * i * xi],
            [0, 0, 0, 0, 0, 0, d / 2, 0],
            [0, 0, 0, 0, 0, 0, 0, d / 2],
        ],
        dtype=complex,
    )
    B = np.array([g1, i * xc, -i * xi, 0, g1, 0, i * xc, -i * xi], dtype=complex)
    return MomentDrift(M, B)


def _require_stable(params: SystemParams) -> None:
    if not params.gamma1 - params.gamma2 < 0:
        raise UnstableSystem(
            f"delta = gamma1 - gamma2 = {params.gamma1 - params.gamma2} is not negative"
        )


def steady_moments(params: SystemParams, alt_sign: bool = False) -> MomentVector:
    """Solve ``M A + B = 0`` by dense LU."""
    _require_stable(params)
    dr = drift(params, alt_sign)
    return MomentVector(np.linalg.solve(dr.M, -dr.B))


def steady_moments_backsub(params: SystemParams, alt_sign: bool = False) -> MomentVector:
    """Same solve exploiting the upper-triangular structure, bottom row first."""
    _require_stable(params)
    dr = drift(params, alt_sign)
    return MomentVector(scipy.linalg.solve_triangular(dr.M, -dr.B, lower=False))


def closed_form_moments(params: SystemParams) -> dict:
    """Steady moments in closed form: ``a``, ``a2``, ``n`` and ``n2``."""
    _require_stable(params)
    g1, g2 = params.gamma1, params.gamma2
    xi = complex(params.xi)
    x2 = abs(xi) ** 2
    d = g1 - g2
    return {
        "a": 2j * xi / d,
        "a2": -4 * xi**2 / d**2,
        "n": g1 / (g2 - g1) + 4 * x2 / (g2 - g1) ** 2,
        "n2": g1 * (g1 + g2) / d**2 - 4 * (3 * g1 + g2) * x2 / d**3 + 16 * x2**2 / (g2 - g1) ** 4,
    }


def vacuum_moments() -> MomentVector:
    # <a a^dag a> vanishes on vacuum; only normal-ordered terms survive
    return MomentVector(np.zeros(8))


def moment_trajectory(
    params: SystemParams, times, initial: MomentVector | None = None, alt_sign: bool = False
) -> list[MomentVector]:
    """Exact solution of the affine system via the augmented 9x9 exponential."""
    dr = drift(params, alt_sign)
    aug = np.zeros((9, 9), dtype=complex)
    aug[:8, :8] = dr.M
    aug[:8, 8] = dr.B
    x0 = np.append((initial or vacuum_moments()).values, 1.0)
    return [MomentVector((scipy.linalg.expm(aug * t) @ x0)[:8]) for t in times]


def approx_photon_number(params: SystemParams) -> float:
    """Leading-order photon number ``N_c (g tau)^2 p_e + 4 N_c^2 (g tau)^2 lambda^2``."""
    nc, gt = params.n_c, params.g_tau
    if params.expansion_parameter > 0.1:
        warnings.warn(
            f"N_c (g tau)^2 = {params.expansion_parameter:.3g} is not small",
            RuntimeWarning,
            stacklevel=2,
        )
    return nc * gt**2 * params.atom.p_e + 4 * nc**2 * gt**2 * abs(params.atom.lam) ** 2
