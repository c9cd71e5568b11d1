"""Estimating the coupling ``g`` from the steady-state photon number.

The fluctuation of the estimate follows the error-transfer rule
``Var(n) / (d<n>/dg)^2``.  Both the exact value (from the closed-form steady
moments) and the leading-order formula ``1/(4 tau^2 N_c [p_e + 4 N_c lambda^2])``
are provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .atom import AtomParams
from .errors import EmptyWindow, ZeroCoherence, ZeroSensitivity
from .fock import FockTruncation, annihilation
from .gaussian import SteadyDecomposition
from .moments import closed_form_moments
from .params import SystemParams

EXPERIMENTAL_NC = 7.3


@dataclass(frozen=True)
class FluctuationResult:
    delta_g2_exact: float
    delta_g2_approx: float
    variance: float
    derivative: float
    derivative_fd: float


def photon_number_derivative(params: SystemParams) -> float:
    """``d<a^dag a>/dg`` of the exact steady photon number at fixed ``tau, r, kappa``."""
    g = params.g
    if g == 0:
        return 0.0
    pe, pg = params.atom.p_e, params.atom.p_g
    u = params.alpha
    den = params.gamma2 - params.gamma1
    xi2 = abs(params.xi) ** 2
    du = 2 * u / g
    dden = (pg - pe) * du
    dxi2 = 2 * xi2 / g
    first = pe * (du * den - u * dden) / den**2
    second = 4 * (dxi2 * den - 2 * xi2 * dden) / den**3
    return first + second


def _exact_n(params: SystemParams) -> float:
    return closed_form_moments(params)["n"]


def photon_number_derivative_fd(params: SystemParams, rel_step: float = 1e-6) -> float:
    h = params.g * rel_step
    up = _exact_n(params.replace(g=params.g + h))
    down = _exact_n(params.replace(g=params.g - h))
    return (up - down) / (2 * h)


def approx_fluctuation(tau: float, n_c: float, p_e: float, lam: complex) -> float:
    return 1.0 / (4 * tau**2 * n_c * (p_e + 4 * n_c * abs(lam) ** 2))


def fluctuation(params: SystemParams) -> FluctuationResult:
    deriv = photon_number_derivative(params)
    if deriv == 0:
        raise ZeroSensitivity("photon number does not depend on g at this point")
    m = closed_form_moments(params)
    var = m["n2"] - m["n"] ** 2
    return FluctuationResult(
        delta_g2_exact=var / deriv**2,
        delta_g2_approx=approx_fluctuation(params.tau, params.n_c, params.atom.p_e, params.atom.lam),
        variance=var,
        derivative=deriv,
        derivative_fd=photon_number_derivative_fd(params),
    )


def enhancement_ratio(n_c: float, lam: float, p_e: float) -> float:
    """Approximate-fluctuation ratio of incoherent (``lambda = 0``) to coherent atoms."""
    return (p_e + 4 * n_c * lam**2) / p_e


def _require_coherence(params: SystemParams) -> float:
    lam = abs(params.atom.lam)
    if lam == 0:
        raise ZeroCoherence("lambda = 0: the coherent component carries no g dependence")
    return lam


def component_fluctuation(n: int, params: SystemParams) -> float:
    """Fluctuation from ``|psi_n> = D(alpha0)|n-1>`` alone, ``(2n-1)/(16 N_c^2 tau^2 lambda^2)``."""
    if n not in (1, 2):
        raise ValueError("component index must be 1 or 2")
    lam = _require_coherence(params)
    return (2 * n - 1) / (16 * params.n_c**2 * params.tau**2 * lam**2)


def hypothetical_mixture_fluctuation(y: float, params: SystemParams) -> float:
    """Fluctuation of ``(1-y)|alpha0><alpha0| + y D|1><1|D^dag`` with ``y`` held fixed in ``g``."""
    if not 0 <= y <= 1:
        raise ValueError("y must lie in [0, 1]")
    lam = _require_coherence(params)
    if params.g <= 0:
        raise ZeroSensitivity("g must be positive")
    nc, tau, g = params.n_c, params.tau, params.g
    return (2 * y + 1) / (16 * nc**2 * tau**2 * lam**2) + (y - y**2) / (
        64 * nc**4 * g**2 * tau**4 * lam**4
    )


def _mixture_moments(params: SystemParams, weights: Sequence[float], trunc) -> tuple:
    dec = SteadyDecomposition(alpha0=params.alpha0, x=0.0)
    a = annihilation(trunc).entries
    num = a.conj().T @ a
    n1 = n2 = 0.0
    for w, v in zip(weights, dec.component_vectors(trunc)):
        nv = num @ v
        n1 += w * np.vdot(v, nv).real
        n2 += w * np.vdot(nv, nv).real
    return n1, n2


def numeric_mixture_fluctuation(
    weights: Sequence[float], params: SystemParams, trunc=None, rel_step: float = 1e-3
) -> float:
    """Error-transfer fluctuation of a fixed-weight mixture of the two displaced
    components, evaluated with Fock-space vectors and a central difference in ``g``."""
    _require_coherence(params)
    if trunc is None:
        n0 = abs(params.alpha0) ** 2
        trunc = FockTruncation(int(math.ceil(n0 + 10 * math.sqrt(n0 + 1) + 10)))
    mean, second = _mixture_moments(params, weights, trunc)
    h = params.g * rel_step
    up, _ = _mixture_moments(params.replace(g=params.g + h), weights, trunc)
    down, _ = _mixture_moments(params.replace(g=params.g - h), weights, trunc)
    deriv = (up - down) / (2 * h)
    return (second - mean**2) / deriv**2


def numeric_component_fluctuation(n: int, params: SystemParams, trunc=None) -> float:
    weights = (1.0, 0.0) if n == 1 else (0.0, 1.0)
    return numeric_mixture_fluctuation(weights, params, trunc)


@dataclass(frozen=True)
class RegimeReport:
    expansion_margin: float
    resolution_margin: float
    occupancy_margin: float
    r_tau: float
    kappa_over_g: float
    strictness: float
    n_c: float
    experimental_nc: float = EXPERIMENTAL_NC

    @property
    def expansion_ok(self) -> bool:
        return self.expansion_margin <= self.strictness

    @property
    def resolution_ok(self) -> bool:
        return self.resolution_margin <= self.strictness

    @property
    def occupancy_ok(self) -> bool:
        return self.occupancy_margin <= self.strictness

    @property
    def strong_coupling_ok(self) -> bool:
        return self.kappa_over_g <= self.strictness

    @property
    def ok(self) -> bool:
        return self.expansion_ok and self.resolution_ok and self.occupancy_ok

    @property
    def at_experimental_nc(self) -> bool:
        return math.isclose(self.n_c, self.experimental_nc, rel_tol=1e-9)

    def as_dict(self) -> dict:
        return {
            "expansion_margin": self.expansion_margin,
            "expansion_ok": self.expansion_ok,
            "resolution_margin": self.resolution_margin,
            "resolution_ok": self.resolution_ok,
            "occupancy_margin": self.occupancy_margin,
            "occupancy_ok": self.occupancy_ok,
            "r_tau": self.r_tau,
            "kappa_over_g": self.kappa_over_g,
            "strong_coupling_ok": self.strong_coupling_ok,
            "strictness": self.strictness,
            "n_c": self.n_c,
            "experimental_nc": self.experimental_nc,
            "at_experimental_nc": self.at_experimental_nc,
            "ok": self.ok,
        }


def regime_check(params: SystemParams, strictness: float = 0.1) -> RegimeReport:
    """Margins of the three working conditions, each required to be ``<= strictness``:
    ``N_c (g tau)^2``, ``1/(N_c tau g)`` and ``N_c tau kappa``."""
    nc, tau, g = params.n_c, params.tau, params.g
    denom = nc * tau * g
    return RegimeReport(
        expansion_margin=params.expansion_parameter,
        resolution_margin=math.inf if denom == 0 else 1.0 / denom,
        occupancy_margin=nc * tau * params.kappa,
        r_tau=params.r * tau,
        kappa_over_g=math.inf if g == 0 else params.kappa / g,
        strictness=strictness,
        n_c=nc,
    )


def theta_to_atom(theta: float) -> AtomParams:
    """Pure atom ``sin(theta/2)|e> + cos(theta/2)|g>`` with zero phase."""
    if not 0 <= theta <= math.pi:
        raise ValueError("theta must lie in [0, pi]")
    pe = math.sin(theta / 2) ** 2
    return AtomParams(p_e=pe, p_g=math.cos(theta / 2) ** 2, lam=math.sin(theta) / 2)


@dataclass(frozen=True)
class ScanRow:
    n_c: float
    lam: float
    delta_g2_approx: float
    delta_g2_exact: float
    regime_ok: bool


@dataclass(frozen=True)
class SlopeFit:
    lam: float
    slope: float
    intercept: float
    residual: float
    window: tuple
    n_points: int
    column: str = "delta_g2_approx"


def log_grid(lo: float, hi: float, points: int) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), points)


def local_slope(n_c, lam: float, p_e: float):
    """``d ln(Delta g^2) / d ln N_c`` of the leading-order formula."""
    n_c = np.asarray(n_c, dtype=float)
    c = 4 * n_c * lam**2
    return -1.0 - c / (p_e + c)


def fit_slope(n_c: Sequence[float], values: Sequence[float], window: tuple) -> tuple:
    """Least-squares line through ``log10(values)`` vs ``log10(n_c)`` inside ``window``.

    Returns ``(slope, intercept, rms_residual, n_points)``.
    """
    n_c = np.asarray(n_c, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    sel = (n_c >= lo * (1 - 1e-12)) & (n_c <= hi * (1 + 1e-12)) & np.isfinite(values)
    if np.count_nonzero(sel) < 2:
        raise EmptyWindow(f"fewer than 2 grid points inside N_c window [{lo}, {hi}]")
    x = np.log10(n_c[sel])
    y = np.log10(values[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))), int(sel.sum())


def scan(
    nc_grid: Sequence[float],
    lambdas: Sequence[float],
    tau: float,
    p_e: float,
    kappa: float = 1.0,
    g_tau: float = 0.01,
    exact: bool = True,
    strictness: float = 0.1,
) -> list[ScanRow]:
    rows = []
    for lam in lambdas:
        atom = AtomParams.from_excited(p_e, lam)
        for nc in nc_grid:
            params = SystemParams.from_dimensionless(g_tau, nc, atom, kappa=kappa, tau=tau)
            approx = approx_fluctuation(tau, nc, p_e, lam)
            ex = math.nan
            if exact and params.is_stable:
                try:
                    ex = fluctuation(params).delta_g2_exact
                except ZeroSensitivity:
                    pass
            rows.append(
                ScanRow(
                    n_c=float(nc),
                    lam=float(lam),
                    delta_g2_approx=approx,
                    delta_g2_exact=ex,
                    regime_ok=regime_check(params, strictness).ok,
                )
            )
    return rows


def scan_and_fit(
    nc_grid: Sequence[float],
    lambdas: Sequence[float],
    tau: float,
    p_e: float,
    fit_window: tuple,
    kappa: float = 1.0,
    g_tau: float = 0.01,
    exact: bool = True,
    column: str = "delta_g2_approx",
) -> tuple:
    rows = scan(nc_grid, lambdas, tau, p_e, kappa=kappa, g_tau=g_tau, exact=exact)
    fits = []
    for lam in lambdas:
        sub = [r for r in rows if r.lam == float(lam)]
        slope, intercept, resid, npts = fit_slope(
            [r.n_c for r in sub], [getattr(r, column) for r in sub], fit_window
        )
        fits.append(SlopeFit(float(lam), slope, intercept, resid, tuple(fit_window), npts, column))
    return rows, fits
