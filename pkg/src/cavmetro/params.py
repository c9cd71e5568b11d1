"""Physical parameters of the driven cavity and the rates derived from them."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .atom import AtomParams


@dataclass(frozen=True)
class SystemParams:
    """Coupling ``g`` (rad/s), transit time ``tau`` (s), injection rate ``r``
    (1/s), cavity decay ``kappa`` (1/s) and the injected atom state."""

    g: float
    tau: float
    r: float
    kappa: float
    atom: AtomParams

    def __post_init__(self):
        if self.g < 0 or self.tau < 0 or self.r < 0:
            raise ValueError("g, tau and r must be non-negative")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @classmethod
    def from_dimensionless(
        cls,
        g_tau: float,
        n_c: float,
        atom: AtomParams,
        kappa: float = 1.0,
        tau: float = 1e-7,
    ) -> SystemParams:
        return cls(g=g_tau / tau, tau=tau, r=n_c * kappa, kappa=kappa, atom=atom)

    def replace(self, **changes) -> SystemParams:
        return dataclasses.replace(self, **changes)

    @property
    def g_tau(self) -> float:
        return self.g * self.tau

    @property
    def n_c(self) -> float:
        return self.r / self.kappa

    @property
    def xi(self) -> complex:
        return self.r * self.g * self.tau * self.atom.lam

    @property
    def alpha(self) -> float:
        return self.r * self.g_tau**2

    @property
    def gamma1(self) -> float:
        return self.alpha * self.atom.p_e

    @property
    def gamma2(self) -> float:
        return self.alpha * self.atom.p_g + self.kappa

    @property
    def expansion_parameter(self) -> float:
        """``N_c (g tau)^2``; the effective model needs this to be small."""
        return self.n_c * self.g_tau**2

    @property
    def alpha0(self) -> complex:
        """Steady-state coherent amplitude ``-2i N_c lambda g tau``."""
        return -2j * self.n_c * self.atom.lam * self.g_tau

    @property
    def is_stable(self) -> bool:
        return self.gamma2 > self.gamma1

    def derived(self) -> dict:
        xi = self.xi
        return {
            "g": self.g,
            "tau": self.tau,
            "r": self.r,
            "kappa": self.kappa,
            "p_e": self.atom.p_e,
            "p_g": self.atom.p_g,
            "lambda_re": complex(self.atom.lam).real,
            "lambda_im": complex(self.atom.lam).imag,
            "g_tau": self.g_tau,
            "n_c": self.n_c,
            "xi_re": complex(xi).real,
            "xi_im": complex(xi).imag,
            "alpha": self.alpha,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
        }
