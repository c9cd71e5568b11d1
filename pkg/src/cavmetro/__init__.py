"""Simulation and metrology of a cavity driven by a stream of coherent two-level atoms."""

__version__ = "0.1.0"

from .atom import AtomParams, atom_density, interaction_map, jc_unitary
from .errors import CavmetroError
from .fock import (
    CavityOperator,
    CavityState,
    FockTruncation,
    annihilation,
    coherent_state,
    creation,
    displacement,
    expectation,
    fidelity,
    number,
    thermal_state,
    vacuum,
)
from .gaussian import GaussianSpec, build_state, decompose, reconstruct
from .lindblad import GeneratorKind, SteadyMethod, evolve, steady_state
from .metrology import fluctuation, regime_check, scan_and_fit, theta_to_atom
from .moments import MomentVector, approx_photon_number, drift, steady_moments
from .params import SystemParams
from .trajectory import TrajectoryConfig, ensemble_average, simulate_trajectory
