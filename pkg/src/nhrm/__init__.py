"""Biorthogonal topology and charge pumping in the non-Hermitian Rice-Mele chain.

Modules
-------
bloch     Bloch Hamiltonian, biorthogonal eigenpairs and Bloch-sphere angles.
geometry  Berry connection/curvature, Chern numbers, Zak phase, bulk pumping.
lattice   Ring, open and weak-link chains, spectra, closed-form edge modes.
dynamics  Propagation of right/left states, bond currents, pumped charge.
cli       ``nhrm`` command-line experiments.
"""
from . import errors
from ._kernels import BACKEND
from .bloch import (
    Angles,
    BiorthPair,
    ModelParams,
    angles,
    bloch_matrix,
    dispersion,
    eigenpair,
    field_components,
    gamma,
)
from .dynamics import (
    DeltaRampSchedule,
    EvolutionTrace,
    RampSchedule,
    accumulated_charge,
    bond_current,
    delta_ramp_experiment,
    evolve,
    pump_experiment,
)
from .geometry import (
    CircleLoop,
    PolylineLoop,
    PumpLoop,
    berry_connection,
    berry_curvature,
    bulk_pump_charge,
    chern_line_integral,
    chern_plaquette,
    zak_phase,
)
from .lattice import (
    EdgeMode,
    RealSpaceModel,
    build_hamiltonian,
    commutator_residual,
    edge_modes,
    edge_probability,
    mid_gap_states,
    spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "errors",
    "ModelParams",
    "Angles",
    "BiorthPair",
    "gamma",
    "bloch_matrix",
    "dispersion",
    "field_components",
    "angles",
    "eigenpair",
    "PumpLoop",
    "CircleLoop",
    "PolylineLoop",
    "berry_connection",
    "berry_curvature",
    "chern_line_integral",
    "chern_plaquette",
    "zak_phase",
    "bulk_pump_charge",
    "RealSpaceModel",
    "EdgeMode",
    "build_hamiltonian",
    "spectrum",
    "edge_modes",
    "edge_probability",
    "commutator_residual",
    "mid_gap_states",
    "RampSchedule",
    "DeltaRampSchedule",
    "EvolutionTrace",
    "evolve",
    "bond_current",
    "accumulated_charge",
    "pump_experiment",
    "delta_ramp_experiment",
]
