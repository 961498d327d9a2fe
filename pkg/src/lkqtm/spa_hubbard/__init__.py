"""Static-path auxiliary-field Monte Carlo for the Hubbard model on the strained lattice."""

from .geometry import LatticeGeometry, build_geometry, dimer_geometry
from .hamiltonian import (
    AuxFieldConfig,
    EffectiveHamiltonian,
    build_h_eff,
    config_action,
    config_free_energy,
    fermion_log_trace,
)
from .interacting import (
    InteractingThermo,
    cycle_from_thermo,
    interacting_cycle,
    interacting_thermo,
    temperature_path,
)
from .montecarlo import (
    MCParams,
    acceptance_probability,
    full_diagonalization_sweep,
    metropolis_sweep,
    run_chain,
    tune_mu_half_filling,
)
from .observables import Observables, measure_observables, structure_factor

__all__ = [
    "AuxFieldConfig",
    "EffectiveHamiltonian",
    "InteractingThermo",
    "LatticeGeometry",
    "MCParams",
    "Observables",
    "acceptance_probability",
    "build_geometry",
    "build_h_eff",
    "config_action",
    "config_free_energy",
    "cycle_from_thermo",
    "dimer_geometry",
    "fermion_log_trace",
    "full_diagonalization_sweep",
    "interacting_cycle",
    "interacting_thermo",
    "measure_observables",
    "metropolis_sweep",
    "run_chain",
    "structure_factor",
    "temperature_path",
    "tune_mu_half_filling",
]
