"""Rotational excitation of diatomic molecules by periodic trains of laser kicks."""

from rotkick.errors import (
    BasisLeakageError,
    ConfigError,
    GridError,
    RotkickError,
    ShaperWindowError,
    StepControlError,
)
from rotkick.molecule import (
    N2_14,
    N2_15,
    MoleculeSpec,
    load_species,
    revival_time,
    rotational_energy,
    spin_weight,
)
from rotkick.pulse_train import (
    FieldEnvelope,
    KickSequence,
    PhaseModulation,
    ShaperModel,
    Spectrum,
    SubKick,
    apply_spectral_phase,
    bessel_train,
    gaussian_spectrum,
    kick_strength,
    synthesize_time_domain,
)
from rotkick.rotor import (
    CouplingMatrix,
    PropagationParams,
    RotorState,
    cos2_elements,
    delta_kick,
    free_propagate,
    propagate_finite_pulse,
    propagate_train,
)
from rotkick.ensemble import ThermalEnsemble, ensemble_populations, thermal_ensemble
from rotkick.observables import (
    PopulationResult,
    ScanResult,
    absorbed_energy,
    detuning,
    normalize_energy,
    normalize_per_state,
)
from rotkick.scan import ScanConfig, compare_species, emit_heatmap, fractional_scan, run_scan

__version__ = "0.1.0"
