"""Rigid-rotor species data and derived rotational quantities.

Public quantities use spectroscopic units (cm^-1, ps).  Internally energies
are angular frequencies in rad/ps with hbar = 1, which is what the
propagators consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from rotkick.errors import ConfigError
from rotkick.kvfile import parse_kv

#: speed of light in cm/ps
C_CM_PER_PS = 2.99792458e-2
#: Boltzmann constant in cm^-1/K
KB_CM1_PER_K = 0.695035
#: 1 cubic angstrom (polarizability volume) expressed in m^3
ANGSTROM3_IN_M3 = 1e-30


def cm1_to_rad_per_ps(energy_cm1):
    """Convert an energy in cm^-1 to an angular frequency in rad/ps."""
    return 2.0 * math.pi * C_CM_PER_PS * energy_cm1


@dataclass(frozen=True)
class MoleculeSpec:
    """Rotational data for one diatomic species.

    Parameters
    ----------
    name : str
        Label used in file names and reports.
    B : float
        Rotational constant in cm^-1.
    delta_alpha : float
        Polarizability anisotropy as a polarizability volume in cubic
        angstrom.  The SI polarizability is ``4*pi*eps0*delta_alpha*1e-30``.
    weight_even, weight_odd : float
        Nuclear-spin degeneracies of even and odd rotational levels.
    """

    name: str
    B: float
    delta_alpha: float
    weight_even: float
    weight_odd: float

    def __post_init__(self):
        if not self.B > 0:
            raise ConfigError(f"{self.name}: rotational constant must be positive, got {self.B}")
        if not self.delta_alpha > 0:
            raise ConfigError(f"{self.name}: delta_alpha must be positive, got {self.delta_alpha}")
        if self.weight_even < 0 or self.weight_odd < 0:
            raise ConfigError(f"{self.name}: spin weights must be nonnegative")
        if not self.weight_even + self.weight_odd > 0:
            raise ConfigError(f"{self.name}: at least one spin weight must be positive")

    @property
    def B_angular(self):
        """Rotational constant in rad/ps (hbar = 1)."""
        return cm1_to_rad_per_ps(self.B)


N2_14 = MoleculeSpec(name="14N2", B=1.98958, delta_alpha=0.93, weight_even=6.0, weight_odd=3.0)
N2_15 = MoleculeSpec(name="15N2", B=1.8577, delta_alpha=0.93, weight_even=1.0, weight_odd=3.0)

BUILTIN_SPECIES = {
    "14N2": N2_14,
    "N2-14": N2_14,
    "14n2": N2_14,
    "15N2": N2_15,
    "N2-15": N2_15,
    "15n2": N2_15,
}


def revival_time(spec):
    """Full rotational revival time ``pi*hbar/B`` in ps."""
    return 1.0 / (2.0 * spec.B * C_CM_PER_PS)


def rotational_energy(spec, J):
    """Rigid-rotor level energy ``B*J*(J+1)`` in cm^-1."""
    if J < 0:
        raise ValueError(f"J must be nonnegative, got {J}")
    return spec.B * J * (J + 1)


def spin_weight(spec, J):
    if J < 0:
        raise ValueError(f"J must be nonnegative, got {J}")
    return spec.weight_even if J % 2 == 0 else spec.weight_odd


_SPECIES_KEYS = {"name", "B_cm1", "delta_alpha_A3", "weight_even", "weight_odd"}


def parse_species(text):
    """Build a MoleculeSpec from key-value text (see :func:`load_species`)."""
    values = parse_kv(text)
    missing = _SPECIES_KEYS - values.keys()
    if missing:
        raise ConfigError(f"species definition missing keys: {sorted(missing)}")
    unknown = values.keys() - _SPECIES_KEYS
    if unknown:
        raise ConfigError(f"unknown species keys: {sorted(unknown)}")
    try:
        return MoleculeSpec(
            name=values["name"],
            B=float(values["B_cm1"]),
            delta_alpha=float(values["delta_alpha_A3"]),
            weight_even=float(values["weight_even"]),
            weight_odd=float(values["weight_odd"]),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad numeric value in species definition: {exc}") from exc


def load_species(path):
    """Load a species from a ``key = value`` file.

    Required keys are ``name``, ``B_cm1``, ``delta_alpha_A3``,
    ``weight_even`` and ``weight_odd``.
    """
    return parse_species(Path(path).read_text())


def resolve_species(ref, base_dir=None):
    """Return a built-in species by name, or load one from a file path."""
    ref = ref.strip()
    if ref in BUILTIN_SPECIES:
        return BUILTIN_SPECIES[ref]
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    if not path.is_file():
        raise ConfigError(f"unknown species {ref!r} (not built in and no such file)")
    return load_species(path)
