"""Reported quantities: level populations, absorbed energy, detuning, scan maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from rotkick.molecule import revival_time

_POP_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class PopulationResult:
    """Level populations ``S_J`` on the full basis ``J = 0..J_max``.

    Only ``J <= J_report`` are written to tables; the rest are kept so that
    energies and norms are computed on the whole basis.
    """

    S: np.ndarray
    J_report: int = 7
    mode: str = "impulsive"

    def __post_init__(self):
        if np.any(self.S < -_POP_SLACK) or np.any(self.S > 1 + _POP_SLACK):
            raise ValueError("populations must lie in [0, 1]")
        if self.S.sum() > 1 + _POP_SLACK:
            raise ValueError(f"populations sum to {self.S.sum():.12g} > 1")
        if self.J_report < 0:
            raise ValueError("J_report must be nonnegative")

    @property
    def reported(self):
        out = np.zeros(self.J_report + 1)
        n = min(len(self.S), self.J_report + 1)
        out[:n] = self.S[:n]
        return out

    @property
    def J_max(self):
        return len(self.S) - 1


def level_energies(spec, J_max):
    J = np.arange(J_max + 1)
    return spec.B * J * (J + 1.0)


def rotational_energy_of(populations, spec):
    """Mean rotational energy ``sum_J S_J B J(J+1)`` in cm^-1."""
    S = populations.S if isinstance(populations, PopulationResult) else np.asarray(populations)
    return float(S @ level_energies(spec, len(S) - 1))


def absorbed_energy(initial, final, spec):
    """Energy gained by the ensemble, ``sum_J (S_J^final - S_J^initial) B J(J+1)`` (cm^-1)."""
    if len(initial.S) != len(final.S):
        raise ValueError(f"basis mismatch: {len(initial.S)} vs {len(final.S)} levels")
    return float((final.S - initial.S) @ level_energies(spec, len(final.S) - 1))


def detuning(period, spec):
    """Dimensionless detuning from full revival, ``2 pi (period/T_rev - 1)``."""
    if not period > 0:
        raise ValueError(f"period must be positive, got {period}")
    return 2.0 * math.pi * (period / revival_time(spec) - 1.0)


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Populations and energies over a grid of train periods.

    ``populations`` has one row per period and one column per level of the
    full basis.  ``initial`` is the thermal distribution the train acted on.
    ``extras`` holds additional named per-period columns.
    """

    species: str
    periods: np.ndarray
    detunings: np.ndarray
    populations: np.ndarray
    energy: np.ndarray
    initial: np.ndarray
    J_report: int = 7
    mode: str = "impulsive"
    energy_normalized: np.ndarray | None = None
    resonance_period: float | None = None
    grid_step: float | None = None
    per_state_normalized: bool = False
    absolute_energy: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def reported(self):
        n = min(self.populations.shape[1], self.J_report + 1)
        return self.populations[:, :n]

    def row(self, period, tol=1e-9):
        idx = np.flatnonzero(np.abs(self.periods - period) <= tol)
        if idx.size == 0:
            raise KeyError(f"period {period} not on the scan grid")
        return int(idx[0])


def normalize_per_state(scan):
    """Divide each level's column by its maximum over the periods.

    All-zero columns stay zero.
    """
    pops = np.array(scan.populations, dtype=float)
    if pops.size == 0:
        raise ValueError("empty scan")
    peak = pops.max(axis=0)
    nz = peak > 0
    pops[:, nz] = pops[:, nz] / peak[nz]
    return replace(scan, populations=pops, per_state_normalized=True)


def normalize_energy(scan):
    """Scale the energies by their value at the grid maximum.

    The period of that maximum is recorded as the empirical resonance, not
    interpolated.

    Raises
    ------
    ValueError
        If no period has positive absorbed energy (e.g. an all-zero vector).
    """
    energy = np.asarray(scan.energy, dtype=float)
    if energy.size == 0:
        raise ValueError("empty energy vector")
    idx = int(np.argmax(energy))
    peak = energy[idx]
    if not peak > 0:
        raise ValueError("no positive absorbed energy to normalize by")
    return replace(scan, energy_normalized=energy / peak, resonance_period=float(scan.periods[idx]))


def parity_gains(scan):
    """Population gain in ``J >= 2`` levels of each parity, per period.

    Returns ``(even_gain, odd_gain)`` computed on the full basis relative to
    the initial distribution.
    """
    delta = scan.populations - scan.initial[None, :]
    J = np.arange(delta.shape[1])
    even = (J >= 2) & (J % 2 == 0)
    odd = (J >= 2) & (J % 2 == 1)
    return delta[:, even].sum(axis=1), delta[:, odd].sum(axis=1)


def local_extrema(values, kind="max"):
    """Indices of strict interior local maxima (or minima) of a 1-D series.

    Plateaus count once, at their first index.
    """
    v = np.asarray(values, dtype=float)
    if kind == "min":
        v = -v
    out = []
    i = 1
    n = len(v)
    while i < n - 1:
        if v[i] > v[i - 1]:
            j = i
            while j < n - 1 and v[j + 1] == v[i]:
                j += 1
            if j < n - 1 and v[j + 1] < v[i]:
                out.append(i)
            i = j + 1
        else:
            i += 1
    return np.array(out, dtype=int)
