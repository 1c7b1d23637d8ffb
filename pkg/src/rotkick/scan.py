"""Period sweeps, species comparison, and the files they write.

A scan evaluates, for every train period on a uniform grid, the thermally
averaged populations after the train and the energy absorbed relative to the
thermal distribution.  Results are a pure function of the effective
configuration: periods are processed independently and collected in grid
order, so the number of worker processes never changes the output.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from rotkick.ensemble import ensemble_csv, ensemble_populations, thermal_ensemble
from rotkick.errors import ConfigError
from rotkick.kvfile import parse_kv
from rotkick.molecule import MoleculeSpec, resolve_species, revival_time
from rotkick.observables import (
    PopulationResult,
    ScanResult,
    absorbed_energy,
    detuning,
    level_energies,
    normalize_energy,
    normalize_per_state,
    parity_gains,
)
from rotkick.pulse_train import (
    FieldEnvelope,
    PhaseModulation,
    ShaperModel,
    bessel_train,
    shaped_train,
)
from rotkick.rotor import PropagationParams

log = logging.getLogger(__name__)

OUTPUT_ENV = "ROTKICK_OUTPUT_DIR"
PULSE_MODELS = ("impulsive", "finite", "shaper")


@dataclass(frozen=True)
class ScanConfig:
    """All knobs of a period sweep.

    ``species`` holds one or two species; ``compare`` needs two.  ``A`` has
    no default on purpose and must be given in config files.
    """

    species: tuple[MoleculeSpec, ...]
    A: float
    period_start: float
    period_stop: float
    period_step: float = 0.005
    total_P: float = 7.0
    n_max: int = 3
    pulse_model: str = "impulsive"
    pulse_fwhm: float = 0.5
    temperature: float = 6.3
    J_report: int = 7
    J_max: int = 40
    cutoff_tail: float = 1e-6
    allow_truncation: bool = False
    shaper_pixels: int = 640
    shaper_resolution_nm: float = 0.04
    center_wavelength_nm: float = 800.0
    input_fwhm_ps: float = 0.15
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        if not 1 <= len(self.species) <= 2:
            raise ConfigError("configure one or two species")
        if not self.period_start < self.period_stop:
            raise ConfigError("period_start must be below period_stop")
        if not self.period_step > 0:
            raise ConfigError("period_step must be positive")
        if self.period_start <= 0:
            raise ConfigError("periods must be positive")
        if self.A < 0:
            raise ConfigError("A must be nonnegative")
        if self.total_P < 0:
            raise ConfigError("total_P must be nonnegative")
        if self.n_max < 0:
            raise ConfigError("n_max must be nonnegative")
        if self.pulse_model not in PULSE_MODELS:
            raise ConfigError(f"pulse_model must be one of {PULSE_MODELS}, got {self.pulse_model!r}")
        if not self.pulse_fwhm > 0 or not self.input_fwhm_ps > 0:
            raise ConfigError("pulse durations must be positive")
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")
        if self.J_report < 0 or self.J_report > self.J_max:
            raise ConfigError("J_report must lie in [0, J_max]")
        PropagationParams(J_max=self.J_max)

    @property
    def periods(self):
        n = int(math.floor((self.period_stop - self.period_start) / self.period_step + 1e-9)) + 1
        return np.round(self.period_start + self.period_step * np.arange(n), 10)

    @property
    def params(self):
        return PropagationParams(J_max=self.J_max)

    @property
    def propagation_mode(self):
        return "impulsive" if self.pulse_model == "impulsive" else "finite"

    def canonical_text(self):
        """Stable text form of every setting that affects results."""
        lines = []
        for f in fields(self):
            if f.name == "output_dir":
                continue
            value = getattr(self, f.name)
            if f.name == "species":
                value = ";".join(
                    f"{s.name}:{s.B!r}:{s.delta_alpha!r}:{s.weight_even!r}:{s.weight_odd!r}" for s in value
                )
            lines.append(f"{f.name} = {value!r}" if not isinstance(value, str) else f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @property
    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    @classmethod
    def from_text(cls, text, base_dir=None):
        values = parse_kv(text)
        known = {f.name: f for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("species", "A", "period_start", "period_stop"):
            if key not in values:
                raise ConfigError(f"missing required config key {key!r}")
        kwargs = {}
        for key, raw in values.items():
            if key == "species":
                kwargs[key] = tuple(resolve_species(r, base_dir) for r in raw.split(",") if r.strip())
            elif key in ("pulse_model", "output_dir"):
                kwargs[key] = raw
            elif key == "allow_truncation":
                if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ConfigError(f"allow_truncation must be a boolean, got {raw!r}")
                kwargs[key] = raw.lower() in ("true", "1", "yes")
            elif key in ("n_max", "J_report", "J_max", "shaper_pixels"):
                try:
                    kwargs[key] = int(raw)
                except ValueError:
                    raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
            else:
                try:
                    kwargs[key] = float(raw)
                except ValueError:
                    raise ConfigError(f"{key} must be a number, got {raw!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        text = path.read_text()  # OSError propagates: an I/O failure, not a bad config
        return cls.from_text(text, base_dir=path.parent)


def build_train(config, spec, period):
    """The kick sequence (or sampled field) applied at one train period."""
    mod = PhaseModulation(config.A, period)
    if config.pulse_model in ("impulsive", "finite"):
        return bessel_train(mod, config.total_P, config.n_max, config.pulse_fwhm, config.allow_truncation)
    shaper = ShaperModel(config.shaper_pixels, config.shaper_resolution_nm, config.center_wavelength_nm)
    env, _ = shaped_train(
        mod, shaper, tl_fwhm=config.input_fwhm_ps, stretched_fwhm=config.pulse_fwhm,
        center_wavelength=config.center_wavelength_nm,
    )
    half = (config.n_max + 0.5) * period
    sel = np.abs(env.time) <= half
    cropped = FieldEnvelope(time=env.time[sel], samples=env.samples[sel], peak_intensity=env.peak_intensity)
    return cropped.with_kick_strength(config.total_P, spec.delta_alpha)


def _period_populations(args):
    config, species_index, periods = args
    spec = config.species[species_index]
    ens = thermal_ensemble(spec, config.temperature, config.cutoff_tail)
    rows = []
    for period in periods:
        train = build_train(config, spec, float(period))
        res = ensemble_populations(spec, ens, train, config.params, config.propagation_mode, config.J_report)
        rows.append(res.S)
    return rows


def _evaluate_grid(config, species_index, periods, workers):
    periods = list(periods)
    if workers <= 1 or len(periods) < 2:
        return np.array(_period_populations((config, species_index, periods)))
    n = min(workers, len(periods))
    chunks = [c.tolist() for c in np.array_split(np.array(periods), n)]
    with ProcessPoolExecutor(max_workers=n) as pool:
        parts = list(pool.map(_period_populations, [(config, species_index, c) for c in chunks]))
    return np.array([row for part in parts for row in part])


def scan_species(config, species_index=0, workers=1, periods=None):
    """Compute a ScanResult for one configured species (no files written)."""
    spec = config.species[species_index]
    periods = config.periods if periods is None else np.asarray(periods, dtype=float)
    ens = thermal_ensemble(spec, config.temperature, config.cutoff_tail)
    initial = ens.level_populations(config.J_max)
    pops = _evaluate_grid(config, species_index, periods, workers)
    init_res = PopulationResult(S=initial, J_report=config.J_report)
    energy = np.array([
        absorbed_energy(init_res, PopulationResult(S=row, J_report=config.J_report), spec) for row in pops
    ])
    scan = ScanResult(
        species=spec.name,
        periods=periods,
        detunings=np.array([detuning(p, spec) for p in periods]),
        populations=pops,
        energy=energy,
        initial=initial,
        J_report=config.J_report,
        mode=config.pulse_model,
        grid_step=config.period_step,
        absolute_energy=pops @ level_energies(spec, config.J_max),
    )
    try:
        return normalize_energy(scan)
    except ValueError:
        log.info("no positive absorbed energy in %s scan; energy_norm left at zero", spec.name)
        return replace(scan, energy_normalized=np.zeros_like(energy))


# --------------------------------------------------------------------------
# output files


def _fmt(x):
    return f"{x:.12g}"


def _header(kind, scan, config):
    parts = [
        f"# rotkick {kind}",
        f"species={scan.species}",
        f"mode={scan.mode}",
        f"config_sha256={config.config_hash}",
    ]
    if scan.resonance_period is not None:
        parts.append(f"resonance_period_ps={_fmt(scan.resonance_period)}")
    if scan.grid_step is not None:
        parts.append(f"grid_step_ps={_fmt(scan.grid_step)}")
    return " ".join(parts) + "\n"


def scan_columns(J_report):
    return ["period_ps", "detuning", "energy_cm1", "energy_norm"] + [f"S{J}" for J in range(J_report + 1)]


def write_scan_csv(scan, path, config):
    norm = scan.energy_normalized if scan.energy_normalized is not None else np.zeros_like(scan.energy)
    pops = scan.reported
    with open(path, "w") as fh:
        fh.write(_header("scan_normalized" if scan.per_state_normalized else "scan", scan, config))
        fh.write(",".join(scan_columns(scan.J_report)) + "\n")
        for i, p in enumerate(scan.periods):
            row = [p, scan.detunings[i], scan.energy[i], norm[i], *pops[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_scan_csv(path):
    """Read a ``scan.csv`` (or ``scan_normalized.csv``) back into a ScanResult.

    Only the reported levels are available; ``initial`` is left at zero.
    """
    path = Path(path)
    meta = {}
    with open(path) as fh:
        first = fh.readline()
        if first.startswith("#"):
            for token in first[1:].split():
                if "=" in token:
                    k, v = token.split("=", 1)
                    meta[k] = v
            header = fh.readline()
        else:
            header = first
    cols = header.strip().split(",")
    if cols[:4] != ["period_ps", "detuning", "energy_cm1", "energy_norm"] or not cols[4:]:
        raise ConfigError(f"{path}: not a scan table (columns {cols})")
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2 if meta else 1, ndmin=2)
    J_report = len(cols) - 5
    res_period = meta.get("resonance_period_ps")
    step = meta.get("grid_step_ps")
    return ScanResult(
        species=meta.get("species", "unknown"),
        periods=data[:, 0],
        detunings=data[:, 1],
        populations=data[:, 4:],
        energy=data[:, 2],
        initial=np.zeros(J_report + 1),
        J_report=J_report,
        mode=meta.get("mode", "unknown"),
        energy_normalized=data[:, 3],
        resonance_period=float(res_period) if res_period else None,
        grid_step=float(step) if step else None,
    )


def resolve_output_dir(config, override=None):
    for candidate in (override, config.output_dir, os.environ.get(OUTPUT_ENV)):
        if candidate:
            return Path(candidate)
    return Path("rotkick_output")


def _prepare_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run_scan(config, workers=1, output_dir=None, write=True):
    """Sweep the train period for the first configured species.

    Writes ``scan.csv``, ``scan_normalized.csv`` and ``ensemble.csv`` into
    the output directory when ``write`` is set.
    """
    scan = scan_species(config, 0, workers)
    if write:
        out = _prepare_dir(resolve_output_dir(config, output_dir))
        write_scan_csv(scan, out / "scan.csv", config)
        write_scan_csv(normalize_per_state(scan), out / "scan_normalized.csv", config)
        spec = config.species[0]
        ensemble_csv(thermal_ensemble(spec, config.temperature, config.cutoff_tail), out / "ensemble.csv")
    return scan


@dataclass(frozen=True, eq=False)
class SpeciesComparison:
    """Energy ratio of two species over a shared period grid.

    ``table`` rows are ``(resonant_species, period, energy1, energy2, ratio)``
    evaluated exactly at each species' revival time.
    """

    scans: tuple[ScanResult, ScanResult]
    ratio: np.ndarray
    table: tuple[tuple[str, float, float, float, float], ...]

    def ratio_at(self, period, tol=1e-9):
        return float(self.ratio[self.scans[0].row(period, tol)])


def _ratio(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.asarray(a, dtype=float) / np.asarray(b, dtype=float)


def compare_species(config, workers=1, output_dir=None, write=True):
    """Run both species on one grid and report ``E(species1)/E(species2)``."""
    if len(config.species) != 2:
        raise ConfigError("compare needs exactly two species")
    scans = tuple(scan_species(config, i, workers) for i in range(2))
    ratio = _ratio(scans[0].energy, scans[1].energy)
    table = []
    for spec in config.species:
        t_rev = revival_time(spec)
        e = [float(scan_species(config, i, 1, periods=[t_rev]).energy[0]) for i in range(2)]
        table.append((spec.name, t_rev, e[0], e[1], float(_ratio(e[0], e[1]))))
    result = SpeciesComparison(scans=scans, ratio=ratio, table=tuple(table))
    if write:
        out = _prepare_dir(resolve_output_dir(config, output_dir))
        names = f"species1={scans[0].species} species2={scans[1].species}"
        tag = f" mode={config.pulse_model} config_sha256={config.config_hash}\n"
        with open(out / "compare.csv", "w") as fh:
            fh.write(f"# rotkick compare {names}" + tag)
            fh.write("period_ps,energy1_cm1,energy2_cm1,ratio\n")
            for p, e1, e2, r in zip(scans[0].periods, scans[0].energy, scans[1].energy, ratio):
                fh.write(",".join(_fmt(v) for v in (p, e1, e2, r)) + "\n")
        with open(out / "selectivity.csv", "w") as fh:
            fh.write(f"# rotkick selectivity {names}" + tag)
            fh.write("resonant_species,period_ps,energy1_cm1,energy2_cm1,ratio\n")
            for name, p, e1, e2, r in table:
                fh.write(f"{name}," + ",".join(_fmt(v) for v in (p, e1, e2, r)) + "\n")
        for i, scan in enumerate(scans):
            sub = _prepare_dir(out / f"species{i + 1}_{scan.species}")
            write_scan_csv(scan, sub / "scan.csv", config)
            write_scan_csv(normalize_per_state(scan), sub / "scan_normalized.csv", config)
    return result


def fractional_scan(config, workers=1, output_dir=None, write=True):
    """Period sweep with per-parity excitation columns.

    ``extras['even_gain']`` and ``extras['odd_gain']`` are the population
    gains of ``J >= 2`` levels of each parity; ``even_energy`` and
    ``odd_energy`` split the absorbed energy the same way.  Writes the
    ``run_scan`` files plus ``parity.csv``.
    """
    scan = scan_species(config, 0, workers)
    spec = config.species[0]
    even, odd = parity_gains(scan)
    E = level_energies(spec, config.J_max)
    delta = scan.populations - scan.initial[None, :]
    J = np.arange(config.J_max + 1)
    even_energy = delta[:, J % 2 == 0] @ E[J % 2 == 0]
    odd_energy = delta[:, J % 2 == 1] @ E[J % 2 == 1]
    extras = {"even_gain": even, "odd_gain": odd, "even_energy": even_energy, "odd_energy": odd_energy}
    scan = replace(scan, extras=extras)
    if write:
        out = _prepare_dir(resolve_output_dir(config, output_dir))
        write_scan_csv(scan, out / "scan.csv", config)
        write_scan_csv(normalize_per_state(scan), out / "scan_normalized.csv", config)
        with open(out / "parity.csv", "w") as fh:
            fh.write(_header("parity", scan, config))
            fh.write("period_ps,even_gain,odd_gain,even_energy_cm1,odd_energy_cm1\n")
            for i, p in enumerate(scan.periods):
                row = (p, even[i], odd[i], even_energy[i], odd_energy[i])
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    return scan


def emit_heatmap(scan, path):
    """Write the per-state normalized ``[period x J]`` map as an 8-bit PGM.

    Image columns are periods (left to right), rows are levels with
    ``J = J_report`` on top.  Values in [0, 1] map linearly to 0..255.  Axis
    metadata goes to ``<path>.axes.txt``.
    """
    if scan.populations.size == 0:
        raise ValueError("empty scan")
    norm = scan if scan.per_state_normalized else normalize_per_state(scan)
    matrix = np.clip(norm.reported, 0.0, 1.0)
    pixels = np.rint(matrix.T[::-1] * 255.0).astype(np.uint8)
    height, width = pixels.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
    step = scan.grid_step if scan.grid_step is not None else (
        float(scan.periods[1] - scan.periods[0]) if len(scan.periods) > 1 else 0.0
    )
    sidecar = path.with_name(path.name + ".axes.txt")
    with open(sidecar, "w") as fh:
        fh.write(f"species = {scan.species}\n")
        fh.write(f"width = {width}\nheight = {height}\n")
        fh.write("x_axis = period_ps\n")
        fh.write(f"x_start = {_fmt(scan.periods[0])}\nx_stop = {_fmt(scan.periods[-1])}\nx_step = {_fmt(step)}\n")
        fh.write(f"y_axis = J\ny_top = {scan.J_report}\ny_bottom = 0\n")
        fh.write("value = population normalized per J, 0 -> 0, 1 -> 255\n")
    return pixels
