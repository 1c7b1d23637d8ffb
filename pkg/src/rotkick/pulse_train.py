"""Pulse trains from sinusoidal spectral phase modulation.

Two routes produce a train:

* :func:`bessel_train` uses the Jacobi-Anger expansion directly: the phase
  ``A*sin((w - w0)*tau)`` splits one input pulse into replicas at ``n*tau``
  with field amplitudes ``J_n(A)``.
* :func:`apply_spectral_phase` followed by :func:`synthesize_time_domain`
  does the Fourier synthesis numerically, optionally through a pixelated
  shaper whose phase is a staircase over pixel-width frequency bins.

Fourier convention: ``S(W) = int e(t) exp(+i W t) dt`` with ``W`` the
detuning from the carrier, so a spectral factor ``exp(i n W tau)`` delays the
pulse to ``t = +n*tau``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import jv

from rotkick.errors import ConfigError, GridError, ShaperWindowError

#: speed of light in nm/ps
C_NM_PER_PS = 2.99792458e5
#: P = KICK_COEFF * delta_alpha[A^3] * int I[W/cm^2] dt[ps]
#: (from P = delta_alpha_SI/(4 hbar) int eps^2 dt with I = c eps0 eps^2 / 2)
KICK_COEFF = 2.0 * math.pi * 1e-30 * 1e4 * 1e-12 / (2.99792458e8 * 1.054571817e-34)
#: intensity threshold (relative to peak) that defines "non-negligible" support
SUPPORT_THRESHOLD = 1e-6
#: spectral intensity (relative to peak) allowed outside the shaper window
SHAPER_WINDOW_THRESHOLD = 1e-4

#: Bessel orders below this energy share may fall outside the time window
ORDER_WEIGHT_FLOOR = 1e-8
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def wavelength_to_omega(wavelength_nm):
    """Angular frequency in rad/ps for a vacuum wavelength in nm."""
    return 2.0 * math.pi * C_NM_PER_PS / np.asarray(wavelength_nm, dtype=float)


@dataclass(frozen=True)
class PhaseModulation:
    """Spectral phase ``A*sin((w - omega0)*tau)``.

    ``omega0`` is the absolute carrier in rad/ps; ``None`` ties it to the
    carrier of whatever spectrum the modulation is applied to.
    """

    A: float
    tau: float
    omega0: float | None = None

    def __post_init__(self):
        if self.A < 0:
            raise ConfigError(f"modulation amplitude must be >= 0, got {self.A}")
        if not self.tau > 0:
            raise ConfigError(f"modulation period must be > 0, got {self.tau}")

    def phase(self, omega_abs, carrier):
        w0 = carrier if self.omega0 is None else self.omega0
        return self.A * np.sin((np.asarray(omega_abs) - w0) * self.tau)


@dataclass(frozen=True)
class SubKick:
    n: int
    t: float
    P: float
    fwhm: float


@dataclass(frozen=True)
class KickSequence:
    """Ordered sub-pulses of a train with their dimensionless kick strengths.

    ``retained_fraction`` is the Bessel weight kept by truncation (1 for
    trains that were not built from a truncated expansion).
    """

    kicks: tuple[SubKick, ...]
    retained_fraction: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kicks", tuple(self.kicks))
        times = [k.t for k in self.kicks]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("sub-kick times must be strictly increasing")
        if any(k.P < 0 for k in self.kicks):
            raise ConfigError("sub-kick strengths must be nonnegative")
        if any(not k.fwhm > 0 for k in self.kicks):
            raise ConfigError("sub-kick FWHM must be positive")

    @property
    def total_P(self):
        return math.fsum(k.P for k in self.kicks)

    @property
    def times(self):
        return np.array([k.t for k in self.kicks])

    @property
    def strengths(self):
        return np.array([k.P for k in self.kicks])

    def __len__(self):
        return len(self.kicks)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "t_ps", "P", "fwhm_ps"])
            for k in self.kicks:
                writer.writerow([k.n, f"{k.t:.12g}", f"{k.P:.12g}", f"{k.fwhm:.12g}"])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        kicks = [
            SubKick(int(r["n"]), float(r["t_ps"]), float(r["P"]), float(r["fwhm_ps"]))
            for r in rows
        ]
        return cls(tuple(kicks))


def single_kick(P, t=0.0, fwhm=0.5):
    return KickSequence((SubKick(0, t, P, fwhm),))


def retained_bessel_weight(A, n_max):
    """``sum_{|n| <= n_max} J_n(A)**2``; tends to 1 as ``n_max`` grows."""
    n = np.arange(-n_max, n_max + 1)
    return float(math.fsum(jv(n, A) ** 2))


def bessel_train(mod, total_P, n_max=3, pulse_fwhm=0.5, allow_truncation=False):
    """Impulsive train implied by the Bessel expansion of the phase mask.

    Sub-kick ``n`` sits at ``n*tau`` and carries ``total_P*J_n(A)**2`` divided
    by the retained weight, so the sequence total is exactly ``total_P``.
    Orders with ``J_n(A) == 0`` exactly (all ``n != 0`` at ``A = 0``) are
    dropped.

    Raises
    ------
    ConfigError
        If the retained Bessel weight is below 0.9 and ``allow_truncation``
        is not set.
    """
    if total_P < 0:
        raise ConfigError(f"total kick strength must be >= 0, got {total_P}")
    if n_max < 0:
        raise ConfigError(f"n_max must be >= 0, got {n_max}")
    n = np.arange(-n_max, n_max + 1)
    weights = jv(n, mod.A) ** 2
    retained = float(math.fsum(weights))
    if retained < 0.9 and not allow_truncation:
        raise ConfigError(
            f"n_max={n_max} keeps only {retained:.3f} of the Bessel weight at A={mod.A}; "
            "raise n_max or pass allow_truncation=True"
        )
    kicks = [
        SubKick(int(k), float(k * mod.tau), float(total_P * w / retained), pulse_fwhm)
        for k, w in zip(n, weights)
        if w != 0.0
    ]
    return KickSequence(tuple(kicks), retained_fraction=retained)


# --------------------------------------------------------------------------
# Fourier synthesis


def _time_axis(n_samples, dt):
    return (np.arange(n_samples) - n_samples // 2) * dt


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex spectral amplitude on a uniform detuning grid.

    ``omega`` is the detuning from the carrier ``omega0`` (both rad/ps). The
    conjugate time grid is centred: ``t_k = (k - N//2) * dt`` with
    ``dt = 2*pi / (N * domega)``.
    """

    omega: np.ndarray
    amplitude: np.ndarray
    omega0: float

    def __post_init__(self):
        if self.omega.shape != self.amplitude.shape or self.omega.ndim != 1:
            raise ConfigError("spectrum grid and amplitude must be 1-D arrays of equal length")
        steps = np.diff(self.omega)
        if len(steps) == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise GridError("spectrum requires a uniform frequency grid")

    @property
    def domega(self):
        return float(self.omega[1] - self.omega[0])

    @property
    def dt(self):
        return 2.0 * math.pi / (len(self.omega) * self.domega)

    @property
    def omega_abs(self):
        return self.omega0 + self.omega

    def energy(self):
        """``(1/2pi) int |S|^2 dW``, equal to ``int |e|^2 dt`` by Parseval."""
        return float(np.sum(np.abs(self.amplitude) ** 2) * self.domega / (2.0 * math.pi))


def gaussian_spectrum(
    tl_fwhm=0.15,
    stretched_fwhm=None,
    center_wavelength=800.0,
    n_samples=2**15,
    dt=0.01,
):
    """Spectrum of a Gaussian pulse, optionally linearly chirped.

    ``tl_fwhm`` is the transform-limited intensity FWHM (ps).  If
    ``stretched_fwhm`` is given, quadratic spectral phase stretches the pulse
    to that intensity FWHM without changing the bandwidth.  The
    transform-limited time-domain peak amplitude is 1.
    """
    if not tl_fwhm > 0:
        raise ConfigError("tl_fwhm must be positive")
    domega = 2.0 * math.pi / (n_samples * dt)
    omega = (np.arange(n_samples) - n_samples // 2) * domega
    # e(t) = exp(-2 ln2 t^2 / T^2)  <->  S(W) = T sqrt(pi/(2 ln2)) exp(-W^2 T^2 / (8 ln2))
    ln2 = math.log(2.0)
    amp = tl_fwhm * math.sqrt(math.pi / (2.0 * ln2)) * np.exp(-(omega**2) * tl_fwhm**2 / (8.0 * ln2))
    if stretched_fwhm is not None:
        ratio = stretched_fwhm / tl_fwhm
        if ratio < 1:
            raise ConfigError("stretched_fwhm must be >= tl_fwhm")
        gdd = math.sqrt(ratio**2 - 1.0) * tl_fwhm**2 / (4.0 * ln2)
        amp = amp * np.exp(0.5j * gdd * omega**2)
    return Spectrum(omega=omega, amplitude=amp.astype(complex), omega0=float(wavelength_to_omega(center_wavelength)))


@dataclass(frozen=True)
class ShaperModel:
    """Pixelated 4f phase shaper, pixels uniform in wavelength."""

    pixel_count: int = 640
    resolution: float = 0.04
    center_wavelength: float = 800.0

    def __post_init__(self):
        if self.pixel_count <= 0:
            raise ConfigError("pixel_count must be positive")
        if not self.resolution > 0:
            raise ConfigError("resolution must be positive")

    @property
    def pixel_wavelengths(self):
        k = np.arange(self.pixel_count)
        return self.center_wavelength + (k - (self.pixel_count - 1) / 2.0) * self.resolution

    @property
    def window(self):
        """Wavelength edges (nm) of the active aperture."""
        half = self.pixel_count * self.resolution / 2.0
        return self.center_wavelength - half, self.center_wavelength + half

    def pixel_index(self, omega_abs):
        """Pixel hit by each absolute frequency, ``-1`` outside the window."""
        lam = 2.0 * math.pi * C_NM_PER_PS / np.asarray(omega_abs, dtype=float)
        lo, _ = self.window
        idx = np.floor((lam - lo) / self.resolution).astype(int)
        idx[(idx < 0) | (idx >= self.pixel_count)] = -1
        return idx


def check_delay_range(spectrum, mod):
    """Raise GridError if ``mod`` shifts significant energy beyond the time window."""
    n = 0
    while jv(n + 1, mod.A) ** 2 >= ORDER_WEIGHT_FLOOR or n + 1 <= mod.A:
        n += 1
    half_window = 0.5 * len(spectrum.omega) * spectrum.dt
    if n * mod.tau >= 0.9 * half_window:
        raise GridError(
            f"delay {n}*tau = {n * mod.tau:.4g} ps does not fit in the +-{half_window:.4g} ps "
            "time window; refine the frequency grid"
        )


def apply_spectral_phase(spectrum, mod, shaper=None):
    """Multiply the spectrum by ``exp(i*phi)`` from the sinusoidal mask.

    With ``shaper=None`` the phase is evaluated at every spectral sample.
    With a :class:`ShaperModel` the phase is constant across each pixel and
    equal to its value at the pixel's centre wavelength.

    Raises
    ------
    ShaperWindowError
        If spectral intensity above ``SHAPER_WINDOW_THRESHOLD`` of the peak
        falls outside the pixel window.
    GridError
        If the delays ``n*tau`` of orders carrying more than
        ``ORDER_WEIGHT_FLOOR`` of the energy do not fit in the conjugate
        time window (they would alias).
    """
    if mod.A == 0:
        return spectrum
    check_delay_range(spectrum, mod)
    if shaper is None:
        phi = mod.phase(spectrum.omega_abs, spectrum.omega0)
    else:
        idx = shaper.pixel_index(spectrum.omega_abs)
        power = np.abs(spectrum.amplitude) ** 2
        outside = (idx < 0) & (power > SHAPER_WINDOW_THRESHOLD * power.max())
        if np.any(outside):
            raise ShaperWindowError(
                "input spectrum extends beyond the shaper pixel window "
                f"{shaper.window[0]:.2f}-{shaper.window[1]:.2f} nm"
            )
        pixel_phase = mod.phase(wavelength_to_omega(shaper.pixel_wavelengths), spectrum.omega0)
        phi = np.where(idx >= 0, pixel_phase[np.clip(idx, 0, None)], 0.0)
    return replace(spectrum, amplitude=spectrum.amplitude * np.exp(1j * phi))


@dataclass(frozen=True, eq=False)
class FieldEnvelope:
    """Slowly varying field envelope on a uniform time grid.

    ``samples`` are in arbitrary units; ``peak_intensity`` (W/cm^2) is the
    cycle-averaged intensity where ``|samples|`` is largest.
    """

    time: np.ndarray
    samples: np.ndarray
    peak_intensity: float = 1.0

    def __post_init__(self):
        if self.time.ndim != 1 or self.time.shape != self.samples.shape:
            raise ConfigError("time grid and samples must be 1-D arrays of equal length")
        if len(self.time) < 3:
            raise GridError("envelope needs at least 3 samples")
        steps = np.diff(self.time)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0) or steps[0] <= 0:
            raise GridError("envelope time grid must be uniform and increasing")
        if self.peak_intensity < 0:
            raise ConfigError("peak intensity must be nonnegative")

    def boundary_level(self):
        """Largest edge-sample intensity relative to the peak."""
        power = np.abs(self.samples) ** 2
        peak = power.max()
        return 0.0 if peak == 0 else float(max(power[0], power[-1]) / peak)

    def check_support(self, threshold=SUPPORT_THRESHOLD):
        if self.boundary_level() >= threshold:
            raise GridError(
                "envelope does not decay to the grid boundary; "
                "the time window is too short for this signal"
            )

    @property
    def dt(self):
        return float(self.time[1] - self.time[0])

    @property
    def intensity(self):
        """Intensity in W/cm^2 at every sample."""
        power = np.abs(self.samples) ** 2
        peak = power.max()
        if peak == 0:
            return np.zeros_like(power)
        return self.peak_intensity * power / peak

    def energy(self):
        """``int |e|^2 dt`` in sample units."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.dt)

    def window(self, t_lo, t_hi):
        sel = (self.time >= t_lo) & (self.time < t_hi)
        return self.time[sel], self.samples[sel]

    def with_kick_strength(self, P, delta_alpha):
        """Copy with ``peak_intensity`` rescaled so the total kick is ``P``."""
        current = kick_strength(self, delta_alpha)
        if current == 0:
            if P == 0:
                return self
            raise ConfigError("cannot scale a zero field to a nonzero kick strength")
        return replace(self, peak_intensity=self.peak_intensity * P / current)

    def to_csv(self, path):
        inten = self.intensity
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_ps", "re", "im", "intensity"])
            for t, s, i in zip(self.time, self.samples, inten):
                writer.writerow([f"{t:.12g}", f"{s.real:.12g}", f"{s.imag:.12g}", f"{i:.12g}"])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        samples = data[:, 1] + 1j * data[:, 2]
        return cls(time=data[:, 0], samples=samples, peak_intensity=float(data[:, 3].max()))


def synthesize_time_domain(spectrum, peak_intensity=1.0, check_support=True):
    """Inverse Fourier transform of a spectrum onto its conjugate time grid.

    Energy is conserved exactly in the discrete sense (Parseval).  With
    ``check_support`` a :class:`GridError` is raised when the field has not
    decayed at the window edges, i.e. the train delays exceed the
    representable range ``2*pi/domega``.  Pixelated masks scatter a weak
    broadband background over the whole window, so shaper-mode synthesis
    has to skip the check.
    """
    n = len(spectrum.omega)
    dt = spectrum.dt
    samples = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(spectrum.amplitude))) / (n * dt)
    env = FieldEnvelope(time=_time_axis(n, dt), samples=samples, peak_intensity=peak_intensity)
    if check_support:
        env.check_support()
    return env


def to_spectrum(envelope, omega0):
    """Forward transform, the inverse of :func:`synthesize_time_domain`."""
    n = len(envelope.time)
    if abs(envelope.time[n // 2]) > 1e-9 * envelope.dt:
        raise GridError("forward transform requires a centred time grid (t=0 at index N//2)")
    dt = envelope.dt
    amp = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(envelope.samples))) * n * dt
    domega = 2.0 * math.pi / (n * dt)
    omega = (np.arange(n) - n // 2) * domega
    return Spectrum(omega=omega, amplitude=amp, omega0=omega0)


def gaussian_envelope(P, fwhm, delta_alpha, t_center=0.0, dt=None, half_width=4.0):
    """Gaussian-intensity pulse with its intensity calibrated to kick ``P``."""
    if dt is None:
        dt = fwhm / 64.0
    n_half = int(math.ceil(half_width * fwhm / dt))
    t = t_center + np.arange(-n_half, n_half + 1) * dt
    samples = np.exp(-((t - t_center) ** 2) / (4.0 * (fwhm * FWHM_TO_SIGMA) ** 2)).astype(complex)
    env = FieldEnvelope(time=t, samples=samples, peak_intensity=1.0)
    if P == 0:
        return replace(env, samples=np.zeros_like(samples), peak_intensity=0.0)
    return env.with_kick_strength(P, delta_alpha)


def train_envelope(train, delta_alpha, dt=None, half_width=4.0):
    """Sum of Gaussian sub-pulses reproducing a KickSequence in intensity."""
    fwhm_min = min(k.fwhm for k in train.kicks)
    if dt is None:
        dt = fwhm_min / 64.0
    t_lo = train.kicks[0].t - half_width * max(k.fwhm for k in train.kicks)
    t_hi = train.kicks[-1].t + half_width * max(k.fwhm for k in train.kicks)
    t = t_lo + np.arange(int(math.ceil((t_hi - t_lo) / dt)) + 1) * dt
    inten = np.zeros_like(t)
    for k in train.kicks:
        sigma = k.fwhm * FWHM_TO_SIGMA
        profile = np.exp(-((t - k.t) ** 2) / (2.0 * sigma**2))
        inten += k.P * profile / (KICK_COEFF * delta_alpha * sigma * math.sqrt(2.0 * math.pi))
    peak = inten.max()
    samples = np.sqrt(inten / peak if peak > 0 else inten).astype(complex)
    return FieldEnvelope(time=t, samples=samples, peak_intensity=float(peak))


# --------------------------------------------------------------------------
# Kick strength


def kick_rate(envelope, delta_alpha):
    """Instantaneous kick rate ``delta_alpha * eps(t)^2 / (4 hbar)`` in 1/ps."""
    return KICK_COEFF * delta_alpha * envelope.intensity


def kick_strength(envelope, delta_alpha):
    """Dimensionless kick ``P = delta_alpha/(4 hbar) * int eps^2 dt``.

    ``delta_alpha`` is in cubic angstrom and the envelope's intensity scale
    in W/cm^2.
    """
    return float(np.trapezoid(kick_rate(envelope, delta_alpha), envelope.time))


def train_kick_strengths(envelope, delta_alpha, centers):
    """Split an envelope at midpoints between ``centers`` and integrate each part.

    Returns the per-pulse kick strengths and their sum.
    """
    centers = np.asarray(centers, dtype=float)
    rate = kick_rate(envelope, delta_alpha)
    mids = (centers[1:] + centers[:-1]) / 2.0
    edges = np.concatenate([[-np.inf], mids, [np.inf]])
    dt = envelope.dt
    per = np.array([
        np.sum(rate[(envelope.time >= lo) & (envelope.time < hi)]) * dt
        for lo, hi in zip(edges[:-1], edges[1:])
    ])
    return per, float(per.sum())


def pulse_amplitudes(envelope, centers, reference_energy, half_width):
    """Field amplitude of each sub-pulse from its share of the energy.

    Energy is collected within ``half_width`` of each centre.  For a train
    made from an input pulse of energy ``reference_energy`` these are
    ``|J_n(A)|``.
    """
    power = np.abs(envelope.samples) ** 2
    out = []
    for c in np.asarray(centers, dtype=float):
        sel = np.abs(envelope.time - c) < half_width
        out.append(math.sqrt(np.sum(power[sel]) * envelope.dt / reference_energy))
    return np.array(out)


def pulse_deviation(envelope, reference, centers, half_width):
    """RMS field difference in each sub-pulse window.

    All windows share one normalisation, the RMS of the strongest reference
    window, so weak pulses are not inflated by their own small amplitude.
    """
    diffs, refs = [], []
    for c in np.asarray(centers, dtype=float):
        sel = np.abs(reference.time - c) < half_width
        diffs.append(np.sqrt(np.mean(np.abs(envelope.samples[sel] - reference.samples[sel]) ** 2)))
        refs.append(np.sqrt(np.mean(np.abs(reference.samples[sel]) ** 2)))
    return np.array(diffs) / max(refs)


def shaped_train(mod, shaper=None, tl_fwhm=0.15, stretched_fwhm=0.5,
                 center_wavelength=800.0, n_samples=2**15, dt=0.01):
    """Synthesize the time-domain train for a modulation, ideal or pixelated."""
    spec = gaussian_spectrum(tl_fwhm, stretched_fwhm, center_wavelength, n_samples, dt)
    shaped = apply_spectral_phase(spec, mod, shaper)
    return synthesize_time_domain(shaped, check_support=shaper is None), spec
