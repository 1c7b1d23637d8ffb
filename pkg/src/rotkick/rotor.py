"""Rigid-rotor propagation in a single (M, parity) block.

A linearly polarized, cycle-averaged field couples ``|J, M>`` only to
``|J +- 2, M>``, so each state lives in the block ``J = j_min, j_min+2, ...``
with ``j_min`` equal to ``|M|`` or ``|M|+1``.  The field Hamiltonian is
``H(t) = B J(J+1) - u(t) cos^2(theta)`` with the kick rate
``u(t) = delta_alpha eps(t)^2 / 4`` (hbar = 1, rad/ps), so that a pulse with
``int u dt = P`` acts in the impulsive limit as ``exp(+i P cos^2(theta))``.

Every routine here works on either a single amplitude vector or on a matrix
whose columns are states; the ensemble code uses the latter to build whole
block propagators at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from rotkick.errors import BasisLeakageError, ConfigError, GridError, StepControlError
from rotkick.molecule import revival_time
from rotkick.pulse_train import FWHM_TO_SIGMA, FieldEnvelope, KickSequence, SubKick, kick_rate

SQRT3 = math.sqrt(3.0)
#: Gaussian sub-pulses are integrated over +- this many FWHM around their centre
PULSE_HALF_WINDOW = 3.5


@dataclass(frozen=True)
class PropagationParams:
    """Basis size and accuracy targets for propagation."""

    J_max: int = 40
    norm_tol: float = 1e-8
    step_control: float = 1e-10
    leakage_threshold: float = 1e-8
    max_steps: int = 200_000

    def __post_init__(self):
        if self.J_max < 0:
            raise ConfigError("J_max must be nonnegative")
        if not (self.norm_tol > 0 and self.step_control > 0 and self.leakage_threshold > 0):
            raise ConfigError("tolerances must be positive")

    def check_block(self, M):
        if abs(M) > self.J_max:
            raise ConfigError(f"|M|={abs(M)} exceeds J_max={self.J_max}")
        if self.J_max < 8 + abs(M):
            raise ConfigError(f"J_max={self.J_max} too small for |M|={abs(M)} (need >= {8 + abs(M)})")


def block_js(J_max, j_min):
    return np.arange(j_min, J_max + 1, 2)


def _block_start(J, M):
    m = abs(M)
    if J < m:
        raise ConfigError(f"J={J} is not allowed for M={M}")
    return m + ((J - m) % 2)


@dataclass(frozen=True, eq=False)
class RotorState:
    """Amplitudes ``c_J`` over one (M, parity) block, ``J = j_min, j_min+2, ...``."""

    M: int
    j_min: int
    amplitudes: np.ndarray
    J_max: int

    def __post_init__(self):
        if abs(self.M) > self.J_max:
            raise ConfigError(f"|M|={abs(self.M)} exceeds J_max={self.J_max}")
        if self.j_min not in (abs(self.M), abs(self.M) + 1):
            raise ConfigError(f"j_min must be |M| or |M|+1, got {self.j_min}")
        n = len(block_js(self.J_max, self.j_min))
        if n == 0:
            raise ConfigError("empty parity block")
        if self.amplitudes.shape != (n,):
            raise ConfigError(f"expected {n} amplitudes, got shape {self.amplitudes.shape}")

    @classmethod
    def basis(cls, J, M, J_max):
        """The pure state ``|J, M>``."""
        if abs(M) > J_max or J > J_max:
            raise ConfigError(f"|J={J}, M={M}> does not fit in J_max={J_max}")
        j_min = _block_start(J, M)
        c = np.zeros(len(block_js(J_max, j_min)), dtype=complex)
        c[(J - j_min) // 2] = 1.0
        return cls(M=M, j_min=j_min, amplitudes=c, J_max=J_max)

    @property
    def J(self):
        return block_js(self.J_max, self.j_min)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def populations(self):
        """Populations on the full ladder ``J = 0..J_max`` (zeros off-block)."""
        out = np.zeros(self.J_max + 1)
        out[self.J] = np.abs(self.amplitudes) ** 2
        return out

    def with_amplitudes(self, c):
        return RotorState(M=self.M, j_min=self.j_min, amplitudes=c, J_max=self.J_max)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """``<J, M| cos^2(theta) |J', M>`` over one parity block.

    Diagonal: ``1/3 + 2/3 (J(J+1) - 3M^2) / ((2J-1)(2J+3))``;
    off-diagonal ``J' = J+2``:
    ``sqrt(((J+1)^2 - M^2)((J+2)^2 - M^2)) / ((2J+3) sqrt((2J+1)(2J+5)))``.
    """

    M: int
    j_min: int
    J_max: int
    entries: np.ndarray

    @property
    def J(self):
        return block_js(self.J_max, self.j_min)

    @cached_property
    def eig(self):
        return np.linalg.eigh(self.entries)

    def kick_unitary(self, P):
        lam, V = self.eig
        return (V * np.exp(1j * P * lam)) @ V.T


def cos2_elements(J_max, M, j_min=None):
    """Build the cos^2(theta) block for magnetic number ``M``.

    ``j_min`` selects the parity block and defaults to ``|M|``.
    """
    m = abs(M)
    if J_max < m:
        raise ConfigError(f"J_max={J_max} < |M|={m}")
    if j_min is None:
        j_min = m
    return _coupling_block(J_max, m, j_min)


@lru_cache(maxsize=None)
def _coupling_block(J_max, m, j_min):
    J = block_js(J_max, j_min).astype(float)
    m2 = float(m * m)
    diag = 1.0 / 3.0 + (2.0 / 3.0) * (J * (J + 1) - 3.0 * m2) / ((2 * J - 1) * (2 * J + 3))
    Jl = J[:-1]
    off = np.sqrt(((Jl + 1) ** 2 - m2) * ((Jl + 2) ** 2 - m2)) / ((2 * Jl + 3) * np.sqrt((2 * Jl + 1) * (2 * Jl + 5)))
    entries = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    entries.setflags(write=False)
    return CouplingMatrix(M=m, j_min=j_min, J_max=J_max, entries=entries)


@lru_cache(maxsize=4096)
def _kick_unitary_cached(J_max, m, j_min, P):
    U = _coupling_block(J_max, m, j_min).kick_unitary(P)
    U.setflags(write=False)
    return U


def kick_unitary(J_max, M, j_min, P):
    """Cached block unitary ``exp(+i P cos^2 theta)``."""
    return _kick_unitary_cached(J_max, abs(M), j_min, float(P))


def check_leakage(amplitudes, threshold):
    """Raise if either of the two highest block states is populated.

    Works on a state vector or on a matrix of state columns.
    """
    top = np.abs(amplitudes[-2:]) ** 2
    worst = float(top.max()) if top.size else 0.0
    if worst > threshold:
        raise BasisLeakageError(
            f"population {worst:.2e} at the top of the basis exceeds {threshold:.1e}; raise J_max"
        )


def check_norm(amplitudes, tol):
    norms = np.sum(np.abs(amplitudes.reshape(len(amplitudes), -1)) ** 2, axis=0)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > tol:
        raise StepControlError(f"norm drift {drift:.2e} exceeds tolerance {tol:.1e}")


def delta_kick(state, P, leakage_threshold=1e-8):
    """Impulsive kick ``exp(+i P cos^2 theta)`` by eigendecomposition of the block."""
    if P < 0:
        raise ConfigError(f"kick strength must be >= 0, got {P}")
    if P == 0:
        return state
    U = kick_unitary(state.J_max, state.M, state.j_min, P)
    c = U @ state.amplitudes
    check_leakage(c, leakage_threshold)
    return state.with_amplitudes(c)


def free_phases(J, t, spec):
    """``exp(-i B J(J+1) t)`` with the phase reduced modulo 2 pi exactly.

    Using ``t / T_rev`` keeps ``t = T_rev`` an exact identity.
    """
    x = t / revival_time(spec)
    jj = (J * (J + 1)).astype(float)
    return np.exp(-1j * math.pi * np.fmod(jj * x, 2.0))


def free_propagate(state, t, spec):
    """Field-free evolution over ``t`` ps."""
    if t == 0:
        return state
    return state.with_amplitudes(free_phases(state.J, t, spec) * state.amplitudes)


# --------------------------------------------------------------------------
# Adaptive Magnus integrator


def _magnus_generators(E, C, u1, u2, h):
    """4th-order Magnus exponents for ``H(t) = diag(E) - u(t) C``.

    ``u1``, ``u2`` and ``h`` are arrays (one entry per step) holding the
    rates at the two Gauss-Legendre nodes and the step lengths.  Returns the
    stacked Hermitian generators ``K`` with step propagator ``exp(-i K)``.
    """
    u1 = np.asarray(u1, dtype=float)[:, None, None]
    u2 = np.asarray(u2, dtype=float)[:, None, None]
    h = np.asarray(h, dtype=float)[:, None, None]
    dE = E[:, None] - E[None, :]
    # mean Hamiltonian; [H2, H1] = (u2 - u1) [E, C]
    Hbar = np.diag(E)[None] - 0.5 * (u1 + u2) * C[None]
    return h * Hbar - 1j * (SQRT3 / 12.0) * h * h * (u2 - u1) * (dE * C)[None]


def _expm_herm(K):
    lam, V = np.linalg.eigh(K)
    return (V * np.exp(-1j * lam)[..., None, :]) @ np.swapaxes(V.conj(), -1, -2)


def integrate_tdse(Y, E, C, rate, t0, t1, tol, max_step, max_steps):
    """Propagate columns of ``Y`` from ``t0`` to ``t1`` under ``diag(E) - rate(t) C``.

    Step doubling gives the local error estimate; steps are accepted when the
    max-norm estimate is below ``tol``.  Returns the propagated array.

    Raises
    ------
    StepControlError
        When the step size collapses or ``max_steps`` is exhausted.
    """
    span = t1 - t0
    if span <= 0:
        return Y
    c_lo = 0.5 - SQRT3 / 6.0
    c_hi = 0.5 + SQRT3 / 6.0
    t = t0
    h = min(max_step, span) / 4.0
    steps = 0
    while t < t1:
        if steps >= max_steps:
            raise StepControlError(f"exceeded {max_steps} integrator steps")
        h = min(h, t1 - t, max_step)
        hh = 0.5 * h
        # full step, then the two half steps, exponentiated together
        starts = (t, t, t + hh)
        lens = (h, hh, hh)
        u1 = [rate(a + c_lo * d) for a, d in zip(starts, lens)]
        u2 = [rate(a + c_hi * d) for a, d in zip(starts, lens)]
        full, first, second = _expm_herm(_magnus_generators(E, C, u1, u2, lens))
        y_full = full @ Y
        y_half = second @ (first @ Y)
        err = float(np.max(np.abs(y_half - y_full))) / 15.0
        steps += 1
        if err <= tol:
            t += h
            Y = y_half
            factor = 4.0 if err == 0 else min(4.0, 0.9 * (tol / err) ** 0.2)
            h *= max(factor, 1.0)
        else:
            h *= max(0.2, 0.9 * (tol / err) ** 0.2)
            if h < 1e-12 * max(1.0, abs(t)):
                raise StepControlError(f"step size underflow at t={t:.6g} ps")
    return Y


def block_operators(spec, J_max, M, j_min):
    """Diagonal rotational energies (rad/ps) and the cos^2 matrix of a block."""
    cm = cos2_elements(J_max, M, j_min)
    J = cm.J
    return spec.B_angular * (J * (J + 1)).astype(float), cm.entries


def _envelope_rate(envelope, delta_alpha):
    rate = kick_rate(envelope, delta_alpha)
    t = envelope.time

    def u(x):
        return float(np.interp(x, t, rate, left=0.0, right=0.0))

    return u


def _gaussian_rate(kicks):
    params = [(k.t, k.P, k.fwhm * FWHM_TO_SIGMA) for k in kicks]

    def u(x):
        total = 0.0
        for tc, P, sigma in params:
            z = (x - tc) / sigma
            total += P * math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
        return total

    return u


def _apply_free(Y, J, t, spec):
    ph = free_phases(J, t, spec)
    return ph[:, None] * Y if Y.ndim == 2 else ph * Y


def _envelope_segments(envelope, delta_alpha, threshold):
    """Contiguous stretches where the kick rate exceeds ``threshold`` of its peak."""
    rate = kick_rate(envelope, delta_alpha)
    peak = rate.max()
    if peak == 0:
        return []
    active = rate > threshold * peak
    # pad by one sample so interpolated edges are inside a segment
    active = active | np.roll(active, 1) | np.roll(active, -1)
    active[0] = active[-1] = False
    edges = np.flatnonzero(np.diff(active.astype(int)))
    t = envelope.time
    return [(t[a], t[b + 1]) for a, b in zip(edges[::2], edges[1::2])]


def propagate_envelope_array(Y, envelope, spec, params, M, j_min, segment_threshold=1e-12):
    """Propagate ``Y`` across a sampled envelope, from its first to last sample."""
    E, C = block_operators(spec, params.J_max, M, j_min)
    J = cos2_elements(params.J_max, M, j_min).J
    u = _envelope_rate(envelope, spec.delta_alpha)
    max_step = 2.0 * envelope.dt
    t = float(envelope.time[0])
    for lo, hi in _envelope_segments(envelope, spec.delta_alpha, segment_threshold):
        Y = _apply_free(Y, J, lo - t, spec)
        Y = integrate_tdse(Y, E, C, u, lo, hi, params.step_control, max_step, params.max_steps)
        t = hi
    return _apply_free(Y, J, float(envelope.time[-1]) - t, spec)


def propagate_finite_pulse(state, envelope_segment, spec, params=PropagationParams()):
    """Integrate the TDSE across a sampled field envelope.

    The kick rate is ``delta_alpha * eps(t)^2 / 4`` from ``spec.delta_alpha``
    and the envelope intensity.  The input state refers to the first sample
    time and the result to the last one.

    Raises
    ------
    GridError
        If the envelope has fewer than 32 samples per FWHM of its strongest pulse.
    """
    _check_sampling(envelope_segment)
    Y = propagate_envelope_array(
        state.amplitudes, envelope_segment, spec, params, state.M, state.j_min
    )
    check_norm(Y, params.norm_tol)
    check_leakage(Y, params.leakage_threshold)
    return state.with_amplitudes(Y)


def _check_sampling(envelope, per_fwhm=32):
    inten = envelope.intensity
    peak = inten.max()
    if peak == 0:
        return
    # length of the half-maximum run containing the peak
    lo = hi = int(np.argmax(inten))
    while lo > 0 and inten[lo - 1] >= 0.5 * peak:
        lo -= 1
    while hi < len(inten) - 1 and inten[hi + 1] >= 0.5 * peak:
        hi += 1
    if hi - lo + 1 < per_fwhm:
        raise GridError(f"envelope has only {hi - lo + 1} samples per FWHM, need >= {per_fwhm}")


@lru_cache(maxsize=1024)
def _pulse_block_cached(spec, J_max, m, j_min, P, fwhm, tol, max_steps):
    params = PropagationParams(J_max=J_max, step_control=tol, max_steps=max_steps)
    U = gaussian_pulse_unitary(spec, params, m, j_min, P, fwhm)
    U.setflags(write=False)
    return U


def gaussian_pulse_unitary(spec, params, M, j_min, P, fwhm):
    """Block propagator of a Gaussian pulse, referenced to its centre time.

    The result is ``F(-w) U(t_c - w -> t_c + w) F(-w)`` with ``F`` the free
    propagator and ``w`` the integration half-window, so it tends to the
    impulsive kick as ``fwhm -> 0``.
    """
    E, C = block_operators(spec, params.J_max, M, j_min)
    J = cos2_elements(params.J_max, M, j_min).J
    w = PULSE_HALF_WINDOW * fwhm
    Y = np.eye(len(J), dtype=complex)
    Y = _apply_free(Y, J, -w, spec)
    u = _gaussian_rate([SubKick(0, 0.0, P, fwhm)])
    Y = integrate_tdse(Y, E, C, u, -w, w, params.step_control, fwhm / 8.0, params.max_steps)
    return _apply_free(Y, J, -w, spec)


def sub_pulse_unitary(spec, params, M, j_min, kick, mode):
    if kick.P == 0:
        return None
    if mode == "impulsive":
        return kick_unitary(params.J_max, M, j_min, kick.P)
    if mode == "finite":
        return _pulse_block_cached(
            spec, params.J_max, abs(M), j_min, float(kick.P), float(kick.fwhm),
            params.step_control, params.max_steps,
        )
    raise ConfigError(f"unknown propagation mode {mode!r}")


def _windows_overlap(train):
    for a, b in zip(train.kicks, train.kicks[1:]):
        if b.t - a.t < PULSE_HALF_WINDOW * (a.fwhm + b.fwhm):
            return True
    return False


def propagate_train_array(Y, train, spec, params, M, j_min, mode="impulsive"):
    """Apply a train to the columns of ``Y`` in one block.

    For a KickSequence the input refers to the first kick time and the
    output to the last kick time, in both modes.  For a FieldEnvelope the
    input refers to its first sample and the output to its last sample.
    """
    J = block_js(params.J_max, j_min)
    if isinstance(train, FieldEnvelope):
        return propagate_envelope_array(Y, train, spec, params, M, j_min)
    if not isinstance(train, KickSequence):
        raise ConfigError(f"unsupported train type {type(train).__name__}")
    if mode == "finite" and _windows_overlap(train):
        return _propagate_overlapping(Y, train, spec, params, M, j_min)
    t_prev = None
    for kick in train.kicks:
        if t_prev is not None:
            Y = _apply_free(Y, J, kick.t - t_prev, spec)
        U = sub_pulse_unitary(spec, params, M, j_min, kick, mode)
        if U is not None:
            Y = U @ Y
        t_prev = kick.t
    return Y


def _propagate_overlapping(Y, train, spec, params, M, j_min):
    E, C = block_operators(spec, params.J_max, M, j_min)
    J = block_js(params.J_max, j_min)
    wmax = PULSE_HALF_WINDOW * max(k.fwhm for k in train.kicks)
    t0, t1 = train.kicks[0].t, train.kicks[-1].t
    u = _gaussian_rate(train.kicks)
    Y = _apply_free(Y, J, -wmax, spec)
    fwhm_min = min(k.fwhm for k in train.kicks)
    Y = integrate_tdse(Y, E, C, u, t0 - wmax, t1 + wmax, params.step_control, fwhm_min / 8.0, params.max_steps)
    return _apply_free(Y, J, -wmax, spec)


def propagate_train(state, train, spec, params=PropagationParams(), mode="impulsive"):
    """Propagate a state through a pulse train.

    ``mode`` is ``"impulsive"`` (delta kicks) or ``"finite"`` (Gaussian
    sub-pulses of the listed FWHM integrated with the TDSE).  A FieldEnvelope
    train is always integrated as a finite field.
    """
    params.check_block(state.M)
    Y = propagate_train_array(state.amplitudes, train, spec, params, state.M, state.j_min, mode)
    check_norm(Y, params.norm_tol)
    check_leakage(Y, params.leakage_threshold)
    return state.with_amplitudes(Y)
