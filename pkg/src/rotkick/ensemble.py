"""Thermal initial ensembles and incoherent averaging over them."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from rotkick.errors import ConfigError
from rotkick.molecule import KB_CM1_PER_K, rotational_energy, spin_weight
from rotkick.observables import PopulationResult
from rotkick.pulse_train import FieldEnvelope, KickSequence
from rotkick.rotor import (
    PropagationParams,
    _block_start,
    block_js,
    check_leakage,
    check_norm,
    propagate_train_array,
)

#: levels are summed until the Boltzmann factor drops below this
_TAIL_EPS = 1e-300


class Member(NamedTuple):
    J0: int
    M0: int
    weight: float


@dataclass(frozen=True)
class ThermalEnsemble:
    """Boltzmann-weighted initial states ``|J0, M0>``, sorted by ``(J0, M0)``.

    ``tail`` is the normalised weight of the levels above ``cutoff_J`` that
    were dropped; the retained weights are renormalised to sum to one.
    """

    temperature: float
    members: tuple[Member, ...]
    cutoff_J: int
    tail: float

    def level_populations(self, J_max):
        """Per-level thermal fractions on ``J = 0..J_max``."""
        out = np.zeros(J_max + 1)
        for m in self.members:
            out[m.J0] += m.weight
        return out


def _level_log_weights(spec, T, J_limit):
    kT = KB_CM1_PER_K * T
    out = []
    for J in range(J_limit + 1):
        g = spin_weight(spec, J) * (2 * J + 1)
        out.append(-math.inf if g == 0 else math.log(g) - rotational_energy(spec, J) / kT)
    return np.array(out)


def thermal_ensemble(spec, T, cutoff_tail=1e-6):
    """Thermal ensemble with nuclear-spin weights.

    Each ``(J0, M0)`` member carries ``spin_weight(J0) exp(-B J0(J0+1)/kT)``
    (normalised); ``cutoff_J`` is the smallest level such that the weight of
    all higher levels is below ``cutoff_tail``.
    """
    if not T > 0:
        raise ConfigError(f"temperature must be positive, got {T}")
    if not 0 < cutoff_tail < 1:
        raise ConfigError("cutoff_tail must lie in (0, 1)")
    # extend the ladder until the levels are negligible on an absolute scale
    J_limit = 8
    while True:
        logw = _level_log_weights(spec, T, J_limit)
        top = logw.max()
        if logw[-1] - top < math.log(_TAIL_EPS) and logw[-2] - top < math.log(_TAIL_EPS):
            break
        J_limit *= 2
    w = np.exp(logw - logw.max())
    w /= math.fsum(w)
    tail_after = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
    cutoff_J = int(np.flatnonzero(tail_after < cutoff_tail)[0])
    kept = w[: cutoff_J + 1]
    tail = float(tail_after[cutoff_J])
    kept = kept / math.fsum(kept)
    members = []
    for J0, wJ in enumerate(kept):
        if wJ == 0:
            continue
        per_m = float(wJ) / (2 * J0 + 1)
        members.extend(Member(J0, M0, per_m) for M0 in range(-J0, J0 + 1))
    return ThermalEnsemble(temperature=float(T), members=tuple(members), cutoff_J=cutoff_J, tail=tail)


def block_key(J0, M0):
    """``(|M|, j_min)`` identifying the propagation block of ``|J0, M0>``."""
    return abs(M0), _block_start(J0, M0)


def block_propagators(train, spec, params, keys, mode="impulsive"):
    """Full block propagators for a train, one per ``(|M|, j_min)`` key."""
    out = {}
    for m, j_min in sorted(set(keys)):
        n = len(block_js(params.J_max, j_min))
        out[(m, j_min)] = propagate_train_array(
            np.eye(n, dtype=complex), train, spec, params, m, j_min, mode
        )
    return out


def ensemble_populations(spec, ensemble, train, params=PropagationParams(), mode="impulsive", J_report=7):
    """Thermally averaged level populations after a train.

    The members' results are accumulated in ``(J0, M0)`` order, so the sum
    is bit-stable.  Members that share an ``(|M|, parity)`` block reuse one
    block propagator.
    """
    if not ensemble.members:
        raise ConfigError("empty ensemble")
    if ensemble.cutoff_J > params.J_max:
        raise ConfigError(f"ensemble cutoff J={ensemble.cutoff_J} exceeds J_max={params.J_max}")
    for m in {abs(x.M0) for x in ensemble.members}:
        params.check_block(m)
    if _is_field_free(train):
        # diagonal dynamics: populations are exactly the initial ones
        return PopulationResult(S=ensemble.level_populations(params.J_max), J_report=J_report, mode=mode)
    keys = [block_key(x.J0, x.M0) for x in ensemble.members]
    props = block_propagators(train, spec, params, keys, mode)
    S = np.zeros(params.J_max + 1)
    used = defaultdict(set)
    for member, key in zip(ensemble.members, keys):
        m, j_min = key
        U = props[key]
        col = U[:, (member.J0 - j_min) // 2]
        used[key].add((member.J0 - j_min) // 2)
        S[block_js(params.J_max, j_min)] += member.weight * np.abs(col) ** 2
    for key, cols in used.items():
        sub = props[key][:, sorted(cols)]
        check_norm(sub, params.norm_tol)
        check_leakage(sub, params.leakage_threshold)
    return PopulationResult(S=S, J_report=J_report, mode=mode)


def _is_field_free(train):
    if isinstance(train, KickSequence):
        return all(k.P == 0 for k in train.kicks)
    if isinstance(train, FieldEnvelope):
        return train.peak_intensity == 0 or not np.any(train.samples)
    return False


def ensemble_csv(ensemble, path):
    with open(path, "w") as fh:
        fh.write("J0,M0,weight\n")
        for m in ensemble.members:
            fh.write(f"{m.J0},{m.M0},{m.weight:.12g}\n")
