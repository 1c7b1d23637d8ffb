import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotkick import N2_14, N2_15, ConfigError, MoleculeSpec, PropagationParams, ensemble_populations, thermal_ensemble
from rotkick.ensemble import ensemble_csv
from rotkick.pulse_train import PhaseModulation, bessel_train, single_kick

PARA15 = MoleculeSpec("para-15N2", N2_15.B, N2_15.delta_alpha, 1.0, 0.0)


def boltzmann_oracle(spec, T, J_top=60):
    # direct per-level evaluation, k_B in cm^-1/K
    kT = 0.695035 * T
    g = [(spec.weight_even if J % 2 == 0 else spec.weight_odd) * (2 * J + 1) * math.exp(-spec.B * J * (J + 1) / kT)
         for J in range(J_top)]
    Z = math.fsum(g)
    return np.array(g) / Z


def test_low_temperature_limit():
    ens = thermal_ensemble(N2_14, 0.05)
    assert [tuple(m) for m in ens.members] == [(0, 0, 1.0)]
    assert ens.cutoff_J == 0


def test_nitrogen_at_6p3K():
    ens = thermal_ensemble(N2_14, 6.3, cutoff_tail=1e-6)
    lv = ens.level_populations(10)
    np.testing.assert_allclose(lv[:3], [0.513, 0.311, 0.168], atol=2e-3)
    assert np.all(lv[3:] < 0.01)
    oracle = boltzmann_oracle(N2_14, 6.3)
    np.testing.assert_allclose(lv[: ens.cutoff_J + 1], oracle[: ens.cutoff_J + 1] / oracle[: ens.cutoff_J + 1].sum(),
                               rtol=1e-12)
    assert oracle[ens.cutoff_J + 1:].sum() == pytest.approx(ens.tail, rel=1e-9)
    assert ens.tail < 1e-6
    # the cutoff is minimal: one level fewer would drop too much
    assert oracle[ens.cutoff_J:].sum() >= 1e-6


@settings(max_examples=30)
@given(st.floats(min_value=0.5, max_value=300.0), st.sampled_from([N2_14, N2_15, PARA15]))
def test_ensemble_invariants(T, spec):
    ens = thermal_ensemble(spec, T)
    w = np.array([m.weight for m in ens.members])
    assert np.all(w >= 0)
    assert abs(math.fsum(w) - 1.0) < 1e-12
    assert ens.tail < 1e-6
    keys = [(m.J0, m.M0) for m in ens.members]
    assert keys == sorted(keys)
    for J0 in {m.J0 for m in ens.members}:
        ms = [m for m in ens.members if m.J0 == J0]
        assert sorted(m.M0 for m in ms) == list(range(-J0, J0 + 1))
        assert len({m.weight for m in ms}) == 1


def test_bad_temperature():
    with pytest.raises(ConfigError):
        thermal_ensemble(N2_14, 0.0)
    with pytest.raises(ConfigError):
        thermal_ensemble(N2_14, 5.0, cutoff_tail=0.0)


def test_zero_train_returns_thermal_distribution():
    ens = thermal_ensemble(N2_14, 6.3)
    train = bessel_train(PhaseModulation(2.5, 8.4), 0.0)
    res = ensemble_populations(N2_14, ens, train)
    np.testing.assert_array_equal(res.S, ens.level_populations(40))


def test_single_strong_kick():
    ens = thermal_ensemble(N2_14, 6.3)
    res = ensemble_populations(N2_14, ens, single_kick(7.0))
    assert abs(res.S.sum() - 1.0) < 1e-8
    assert np.all(res.reported > 1e-6)
    assert res.reported.shape == (8,)


def test_parity_conservation_for_para_species():
    ens = thermal_ensemble(PARA15, 6.3)
    train = bessel_train(PhaseModulation(2.5, 6.6), 7.0)
    res = ensemble_populations(PARA15, ens, train)
    assert np.all(res.S[1::2] == 0.0)


def test_truncation_changes_bounded_by_tail():
    train = bessel_train(PhaseModulation(2.5, 8.3), 7.0)
    coarse = thermal_ensemble(N2_14, 6.3, cutoff_tail=1e-3)
    fine = thermal_ensemble(N2_14, 6.3, cutoff_tail=1e-10)
    assert coarse.cutoff_J < fine.cutoff_J
    a = ensemble_populations(N2_14, coarse, train).S
    b = ensemble_populations(N2_14, fine, train).S
    assert np.max(np.abs(a - b)) <= coarse.tail / (1 - coarse.tail) + 1e-12


def test_bitwise_reproducible():
    ens = thermal_ensemble(N2_15, 6.3)
    train = bessel_train(PhaseModulation(2.5, 8.9), 7.0)
    a = ensemble_populations(N2_15, ens, train).S
    b = ensemble_populations(N2_15, ens, train).S
    assert a.tobytes() == b.tobytes()


def test_cutoff_beyond_basis_rejected():
    ens = thermal_ensemble(N2_14, 300.0)
    with pytest.raises(ConfigError):
        ensemble_populations(N2_14, ens, single_kick(1.0), PropagationParams(J_max=10))


def test_ensemble_dump(tmp_path):
    ens = thermal_ensemble(N2_14, 6.3)
    path = tmp_path / "ensemble.csv"
    ensemble_csv(ens, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "J0,M0,weight"
    assert len(lines) == len(ens.members) + 1
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data[:, 2].sum() == pytest.approx(1.0, abs=1e-10)
