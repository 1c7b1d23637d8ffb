from dataclasses import replace

import numpy as np
import pytest

from rotkick import N2_14, N2_15, ConfigError, MoleculeSpec, ScanConfig, compare_species, emit_heatmap
from rotkick import fractional_scan, run_scan, thermal_ensemble
from rotkick.pulse_train import kick_strength
from rotkick.scan import build_train, read_scan_csv, scan_columns

BASE = """\
species = 14N2
A = 2.5
period_start = 8.30
period_stop = 8.46
period_step = 0.04
"""


def read_pgm(path):
    raw = path.read_bytes()
    parts = raw.split(b"\n", 3)
    assert parts[0] == b"P5"
    w, h = map(int, parts[1].split())
    assert parts[2] == b"255"
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w)


# ---------------------------------------------------------------- config


def test_config_parsing(tmp_cfg):
    cfg = ScanConfig.from_file(tmp_cfg(BASE + "temperature = 5\npulse_model = finite\nallow_truncation = yes\n"))
    assert cfg.species == (N2_14,)
    assert cfg.temperature == 5.0 and cfg.pulse_model == "finite" and cfg.allow_truncation
    np.testing.assert_allclose(cfg.periods, [8.30, 8.34, 8.38, 8.42, 8.46])
    assert cfg.J_report == 7 and cfg.J_max == 40 and cfg.n_max == 3


def test_species_file_in_config(tmp_cfg, tmp_path):
    (tmp_path / "heavy.species").write_text(
        "name = heavy\nB_cm1 = 1.0\ndelta_alpha_A3 = 1.0\nweight_even = 1\nweight_odd = 1\n"
    )
    cfg = ScanConfig.from_file(tmp_cfg(BASE.replace("14N2", "14N2, heavy.species")))
    assert [s.name for s in cfg.species] == ["14N2", "heavy"]


@pytest.mark.parametrize(
    "text",
    [
        BASE.replace("A = 2.5\n", ""),
        BASE.replace("species = 14N2\n", ""),
        BASE + "colour = blue\n",
        BASE + "n_max = three\n",
        BASE + "pulse_model = laser\n",
        BASE + "temperature = -1\n",
        BASE.replace("period_stop = 8.46", "period_stop = 8.0"),
        BASE.replace("period_step = 0.04", "period_step = 0"),
        BASE + "J_report = 50\n",
        BASE + "allow_truncation = maybe\n",
        BASE.replace("14N2", "14N2, 15N2, 14N2"),
        BASE.replace("14N2", "nonesuch"),
    ],
)
def test_bad_configs(tmp_cfg, text):
    with pytest.raises(ConfigError):
        ScanConfig.from_file(tmp_cfg(text))


def test_config_hash(tmp_cfg):
    a = ScanConfig.from_file(tmp_cfg(BASE, "a.cfg"))
    b = ScanConfig.from_file(tmp_cfg("# same content, different layout\n" + BASE + "output_dir = elsewhere\n", "b.cfg"))
    assert a.config_hash == b.config_hash
    assert replace(a, total_P=6.0).config_hash != a.config_hash
    assert replace(a, pulse_model="finite").config_hash != a.config_hash
    assert len(a.config_hash) == 64


# ---------------------------------------------------------------- run_scan


def test_zero_strength_scan(tmp_cfg, tmp_path):
    cfg = ScanConfig.from_file(tmp_cfg(BASE + "total_P = 0\n"))
    scan = run_scan(cfg, output_dir=tmp_path / "out")
    thermal = thermal_ensemble(N2_14, 6.3).level_populations(40)
    for row in scan.populations:
        np.testing.assert_array_equal(row, thermal)
    np.testing.assert_array_equal(scan.energy, 0.0)
    np.testing.assert_array_equal(scan.energy_normalized, 0.0)
    assert scan.resonance_period is None


def test_scan_files(tmp_cfg, tmp_path):
    cfg = ScanConfig.from_file(tmp_cfg(BASE))
    out = tmp_path / "out"
    scan = run_scan(cfg, output_dir=out)
    for name in ("scan.csv", "scan_normalized.csv"):
        lines = (out / name).read_text().splitlines()
        assert lines[0].startswith("# rotkick") and f"config_sha256={cfg.config_hash}" in lines[0]
        assert lines[1].split(",") == scan_columns(7)
        assert lines[1] == "period_ps,detuning,energy_cm1,energy_norm,S0,S1,S2,S3,S4,S5,S6,S7"
        assert len(lines) == 2 + len(cfg.periods)
    assert (out / "ensemble.csv").exists()
    row = (out / "scan.csv").read_text().splitlines()[2].split(",")
    assert float(row[0]) == 8.3
    assert float(row[2]) == float(f"{scan.energy[0]:.12g}")
    back = read_scan_csv(out / "scan.csv")
    np.testing.assert_allclose(back.reported, scan.reported, rtol=1e-11)
    assert back.resonance_period == scan.resonance_period
    assert back.species == "14N2"
    norm = read_scan_csv(out / "scan_normalized.csv")
    np.testing.assert_allclose(norm.populations.max(axis=0), 1.0, rtol=1e-11)


def test_j_report_changes_schema(tmp_cfg, tmp_path):
    cfg = ScanConfig.from_file(tmp_cfg(BASE + "J_report = 3\n"))
    run_scan(cfg, output_dir=tmp_path)
    assert (tmp_path / "scan.csv").read_text().splitlines()[1].endswith(",S2,S3")


def test_byte_identical_across_runs_and_workers(tmp_cfg, tmp_path):
    cfg = ScanConfig.from_file(tmp_cfg(BASE))
    run_scan(cfg, workers=1, output_dir=tmp_path / "a")
    run_scan(cfg, workers=1, output_dir=tmp_path / "b")
    run_scan(cfg, workers=3, output_dir=tmp_path / "c")
    for name in ("scan.csv", "scan_normalized.csv", "ensemble.csv"):
        ref = (tmp_path / "a" / name).read_bytes()
        assert (tmp_path / "b" / name).read_bytes() == ref
        assert (tmp_path / "c" / name).read_bytes() == ref


def test_output_dir_resolution(tmp_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("ROTKICK_OUTPUT_DIR", str(tmp_path / "env"))
    cfg = ScanConfig.from_file(tmp_cfg(BASE))
    run_scan(cfg)
    assert (tmp_path / "env" / "scan.csv").exists()
    run_scan(replace(cfg, output_dir=str(tmp_path / "cfg")))
    assert (tmp_path / "cfg" / "scan.csv").exists()


def test_finite_mode_scan(tmp_cfg):
    cfg = ScanConfig.from_file(tmp_cfg(BASE.replace("period_step = 0.04", "period_step = 0.08") + "pulse_model = finite\n"))
    scan = run_scan(cfg, write=False)
    assert scan.mode == "finite"
    assert np.all(np.abs(scan.populations.sum(axis=1) - 1.0) < 1e-8)
    imp = run_scan(replace(cfg, pulse_model="impulsive"), write=False)
    # 0.5 ps pulses are visibly non-impulsive but excite the same resonance
    assert np.max(np.abs(scan.populations - imp.populations)) > 1e-3
    assert np.all(scan.energy > 0)


def test_shaper_train_calibration():
    cfg = ScanConfig(species=(N2_14,), A=2.5, period_start=8.0, period_stop=9.0, pulse_model="shaper")
    env = build_train(cfg, N2_14, 8.4)
    assert kick_strength(env, N2_14.delta_alpha) == pytest.approx(7.0, rel=1e-12)
    assert env.time[0] >= -3.5 * 8.4 - 1e-9 and env.time[-1] <= 3.5 * 8.4 + 1e-9


# ---------------------------------------------------------------- compare


def test_compare_identical_species(tmp_path):
    cfg = ScanConfig(species=(N2_14, N2_14), A=2.5, period_start=8.3, period_stop=8.5, period_step=0.1)
    cmp = compare_species(cfg, output_dir=tmp_path)
    np.testing.assert_array_equal(cmp.ratio, 1.0)
    assert all(row[4] == 1.0 for row in cmp.table)
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert lines[1] == "period_ps,energy1_cm1,energy2_cm1,ratio"
    assert (tmp_path / "selectivity.csv").read_text().splitlines()[1].startswith("resonant_species,period_ps")


def test_compare_swap_inverts_ratio():
    kw = dict(A=2.5, period_start=8.3, period_stop=9.1, period_step=0.2)
    ab = compare_species(ScanConfig(species=(N2_14, N2_15), **kw), write=False)
    ba = compare_species(ScanConfig(species=(N2_15, N2_14), **kw), write=False)
    np.testing.assert_allclose(ab.ratio * ba.ratio, 1.0, rtol=1e-15)
    assert [r[0] for r in ab.table] == ["14N2", "15N2"]
    for r1, r2 in zip(ab.table, reversed(ba.table)):
        assert r1[4] * r2[4] == pytest.approx(1.0, rel=1e-15)


def test_compare_needs_two_species():
    with pytest.raises(ConfigError):
        compare_species(ScanConfig(species=(N2_14,), A=2.5, period_start=8, period_stop=9), write=False)


# ---------------------------------------------------------------- fractional


def test_fractional_outputs(tmp_path):
    cfg = ScanConfig(species=(N2_15,), A=2.5, period_start=6.3, period_stop=7.1, period_step=0.2)
    scan = fractional_scan(cfg, output_dir=tmp_path)
    lines = (tmp_path / "parity.csv").read_text().splitlines()
    assert lines[1] == "period_ps,even_gain,odd_gain,even_energy_cm1,odd_energy_cm1"
    assert len(lines) == 2 + 5
    assert (tmp_path / "scan.csv").exists() and (tmp_path / "scan_normalized.csv").exists()
    total = scan.extras["even_energy"] + scan.extras["odd_energy"]
    np.testing.assert_allclose(total, scan.energy, rtol=1e-12)


def test_fractional_para_species_has_no_odd_gain():
    para = MoleculeSpec("para", N2_15.B, N2_15.delta_alpha, 1.0, 0.0)
    cfg = ScanConfig(species=(para,), A=2.5, period_start=6.3, period_stop=7.1, period_step=0.2)
    scan = fractional_scan(cfg, write=False)
    np.testing.assert_array_equal(scan.extras["odd_gain"], 0.0)


# ---------------------------------------------------------------- heatmap


def _scan_from(pops):
    from rotkick import ScanResult

    pops = np.asarray(pops, dtype=float)
    n = pops.shape[0]
    return ScanResult(
        species="x", periods=8.0 + 0.01 * np.arange(n), detunings=np.zeros(n), populations=pops,
        energy=np.zeros(n), initial=np.zeros(pops.shape[1]), J_report=pops.shape[1] - 1, grid_step=0.01,
    )


def test_heatmap_constant_matrix(tmp_path):
    emit_heatmap(_scan_from(np.full((5, 3), 0.2)), tmp_path / "m.pgm")
    img = read_pgm(tmp_path / "m.pgm")
    assert img.shape == (3, 5)
    assert np.all(img == img[0, 0])
    axes = (tmp_path / "m.pgm.axes.txt").read_text()
    assert "x_axis = period_ps" in axes and "y_top = 2" in axes


def test_heatmap_single_pixel(tmp_path):
    emit_heatmap(_scan_from([[0.3]]), tmp_path / "one.pgm")
    img = read_pgm(tmp_path / "one.pgm")
    assert img.shape == (1, 1) and img[0, 0] == 255


def test_heatmap_orientation_and_ramp(tmp_path):
    pops = np.array([[0.0, 1.0], [0.5, 0.25], [1.0, 0.5]])
    pix = emit_heatmap(_scan_from(pops), tmp_path / "o.pgm")
    # top row is the highest J
    np.testing.assert_array_equal(pix, [[255, 64, 128], [0, 128, 255]])
    np.testing.assert_array_equal(read_pgm(tmp_path / "o.pgm"), pix)


def test_heatmap_revival_band(tmp_path):
    # brightest pixels of J = 4..7 line up at T_rev (J = 3 peaks on a side lobe, see test_observables)
    from rotkick import revival_time

    cfg = ScanConfig(species=(N2_14,), A=2.5, period_start=7.9, period_stop=8.9)
    scan = run_scan(cfg, output_dir=tmp_path)
    pix = emit_heatmap(read_scan_csv(tmp_path / "scan_normalized.csv"), tmp_path / "map.pgm")
    for J in range(4, 8):
        row = pix[7 - J]
        assert row.max() == 255
        assert abs(scan.periods[np.argmax(row)] - revival_time(N2_14)) <= 0.1
