"""Config parsing, sweep drivers, and CSV contract."""

from dataclasses import replace

import numpy as np
import pytest

from risloc.harness import (
    BOUNDS_COLUMNS,
    CALIBRATION_COLUMNS,
    RMSE_COLUMNS,
    ConfigError,
    ExperimentConfig,
    fast_preset,
    load_config,
    read_csv,
    run_bounds_sweep,
    run_calibration_demo,
    run_rmse_sweep,
    summarize_run,
    write_csv,
    _trial_rng,
)

SAMPLE = """
[geometry]
rows = 8
cols = 8
spacing_wavelengths = 0.5
carrier_hz = 28e9

[scene]
p_bs = [-0.25, 0.20, 0.35]
p_ue = [0.10, 0.08, 0.25]
gain_abs = 0.9
gain_phase = 0.7

[amplitude]
beta_min = 0.5
kappa = 1.5
phi = 0.8

[protocol]
transmissions = 24
symbol_energy = 1.0
snr_db = [20.0, 40.0]

[sweep]
variable = "snr"

[run]
trials = 2
master_seed = 3
schedule_seed = 11
profile_realizations = 2
scenarios = ["mismatched", "known"]

[estimator]
order = 10
i_max = 4

[estimator.grids]
elevation_points = 41
azimuth_points = 60
distance_points = 40
"""


@pytest.fixture
def sample_path(tmp_path):
    path = tmp_path / "sample.toml"
    path.write_text(SAMPLE)
    return path


def _mini(**overrides):
    base = dict(
        rows=8, cols=8, transmissions=24, snr_db=(20.0,), sweep="snr",
        p_ue=(0.10, 0.08, 0.25), p_bs=(-0.25, 0.20, 0.35),
        trials=2, profile_realizations=2, order=None, master_seed=3,
        beta_min=0.5, kappa=1.5, phi=0.8)
    base.update(overrides)
    return ExperimentConfig(**base)


def test_load_config_covers_all_sections(sample_path):
    cfg = load_config(sample_path)
    assert cfg.rows == 8 and cfg.cols == 8
    assert cfg.p_ue == (0.10, 0.08, 0.25)
    assert cfg.gain == pytest.approx(0.9 * np.exp(0.7j))
    assert cfg.zeta.beta_min == 0.5 and cfg.zeta.kappa == 1.5
    assert cfg.transmissions == 24
    assert cfg.snr_db == (20.0, 40.0)
    assert cfg.scenarios == ("mismatched", "known")
    assert cfg.order == 10 and cfg.i_max == 4
    assert cfg.grids.elevation_points == 41
    assert cfg.grids.distance_points == 40


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[geometry]\nrows = 8\nbogus = 1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_config(path)


def test_load_config_rejects_unknown_section(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigError, match="nonsense"):
        load_config(path)


def test_load_config_rejects_malformed_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[geometry\nrows = ")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_validation():
    with pytest.raises(ConfigError):
        _mini(trials=0)
    with pytest.raises(ConfigError):
        _mini(sweep="voltage")
    with pytest.raises(ConfigError):
        _mini(scenarios=("psychic",))
    with pytest.raises(ConfigError):
        _mini(snr_db=())
    # a 3 m range is far outside the near field of an 8x8 surface
    with pytest.raises(ConfigError, match="near field"):
        _mini(p_ue=(2.0, 2.0, 1.0))


def test_fast_preset_scales_scene():
    cfg = fast_preset(ExperimentConfig())
    assert (cfg.rows, cfg.cols, cfg.transmissions) == (16, 16, 50)
    assert cfg.trials <= 20
    assert cfg.order is None  # falls back to the aperture formula


def test_content_hash_tracks_fields():
    a, b = _mini(), _mini()
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != _mini(master_seed=4).content_hash()


def test_trial_streams_are_independent():
    draws = {
        (i, t): _trial_rng(3, i, t).standard_normal(4).tobytes()
        for i in range(2) for t in range(3)
    }
    assert len(set(draws.values())) == len(draws)
    # same coordinates, same stream
    assert _trial_rng(3, 1, 2).standard_normal(4).tobytes() == draws[(1, 2)]


def test_bounds_sweep_rows_and_scenarios():
    cfg = _mini(sweep="beta_min", sweep_values=(0.4, 1.0),
                snr_db=(20.0,), scenarios=("known",))
    rows = run_bounds_sweep(cfg)
    assert [r.sweep_value for r in rows] == [0.4, 1.0]
    for r in rows:
        assert r.crb_known > 0
        assert np.isnan(r.mcrb_pos)  # scenario not requested
        assert r.n_profiles == 2


def test_bounds_sweep_matched_endpoint_joins_scenarios():
    # at a unit floor the mismatched machinery must agree with the known-model
    # bound on every schedule realization
    cfg = _mini(sweep="beta_min", sweep_values=(1.0,), snr_db=(20.0,),
                scenarios=("known", "mismatched"))
    row = run_bounds_sweep(cfg)[0]
    assert row.n_failed == 0
    assert row.bias_pos < 1e-7
    assert row.mcrb_pos == pytest.approx(row.crb_known, rel=1e-6)
    assert row.lb_pos == pytest.approx(row.crb_known, rel=1e-6)


def test_rmse_sweep_columns_and_determinism(tmp_path):
    cfg = _mini(snr_db=(30.0,), scenarios=("mismatched", "known"))
    rows1 = run_rmse_sweep(cfg)
    rows2 = run_rmse_sweep(cfg)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, rows1, RMSE_COLUMNS)
    write_csv(p2, rows2, RMSE_COLUMNS)
    assert p1.read_bytes() == p2.read_bytes()
    schema, parsed = read_csv(p1)
    assert schema == 1
    assert list(parsed[0].keys()) == list(RMSE_COLUMNS)
    row = rows1[0]
    assert row.trials == 2 and row.fail_mismatched == 0
    for value in (row.rmse_known, row.rmse_mismatched, row.lb_pos,
                  row.crb_known):
        assert np.isfinite(value) and value > 0
    assert row.se_known > 0
    assert np.isnan(row.rmse_calibrated)  # scenario not requested


def test_rmse_differs_across_seeds():
    cfg = _mini(snr_db=(30.0,), scenarios=("known",))
    r1 = run_rmse_sweep(cfg)[0]
    r2 = run_rmse_sweep(replace(cfg, master_seed=cfg.master_seed + 1))[0]
    assert r1.rmse_known != r2.rmse_known


def test_calibration_demo_layout_and_determinism():
    cfg = _mini(snr_db=(40.0,), scenarios=("calibrated",))
    rows1 = run_calibration_demo(cfg)
    rows2 = run_calibration_demo(cfg)
    assert rows1 == rows2
    assert rows1[0]["iteration"] == 0
    assert rows1[0]["beta_min"] == 1.0  # starts from the unit profile
    iters = [r["iteration"] for r in rows1]
    assert iters == sorted(iters)
    assert set(rows1[0]) == set(CALIBRATION_COLUMNS)


def test_summary_totals():
    cfg = _mini(snr_db=(20.0,), scenarios=("known",))
    rows = run_bounds_sweep(cfg)
    summary = summarize_run(cfg, rows, "bounds")
    assert summary["rows"] == len(rows)
    assert summary["config_hash"] == cfg.content_hash()
    assert summary["config"]["rows"] == 8
    assert summary["wall_time_s"] >= 0.0


def test_bounds_columns_exclude_wall_time():
    assert "wall_time_s" not in BOUNDS_COLUMNS
    assert "wall_time_s" not in RMSE_COLUMNS
