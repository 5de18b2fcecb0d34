"""Command-line front end for sweeps, figure data, and self-checks.

Exit codes: 0 on success, 2 for an invalid configuration, 3 for a numerical
failure (a refused inversion that aborts the run, or a failed validation
property).
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bounds import IllConditionedError, fim, mcrb_matrices, pseudo_true
from .estimators import AmmlEstimator
from .jacobi import min_expansion_order
from .harness import (
    BOUNDS_COLUMNS,
    CALIBRATION_COLUMNS,
    RMSE_COLUMNS,
    ConfigError,
    ExperimentConfig,
    fast_preset,
    load_config,
    run_bounds_sweep,
    run_calibration_demo,
    run_rmse_sweep,
    summarize_run,
    write_csv,
)
from .ris import RisAmplitudeParams, beta, profile_matrix, random_phase_schedule
from .signal import ParamVector, noiseless_mean, observe, solve_noise_for_snr

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# figure data sets, named by what they show
FIGURES = (
    "amplitude-profile",
    "bounds-vs-snr",
    "bounds-vs-floor",
    "bounds-vs-shape",
    "bounds-vs-elements",
    "rmse-vs-snr",
    "rmse-vs-snr-short-schedule",
    "calibration-path",
)


def _figure_config(figure_id: str) -> tuple[str, ExperimentConfig]:
    """Built-in full-scale configuration behind each figure id."""
    base = ExperimentConfig()
    if figure_id == "bounds-vs-snr":
        return "bounds", replace(
            base, sweep="snr",
            snr_db=tuple(float(s) for s in range(-10, 45, 5)))
    if figure_id == "bounds-vs-floor":
        return "bounds", replace(
            base, sweep="beta_min", snr_db=(20.0, 30.0, 40.0))
    if figure_id == "bounds-vs-shape":
        return "bounds", replace(
            base, sweep="kappa", snr_db=(20.0, 30.0, 40.0))
    if figure_id == "bounds-vs-elements":
        return "bounds", replace(
            base, sweep="elements", beta_min=0.3, snr_db=(20.0,))
    if figure_id == "rmse-vs-snr":
        return "rmse", replace(
            base, sweep="snr", snr_db=(0.0, 10.0, 20.0, 30.0, 40.0))
    if figure_id == "rmse-vs-snr-short-schedule":
        return "rmse", replace(
            base, sweep="snr", snr_db=(0.0, 10.0, 20.0, 30.0, 40.0),
            transmissions=10, beta_min=0.7)
    if figure_id == "calibration-path":
        return "calibration", replace(base, snr_db=(20.0, 30.0, 40.0))
    raise ConfigError(f"unknown figure id {figure_id!r}; "
                      f"choose from {', '.join(FIGURES)}")


def _amplitude_profile_rows():
    """Response-versus-angle curves for three amplitude floors."""
    thetas = np.linspace(-np.pi, np.pi, 101)
    rows = []
    for floor in (0.3, 0.6, 0.9):
        zeta = RisAmplitudeParams(beta_min=floor, kappa=1.5, phi=0.0)
        values = beta(thetas, zeta)
        rows.extend(
            {"beta_min": floor, "theta_rad": float(t), "beta": float(v)}
            for t, v in zip(thetas, values))
    return rows


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.fast:
        cfg = fast_preset(cfg)
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.profile_realizations is not None:
        updates["profile_realizations"] = args.profile_realizations
    return replace(cfg, **updates) if updates else cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(out: Path, stem: str, rows, columns, cfg, command) -> None:
    csv_path = out / f"{stem}.csv"
    write_csv(csv_path, rows, columns)
    summary = summarize_run(cfg, rows, command)
    with open(out / f"{stem}.summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    print(f"wrote {csv_path} ({len(rows)} rows)")


def _run_sweep(kind: str, cfg: ExperimentConfig, out: Path, stem: str) -> None:
    if kind == "bounds":
        _emit(out, stem, run_bounds_sweep(cfg), BOUNDS_COLUMNS, cfg, kind)
    elif kind == "rmse":
        _emit(out, stem, run_rmse_sweep(cfg), RMSE_COLUMNS, cfg, kind)
    else:
        _emit(out, stem, run_calibration_demo(cfg), CALIBRATION_COLUMNS,
              cfg, kind)


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------


def _validate_scene(fast: bool):
    """Small scene with both terminals inside the radiating near field."""
    if fast:
        cfg = ExperimentConfig(
            rows=8, cols=8, transmissions=40, snr_db=(20.0,),
            p_ue=(0.10, 0.08, 0.25), p_bs=(-0.25, 0.20, 0.35),
            trials=2, profile_realizations=2, order=None,
            beta_min=0.5, kappa=1.5, phi=0.8)
    else:
        cfg = fast_preset(ExperimentConfig(snr_db=(20.0,), trials=2,
                                           profile_realizations=2))
    return cfg


def _check_config_roundtrip(cfg: ExperimentConfig, tmp: Path):
    sample = tmp / "sample.toml"
    sample.write_text(
        "[geometry]\nrows = {rows}\ncols = {cols}\n\n"
        "[scene]\np_ue = [{ue}]\np_bs = [{bs}]\n\n"
        "[amplitude]\nbeta_min = {b}\nkappa = {k}\nphi = {p}\n\n"
        "[protocol]\ntransmissions = {t}\nsnr_db = [20.0]\n\n"
        "[run]\ntrials = 2\nprofile_realizations = 2\n".format(
            rows=cfg.rows, cols=cfg.cols,
            ue=", ".join(str(v) for v in cfg.p_ue),
            bs=", ".join(str(v) for v in cfg.p_bs),
            b=cfg.beta_min, k=cfg.kappa, p=cfg.phi, t=cfg.transmissions))
    loaded = load_config(sample)
    assert loaded.rows == cfg.rows and loaded.transmissions == cfg.transmissions
    assert loaded.p_ue == tuple(cfg.p_ue)


def _check_csv_determinism(cfg: ExperimentConfig, tmp: Path):
    paths = []
    for i in range(2):
        rows = run_rmse_sweep(cfg)
        path = tmp / f"det{i}.csv"
        write_csv(path, rows, RMSE_COLUMNS)
        paths.append(path.read_bytes())
    assert paths[0] == paths[1], "same config and seed produced different CSV"


def _check_noise_scaling(cfg: ExperimentConfig, tmp: Path):
    geom = cfg.geometry()
    truth = cfg.truth()
    phases = random_phase_schedule(geom.n_elements, cfg.transmissions,
                                   cfg.schedule_seed)
    lo = fim(truth, phases, geom, cfg.p_bs, cfg.symbol_energy, 1e-4)
    hi = fim(truth, phases, geom, cfg.p_bs, cfg.symbol_energy, 1e-3)
    ratio = hi.pos_rmse_bound / lo.pos_rmse_bound
    assert abs(ratio - np.sqrt(10.0)) < 1e-9, f"scaling ratio {ratio}"


def _check_matched_collapse(cfg: ExperimentConfig, tmp: Path):
    geom = cfg.geometry()
    zeta = RisAmplitudeParams(beta_min=1.0, kappa=cfg.kappa, phi=cfg.phi)
    truth = ParamVector(gain=cfg.gain,
                        position=np.asarray(cfg.p_ue, float), zeta=zeta)
    phases = random_phase_schedule(geom.n_elements, cfg.transmissions,
                                   cfg.schedule_seed)
    true_w = profile_matrix(phases, zeta)
    model_w = profile_matrix(phases, zeta, ideal=True)
    pt = pseudo_true(truth, true_w, model_w, geom, cfg.p_bs,
                     cfg.symbol_energy)
    shift = np.linalg.norm(pt.params.position - truth.position)
    assert shift < 1e-9, f"matched projection moved by {shift}"
    noise_var = solve_noise_for_snr(20.0, truth, true_w, geom, cfg.p_bs,
                                    cfg.symbol_energy)
    rep = mcrb_matrices(pt.params, truth, true_w, model_w, geom, cfg.p_bs,
                        cfg.symbol_energy, noise_var)
    crb = fim(truth, phases, geom, cfg.p_bs, cfg.symbol_energy, noise_var)
    rel = abs(rep.mcrb_pos_rmse - crb.pos_rmse_bound) / crb.pos_rmse_bound
    assert rel < 1e-8, f"matched bound off by {rel}"


def _check_monotone_traces(cfg: ExperimentConfig, tmp: Path):
    geom = cfg.geometry()
    truth = cfg.truth()
    phases = random_phase_schedule(geom.n_elements, 12, cfg.schedule_seed)
    true_w = profile_matrix(phases, truth.zeta)
    mu = noiseless_mean(truth, true_w, geom, cfg.p_bs, cfg.symbol_energy)
    noise_var = solve_noise_for_snr(20.0, truth, true_w, geom, cfg.p_bs,
                                    cfg.symbol_energy)
    est = AmmlEstimator(geom, cfg.p_bs, phases, order=cfg.order,
                        symbol_energy=cfg.symbol_energy)
    rng = np.random.default_rng(cfg.master_seed)
    for _ in range(3):
        res = est.estimate(observe(mu, noise_var, rng))
        trace = np.asarray(res.trace)
        drops = np.diff(trace)
        assert np.all(drops <= 1e-9 * max(trace[0], 1.0)), "trace increased"


def _check_branch_consistency(cfg: ExperimentConfig, tmp: Path):
    geom = cfg.geometry()
    truth = cfg.truth()
    t = 2 * min_expansion_order(geom) + 9
    phases = random_phase_schedule(geom.n_elements, t, cfg.schedule_seed)
    true_w = profile_matrix(phases, truth.zeta)
    mu = noiseless_mean(truth, true_w, geom, cfg.p_bs, cfg.symbol_energy)
    harmonic = AmmlEstimator(geom, cfg.p_bs, phases, assumed=truth.zeta,
                             order=None, symbol_energy=cfg.symbol_energy)
    alternating = AmmlEstimator(geom, cfg.p_bs, phases, assumed=truth.zeta,
                                order=t, symbol_energy=cfg.symbol_energy)
    assert harmonic.uses_harmonic_branch
    assert not alternating.uses_harmonic_branch
    p_h = harmonic.estimate(mu).position
    p_a = alternating.estimate(mu).position
    gap = np.linalg.norm(p_h - p_a)
    assert gap < 1e-2 * np.linalg.norm(truth.position), f"branch gap {gap}"


def _check_amplitude_properties(cfg: ExperimentConfig, tmp: Path):
    thetas = np.linspace(-np.pi, np.pi, 721)
    for floor in (0.0, 0.3, 1.0):
        zeta = RisAmplitudeParams(beta_min=floor, kappa=2.0, phi=0.6)
        values = beta(thetas, zeta)
        assert np.all(values >= floor - 1e-12)
        assert np.all(values <= 1.0 + 1e-12)
        peak = beta(np.array([zeta.phi + np.pi / 2]), zeta)
        trough = beta(np.array([zeta.phi - np.pi / 2]), zeta)
        assert abs(peak[0] - 1.0) < 1e-12
        assert abs(trough[0] - floor) < 1e-12


VALIDATION_CHECKS = (
    ("config-roundtrip", _check_config_roundtrip),
    ("csv-determinism", _check_csv_determinism),
    ("noise-scaling", _check_noise_scaling),
    ("matched-collapse", _check_matched_collapse),
    ("monotone-traces", _check_monotone_traces),
    ("branch-consistency", _check_branch_consistency),
    ("amplitude-properties", _check_amplitude_properties),
)


def run_validation(fast: bool) -> int:
    cfg = _validate_scene(fast)
    failures = 0
    with tempfile.TemporaryDirectory() as scratch:
        tmp = Path(scratch)
        for name, check in VALIDATION_CHECKS:
            start = time.perf_counter()
            try:
                check(cfg, tmp)
            except AssertionError as exc:
                failures += 1
                print(f"FAIL {name}: {exc}")
            except (IllConditionedError, ValueError) as exc:
                failures += 1
                print(f"FAIL {name}: {type(exc).__name__}: {exc}")
            else:
                print(f"ok   {name} ({time.perf_counter() - start:.1f}s)")
    return failures


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, config_required: bool):
    if config_required:
        parser.add_argument("--config", required=True,
                            help="experiment description (TOML)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--trials", type=int, default=None,
                        help="override the Monte Carlo trial count")
    parser.add_argument("--out", default=".",
                        help="output directory (created if missing)")
    parser.add_argument("--profile-realizations", type=int, default=None,
                        help="override the schedule-ensemble size")
    parser.add_argument("--fast", action="store_true",
                        help="desk-scale preset: 16x16 surface, 50 "
                             "transmissions, scaled scene")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risloc",
        description="Near-field localization experiments: bounds, estimator "
                    "campaigns, and figure data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds-sweep",
                       help="theoretical bounds across a swept variable")
    _add_common(p, config_required=True)

    p = sub.add_parser("rmse-sweep",
                       help="Monte Carlo estimator errors with bound columns")
    _add_common(p, config_required=True)

    p = sub.add_parser("calibrate-demo",
                       help="per-iteration error of the amplitude calibration")
    _add_common(p, config_required=True)

    p = sub.add_parser("reproduce-figure",
                       help="emit the data behind a named figure")
    p.add_argument("figure", choices=FIGURES, metavar="id",
                   help=f"one of: {', '.join(FIGURES)}")
    _add_common(p, config_required=False)

    p = sub.add_parser("validate", help="run the property self-checks")
    _add_common(p, config_required=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = _out_dir(args)
        if args.command == "validate":
            failures = run_validation(args.fast)
            if failures:
                print(f"{failures} check(s) failed")
                return EXIT_NUMERICAL
            print("all checks passed")
            return 0
        if args.command == "reproduce-figure":
            if args.figure == "amplitude-profile":
                rows = _amplitude_profile_rows()
                write_csv(out / "amplitude-profile.csv", rows,
                          ("beta_min", "theta_rad", "beta"))
                print(f"wrote {out / 'amplitude-profile.csv'} "
                      f"({len(rows)} rows)")
                return 0
            kind, cfg = _figure_config(args.figure)
            cfg = _apply_overrides(cfg, args)
            _run_sweep(kind, cfg, out, args.figure)
            return 0
        cfg = _apply_overrides(load_config(args.config), args)
        kind = {"bounds-sweep": "bounds", "rmse-sweep": "rmse",
                "calibrate-demo": "calibration"}[args.command]
        _run_sweep(kind, cfg, out, args.command)
        return 0
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IllConditionedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
