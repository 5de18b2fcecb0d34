"""Experiment orchestration: config parsing, sweeps, and CSV emission.

A single structured text file (TOML) describes geometry, scene, protocol,
sweep, and estimator settings.  Three drivers consume it:

* ``run_bounds_sweep``   -- theoretical position-error bounds across a swept
  variable, ensemble-averaged over phase-schedule realizations;
* ``run_rmse_sweep``     -- Monte Carlo estimator campaigns with matching
  bound columns joined per row;
* ``run_calibration_demo`` -- per-iteration position error of the online
  amplitude calibration.

Rows are emitted in deterministic (sweep point, trial) order and every
scalar is written with full round-trip precision, so a given (config, seed)
pair produces a bit-identical CSV.  Per-trial random streams are derived by
hashing (master_seed, sweep_index, trial_index), which makes the row content
independent of execution order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np
import tomli

from .bounds import (
    IllConditionedError,
    SolverConfig,
    fim,
    mcrb_matrices,
    pseudo_true,
)
from .estimators import AmlEstimator, AmmlEstimator, SearchGrids
from .geometry import RisGeometry, fresnel_bounds, planar_array
from .ris import RisAmplitudeParams, profile_matrix, random_phase_schedule
from .signal import ParamVector, noiseless_mean, observe, solve_noise_for_snr

CSV_SCHEMA = 1

SWEEP_VARIABLES = ("snr", "beta_min", "kappa", "elements", "transmissions")

# scenario names, by what the estimator knows about the amplitude model
SCENARIOS = ("mismatched", "calibrated", "known")

_DEFAULT_SWEEPS = {
    "snr": None,  # resolved to the configured SNR list
    "beta_min": tuple(np.round(np.linspace(0.0, 1.0, 11), 10)),
    "kappa": tuple(np.round(np.linspace(0.0, 5.0, 11), 10)),
    "elements": (100, 400, 900, 1600, 2500),
    "transmissions": (10, 50, 100, 200),
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one sweep needs; every field has a text-file counterpart."""

    rows: int = 50
    cols: int = 50
    spacing_wavelengths: float = 0.5
    carrier_hz: float = 28e9
    p_bs: tuple = (-5.77, 5.77, 5.77)
    p_ue: tuple = (2.89, 2.89, 2.89)
    gain_abs: float = 1.0
    gain_phase: float = 0.0
    beta_min: float = 0.5
    kappa: float = 1.5
    phi: float = 0.0
    transmissions: int = 200
    symbol_energy: float = 1.0
    snr_db: tuple = (0.0, 10.0, 20.0, 30.0, 40.0)
    sweep: str = "snr"
    sweep_values: tuple = ()
    trials: int = 100
    master_seed: int = 7
    schedule_seed: int = 26
    regenerate_schedule: bool = False
    profile_realizations: int = 20
    scenarios: tuple = SCENARIOS
    order: Optional[int] = 50
    i_max: int = 5
    j_max: int = 5
    kappa_max: float = 5.0
    grids: SearchGrids = field(default_factory=SearchGrids)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("geometry grid dimensions must be at least 1")
        if self.spacing_wavelengths <= 0 or self.carrier_hz <= 0:
            raise ConfigError("spacing and carrier frequency must be positive")
        if self.transmissions < 1:
            raise ConfigError("need at least one transmission")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.profile_realizations < 1:
            raise ConfigError("profile_realizations must be at least 1")
        if self.symbol_energy <= 0:
            raise ConfigError("symbol energy must be positive")
        if self.sweep not in SWEEP_VARIABLES:
            raise ConfigError(
                f"unknown sweep variable {self.sweep!r}; expected one of "
                f"{SWEEP_VARIABLES}")
        unknown = set(self.scenarios) - set(SCENARIOS)
        if unknown:
            raise ConfigError(f"unknown scenarios {sorted(unknown)}")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        if not self.snr_db:
            raise ConfigError("at least one SNR point is required")
        if not (0.0 <= self.beta_min <= 1.0) or self.kappa < 0:
            raise ConfigError("amplitude parameters out of range")
        geom = self.geometry()
        lo, hi = fresnel_bounds(geom)
        for name, p in (("p_ue", self.p_ue), ("p_bs", self.p_bs)):
            r = float(np.linalg.norm(np.asarray(p, dtype=float)))
            if not lo <= r <= hi:
                raise ConfigError(
                    f"{name} range {r:.3f} m outside the radiating near field "
                    f"[{lo:.3f}, {hi:.3f}] m of the configured surface")

    # -- derived pieces ------------------------------------------------------
    @property
    def wavelength(self) -> float:
        return 299792458.0 / self.carrier_hz

    @property
    def gain(self) -> complex:
        return self.gain_abs * np.exp(1j * self.gain_phase)

    @property
    def zeta(self) -> RisAmplitudeParams:
        return RisAmplitudeParams(beta_min=self.beta_min, kappa=self.kappa,
                                  phi=self.phi)

    def geometry(self, n_elements: Optional[int] = None) -> RisGeometry:
        if n_elements is None:
            rows, cols = self.rows, self.cols
        else:
            side = int(round(np.sqrt(n_elements)))
            if side * side != n_elements:
                raise ConfigError(
                    f"element sweep values must be perfect squares, got "
                    f"{n_elements}")
            rows = cols = side
        return planar_array(rows, cols, wavelength=self.wavelength,
                            spacing=self.spacing_wavelengths * self.wavelength)

    def truth(self) -> ParamVector:
        return ParamVector(gain=self.gain,
                           position=np.asarray(self.p_ue, dtype=float),
                           zeta=self.zeta)

    def resolved_sweep_values(self) -> tuple:
        if self.sweep_values:
            return self.sweep_values
        if self.sweep == "snr":
            return tuple(self.snr_db)
        return _DEFAULT_SWEEPS[self.sweep]

    def content_hash(self) -> str:
        payload = {f.name: _plain(getattr(self, f.name)) for f in fields(self)}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _plain(value):
    if isinstance(value, SearchGrids):
        return {f.name: _plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


_SECTION_FIELDS = {
    "geometry": {"rows": "rows", "cols": "cols",
                 "spacing_wavelengths": "spacing_wavelengths",
                 "carrier_hz": "carrier_hz"},
    "scene": {"p_bs": "p_bs", "p_ue": "p_ue", "gain_abs": "gain_abs",
              "gain_phase": "gain_phase"},
    "amplitude": {"beta_min": "beta_min", "kappa": "kappa", "phi": "phi"},
    "protocol": {"transmissions": "transmissions",
                 "symbol_energy": "symbol_energy", "snr_db": "snr_db"},
    "sweep": {"variable": "sweep", "values": "sweep_values"},
    "run": {"trials": "trials", "master_seed": "master_seed",
            "schedule_seed": "schedule_seed",
            "regenerate_schedule": "regenerate_schedule",
            "profile_realizations": "profile_realizations",
            "scenarios": "scenarios"},
    "estimator": {"order": "order", "i_max": "i_max", "j_max": "j_max",
                  "kappa_max": "kappa_max"},
}


def load_config(path) -> ExperimentConfig:
    """Parse the experiment description from a TOML file."""
    try:
        with open(path, "rb") as f:
            raw = tomli.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc

    kwargs = {}
    for section, mapping in _SECTION_FIELDS.items():
        table = raw.pop(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        grid_table = table.pop("grids", None) if section == "estimator" else None
        for key in list(table):
            if key not in mapping:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            value = table[key]
            if isinstance(value, list):
                value = tuple(value)
            kwargs[mapping[key]] = value
        if grid_table is not None:
            try:
                kwargs["grids"] = SearchGrids(**grid_table)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid [estimator.grids]: {exc}") from exc
    if raw:
        raise ConfigError(f"unknown config sections {sorted(raw)}")
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def fast_preset(cfg: ExperimentConfig) -> ExperimentConfig:
    """Desk-scale variant: 16x16 surface, 50 transmissions, scaled scene.

    Positions shrink with the surface so both terminals stay inside the
    smaller radiating near field; the expansion order falls back to the
    worst-case formula for the new aperture.
    """
    return replace(
        cfg,
        rows=16, cols=16, transmissions=50,
        p_ue=(0.72, 0.72, 0.72), p_bs=(-1.30, 1.30, 1.30),
        trials=min(cfg.trials, 20),
        profile_realizations=min(cfg.profile_realizations, 10),
        order=None,
    )


# ---------------------------------------------------------------------------
# result rows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    """One sweep point: bound scalars, estimator errors, bookkeeping."""

    config_hash: str
    sweep: str
    sweep_value: float
    snr_db: float
    n_profiles: int = 0
    n_failed: int = 0
    crb_known: float = np.nan
    crb_calibrated: float = np.nan
    mcrb_pos: float = np.nan
    lb_pos: float = np.nan
    bias_pos: float = np.nan
    trials: int = 0
    rmse_mismatched: float = np.nan
    se_mismatched: float = np.nan
    fail_mismatched: int = 0
    rmse_calibrated: float = np.nan
    se_calibrated: float = np.nan
    fail_calibrated: int = 0
    rmse_known: float = np.nan
    se_known: float = np.nan
    fail_known: int = 0
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# wall time stays out of the CSV columns: identical (config, seed) runs
# must produce bit-identical files
BOUNDS_COLUMNS = (
    "config_hash", "sweep", "sweep_value", "snr_db", "n_profiles", "n_failed",
    "crb_known", "crb_calibrated", "mcrb_pos", "lb_pos", "bias_pos",
)

RMSE_COLUMNS = (
    "config_hash", "sweep", "sweep_value", "snr_db", "trials",
    "rmse_mismatched", "se_mismatched", "fail_mismatched",
    "rmse_calibrated", "se_calibrated", "fail_calibrated",
    "rmse_known", "se_known", "fail_known",
    "lb_pos", "crb_calibrated", "crb_known",
)

CALIBRATION_COLUMNS = (
    "config_hash", "snr_db", "iteration", "position_error",
    "beta_min", "kappa", "phi",
)


def _format_cell(value) -> str:
    if isinstance(value, float) or isinstance(value, np.floating):
        return repr(float(value))
    return str(value)


def write_csv(path, rows, columns) -> None:
    """Versioned CSV: comment header, fixed column order, round-trip floats."""
    with open(path, "w", newline="") as f:
        f.write(f"# schema={CSV_SCHEMA}\n")
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            data = row.as_dict() if isinstance(row, ResultRow) else row
            writer.writerow([_format_cell(data[c]) for c in columns])


def read_csv(path):
    """Counterpart of write_csv; returns (schema, list of dict rows)."""
    with open(path, newline="") as f:
        first = f.readline().strip()
        if not first.startswith("# schema="):
            raise ValueError("missing schema header")
        schema = int(first.split("=", 1)[1])
        rows = list(csv.DictReader(f))
    return schema, rows


# ---------------------------------------------------------------------------
# sweep drivers
# ---------------------------------------------------------------------------


def _trial_rng(master_seed: int, sweep_index: int, trial_index: int):
    return np.random.default_rng(
        np.random.SeedSequence((master_seed, sweep_index, trial_index)))


def _schedule(cfg: ExperimentConfig, geom: RisGeometry, t: int,
              realization: Optional[int] = None) -> np.ndarray:
    if realization is None:
        seed = cfg.schedule_seed
    else:
        seed = np.random.SeedSequence((cfg.schedule_seed, realization))
    return random_phase_schedule(geom.n_elements, t, seed)


def _sweep_point(cfg: ExperimentConfig, value):
    """Resolve one sweep value into (geometry, truth, transmissions)."""
    geom = cfg.geometry()
    zeta = cfg.zeta
    t = cfg.transmissions
    if cfg.sweep == "beta_min":
        zeta = RisAmplitudeParams(float(value), zeta.kappa, zeta.phi)
    elif cfg.sweep == "kappa":
        zeta = RisAmplitudeParams(zeta.beta_min, float(value), zeta.phi)
    elif cfg.sweep == "elements":
        geom = cfg.geometry(int(value))
    elif cfg.sweep == "transmissions":
        t = int(value)
    truth = ParamVector(gain=cfg.gain,
                        position=np.asarray(cfg.p_ue, dtype=float), zeta=zeta)
    return geom, truth, t


def _snr_grid(cfg: ExperimentConfig):
    """(sweep_index, sweep_value, snr) triples in deterministic order.

    The index enumerates emitted rows, so every (value, SNR) pair seeds its
    own trial streams.
    """
    points = []
    for v in cfg.resolved_sweep_values():
        if cfg.sweep == "snr":
            points.append((v, float(v)))
        else:
            for snr in cfg.snr_db:
                points.append((v, float(snr)))
    return [(i, v, s) for i, (v, s) in enumerate(points)]


def run_bounds_sweep(cfg: ExperimentConfig) -> list:
    """Position-error bounds per sweep point, schedule-ensemble averaged.

    Scenario scalars: matched bound with the amplitude model known
    (crb_known), matched bound with the model jointly estimated
    (crb_calibrated), and the misspecified pair (mcrb_pos, lb_pos) with the
    accompanying deterministic offset (bias_pos).  Solver failures (refused
    inversions, non-converged projections) are counted per row and excluded
    from the averages.
    """
    rows = []
    chash = cfg.content_hash()
    for sweep_index, value, snr in _snr_grid(cfg):
        start = time.perf_counter()
        geom, truth, t = _sweep_point(cfg, value)
        samples = {k: [] for k in ("crb_known", "crb_calibrated", "mcrb_pos",
                                   "lb_pos", "bias_pos")}
        failed = 0
        for r in range(cfg.profile_realizations):
            phases = _schedule(cfg, geom, t, realization=r)
            true_w = profile_matrix(phases, truth.zeta)
            noise_var = solve_noise_for_snr(snr, truth, true_w, geom,
                                            cfg.p_bs, cfg.symbol_energy)
            if "known" in cfg.scenarios:
                try:
                    samples["crb_known"].append(
                        fim(truth, phases, geom, cfg.p_bs, cfg.symbol_energy,
                            noise_var).pos_rmse_bound)
                except IllConditionedError:
                    failed += 1
            if "calibrated" in cfg.scenarios:
                try:
                    samples["crb_calibrated"].append(
                        fim(truth, phases, geom, cfg.p_bs, cfg.symbol_energy,
                            noise_var,
                            unknown_amplitude_model=True).pos_rmse_bound)
                except IllConditionedError:
                    failed += 1
            if "mismatched" in cfg.scenarios:
                model_w = profile_matrix(phases, truth.zeta, ideal=True)
                try:
                    pt = pseudo_true(truth, true_w, model_w, geom, cfg.p_bs,
                                     cfg.symbol_energy)
                    if not pt.converged:
                        failed += 1
                        continue
                    report = mcrb_matrices(pt.params, truth, true_w, model_w,
                                           geom, cfg.p_bs, cfg.symbol_energy,
                                           noise_var)
                except IllConditionedError:
                    failed += 1
                else:
                    samples["mcrb_pos"].append(report.mcrb_pos_rmse)
                    samples["lb_pos"].append(report.lb_pos_rmse)
                    samples["bias_pos"].append(report.pos_bias)
        means = {k: float(np.mean(v)) if v else np.nan
                 for k, v in samples.items()}
        rows.append(ResultRow(
            config_hash=chash, sweep=cfg.sweep, sweep_value=float(value),
            snr_db=snr, n_profiles=cfg.profile_realizations, n_failed=failed,
            wall_time_s=time.perf_counter() - start, **means))
    return rows


def _rmse_with_se(sq_errors: list) -> tuple[float, float]:
    """RMSE and its standard error (delta method on the mean square)."""
    sq = np.asarray(sq_errors, dtype=float)
    mean_sq = sq.mean()
    rmse = float(np.sqrt(mean_sq))
    if sq.size < 2 or rmse == 0.0:
        return rmse, 0.0
    se_mean_sq = sq.std(ddof=1) / np.sqrt(sq.size)
    return rmse, float(se_mean_sq / (2.0 * rmse))


def _build_estimators(cfg: ExperimentConfig, geom: RisGeometry,
                      phases: np.ndarray, zeta: RisAmplitudeParams) -> dict:
    common = dict(grids=cfg.grids, order=cfg.order, i_max=cfg.i_max,
                  symbol_energy=cfg.symbol_energy)
    built = {}
    if "mismatched" in cfg.scenarios:
        built["mismatched"] = AmmlEstimator(geom, cfg.p_bs, phases, **common)
    if "calibrated" in cfg.scenarios:
        built["calibrated"] = AmlEstimator(
            geom, cfg.p_bs, phases, j_max=cfg.j_max, kappa_max=cfg.kappa_max,
            **common)
    if "known" in cfg.scenarios:
        built["known"] = AmmlEstimator(geom, cfg.p_bs, phases, assumed=zeta,
                                       **common)
    return built


def run_rmse_sweep(cfg: ExperimentConfig) -> list:
    """Monte Carlo estimator errors per sweep point, bounds joined per row.

    Failed trials (solver exceptions) are excluded from the RMSE and counted
    in the per-scenario fail columns.
    """
    rows = []
    chash = cfg.content_hash()
    for sweep_index, value, snr in _snr_grid(cfg):
        start = time.perf_counter()
        geom, truth, t = _sweep_point(cfg, value)
        phases = _schedule(cfg, geom, t)
        true_w = profile_matrix(phases, truth.zeta)
        noise_var = solve_noise_for_snr(snr, truth, true_w, geom, cfg.p_bs,
                                        cfg.symbol_energy)
        mu = noiseless_mean(truth, true_w, geom, cfg.p_bs, cfg.symbol_energy)
        estimators = _build_estimators(cfg, geom, phases, truth.zeta)
        sq_errors = {name: [] for name in estimators}
        failures = {name: 0 for name in estimators}
        for trial in range(cfg.trials):
            rng = _trial_rng(cfg.master_seed, sweep_index, trial)
            if cfg.regenerate_schedule:
                phases_t = random_phase_schedule(geom.n_elements, t, rng)
                true_w_t = profile_matrix(phases_t, truth.zeta)
                noise_var_t = solve_noise_for_snr(
                    snr, truth, true_w_t, geom, cfg.p_bs, cfg.symbol_energy)
                mu_t = noiseless_mean(truth, true_w_t, geom, cfg.p_bs,
                                      cfg.symbol_energy)
                est_t = _build_estimators(cfg, geom, phases_t, truth.zeta)
            else:
                mu_t, est_t, noise_var_t = mu, estimators, noise_var
            y = observe(mu_t, noise_var_t, rng)
            for name, est in est_t.items():
                try:
                    p_hat = est.estimate(y).position
                except (IllConditionedError, ValueError,
                        np.linalg.LinAlgError):
                    failures[name] += 1
                else:
                    sq_errors[name].append(
                        float(np.sum((p_hat - truth.position) ** 2)))
        stats = {}
        for name in estimators:
            if sq_errors[name]:
                rmse, se = _rmse_with_se(sq_errors[name])
            else:
                rmse, se = np.nan, np.nan
            stats[f"rmse_{name}"] = rmse
            stats[f"se_{name}"] = se
            stats[f"fail_{name}"] = failures[name]

        bounds = _point_bounds(cfg, geom, truth, phases, true_w, noise_var)
        rows.append(ResultRow(
            config_hash=chash, sweep=cfg.sweep, sweep_value=float(value),
            snr_db=snr, trials=cfg.trials,
            wall_time_s=time.perf_counter() - start, **stats, **bounds))
    return rows


def _point_bounds(cfg, geom, truth, phases, true_w, noise_var) -> dict:
    """Bound columns for one (sweep value, SNR) row on the deployed schedule."""
    out = {}
    if "known" in cfg.scenarios:
        try:
            out["crb_known"] = fim(truth, phases, geom, cfg.p_bs,
                                   cfg.symbol_energy, noise_var).pos_rmse_bound
        except IllConditionedError:
            out["crb_known"] = np.nan
    if "calibrated" in cfg.scenarios:
        try:
            out["crb_calibrated"] = fim(
                truth, phases, geom, cfg.p_bs, cfg.symbol_energy, noise_var,
                unknown_amplitude_model=True).pos_rmse_bound
        except IllConditionedError:
            out["crb_calibrated"] = np.nan
    if "mismatched" in cfg.scenarios:
        model_w = profile_matrix(phases, truth.zeta, ideal=True)
        try:
            pt = pseudo_true(truth, true_w, model_w, geom, cfg.p_bs,
                             cfg.symbol_energy)
            report = mcrb_matrices(pt.params, truth, true_w, model_w, geom,
                                   cfg.p_bs, cfg.symbol_energy, noise_var)
        except IllConditionedError:
            out["mcrb_pos"] = out["lb_pos"] = out["bias_pos"] = np.nan
        else:
            out["mcrb_pos"] = report.mcrb_pos_rmse
            out["lb_pos"] = report.lb_pos_rmse
            out["bias_pos"] = report.pos_bias
    return out


def run_calibration_demo(cfg: ExperimentConfig) -> list:
    """Per-iteration position error of the amplitude calibration loop.

    Iteration 0 is the initial fit under the unit-amplitude assumption; each
    later row re-solves the position under the profile the calibration held
    after that alternation.
    """
    rows = []
    chash = cfg.content_hash()
    geom = cfg.geometry()
    truth = cfg.truth()
    phases = _schedule(cfg, geom, cfg.transmissions)
    true_w = profile_matrix(phases, truth.zeta)
    mu = noiseless_mean(truth, true_w, geom, cfg.p_bs, cfg.symbol_energy)
    est = AmlEstimator(geom, cfg.p_bs, phases, grids=cfg.grids,
                       order=cfg.order, i_max=cfg.i_max, j_max=cfg.j_max,
                       kappa_max=cfg.kappa_max,
                       symbol_energy=cfg.symbol_energy)
    for snr_index, snr in enumerate(cfg.snr_db):
        noise_var = solve_noise_for_snr(snr, truth, true_w, geom, cfg.p_bs,
                                        cfg.symbol_energy)
        rng = _trial_rng(cfg.master_seed, snr_index, 0)
        y = observe(mu, noise_var, rng)
        result = est.estimate(y)
        ideal = RisAmplitudeParams.ideal()
        path = [(0, result.initial_position, ideal)]
        for k, zeta_k in enumerate(result.zeta_path, start=1):
            if k == len(result.zeta_path):
                p_k = result.position  # final refit already solved
            else:
                refit = AmmlEstimator(geom, cfg.p_bs, phases, assumed=zeta_k,
                                      grids=cfg.grids, order=cfg.order,
                                      i_max=cfg.i_max,
                                      symbol_energy=cfg.symbol_energy)
                p_k = refit.estimate(
                    y, warm_start=result.initial_position).position
            path.append((k, p_k, zeta_k))
        for k, p_k, zeta_k in path:
            rows.append({
                "config_hash": chash, "snr_db": float(snr), "iteration": k,
                "position_error": float(
                    np.linalg.norm(p_k - truth.position)),
                "beta_min": zeta_k.beta_min, "kappa": zeta_k.kappa,
                "phi": zeta_k.phi,
            })
    return rows


def summarize_run(cfg: ExperimentConfig, rows, command: str) -> dict:
    """JSON-ready run summary: config echo, content hash, totals."""
    dicts = [r.as_dict() if isinstance(r, ResultRow) else r for r in rows]
    failures = sum(int(d.get(k, 0) or 0) for d in dicts
                   for k in ("n_failed", "fail_mismatched",
                             "fail_calibrated", "fail_known"))
    return {
        "command": command,
        "config": {f.name: _plain(getattr(cfg, f.name)) for f in fields(cfg)},
        "config_hash": cfg.content_hash(),
        "rows": len(rows),
        "failures": failures,
        "wall_time_s": float(sum(d.get("wall_time_s", 0.0) for d in dicts)),
    }
