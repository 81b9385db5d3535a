"""
Monte Carlo studies of the estimator against the internal oracle.

Five suites vary one factor each: SNR, array aperture (with the array
deployed at every admissible depth offset), element count on the full
span, array tilt (unknown to the estimator) and sound-speed uncertainty
(the field comes from the background profile, the estimator uses a
perturbed one). Trial seeds are derived from ``seed_base`` and the
(sweep, trial) indices, so trials can run in any order or in parallel.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, EmptyTrialSet, IoFailure, OcmsError
from .estimator import OcmsConfig, aggregate_trials, estimate, relative_error
from .field_synth import SourceSpec, add_noise, synthesize
from .reference_solver import propagating_modes
from .waveguide import ArrayGeometry, Environment, perturb_ssp

log = logging.getLogger(__name__)

SUITES = ("SnrSweep", "ApertureSweep", "ElementCountSweep", "TiltSweep", "SspUncertaintySweep")

#: Seed stride between sweep points; trial indices must stay below it.
SEED_STRIDE = 100_000
#: Offset separating the SSP-perturbation stream from the noise stream.
SSP_SEED_OFFSET = 50_000


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """One Monte Carlo study.

    ``snr_db`` is the noise level for every suite except SnrSweep, whose
    sweep values are the SNRs. ``ocms`` holds keyword arguments for
    ``OcmsConfig.for_env`` since the search band follows the environment the
    estimator is given. ``modes_kept`` truncates the oracle mode set used for
    the field and the ground truth.
    """

    suite: str
    sweep_values: tuple
    env: Environment
    geometry: ArrayGeometry
    source: SourceSpec
    trials_per_point: int = 50
    seed_base: int = 0
    snr_db: float = 30.0
    snr_convention: str = "norm"
    ssp_mode: str = "per_point"
    phase_per_element: bool = True
    modes_kept: Optional[int] = None
    ocms: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; expected one of {SUITES}")
        if self.trials_per_point < 1 or self.trials_per_point >= SSP_SEED_OFFSET:
            raise ConfigError("trials_per_point must be in [1, 50000)")
        if not self.sweep_values:
            raise ConfigError("sweep_values must not be empty")
        if self.ssp_mode not in ("per_point", "per_profile"):
            raise ConfigError(f"unknown ssp_mode {self.ssp_mode!r}")
        if self.snr_convention not in ("norm", "energy"):
            raise ConfigError(f"unknown snr_convention {self.snr_convention!r}")
        v = np.array(self.sweep_values)
        span = self.geometry.nominal_depths[-1]
        if self.suite == "ApertureSweep" and (np.any(v < 2) or np.any(v > span) or np.any(v != np.round(v))):
            raise ConfigError(f"apertures must be whole metres in [2, {span:g}]")
        if self.suite == "ElementCountSweep" and (np.any(v < 2) or np.any(v != np.round(v))):
            raise ConfigError("element counts must be integers >= 2")
        if self.suite == "TiltSweep" and (np.any(v < 0) or np.any(v >= 90)):
            raise ConfigError("tilt angles must lie in [0, 90) degrees")
        if self.suite == "SspUncertaintySweep" and np.any(v < 0):
            raise ConfigError("SSP uncertainty must be non-negative")

    def seed(self, sweep_index: int, trial_index: int) -> int:
        return int(self.seed_base + SEED_STRIDE * sweep_index + trial_index)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    sweep_value: float
    trial_index: int
    seed: int
    k_true: np.ndarray
    k_hat: np.ndarray
    relative_error: np.ndarray
    wall_time: float = 0.0
    status: str = "ok"
    detail: str = ""

    def k_map(self) -> dict:
        return {m + 1: float(k) for m, k in enumerate(self.k_hat) if np.isfinite(k)}


@dataclass(frozen=True, eq=False)
class AggregateRow:
    sweep_value: float
    mode: int
    k_true: float
    n_trials: int
    n_missing: int
    mean_k_hat: float
    delta_k: float
    sigma: float
    mean_abs_rel_error: float


@dataclass(frozen=True, eq=False)
class SuiteResult:
    config: ExperimentConfig
    records: list
    aggregate: list

    def rows_for(self, sweep_value: float) -> list:
        return [r for r in self.aggregate if r.sweep_value == float(sweep_value)]

    def row(self, sweep_value: float, mode: int) -> AggregateRow:
        for r in self.aggregate:
            if r.sweep_value == float(sweep_value) and r.mode == mode:
                return r
        raise KeyError((sweep_value, mode))


@lru_cache(maxsize=4)
def _oracle(env: Environment, modes_kept):
    modes = propagating_modes(env)
    if modes_kept is not None:
        modes = type(modes)(modes.modes[:modes_kept], modes.env_fingerprint, modes.bottom, modes.h,
                            dict(modes.diagnostics))
    return modes


def trial_geometry(config: ExperimentConfig, value: float, trial_index: int) -> ArrayGeometry:
    """Array used by one trial of the suite."""
    g = config.geometry
    if config.suite == "ApertureSweep":
        A = int(round(value))
        span = g.nominal_depths[-1]
        n_offsets = int(round(span)) - A + 1
        top = 1.0 + (trial_index % n_offsets)
        return ArrayGeometry(top + np.arange(A, dtype=float), g.nominal_range, g.tilt_deg)
    if config.suite == "ElementCountSweep":
        N = int(round(value))
        span = g.nominal_depths[-1]
        return ArrayGeometry(span / N * np.arange(1, N + 1), g.nominal_range, g.tilt_deg)
    if config.suite == "TiltSweep":
        return replace(g, tilt_deg=float(value))
    return g


def run_trial(config: ExperimentConfig, sweep_index: int, trial_index: int) -> TrialRecord:
    """One synthetic measurement and estimate; failures are recorded, not raised."""
    value = config.sweep_values[sweep_index]
    seed = config.seed(sweep_index, trial_index)
    modes = _oracle(config.env, config.modes_kept)
    k_true = modes.xis
    t0 = time.perf_counter()
    k_hat = np.full(k_true.size, np.nan)
    status, detail = "ok", ""
    try:
        geo = trial_geometry(config, value, trial_index)
        snr = value if config.suite == "SnrSweep" else config.snr_db
        snap = synthesize(modes, config.source, geo, config.env, config.phase_per_element)
        snap = add_noise(snap, snr, seed, config.snr_convention)
        est_env = config.env
        if config.suite == "SspUncertaintySweep":
            est_env = perturb_ssp(config.env, value, seed + SSP_SEED_OFFSET, config.ssp_mode)
        ocfg = OcmsConfig.for_env(est_env, **config.ocms)
        result = estimate(snap, est_env, geo, ocfg)
        for m, k in result.k_by_mode().items():
            if 1 <= m <= k_true.size:
                k_hat[m - 1] = k
        if config.suite == "ApertureSweep":
            detail = f"top={geo.nominal_depths[0]:g}"
    except OcmsError as exc:
        status, detail = type(exc).__name__, str(exc)
        log.info("trial %s/%s failed: %s", value, trial_index, detail)
    rel = np.abs(k_hat - k_true) / k_true
    return TrialRecord(value, trial_index, seed, k_true, k_hat, rel, time.perf_counter() - t0, status, detail)


def _run_point(args):
    config, sweep_index = args
    return [run_trial(config, sweep_index, t) for t in range(config.trials_per_point)]


def run_suite(config: ExperimentConfig, jobs: int = 1) -> SuiteResult:
    """Run every trial of every sweep point and aggregate per mode.

    ``jobs > 1`` distributes sweep points over worker processes; results do
    not depend on the worker count.
    """
    tasks = [(config, i) for i in range(len(config.sweep_values))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_point, tasks))
    else:
        chunks = [_run_point(t) for t in tasks]
    records = sorted((r for c in chunks for r in c), key=lambda r: (r.sweep_value, r.trial_index))
    return SuiteResult(config, records, aggregate_from_records(records))


def _fmt(x) -> str:
    return "nan" if x is None or not np.isfinite(x) else repr(float(x))


TRIAL_COLUMNS = ["sweep_value", "trial_index", "seed", "mode", "k_true", "k_hat", "relative_error",
                 "status", "detail"]
AGGREGATE_COLUMNS = ["sweep_value", "mode", "k_true", "n_trials", "n_missing", "mean_k_hat", "delta_k",
                     "sigma", "mean_abs_rel_error"]
CURVE_COLUMNS = ["sweep_value", "mode", "k_true", "mean_k_hat", "relative_error"]


def emit_report(result, out_dir: str) -> str:
    """Write trials.csv, aggregate.csv, curves.csv and timings.csv; return a summary.

    ``trials.csv`` holds no wall-clock data so identical runs give identical
    bytes; timings go to their own file.
    """
    records = result.records if isinstance(result, SuiteResult) else list(result)
    if not records:
        raise EmptyTrialSet("no trial records to report")
    aggregate = result.aggregate if isinstance(result, SuiteResult) else aggregate_from_records(records)
    try:
        return _emit(records, aggregate, out_dir)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out_dir!r}: {exc}") from exc


def _emit(records, aggregate, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trials.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for r in records:
            for m in range(r.k_true.size):
                w.writerow([_fmt(r.sweep_value), r.trial_index, r.seed, m + 1, _fmt(r.k_true[m]),
                            _fmt(r.k_hat[m]), _fmt(r.relative_error[m]), r.status, r.detail])
    write_aggregate_csv(aggregate, os.path.join(out_dir, "aggregate.csv"))
    with open(os.path.join(out_dir, "curves.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for a in aggregate:
            w.writerow([_fmt(a.sweep_value), a.mode, _fmt(a.k_true), _fmt(a.mean_k_hat), _fmt(a.delta_k)])
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep_value", "trial_index", "wall_time_s"])
        for r in records:
            w.writerow([_fmt(r.sweep_value), r.trial_index, f"{r.wall_time:.4f}"])
    summary = summarize(records, aggregate)
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    return summary


def write_aggregate_csv(aggregate, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_COLUMNS)
        for a in aggregate:
            w.writerow([_fmt(a.sweep_value), a.mode, _fmt(a.k_true), a.n_trials, a.n_missing,
                        _fmt(a.mean_k_hat), _fmt(a.delta_k), _fmt(a.sigma), _fmt(a.mean_abs_rel_error)])


def aggregate_from_records(records: Sequence[TrialRecord]) -> list:
    """Aggregate rows from records alone (sweep values in sorted order)."""
    if not records:
        raise EmptyTrialSet("no trial records to aggregate")
    rows = []
    for value in sorted({r.sweep_value for r in records}):
        recs = [r for r in records if r.sweep_value == value]
        stats = aggregate_trials([r.k_map() for r in recs], recs[0].k_true)
        rows.extend(AggregateRow(value, s.mode, s.k_true, s.n_trials, s.n_missing, s.mean_k_hat,
                                 s.delta_k, s.sigma, s.mean_abs_rel_error) for s in stats)
    return rows


def summarize(records, aggregate) -> str:
    failed = sum(r.status != "ok" for r in records)
    lines = [f"{len(records)} trials, {failed} failed"]
    for value in sorted({a.sweep_value for a in aggregate}):
        rows = [a for a in aggregate if a.sweep_value == value]
        worst = max((a.delta_k for a in rows if np.isfinite(a.delta_k)), default=float("nan"))
        missing = sum(a.n_missing for a in rows)
        lines.append(f"sweep {value:g}: max delta_k {worst:.3e}, missing mode estimates {missing}")
    return "\n".join(lines)


def read_trials_csv(path: str) -> list:
    """Rebuild TrialRecords from a trials.csv written by ``emit_report``."""
    rows = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (float(row["sweep_value"]), int(row["trial_index"]))
            rows.setdefault(key, {"seed": int(row["seed"]), "status": row["status"], "detail": row["detail"],
                                  "modes": []})
            rows[key]["modes"].append((int(row["mode"]), float(row["k_true"]), float(row["k_hat"])))
    out = []
    for (value, t), d in sorted(rows.items()):
        modes = sorted(d["modes"])
        kt = np.array([m[1] for m in modes])
        kh = np.array([m[2] for m in modes])
        out.append(TrialRecord(value, t, d["seed"], kt, kh, np.abs(kh - kt) / kt, 0.0, d["status"], d["detail"]))
    return out


__all__ = ["ExperimentConfig", "TrialRecord", "AggregateRow", "SuiteResult", "run_suite", "run_trial",
           "emit_report", "read_trials_csv", "aggregate_from_records", "trial_geometry", "relative_error"]
