import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ocms.errors import ConfigError, EmptyTrialSet
from ocms.experiments import (SEED_STRIDE, ExperimentConfig, emit_report, read_trials_csv, run_suite,
                              trial_geometry)
from ocms.field_synth import SourceSpec
from ocms.waveguide import ArrayGeometry, isovelocity


def make(suite, values, env, geometry, source, **kw):
    kw.setdefault("trials_per_point", 2)
    return ExperimentConfig(suite, values, env, geometry, source, **kw)


def test_config_validation(thermo_env, full_array, source):
    with pytest.raises(ConfigError):
        make("Bogus", [1], thermo_env, full_array, source)
    with pytest.raises(ConfigError):
        make("SnrSweep", [], thermo_env, full_array, source)
    with pytest.raises(ConfigError):
        make("SnrSweep", [30], thermo_env, full_array, source, trials_per_point=0)
    with pytest.raises(ConfigError):
        make("ApertureSweep", [60], thermo_env, full_array, source)
    with pytest.raises(ConfigError):
        make("TiltSweep", [95], thermo_env, full_array, source)
    with pytest.raises(ConfigError):
        make("SspUncertaintySweep", [-1], thermo_env, full_array, source)
    with pytest.raises(ConfigError):
        make("SspUncertaintySweep", [1], thermo_env, full_array, source, ssp_mode="layered")


def test_seed_schedule(thermo_env, full_array, source):
    cfg = make("SnrSweep", [30, 10], thermo_env, full_array, source, seed_base=17)
    assert cfg.seed(0, 0) == 17
    assert cfg.seed(1, 3) == 17 + SEED_STRIDE + 3


def test_trial_geometries(thermo_env, full_array, source):
    cfg = make("ApertureSweep", [35], thermo_env, full_array, source)
    tops = [trial_geometry(cfg, 35, t).nominal_depths[0] for t in range(17)]
    assert tops[:16] == list(range(1, 17)) and tops[16] == 1.0
    g = trial_geometry(cfg, 35, 15)
    assert g.N == 35 and g.nominal_depths[-1] == 50.0
    cfg = make("ElementCountSweep", [10], thermo_env, full_array, source)
    assert_allclose(trial_geometry(cfg, 10, 0).nominal_depths, np.arange(5.0, 51.0, 5.0))
    cfg = make("TiltSweep", [3], thermo_env, full_array, source)
    assert trial_geometry(cfg, 3, 0).tilt_deg == 3.0


def test_isovelocity_smoke():
    env = isovelocity()
    cfg = ExperimentConfig("SnrSweep", [30], env, ArrayGeometry(np.arange(1.0, 51.0), 5000.0),
                           SourceSpec(8.0, 5000.0), trials_per_point=2, modes_kept=5)
    res = run_suite(cfg)
    assert len(res.records) == 2 and all(r.status == "ok" for r in res.records)
    assert len(res.aggregate) == 5
    assert all(a.delta_k < 1e-3 for a in res.aggregate)


@pytest.fixture(scope="module")
def smoke(thermo_env, full_array, source):
    cfg = make("SnrSweep", [30, 10], thermo_env, full_array, source, seed_base=5)
    return run_suite(cfg)


def test_report_files_and_counts(smoke, tmp_path):
    summary = emit_report(smoke, str(tmp_path))
    for name in ("trials.csv", "aggregate.csv", "curves.csv", "timings.csv", "summary.txt"):
        assert os.path.exists(tmp_path / name)
    assert len(smoke.aggregate) == 2 * 11
    with open(tmp_path / "aggregate.csv") as fh:
        assert len(fh.read().splitlines()) == 1 + 2 * 11
    assert summary.startswith("4 trials, 0 failed")


def test_report_is_deterministic(smoke, thermo_env, full_array, source, tmp_path):
    again = run_suite(make("SnrSweep", [30, 10], thermo_env, full_array, source, seed_base=5))
    emit_report(smoke, str(tmp_path / "a"))
    emit_report(again, str(tmp_path / "b"))
    for name in ("trials.csv", "aggregate.csv", "curves.csv", "summary.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_trials_csv_round_trip(smoke, tmp_path):
    emit_report(smoke, str(tmp_path))
    back = read_trials_csv(str(tmp_path / "trials.csv"))
    assert len(back) == len(smoke.records)
    for a, b in zip(back, smoke.records):
        assert a.seed == b.seed
        assert_allclose(a.k_hat, b.k_hat, rtol=0, atol=0)


def test_empty_report_rejected(tmp_path):
    with pytest.raises(EmptyTrialSet):
        emit_report([], str(tmp_path))


def test_noise_free_aggregate_within_quantization(thermo_env, full_array, source, thermo_modes):
    cfg = make("SnrSweep", [300], thermo_env, full_array, source)
    res = run_suite(cfg)
    for a in res.aggregate:
        assert a.delta_k <= 2e-4 / a.k_true


def test_failed_trials_are_recorded(thermo_env, full_array):
    cfg = make("SnrSweep", [30], thermo_env, full_array, SourceSpec(8.0, 1.0))
    res = run_suite(cfg)
    assert all(r.status == "RangeTooShort" for r in res.records)
    assert all(a.n_missing == 2 for a in res.aggregate)


def test_parallel_matches_serial(thermo_env, full_array, source):
    cfg = make("TiltSweep", [0, 3], thermo_env, full_array, source, trials_per_point=1)
    a, b = run_suite(cfg, jobs=1), run_suite(cfg, jobs=2)
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.k_hat, rb.k_hat, equal_nan=True)
