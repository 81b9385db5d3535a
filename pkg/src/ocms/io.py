"""
Text file formats used by the command line.

Environment and experiment files are ``key = value`` lines. ``#`` starts a
comment. An environment's sound speed profile is an inline table opened by
``ssp.table = depth_m, sound_speed_mps`` and followed by one
``depth, speed`` pair per line (comma or whitespace separated). It is
interpolated linearly onto the depth grid::

    frequency_hz = 500
    depth_step_h = 0.1
    water_depth_m = 50
    bottom.kind = pressure_release      # or fluid_halfspace
    bottom.xi_min_fraction = 0.93       # pressure_release only
    # bottom.c_b = 1600                 # fluid_halfspace only
    # bottom.rho_b = 1500
    ssp.table = depth_m, sound_speed_mps
    0, 1530
    15, 1530
    25, 1500
    50, 1500

Every CSV carries metadata as ``# key = value`` lines ahead of the header.
"""

from __future__ import annotations

import csv
import os
from typing import Optional

import numpy as np

from .errors import ConfigError, IoFailure
from .field_synth import Snapshot, SourceSpec
from .modal_scan import CorrelationCurve
from .shooting import ModeSet
from .waveguide import ArrayGeometry, ElementPositions, Environment, FluidHalfspace, PressureRelease

ENV_KEYS = {"frequency_hz", "depth_step_h", "water_depth_m", "bottom.kind", "bottom.c_b", "bottom.rho_b",
            "bottom.xi_min_fraction", "ssp.table"}
TABLE_HEADER = "depth_m, sound_speed_mps"


def _read_text(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path!r}: {exc.strerror or exc}") from exc


def _open_write(path: str):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot write {path!r}: {exc.strerror or exc}") from exc


def _fmt(x) -> str:
    return repr(float(x))


def parse_key_values(text: str, source: str = "<string>") -> tuple[dict, list]:
    """Split key-value text into a dict and the rows of an ``ssp.table`` block."""
    values, rows = {}, []
    in_table = False
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = (s.strip() for s in line.split("=", 1))
            if key in values:
                raise IoFailure(f"{source}:{n}: duplicate key {key!r}")
            values[key] = val
            in_table = key == "ssp.table"
            continue
        if not in_table:
            raise IoFailure(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
        parts = line.replace(",", " ").split()
        try:
            depth, speed = (float(s) for s in parts)
        except ValueError:
            raise IoFailure(f"{source}:{n}: table rows need two numbers, got {raw.strip()!r}") from None
        rows.append((depth, speed))
    return values, rows


def _number(values: dict, key: str, source: str, default=None) -> float:
    if key not in values:
        if default is None:
            raise IoFailure(f"{source}: missing key {key!r}")
        return default
    try:
        return float(values[key])
    except ValueError:
        raise IoFailure(f"{source}: {key} = {values[key]!r} is not a number") from None


def environment_from_values(values: dict, rows: list, source: str = "<string>") -> Environment:
    f = _number(values, "frequency_hz", source)
    h = _number(values, "depth_step_h", source)
    H = _number(values, "water_depth_m", source)
    kind = values.get("bottom.kind", PressureRelease.kind)
    if kind == PressureRelease.kind:
        bottom = PressureRelease(_number(values, "bottom.xi_min_fraction", source, 0.90))
    elif kind == FluidHalfspace.kind:
        bottom = FluidHalfspace(_number(values, "bottom.c_b", source), _number(values, "bottom.rho_b", source))
    else:
        raise IoFailure(f"{source}: unknown bottom.kind {kind!r}")
    if "ssp.table" not in values or not rows:
        raise IoFailure(f"{source}: missing ssp.table block")
    table = np.array(rows)
    try:
        return Environment.from_profile(f, h, H, table[:, 0], table[:, 1], bottom)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def read_environment(path: str) -> Environment:
    values, rows = parse_key_values(_read_text(path), path)
    unknown = set(values) - ENV_KEYS
    if unknown:
        raise IoFailure(f"{path}: unknown keys {sorted(unknown)}")
    return environment_from_values(values, rows, path)


def format_environment(env: Environment) -> str:
    """Environment file text; the table holds every grid sample, so reading it back is exact."""
    lines = [f"frequency_hz = {_fmt(env.frequency_hz)}",
             f"depth_step_h = {_fmt(env.depth_step_h)}",
             f"water_depth_m = {_fmt(env.water_depth_H)}",
             f"bottom.kind = {env.bottom.kind}"]
    if isinstance(env.bottom, FluidHalfspace):
        lines += [f"bottom.c_b = {_fmt(env.bottom.c_b)}", f"bottom.rho_b = {_fmt(env.bottom.rho_b)}"]
    else:
        lines.append(f"bottom.xi_min_fraction = {_fmt(env.bottom.xi_min_fraction)}")
    lines.append(f"ssp.table = {TABLE_HEADER}")
    lines += [f"{_fmt(z)}, {_fmt(c)}" for z, c in zip(env.z, env.ssp)]
    return "\n".join(lines) + "\n"


def write_environment(env: Environment, path: str) -> None:
    with _open_write(path) as fh:
        fh.write(format_environment(env))


def _read_csv(path: str) -> tuple[dict, list]:
    """Metadata from leading ``# key = value`` lines and the DictReader rows."""
    text = _read_text(path)
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            if "=" in line:
                k, v = (s.strip() for s in line[1:].split("=", 1))
                meta[k] = v
        elif line.strip():
            body.append(line)
    return meta, list(csv.DictReader(body))


def _write_csv(path: str, meta: dict, header: list, rows) -> None:
    with _open_write(path) as fh:
        for k, v in meta.items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


SNAPSHOT_COLUMNS = ["element_index", "depth_m", "pressure_re", "pressure_im"]


def write_snapshot(snapshot: Snapshot, path: str, range_m: Optional[float] = None) -> None:
    """Snapshot CSV; ``depth_m`` holds the nominal (reported) element depths."""
    meta = {"frequency_hz": _fmt(snapshot.frequency_hz),
            "snr_db": "none" if snapshot.snr_db is None else _fmt(snapshot.snr_db),
            "seed": "none" if snapshot.seed is None else str(snapshot.seed),
            "noise_epsilon": _fmt(snapshot.noise_epsilon)}
    if range_m is not None:
        meta["range_m"] = _fmt(range_m)
    rows = [[n + 1, _fmt(z), _fmt(p.real), _fmt(p.imag)]
            for n, (z, p) in enumerate(zip(snapshot.nominal_depths, snapshot.pressures))]
    _write_csv(path, meta, SNAPSHOT_COLUMNS, rows)


def read_snapshot(path: str) -> Snapshot:
    """Read a snapshot CSV; missing metadata means unknown noise level and provenance."""
    meta, rows = _read_csv(path)
    if not rows:
        raise IoFailure(f"{path}: no snapshot rows")
    try:
        rows.sort(key=lambda r: int(r["element_index"]))
        depths = np.array([float(r["depth_m"]) for r in rows])
        p = np.array([complex(float(r["pressure_re"]), float(r["pressure_im"])) for r in rows])
        freq = float(meta["frequency_hz"])
        eps = float(meta.get("noise_epsilon", 0.0))
        snr = None if meta.get("snr_db", "none") == "none" else float(meta["snr_db"])
        seed = None if meta.get("seed", "none") == "none" else int(meta["seed"])
        r = float(meta.get("range_m", "nan"))
    except KeyError as exc:
        raise IoFailure(f"{path}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise IoFailure(f"{path}: malformed value ({exc})") from None
    pos = ElementPositions(depths, np.full(depths.size, r))
    return Snapshot(p, pos, freq, eps, seed, snr, depths)


def write_mode_set(modes: ModeSet, path: str, h: float) -> None:
    """One row per mode: mode_number, xi, then the normalized samples psi_1..psi_L."""
    P = modes.matrix
    header = ["mode_number", "xi"] + [f"psi_{l + 1}" for l in range(P.shape[0])]
    rows = [[m.mode_number, _fmt(m.xi)] + [_fmt(v) for v in m.psi] for m in modes]
    _write_csv(path, {"depth_step_h": _fmt(h), "n_modes": len(modes)}, header, rows)


def read_mode_set_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mode_numbers, xis, psi matrix of shape (L, M)) from a mode CSV."""
    _, rows = _read_csv(path)
    if not rows:
        return np.zeros(0, int), np.zeros(0), np.zeros((0, 0))
    cols = [k for k in rows[0] if k.startswith("psi_")]
    numbers = np.array([int(r["mode_number"]) for r in rows])
    xis = np.array([float(r["xi"]) for r in rows])
    psi = np.array([[float(r[c]) for c in cols] for r in rows]).T
    return numbers, xis, psi


def write_correlation(curve: CorrelationCurve, path: str, xi_ref: float) -> None:
    with np.errstate(divide="ignore"):
        ln_c = np.log(curve.c_values)
    rows = [[_fmt(x), _fmt(c), _fmt(l)] for x, c, l in zip(curve.xi_grid, curve.c_values, ln_c)]
    _write_csv(path, {"xi_ref": _fmt(xi_ref)}, ["xi", "c", "ln_c"], rows)


def write_estimate(result, path: str) -> None:
    rows = [[int(m), _fmt(k)] for m, k in zip(result.mode_numbers, result.k_hat)]
    meta = {"xi_1": _fmt(result.xi_1), "epsilon": _fmt(result.epsilon),
            "winning_index": result.winning_index}
    _write_csv(path, meta, ["mode_number", "k_hat"], rows)


def write_objective_curve(curve, path: str) -> None:
    rows = [[_fmt(x), _fmt(e), int(f), _fmt(r), _fmt(a)]
            for x, e, f, r, a in zip(curve.xi_grid, curve.e, curve.feasible, curve.residual, curve.anchor)]
    _write_csv(path, {}, ["xi_1", "e", "feasible", "residual", "anchor"], rows)


# ---- experiment configuration -------------------------------------------------

EXPERIMENT_KEYS = {"suite", "sweep_values", "trials_per_point", "seed_base", "snr_db", "snr_convention",
                   "ssp_mode", "phase_per_element", "modes_kept", "env_file", "source.depth_m",
                   "source.range_m", "array.depths", "array.range_m", "array.tilt_deg",
                   "ocms.delta_xi", "ocms.tau", "ocms.residual_floor_slack", "ocms.objective_tie_rel",
                   "ocms.n_polish"}


def parse_number_list(text: str) -> np.ndarray:
    """``a, b, c`` or ``first:last:count`` (inclusive linspace)."""
    text = text.strip()
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(s) for s in text.replace(",", " ").split()])


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_experiment_config(path: str, seed_base: Optional[int] = None):
    """ExperimentConfig from a key-value file.

    The environment is either given inline (environment keys plus an
    ``ssp.table`` block) or by ``env_file``, resolved relative to the config
    file. ``seed_base`` overrides the file's value when given.
    """
    from .experiments import ExperimentConfig

    values, rows = parse_key_values(_read_text(path), path)
    unknown = set(values) - EXPERIMENT_KEYS - ENV_KEYS
    if unknown:
        raise IoFailure(f"{path}: unknown keys {sorted(unknown)}")
    if "env_file" in values:
        env = read_environment(os.path.join(os.path.dirname(os.path.abspath(path)), values["env_file"]))
    else:
        env = environment_from_values({k: v for k, v in values.items() if k in ENV_KEYS}, rows, path)
    try:
        depths = parse_number_list(values.get("array.depths", "1:50:50"))
        geometry = ArrayGeometry(depths, float(values.get("array.range_m", 5000.0)),
                                 float(values.get("array.tilt_deg", 0.0)))
        source = SourceSpec(float(values.get("source.depth_m", 8.0)), float(values.get("source.range_m", 5000.0)))
        ocms = {}
        for key, cast in (("delta_xi", float), ("tau", float), ("residual_floor_slack", float),
                          ("objective_tie_rel", float), ("n_polish", int)):
            if f"ocms.{key}" in values:
                ocms[key] = cast(values[f"ocms.{key}"])
        if "suite" not in values or "sweep_values" not in values:
            raise IoFailure(f"{path}: 'suite' and 'sweep_values' are required")
        return ExperimentConfig(
            suite=values["suite"],
            sweep_values=tuple(parse_number_list(values["sweep_values"])),
            env=env, geometry=geometry, source=source,
            trials_per_point=int(values.get("trials_per_point", 50)),
            seed_base=int(values.get("seed_base", 0)) if seed_base is None else int(seed_base),
            snr_db=float(values.get("snr_db", 30.0)),
            snr_convention=values.get("snr_convention", "norm"),
            ssp_mode=values.get("ssp_mode", "per_point"),
            phase_per_element=_bool(values.get("phase_per_element", "true")),
            modes_kept=int(values["modes_kept"]) if "modes_kept" in values else None,
            ocms=ocms)
    except ValueError as exc:
        raise IoFailure(f"{path}: malformed value ({exc})") from None
