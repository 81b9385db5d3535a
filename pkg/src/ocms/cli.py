"""
Command-line entry point.

Exit status is 0 on success, 2 on a usage error and 1 on a computation or
file error, in which case stderr carries one ``ErrorClass: message`` line.
``OCMS_LOG`` (quiet, info or debug) sets the log level.
"""

from __future__ import annotations

import argparse
from dataclasses import replace
import logging
import os
import sys

from . import io
from .errors import IoFailure, OcmsError
from .estimator import FixedEpsilon, FromSnapshot, OcmsConfig, estimate
from .experiments import (SSP_SEED_OFFSET, aggregate_from_records, emit_report, read_trials_csv, run_suite,
                          write_aggregate_csv)
from .field_synth import SourceSpec, add_noise, synthesize
from .modal_scan import ScanConfig, build_mode_set, correlation_curve
from .reference_solver import propagating_modes, solve_modes
from .waveguide import ArrayGeometry, perturb_ssp, search_bounds

LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("OCMS_LOG", "quiet").lower()
    logging.basicConfig(level=LOG_LEVELS.get(name, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _depths(text):
    try:
        return io.parse_number_list(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth list {text!r}; use 'a,b,c' or 'first:last:count'") from None


def _band(env, args):
    lo, hi = search_bounds(env)
    return (lo if args.xi_min is None else args.xi_min), (hi if args.xi_max is None else args.xi_max)


def cmd_modes(args) -> int:
    env = io.read_environment(args.env)
    modes = solve_modes(env)
    if args.max_modes is not None:
        modes = type(modes)(modes.modes[:args.max_modes], modes.env_fingerprint, modes.bottom, modes.h,
                            dict(modes.diagnostics))
    io.write_mode_set(modes, args.out, env.depth_step_h)
    print(f"{len(modes)} modes written to {args.out}")
    return 0


def cmd_scan(args) -> int:
    env = io.read_environment(args.env)
    xi_min, xi_max = _band(env, args)
    config = ScanConfig(xi_min, xi_max, args.delta_xi, ortho_threshold_tau=args.tau)
    xi_ref = propagating_modes(env).xis[0] if args.xi_ref is None else args.xi_ref
    curve = correlation_curve(env, xi_ref, config)
    io.write_correlation(curve, args.out, xi_ref)
    if args.modes_out:
        modes = build_mode_set(env, xi_ref, config)
        io.write_mode_set(modes, args.modes_out, env.depth_step_h)
        print(f"{len(modes)} modes in the set anchored at {float(xi_ref)!r}")
    return 0


def cmd_synth(args) -> int:
    env = io.read_environment(args.env)
    if args.ssp_alpha > 0:
        env = perturb_ssp(env, args.ssp_alpha, args.seed + SSP_SEED_OFFSET, args.ssp_mode)
    modes = propagating_modes(env)
    if args.modes_kept is not None:
        modes = type(modes)(modes.modes[:args.modes_kept], modes.env_fingerprint, modes.bottom, modes.h,
                            dict(modes.diagnostics))
    geometry = ArrayGeometry(args.depths, args.range, args.tilt)
    source = SourceSpec(args.source_depth, args.range)
    snap = synthesize(modes, source, geometry, env, phase_per_element=not args.common_phase)
    if args.snr is not None:
        snap = add_noise(snap, args.snr, args.seed, args.snr_convention)
    io.write_snapshot(snap, args.out, range_m=args.range)
    return 0


def cmd_ocms(args) -> int:
    env = io.read_environment(args.env)
    snap = io.read_snapshot(args.snapshot)
    xi_min, xi_max = _band(env, args)
    scan = ScanConfig(xi_min, xi_max, args.delta_xi, ortho_threshold_tau=args.tau)
    if args.epsilon == "auto":
        config = OcmsConfig(xi_min, xi_max, args.delta_xi, scan, FromSnapshot())
    else:
        config = OcmsConfig(xi_min, xi_max, args.delta_xi, scan, FixedEpsilon(float(args.epsilon)),
                            residual_floor_slack=None)
    result = estimate(snap, env, None, config)
    io.write_estimate(result, args.out)
    curve_path = args.curve_out or os.path.splitext(args.out)[0] + "_curve.csv"
    io.write_objective_curve(result.objective_curve, curve_path)
    print(f"{len(result.k_hat)} wavenumbers (xi_1 = {float(result.xi_1)!r}, epsilon = {result.epsilon:.6g})")
    for m, k in zip(result.mode_numbers, result.k_hat):
        print(f"mode {int(m):3d}  k = {float(k)!r}")
    return 0


def cmd_montecarlo(args) -> int:
    config = io.read_experiment_config(args.config, seed_base=args.seed)
    if args.trials is not None:
        config = replace(config, trials_per_point=args.trials)
    result = run_suite(config, jobs=args.jobs)
    print(emit_report(result, args.out_dir))
    return 0


def cmd_report(args) -> int:
    records = [r for path in args.trials for r in read_trials_csv(path)]
    aggregate = aggregate_from_records(records)
    write_aggregate_csv(aggregate, args.out)
    print(f"{len(aggregate)} aggregate rows from {len(records)} trials written to {args.out}")
    return 0


def _band_flags(p):
    p.add_argument("--xi-min", type=float, help="lower search bound (default: from the environment)")
    p.add_argument("--xi-max", type=float, help="upper search bound (default: omega / min c)")
    p.add_argument("--delta-xi", type=float, default=1e-4, help="grid step (rad/m)")
    p.add_argument("--tau", type=float, default=0.2, help="correlation threshold for the orthogonality scan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocms", description="Single-snapshot modal wavenumber estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="solve the reference eigenproblem; write every real-wavenumber mode to CSV")
    p.add_argument("--env", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-modes", type=_positive_int)
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("scan", help="correlation curve and orthogonal mode set for one anchor")
    p.add_argument("--env", required=True)
    p.add_argument("--xi-ref", type=float, help="anchor wavenumber (default: first reference mode)")
    _band_flags(p)
    p.add_argument("--out", required=True, help="correlation CSV")
    p.add_argument("--modes-out", help="also write the mode set CSV")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("synth", help="synthesize a snapshot CSV")
    p.add_argument("--env", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source-depth", type=float, default=8.0)
    p.add_argument("--range", type=float, default=5000.0)
    p.add_argument("--depths", type=_depths, default=_depths("1:50:50"),
                   help="nominal element depths, 'a,b,c' or 'first:last:count'")
    p.add_argument("--tilt", type=float, default=0.0, help="array tilt in degrees")
    p.add_argument("--snr", type=float, help="add noise at this SNR (dB); needs --seed")
    p.add_argument("--snr-convention", choices=["norm", "energy"], default="norm")
    p.add_argument("--ssp-alpha", type=float, default=0.0, help="SSP perturbation amplitude (m/s); needs --seed")
    p.add_argument("--ssp-mode", choices=["per_point", "per_profile"], default="per_point")
    p.add_argument("--modes-kept", type=_positive_int)
    p.add_argument("--common-phase", action="store_true", help="use the source range for every element")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ocms", help="estimate wavenumbers from a snapshot CSV")
    p.add_argument("--env", required=True)
    p.add_argument("--snapshot", required=True)
    _band_flags(p)
    p.add_argument("--epsilon", default="auto", help="'auto' (noise level from the snapshot) or a number")
    p.add_argument("--out", required=True, help="per-mode estimate CSV")
    p.add_argument("--curve-out", help="objective curve CSV (default: <out>_curve.csv)")
    p.set_defaults(func=cmd_ocms)

    p = sub.add_parser("montecarlo", help="run a Monte Carlo suite")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True, help="seed base for all trials")
    p.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--trials", type=_positive_int, help="override trials_per_point")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("report", help="aggregate trial CSVs")
    p.add_argument("--trials", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def _validate(parser, args) -> None:
    if args.command == "synth" and (args.snr is not None or args.ssp_alpha > 0) and args.seed is None:
        parser.error("argument --seed: required when --snr or --ssp-alpha is given")
    if args.command == "ocms" and args.epsilon != "auto":
        try:
            float(args.epsilon)
        except ValueError:
            parser.error(f"argument --epsilon: expected 'auto' or a number, got {args.epsilon!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging()
    try:
        return args.func(args)
    except OcmsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"{IoFailure.__name__}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
