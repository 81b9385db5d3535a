"""
Single-snapshot estimation of acoustic normal-mode wavenumbers.

The estimator searches one wavenumber (the first mode's), builds the rest
of the mode set from water-column orthogonality, and picks the anchor whose
set explains the array data with the sparsest modal amplitudes.
"""

from .errors import OcmsError
from .waveguide import (ArrayGeometry, Environment, FluidHalfspace, PressureRelease, apply_tilt, isovelocity,
                        perturb_ssp, thermocline)
from .shooting import ModeFunction, ModeSet, count_mode_number, normalize, shoot_raw
from .modal_scan import ScanConfig, build_mode_set, correlation_curve
from .field_synth import Snapshot, SourceSpec, add_noise, synthesize
from .sparse_solver import BpdnProblem, solve_bpdn
from .reference_solver import propagating_modes, solve_modes
from .estimator import (EstimateResult, FixedEpsilon, Fraction, FromSnapshot, OcmsConfig, aggregate_trials,
                        estimate, relative_error)
from .experiments import ExperimentConfig, emit_report, run_suite

__version__ = "0.1.0"
