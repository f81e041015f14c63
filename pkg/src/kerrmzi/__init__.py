"""Nonlinear phase estimation in a coherent-state interferometer.

A numpy/scipy library modeling a Mach-Zehnder interferometer whose one arm
carries a second-order (Kerr-type) nonlinear phase, read out by balanced
homodyne detection.  Closed forms for the quadrature moments, sensitivity,
visibility, phase-averaged quantum Fisher information and loss behavior are
all cross-validated against an independent truncated Fock-space simulation.
"""

__version__ = "0.1.0"

from .analytic import (
    FringeScan,
    expectation_x,
    fringe_scan,
    moments,
    moments_with_loss,
    second_moment_x,
    slope_with_loss,
    slope_x,
    visibility,
)
from .estimation import (
    InsensitivePointError,
    MomentsSource,
    SensitivityReport,
    allowable_max_loss,
    find_optimum,
    fisher_ratio,
    lossy_optimum,
    oracle_sensitivity_at,
    sensitivity_from_moments,
)
from .fock import (
    MixedState2M,
    PureState2M,
    TruncationError,
    apply_bs_5050,
    apply_linear_phase,
    apply_loss,
    apply_nonlinear_phase,
    coherent_two_mode,
    default_n_max,
    dump_state_json,
    end_to_end_moments,
    normal_ordered_expectation,
    psi_p_state,
    x_moment_grid,
    x_moments,
)
from .params import (
    LossPlacement,
    LossSpec,
    ProtocolParams,
    QuadratureMoments,
    SecondMomentForm,
)
from .qfi import (
    QfiResult,
    SectorTerm,
    phase_averaged_qfi,
    qcrb,
    qfi_closed_form,
    sector_qfi,
    sector_qfi_bruteforce,
    sector_term,
)
from .validate import ValidationReport, run_validation

__all__ = [
    "FringeScan",
    "InsensitivePointError",
    "LossPlacement",
    "LossSpec",
    "MixedState2M",
    "MomentsSource",
    "ProtocolParams",
    "PureState2M",
    "QfiResult",
    "QuadratureMoments",
    "SecondMomentForm",
    "SectorTerm",
    "SensitivityReport",
    "TruncationError",
    "ValidationReport",
    "allowable_max_loss",
    "apply_bs_5050",
    "apply_linear_phase",
    "apply_loss",
    "apply_nonlinear_phase",
    "coherent_two_mode",
    "default_n_max",
    "dump_state_json",
    "end_to_end_moments",
    "expectation_x",
    "find_optimum",
    "fisher_ratio",
    "fringe_scan",
    "lossy_optimum",
    "moments",
    "moments_with_loss",
    "normal_ordered_expectation",
    "oracle_sensitivity_at",
    "phase_averaged_qfi",
    "psi_p_state",
    "qcrb",
    "qfi_closed_form",
    "run_validation",
    "second_moment_x",
    "sector_qfi",
    "sector_qfi_bruteforce",
    "sector_term",
    "sensitivity_from_moments",
    "slope_with_loss",
    "slope_x",
    "visibility",
    "x_moment_grid",
    "x_moments",
]
