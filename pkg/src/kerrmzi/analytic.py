"""Closed-form homodyne moments of the second-order nonlinear interferometer.

For a coherent input of mean photon number N, linear phase theta on mode B
and nonlinear phase phi of order k = 2 on mode A, the mean of the measured
X quadrature is

    <X> = -sqrt(N) * [ sin(theta) + exp(-N sin^2 phi) * sin((N/2) sin 2phi) ]

and the validated (CORRECTED) second moment is

    <X^2> = 1 + N - (N/2) * [ cos 2theta
                              + exp(-N sin^2 2phi) * cos(2phi + (N/2) sin 4phi) ]
            + 2 N sin(theta) exp(-N sin^2 phi) sin((N/2) sin 2phi).

Every expression here is cross-checked against the truncated Fock-space
simulation in :mod:`kerrmzi.fock`; the UNCORRECTED second-moment variant is
retained only so its failure against the oracle can be quantified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .optimize import golden_section_minimize
from .params import (
    LossPlacement,
    LossSpec,
    ProtocolParams,
    QuadratureMoments,
    SecondMomentForm,
)

VISIBILITY_GRID_POINTS = 4096
VISIBILITY_TOL = 1e-10


def _require_second_order(params: ProtocolParams) -> None:
    if params.order != 2:
        raise ValueError(
            f"closed forms are available for order k = 2 only, got k = {params.order}; "
            "use the Fock oracle for other orders"
        )


# Vectorized cores.  These accept scalars or numpy arrays (broadcasting) and
# perform no validation; the public operations validate and delegate.

def mean_x_value(n: float | np.ndarray, phi: float | np.ndarray, theta: float | np.ndarray):
    envelope = np.exp(-n * np.sin(phi) ** 2) * np.sin(0.5 * n * np.sin(2.0 * phi))
    return -np.sqrt(n) * (np.sin(theta) + envelope)


def second_moment_x_value(
    n: float | np.ndarray,
    phi: float | np.ndarray,
    theta: float | np.ndarray,
    form: SecondMomentForm = SecondMomentForm.CORRECTED,
):
    fringe = np.exp(-n * np.sin(phi) ** 2) * np.sin(0.5 * n * np.sin(2.0 * phi))
    if form is SecondMomentForm.CORRECTED:
        quad = np.exp(-n * np.sin(2.0 * phi) ** 2) * np.cos(2.0 * phi + 0.5 * n * np.sin(4.0 * phi))
        return 1.0 + n - 0.5 * n * (np.cos(2.0 * theta) + quad) + 2.0 * n * np.sin(theta) * fringe
    quad = np.exp(-2.0 * n * np.sin(phi) ** 2) * np.cos(n * np.sin(2.0 * phi))
    return n - 0.5 * n * (np.cos(2.0 * theta) - quad) + 1.0 + 2.0 * n * fringe * np.sin(theta)


def slope_x_value(n: float | np.ndarray, phi: float | np.ndarray):
    return -(n**1.5) * np.exp(-n * np.sin(phi) ** 2) * np.cos(2.0 * phi + 0.5 * n * np.sin(2.0 * phi))


def variance_x_value(
    n: float | np.ndarray,
    phi: float | np.ndarray,
    theta: float | np.ndarray,
    form: SecondMomentForm = SecondMomentForm.CORRECTED,
):
    return second_moment_x_value(n, phi, theta, form) - mean_x_value(n, phi, theta) ** 2


def expectation_x(params: ProtocolParams) -> float:
    """Mean of the measured X quadrature at the given operating point."""
    _require_second_order(params)
    return float(mean_x_value(params.mean_photon_number, params.phi, params.theta))


def second_moment_x(
    params: ProtocolParams, form: SecondMomentForm = SecondMomentForm.CORRECTED
) -> float:
    """Second moment of the measured X quadrature.

    form selects between the oracle-validated CORRECTED expression and the
    UNCORRECTED one kept for discrepancy reporting (see SecondMomentForm).
    """
    _require_second_order(params)
    return float(second_moment_x_value(params.mean_photon_number, params.phi, params.theta, form))


def slope_x(params: ProtocolParams) -> float:
    """Derivative of expectation_x with respect to the nonlinear phase phi.

    Analytic form -N^{3/2} exp(-N sin^2 phi) cos(2phi + (N/2) sin 2phi);
    the test suite pins it against a central finite difference of
    expectation_x.
    """
    _require_second_order(params)
    return float(slope_x_value(params.mean_photon_number, params.phi))


def moments(
    params: ProtocolParams, form: SecondMomentForm = SecondMomentForm.CORRECTED
) -> QuadratureMoments:
    """Lossless mean and second moment bundled with the derived variance."""
    return QuadratureMoments(expectation_x(params), second_moment_x(params, form))


def moments_with_loss(
    params: ProtocolParams,
    loss: LossSpec,
    form: SecondMomentForm = SecondMomentForm.CORRECTED,
) -> QuadratureMoments:
    """Quadrature moments with equal photon loss in both paths.

    Loss before the nonlinear phase rescales the coherent amplitude by
    sqrt(T), so the moments coincide with the lossless ones at N' = T*N.
    Loss after the phase acts directly on the measured mode:
    mean -> sqrt(T)*mean and <X^2> -> T*<X^2> + 1 - T.
    """
    _require_second_order(params)
    t = loss.transmissivity
    if loss.placement is LossPlacement.NONE:
        return moments(params, form)
    if loss.placement is LossPlacement.BEFORE_PHASE:
        scaled = ProtocolParams(t * params.mean_photon_number, params.theta, params.phi, params.order)
        return moments(scaled, form)
    base = moments(params, form)
    return QuadratureMoments(
        math.sqrt(t) * base.mean, t * base.second_moment + 1.0 - t
    )


def slope_with_loss(params: ProtocolParams, loss: LossSpec) -> float:
    """phi-derivative of the lossy mean, matching moments_with_loss."""
    _require_second_order(params)
    t = loss.transmissivity
    if loss.placement is LossPlacement.NONE:
        return slope_x(params)
    if loss.placement is LossPlacement.BEFORE_PHASE:
        return float(slope_x_value(t * params.mean_photon_number, params.phi))
    return math.sqrt(t) * slope_x(params)


@dataclass(frozen=True)
class FringeScan:
    """Mean-quadrature fringe sampled over a nonlinear-phase grid."""

    phi: np.ndarray
    raw_mean: np.ndarray
    normalized_mean: np.ndarray


def fringe_scan(n: float, theta: float, phi_grid) -> FringeScan:
    """Scan the mean quadrature over phi at fixed theta.

    normalized_mean is raw_mean / sqrt(N), removing the overall coherent
    amplitude so fringes for different N share a common scale.
    """
    if not (math.isfinite(n) and n > 0.0):
        raise ValueError(f"mean photon number must be positive, got {n}")
    grid = np.asarray(phi_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("phi grid must not be empty")
    raw = mean_x_value(n, grid, theta)
    return FringeScan(phi=grid, raw_mean=raw, normalized_mean=raw / math.sqrt(n))


def visibility(
    n: float,
    theta: float = math.pi / 2,
    phi_domain: tuple[float, float] = (-math.pi / 2, math.pi / 2),
) -> float:
    """Fringe visibility (max - min) / (|max| + |min|) of the mean quadrature.

    Extrema are taken over phi in phi_domain at fixed theta.  The fringe is
    highly oscillatory at large N, so a dense scan brackets the extrema and
    golden-section refinement polishes them.
    """
    if not (math.isfinite(n) and n > 0.0):
        raise ValueError(f"mean photon number must be positive, got {n}")
    lo, hi = float(phi_domain[0]), float(phi_domain[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError(f"degenerate phi domain {phi_domain}")
    grid = np.linspace(lo, hi, VISIBILITY_GRID_POINTS)
    vals = mean_x_value(n, grid, theta)

    def f(phi: float) -> float:
        return float(mean_x_value(n, phi, theta))

    i_min = int(np.argmin(vals))
    i_max = int(np.argmax(vals))
    _, mn = golden_section_minimize(
        f, grid[max(i_min - 1, 0)], grid[min(i_min + 1, grid.size - 1)], tol=VISIBILITY_TOL
    )
    _, neg_mx = golden_section_minimize(
        lambda p: -f(p),
        grid[max(i_max - 1, 0)],
        grid[min(i_max + 1, grid.size - 1)],
        tol=VISIBILITY_TOL,
    )
    mx = -neg_mx
    mn = min(mn, float(vals[i_min]))
    mx = max(mx, float(vals[i_max]))
    denom = abs(mx) + abs(mn)
    if denom == 0.0:
        return 0.0
    return (mx - mn) / denom
