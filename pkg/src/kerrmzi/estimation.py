"""Error-propagation sensitivity and operating-point optimization.

The estimator uncertainty is delta_phi = sqrt(Var X) / |d<X>/dphi|.  Its
minimum over the operating point (phi, theta) is N^{-3/2}, reached at
phi = 0.  The objective is exactly independent of theta in this model (the
theta-dependent parts of <X^2> and <X>^2 cancel and the slope carries no
theta), so the optimizer detects the flat direction and reports the
canonical representative: the theta in [0, pi] at which the mean fringe is
stationary (d<X>/dtheta = 0), i.e. theta = pi/2.  This is also the point
where the estimate is first-order insensitive to linear-phase noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import analytic, fock
from .optimize import golden_section_minimize, refine_grid_minimum
from .params import LossPlacement, LossSpec, ProtocolParams, QuadratureMoments

SLOPE_FLOOR = 1e-9
GRID_POINTS = 256
ANGLE_TOL = 1e-10
FD_STEP = 1e-5
FLATNESS_REL = 1e-9


class InsensitivePointError(RuntimeError):
    """The mean response does not move with phi; the estimator is uninformative."""


class MomentsSource(str, Enum):
    ANALYTIC = "analytic"
    ORACLE = "oracle"


@dataclass(frozen=True)
class SensitivityReport:
    delta_phi: float
    phi_star: float
    theta_star: float
    slope: float
    moments_source: MomentsSource


def sensitivity_from_moments(moments: QuadratureMoments, slope: float) -> float:
    """sqrt(variance) / |slope|, guarding the insensitive-slope singularity."""
    if not math.isfinite(slope):
        raise ValueError(f"slope must be finite, got {slope}")
    if abs(slope) <= SLOPE_FLOOR:
        raise InsensitivePointError(
            f"|slope| = {abs(slope):.3e} is below the floor {SLOPE_FLOOR:.0e}; "
            "the operating point carries no phase information"
        )
    return math.sqrt(max(moments.variance, 0.0)) / abs(slope)


def allowable_max_loss(mean_photon_number: float) -> float:
    """Largest loss ratio keeping the lossy optimum below the Heisenberg limit.

    From (T N)^{-3/2} <= 1/N the threshold is L = 1 - N^{-1/3}; defined for
    N >= 1 (below that no loss is tolerable and the bound would go negative).
    """
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n >= 1.0):
        raise ValueError(f"mean photon number must be >= 1, got {n}")
    return 1.0 - n ** (-1.0 / 3.0)


def fisher_ratio(mean_photon_number: float) -> float:
    """Available information fraction (qcrb / delta_phi)^2 = N / (N + 3/2)."""
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n > 0.0):
        raise ValueError(f"mean photon number must be positive, got {n}")
    return n / (n + 1.5)


# --------------------------------------------------------------------------
# model-side objective


def _model_var_slope(n: float, phi, theta, loss: LossSpec):
    """Vectorized (variance, slope) of the lossy closed-form model."""
    t = loss.transmissivity
    if loss.placement is LossPlacement.BEFORE_PHASE:
        n_eff = t * n
        return analytic.variance_x_value(n_eff, phi, theta), analytic.slope_x_value(n_eff, phi)
    var = analytic.variance_x_value(n, phi, theta)
    slope = analytic.slope_x_value(n, phi)
    if loss.placement is LossPlacement.AFTER_PHASE:
        return t * var + (1.0 - t), math.sqrt(t) * slope
    return var, slope


def _model_sensitivity(n: float, phi: float, theta: float, loss: LossSpec) -> float:
    var, slope = _model_var_slope(n, phi, theta, loss)
    if abs(slope) <= SLOPE_FLOOR:
        return math.inf
    return math.sqrt(max(float(var), 0.0)) / abs(float(slope))


def _model_mean(n: float, phi: float, theta, loss: LossSpec):
    t = loss.transmissivity
    if loss.placement is LossPlacement.BEFORE_PHASE:
        return analytic.mean_x_value(t * n, phi, theta)
    scale = math.sqrt(t) if loss.placement is LossPlacement.AFTER_PHASE else 1.0
    return scale * analytic.mean_x_value(n, phi, theta)


# --------------------------------------------------------------------------
# oracle-side objective


class _OracleObjective:
    """Cached oracle sensitivity with finite-difference slope."""

    def __init__(self, n: float, loss: LossSpec, compensated: bool, n_max: int | None):
        self.n = n
        self.loss = loss
        self.compensated = compensated
        self.n_max = n_max if n_max is not None else fock.default_n_max(n)
        self._cache: dict[tuple[float, float], QuadratureMoments] = {}

    def moments(self, phi: float, theta: float) -> QuadratureMoments:
        key = (phi, theta)
        got = self._cache.get(key)
        if got is None:
            got = fock.end_to_end_moments(
                ProtocolParams(self.n, theta, phi),
                self.loss,
                n_max=self.n_max,
                compensated=self.compensated,
            )
            self._cache[key] = got
        return got

    def mean(self, phi: float, theta: float) -> float:
        return self.moments(phi, theta).mean

    def slope(self, phi: float, theta: float) -> float:
        return (self.mean(phi + FD_STEP, theta) - self.mean(phi - FD_STEP, theta)) / (2.0 * FD_STEP)

    def sensitivity(self, phi: float, theta: float) -> float:
        slope = self.slope(phi, theta)
        if abs(slope) <= SLOPE_FLOOR:
            return math.inf
        return math.sqrt(max(self.moments(phi, theta).variance, 0.0)) / abs(slope)


def oracle_sensitivity_at(
    params: ProtocolParams,
    loss: LossSpec | None = None,
    *,
    compensated: bool = True,
    n_max: int | None = None,
) -> float:
    """Oracle-evaluated sensitivity at a fixed operating point.

    Moments come from the Fock pipeline; the slope is a central finite
    difference of the oracle mean.
    """
    obj = _OracleObjective(
        params.mean_photon_number, loss or LossSpec.none(), compensated, n_max
    )
    value = obj.sensitivity(params.phi, params.theta)
    if math.isinf(value):
        raise InsensitivePointError(f"oracle slope below floor at phi={params.phi}, theta={params.theta}")
    return value


# --------------------------------------------------------------------------
# search


def _tie_break_theta(mean_of_theta, phi_star: float) -> float:
    """Representative theta in [0, pi] for the flat direction: the fringe
    extremum, where the mean is stationary in theta."""
    grid = np.linspace(0.0, math.pi, 65)
    vals = [-(abs(float(mean_of_theta(phi_star, t)))) for t in grid]
    theta, _ = refine_grid_minimum(
        lambda t: -(abs(float(mean_of_theta(phi_star, t)))), grid, vals, tol=ANGLE_TOL
    )
    return float(theta)


def _refine(
    sens_point,
    mean_point,
    phis: np.ndarray,
    thetas: np.ndarray,
    sens_grid: np.ndarray,
) -> tuple[float, float, float]:
    if not np.any(np.isfinite(sens_grid)):
        raise InsensitivePointError("every grid point is insensitive")
    i, j = np.unravel_index(np.nanargmin(np.where(np.isfinite(sens_grid), sens_grid, np.inf)), sens_grid.shape)
    phi0, theta0 = float(phis[i]), float(thetas[j])
    dphi = phis[1] - phis[0]
    dtheta = thetas[1] - thetas[0]

    phi_star, _ = golden_section_minimize(
        lambda p: sens_point(p, theta0),
        max(phis[0], phi0 - dphi),
        min(phis[-1], phi0 + dphi),
        tol=ANGLE_TOL,
    )

    probe = thetas[:: max(len(thetas) // 16, 1)]
    pvals = np.array([sens_point(phi_star, float(t)) for t in probe])
    finite = pvals[np.isfinite(pvals)]
    spread = float(finite.max() - finite.min()) if finite.size else 0.0
    scale = float(finite.min()) if finite.size else 1.0
    if finite.size == 0 or spread <= max(FLATNESS_REL * scale, 1e-15):
        theta_star = _tie_break_theta(mean_point, phi_star)
    else:
        theta_star, _ = golden_section_minimize(
            lambda t: sens_point(phi_star, t), theta0 - dtheta, theta0 + dtheta, tol=ANGLE_TOL
        )
        phi_star, _ = golden_section_minimize(
            lambda p: sens_point(p, theta_star),
            max(phis[0], phi_star - dphi),
            min(phis[-1], phi_star + dphi),
            tol=ANGLE_TOL,
        )
    return phi_star, theta_star % (2.0 * math.pi), sens_point(phi_star, theta_star)


def find_optimum(
    mean_photon_number: float,
    source: MomentsSource = MomentsSource.ANALYTIC,
    *,
    loss: LossSpec | None = None,
    compensated: bool = True,
    n_max: int | None = None,
) -> SensitivityReport:
    """Minimize the sensitivity over (phi, theta) in [-pi/4, pi/4] x [0, 2pi).

    Coarse 256 x 256 grid, then coordinate golden-section refinement to
    1e-10 per angle.  Insensitive grid points (slope below the floor) are
    excluded.  With source = ORACLE the objective is built from the Fock
    pipeline with a finite-difference slope; the search schedule is the
    same, with oracle evaluations cached and batched on the coarse grid.
    Oracle search with an active loss channel refines around the model
    optimum instead of scanning the full grid (each lossy oracle point is a
    full open-system simulation).
    """
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n > 0.0):
        raise ValueError(f"mean photon number must be positive, got {n}")
    source = MomentsSource(source)
    loss = loss or LossSpec.none()
    phis = np.linspace(-math.pi / 4.0, math.pi / 4.0, GRID_POINTS)
    thetas = np.linspace(0.0, 2.0 * math.pi, GRID_POINTS, endpoint=False)

    if source is MomentsSource.ANALYTIC:
        var, slope = _model_var_slope(n, phis[:, None], thetas[None, :], loss)
        var = np.broadcast_to(np.asarray(var, dtype=float), (phis.size, thetas.size))
        slope = np.broadcast_to(np.asarray(slope, dtype=float), (phis.size, thetas.size))
        with np.errstate(divide="ignore", invalid="ignore"):
            grid = np.where(
                np.abs(slope) > SLOPE_FLOOR,
                np.sqrt(np.clip(var, 0.0, None)) / np.abs(slope),
                np.inf,
            )
        phi_star, theta_star, best = _refine(
            lambda p, t: _model_sensitivity(n, p, t, loss),
            lambda p, t: _model_mean(n, p, t, loss),
            phis,
            thetas,
            grid,
        )
        _, slope_star = _model_var_slope(n, phi_star, theta_star, loss)
        slope_star = float(slope_star)
    else:
        obj = _OracleObjective(n, loss, compensated, n_max)
        if loss.is_active:
            seed = find_optimum(n, MomentsSource.ANALYTIC, loss=loss)
            dphi = phis[1] - phis[0]
            phi_star, _ = golden_section_minimize(
                lambda p: obj.sensitivity(p, seed.theta_star),
                seed.phi_star - 2.0 * dphi,
                seed.phi_star + 2.0 * dphi,
                tol=ANGLE_TOL,
            )
            theta_star = _tie_break_theta(obj.mean, phi_star)
            best = obj.sensitivity(phi_star, theta_star)
        else:
            mean0, second0 = fock.x_moment_grid(n, phis, thetas, compensated=compensated, n_max=obj.n_max)
            mean_p, _ = fock.x_moment_grid(n, phis + FD_STEP, thetas, compensated=compensated, n_max=obj.n_max)
            mean_m, _ = fock.x_moment_grid(n, phis - FD_STEP, thetas, compensated=compensated, n_max=obj.n_max)
            slope = (mean_p - mean_m) / (2.0 * FD_STEP)
            var = second0 - mean0**2
            with np.errstate(divide="ignore", invalid="ignore"):
                grid = np.where(
                    np.abs(slope) > SLOPE_FLOOR,
                    np.sqrt(np.clip(var, 0.0, None)) / np.abs(slope),
                    np.inf,
                )
            phi_star, theta_star, best = _refine(obj.sensitivity, obj.mean, phis, thetas, grid)
        slope_star = obj.slope(phi_star, theta_star)

    if not math.isfinite(best) or abs(slope_star) <= SLOPE_FLOOR:
        raise InsensitivePointError("search converged onto an insensitive point")
    return SensitivityReport(
        delta_phi=float(best),
        phi_star=float(phi_star),
        theta_star=float(theta_star),
        slope=slope_star,
        moments_source=source,
    )


def lossy_optimum(
    mean_photon_number: float,
    transmissivity: float,
    placement: LossPlacement | str,
    source: MomentsSource = MomentsSource.ANALYTIC,
) -> SensitivityReport:
    """Operating-point optimum with equal photon loss in both paths.

    Loss before the phase elements reproduces the lossless optimum of a
    (T N)-photon interferometer, (T N)^{-3/2}.  Loss after the phase
    elements yields sqrt((T + 1 - T) / T) / N^{3/2} = T^{-1/2} N^{-3/2} in
    this model; the comparison of the two scenarios is reported by the
    validation suite rather than asserted here.
    """
    t = float(transmissivity)
    if not (math.isfinite(t) and 0.0 < t <= 1.0):
        raise ValueError(f"transmissivity must lie in (0, 1], got {t}")
    loss = LossSpec(t, LossPlacement(placement))
    return find_optimum(mean_photon_number, source, loss=loss)
