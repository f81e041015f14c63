"""Shared domain types for the nonlinear-phase interferometer model.

Conventions used throughout the package: the interferometer is fed by a
coherent state with real positive amplitude alpha = sqrt(N) in mode A and
vacuum in mode B; the measured quadrature is X = b + b^dag, so the vacuum
has unit variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

VARIANCE_TOL = 1e-12


class LossPlacement(str, Enum):
    """Where the photon-loss channel sits relative to the nonlinear phase."""

    NONE = "none"
    BEFORE_PHASE = "before"
    AFTER_PHASE = "after"


class SecondMomentForm(str, Enum):
    """Which closed form of the quadrature second moment to evaluate.

    CORRECTED is the form validated against the Fock-space oracle and is
    the default everywhere.  UNCORRECTED is an alternative form that fails
    the coherent-state sanity check at phi = 0 (its variance there is N + 1
    instead of 1); it is kept so the discrepancy can be measured and
    reported rather than silently patched.
    """

    CORRECTED = "corrected"
    UNCORRECTED = "uncorrected"


@dataclass(frozen=True)
class ProtocolParams:
    """Operating point of the estimation protocol.

    mean_photon_number: N = alpha**2, alpha real positive.
    theta: linear phase on mode B, radians.
    phi: nonlinear phase, radians.
    order: exponent k of the number operator in the nonlinear phase
        exp(i phi n^k).  The closed-form model supports k = 2 only; the
        Fock oracle accepts any k >= 1.
    """

    mean_photon_number: float
    theta: float = 0.0
    phi: float = 0.0
    order: int = 2

    def __post_init__(self) -> None:
        n = self.mean_photon_number
        if not (math.isfinite(n) and n >= 0.0):
            raise ValueError(f"mean photon number must be finite and >= 0, got {n}")
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("theta and phi must be finite")
        if not (isinstance(self.order, int) and self.order >= 1):
            raise ValueError(f"nonlinearity order must be an integer >= 1, got {self.order}")

    @property
    def alpha(self) -> float:
        return math.sqrt(self.mean_photon_number)


@dataclass(frozen=True)
class QuadratureMoments:
    """First and second moment of the measured X quadrature."""

    mean: float
    second_moment: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and math.isfinite(self.second_moment)):
            raise ValueError("quadrature moments must be finite")
        if self.second_moment < self.mean**2 - VARIANCE_TOL:
            raise ValueError(
                f"second moment {self.second_moment} below mean^2 {self.mean**2}: "
                "negative variance beyond tolerance"
            )

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2


@dataclass(frozen=True)
class LossSpec:
    """Photon loss modeled as a beam splitter of transmissivity T.

    Both interferometer paths suffer the same loss.  placement = NONE
    behaves exactly like T = 1 (no channel at all).
    """

    transmissivity: float = 1.0
    placement: LossPlacement = LossPlacement.NONE

    def __post_init__(self) -> None:
        t = self.transmissivity
        if not (math.isfinite(t) and 0.0 <= t <= 1.0):
            raise ValueError(f"transmissivity must lie in [0, 1], got {t}")
        if not isinstance(self.placement, LossPlacement):
            object.__setattr__(self, "placement", LossPlacement(self.placement))

    @classmethod
    def none(cls) -> "LossSpec":
        return cls(1.0, LossPlacement.NONE)

    @property
    def loss_ratio(self) -> float:
        return 1.0 - self.transmissivity

    @property
    def is_active(self) -> bool:
        """True when the channel actually does something."""
        return self.placement is not LossPlacement.NONE and self.transmissivity < 1.0
