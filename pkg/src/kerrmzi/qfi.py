"""Phase-averaged quantum Fisher information of the protocol.

Erasing the external phase reference turns the coherent input into a
Poisson mixture over total photon number p.  Each p-photon sector,
propagated through the first beam splitter, contributes

    F_p = (1/2) p (p - 1) (2p - 1)

to the total information F = sum_p w_p F_p with Poisson weights
w_p = e^{-N} N^p / p!.  The series resums to the closed form
F(N) = N^3 + (3/2) N^2, and the quantum bound on the phase uncertainty is
F^{-1/2}.

The sector value is independently recomputed here by brute force: the
reduced-mode photon number of the split p-photon state is Binomial(p, 1/2),
so all normal-ordered moments follow from exact falling-factorial moments
of that distribution, evaluated in rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

_TAIL_SAFETY_START = 2


@dataclass(frozen=True)
class SectorTerm:
    """One photon-number sector of the phase-averaged information series."""

    p: int
    weight: float
    sector_qfi: float


@dataclass(frozen=True)
class QfiResult:
    """Truncated series value with the truncation order and its tail bound."""

    value: float
    p_max: int
    tail_bound: float


def sector_qfi(p: int) -> float:
    """Information carried by the p-photon sector: (1/2) p (p-1) (2p-1)."""
    if not (isinstance(p, int) and p >= 0):
        raise ValueError(f"photon number must be a nonnegative integer, got {p}")
    return 0.5 * p * (p - 1) * (2 * p - 1)


def sector_qfi_bruteforce(p: int) -> Fraction:
    """Sector information from first principles, in exact rational arithmetic.

    The estimator is O = a^dag^2 a^2 on the reduced mode, with
    O^2 = a^dag^4 a^4 + 4 a^dag^3 a^3 + 2 a^dag^2 a^2, and the sector value
    is 4 (<O^2> - <O>^2).  Falling-factorial moments are taken against the
    exact Binomial(p, 1/2) photon-number distribution of the split state.
    """
    if not (isinstance(p, int) and p >= 0):
        raise ValueError(f"photon number must be a nonnegative integer, got {p}")

    def falling_moment(m: int) -> Fraction:
        total = Fraction(0)
        for j in range(p + 1):
            ff = 1
            for i in range(m):
                ff *= j - i
            total += Fraction(math.comb(p, j) * ff, 2**p)
        return total

    f2 = falling_moment(2)
    f3 = falling_moment(3)
    f4 = falling_moment(4)
    return 4 * (f4 + 4 * f3 + 2 * f2 - f2 * f2)


def poisson_weight(mean_photon_number: float, p: int) -> float:
    """Poisson sector weight e^{-N} N^p / p!."""
    n = float(mean_photon_number)
    if n == 0.0:
        return 1.0 if p == 0 else 0.0
    return math.exp(-n + p * math.log(n) - math.lgamma(p + 1.0))


def sector_term(mean_photon_number: float, p: int) -> SectorTerm:
    return SectorTerm(p, poisson_weight(mean_photon_number, p), sector_qfi(p))


def phase_averaged_qfi(mean_photon_number: float, tolerance: float = 1e-12) -> QfiResult:
    """Sum the sector series until the Poisson tail majorant drops below tolerance.

    Terms are accumulated in ascending p and combined with compensated
    summation.  The term ratio r_p = N (2p+1) / ((2p-1)(p-1)) decreases in p
    for p >= 2, so once r_p < 1 the tail after p is bounded by the geometric
    sum t_p * r_p / (1 - r_p).
    """
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n >= 0.0):
        raise ValueError(f"mean photon number must be finite and >= 0, got {n}")
    if not (math.isfinite(tolerance) and tolerance > 0.0):
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    if n == 0.0:
        return QfiResult(0.0, _TAIL_SAFETY_START, 0.0)
    terms = []
    p = _TAIL_SAFETY_START
    while True:
        # t_p = e^{-N} N^p (2p - 1) / (2 (p-2)!)
        log_t = -n + p * math.log(n) - math.lgamma(p - 1.0)
        t = math.exp(log_t) * (2 * p - 1) / 2.0
        terms.append(t)
        ratio = n * (2 * p + 1) / ((2 * p - 1) * (p - 1))
        if ratio < 1.0:
            tail = t * ratio / (1.0 - ratio)
            if tail < tolerance:
                return QfiResult(math.fsum(terms), p, tail)
        p += 1


def qfi_closed_form(mean_photon_number: float) -> float:
    """Resummed series: N^3 + (3/2) N^2."""
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n >= 0.0):
        raise ValueError(f"mean photon number must be finite and >= 0, got {n}")
    return n**3 + 1.5 * n**2


def qcrb(mean_photon_number: float) -> float:
    """Quantum bound on the phase uncertainty, F^{-1/2}."""
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n > 0.0):
        raise ValueError(
            f"the bound is uninformative (infinite) at N = {n}; need N > 0"
        )
    return qfi_closed_form(n) ** -0.5
