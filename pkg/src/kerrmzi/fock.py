"""Brute-force two-mode Fock-space simulation of the interferometer.

This module is the ground-truth engine: every closed form in
:mod:`kerrmzi.analytic`, :mod:`kerrmzi.qfi` and :mod:`kerrmzi.estimation`
is cross-checked against state evolution in a truncated number basis.

Conventions
-----------
* A pure two-mode state is a coefficient grid c[m, n] on |m>_A |n>_B with
  m, n <= n_max.
* The 50-50 beam splitter is exp[i (pi/4) (a^dag b + b^dag a)].  It is
  block-diagonal in the total photon number s = m + n; each sector is an
  orthogonal rotation obtained by exponentiating the sector's tridiagonal
  generator.  The convention is pinned by |1,0> -> (|1,0> + i|0,1>)/sqrt(2).
* The nonlinear phase of order k multiplies |m>_A by exp[i phi m^k], or by
  exp[i phi (m^k - m)] when the linear part is compensated by the phase
  shifter (the default).
* Photon loss is the amplitude-damping channel of transmissivity T, applied
  through its Kraus decomposition.
* Truncation: n_max = ceil(N + 6 sqrt(N) + 10), grown geometrically until
  the Poisson occupation tail is below 1e-12.  Moments whose measured-mode
  occupation leaks into the top two levels beyond 1e-10 (relative) raise
  TruncationError instead of returning silently wrong numbers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammainc, gammaln

from .params import LossPlacement, LossSpec, ProtocolParams, QuadratureMoments

TAIL_TOL = 1e-12
EDGE_TOL = 1e-10
BRANCH_TAIL_TOL = 5e-15

_MODES = ("A", "B")
_LOSS_MODES = ("A", "B", "both")


class TruncationError(RuntimeError):
    """Raised when the requested computation is unreliable at the chosen n_max."""


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class PureState2M:
    """Pure two-mode state as a (n_max+1) x (n_max+1) coefficient grid.

    Treated as an immutable value: operations return new states and never
    modify their input.
    """

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise ValueError(f"coefficient grid must be square 2-D, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def n_max(self) -> int:
        return self.coefficients.shape[0] - 1

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def overlap(self, other: "PureState2M") -> complex:
        if other.n_max != self.n_max:
            raise ValueError("states live in different truncations")
        return complex(np.vdot(self.coefficients, other.coefficients))

    def number_distribution(self, mode: str) -> np.ndarray:
        _check_mode(mode)
        p = np.abs(self.coefficients) ** 2
        return p.sum(axis=1) if mode == "A" else p.sum(axis=0)

    def sector_masses(self) -> np.ndarray:
        """Probability in each total-photon-number sector s = m + n."""
        d = self.n_max + 1
        m, n = np.indices((d, d))
        return np.bincount(
            (m + n).ravel(), weights=(np.abs(self.coefficients) ** 2).ravel(), minlength=2 * d - 1
        )

    def to_density(self) -> "MixedState2M":
        c = self.coefficients
        d = c.shape[0]
        rho = np.einsum("mn,pq->mnpq", c, c.conj())
        return MixedState2M(rho.reshape(d, d, d, d))


@dataclass(frozen=True)
class MixedState2M:
    """Two-mode density tensor rho[m, n, m', n']."""

    density: np.ndarray

    def __post_init__(self) -> None:
        rho = np.asarray(self.density, dtype=complex)
        if rho.ndim != 4 or len(set(rho.shape)) != 1:
            raise ValueError(f"density must be a 4-index tensor with equal dims, got {rho.shape}")
        object.__setattr__(self, "density", rho)

    @property
    def n_max(self) -> int:
        return self.density.shape[0] - 1

    def trace(self) -> float:
        d = self.n_max + 1
        return float(np.einsum("mnmn->", self.density).real)

    def hermiticity_defect(self) -> float:
        d = self.n_max + 1
        r = self.density.reshape(d * d, d * d)
        return float(np.max(np.abs(r - r.conj().T)))

    def reduced(self, mode: str) -> np.ndarray:
        _check_mode(mode)
        if mode == "A":
            return np.einsum("mnqn->mq", self.density)
        return np.einsum("mnmq->nq", self.density)

    def number_distribution(self, mode: str) -> np.ndarray:
        return np.real(np.diagonal(self.reduced(mode)))


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be 'A' or 'B', got {mode!r}")


# --------------------------------------------------------------------------
# truncation and coherent states


def poisson_tail(n_max: int, lam: float) -> float:
    """P(X > n_max) for X ~ Poisson(lam)."""
    if lam == 0.0:
        return 0.0
    return float(gammainc(n_max + 1, lam))


def default_n_max(mean_photon_number: float) -> int:
    """Truncation covering the coherent occupation with tail < 1e-12."""
    n = float(mean_photon_number)
    if not (math.isfinite(n) and n >= 0.0):
        raise ValueError(f"mean photon number must be finite and >= 0, got {n}")
    n_max = int(math.ceil(n + 6.0 * math.sqrt(n) + 10.0))
    while poisson_tail(n_max, n) >= TAIL_TOL:
        n_max = int(math.ceil(1.5 * n_max))
    return n_max


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Truncated coherent-state amplitudes e^{-|a|^2/2} a^n / sqrt(n!)."""
    c = np.zeros(n_max + 1, dtype=complex)
    if alpha == 0:
        c[0] = 1.0
        return c
    n = np.arange(n_max + 1)
    log_mag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1.0) - 0.5 * abs(alpha) ** 2
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def coherent_two_mode(
    alpha_a: complex, alpha_b: complex, n_max: int | None = None
) -> PureState2M:
    """Product coherent state |alpha_a>_A |alpha_b>_B on the truncated grid.

    If n_max is omitted it is chosen automatically; if given, the Poisson
    occupation tail of each mode must be below 1e-12 or TruncationError is
    raised with the offending tail mass.
    """
    na, nb = abs(alpha_a) ** 2, abs(alpha_b) ** 2
    if n_max is None:
        n_max = default_n_max(na + nb)
    for label, lam in (("A", na), ("B", nb)):
        tail = poisson_tail(n_max, lam)
        if tail >= TAIL_TOL:
            raise TruncationError(
                f"n_max={n_max} too small for mode {label}: occupation tail {tail:.3e}"
            )
    return PureState2M(np.outer(coherent_amplitudes(alpha_a, n_max), coherent_amplitudes(alpha_b, n_max)))


# --------------------------------------------------------------------------
# beam splitter

_BS_BLOCK_CACHE: dict[int, list[tuple[int, np.ndarray]]] = {}
_BS_SPARSE_CACHE: dict[int, sparse.csr_matrix] = {}


def _bs_blocks(n_max: int) -> list[tuple[int, np.ndarray]]:
    """Per-sector 50-50 beam-splitter unitaries.

    Sector s holds |j>_A |s-j>_B for j in [max(0, s-n_max), min(s, n_max)];
    the entry is (j_lo, U) with U acting on that index range.
    """
    cached = _BS_BLOCK_CACHE.get(n_max)
    if cached is not None:
        return cached
    blocks: list[tuple[int, np.ndarray]] = []
    for s in range(2 * n_max + 1):
        lo, hi = max(0, s - n_max), min(s, n_max)
        dim = hi - lo + 1
        if dim == 1:
            blocks.append((lo, np.ones((1, 1), dtype=complex)))
            continue
        j = np.arange(lo, hi)
        off = np.sqrt((j + 1.0) * (s - j))
        w, v = eigh_tridiagonal(np.zeros(dim), off)
        u = (v * np.exp(1j * (math.pi / 4.0) * w)) @ v.T
        blocks.append((lo, u))
    _BS_BLOCK_CACHE[n_max] = blocks
    return blocks


def _bs_sparse(n_max: int) -> sparse.csr_matrix:
    cached = _BS_SPARSE_CACHE.get(n_max)
    if cached is not None:
        return cached
    d = n_max + 1
    rows, cols, vals = [], [], []
    for s, (lo, u) in enumerate(_bs_blocks(n_max)):
        js = np.arange(lo, lo + u.shape[0])
        idx = js * d + (s - js)
        rows.append(np.repeat(idx, idx.size))
        cols.append(np.tile(idx, idx.size))
        vals.append(u.ravel())
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d * d, d * d)
    )
    _BS_SPARSE_CACHE[n_max] = mat
    return mat


def _apply_bs_pure(c: np.ndarray) -> np.ndarray:
    n_max = c.shape[-1] - 1
    out = np.zeros_like(c)
    for s, (lo, u) in enumerate(_bs_blocks(n_max)):
        js = np.arange(lo, lo + u.shape[0])
        out[..., js, s - js] = c[..., js, s - js] @ u.T
    return out


def apply_bs_5050(state: PureState2M | MixedState2M):
    """Apply the 50-50 beam splitter; photon number is conserved per sector."""
    if isinstance(state, PureState2M):
        return PureState2M(_apply_bs_pure(state.coefficients))
    d = state.n_max + 1
    u = _bs_sparse(state.n_max)
    r = u @ state.density.reshape(d * d, d * d)
    r = (u @ r.conj().T).conj().T
    return MixedState2M(r.reshape(d, d, d, d))


# --------------------------------------------------------------------------
# phases


def _phase_vector(n_max: int, phi: float, k: int, compensated: bool) -> np.ndarray:
    m = np.arange(n_max + 1, dtype=float)
    expo = m**k - m if compensated else m**k
    return np.exp(1j * phi * expo)


def apply_linear_phase(state: PureState2M | MixedState2M, mode: str, theta: float):
    """Multiply |n> of the given mode by exp(i theta n)."""
    _check_mode(mode)
    ph = np.exp(1j * theta * np.arange(state.n_max + 1))
    return _apply_diagonal(state, mode, ph)


def apply_nonlinear_phase(
    state: PureState2M | MixedState2M,
    mode: str,
    phi: float,
    k: int = 2,
    compensated: bool = True,
):
    """Nonlinear phase exp[i phi n^k] on one mode.

    With compensated=True the linear part is removed, i.e. the applied
    phase is exp[i phi (n^k - n)], modeling an ideal compensating phase
    shifter in the other arm.
    """
    _check_mode(mode)
    if not (isinstance(k, int) and k >= 1):
        raise ValueError(f"nonlinearity order must be an integer >= 1, got {k}")
    return _apply_diagonal(state, mode, _phase_vector(state.n_max, phi, k, compensated))


def _apply_diagonal(state, mode: str, ph: np.ndarray):
    if isinstance(state, PureState2M):
        c = state.coefficients
        return PureState2M(c * (ph[:, None] if mode == "A" else ph[None, :]))
    rho = state.density
    if mode == "A":
        rho = rho * ph[:, None, None, None] * ph.conj()[None, None, :, None]
    else:
        rho = rho * ph[None, :, None, None] * ph.conj()[None, None, None, :]
    return MixedState2M(rho)


# --------------------------------------------------------------------------
# amplitude damping


def _kraus_bands(n_max: int, transmissivity: float) -> list[np.ndarray]:
    """Kraus operators of the damping channel as their single bands.

    Entry l is the vector k_l with K_l[m, m+l] = k_l[m],
    k_l[m] = sqrt( C(m+l, l) T^m (1-T)^l ).
    """
    t = transmissivity
    d = n_max + 1
    if t == 1.0:
        bands = [np.ones(d)]
        bands.extend(np.zeros(d - l) for l in range(1, d))
        return bands
    if t == 0.0:
        bands = []
        for l in range(d):
            v = np.zeros(d - l)
            v[0] = 1.0
            bands.append(v)
        return bands
    log_t, log_l = math.log(t), math.log(1.0 - t)
    bands = []
    for l in range(d):
        m = np.arange(d - l, dtype=float)
        log_c = gammaln(m + l + 1.0) - gammaln(m + 1.0) - gammaln(l + 1.0)
        bands.append(np.exp(0.5 * (log_c + m * log_t + l * log_l)))
    return bands


def kraus_completeness_defect(n_max: int, transmissivity: float) -> float:
    """max_n | sum_l K_l^dag K_l - 1 |_nn  (the sum is diagonal)."""
    bands = _kraus_bands(n_max, transmissivity)
    diag = np.zeros(n_max + 1)
    for l, band in enumerate(bands):
        diag[l:] += band**2
    return float(np.max(np.abs(diag - 1.0)))


def _damp_mode_density(rho: np.ndarray, mode: str, bands: list[np.ndarray]) -> np.ndarray:
    d = rho.shape[0]
    out = np.zeros_like(rho)
    for l, band in enumerate(bands):
        dd = d - l
        w = np.outer(band, band)
        if mode == "A":
            out[:dd, :, :dd, :] += w[:, None, :, None] * rho[l:, :, l:, :]
        else:
            out[:, :dd, :, :dd] += w[None, :, None, :] * rho[:, l:, :, l:]
    return out


def apply_loss(state: PureState2M | MixedState2M, mode: str, transmissivity: float) -> MixedState2M:
    """Amplitude-damping channel of the given transmissivity.

    mode is 'A', 'B' or 'both'.  The result is always a density tensor;
    trace is preserved and a coherent |beta> maps to |sqrt(T) beta>.
    """
    if mode not in _LOSS_MODES:
        raise ValueError(f"loss mode must be one of {_LOSS_MODES}, got {mode!r}")
    t = float(transmissivity)
    if not (math.isfinite(t) and 0.0 <= t <= 1.0):
        raise ValueError(f"transmissivity must lie in [0, 1], got {t}")
    rho = state.to_density().density if isinstance(state, PureState2M) else state.density.copy()
    bands = _kraus_bands(state.n_max, t)
    if mode in ("A", "both"):
        rho = _damp_mode_density(rho, "A", bands)
    if mode in ("B", "both"):
        rho = _damp_mode_density(rho, "B", bands)
    return MixedState2M(rho)


# --------------------------------------------------------------------------
# moments


def _pure_moment_sums(c: np.ndarray, mode: str) -> tuple[complex, complex, float, float, float]:
    """Unnormalized <b>, <b^2>, <n>, total mass and edge mass for one mode.

    c may carry leading batch axes; sums run over everything, so a batch is
    treated as an unnormalized ensemble.
    """
    if mode == "A":
        c = np.swapaxes(c, -1, -2)
    d = c.shape[-1]
    n = np.arange(d, dtype=float)
    first = np.sum(c[..., :, :-1].conj() * c[..., :, 1:] * np.sqrt(n[1:]))
    second = np.sum(c[..., :, :-2].conj() * c[..., :, 2:] * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0)))
    p = np.abs(c) ** 2
    occ = np.sum(p * n)
    total = float(np.sum(p))
    edge = float(np.sum(p[..., :, max(d - 2, 0):]))
    return complex(first), complex(second), float(occ), total, edge


def x_moments(state: PureState2M | MixedState2M, mode: str = "B") -> QuadratureMoments:
    """Mean and second moment of X = b + b^dag (or a + a^dag for mode A).

    Raises TruncationError when the measured mode's occupation of the top
    two Fock levels exceeds 1e-10 of the total, since the tridiagonal and
    pentadiagonal matrix elements are then visibly clipped.
    """
    _check_mode(mode)
    if isinstance(state, PureState2M):
        first, second, occ, total, edge = _pure_moment_sums(state.coefficients, mode)
    else:
        red = state.reduced(mode)
        d = red.shape[0]
        n = np.arange(d, dtype=float)
        first = complex(np.sum(np.diagonal(red, offset=-1) * np.sqrt(n[1:])))
        second = complex(np.sum(np.diagonal(red, offset=-2) * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))))
        diag = np.real(np.diagonal(red))
        occ = float(np.sum(diag * n))
        total = float(np.sum(diag))
        edge = float(np.sum(diag[max(d - 2, 0):]))
    if total <= 0.0:
        raise ValueError("state has zero norm")
    if edge / total > EDGE_TOL:
        raise TruncationError(
            f"measured-mode occupation at the truncation edge is {edge / total:.3e} "
            "of the total; increase n_max"
        )
    mean = 2.0 * first.real / total
    second_moment = (2.0 * second.real + 2.0 * occ) / total + 1.0
    return QuadratureMoments(mean, second_moment)


# --------------------------------------------------------------------------
# special states and normal-ordered moments


def psi_p_state(p: int, n_max: int) -> PureState2M:
    """Two-mode state reached by a p-photon Fock input split on the 50-50 BS.

    c[j, p-j] = sqrt(C(p, j)) / 2^{p/2}; states for different p are exactly
    orthogonal.
    """
    if not (isinstance(p, int) and p >= 0):
        raise ValueError(f"photon number must be a nonnegative integer, got {p}")
    if p > n_max:
        raise ValueError(f"p={p} exceeds n_max={n_max}")
    c = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    scale = 2.0 ** (-0.5 * p)
    for j in range(p + 1):
        c[j, p - j] = math.sqrt(math.comb(p, j)) * scale
    return PureState2M(c)


def normal_ordered_expectation(state: PureState2M | MixedState2M, mode: str, m: int) -> float:
    """<a^dag^m a^m> from the mode's number distribution (falling factorial)."""
    _check_mode(mode)
    if not (isinstance(m, int) and m >= 0):
        raise ValueError(f"order m must be a nonnegative integer, got {m}")
    if m > state.n_max:
        raise ValueError(f"m={m} exceeds n_max={state.n_max}")
    dist = state.number_distribution(mode)
    n = np.arange(dist.size, dtype=float)
    ff = np.ones_like(n)
    for i in range(m):
        ff *= n - i
    ff[: m] = 0.0
    return float(np.sum(dist * ff))


# --------------------------------------------------------------------------
# lossy branch ensemble (fast exact path for end_to_end_moments)


def _loss_branches(c: np.ndarray, transmissivity: float) -> tuple[np.ndarray, float]:
    """Expand equal two-mode damping of a pure state into pure branches.

    Branch (la, lb) is K_la x K_lb |psi>, kept while the union-bound tail of
    dropped loss counts stays below BRANCH_TAIL_TOL per mode.  Returns the
    branch stack (batch, d, d) and the kept trace mass.
    """
    d = c.shape[0]
    bands = _kraus_bands(d - 1, transmissivity)
    kept_counts = []
    for pops in (np.sum(np.abs(c) ** 2, axis=1), np.sum(np.abs(c) ** 2, axis=0)):
        marg = np.array([np.sum(band**2 * pops[l:]) for l, band in enumerate(bands)])
        csum = np.cumsum(marg)
        l_keep = int(np.searchsorted(csum, csum[-1] - BRANCH_TAIL_TOL)) + 1
        kept_counts.append(min(l_keep, d))
    la_n, lb_n = kept_counts
    branches = np.zeros((la_n * lb_n, d, d), dtype=complex)
    for la in range(la_n):
        shifted = bands[la][:, None] * c[la:, :]
        for lb in range(lb_n):
            branches[la * lb_n + lb, : d - la, : d - lb] = shifted[:, lb:] * bands[lb][None, :]
    kept = float(np.sum(np.abs(branches) ** 2))
    return branches, kept


# --------------------------------------------------------------------------
# the full pipeline


def end_to_end_moments(
    params: ProtocolParams,
    loss: LossSpec | None = None,
    *,
    n_max: int | None = None,
    compensated: bool = True,
    dense_channel: bool = False,
) -> QuadratureMoments:
    """Simulate the complete interferometer and return the X_B moments.

    Pipeline: coherent input -> BS -> nonlinear phase (mode A) and linear
    phase (mode B) -> BS -> quadrature moments of mode B, with the optional
    loss channel inserted before or after the phase elements (same
    transmissivity in both paths).

    Lossy runs use an exact pure-branch expansion of the damping channel by
    default; dense_channel=True forces the explicit density-tensor route
    (identical results, much more memory) which is what apply_loss exposes.
    """
    loss = loss or LossSpec.none()
    n = params.mean_photon_number
    if n_max is None:
        n_max = default_n_max(n)
    state = coherent_two_mode(params.alpha, 0.0, n_max)
    state = apply_bs_5050(state)
    active = loss.is_active

    if not active:
        state = apply_nonlinear_phase(state, "A", params.phi, params.order, compensated)
        state = apply_linear_phase(state, "B", params.theta)
        state = apply_bs_5050(state)
        return x_moments(state, "B")

    if dense_channel:
        return _end_to_end_dense(state, params, loss, compensated)

    ph_a = _phase_vector(n_max, params.phi, params.order, compensated)
    ph_b = np.exp(1j * params.theta * np.arange(n_max + 1))
    c = state.coefficients
    if loss.placement is LossPlacement.BEFORE_PHASE:
        branches, kept = _loss_branches(c, loss.transmissivity)
        branches = branches * ph_a[None, :, None] * ph_b[None, None, :]
    else:
        branches, kept = _loss_branches(c * ph_a[:, None] * ph_b[None, :], loss.transmissivity)
    branches = _apply_bs_pure(branches)
    first, second, occ, total, edge = _pure_moment_sums(branches, "B")
    if edge / total > EDGE_TOL:
        raise TruncationError(
            f"measured-mode occupation at the truncation edge is {edge / total:.3e} "
            "of the total; increase n_max"
        )
    mean = 2.0 * first.real / total
    second_moment = (2.0 * second.real + 2.0 * occ) / total + 1.0
    return QuadratureMoments(mean, second_moment)


def _end_to_end_dense(
    state: PureState2M, params: ProtocolParams, loss: LossSpec, compensated: bool
) -> QuadratureMoments:
    if loss.placement is LossPlacement.BEFORE_PHASE:
        mixed = apply_loss(state, "both", loss.transmissivity)
        mixed = apply_nonlinear_phase(mixed, "A", params.phi, params.order, compensated)
        mixed = apply_linear_phase(mixed, "B", params.theta)
    else:
        pure = apply_nonlinear_phase(state, "A", params.phi, params.order, compensated)
        pure = apply_linear_phase(pure, "B", params.theta)
        mixed = apply_loss(pure, "both", loss.transmissivity)
    mixed = apply_bs_5050(mixed)
    return x_moments(mixed, "B")


def x_moment_grid(
    mean_photon_number: float,
    phi_values,
    theta_values,
    *,
    k: int = 2,
    compensated: bool = True,
    n_max: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Lossless end_to_end_moments evaluated on a (phi, theta) grid.

    Returns (mean, second_moment) arrays of shape (len(phi), len(theta)).
    Identical physics to end_to_end_moments, with the second beam splitter
    applied sector-by-sector to the whole theta batch at once; a pointwise
    equality test against the single-shot pipeline pins the two paths
    together.
    """
    phis = np.atleast_1d(np.asarray(phi_values, dtype=float))
    thetas = np.atleast_1d(np.asarray(theta_values, dtype=float))
    n = float(mean_photon_number)
    if n_max is None:
        n_max = default_n_max(n)
    d = n_max + 1
    base = apply_bs_5050(coherent_two_mode(math.sqrt(n), 0.0, n_max)).coefficients
    blocks = _bs_blocks(n_max)
    idx = np.arange(d)
    theta_phase = np.exp(1j * np.outer(idx, thetas))  # (d, n_theta)
    mean = np.empty((phis.size, thetas.size))
    second = np.empty((phis.size, thetas.size))
    nt = thetas.size
    for ip, phi in enumerate(phis):
        w = base * _phase_vector(n_max, phi, k, compensated)[:, None]
        sector_out = []
        sector_lo = []
        for s, (lo, u) in enumerate(blocks):
            js = np.arange(lo, lo + u.shape[0])
            v = w[js, s - js][:, None] * theta_phase[s - js, :]
            sector_out.append(u @ v)
            sector_lo.append(lo)
        occ = np.zeros(nt)
        edge = np.zeros(nt)
        first = np.zeros(nt, dtype=complex)
        sqsum = np.zeros(nt, dtype=complex)
        total = np.zeros(nt)
        for s, y in enumerate(sector_out):
            lo = sector_lo[s]
            ns = s - np.arange(lo, lo + y.shape[0])
            p = np.abs(y) ** 2
            total += p.sum(axis=0)
            occ += ns @ p
            edge += p[ns >= d - 2, :].sum(axis=0)
            for step, target in ((1, first), (2, sqsum)):
                if s + step >= len(sector_out):
                    continue
                lo2 = sector_lo[s + step]
                y2 = sector_out[s + step]
                m_lo = max(lo, lo2)
                m_hi = min(lo + y.shape[0], lo2 + y2.shape[0]) - 1
                if m_hi < m_lo:
                    continue
                ms = np.arange(m_lo, m_hi + 1)
                nvals = s - ms
                fac = np.sqrt(nvals + 1.0) if step == 1 else np.sqrt((nvals + 1.0) * (nvals + 2.0))
                target += np.sum(
                    y[ms - lo, :].conj() * y2[ms - lo2, :] * fac[:, None], axis=0
                )
        if np.any(edge / total > EDGE_TOL):
            raise TruncationError("grid point leaks into the truncation edge; increase n_max")
        mean[ip] = 2.0 * first.real / total
        second[ip] = (2.0 * sqsum.real + 2.0 * occ) / total + 1.0
    return mean, second


# --------------------------------------------------------------------------
# debugging dump


def dump_state_json(state: PureState2M, amplitude_threshold: float = 1e-12) -> str:
    """JSON dump of (m, n, Re c, Im c) for amplitudes above the threshold."""
    if not isinstance(state, PureState2M):
        raise TypeError("only pure states can be dumped")
    c = state.coefficients
    ms, ns = np.nonzero(np.abs(c) > amplitude_threshold)
    entries = [
        [int(m), int(n), float(c[m, n].real), float(c[m, n].imag)] for m, n in zip(ms, ns)
    ]
    return json.dumps({"n_max": state.n_max, "amplitudes": entries})
