"""Relative Prufer phase: the core spectral solver.

The argument of the Blaschke quotient B_k(e^{i theta})/B_k(1) is a strictly
increasing function psi_k(theta) with psi_k(0) = 0 obeying

    psi_{k+1} = psi_k + theta + Upsilon(psi_k, gamma_k),      psi_0 = theta,

where gamma_k are the coefficients rotated to the reference point z = 1 and
Upsilon(psi, g) = 2 Im log[(1-g)/(1-g e^{i psi})] on the principal branch
(both arguments have positive real part for |g| < 1, so the principal
branch agrees with the defining power series).  Eigenvalue angles of the
n x n truncation are exactly the solutions of psi_{n-1}(theta) = omega mod
2*pi, which monotonicity turns into bracketed one-dimensional root finding,
with total winding 2*pi*n around the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import DomainError, EigensolverError, NumericalError
from .samples import PointConfiguration, SpectrumSample
from .sampling import CoefficientSequence
from .tolerances import BISECTION_TOL, ROTATION_DENOM_TOL, WINDING_TOL

TWO_PI = 2.0 * math.pi


@dataclass
class RelativePhaseState:
    """Rotated coefficients gamma_k and boundary phase omega for one draw."""

    gammas: np.ndarray
    omega: float
    def __post_init__(self):
        self.gammas = np.asarray(self.gammas, dtype=np.complex128)
        if self.gammas.size and np.max(np.abs(self.gammas)) >= 1.0:
            raise DomainError("rotated coefficients must satisfy |gamma| < 1")
        self.omega = float(self.omega) % TWO_PI

    @property
    def n(self) -> int:
        return self.gammas.size + 1


@dataclass
class PhaseTrajectory:
    """psi_0(theta)..psi_{n-1}(theta) for one realization and one angle."""

    theta: float
    values: np.ndarray


def upsilon(psi, gamma):
    """Phase increment 2 Im log[(1-gamma)/(1-gamma e^{i psi})].

    Vectorizes over either argument; range is contained in (-2 pi, 2 pi).
    """
    psi = np.asarray(psi, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.complex128)
    if np.any(np.abs(gamma) >= 1.0):
        raise DomainError("upsilon requires |gamma| < 1")
    num = 1.0 - gamma
    den = 1.0 - gamma * np.exp(1j * psi)
    out = 2.0 * (np.arctan2(num.imag, num.real)
                 - np.arctan2(den.imag, den.real))
    return float(out) if out.ndim == 0 else out


def rotate_to_gamma(seq: CoefficientSequence) -> RelativePhaseState:
    """Rotate a coefficient sequence to the z = 1 frame.

    Runs B_{k+1}(1) = B_k(1) (1 - conj(alpha_k) conj(B_k(1))) /
    (1 - alpha_k B_k(1)) from B_0(1) = 1 and returns gamma_k = B_k(1) alpha_k
    together with omega defined by e^{-i omega} = B_{n-1}(1) e^{i eta}.
    """
    alphas = seq.alphas
    gammas = np.empty_like(alphas)
    b = 1.0 + 0.0j
    for k in range(alphas.size):
        a = alphas[k]
        gammas[k] = b * a
        den = 1.0 - a * b
        if abs(den) < ROTATION_DENOM_TOL:
            raise NumericalError("Blaschke rotation denominator vanished")
        b = b * np.conj(den) / den
    omega = (-(np.angle(b) + seq.eta)) % TWO_PI
    return RelativePhaseState(gammas=gammas, omega=omega)


def relative_phase(state: RelativePhaseState, theta: float) -> PhaseTrajectory:
    """Full phase trajectory at one angle (O(n) time)."""
    values = kernels.phase_trajectory(state.gammas, float(theta))
    return PhaseTrajectory(theta=float(theta), values=values)


def phase_at(state: RelativePhaseState, thetas) -> np.ndarray:
    """psi_{n-1} at a batch of angles (the quantity statistics consume)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    return kernels.phase_final(state.gammas, thetas)


def phase_derivative_at_zero(state: RelativePhaseState) -> float:
    """Closed-form d psi_{n-1}/d theta at theta = 0.

    Equals 1 + sum_k prod_{l=k}^{n-2} Re[(1+gamma_l)/(1-gamma_l)], evaluated
    through the stable recursion D <- 1 + c_l D (the unrolled derivative of
    the phase recurrence; cross-checked against finite differences).
    """
    g = state.gammas
    c = ((1.0 + g) / (1.0 - g)).real
    d = 1.0
    for cl in c:
        d = 1.0 + cl * d
    return float(d)


# ---------------------------------------------------------------------------
# Eigenvalue extraction
# ---------------------------------------------------------------------------

def _brackets_for_targets(grid, psis, targets):
    """Bracket [grid[i-1], grid[i]] for each target value of psi."""
    idx = np.searchsorted(psis, targets, side="left")
    idx = np.clip(idx, 1, psis.size - 1)
    return idx


def locate_eigenvalues(state: RelativePhaseState,
                       tol: float = BISECTION_TOL,
                       grid_factor: int = 4,
                       meta: Optional[dict] = None) -> SpectrumSample:
    """All n eigenvalue angles of the truncation, sorted in (-pi, pi].

    Scans a grid of ``grid_factor * n`` points, brackets the n crossings of
    psi_{n-1}(theta) = omega + 2 pi m using the total winding 2 pi n over
    the circle, and refines each bracket to angle width ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = state.n
    last_err = None
    for attempt in range(3):
        npts = grid_factor * n * (2 ** attempt) + 1
        grid = np.linspace(-math.pi, math.pi, npts)
        psis = kernels.phase_final(state.gammas, grid)
        winding = psis[-1] - psis[0]
        if abs(winding - TWO_PI * n) > WINDING_TOL * max(1.0, n):
            last_err = (f"phase winding {winding / TWO_PI:.6f} turns, "
                        f"expected {n}")
            continue
        # The n target levels omega + 2 pi m falling in (psi(-pi), psi(pi)].
        m0 = math.floor((psis[0] - state.omega) / TWO_PI) + 1
        targets = state.omega + TWO_PI * (m0 + np.arange(n))
        targets = np.minimum(targets, psis[-1])  # roundoff at the boundary
        idx = _brackets_for_targets(grid, psis, targets)
        roots = kernels.refine_roots(state.gammas, grid[idx - 1], grid[idx],
                                     psis[idx - 1], psis[idx], targets, tol)
        roots = np.sort(roots)
        if roots[0] <= -math.pi:       # half-open convention on the circle
            roots[0] += TWO_PI
            roots = np.sort(roots)
        return SpectrumSample(angles=roots, n=n, meta=dict(meta or {}))
    raise EigensolverError(last_err or "bracketing failed")


def locate_in_window(state: RelativePhaseState, window: Tuple[float, float],
                     tol: float = BISECTION_TOL,
                     grid_factor: int = 4) -> np.ndarray:
    """Eigenvalue angles inside ``window`` only (for windowed statistics).

    Same grid density and refinement contract as :func:`locate_eigenvalues`;
    the window must satisfy -pi <= lo < hi <= pi.
    """
    lo, hi = window
    if not -math.pi <= lo < hi <= math.pi:
        raise ValueError("window must be inside [-pi, pi]")
    n = state.n
    npts = max(int(math.ceil((hi - lo) * grid_factor * n / TWO_PI)), 2) + 1
    grid = np.linspace(lo, hi, npts)
    psis = kernels.phase_final(state.gammas, grid)
    m0 = math.floor((psis[0] - state.omega) / TWO_PI) + 1
    m1 = math.floor((psis[-1] - state.omega) / TWO_PI)
    if m1 < m0:
        return np.empty(0)
    targets = state.omega + TWO_PI * np.arange(m0, m1 + 1)
    idx = _brackets_for_targets(grid, psis, targets)
    roots = kernels.refine_roots(state.gammas, grid[idx - 1], grid[idx],
                                 psis[idx - 1], psis[idx], targets, tol)
    return np.sort(roots)


def count_in_arcs(state: RelativePhaseState, arcs) -> np.ndarray:
    """Eigenvalue counts in half-open arcs [a, b), b - a <= 2 pi each.

    Counts the crossings of omega + 2 pi Z by the monotone phase, which is
    exactly the number of eigenvalue angles in the arc; two phase
    evaluations per arc instead of a full spectrum extraction.
    """
    arcs = np.asarray(arcs, dtype=np.float64)
    if arcs.ndim == 1:
        arcs = arcs[None, :]
    if np.any(arcs[:, 1] - arcs[:, 0] > TWO_PI + 1e-12):
        raise ValueError("arcs must have length at most 2 pi")
    psis = kernels.phase_final(state.gammas, arcs.reshape(-1))
    psis = psis.reshape(arcs.shape)
    lo = np.ceil((psis[:, 0] - state.omega) / TWO_PI)
    hi = np.ceil((psis[:, 1] - state.omega) / TWO_PI)
    return (hi - lo).astype(np.int64)


def count_in_arcs_many(gammas: np.ndarray, omegas: np.ndarray,
                       arcs) -> np.ndarray:
    """Vectorized :func:`count_in_arcs` over independent realizations.

    ``gammas`` has shape (T, n-1), ``omegas`` shape (T,); ``arcs`` is a
    common list of p arcs.  Returns (T, p) counts.
    """
    arcs = np.asarray(arcs, dtype=np.float64)
    if arcs.ndim == 1:
        arcs = arcs[None, :]
    T = gammas.shape[0]
    flat = np.broadcast_to(arcs.reshape(-1), (T, arcs.size))
    psis = kernels.phase_final_many(gammas, np.ascontiguousarray(flat))
    psis = psis.reshape(T, arcs.shape[0], 2)
    m = np.ceil((psis - omegas[:, None, None]) / TWO_PI)
    return (m[:, :, 1] - m[:, :, 0]).astype(np.int64)
