"""Exact reference ensembles: circular-beta, Poisson and clock processes.

The circular beta ensemble is sampled through the coefficient construction
(independent Theta_{beta(k+1)+1} coefficients plus a uniform boundary
phase), never by Markov chain methods; its joint density on small n exists
only to validate the sampler.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DomainError
from .prufer import RelativePhaseState, locate_eigenvalues
from .rng import RngStream
from .samples import PointConfiguration, SpectrumSample
from .sampling import make_schedule, sample_sequence
from .tolerances import BISECTION_TOL

TWO_PI = 2.0 * math.pi


def sample_cbe(beta: float, n: int, rng: RngStream,
               tol: float = BISECTION_TOL) -> SpectrumSample:
    """One exact draw of the n-point circular beta ensemble.

    The rotated coefficients have the same joint law as the raw ones, so the
    sampled sequence feeds the phase solver directly; the boundary phase
    maps to a uniform omega.
    """
    if beta <= 0:
        raise DomainError("beta must be positive")
    sched = make_schedule("critical", beta=beta)
    seq = sample_sequence(sched, n, rng)
    state = RelativePhaseState(gammas=seq.alphas, omega=-seq.eta)
    return locate_eigenvalues(state, tol=tol,
                              meta={"regime": "cbe", "beta": beta})


def log_partition_function(n: int, beta: float) -> float:
    """log Z_{n,beta} = log Gamma(beta n/2 + 1) - n log Gamma(beta/2 + 1)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if beta < 0:
        raise DomainError("beta must be non-negative")
    return float(gammaln(0.5 * beta * n + 1.0) - n * gammaln(0.5 * beta + 1.0))


def partition_function(n: int, beta: float) -> float:
    """Z_{n,beta}, evaluated in log space to survive beta n / 2 > 170."""
    return math.exp(log_partition_function(n, beta))


def cbe_log_density(beta: float, angles) -> float:
    """Log of the joint eigenvalue-angle density at the given angles.

    beta * sum_{j<k} log|e^{i a_j} - e^{i a_k}| - log Z - n log(2 pi);
    coincident angles return -inf.
    """
    a = np.asarray(angles, dtype=np.float64)
    n = a.size
    out = -log_partition_function(n, beta) - n * math.log(TWO_PI)
    if n > 1:
        diff = a[:, None] - a[None, :]
        iu = np.triu_indices(n, k=1)
        sq = 2.0 - 2.0 * np.cos(diff[iu])      # |e^{ia}-e^{ib}|^2
        if np.any(sq <= 0.0):
            return float("-inf")
        out += beta * 0.5 * float(np.sum(np.log(sq)))
    return float(out)


def cbe_two_point_gap_density(beta: float, grid: np.ndarray) -> np.ndarray:
    """Density of the n=2 gap on (0, 2 pi), normalized by quadrature.

    The unnormalized density is |e^{ig} - 1|^beta = (2 - 2 cos g)^{beta/2};
    the normalizer is computed numerically rather than hard-coded.
    """
    grid = np.asarray(grid, dtype=np.float64)
    fine = np.linspace(0.0, TWO_PI, 1 << 14, endpoint=False)
    w = (2.0 - 2.0 * np.cos(fine)) ** (0.5 * beta)
    norm = np.mean(w) * TWO_PI
    return (2.0 - 2.0 * np.cos(grid)) ** (0.5 * beta) / norm


def sample_reference(kind: str, window, rng: RngStream) -> PointConfiguration:
    """Reference point processes on a finite window.

    ``poisson`` is homogeneous with intensity 1/(2 pi); ``clock`` is the
    random translate of 2 pi Z.  The window is half-open [lo, hi).
    """
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError("window must be a finite nonempty interval")
    gen = rng.generator()
    if kind == "poisson":
        count = gen.poisson((hi - lo) / TWO_PI)
        pts = np.sort(gen.uniform(lo, hi, count))
    elif kind == "clock":
        x = gen.uniform(0.0, TWO_PI)
        kmin = math.ceil((lo - x) / TWO_PI)
        kmax = math.floor((hi - x) / TWO_PI)
        pts = x + TWO_PI * np.arange(kmin, kmax + 1)
        pts = pts[(pts >= lo) & (pts < hi)]
    else:
        raise ValueError(f"unknown reference kind {kind!r}")
    return PointConfiguration(points=pts, window=(lo, hi))
