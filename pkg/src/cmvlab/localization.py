"""Transfer-matrix and resolvent diagnostics for the slow-decay regime.

Empirical checks of the fractional-moment machinery: contraction of the
one-step average, exponential smallness of E ||T(l,k)||^{-s}, the uniform
fractional-moment bound on resolvent entries, and the small-arc two-
eigenvalue (Minami-type) estimate that rules out clustering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from .cmv import build_truncation
from .errors import DomainError, NumericalError
from .prufer import count_in_arcs_many
from .rng import RngStream
from .sampling import CoefficientSequence, DecaySchedule, sample_sequence

TWO_PI = 2.0 * math.pi

RENORM_EVERY = 16


@dataclass
class MomentReport:
    """One empirical fractional moment against its analytic bound."""

    s: float
    pairs: Tuple
    empirical: float
    bound: float
    stderr: float
    label: str = ""

    def to_dict(self) -> dict:
        return {"s": self.s, "pairs": list(self.pairs),
                "empirical": self.empirical, "bound": self.bound,
                "stderr": self.stderr, "label": self.label}


def transfer_matrix(alpha: complex, z: complex) -> np.ndarray:
    """One-step transfer matrix; det equals z exactly."""
    if abs(alpha) >= 1.0:
        raise DomainError("transfer matrix requires |alpha| < 1")
    rho = math.sqrt(1.0 - abs(alpha) ** 2)
    return np.array([[z, -np.conj(alpha)], [-alpha * z, 1.0]],
                    dtype=np.complex128) / rho


def spectral_norms(mats: np.ndarray) -> np.ndarray:
    """Largest singular value of a batch of 2x2 matrices (closed form)."""
    fro2 = np.sum(np.abs(mats) ** 2, axis=(-2, -1))
    det = (mats[..., 0, 0] * mats[..., 1, 1]
           - mats[..., 0, 1] * mats[..., 1, 0])
    disc = np.sqrt(np.maximum(fro2 ** 2 - 4.0 * np.abs(det) ** 2, 0.0))
    return np.sqrt(0.5 * (fro2 + disc))


def _sample_alphas(schedule: DecaySchedule, ks: np.ndarray, trials: int,
                   rng: RngStream) -> np.ndarray:
    """(trials, len(ks)) coefficient draws at the given indices."""
    from .sampling import R2_MAX
    gen = rng.generator()
    if schedule.law == "theta_nu":
        nu = schedule.nu(ks)
        u = 1.0 - gen.random((trials, ks.size))
        r2 = np.minimum(-np.expm1(np.log(u) * (2.0 / (nu - 1.0))), R2_MAX)
    else:
        r2 = np.broadcast_to(schedule.second_moment(ks), (trials, ks.size))
    ph = gen.uniform(0.0, TWO_PI, (trials, ks.size))
    return np.sqrt(r2) * np.exp(1j * ph)


def _log_norm_products(alphas: np.ndarray, z: complex,
                       checkpoints: Sequence[int]):
    """log ||T(l, k)|| for every trial at each checkpoint length.

    ``alphas`` is (trials, steps); products accumulate left-multiplied
    one-step matrices with renormalization every RENORM_EVERY factors.
    Returns (len(checkpoints), trials) log-norms.
    """
    trials, steps = alphas.shape
    t = np.zeros((trials, 2, 2), dtype=np.complex128)
    t[:, 0, 0] = 1.0
    t[:, 1, 1] = 1.0
    logn = np.zeros(trials)
    marks = {c: None for c in checkpoints}
    if 0 in marks:
        marks[0] = logn.copy()
    for j in range(steps):
        a = alphas[:, j]
        rho = np.sqrt(1.0 - np.abs(a) ** 2)
        a00 = z / rho
        a01 = -np.conj(a) / rho
        a10 = -a * z / rho
        a11 = 1.0 / rho
        top = t[:, 0, :].copy()
        bot = t[:, 1, :]
        t[:, 0, :] = a00[:, None] * top + a01[:, None] * bot
        t[:, 1, :] = a10[:, None] * top + a11[:, None] * bot
        if (j + 1) % RENORM_EVERY == 0:
            norms = spectral_norms(t)
            t /= norms[:, None, None]
            logn += np.log(norms)
        if (j + 1) in marks:
            marks[j + 1] = logn + np.log(spectral_norms(t))
    return np.stack([marks[c] for c in checkpoints])


def product_norm_samples(schedule: DecaySchedule, z: complex, k: int, l: int,
                         trials: int, rng: RngStream,
                         s: float = 0.25) -> MomentReport:
    """Empirical E ||T(l,k)||^{-s} against exp[-(s/4) sum_{j=k}^{l-1} m_j]."""
    if not (k <= l and 0 < s <= 1):
        raise ValueError("need k <= l and 0 < s <= 1")
    if abs(abs(z) - 1.0) > 1e-12:
        raise DomainError("the norm bounds hold on |z| = 1")
    ks = np.arange(k, l)
    alphas = _sample_alphas(schedule, ks, trials, rng)
    logn = _log_norm_products(alphas, z, [l - k])[0]
    vals = np.exp(-s * logn)
    bound = math.exp(-0.25 * s * float(np.sum(schedule.second_moment(ks))))
    return MomentReport(
        s=s, pairs=((k, l),), empirical=float(np.mean(vals)), bound=bound,
        stderr=float(np.std(vals, ddof=1) / math.sqrt(trials)),
        label="inverse_norm_moment")


def product_ratio_samples(schedule: DecaySchedule, z: complex, k: int, l: int,
                          r: int, trials: int, rng: RngStream,
                          s: float = 0.25) -> MomentReport:
    """Empirical E ||T(l,k)||^s / ||T(r,k)||^s vs exp[-(s/4) sum_{j=l}^{r-1} m_j].

    The exponent sums the moments of the factors T(r,l) only; the shorter
    product's factors cancel out of the provable bound.
    """
    if not (k <= l <= r and 0 < s <= 1):
        raise ValueError("need k <= l <= r and 0 < s <= 1")
    ks = np.arange(k, r)
    alphas = _sample_alphas(schedule, ks, trials, rng)
    logn = _log_norm_products(alphas, z, [l - k, r - k])
    vals = np.exp(s * (logn[0] - logn[1]))
    mj = schedule.second_moment(np.arange(l, r))
    bound = math.exp(-0.25 * s * float(np.sum(mj)))
    return MomentReport(
        s=s, pairs=((k, l), (k, r)), empirical=float(np.mean(vals)),
        bound=bound, stderr=float(np.std(vals, ddof=1) / math.sqrt(trials)),
        label="norm_ratio_moment")


def lemma_a_integral(r: float, big_r: float, nodes: int = 4096) -> float:
    """Average of sqrt(1-r^2)/sqrt(1 - 2 R r cos(t) + r^2) over the circle.

    This is the one-step contraction average E ||A v||^{-1} for |alpha| = r
    fixed and R = 2|x ybar| determined by the unit vector v; it is at most
    1 - r^2/4 at R = 1 and increases in R.
    """
    if not 0.0 <= r < 1.0:
        raise DomainError("need 0 <= r < 1")
    if not 0.0 <= big_r <= 1.0:
        raise DomainError("need 0 <= R <= 1")
    t = np.linspace(0.0, TWO_PI, nodes, endpoint=False)
    integrand = math.sqrt(1.0 - r * r) / np.sqrt(
        1.0 - 2.0 * big_r * r * np.cos(t) + r * r)
    return float(np.mean(integrand))


def minami_check(schedule: DecaySchedule, n_size: int, arc_l: float,
                 trials: int, rng: RngStream,
                 arc_start: float = 0.37) -> dict:
    """P(two or more eigenvalues in a fixed arc of length 2 pi L) vs L^2 N^2 / 2.

    Counts phase crossings of the arc endpoints; one pair of phase
    evaluations per trial.
    """
    if arc_l < 0 or arc_l > 1:
        raise ValueError("arc length fraction L must lie in [0, 1]")
    if arc_l == 0.0 or trials == 0:
        return {"empirical": 0.0, "bound": 0.0, "stderr": 0.0,
                "n": n_size, "L": arc_l, "trials": trials}
    gen = rng.generator()
    gammas = _sample_alphas(schedule, np.arange(n_size - 1), trials,
                            rng.substream(1))
    omegas = gen.uniform(0.0, TWO_PI, trials)
    arc = [arc_start, arc_start + TWO_PI * arc_l]
    counts = count_in_arcs_many(gammas, omegas, [arc])[:, 0]
    hits = (counts >= 2).astype(np.float64)
    p = float(np.mean(hits))
    return {"empirical": p,
            "bound": 0.5 * (arc_l * n_size) ** 2,
            "stderr": float(np.std(hits, ddof=1) / math.sqrt(trials)),
            "mean_count": float(np.mean(counts)),
            "n": n_size, "L": arc_l, "trials": trials}


# ---------------------------------------------------------------------------
# Resolvent entries by banded solves
# ---------------------------------------------------------------------------

def _banded_from_dense(mat: np.ndarray, lower: int, upper: int) -> np.ndarray:
    n = mat.shape[0]
    ab = np.zeros((lower + upper + 1, n), dtype=mat.dtype)
    for d in range(-lower, upper + 1):
        diag = np.diagonal(mat, offset=d)
        row = upper - d
        if d >= 0:
            ab[row, d:d + diag.size] = diag
        else:
            ab[row, :diag.size] = diag
    return ab


def resolvent_entries(seq: CoefficientSequence, z: complex,
                      pairs: Sequence[Tuple[int, int]],
                      max_norm: float = 1e10) -> np.ndarray:
    """Entries (C - z)^{-1}[k, l] for the requested index pairs.

    The truncation is pentadiagonal, so each distinct column l costs one
    banded solve.  A solution with norm above ``max_norm`` means z is
    within about 1/max_norm of the spectrum and raises NumericalError.
    """
    n = seq.n
    for k, l in pairs:
        if not (0 <= k < n and 0 <= l < n):
            raise ValueError("pair outside the matrix")
    mat = build_truncation(seq) - z * np.eye(n)
    ab = _banded_from_dense(mat, 2, 2)
    out = np.empty(len(pairs), dtype=np.complex128)
    cols = sorted({l for _, l in pairs})
    rhs = np.zeros((n, len(cols)), dtype=np.complex128)
    for j, l in enumerate(cols):
        rhs[l, j] = 1.0
    try:
        sol = solve_banded((2, 2), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"resolvent solve failed: {exc}") from exc
    norms = np.linalg.norm(sol, axis=0)
    if np.any(norms > max_norm):
        dist = 1.0 / float(np.max(norms))
        raise NumericalError(
            f"z is within about {dist:.2e} of the spectrum")
    col_of = {l: j for j, l in enumerate(cols)}
    for i, (k, l) in enumerate(pairs):
        out[i] = sol[k, col_of[l]]
    return out


def resolvent_entry(seq: CoefficientSequence, z: complex, k: int,
                    l: int) -> complex:
    """Single resolvent entry (C - z)^{-1}[k, l]."""
    return complex(resolvent_entries(seq, z, [(k, l)])[0])


def kolmogorov_bound(s: float) -> float:
    """The uniform fractional-moment bound 2^{2-s} sec(s pi / 2)."""
    if not 0.0 < s < 1.0:
        raise ValueError("need 0 < s < 1")
    return 2.0 ** (2.0 - s) / math.cos(0.5 * math.pi * s)


def resolvent_moment_profile(schedule: DecaySchedule, n: int,
                             seps: Sequence[int], trials: int,
                             rng: RngStream, s: float = 0.25) -> dict:
    """Empirical E |G_{0,l}|^s on a grid of separations l, with random z.

    z is drawn uniformly on the unit circle per trial (eigenvalue hits have
    probability zero; near-hits are guarded and the trial is redrawn).
    """
    seps = [int(l) for l in seps]
    if max(seps) >= n:
        raise ValueError("separations must stay inside the matrix")
    gen = rng.generator()
    vals = np.empty((trials, len(seps)))
    failures = 0
    for t in range(trials):
        seq = sample_sequence(schedule, n, rng.substream(3, t))
        for attempt in range(4):
            z = np.exp(1j * gen.uniform(0.0, TWO_PI))
            try:
                g = resolvent_entries(seq, z, [(0, l) for l in seps])
            except NumericalError:
                failures += 1
                continue
            vals[t] = np.abs(g) ** s
            break
        else:
            raise NumericalError("could not find z away from the spectrum")
    emp = vals.mean(axis=0)
    return {"separations": seps,
            "empirical": emp.tolist(),
            "stderr": (vals.std(axis=0, ddof=1) / math.sqrt(trials)).tolist(),
            "bound": kolmogorov_bound(s),
            "s": s, "n": n, "trials": trials, "near_hits": failures}
