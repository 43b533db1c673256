"""Point-process statistics on rescaled spectra.

Everything here consumes :class:`PointConfiguration` objects; spectra enter
through :func:`rescale`, which multiplies eigenvalue angles by n so that the
mean density becomes 1/(2 pi) points per unit length.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .samples import PointConfiguration, SpectrumSample

TWO_PI = 2.0 * math.pi


class EdgeEffectWarning(UserWarning):
    pass


def rescale(sample: SpectrumSample) -> PointConfiguration:
    """Rescaled point configuration {n * theta_j} on (-pi n, pi n]."""
    n = sample.n
    return PointConfiguration(points=n * sample.angles,
                              window=(-math.pi * n, math.pi * n))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

def _smooth_step(t):
    # C-infinity step: 0 for t<=0, 1 for t>=1.
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class TestFunction:
    """Non-negative compactly supported test function on the line."""

    kind: str                 # triangle | bump | indicator_smooth
    center: float = 0.0
    width: float = TWO_PI
    height: float = 1.0

    def __post_init__(self):
        if self.kind not in ("triangle", "bump", "indicator_smooth"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.width <= 0 or self.height < 0:
            raise ValueError("need width > 0 and height >= 0")

    @property
    def support(self) -> Tuple[float, float]:
        h = 0.5 * self.width
        return (self.center - h, self.center + h)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        u = (x - self.center) / (0.5 * self.width)   # in [-1, 1] on support
        if self.kind == "triangle":
            vals = np.maximum(0.0, 1.0 - np.abs(u))
        elif self.kind == "bump":
            inside = np.abs(u) < 1.0
            vals = np.zeros_like(u)
            with np.errstate(divide="ignore", over="ignore"):
                vals[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        else:  # indicator_smooth: flat middle, C-inf shoulders of 20% width
            a = np.abs(u)
            vals = 1.0 - _smooth_step((a - 0.8) / 0.2)
        return self.height * vals

    def integral(self, transform=None, nodes: int = 1 << 12) -> float:
        """Quadrature of ``transform(f(x))`` (default f itself) over support."""
        lo, hi = self.support
        x = np.linspace(lo, hi, nodes)
        y = self(x)
        if transform is not None:
            y = transform(y)
        return float(np.trapezoid(y, x))


@dataclass(frozen=True)
class CountingQuery:
    """Joint event: exactly counts[j] points in intervals[j], disjointly."""

    intervals: Tuple[Tuple[float, float], ...]
    counts: Tuple[int, ...]

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(ivs) != len(self.counts) or not ivs:
            raise ValueError("need matching, nonempty intervals and counts")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")
        if any(b <= a for a, b in ivs):
            raise ValueError("intervals must be nonempty half-open [a, b)")
        for i, (a1, b1) in enumerate(ivs):
            for a2, b2 in ivs[i + 1:]:
                if a1 < b2 and a2 < b1:
                    raise ValueError("intervals must be disjoint")


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def laplace_functional(config: PointConfiguration, f: TestFunction) -> float:
    """exp(-sum_j f(x_j)), in (0, 1]."""
    lo, hi = config.window
    slo, shi = f.support
    if slo < lo or shi > hi:
        warnings.warn("test function support escapes the window; "
                      "the statistic sees edge effects", EdgeEffectWarning,
                      stacklevel=2)
    if len(config) == 0:
        return 1.0
    return float(np.exp(-np.sum(f(config.points))))


def count_points(config: PointConfiguration, interval) -> int:
    a, b = interval
    return int(np.searchsorted(config.points, b, side="left")
               - np.searchsorted(config.points, a, side="left"))


def counting_probability(samples: Sequence[PointConfiguration],
                         query: CountingQuery) -> float:
    """Empirical probability of the joint counting event."""
    if not samples:
        raise ValueError("need at least one sample")
    hits = 0
    for cfg in samples:
        ok = all(count_points(cfg, iv) == c
                 for iv, c in zip(query.intervals, query.counts))
        hits += ok
    return hits / len(samples)


def core_interval(config: PointConfiguration,
                  core_fraction: float) -> Tuple[float, float]:
    lo, hi = config.window
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo) * core_fraction
    return (c - h, c + h)


def spacing_sample(config: PointConfiguration,
                   core_fraction: float = 0.5) -> np.ndarray:
    """Consecutive gaps with both endpoints in the central core

    of the window (edge-effect mitigation); empty when fewer than two
    points land there.
    """
    if not 0.0 < core_fraction <= 1.0:
        raise ValueError("core_fraction must lie in (0, 1]")
    lo, hi = core_interval(config, core_fraction)
    pts = config.points
    inside = pts[(pts >= lo) & (pts <= hi)]
    if inside.size < 2:
        return np.empty(0)
    return np.diff(inside)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov distance sup |F_a - F_b|, in [0, 1]."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_distance needs nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def pairwise_sum(values) -> float:
    """Deterministic pairwise reduction (order-stable across worker counts)."""
    arr = np.asarray(values, dtype=np.float64)
    return float(np.sum(arr))  # numpy sums pairwise over contiguous blocks


def histogram(values, bins, range_=None):
    counts, edges = np.histogram(values, bins=bins, range=range_)
    total = counts.sum()
    width = np.diff(edges)
    density = counts / (total * width) if total else counts * 0.0
    return edges, counts, density


def tv_distance_to_poisson(counts, lam: float) -> float:
    """Total-variation distance of an empirical count sample to Poisson(lam)."""
    counts = np.asarray(counts, dtype=np.int64)
    kmax = max(int(counts.max()), int(math.ceil(lam + 10 * math.sqrt(lam) + 10)))
    emp = np.bincount(counts, minlength=kmax + 1) / counts.size
    k = np.arange(kmax + 1)
    from scipy.stats import poisson
    ref = poisson.pmf(k, lam)
    # Residual reference mass beyond kmax counts fully toward the distance.
    return float(0.5 * (np.sum(np.abs(emp - ref)) + (1.0 - ref.sum())))
