"""Sample containers (spectra and rescaled point configurations) + CSV IO."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np


@dataclass
class SpectrumSample:
    """Eigenvalue angles of one truncation realization, sorted in (-pi, pi]."""

    angles: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.size != self.n:
            raise ValueError("expected exactly n angles")
        if np.any(np.diff(self.angles) < 0):
            raise ValueError("angles must be sorted")
        if self.angles.size and (self.angles[0] <= -np.pi
                                 or self.angles[-1] > np.pi):
            raise ValueError("angles must lie in (-pi, pi]")


@dataclass
class PointConfiguration:
    """A finite set of points on the line with the window they live in."""

    points: np.ndarray
    window: Tuple[float, float]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if np.any(np.diff(self.points) < 0):
            self.points = np.sort(self.points)
        lo, hi = self.window
        if not lo < hi:
            raise ValueError("window must be a nonempty interval")

    def __len__(self):
        return self.points.size


def write_samples_csv(path, rows: Iterable[Tuple[int, np.ndarray]],
                      value_column: str = "theta_j", *,
                      n: Optional[int] = None, regime: str = "",
                      seed: Optional[int] = None) -> None:
    """(trial, j, value) CSV; the header comment carries n, regime, seed."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# n={n} regime={regime} seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(["trial", "j", value_column])
        for trial, values in rows:
            for j, v in enumerate(np.asarray(values)):
                writer.writerow([trial, j, repr(float(v))])


def write_histogram_csv(path, bin_edges: Sequence[float],
                        counts: Sequence[float],
                        density: Sequence[float] = None) -> None:
    edges = np.asarray(bin_edges, dtype=np.float64)
    counts = np.asarray(counts)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["bin_left", "bin_right", "count"]
        if density is not None:
            header.append("density")
        writer.writerow(header)
        for i in range(counts.size):
            row = [repr(float(edges[i])), repr(float(edges[i + 1])),
                   repr(float(counts[i]))]
            if density is not None:
                row.append(repr(float(density[i])))
            writer.writerow(row)
