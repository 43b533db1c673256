"""The coupled limiting phase SDE and its associated point process.

For coupling beta and levels x_mu, the components solve

    d Psi_mu = x_mu dt + (2/sqrt(beta t)) Im{ [e^{i Psi_mu} - 1]
                                               (dB_1 + i dB_2) },

driven by the SAME pair of Brownian motions, started at t0 > 0 from the
deterministic data Psi_mu(t0) = x_mu t0.  Shared noise makes x -> Psi(t; x)
monotone pathwise, which is what lets level sets define a point process.

The scheme is Euler-Maruyama.  Near the singular start the per-step noise
ratio 2 sqrt(dt/(beta t)) is capped at ``max_step_noise`` by shrinking dt
(plain uniform stepping at dt = t0 = 1e-3 has order-one multiplicative
noise on the first steps and visibly violates the sign and ordering
properties that the exact solution satisfies pathwise).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError
from .rng import RngStream
from .samples import PointConfiguration
from .tolerances import SDE_MONOTONE_TOL

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SdeConfig:
    beta: float
    x_grid: tuple
    t0: float = 1e-3
    dt: float = 1e-3
    t_end: float = 1.0
    max_step_noise: float = 0.05
    save_times: Optional[tuple] = None   # defaults to quartiles of [t0, t_end]

    def __post_init__(self):
        object.__setattr__(self, "x_grid",
                           tuple(float(x) for x in self.x_grid))
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")
        if not self.x_grid:
            raise ConfigurationError("x_grid must be nonempty")
        if any(b < a for a, b in zip(self.x_grid, self.x_grid[1:])):
            raise ConfigurationError("x_grid must be sorted")
        if not 0 < self.t0 < self.t_end:
            raise ConfigurationError("need 0 < t0 < t_end")
        if self.dt <= 0 or self.dt > self.t0:
            raise ConfigurationError("need 0 < dt <= t0")
        if self.max_step_noise <= 0:
            raise ConfigurationError("max_step_noise must be positive")
        if self.save_times is None:
            ts = self.t0 + (self.t_end - self.t0) * np.linspace(0, 1, 5)
            object.__setattr__(self, "save_times", tuple(ts))
        else:
            ts = tuple(sorted(float(t) for t in self.save_times))
            if ts[0] < self.t0 or ts[-1] > self.t_end:
                raise ConfigurationError("save_times outside [t0, t_end]")
            if ts[-1] < self.t_end:
                ts = ts + (self.t_end,)
            object.__setattr__(self, "save_times", ts)


@dataclass
class SdePath:
    """One discretized trajectory, rows indexed by saved time."""

    times: np.ndarray
    values: np.ndarray       # shape (len(times), len(x_grid))
    x_grid: np.ndarray


def _step_sizes(cfg: SdeConfig):
    """The adaptive step plan: dt_k = min(dt, cap^2 beta t / 4), hitting
    every save time exactly."""
    sizes = []
    t = cfg.t0
    saves = list(cfg.save_times)
    si = 0
    while saves[si] <= t + 1e-15:
        si += 1
    while t < cfg.t_end - 1e-12:
        h = min(cfg.dt, 0.25 * cfg.max_step_noise ** 2 * cfg.beta * t)
        h = min(h, saves[si] - t)
        sizes.append((t, h))
        t += h
        if t >= saves[si] - 1e-12 and si < len(saves) - 1:
            si += 1
    return sizes


def _simulate(cfg: SdeConfig, n_paths: int, rng: RngStream,
              keep_full: bool = False):
    """Vectorized Euler-Maruyama over paths; returns saved slices.

    Raises NumericalError if adjacent components invert by more than the
    clamp tolerance; smaller inversions are restored by sorting the slice.
    """
    gen = rng.generator()
    x = np.asarray(cfg.x_grid, dtype=np.float64)
    p = x.size
    psi = np.tile(x * cfg.t0, (n_paths, 1))
    plan = _step_sizes(cfg)
    saves = np.asarray(cfg.save_times)
    out_times = [cfg.t0] if abs(saves[0] - cfg.t0) < 1e-12 else []
    out = [psi.copy()] if out_times else []
    full_times, full = ([cfg.t0], [psi.copy()]) if keep_full else (None, None)
    si = len(out_times)
    coef = 2.0 / math.sqrt(cfg.beta)
    for (t, h) in plan:
        sq = coef / math.sqrt(t) * math.sqrt(h)
        db1 = gen.standard_normal(n_paths)[:, None] * sq
        db2 = gen.standard_normal(n_paths)[:, None] * sq
        psi = psi + x * h + np.sin(psi) * db1 + (np.cos(psi) - 1.0) * db2
        if p > 1:
            d = np.diff(psi, axis=1)
            worst = d.min()
            if worst < -SDE_MONOTONE_TOL:
                raise NumericalError(
                    f"component ordering inverted by {-worst:.3e} at t={t:.4g}"
                    " (numerical failure; shrink dt or max_step_noise)")
            if worst < 0.0:
                psi = np.sort(psi, axis=1)
        if keep_full:
            full_times.append(t + h)
            full.append(psi.copy())
        if si < saves.size and t + h >= saves[si] - 1e-12:
            out_times.append(saves[si])
            out.append(psi.copy())
            si += 1
    if keep_full:
        return np.asarray(full_times), np.stack(full, axis=0)
    return np.asarray(out_times), np.stack(out, axis=0)


def simulate_paths(cfg: SdeConfig, n_paths: int, rng: RngStream,
                   keep_full: bool = False) -> List[SdePath]:
    """Independent path bundle; values are recorded at cfg.save_times

    (or at every step with ``keep_full``, for plotting small bundles).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    times, vals = _simulate(cfg, n_paths, rng, keep_full=keep_full)
    x = np.asarray(cfg.x_grid)
    return [SdePath(times=times, values=vals[:, i, :], x_grid=x)
            for i in range(n_paths)]


def terminal_samples(cfg: SdeConfig, n_paths: int, rng: RngStream) -> np.ndarray:
    """Psi(t_end; x_mu) for n_paths paths, shape (n_paths, p)."""
    times, vals = _simulate(cfg, n_paths, rng)
    return vals[-1]


def invert_to_points(path: SdePath, omega: Optional[float] = None,
                     rng: Optional[RngStream] = None) -> PointConfiguration:
    """Points {x : Psi(t_end; x) = 2 pi m + omega} by linear interpolation.

    ``omega`` defaults to a uniform draw from ``rng`` (the random translate
    that defines the associated point process).  Level sets outside the
    x-grid span are truncated with a warning.
    """
    if omega is None:
        if rng is None:
            raise ValueError("need omega or rng")
        omega = float(rng.generator().uniform(0.0, TWO_PI))
    vals = path.values[-1]
    x = path.x_grid
    if np.any(np.diff(vals) < 0):
        raise NumericalError("final slice is not monotone")
    m_lo = math.ceil((vals[0] - omega) / TWO_PI)
    m_hi = math.floor((vals[-1] - omega) / TWO_PI)
    if m_lo > m_hi:
        warnings.warn("all level sets fall outside the grid span; "
                      "returning an empty configuration", stacklevel=2)
        pts = np.empty(0)
    else:
        targets = omega + TWO_PI * np.arange(m_lo, m_hi + 1)
        pts = np.interp(targets, vals, x)
    return PointConfiguration(points=pts, window=(float(x[0]), float(x[-1])))


def phase_samples_at(beta: float, xs, n: int, trials: int,
                     rng: RngStream) -> np.ndarray:
    """Finite-n samples psi_{n-1}(x/n) under the critical schedule.

    Shape (trials, len(xs)); one independent realization per trial, all xs
    evaluated on the same realization (matching the coupled SDE vector).
    """
    from . import kernels
    from .sampling import make_schedule, sample_sequence

    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    sched = make_schedule("critical", beta=beta)
    out = np.empty((trials, xs.size))
    chunk = max(1, int(2e6 // max(n, 1)))
    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        gams = np.stack([sample_sequence(sched, n, rng.substream(0, t)).alphas
                         for t in range(start, stop)])
        th = np.broadcast_to(xs / n, (stop - start, xs.size))
        out[start:stop] = kernels.phase_final_many(
            gams, np.ascontiguousarray(th))
    return out


def convergence_test(beta: float, x_grid, n: int, trials: int,
                     rng: RngStream, *, cfg_kwargs: dict = None) -> dict:
    """Compare psi_{n-1}(x/n) samples with SDE samples Psi(1; x).

    Returns per-x Kolmogorov distances and mean differences, plus the
    standard errors needed to judge them.
    """
    if n < 100:
        raise ValueError("n must be at least 100")
    xs = np.atleast_1d(np.asarray(x_grid, dtype=np.float64))
    phase = phase_samples_at(beta, xs, n, trials, rng.substream(1))
    cfg = SdeConfig(beta=beta, x_grid=tuple(xs), **(cfg_kwargs or {}))
    sde = terminal_samples(cfg, trials, rng.substream(2))
    report = {"x": xs.tolist(), "n": n, "trials": trials,
              "ks": [], "mean_phase": [], "mean_sde": [], "mean_diff": [],
              "mean_diff_stderr": []}
    from .stats import ks_distance
    for j in range(xs.size):
        if xs[j] == 0.0:
            report["ks"].append(0.0)
        else:
            report["ks"].append(ks_distance(phase[:, j], sde[:, j]))
        mp, ms = float(np.mean(phase[:, j])), float(np.mean(sde[:, j]))
        se = math.hypot(float(np.std(phase[:, j], ddof=1)) / math.sqrt(trials),
                        float(np.std(sde[:, j], ddof=1)) / math.sqrt(trials))
        report["mean_phase"].append(mp)
        report["mean_sde"].append(ms)
        report["mean_diff"].append(mp - ms)
        report["mean_diff_stderr"].append(se)
    return report


def paths_csv(paths: Sequence[SdePath], out_path) -> None:
    """Bundle dump as (t, path_id, x_index, value) rows."""
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "path_id", "x_index", "value"])
        for pid, path in enumerate(paths):
            for ti, t in enumerate(path.times):
                for xi in range(path.x_grid.size):
                    writer.writerow([repr(float(t)), pid, xi,
                                     repr(float(path.values[ti, xi]))])
