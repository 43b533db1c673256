"""Reproducible experiment harness binding all modules.

Experiments are registered declaratively; each consumes a resolved
:class:`ExperimentConfig` and returns statistic records plus plottable
series.  Per-trial randomness comes from counter-based streams derived from
(seed, purpose, trial), so results are independent of worker scheduling,
and scalar reductions are pairwise, so they are stable run to run.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels, localization, sde, stats
from .ensembles import (cbe_two_point_gap_density, partition_function,
                        sample_cbe)
from .errors import ConfigurationError, NumericalError
from .prufer import (RelativePhaseState, count_in_arcs_many, locate_in_window,
                     phase_at, upsilon)
from .rng import RngStream
from .samples import write_histogram_csv
from .sampling import (DecaySchedule, make_schedule, sample_sequence,
                       sample_theta_nu)
from .tolerances import STATS_ANGLE_TOL

TWO_PI = 2.0 * math.pi

# Stream purposes (spread through the per-seed stream space).
P_TRIAL_A, P_TRIAL_B, P_OMEGA, P_SDE, P_AUX = 1, 2, 3, 4, 5


# ---------------------------------------------------------------------------
# Config / report plumbing
# ---------------------------------------------------------------------------

def default_schedule(experiment: str) -> Optional[DecaySchedule]:
    return {
        "clock_limit": make_schedule("fast", decay_exponent=2.0),
        "poisson_limit": make_schedule("slow", epsilon=0.5),
        "localization_suite": make_schedule("slow", epsilon=0.5),
        "cbe_universality": make_schedule("critical", beta=2.0),
    }.get(experiment)


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 1000
    trials: int = 200
    seed: int = 0
    output_dir: Optional[str] = None
    schedule: Optional[DecaySchedule] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {self.experiment!r}; "
                f"available: {sorted(EXPERIMENTS)}")
        if self.n < 1 or self.trials < 1:
            raise ConfigurationError("n and trials must be at least 1")
        if self.schedule is None:
            self.schedule = default_schedule(self.experiment)

    def resolved_dict(self) -> dict:
        d = {"experiment": self.experiment, "n": self.n,
             "trials": self.trials, "seed": self.seed,
             "schedule": self.schedule.to_dict() if self.schedule else None,
             "params": _jsonify(self.params)}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        sched = d.get("schedule")
        if isinstance(sched, dict):
            sched = DecaySchedule.from_dict(sched)
        return ExperimentConfig(
            experiment=d["experiment"], n=int(d.get("n", 1000)),
            trials=int(d.get("trials", 200)), seed=int(d.get("seed", 0)),
            output_dir=d.get("output_dir"), schedule=sched,
            params=dict(d.get("params", {})))


@dataclass
class StatRecord:
    name: str
    value: float
    provenance: str
    stderr: Optional[float] = None
    reference_value: Optional[float] = None
    tolerance: Optional[float] = None
    passed: Optional[bool] = None


@dataclass
class Report:
    experiment: str
    config_hash: str
    records: List[StatRecord]
    series: Dict[str, dict]
    failures: int
    wall_time: float

    def passed(self) -> bool:
        return self.failures == 0 and all(
            r.passed is not False for r in self.records)

    def record(self, name: str) -> StatRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def body_json(self) -> str:
        """Canonical JSON of everything except wall time."""
        d = {"experiment": self.experiment, "config_hash": self.config_hash,
             "records": [_jsonify(asdict(r)) for r in self.records],
             "series": _jsonify(self.series), "failures": self.failures}
        return json.dumps(d, sort_keys=True, indent=1)

    def to_json(self) -> str:
        d = json.loads(self.body_json())
        d["wall_time"] = self.wall_time
        return json.dumps(d, sort_keys=True, indent=1)


def _jsonify(x):
    if isinstance(x, dict):
        return {str(k): _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonify(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    return x


def worker_count() -> int:
    env = os.environ.get("CMVLAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def map_trials(fn: Callable, args_list: Sequence, workers: int = None):
    """Order-preserving map over trial arguments, optionally in a pool."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(args_list) < 4:
        return [fn(a) for a in args_list]
    ctx = get_context("fork")
    chunk = max(1, len(args_list) // (4 * workers))
    with ctx.Pool(workers) as pool:
        return pool.map(fn, args_list, chunksize=chunk)


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def _draw_state(schedule: DecaySchedule, n: int, stream: RngStream):
    """One phase-solver input: rotated-law coefficients plus uniform omega."""
    seq = sample_sequence(schedule, n, stream)
    return RelativePhaseState(gammas=seq.alphas, omega=-seq.eta)


def _core_gaps_trial(args):
    """Rescaled consecutive gaps with both endpoints in the core window."""
    (schedule, n, seed, purpose, trial, core_fraction, tol) = args
    state = _draw_state(schedule, n, RngStream(seed).substream(purpose, trial))
    half_core = core_fraction * math.pi
    half_window = min(math.pi, half_core + 24.0 * math.pi / n)
    angles = locate_in_window(state, (-half_window, half_window), tol=tol)
    pts = n * angles
    lim = n * half_core
    inside = pts[(pts >= -lim) & (pts <= lim)]
    if inside.size < 2:
        return np.empty(0)
    return np.diff(inside)


def _gap_series(all_gaps: np.ndarray, bins: int = 80,
                lo: float = 0.0, hi: float = 4.0 * math.pi) -> dict:
    edges, counts, density = stats.histogram(all_gaps, bins, (lo, hi))
    return {"bin_edges": edges.tolist(), "counts": counts.tolist(),
            "density": density.tolist()}


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    return (float(np.mean(v)),
            float(np.std(v, ddof=1) / math.sqrt(max(v.size - 1, 1))))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

EXPERIMENTS: Dict[str, Callable] = {}


def experiment(name: str):
    def deco(fn):
        EXPERIMENTS[name] = fn
        return fn
    return deco


@experiment("clock_limit")
def _run_clock(cfg: ExperimentConfig):
    p = cfg.params
    core = float(p.get("core_fraction", 0.5))
    band = float(p.get("band_halfwidth", 0.5))
    tol = float(p.get("tol", STATS_ANGLE_TOL))
    args = [(cfg.schedule, cfg.n, cfg.seed, P_TRIAL_A, t, core, tol)
            for t in range(cfg.trials)]
    per_trial = map_trials(_core_gaps_trial, args)
    gaps = np.concatenate(per_trial)
    in_band = np.abs(gaps - TWO_PI) <= band
    # Cluster-robust stderr: trials are the independent units.
    trial_means = np.array([np.mean(np.abs(g - TWO_PI) <= band)
                            for g in per_trial if g.size])
    _, frac_se = _mean_se(trial_means)
    mean_gap, mean_gap_se = _mean_se(gaps)
    records = [
        StatRecord("spacing_in_band_fraction", float(np.mean(in_band)),
                   "rigid spacing: rescaled gaps concentrate at 2*pi under "
                   "fast coefficient decay",
                   stderr=frac_se, reference_value=0.95,
                   passed=bool(np.mean(in_band) >= 0.95)),
        StatRecord("spacing_variance", float(np.var(gaps)),
                   "gap fluctuations shrink as n grows (compare runs at "
                   "n and 2n)"),
        StatRecord("mean_gap", mean_gap,
                   "mean rescaled gap approaches 2*pi",
                   stderr=mean_gap_se, reference_value=TWO_PI),
    ]
    series = {"spacing_histogram": _gap_series(gaps)}
    return records, series, 0


@experiment("poisson_limit")
def _run_poisson(cfg: ExperimentConfig):
    p = cfg.params
    length = float(p.get("interval_length", TWO_PI))
    gap_between = float(p.get("interval_gap", TWO_PI))
    tol_band = float(p.get("var_mean_band", 0.1))
    tv_tol = float(p.get("tv_tol", 0.05))
    corr_tol = float(p.get("corr_tol", 0.05))
    n = cfg.n
    # Two disjoint rescaled intervals centered in the core of the window.
    i1 = (-gap_between / 2 - length, -gap_between / 2)
    i2 = (gap_between / 2, gap_between / 2 + length)
    arcs = np.array([[i1[0] / n, i1[1] / n], [i2[0] / n, i2[1] / n]])
    counts = np.empty((cfg.trials, 2), dtype=np.int64)
    chunk = max(1, int(4e6 // max(n, 1)))
    for start in range(0, cfg.trials, chunk):
        stop = min(cfg.trials, start + chunk)
        gammas = np.stack([
            sample_sequence(cfg.schedule, n,
                            RngStream(cfg.seed).substream(P_TRIAL_A, t)).alphas
            for t in range(start, stop)])
        omegas = np.array([
            RngStream(cfg.seed).substream(P_OMEGA, t).generator()
            .uniform(0.0, TWO_PI) for t in range(start, stop)])
        counts[start:stop] = count_in_arcs_many(gammas, omegas, arcs)
    lam = length / TWO_PI
    c1 = counts[:, 0].astype(np.float64)
    mean, var = float(np.mean(c1)), float(np.var(c1, ddof=1))
    ratio = var / mean if mean else math.inf
    mu4 = float(np.mean((c1 - mean) ** 4))
    ratio_se = math.sqrt(max(mu4 - var ** 2, 0.0) / cfg.trials) / max(mean, 1e-12)
    tv = stats.tv_distance_to_poisson(counts[:, 0], lam)
    corr = float(np.corrcoef(counts[:, 0], counts[:, 1])[0, 1])
    records = [
        StatRecord("count_mean", mean,
                   "intensity 1/(2*pi): expected count is length/(2*pi)",
                   reference_value=lam),
        StatRecord("count_var_over_mean", ratio,
                   "Poissonian counts: variance equals mean",
                   stderr=ratio_se, reference_value=1.0, tolerance=tol_band,
                   passed=bool(abs(ratio - 1.0) <= tol_band)),
        StatRecord("tv_to_poisson", tv,
                   "count distribution approaches Poisson(length/(2*pi))",
                   reference_value=0.0, tolerance=tv_tol,
                   passed=bool(tv <= tv_tol)),
        StatRecord("intercount_correlation", corr,
                   "counts in disjoint intervals decorrelate",
                   stderr=1.0 / math.sqrt(cfg.trials),
                   reference_value=0.0, tolerance=corr_tol,
                   passed=bool(abs(corr) <= corr_tol)),
    ]
    kmax = int(counts[:, 0].max())
    hist = np.bincount(counts[:, 0], minlength=kmax + 1)
    series = {"count_histogram": {
        "bin_edges": [k - 0.5 for k in range(kmax + 2)],
        "counts": hist.tolist(),
        "density": (hist / hist.sum()).tolist()}}
    return records, series, 0


@experiment("cbe_universality")
def _run_universality(cfg: ExperimentConfig):
    p = cfg.params
    beta = float(p.get("beta", cfg.schedule.beta or 2.0))
    core = float(p.get("core_fraction", 0.5))
    tol = float(p.get("tol", STATS_ANGLE_TOL))
    ks_tol = float(p.get("ks_tol", 0.05))
    sched_a = make_schedule("critical", beta=beta)
    sched_b = make_schedule("critical", beta=beta,
                            law="fixed_modulus_uniform_phase")
    gaps = {}
    for key, sched, purpose in (("theta", sched_a, P_TRIAL_A),
                                ("fixed_modulus", sched_b, P_TRIAL_B)):
        args = [(sched, cfg.n, cfg.seed, purpose, t, core, tol)
                for t in range(cfg.trials)]
        gaps[key] = np.concatenate(map_trials(_core_gaps_trial, args))
    ks = stats.ks_distance(gaps["theta"], gaps["fixed_modulus"])
    mg_a, se_a = _mean_se(gaps["theta"])
    mg_b, se_b = _mean_se(gaps["fixed_modulus"])
    records = [
        StatRecord("spacing_ks", ks,
                   "universality: spacing law under any admissible "
                   "coefficient law matches the exact-sampler law",
                   reference_value=0.0, tolerance=ks_tol,
                   passed=bool(ks <= ks_tol)),
        StatRecord("mean_gap_theta", mg_a,
                   "mean rescaled gap, exact-sampler law",
                   stderr=se_a, reference_value=TWO_PI),
        StatRecord("mean_gap_fixed_modulus", mg_b,
                   "mean rescaled gap, fixed-modulus law",
                   stderr=se_b, reference_value=TWO_PI),
    ]
    series = {"spacing_histogram": _gap_series(gaps["theta"]),
              "spacing_histogram_fixed_modulus":
                  _gap_series(gaps["fixed_modulus"])}
    return records, series, 0


@experiment("cbe_exact")
def _run_cbe_exact(cfg: ExperimentConfig):
    p = cfg.params
    beta = float(p.get("beta", 2.0))
    if cfg.n != 2:
        raise ConfigurationError("cbe_exact validates the two-point density; "
                                 "set n = 2")
    sup_tol = float(p.get("density_sup_tol", 0.02))
    z_tol = float(p.get("z_tol", 0.02))
    z_draws = int(p.get("z_draws", 1_000_000))
    bins = int(p.get("bins", 64))
    gaps = np.empty(2 * cfg.trials)
    for t in range(cfg.trials):
        sp = sample_cbe(beta, 2, RngStream(cfg.seed).substream(P_TRIAL_A, t),
                        tol=1e-9)
        d = float(sp.angles[1] - sp.angles[0])
        gaps[2 * t] = d
        gaps[2 * t + 1] = TWO_PI - d
    edges, counts, density = stats.histogram(gaps, bins, (0.0, TWO_PI))
    centers = 0.5 * (edges[:-1] + edges[1:])
    ref = cbe_two_point_gap_density(beta, centers)
    sup_dist = float(np.max(np.abs(density - ref)))
    # Z as the normalization integral, by plain Monte Carlo over uniforms.
    gen = RngStream(cfg.seed).substream(P_AUX).generator()
    th = gen.uniform(-math.pi, math.pi, (z_draws, 2))
    w = (2.0 - 2.0 * np.cos(th[:, 0] - th[:, 1])) ** (0.5 * beta)
    z_mc, z_se = _mean_se(w)
    z_ref = partition_function(2, beta)
    records = [
        StatRecord("gap_density_sup_distance", sup_dist,
                   "two-point gap histogram matches the quadrature-"
                   "normalized interaction density",
                   reference_value=0.0, tolerance=sup_tol,
                   passed=bool(sup_dist <= sup_tol)),
        StatRecord("z_mc_estimate", z_mc,
                   "partition function as the normalization integral",
                   stderr=z_se, reference_value=z_ref, tolerance=z_tol,
                   passed=bool(abs(z_mc - z_ref) <= z_tol)),
    ]
    series = {"gap_histogram": {
        "bin_edges": edges.tolist(), "counts": counts.tolist(),
        "density": density.tolist(), "reference_density": ref.tolist()}}
    return records, series, 0


@experiment("sde_convergence")
def _run_sde(cfg: ExperimentConfig):
    p = cfg.params
    beta = float(p.get("beta", 2.0))
    xs = [float(x) for x in p.get("x_grid", (math.pi, TWO_PI))]
    paths = int(p.get("paths", cfg.trials))
    dt = float(p.get("dt", 1e-3))
    t0 = float(p.get("t0", 1e-3))
    ks_tol = float(p.get("ks_tol", 0.1))
    scaling_ks_tol = float(p.get("scaling_ks_tol", 0.05))
    failures = 0
    base = RngStream(cfg.seed)

    rep = sde.convergence_test(beta, xs, cfg.n, cfg.trials,
                               base.substream(P_SDE),
                               cfg_kwargs={"dt": dt, "t0": t0})
    records = []
    for j, x in enumerate(xs):
        records.append(StatRecord(
            f"phase_sde_ks_x{j}", rep["ks"][j],
            f"finite-n phase at x={x:g} converges in law to the SDE value "
            "at time 1", reference_value=0.0, tolerance=ks_tol,
            passed=bool(rep["ks"][j] <= ks_tol)))
        records.append(StatRecord(
            f"phase_sde_mean_diff_x{j}", rep["mean_diff"][j],
            "both means equal x by the drift law",
            stderr=rep["mean_diff_stderr"][j]))

    # Mean law and pathwise ordering for a coupled grid.
    cfg_sde = sde.SdeConfig(beta=beta, x_grid=tuple(sorted(set(xs))),
                            dt=dt, t0=t0)
    try:
        term = sde.terminal_samples(cfg_sde, paths, base.substream(P_SDE + 1))
        violations = 0
    except NumericalError:
        term = None
        violations = 1
        failures += 1
    if term is not None:
        mean_err_sigmas = []
        for j, x in enumerate(cfg_sde.x_grid):
            m, se = _mean_se(term[:, j])
            mean_err_sigmas.append(abs(m - x) / se if se else 0.0)
        records.append(StatRecord(
            "sde_mean_err_sigmas", float(max(mean_err_sigmas)),
            "E Psi(t; x) = x t: worst deviation of the terminal mean, in "
            "standard errors", reference_value=0.0, tolerance=4.0,
            passed=bool(max(mean_err_sigmas) <= 4.0)))
    records.append(StatRecord(
        "monotonicity_violations", float(violations),
        "shared noise keeps x -> Psi(t; x) ordered pathwise",
        reference_value=0.0, tolerance=0.0, passed=violations == 0))

    # Scaling law: Psi(1; 2x) and Psi(2; x) agree in distribution.
    x0 = xs[0]
    a = sde.terminal_samples(
        sde.SdeConfig(beta=beta, x_grid=(2 * x0,), dt=dt, t0=t0),
        paths, base.substream(P_SDE + 2))[:, 0]
    b = sde.terminal_samples(
        sde.SdeConfig(beta=beta, x_grid=(x0,), dt=dt, t0=t0, t_end=2.0),
        paths, base.substream(P_SDE + 3))[:, 0]
    sk = stats.ks_distance(a, b)
    records.append(StatRecord(
        "scaling_ks", sk,
        "time-space scaling: Psi(lambda t; x) matches Psi(t; lambda x) "
        "in law", reference_value=0.0, tolerance=scaling_ks_tol,
        passed=bool(sk <= scaling_ks_tol)))

    # Small path bundle for plotting.
    bundle_cfg = sde.SdeConfig(beta=beta, x_grid=tuple(sorted(set(xs))),
                               dt=dt, t0=t0,
                               save_times=tuple(np.linspace(t0, 1.0, 101)))
    bundle = sde.simulate_paths(bundle_cfg, int(p.get("bundle_paths", 20)),
                                base.substream(P_SDE + 4))
    series = {"path_bundle": {
        "t": bundle[0].times.tolist(),
        "x_index": list(range(len(bundle_cfg.x_grid))),
        "values": [path.values.tolist() for path in bundle]}}
    return records, series, failures


@experiment("localization_suite")
def _run_localization(cfg: ExperimentConfig):
    p = cfg.params
    s = float(p.get("s", 0.25))
    z = complex(p.get("z", 1.0))
    trials = cfg.trials
    base = RngStream(cfg.seed)
    records = []

    rep1 = localization.product_norm_samples(
        cfg.schedule, z, 0, int(p.get("l", 200)), trials,
        base.substream(P_TRIAL_A), s=s)
    records.append(StatRecord(
        "transfer_inverse_moment", rep1.empirical,
        "fractional inverse-norm moment of the transfer product decays "
        "exponentially in the summed coefficient moments",
        stderr=rep1.stderr, reference_value=rep1.bound,
        passed=bool(rep1.empirical <= rep1.bound + 3 * rep1.stderr)))

    repr_ = localization.product_ratio_samples(
        cfg.schedule, z, 0, int(p.get("l_mid", 100)), int(p.get("l", 200)),
        trials, base.substream(P_TRIAL_B), s=s)
    records.append(StatRecord(
        "transfer_ratio_moment", repr_.empirical,
        "norm ratio of nested transfer products decays in the tail moments",
        stderr=repr_.stderr, reference_value=repr_.bound,
        passed=bool(repr_.empirical <= repr_.bound + 3 * repr_.stderr)))

    # One-step contraction: exact quadrature against the closed bound.
    rs = np.array(p.get("r_grid", [0.1, 0.3, 0.5, 0.7, 0.9]))
    worst = -np.inf
    for r in rs:
        val = localization.lemma_a_integral(float(r), 1.0)
        worst = max(worst, val - (1.0 - 0.25 * r * r))
    records.append(StatRecord(
        "one_step_contraction_margin", float(worst),
        "averaged one-step inverse growth stays below 1 - r^2/4",
        reference_value=0.0, tolerance=1e-10,
        passed=bool(worst <= 1e-10)))

    mrep = localization.minami_check(
        cfg.schedule, int(p.get("minami_n", 50)),
        float(p.get("minami_L", 0.01)),
        int(p.get("minami_trials", min(trials * 10, 100_000))),
        base.substream(P_AUX))
    records.append(StatRecord(
        "two_eigenvalue_probability", mrep["empirical"],
        "probability of two eigenvalues in a small arc is at most "
        "(L N)^2 / 2", stderr=mrep["stderr"], reference_value=mrep["bound"],
        passed=bool(mrep["empirical"]
                    <= mrep["bound"] + 3 * mrep["stderr"])))

    prof = localization.resolvent_moment_profile(
        cfg.schedule, int(p.get("resolvent_n", 256)),
        p.get("separations", [10, 25, 50, 100, 200]),
        int(p.get("resolvent_trials", max(trials, 400))),
        base.substream(P_SDE), s=s)
    emp = np.asarray(prof["empirical"])
    se = np.asarray(prof["stderr"])
    kb = prof["bound"]
    records.append(StatRecord(
        "resolvent_moment_max", float(np.max(emp)),
        "fractional resolvent moments obey the uniform conjugate-function "
        "bound", stderr=float(se[int(np.argmax(emp))]), reference_value=kb,
        passed=bool(np.all(emp <= kb + 3 * se))))
    logs = np.log(emp)
    records.append(StatRecord(
        "resolvent_decay_monotone", float(np.max(np.diff(logs))),
        "log moments decrease with separation (exponential-type decay "
        "signature)", reference_value=0.0, tolerance=0.0,
        passed=bool(np.all(np.diff(logs) < 0.0))))
    series = {"decay_profile": {
        "separation": prof["separations"], "value": prof["empirical"],
        "stderr": prof["stderr"], "bound": [kb] * len(prof["separations"])}}
    return records, series, prof["near_hits"]


@experiment("invariant_suite")
def _run_invariants(cfg: ExperimentConfig):
    p = cfg.params
    records = []
    # Quadrature identities for the phase increment.
    viol = upsilon_identity_margins(
        r_grid=p.get("r_grid", (0.1, 0.3, 0.5, 0.7, 0.9)),
        psi_grid=p.get("psi_grid", (0.5, 1.5, 3.0)))
    for name, margin, tol in viol:
        records.append(StatRecord(
            name, margin,
            "phase-increment moment identity (quadrature over the "
            "coefficient angle)", reference_value=0.0, tolerance=tol,
            passed=bool(margin <= tol)))
    # Theta moments on a nu grid.
    ns = int(p.get("moment_samples", 100_000))
    worst = 0.0
    for nu in p.get("nu_grid", (2.0, 3.0, 5.0, 11.0, 101.0)):
        zs = sample_theta_nu(float(nu),
                             RngStream(cfg.seed).substream(P_AUX, int(nu)),
                             size=ns)
        r2 = np.abs(zs) ** 2
        m, se = _mean_se(r2)
        worst = max(worst, abs(m - 2.0 / (nu + 1.0)) / (5 * se))
    records.append(StatRecord(
        "theta_moment_worst_dev", worst,
        "second moment of the disk law equals 2/(nu+1), within 5 Monte "
        "Carlo standard errors on a nu grid",
        reference_value=0.0, tolerance=1.0, passed=bool(worst <= 1.0)))
    # Martingale mean of the phase (psi_s needs s recurrence steps).
    sched = cfg.schedule or make_schedule("critical", beta=2.0)
    theta = float(p.get("theta", 0.3))
    s_idx = min(cfg.n - 1, int(p.get("s_index", 99)))
    gammas = np.stack([
        sample_sequence(sched, s_idx + 1,
                        RngStream(cfg.seed).substream(P_TRIAL_A, t)).alphas
        for t in range(cfg.trials)])
    th = np.full((cfg.trials, 1), theta)
    psis = kernels.phase_final_many(gammas, th)[:, 0]
    m, se = _mean_se(psis)
    dev = abs(m - (s_idx + 1) * theta) / se
    records.append(StatRecord(
        "phase_mean_dev_sigmas", dev,
        "rotation invariance makes the relative phase a martingale: "
        "E psi_s(theta) = (s+1) theta",
        reference_value=0.0, tolerance=4.0, passed=bool(dev <= 4.0)))
    return records, {}, 0


def upsilon_identity_margins(r_grid=(0.1, 0.3, 0.5, 0.7, 0.9),
                             psi_grid=(0.5, 1.5, 3.0), nodes: int = 4096):
    """Max violation margins of the five quadrature identities.

    Returns (name, margin, tolerance) triples; margins <= 0 mean the
    identity holds with room to spare.
    """
    th = np.linspace(0.0, TWO_PI, nodes, endpoint=False)
    eith = np.exp(1j * th)
    out = []
    m_mean = m_sq = m_cross = m_prod = m_fourth = -np.inf
    for r in r_grid:
        g = r * eith
        logsq = math.log(1.0 / (1.0 - r * r))
        for psi in psi_grid:
            ups = upsilon(psi, g)
            m_mean = max(m_mean, abs(float(np.mean(ups))))
            m_sq = max(m_sq, float(np.mean(ups ** 2))
                       - (4.0 * math.pi ** 2 / 3.0) * r * r)
            num = 1.0 - g
            den = 1.0 - g * np.exp(1j * psi)
            w = np.log(num) - np.log(den)
            m_fourth = max(m_fourth, float(np.mean(np.abs(w) ** 4))
                           - 16.0 * abs(psi) * logsq ** 2)
            for phi in psi_grid:
                ups2 = upsilon(phi, g)
                cross = float(np.mean(ups * ups2))
                m_cross = max(m_cross, abs(cross)
                              - 2.0 * (abs(psi) + abs(phi)) * logsq)
                lead = 2.0 * r * r * float(np.real(
                    (np.exp(1j * psi) - 1.0) * (np.exp(-1j * phi) - 1.0)))
                m_prod = max(m_prod, abs(lead - cross)
                             - 2.0 * (abs(psi) + abs(phi)) * r * r * logsq)
    return [("increment_mean_zero", m_mean, 1e-10),
            ("increment_second_moment", m_sq, 1e-10),
            ("increment_cross_moment", m_cross, 1e-10),
            ("increment_cross_moment_leading", m_prod, 1e-10),
            ("increment_fourth_moment", m_fourth, 1e-10)]


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run one experiment; writes report and plot data when output_dir set."""
    t0 = time.perf_counter()
    records, series, failures = EXPERIMENTS[cfg.experiment](cfg)
    report = Report(experiment=cfg.experiment, config_hash=cfg.config_hash(),
                    records=records, series=series, failures=failures,
                    wall_time=time.perf_counter() - t0)
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg.experiment}_report.json").write_text(report.to_json())
        (out / f"{cfg.experiment}_config.json").write_text(
            json.dumps(cfg.resolved_dict(), sort_keys=True, indent=1))
        for kind in ("histogram", "decay_profile", "path_bundle"):
            try:
                emit_plot_data(report, kind, out)
            except KeyError:
                pass
    return report


def emit_plot_data(report: Report, kind: str, out_dir) -> List[str]:
    """Write plottable series of the requested kind as plain CSV files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if kind == "histogram":
        names = [k for k in report.series if "histogram" in k]
        if not names:
            raise KeyError(f"no histogram series in report; "
                           f"available: {sorted(report.series)}")
        for name in names:
            ser = report.series[name]
            path = out / f"{report.experiment}_{name}.csv"
            write_histogram_csv(path, ser["bin_edges"], ser["counts"],
                                ser.get("density"))
            written.append(str(path))
    elif kind == "decay_profile":
        if "decay_profile" not in report.series:
            raise KeyError(f"no decay_profile series; "
                           f"available: {sorted(report.series)}")
        ser = report.series["decay_profile"]
        path = out / f"{report.experiment}_decay_profile.csv"
        with open(path, "w") as fh:
            fh.write("separation,value,bound\n")
            for sep, val, bnd in zip(ser["separation"], ser["value"],
                                     ser["bound"]):
                fh.write(f"{sep},{val!r},{bnd!r}\n")
        written.append(str(path))
    elif kind == "path_bundle":
        if "path_bundle" not in report.series:
            raise KeyError(f"no path_bundle series; "
                           f"available: {sorted(report.series)}")
        ser = report.series["path_bundle"]
        path = out / f"{report.experiment}_path_bundle.csv"
        with open(path, "w") as fh:
            fh.write("t,path_id,x_index,value\n")
            for pid, vals in enumerate(ser["values"]):
                for ti, t in enumerate(ser["t"]):
                    for xi in ser["x_index"]:
                        fh.write(f"{t!r},{pid},{xi},{vals[ti][xi]!r}\n")
        written.append(str(path))
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    return written
