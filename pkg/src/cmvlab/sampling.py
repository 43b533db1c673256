"""Random Verblunsky coefficients under the three decay regimes.

The coefficient laws are rotationally invariant on the open unit disk.  The
workhorse is the Theta_nu family, with density proportional to
``(1-|z|^2)^{(nu-3)/2}``; its radial part is sampled exactly by inverse CDF,
``|a|^2 = 1 - U^{2/(nu-1)}``.  A decay schedule maps the coefficient index k
to a target second moment m_k (and, for the Theta law, to nu_k = 2/m_k - 1)
so that

* ``fast``      m_k = (k+1)^(-d), d > 1            (clock statistics)
* ``critical``  nu_k = beta*(k+1)+1, the exact circular-beta construction
* ``slow``      m_k = (k+1)^(eps-1), eps in (0,1)  (Poisson statistics)

Power-law formulas hit m_0 = 1 at k = 0, which would put |alpha_0| on the
unit circle and decouple the matrix; second moments are therefore capped at
``m_cap`` (default 0.75), which only affects k = 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError, DomainError
from .rng import RngStream

REGIMES = ("fast", "critical", "slow", "custom")
LAWS = ("theta_nu", "fixed_modulus_uniform_phase")

DEFAULT_M_CAP = 0.75

# Largest squared radius whose square root still rounds strictly below 1;
# the inverse CDF saturates to 1.0 in doubles when nu is close to 1.
R2_MAX = 1.0 - 1e-15


@dataclass
class CoefficientSequence:
    """Coefficients alpha_0..alpha_{n-2} in the open disk plus boundary phase."""

    alphas: np.ndarray
    eta: float
    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.complex128)
        if self.alphas.ndim != 1:
            raise ValueError("alphas must be one-dimensional")
        if not np.all(np.isfinite(self.alphas.view(np.float64))):
            raise ValueError("alphas must be finite")
        if self.alphas.size and np.max(np.abs(self.alphas)) >= 1.0:
            raise DomainError("coefficients must satisfy |alpha| < 1")
        if not math.isfinite(self.eta):
            raise ValueError("eta must be finite")
        self.eta = float(self.eta) % (2.0 * math.pi)

    @property
    def n(self) -> int:
        return self.alphas.size + 1

    @property
    def rhos(self) -> np.ndarray:
        return np.sqrt(1.0 - np.abs(self.alphas) ** 2)


@dataclass(frozen=True)
class DecaySchedule:
    """Decay regime for the coefficient second moments E|alpha_k|^2."""

    regime: str
    law: str = "theta_nu"
    beta: Optional[float] = None
    epsilon: Optional[float] = None
    decay_exponent: Optional[float] = None
    m_cap: float = DEFAULT_M_CAP
    custom_moments: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False, compare=False)

    # -- target moments ----------------------------------------------------

    def second_moment(self, k) -> np.ndarray:
        """Exact E|alpha_k|^2 for index array ``k``.

        The cap applies only to the power-law regimes, whose formulas hit
        m_0 = 1 at k = 0; the critical formula stays below 1 on its own
        (and must not be touched, or exactness at extreme beta is lost).
        """
        k = np.asarray(k, dtype=np.float64)
        if self.regime == "critical":
            return 2.0 / (self.beta * (k + 1.0) + 2.0)
        if self.regime == "fast":
            m = (k + 1.0) ** (-self.decay_exponent)
        elif self.regime == "slow":
            m = (k + 1.0) ** (self.epsilon - 1.0)
        else:
            m = np.asarray(self.custom_moments(k), dtype=np.float64)
        return np.minimum(m, self.m_cap)

    def nu(self, k) -> np.ndarray:
        """Theta parameter per index: nu_k with E|alpha|^2 = 2/(nu_k+1)."""
        return 2.0 / self.second_moment(k) - 1.0

    # -- serialization (the CLI schema) ------------------------------------

    def to_json(self) -> str:
        if self.regime == "custom":
            raise ConfigurationError("custom schedules are programmatic only")
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_dict(self) -> dict:
        if self.regime == "custom":
            raise ConfigurationError("custom schedules are programmatic only")
        return {"regime": self.regime, "beta": self.beta,
                "epsilon": self.epsilon,
                "decay_exponent": self.decay_exponent, "law": self.law}

    @staticmethod
    def from_dict(d: dict) -> "DecaySchedule":
        kwargs = {k: d.get(k) for k in
                  ("beta", "epsilon", "decay_exponent")}
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return make_schedule(d["regime"], law=d.get("law", "theta_nu"),
                             **kwargs)

    @staticmethod
    def from_json(s: str) -> "DecaySchedule":
        return DecaySchedule.from_dict(json.loads(s))


def make_schedule(regime: str, *, beta: float = None, epsilon: float = None,
                  decay_exponent: float = None, law: str = "theta_nu",
                  m_cap: float = DEFAULT_M_CAP,
                  custom_moments: Callable = None) -> DecaySchedule:
    """Validated schedule constructor.

    Parameters are accepted exactly when the regime requires them:
    ``beta > 0`` for critical, ``epsilon in (0,1)`` for slow,
    ``decay_exponent > 1`` for fast, ``custom_moments`` for custom.
    """
    if regime not in REGIMES:
        raise ConfigurationError(f"unknown regime {regime!r}")
    if law not in LAWS:
        raise ConfigurationError(f"unknown law {law!r}")
    if not 0.0 < m_cap < 1.0:
        raise ConfigurationError("m_cap must lie in (0, 1)")

    given = {"beta": beta, "epsilon": epsilon,
             "decay_exponent": decay_exponent}
    required = {"critical": "beta", "slow": "epsilon", "fast": "decay_exponent",
                "custom": None}[regime]
    for name, value in given.items():
        if name == required:
            if value is None:
                raise ConfigurationError(f"{regime} regime requires {name}")
        elif value is not None:
            raise ConfigurationError(
                f"{name} is not a parameter of the {regime} regime")

    if regime == "critical" and beta <= 0:
        raise ConfigurationError("beta must be positive")
    if regime == "slow" and not 0.0 < epsilon < 1.0:
        raise ConfigurationError("epsilon must lie in (0, 1)")
    if regime == "fast" and decay_exponent <= 1.0:
        raise ConfigurationError("decay_exponent must exceed 1")
    if regime == "custom" and custom_moments is None:
        raise ConfigurationError("custom regime requires custom_moments")
    if regime != "custom" and custom_moments is not None:
        raise ConfigurationError("custom_moments only valid for custom regime")

    sched = DecaySchedule(regime=regime, law=law, beta=beta, epsilon=epsilon,
                          decay_exponent=decay_exponent, m_cap=m_cap,
                          custom_moments=custom_moments)
    # Target moments must land strictly inside (0, 1).
    probe = sched.second_moment(np.arange(8))
    if np.any(probe <= 0.0) or np.any(probe >= 1.0):
        raise ConfigurationError("schedule moments must lie in (0, 1)")
    return sched


# ---------------------------------------------------------------------------
# Theta_nu sampling and moments
# ---------------------------------------------------------------------------

def sample_theta_nu(nu: float, rng: RngStream, size: int = None):
    """Draw from the Theta_nu law on the unit disk (exact inverse CDF).

    Radially, |a|^2 = 1 - U^{2/(nu-1)} with U uniform; the argument is an
    independent uniform angle.  Requires nu > 1.
    """
    if np.any(np.asarray(nu) <= 1.0):
        raise DomainError("Theta_nu requires nu > 1")
    gen = rng.generator()
    return _theta_nu_from_generator(nu, gen, size)


def _theta_nu_from_generator(nu, gen, size=None):
    scalar = size is None and np.ndim(nu) == 0
    if size is None:
        size = np.shape(nu) if np.ndim(nu) else 1
    u = 1.0 - gen.random(size)        # in (0, 1], keeps |alpha| < 1 strictly
    r2 = -np.expm1(np.log(u) * (2.0 / (np.asarray(nu) - 1.0)))
    r2 = np.minimum(r2, R2_MAX)
    phase = gen.uniform(0.0, 2.0 * np.pi, size)
    out = np.sqrt(r2) * np.exp(1j * phase)
    return complex(out[0]) if scalar else out


def theta_log_moment(nu, m: float) -> np.ndarray:
    """E log^m[1/(1-|a|^2)] = Gamma(m+1) (2/(nu-1))^m for a ~ Theta_nu."""
    nu = np.asarray(nu, dtype=np.float64)
    return math.gamma(m + 1.0) * (2.0 / (nu - 1.0)) ** m


def theta_inverse_moment(nu, s: float) -> np.ndarray:
    """E (1-|a|^2)^{-s} = (nu-1)/(nu-1-2s), finite iff nu - 1 > 2s."""
    nu = np.asarray(nu, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(nu - 1.0 > 2.0 * s,
                       (nu - 1.0) / (nu - 1.0 - 2.0 * s), np.inf)
    return out


def theta_moment_quad(nu: float, fn=None, *, fn_t=None, tol: float = 1e-10):
    """Quadrature fallback: E fn(|a|^2) under the Theta_nu radial density.

    Used for laws without closed-form moments and as the independent check
    of the closed forms above.  Integrates in t = log[1/(1-u)], where the
    density becomes a plain exponential (no endpoint singularity for nu
    close to 1).  Moments that blow up at u = 1 (log powers, inverse
    moments) should be supplied as ``fn_t``, a function of t, because u
    saturates to 1.0 in doubles for t above ~37.  Returns
    (value, error_estimate).
    """
    if (fn is None) == (fn_t is None):
        raise ValueError("give exactly one of fn, fn_t")
    if fn_t is None:
        def fn_t(t):
            return fn(-math.expm1(-t))
    a = (nu - 1.0) / 2.0

    def integrand(t):
        w = a * math.exp(-a * t)
        return w * fn_t(t) if w != 0.0 else 0.0

    val, err = quad(integrand, 0.0, np.inf, epsabs=tol, epsrel=tol,
                    limit=200)
    return val, err


# ---------------------------------------------------------------------------
# Sequence sampling
# ---------------------------------------------------------------------------

def sample_sequence(schedule: DecaySchedule, n: int,
                    rng: RngStream) -> CoefficientSequence:
    """Draw the n-1 independent coefficients of one realization plus eta.

    Deterministic given the stream: radii (for the Theta law), then phases,
    then eta are consumed in that order.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    gen = rng.generator()
    k = np.arange(n - 1)
    if schedule.law == "theta_nu":
        nu = schedule.nu(k)
        u = 1.0 - gen.random(n - 1)
        r2 = np.minimum(-np.expm1(np.log(u) * (2.0 / (nu - 1.0))), R2_MAX)
    else:  # fixed modulus, uniform phase
        r2 = schedule.second_moment(k)
    phases = gen.uniform(0.0, 2.0 * np.pi, n - 1)
    alphas = np.sqrt(r2) * np.exp(1j * phases)
    eta = gen.uniform(0.0, 2.0 * np.pi)
    return CoefficientSequence(alphas=alphas, eta=eta)


# ---------------------------------------------------------------------------
# Schedule diagnostics
# ---------------------------------------------------------------------------

@dataclass
class ScheduleDiagnostics:
    """Moment profile of a schedule and which decay hypotheses it meets."""

    k: np.ndarray
    second_moments: np.ndarray
    log2_moments: np.ndarray
    log32_moments: np.ndarray
    inverse_moments: np.ndarray          # E (1-|a|^2)^{-s}
    s: float
    error_sequence: np.ndarray           # e_k = (k+1) * E log^2[...]
    satisfies_clock: bool
    satisfies_cbe: bool
    cbe_beta: Optional[float]
    satisfies_poisson: bool
    method: str                          # closed_form | quadrature
    quad_tol: Optional[float]

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in (
            "s", "satisfies_clock", "satisfies_cbe", "cbe_beta",
            "satisfies_poisson", "method", "quad_tol")}
        for f in ("k", "second_moments", "log2_moments", "log32_moments",
                  "inverse_moments", "error_sequence"):
            d[f] = np.asarray(getattr(self, f)).tolist()
        return d


def _law_moments(schedule, k, s, quad_tol):
    """Per-index analytic moments for the schedule's law."""
    m = schedule.second_moment(k)
    if schedule.law == "theta_nu":
        nu = schedule.nu(k)
        return (m, theta_log_moment(nu, 2.0), theta_log_moment(nu, 1.5),
                theta_inverse_moment(nu, s), "closed_form", None)
    if schedule.law == "fixed_modulus_uniform_phase":
        # |alpha| is deterministic, so the moments are plain evaluations.
        lg = np.log(1.0 / (1.0 - m))
        return m, lg ** 2, lg ** 1.5, (1.0 - m) ** (-s), "closed_form", None
    # Unknown law: integrate the radial density numerically.
    nu = schedule.nu(k)
    log2 = np.array([theta_moment_quad(v, fn_t=lambda t: t ** 2,
                                       tol=quad_tol)[0] for v in nu])
    log32 = np.array([theta_moment_quad(v, fn_t=lambda t: t ** 1.5,
                                        tol=quad_tol)[0] for v in nu])
    inv = np.array([theta_moment_quad(v, fn_t=lambda t: math.exp(s * t),
                                      tol=quad_tol)[0] for v in nu])
    return m, log2, log32, inv, "quadrature", quad_tol


def validate_schedule(schedule: DecaySchedule, k_max: int, *, s: float = 0.25,
                      quad_tol: float = 1e-10) -> ScheduleDiagnostics:
    """Moment diagnostics for k <= k_max and decay-hypothesis classification.

    The three hypotheses tested are (k+1)*m_k -> 0 (clock), matching
    2/(beta(k+1)) with vanishing (k+1)*E log^2 correction (circular beta),
    and m_k >= (k+1)^(eps-1) with bounded E(1-|alpha|^2)^{-s} (Poisson).
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    k = np.unique(np.geomspace(1, k_max + 1, num=min(64, k_max + 1),
                               dtype=np.int64)) - 1
    m, log2, log32, inv, method, qtol = _law_moments(schedule, k, s, quad_tol)
    err = (k + 1) * log2

    # Classification looks at the trend of (k+1) m_k over the probed range:
    # decaying (clock), flat around a positive constant 2/beta with vanishing
    # (k+1) E log^2 correction (circular beta), or growing with bounded
    # inverse moments (Poisson).
    tail = (k + 1.0) * m
    mid = len(tail) // 2
    clock = bool(tail[-1] < 0.7 * tail[mid]
                 and np.all(np.diff(tail[mid:]) <= 1e-12))

    beta = schedule.beta
    if beta is None and tail[-1] > 0:
        beta = float(2.0 / tail[-1])   # candidate coupling from the tail
    cbe = False
    if beta is not None and np.isfinite(beta) and beta > 0:
        rel_drift = np.abs(tail * beta / 2.0 - 1.0)
        cbe = bool(rel_drift[-1] < 0.05 and rel_drift[mid] < 0.2
                   and err[-1] < 0.05)
    if not cbe:
        beta = None

    poisson = bool(np.all(np.isfinite(inv)) and np.max(inv) < 50.0
                   and tail[-1] > 1.15 * tail[mid] and tail[-1] > 1.0)

    return ScheduleDiagnostics(
        k=k, second_moments=m, log2_moments=log2, log32_moments=log32,
        inverse_moments=inv, s=s, error_sequence=err,
        satisfies_clock=clock, satisfies_cbe=cbe, cbe_beta=beta,
        satisfies_poisson=poisson, method=method, quad_tol=qtol)
