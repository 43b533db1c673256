"""Pure-numpy fallback for the phase-recurrence kernels.

Semantics match the native extension: the running phase psi_k(theta) is
accumulated from exact principal-branch increments, while the unimodular
e^{i psi_k} needed by the next increment is tracked with complex arithmetic
(no per-step trig) and renormalized periodically.
"""

import numpy as np

BACKEND = "python"

_RENORM = 64


def _prep(gammas):
    g = np.ascontiguousarray(gammas, dtype=np.complex128)
    w = 1.0 - g
    a = 2.0 * np.arctan2(w.imag, w.real)   # 2 arg(1 - gamma_k)
    q = w / np.conj(w)                     # e^{i a_k}, exactly unimodular
    return g, a, q


def phase_final(gammas, thetas):
    """psi_{m}(theta) for one coefficient vector at a batch of angles.

    ``gammas`` has length m, so the returned value is the phase after m
    recurrence steps (psi_0 = theta).
    """
    g, a, q = _prep(gammas)
    th = np.asarray(thetas, dtype=np.float64)
    psi = th.astype(np.float64).copy()
    u = np.exp(1j * th)
    r = u.copy()
    for k in range(g.size):
        v = 1.0 - g[k] * u
        psi += th + (a[k] - 2.0 * np.arctan2(v.imag, v.real))
        u *= r * (q[k] * np.conj(v) / v)
        if (k + 1) % _RENORM == 0:
            u /= np.abs(u)
    return psi


def phase_final_many(gammas, thetas):
    """Independent realizations in parallel: (T, m) gammas, (T, M) thetas."""
    g = np.ascontiguousarray(gammas, dtype=np.complex128)
    th = np.asarray(thetas, dtype=np.float64)
    if g.ndim != 2 or th.ndim != 2 or g.shape[0] != th.shape[0]:
        raise ValueError("expected (T, m) gammas and (T, M) thetas")
    w = 1.0 - g
    a = 2.0 * np.arctan2(w.imag, w.real)
    q = w / np.conj(w)
    psi = th.astype(np.float64).copy()
    u = np.exp(1j * th)
    r = u.copy()
    for k in range(g.shape[1]):
        gk = g[:, k, None]
        v = 1.0 - gk * u
        psi += th + (a[:, k, None] - 2.0 * np.arctan2(v.imag, v.real))
        u *= r * (q[:, k, None] * np.conj(v) / v)
        if (k + 1) % _RENORM == 0:
            u /= np.abs(u)
    return psi


def phase_trajectory(gammas, theta):
    """All intermediate phases psi_0..psi_m at a single angle."""
    g, a, q = _prep(gammas)
    out = np.empty(g.size + 1)
    out[0] = psi = float(theta)
    u = np.exp(1j * psi)
    r = u
    for k in range(g.size):
        v = 1.0 - g[k] * u
        psi += theta + (a[k] - 2.0 * np.arctan2(v.imag, v.real))
        out[k + 1] = psi
        u *= r * (q[k] * np.conj(v) / v)
        if (k + 1) % _RENORM == 0:
            u /= abs(u)
    return out


def refine_roots(gammas, lo, hi, psi_lo, psi_hi, targets, tol, max_iter=200):
    """Solve psi(theta) = target inside each bracket, to angle width tol.

    Lockstep bisection over all brackets; psi_lo/psi_hi are accepted for
    signature parity with the native kernel (which uses them to seed a
    safeguarded Newton iteration).
    """
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    for _ in range(max_iter):
        if np.max(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        below = phase_final(gammas, mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)
