# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: initializedcheck=False, language_level=3
"""Compiled phase-recurrence kernels.

The unwrapped phase after m steps is

    psi_m = (m+1) theta + sum_k a_k - 2 sum_k arg(1 - gamma_k e^{i psi_k}),

with a_k = 2 arg(1 - gamma_k) precomputed per realization.  The inner loop
needs no per-step trig: e^{i psi_k} is carried as a complex pair updated by
multiplications (the division by v = 1 - gamma u reduces to conj(v)^2/|v|^2),
and sum arg(v_k) is recovered from the running product of the v_k, whose
branch-cut crossings are counted incrementally; each factor has positive
real part, so the product turns by less than pi/2 per step and crossings
are detected from sign patterns, consistently with atan2's signed zeros.

The recurrence is serial in k, so a single evaluation is latency-bound on
the one division per step; all entry points therefore run four independent
evaluations interleaved through the same loop.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, sin, sqrt

cdef extern from "math.h":
    bint signbit(double) nogil

cnp.import_array()

BACKEND = "native"

cdef double TWO_PI = 6.283185307179586476925287
cdef enum:
    LANES = 4


cdef void _phase_block(const double complex** gp, const double complex** qp,
                       const double** r2p, Py_ssize_t m, const double* theta,
                       const double* asum, bint want_deriv, double* out,
                       double* deriv) noexcept nogil:
    """Four interleaved phase evaluations (possibly different coefficients)."""
    cdef double ur[LANES]
    cdef double ui[LANES]
    cdef double rr[LANES]
    cdef double ri[LANES]
    cdef double Vr[LANES]
    cdef double Vi[LANES]
    cdef double dp[LANES]
    cdef long wind[LANES]
    cdef double gr, gi, wr, wi, vr, vi, v2, inv, cr, ci, tr, ti, nVr, nVi, s
    cdef long sb_old, sb_new
    cdef Py_ssize_t k
    cdef int l
    for l in range(LANES):
        ur[l] = cos(theta[l])
        ui[l] = sin(theta[l])
        rr[l] = ur[l]
        ri[l] = ui[l]
        Vr[l] = 1.0
        Vi[l] = 0.0
        dp[l] = 1.0
        wind[l] = 0
    for k in range(m):
        for l in range(LANES):
            gr = gp[l][k].real
            gi = gp[l][k].imag
            wr = gr * ur[l] - gi * ui[l]          # w = gamma_k u
            wi = gr * ui[l] + gi * ur[l]
            vr = 1.0 - wr                         # v = 1 - w, Re v > 0
            vi = -wi
            nVr = Vr[l] * vr - Vi[l] * vi         # V *= v
            nVi = Vr[l] * vi + Vi[l] * vr
            sb_old = signbit(Vi[l])
            sb_new = signbit(nVi)
            wind[l] += (nVr < 0.0) * (sb_old ^ sb_new) * (1 - 2 * sb_old)
            Vr[l] = nVr
            Vi[l] = nVi
            v2 = vr * vr + vi * vi
            inv = 1.0 / v2
            if want_deriv:
                dp[l] = 1.0 + dp[l] * r2p[l][k] * inv
            cr = (vr * vr - vi * vi) * inv        # conj(v)/v
            ci = -2.0 * vr * vi * inv
            tr = ur[l] * rr[l] - ui[l] * ri[l]    # u *= r
            ti = ur[l] * ri[l] + ui[l] * rr[l]
            ur[l] = tr * qp[l][k].real - ti * qp[l][k].imag   # u *= q_k
            ui[l] = tr * qp[l][k].imag + ti * qp[l][k].real
            tr = ur[l] * cr - ui[l] * ci          # u *= conj(v)/v
            ti = ur[l] * ci + ui[l] * cr
            ur[l] = tr
            ui[l] = ti
        if (k & 15) == 15:
            for l in range(LANES):
                s = 1.0 / sqrt(ur[l] * ur[l] + ui[l] * ui[l])
                ur[l] *= s
                ui[l] *= s
                s = 1.0 / sqrt(Vr[l] * Vr[l] + Vi[l] * Vi[l])
                Vr[l] *= s
                Vi[l] *= s
    for l in range(LANES):
        out[l] = ((m + 1) * theta[l] + asum[l]
                  - 2.0 * (atan2(Vi[l], Vr[l]) + TWO_PI * wind[l]))
        if want_deriv:
            deriv[l] = dp[l]


def _prep(gammas):
    g = np.ascontiguousarray(gammas, dtype=np.complex128)
    w = 1.0 - g
    a = 2.0 * np.arctan2(w.imag, w.real)
    q = np.ascontiguousarray(w / np.conj(w))
    return g, float(np.sum(a)), q


def phase_final(gammas, thetas):
    """psi_m(theta) for one coefficient vector at a batch of angles."""
    g, a_sum, q = _prep(gammas)
    th = np.ascontiguousarray(thetas, dtype=np.float64)
    out = np.empty_like(th)
    cdef double complex[::1] gv = g
    cdef double complex[::1] qv = q
    cdef double[::1] tv = th
    cdef double[::1] ov = out
    cdef const double complex* gp[LANES]
    cdef const double complex* qp[LANES]
    cdef double tb[LANES]
    cdef double ob[LANES]
    cdef double ab[LANES]
    cdef Py_ssize_t m = gv.shape[0], M = tv.shape[0], j
    cdef int l, nl
    cdef double asum = a_sum
    cdef const double complex* g0 = &gv[0] if m else NULL
    cdef const double complex* q0 = &qv[0] if m else NULL
    with nogil:
        for l in range(LANES):
            gp[l] = g0
            qp[l] = q0
            ab[l] = asum
        j = 0
        while j < M:
            nl = LANES if M - j >= LANES else <int> (M - j)
            for l in range(LANES):
                tb[l] = tv[j + l] if l < nl else tv[j]
            _phase_block(gp, qp, NULL, m, tb, ab, 0, ob, NULL)
            for l in range(nl):
                ov[j + l] = ob[l]
            j += nl
    return out


def phase_final_many(gammas, thetas):
    """Independent realizations in parallel: (T, m) gammas, (T, M) thetas."""
    g = np.ascontiguousarray(gammas, dtype=np.complex128)
    th = np.ascontiguousarray(thetas, dtype=np.float64)
    if g.ndim != 2 or th.ndim != 2 or g.shape[0] != th.shape[0]:
        raise ValueError("expected (T, m) gammas and (T, M) thetas")
    w = 1.0 - g
    a = np.ascontiguousarray(np.sum(2.0 * np.arctan2(w.imag, w.real), axis=1))
    q = np.ascontiguousarray(w / np.conj(w))
    out = np.empty_like(th)
    cdef double complex[:, ::1] gv = g
    cdef double complex[:, ::1] qv = q
    cdef double[::1] av = a
    cdef double[:, ::1] tv = th
    cdef double[:, ::1] ov = out
    cdef const double complex* gp[LANES]
    cdef const double complex* qp[LANES]
    cdef double tb[LANES]
    cdef double ob[LANES]
    cdef double ab[LANES]
    cdef Py_ssize_t T = gv.shape[0], m = gv.shape[1], M = tv.shape[1]
    cdef Py_ssize_t total = T * M, j, t0
    cdef int l, nl
    if m == 0:
        return th.copy()
    with nogil:
        j = 0
        while j < total:
            nl = LANES if total - j >= LANES else <int> (total - j)
            for l in range(LANES):
                t0 = (j + l) // M if l < nl else j // M
                gp[l] = &gv[t0, 0]
                qp[l] = &qv[t0, 0]
                ab[l] = av[t0]
                tb[l] = tv[t0, (j + l) % M] if l < nl else tv[t0, j % M]
            _phase_block(gp, qp, NULL, m, tb, ab, 0, ob, NULL)
            for l in range(nl):
                ov[(j + l) // M, (j + l) % M] = ob[l]
            j += nl
    return out


def phase_trajectory(gammas, theta):
    """All intermediate phases psi_0..psi_m at a single angle."""
    g = np.ascontiguousarray(gammas, dtype=np.complex128)
    w = 1.0 - g
    a = np.ascontiguousarray(2.0 * np.arctan2(w.imag, w.real))
    q = np.ascontiguousarray(w / np.conj(w))
    out = np.empty(g.size + 1)
    cdef double complex[::1] gv = g
    cdef double[::1] av = a
    cdef double complex[::1] qv = q
    cdef double[::1] ov = out
    cdef Py_ssize_t m = gv.shape[0], k
    cdef double th = theta, psi = theta
    cdef double complex u = cos(th) + 1j * sin(th)
    cdef double complex r = u
    cdef double complex v
    ov[0] = psi
    with nogil:
        for k in range(m):
            v = 1.0 - gv[k] * u
            psi += th + av[k] - 2.0 * atan2(v.imag, v.real)
            ov[k + 1] = psi
            u = u * r * (qv[k] * v.conjugate() / v)
            if (k & 63) == 63:
                u = u / sqrt(u.real * u.real + u.imag * u.imag)
    return out


def refine_roots(gammas, lo, hi, psi_lo, psi_hi, targets, double tol,
                 int max_iter=100):
    """Solve psi(theta) = target inside each bracket, to angle width tol.

    Bisection-safeguarded Newton per root (monotonicity makes the brackets
    exact); roots are streamed through the four interleaved lanes, refilling
    a lane whenever its root converges.
    """
    g, a_sum, q = _prep(gammas)
    rho2 = np.ascontiguousarray(1.0 - np.abs(g) ** 2)
    lo_ = np.array(lo, dtype=np.float64)
    hi_ = np.array(hi, dtype=np.float64)
    flo_ = np.asarray(psi_lo, dtype=np.float64) - targets
    fhi_ = np.asarray(psi_hi, dtype=np.float64) - targets
    tg = np.ascontiguousarray(targets, dtype=np.float64)
    out = np.empty_like(tg)
    iters = np.zeros(tg.shape[0], dtype=np.int64)
    cdef double complex[::1] gv = g
    cdef double complex[::1] qv = q
    cdef double[::1] r2v = rho2
    cdef double[::1] lov = lo_, hiv = hi_, flov = flo_, fhiv = fhi_
    cdef double[::1] tgv = tg, ov = out
    cdef long[::1] itv = iters
    cdef double asum = a_sum
    cdef Py_ssize_t m = gv.shape[0], R = tgv.shape[0]
    cdef const double complex* gp[LANES]
    cdef const double complex* qp[LANES]
    cdef const double* r2p[LANES]
    cdef double tb[LANES]
    cdef double ob[LANES]
    cdef double ab[LANES]
    cdef double db[LANES]
    cdef Py_ssize_t lane_root[LANES]
    cdef Py_ssize_t next_root = 0, rid
    cdef int l, active
    cdef double f, fp, step, cand, theta
    if R == 0:
        return out
    with nogil:
        for l in range(LANES):
            gp[l] = &gv[0] if m else NULL
            qp[l] = &qv[0] if m else NULL
            r2p[l] = &r2v[0] if m else NULL
            lane_root[l] = -1
        # Seed each root's first candidate by the secant through the bracket
        # endpoints; converged-at-entry roots are resolved immediately.
        while True:
            active = 0
            for l in range(LANES):
                while lane_root[l] < 0 and next_root < R:
                    rid = next_root
                    next_root += 1
                    if hiv[rid] - lov[rid] <= tol:
                        ov[rid] = 0.5 * (lov[rid] + hiv[rid])
                        continue
                    if fhiv[rid] > flov[rid]:
                        theta = lov[rid] + ((hiv[rid] - lov[rid])
                                            * (-flov[rid])
                                            / (fhiv[rid] - flov[rid]))
                    else:
                        theta = 0.5 * (lov[rid] + hiv[rid])
                    if not (lov[rid] < theta < hiv[rid]):
                        theta = 0.5 * (lov[rid] + hiv[rid])
                    lane_root[l] = rid
                    ov[rid] = theta          # current candidate lives in ov
                if lane_root[l] >= 0:
                    active += 1
                    tb[l] = ov[lane_root[l]]
                    ab[l] = asum
                else:
                    tb[l] = 0.0
                    ab[l] = asum
            if active == 0:
                break
            _phase_block(gp, qp, r2p, m, tb, ab, 1, ob, db)
            for l in range(LANES):
                rid = lane_root[l]
                if rid < 0:
                    continue
                theta = tb[l]
                f = ob[l] - tgv[rid]
                fp = db[l]
                if f < 0.0:
                    lov[rid] = theta
                else:
                    hiv[rid] = theta
                itv[rid] += 1
                if hiv[rid] - lov[rid] <= tol or itv[rid] >= max_iter:
                    ov[rid] = 0.5 * (lov[rid] + hiv[rid])
                    lane_root[l] = -1
                    continue
                if fp > 0.0:
                    step = f / fp
                    cand = theta - step
                    if fabs(step) < 0.25 * tol and lov[rid] <= cand <= hiv[rid]:
                        ov[rid] = cand
                        lane_root[l] = -1
                        continue
                    if not (lov[rid] < cand < hiv[rid]):
                        cand = 0.5 * (lov[rid] + hiv[rid])
                else:
                    cand = 0.5 * (lov[rid] + hiv[rid])
                ov[rid] = cand
    return out
