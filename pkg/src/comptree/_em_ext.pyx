# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled EM loop for one candidate edge.

Mirrors ``comptree._em_py.run_em`` step for step, including the optional
squared extrapolation. The iteration runs without the GIL, so pairwise fits
scale across threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs, sqrt

cnp.import_array()

# parameter/statistics slots
DEF CUR = 0
DEF S1 = 1
DEF S2 = 2
DEF EXT = 3
DEF S3 = 4


cdef double _pass(const double[:, ::1] xc, const double[:, ::1] xp, double omega0,
                  const double[::1] eta, const double[:, ::1] M,
                  double[::1] A, double[:, ::1] B) noexcept nogil:
    cdef Py_ssize_t n = xc.shape[0], dc = xc.shape[1], dp = xp.shape[1]
    cdef Py_ssize_t i, r, c
    cdef double omega1 = 1.0 - omega0
    cdef double x, mx, w, risk = 0.0
    for r in range(dc):
        A[r] = 0.0
        for c in range(dp):
            B[r, c] = 0.0
    for i in range(n):
        for r in range(dc):
            x = xc[i, r]
            if x > 0.0:
                mx = 0.0
                for c in range(dp):
                    mx += M[r, c] * xp[i, c]
                w = x / (omega0 * eta[r] + omega1 * mx)
                risk += x * log(w)
                A[r] += w
                for c in range(dp):
                    B[r, c] += w * xp[i, c]
    return risk / n


cdef bint _floor_project(const double[::1] a, double floor, double[::1] out,
                         char[::1] fixed) noexcept nogil:
    cdef Py_ssize_t d = a.shape[0], r
    cdef Py_ssize_t n_fixed = 0
    cdef double free_mass, total
    cdef bint engaged = False, changed
    for r in range(d):
        fixed[r] = 0
    while True:
        free_mass = 1.0 - floor * n_fixed
        total = 0.0
        for r in range(d):
            if not fixed[r]:
                total += a[r]
        for r in range(d):
            if fixed[r]:
                out[r] = floor
            elif total > 0.0:
                out[r] = (a[r] / total) * free_mass
            else:
                out[r] = free_mass / (d - n_fixed)
        changed = False
        for r in range(d):
            if not fixed[r] and out[r] < floor:
                fixed[r] = 1
                n_fixed += 1
                changed = True
        if not changed:
            return engaged
        engaged = True


cdef bint _mstep(double[::1] omega, double[:, ::1] eta, double[:, :, ::1] M,
                 double[:, ::1] A, double[:, :, ::1] B, int src, int dst,
                 double total, double omega_min, double eta_min,
                 double[::1] a, double[:, ::1] b, double[::1] col, char[::1] fixed) noexcept nogil:
    """Closed-form M-step from slot ``src`` parameters/statistics into slot ``dst``."""
    cdef Py_ssize_t dc = eta.shape[1], dp = M.shape[2], r, c
    cdef double omega0 = omega[src], omega1 = 1.0 - omega0, sa = 0.0, raw, clamped
    cdef bint floored
    for r in range(dc):
        a[r] = omega0 * eta[src, r] * A[src, r]
        sa += a[r]
    for c in range(dp):
        col[c] = 0.0
    for r in range(dc):
        for c in range(dp):
            b[r, c] = omega1 * M[src, r, c] * B[src, r, c]
            col[c] += b[r, c]
    for c in range(dp):
        if col[c] > 0.0:
            for r in range(dc):
                M[dst, r, c] = b[r, c] / col[c]
        elif dst != src:
            for r in range(dc):
                M[dst, r, c] = M[src, r, c]
    raw = sa / total
    clamped = raw
    if clamped < omega_min:
        clamped = omega_min
    if clamped > 1.0 - omega_min:
        clamped = 1.0 - omega_min
    omega[dst] = clamped
    floored = _floor_project(a, eta_min, eta[dst], fixed)
    return floored or clamped != raw


cdef void _copy(double[::1] omega, double[:, ::1] eta, double[:, :, ::1] M,
                double[:, ::1] A, double[:, :, ::1] B, int src, int dst) noexcept nogil:
    cdef Py_ssize_t dc = eta.shape[1], dp = M.shape[2], r, c
    omega[dst] = omega[src]
    for r in range(dc):
        eta[dst, r] = eta[src, r]
        A[dst, r] = A[src, r]
        for c in range(dp):
            M[dst, r, c] = M[src, r, c]
            B[dst, r, c] = B[src, r, c]


cdef bint _extrapolate(double[::1] omega, double[:, ::1] eta, double[:, :, ::1] M,
                       double omega_min, double eta_min) noexcept nogil:
    """Write the backtracked extrapolation of slots CUR, S1, S2 into EXT."""
    cdef Py_ssize_t dc = eta.shape[1], dp = M.shape[2], r, c, k
    cdef double dr, dv, nr = 0.0, nv = 0.0, alpha, x, cr, cv
    cdef bint ok
    dr = omega[S1] - omega[CUR]
    dv = omega[S2] - 2.0 * omega[S1] + omega[CUR]
    nr += dr * dr
    nv += dv * dv
    for r in range(dc):
        dr = eta[S1, r] - eta[CUR, r]
        dv = eta[S2, r] - 2.0 * eta[S1, r] + eta[CUR, r]
        nr += dr * dr
        nv += dv * dv
        for c in range(dp):
            dr = M[S1, r, c] - M[CUR, r, c]
            dv = M[S2, r, c] - 2.0 * M[S1, r, c] + M[CUR, r, c]
            nr += dr * dr
            nv += dv * dv
    if nv == 0.0:
        return False
    alpha = -sqrt(nr) / sqrt(nv)
    for k in range(30):
        if alpha >= -1.0:
            return False
        cr = -2.0 * alpha
        cv = alpha * alpha
        ok = True
        x = omega[CUR] + cr * (omega[S1] - omega[CUR]) + cv * (omega[S2] - 2.0 * omega[S1] + omega[CUR])
        omega[EXT] = x
        if x < omega_min or x > 1.0 - omega_min:
            ok = False
        for r in range(dc):
            x = eta[CUR, r] + cr * (eta[S1, r] - eta[CUR, r]) + cv * (eta[S2, r] - 2.0 * eta[S1, r] + eta[CUR, r])
            eta[EXT, r] = x
            if x < eta_min:
                ok = False
            for c in range(dp):
                x = M[CUR, r, c] + cr * (M[S1, r, c] - M[CUR, r, c]) + cv * (M[S2, r, c] - 2.0 * M[S1, r, c] + M[CUR, r, c])
                M[EXT, r, c] = x
                if x < 0.0:
                    ok = False
        if ok:
            return True
        alpha = 0.5 * (alpha - 1.0)
    return False


cdef inline bint _done(double new_risk, double old_risk, double rel_tol) noexcept nogil:
    return fabs(new_risk - old_risk) / (old_risk if old_risk > 1e-12 else 1e-12) < rel_tol


def run_em(xc_in, xp_in, double omega0, eta_in, M_in, int max_iters, double rel_tol,
           double omega_min, double eta_min, bint accelerate=False):
    """Iterate E and M steps from the given start.

    Returns ``(omega0, eta, M, trace, projected, iterations, converged)``.
    """
    cdef const double[:, ::1] xc = np.ascontiguousarray(xc_in, dtype=np.float64)
    cdef const double[:, ::1] xp = np.ascontiguousarray(xp_in, dtype=np.float64)
    cdef Py_ssize_t n = xc.shape[0], dc = xc.shape[1], dp = xp.shape[1]
    omega_arr = np.zeros(5)
    eta_arr = np.zeros((5, dc))
    M_arr = np.zeros((5, dc, dp))
    omega_arr[CUR] = omega0
    eta_arr[CUR] = np.asarray(eta_in, dtype=np.float64)
    M_arr[CUR] = np.asarray(M_in, dtype=np.float64)
    cdef double[::1] omega = omega_arr
    cdef double[:, ::1] eta = eta_arr
    cdef double[:, :, ::1] M = M_arr
    cdef double[:, ::1] A = np.zeros((5, dc))
    cdef double[:, :, ::1] B = np.zeros((5, dc, dp))
    cdef double[::1] a = np.zeros(dc)
    cdef double[:, ::1] b = np.zeros((dc, dp))
    cdef double[::1] col = np.zeros(dp)
    cdef char[::1] fixed = np.zeros(dc, dtype=np.int8)
    # each M-step appends at most one trace entry
    trace_arr = np.empty(max_iters + 1)
    proj_arr = np.zeros(max_iters + 1, dtype=np.uint8)
    cdef double[::1] trace = trace_arr
    cdef unsigned char[::1] proj = proj_arr
    cdef Py_ssize_t i, r, n_trace = 1
    cdef int it = 0
    cdef bint converged = False, p1, p2, p3, accepted
    cdef double total = 0.0, risk, r1, r2, r3, new_risk

    with nogil:
        for i in range(n):
            for r in range(dc):
                total += xc[i, r]
        risk = _pass(xc, xp, omega[CUR], eta[CUR], M[CUR], A[CUR], B[CUR])
        trace[0] = risk
        while it < max_iters:
            it += 1
            p1 = _mstep(omega, eta, M, A, B, CUR, S1, total, omega_min, eta_min, a, b, col, fixed)
            r1 = _pass(xc, xp, omega[S1], eta[S1], M[S1], A[S1], B[S1])
            trace[n_trace] = r1
            proj[n_trace] = p1
            n_trace += 1
            if _done(r1, risk, rel_tol):
                _copy(omega, eta, M, A, B, S1, CUR)
                converged = True
                break
            if not accelerate or it + 2 > max_iters:
                _copy(omega, eta, M, A, B, S1, CUR)
                risk = r1
                continue
            it += 1
            p2 = _mstep(omega, eta, M, A, B, S1, S2, total, omega_min, eta_min, a, b, col, fixed)
            r2 = _pass(xc, xp, omega[S2], eta[S2], M[S2], A[S2], B[S2])
            accepted = False
            if _extrapolate(omega, eta, M, omega_min, eta_min):
                _pass(xc, xp, omega[EXT], eta[EXT], M[EXT], A[EXT], B[EXT])
                it += 1
                p3 = _mstep(omega, eta, M, A, B, EXT, S3, total, omega_min, eta_min, a, b, col, fixed)
                r3 = _pass(xc, xp, omega[S3], eta[S3], M[S3], A[S3], B[S3])
                if r3 <= r2:
                    trace[n_trace] = r3
                    proj[n_trace] = p3
                    _copy(omega, eta, M, A, B, S3, CUR)
                    new_risk = r3
                    accepted = True
            if not accepted:
                trace[n_trace] = r2
                proj[n_trace] = p2
                _copy(omega, eta, M, A, B, S2, CUR)
                new_risk = r2
            n_trace += 1
            if _done(new_risk, r1, rel_tol):
                converged = True
                break
            risk = new_risk

    return (
        float(omega_arr[CUR]),
        eta_arr[CUR].copy(),
        M_arr[CUR].copy(),
        trace_arr[:n_trace].copy(),
        proj_arr[:n_trace].astype(bool),
        it,
        bool(converged),
    )
