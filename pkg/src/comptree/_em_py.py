"""Pure numpy EM loop, used when the compiled kernel is unavailable.

Both backends expose ``run_em`` with the same signature and semantics; see
``_em_ext.pyx`` for the compiled twin.

With ``accelerate`` set, plain EM steps are wrapped in a squared
extrapolation cycle (two EM steps, an extrapolated point, one stabilizing EM
step). The cycle result is kept only if it is feasible and does not raise the
risk, otherwise the second plain step is kept, so the trace stays monotone.
"""
import numpy as np

from .simplex import floor_project


def _pass(xc, xp, omega0, eta, M):
    """Risk at the current parameters plus the EM sufficient statistics.

    With ``W[i, r] = x[i, r] / xhat[i, r]`` the M-step needs only
    ``A[r] = sum_i W[i, r]`` and ``B[r, c] = sum_i W[i, r] * xp[i, c]``.
    """
    n = xc.shape[0]
    xhat = omega0 * eta + (1.0 - omega0) * (xp @ M.T)
    pos = xc > 0.0
    W = np.zeros_like(xc)
    W[pos] = xc[pos] / xhat[pos]
    risk = float(np.sum(xc[pos] * np.log(W[pos]))) / n
    return risk, W.sum(axis=0), W.T @ xp


def _mstep(omega0, eta, M, A, B, total, omega_min, eta_min):
    a = omega0 * eta * A
    b = (1.0 - omega0) * M * B
    new_omega0 = a.sum() / total
    clamped = min(max(new_omega0, omega_min), 1.0 - omega_min)
    new_eta, floored = floor_project(a, eta_min)
    col = b.sum(axis=0)
    new_M = M.copy()
    ok = col > 0.0
    new_M[:, ok] = b[:, ok] / col[ok]
    return clamped, new_eta, new_M, floored or clamped != new_omega0


def _extrapolate(t0, t1, t2, omega_min, eta_min):
    """Squared-extrapolation point, backtracked towards ``t2`` until feasible."""
    r = [b - a for a, b in zip(t0, t1)]
    v = [c - 2.0 * b + a for a, b, c in zip(t0, t1, t2)]
    nr = np.sqrt(sum(float(np.sum(np.square(x))) for x in r))
    nv = np.sqrt(sum(float(np.sum(np.square(x))) for x in v))
    if nv == 0.0:
        return None
    alpha = -nr / nv
    for _ in range(30):
        if alpha >= -1.0:
            return None
        cand = [a - 2.0 * alpha * dr + alpha * alpha * dv for a, dr, dv in zip(t0, r, v)]
        omega0, eta, M = float(cand[0]), cand[1], cand[2]
        if (
            omega_min <= omega0 <= 1.0 - omega_min
            and eta.min() >= eta_min
            and M.min() >= 0.0
        ):
            return omega0, eta, M
        alpha = 0.5 * (alpha - 1.0)
    return None


def run_em(xc, xp, omega0, eta, M, max_iters, rel_tol, omega_min, eta_min, accelerate=False):
    """Iterate E and M steps from the given start.

    Returns ``(omega0, eta, M, trace, projected, iterations, converged)``
    where ``trace[0]`` is the risk at the start and ``projected[t]`` flags
    whether the M-step producing ``trace[t]`` hit a floor or clamp.
    ``iterations`` counts M-steps.
    """
    xc = np.ascontiguousarray(xc, dtype=np.float64)
    xp = np.ascontiguousarray(xp, dtype=np.float64)
    theta = (float(omega0), np.array(eta, dtype=np.float64), np.array(M, dtype=np.float64))
    total = float(xc.sum())
    risk, A, B = _pass(xc, xp, *theta)
    trace = [risk]
    projected = [False]
    it = 0

    def step(th, A, B):
        nonlocal it
        it += 1
        *new, proj = _mstep(*th, A, B, total, omega_min, eta_min)
        return tuple(new), proj

    def done(new_risk, old_risk):
        return abs(new_risk - old_risk) / max(old_risk, 1e-12) < rel_tol

    while it < max_iters:
        th1, proj1 = step(theta, A, B)
        r1, A1, B1 = _pass(xc, xp, *th1)
        trace.append(r1)
        projected.append(proj1)
        if done(r1, risk):
            return _result(th1, trace, projected, it, True)
        if not accelerate or it + 2 > max_iters:
            theta, risk, A, B = th1, r1, A1, B1
            continue
        th2, proj2 = step(th1, A1, B1)
        r2, A2, B2 = _pass(xc, xp, *th2)
        ext = _extrapolate(theta, th1, th2, omega_min, eta_min)
        accepted = False
        if ext is not None:
            _, Ae, Be = _pass(xc, xp, *ext)
            th3, proj3 = step(ext, Ae, Be)
            r3, A3, B3 = _pass(xc, xp, *th3)
            if r3 <= r2:
                trace.append(r3)
                projected.append(proj3)
                theta, A, B, new_risk = th3, A3, B3, r3
                accepted = True
        if not accepted:
            trace.append(r2)
            projected.append(proj2)
            theta, A, B, new_risk = th2, A2, B2, r2
        if done(new_risk, r1):
            return _result(theta, trace, projected, it, True)
        risk = new_risk
    return _result(theta, trace, projected, it, False)


def _result(theta, trace, projected, it, converged):
    omega0, eta, M = theta
    return (
        float(omega0),
        eta,
        M,
        np.array(trace),
        np.array(projected, dtype=bool),
        it,
        converged,
    )
