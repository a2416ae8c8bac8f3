"""Compiled inner loops: single-row worst-case problems and the robust
Bellman sweep.  Pure-python wrappers with validation live in inner.py and
solver.py; everything here assumes clean inputs.
"""

import numpy as np
from numba import njit

GOLD = 0.6180339887498949   # (sqrt(5) - 1) / 2


@njit(cache=True, nogil=True)
def _kl_deriv(ps, ws, mu, theta):
    # derivative of the dual: KL(tilt(mu) || ps) - theta, on shifted values ws >= 0
    e = np.exp(-ws / mu)
    num = ps * e
    tot = num.sum()
    kl = -np.log(tot)
    for j in range(ps.size):
        kl -= (num[j] / tot) * ws[j] / mu
    return kl - theta


@njit(cache=True, nogil=True)
def _kl_dual(ps, ws, vmin, mu, theta):
    # g(mu) = vmin - mu*log(sum ps*exp(-ws/mu)) - mu*theta  (max-shifted log-sum-exp)
    e = np.exp(-ws / mu)
    tot = (ps * e).sum()
    return vmin - mu * np.log(tot) - mu * theta


@njit(cache=True, nogil=True)
def kl_row_solve(p, v, theta):
    """Worst-case expectation of v over the KL ball of radius theta around p.

    Returns (value, mu, worst_row); mu is +inf for the nominal/constant
    branches and 0 when the radius covers the point mass on the argmin set.
    """
    n = p.size
    worst = np.zeros(n)
    if theta == 0.0:
        val = 0.0
        for i in range(n):
            worst[i] = p[i]
            val += p[i] * v[i]
        return val, np.inf, worst

    cnt = 0
    for i in range(n):
        if p[i] > 0.0:
            cnt += 1
    ps = np.empty(cnt)
    vs = np.empty(cnt)
    idx = np.empty(cnt, dtype=np.int64)
    j = 0
    for i in range(n):
        if p[i] > 0.0:
            ps[j] = p[i]
            vs[j] = v[i]
            idx[j] = i
            j += 1
    vmin = vs[0]
    vmax = vs[0]
    for j in range(1, cnt):
        if vs[j] < vmin:
            vmin = vs[j]
        if vs[j] > vmax:
            vmax = vs[j]
    scale = max(1.0, max(abs(vmin), abs(vmax)))
    if vmax - vmin <= 1e-14 * scale:
        val = 0.0
        for j in range(cnt):
            worst[idx[j]] = ps[j]
            val += ps[j] * vs[j]
        return val, np.inf, worst

    ws = vs - vmin
    tiny = 1e-12 * scale
    pm = 0.0
    for j in range(cnt):
        if ws[j] <= tiny:
            pm += ps[j]
    klmax = -np.log(pm)
    if theta >= klmax - 1e-15:
        # radius reaches the argmin point mass: mu -> 0 limit
        val = 0.0
        for j in range(cnt):
            if ws[j] <= tiny:
                worst[idx[j]] = ps[j] / pm
                val += (ps[j] / pm) * vs[j]
        return val, 0.0, worst

    # bracket the concave dual's stationary point by geometric expansion from 1
    lo = 1.0
    hi = 1.0
    if _kl_deriv(ps, ws, 1.0, theta) > 0.0:
        hi = 2.0
        it = 0
        while _kl_deriv(ps, ws, hi, theta) > 0.0 and it < 200:
            lo = hi
            hi *= 2.0
            it += 1
    else:
        lo = 0.5
        it = 0
        while _kl_deriv(ps, ws, lo, theta) <= 0.0 and it < 200:
            hi = lo
            lo *= 0.5
            it += 1
            if lo < 1e-300:
                break

    # golden-section maximization to relative tolerance 1e-10, capped
    a = lo
    b = hi
    c = b - GOLD * (b - a)
    d = a + GOLD * (b - a)
    fc = _kl_dual(ps, ws, vmin, c, theta)
    fd = _kl_dual(ps, ws, vmin, d, theta)
    it = 0
    while (b - a) > 1e-10 * max(1.0, abs(b)) and it < 200:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = b - GOLD * (b - a)
            fc = _kl_dual(ps, ws, vmin, c, theta)
        else:
            a = c
            c = d
            fc = fd
            d = a + GOLD * (b - a)
            fd = _kl_dual(ps, ws, vmin, d, theta)
        it += 1
    mu = 0.5 * (a + b)

    # derivative-sign polish: near the maximum the golden comparisons are
    # noise-limited at large value scales, leaving a first-order error in the
    # tilt that caps outer-iteration accuracy; g' is decreasing in mu, so
    # bisection on its sign is noise-robust
    plo = mu * 0.999
    phi = mu * 1.001
    dlo = _kl_deriv(ps, ws, plo, theta)
    dhi = _kl_deriv(ps, ws, phi, theta)
    it = 0
    while dlo <= 0.0 and it < 60 and plo > 1e-300:
        phi = plo
        dhi = dlo
        plo *= 0.5
        dlo = _kl_deriv(ps, ws, plo, theta)
        it += 1
    it = 0
    while dhi >= 0.0 and it < 60:
        plo = phi
        dlo = dhi
        phi *= 2.0
        dhi = _kl_deriv(ps, ws, phi, theta)
        it += 1
    if dlo > 0.0 > dhi:
        for _ in range(60):
            if phi - plo <= 1e-14 * phi:
                break
            mid = 0.5 * (plo + phi)
            dm = _kl_deriv(ps, ws, mid, theta)
            if dm > 0.0:
                plo = mid
            else:
                phi = mid
        mu = 0.5 * (plo + phi)

    e = np.exp(-ws / mu)
    num = ps * e
    tot = num.sum()
    val = 0.0
    for j in range(cnt):
        w = num[j] / tot
        worst[idx[j]] = w
        val += w * vs[j]
    return val, mu, worst


@njit(cache=True, nogil=True)
def interval_row_dual(lo, up, v):
    """Worst-case expectation over an entrywise box intersected with the
    simplex, via the concave piecewise-linear dual evaluated at breakpoints.

    Returns (value, lambda, worst_row).  The primal row follows from
    complementary slackness; states tied at the optimal breakpoint start at
    their lower bound and take the residual smallest-index first.
    """
    n = v.size
    sum_up = up.sum()
    base = (v * up).sum()
    best = -np.inf
    bestlam = 0.0
    for j in range(n):
        lam = v[j]
        val = base + lam * (1.0 - sum_up)
        for i in range(n):
            d = v[i] - lam
            if d > 0.0:
                val += d * (lo[i] - up[i])
        if val > best:
            best = val
            bestlam = lam

    tol = 1e-12 * max(1.0, abs(bestlam))
    worst = np.empty(n)
    resid = 1.0
    for i in range(n):
        if v[i] > bestlam + tol:
            worst[i] = lo[i]
        elif v[i] < bestlam - tol:
            worst[i] = up[i]
        else:
            worst[i] = lo[i]
        resid -= worst[i]
    for i in range(n):
        if resid <= 0.0:
            break
        if abs(v[i] - bestlam) <= tol:
            add = up[i] - lo[i]
            if add > resid:
                add = resid
            worst[i] += add
            resid -= add
    val = (worst * v).sum()
    return val, bestlam, worst


@njit(cache=True, nogil=True)
def interval_row_greedy(lo, up, v):
    """Closed-form worst case for non-increasing v: upper bounds above the
    switch index, lower bounds below it, residual at the switch."""
    n = v.size
    head = 0.0
    tail_up = up.sum()
    delta = n - 1
    for d in range(n):
        head += lo[d]
        tail_up -= up[d]
        if head + tail_up <= 1.0 + 1e-12:
            delta = d
            break
    worst = np.empty(n)
    for i in range(n):
        if i < delta:
            worst[i] = lo[i]
        elif i > delta:
            worst[i] = up[i]
    rem = 1.0
    for i in range(n):
        if i != delta:
            rem -= worst[i]
    if rem < lo[delta]:
        rem = lo[delta]
    if rem > up[delta]:
        rem = up[delta]
    worst[delta] = rem
    val = (worst * v).sum()
    return val, v[delta], worst


@njit(cache=True, nogil=True)
def vi_kl(phat, r, theta, beta, cr, cs, thr, max_iter):
    """Robust value iteration with per-row KL balls.

    phat: (k+1, S+1, S+1), r/theta: (S+1, k+1).  Jacobi sweeps from V = 0;
    stops when the sup-norm step drops below thr.  Returns
    (V, policy, worst_rows, iterations, residual).
    """
    K1 = phat.shape[0]
    S1 = phat.shape[1]
    V = np.zeros((S1, K1))
    Vn = np.zeros((S1, K1))
    pol = np.zeros((S1, K1), dtype=np.int64)
    worst = np.zeros((K1, S1, S1))
    iters = 0
    resid = np.inf
    bv = np.empty(S1)
    while iters < max_iter:
        resid = 0.0
        for k in range(K1):
            for j in range(S1):
                bv[j] = beta * V[j, k]
            for s in range(S1):
                val0, mu, row = kl_row_solve(phat[k, s], bv, theta[s, k])
                w0 = r[s, k] + val0
                if k < K1 - 1:
                    w1 = -cr + beta * V[0, k + 1]
                else:
                    w1 = -np.inf
                w2 = cs
                best = w0
                a = 0
                if w1 > best:
                    best = w1
                    a = 1
                if w2 > best:
                    best = w2
                    a = 2
                Vn[s, k] = best
                pol[s, k] = a
                for j in range(S1):
                    worst[k, s, j] = row[j]
                d = abs(best - V[s, k])
                if d > resid:
                    resid = d
        iters += 1
        if resid < thr:
            break
        for s in range(S1):
            for k in range(K1):
                V[s, k] = Vn[s, k]
    return Vn.copy(), pol, worst, iters, resid


@njit(cache=True, nogil=True)
def vi_interval(lower, upper, r, beta, cr, cs, thr, max_iter):
    """Robust value iteration with entrywise interval rows (dual path)."""
    K1 = lower.shape[0]
    S1 = lower.shape[1]
    V = np.zeros((S1, K1))
    Vn = np.zeros((S1, K1))
    pol = np.zeros((S1, K1), dtype=np.int64)
    worst = np.zeros((K1, S1, S1))
    iters = 0
    resid = np.inf
    bv = np.empty(S1)
    while iters < max_iter:
        resid = 0.0
        for k in range(K1):
            for j in range(S1):
                bv[j] = beta * V[j, k]
            for s in range(S1):
                val0, lam, row = interval_row_dual(lower[k, s], upper[k, s], bv)
                w0 = r[s, k] + val0
                if k < K1 - 1:
                    w1 = -cr + beta * V[0, k + 1]
                else:
                    w1 = -np.inf
                w2 = cs
                best = w0
                a = 0
                if w1 > best:
                    best = w1
                    a = 1
                if w2 > best:
                    best = w2
                    a = 2
                Vn[s, k] = best
                pol[s, k] = a
                for j in range(S1):
                    worst[k, s, j] = row[j]
                d = abs(best - V[s, k])
                if d > resid:
                    resid = d
        iters += 1
        if resid < thr:
            break
        for s in range(S1):
            for k in range(K1):
                V[s, k] = Vn[s, k]
    return Vn.copy(), pol, worst, iters, resid


@njit(cache=True, nogil=True)
def eval_policy(pol, p, r, beta, cr, cs, eps, max_iter):
    """Fixed-policy value by Jacobi iteration to successive sup-norm eps."""
    K1 = p.shape[0]
    S1 = p.shape[1]
    V = np.zeros((S1, K1))
    Vn = np.zeros((S1, K1))
    for _ in range(max_iter):
        resid = 0.0
        for k in range(K1):
            for s in range(S1):
                a = pol[s, k]
                if a == 0:
                    acc = 0.0
                    for j in range(S1):
                        acc += p[k, s, j] * V[j, k]
                    nv = r[s, k] + beta * acc
                elif a == 1:
                    nv = -cr + beta * V[0, k + 1]
                else:
                    nv = cs
                Vn[s, k] = nv
                d = abs(nv - V[s, k])
                if d > resid:
                    resid = d
        for s in range(S1):
            for k in range(K1):
                V[s, k] = Vn[s, k]
        if resid < eps:
            break
    return V
