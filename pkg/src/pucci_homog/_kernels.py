"""Jitted inner loops for the parabolic cell-problem solver.

Each step kernel evaluates the discrete operator at the current iterate,
returns its spatial mean and the max-norm residual, and advances u in place:

    u <- recenter( u + dt * (F(u) - mean(F(u)) - rhs) )

Family codes: 0 linear, 1 eigen_pair, 2 pucci, 3 pucci_max, 4 pucci_smooth,
5 monge_ampere.  `work` is a scratch buffer of the same shape as u.
"""

import math

from numba import njit

FAM_LINEAR = 0
FAM_EIGEN_PAIR = 1
FAM_PUCCI = 2
FAM_PUCCI_MAX = 3
FAM_PUCCI_SMOOTH = 4
FAM_MONGE_AMPERE = 5


@njit(cache=True, fastmath=False)
def _family_value(fam, c1, c2, lam_min, lam_max, trace, k):
    if fam == FAM_EIGEN_PAIR:
        return c1 * lam_min + c2 * lam_max
    if fam == FAM_PUCCI:
        lp = lam_min if lam_min > 0.0 else 0.0
        lp += lam_max if lam_max > 0.0 else 0.0
        return c1 * trace + c2 * lp
    if fam == FAM_PUCCI_MAX:
        lp = lam_max if lam_max > 0.0 else 0.0
        return c1 * trace + c2 * lp
    if fam == FAM_PUCCI_SMOOTH:
        top = lam_max if lam_max > 0.0 else 0.0
        e1 = math.exp(k * (lam_min - top))
        e2 = math.exp(k * (lam_max - top))
        e3 = math.exp(k * (0.0 - top))
        s = (lam_min * e1 + lam_max * e2) / (e1 + e2 + e3)
        return c1 * trace + c2 * s
    # monge_ampere
    lpmin = lam_min if lam_min > 0.0 else 0.0
    lpmax = lam_max if lam_max > 0.0 else 0.0
    return c1 * (trace + lpmin * lpmax)


@njit(cache=True, fastmath=False)
def step_standard(u, work, c1, c2, fam, q11, q12, q22, k, g11, g12, g22, dt, h2, rhs):
    n = u.shape[0]
    trq = q11 + q22
    dq = q11 - q22
    a0q = g11 * q11 + 2.0 * g12 * q12 + g22 * q22
    fsum = 0.0
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        ip = i + 1 if i < n - 1 else 0
        for j in range(n):
            jm = j - 1 if j > 0 else n - 1
            jp = j + 1 if j < n - 1 else 0
            uc = u[i, j]
            uxx = (u[ip, j] - 2.0 * uc + u[im, j]) / h2
            uyy = (u[i, jp] - 2.0 * uc + u[i, jm]) / h2
            uxy = (u[ip, jp] - u[ip, jm] - u[im, jp] + u[im, jm]) / (4.0 * h2)
            if fam == FAM_LINEAR:
                fv = c1[i, j] * (a0q + g11 * uxx + 2.0 * g12 * uxy + g22 * uyy)
            else:
                t = trq + uxx + uyy
                d = dq + uxx - uyy
                m12 = q12 + uxy
                disc = math.sqrt(d * d + 4.0 * m12 * m12)
                lam_min = 0.5 * (t - disc)
                lam_max = 0.5 * (t + disc)
                fv = _family_value(fam, c1[i, j], c2[i, j], lam_min, lam_max, t, k)
            work[i, j] = fv
            fsum += fv
    return _advance(u, work, fsum, dt, rhs)


@njit(cache=True, fastmath=False)
def _monotone_value(u, i, j, n, fam, c1, c2, k, dirs, qpq, inv_h2p2, lincoef, a0q, trq):
    ndir = dirs.shape[0]
    lam_min = 1e300
    lam_max = -1e300
    lin_acc = a0q
    dxx = 0.0
    dyy = 0.0
    uc = u[i, j]
    for m in range(ndir):
        dx = dirs[m, 0]
        dy = dirs[m, 1]
        ipp = (i + dx) % n
        jpp = (j + dy) % n
        imm = (i - dx) % n
        jmm = (j - dy) % n
        dd = (u[ipp, jpp] - 2.0 * uc + u[imm, jmm]) * inv_h2p2[m]
        if fam == FAM_LINEAR:
            lin_acc += lincoef[m] * dd
        else:
            r = qpq[m] + dd
            if r < lam_min:
                lam_min = r
            if r > lam_max:
                lam_max = r
        if dx == 1 and dy == 0:
            dxx = dd
        elif dx == 0 and dy == 1:
            dyy = dd
    if fam == FAM_LINEAR:
        return c1[i, j] * lin_acc
    trace = trq + dxx + dyy
    return _family_value(fam, c1[i, j], c2[i, j], lam_min, lam_max, trace, k)


@njit(cache=True, fastmath=False)
def step_monotone(u, work, c1, c2, fam, q11, q12, q22, k, dirs, qpq, inv_h2p2, lincoef, a0q, dt, rhs):
    n = u.shape[0]
    trq = q11 + q22
    fsum = 0.0
    for i in range(n):
        for j in range(n):
            fv = _monotone_value(u, i, j, n, fam, c1, c2, k, dirs, qpq, inv_h2p2, lincoef, a0q, trq)
            work[i, j] = fv
            fsum += fv
    return _advance(u, work, fsum, dt, rhs)


@njit(cache=True, fastmath=False)
def step_filtered(u, work, c1, c2, fam, q11, q12, q22, k, dirs, qpq, inv_h2p2, lincoef, a0q, g11, g12, g22, switch_tol, dt, h2, rhs):
    n = u.shape[0]
    trq = q11 + q22
    dq = q11 - q22
    fsum = 0.0
    for i in range(n):
        im = i - 1 if i > 0 else n - 1
        ip = i + 1 if i < n - 1 else 0
        for j in range(n):
            jm = j - 1 if j > 0 else n - 1
            jp = j + 1 if j < n - 1 else 0
            uc = u[i, j]
            uxx = (u[ip, j] - 2.0 * uc + u[im, j]) / h2
            uyy = (u[i, jp] - 2.0 * uc + u[i, jm]) / h2
            uxy = (u[ip, jp] - u[ip, jm] - u[im, jp] + u[im, jm]) / (4.0 * h2)
            if fam == FAM_LINEAR:
                std = c1[i, j] * (a0q + g11 * uxx + 2.0 * g12 * uxy + g22 * uyy)
            else:
                t = trq + uxx + uyy
                d = dq + uxx - uyy
                m12 = q12 + uxy
                disc = math.sqrt(d * d + 4.0 * m12 * m12)
                std = _family_value(fam, c1[i, j], c2[i, j], 0.5 * (t - disc), 0.5 * (t + disc), t, k)
            mono = _monotone_value(u, i, j, n, fam, c1, c2, k, dirs, qpq, inv_h2p2, lincoef, a0q, trq)
            gap = std - mono
            if gap < 0.0:
                gap = -gap
            bound = switch_tol * (1.0 + (mono if mono >= 0.0 else -mono))
            fv = std if gap <= bound else mono
            work[i, j] = fv
            fsum += fv
    return _advance(u, work, fsum, dt, rhs)


@njit(cache=True, fastmath=False)
def _advance(u, work, fsum, dt, rhs):
    """Shared update: Euler step with mean subtraction, then recenter.

    Returns (mean F, max |F - mean F|); the latter equals the recentered
    increment norm divided by dt, which is the solver's stopping metric.
    """
    n = u.shape[0]
    fbar = fsum / (n * n)
    dmax = 0.0
    usum = 0.0
    for i in range(n):
        for j in range(n):
            d = work[i, j] - fbar
            ad = d if d >= 0.0 else -d
            if ad > dmax:
                dmax = ad
            un = u[i, j] + dt * (d - rhs)
            work[i, j] = un
            usum += un
    umean = usum / (n * n)
    for i in range(n):
        for j in range(n):
            u[i, j] = work[i, j] - umean
    return fbar, dmax
