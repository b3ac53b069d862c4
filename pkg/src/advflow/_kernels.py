"""Compiled inner loops for the one-step solver.

All kernels work on flattened 2D cell arrays of shape ``(n0 * n1,)``; a 1D
grid is passed as ``n0 == 1``.  The dual variable ``q`` has one row per cell
and one column per stencil offset.  Row ``x`` describes how the two window
terms of cell ``x`` (the dilation term weighted by ``rho0[x]`` and the erosion
term weighted by ``rho1[x]``) push mass onto the cells of its window:
positive entries belong to the dilation term, negative ones to the erosion
term.  The aggregated flux ``s`` is ``K^T q`` where ``(K u)[x, o] = u[x+o] - u[x]``,
and the primal iterate is recovered as ``u = d - s / rho``.
"""

from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def window_index(t, n0, n1, offs, delta, inside, omega, idx):
    """Flat indices of the window of cell ``t`` (``-1`` for cells outside Ω)."""
    K = offs.shape[0]
    if inside[t]:
        for a in range(K):
            idx[a] = t + delta[a]
        return
    i = t // n1
    j = t - i * n1
    for a in range(K):
        ii = i + offs[a, 0]
        jj = j + offs[a, 1]
        if ii < 0 or ii >= n0 or jj < 0 or jj >= n1:
            idx[a] = -1
            continue
        y = ii * n1 + jj
        idx[a] = y if omega[y] else -1


@nb.njit(cache=True, fastmath=True)
def _top_level(zt, w, K, alpha, zmax, wmax, guess):
    # level M with sum_a w_a (zt_a - M)^+ = alpha; Newton is monotone from below
    # and any start with some entry above M lands below the root after one step
    if alpha <= 0.0:
        return zmax
    M = guess
    if not (M < zmax):
        M = zmax - alpha / wmax
    for _ in range(200):
        g = 0.0
        W = 0.0
        for a in range(K):
            e = zt[a] - M
            if e > 0.0:
                g += w[a] * e
                W += w[a]
        if W == 0.0:
            M = zmax - alpha / wmax
            continue
        r = g - alpha
        if abs(r) <= 1e-14 * alpha:
            break
        M += r / W
    return M


@nb.njit(cache=True, fastmath=True)
def _bottom_level(zt, w, K, beta, zmin, wmin, guess):
    if beta <= 0.0:
        return zmin
    m = guess
    if not (m > zmin):
        m = zmin + beta / wmin
    for _ in range(200):
        g = 0.0
        W = 0.0
        for a in range(K):
            e = m - zt[a]
            if e > 0.0:
                g += w[a] * e
                W += w[a]
        if W == 0.0:
            m = zmin + beta / wmin
            continue
        r = g - beta
        if abs(r) <= 1e-14 * beta:
            break
        m -= r / W
    return m


@nb.njit(cache=True)
def sweep(d, rho, r0, r1, omega, inside, offs, delta, center, q, s,
          top, bot, n0, n1, reverse):
    """One Gauss-Seidel pass of exact block maximization of the dual.

    For every domain cell the block ``q[x, :]`` is replaced by the maximizer of
    the dual objective with all other blocks frozen.  ``top``/``bot`` keep the
    water-filling levels of the previous pass as Newton starting points.
    """
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    z = np.empty(K)
    zt = np.empty(K)
    w = np.empty(K)
    qn = np.empty(K)
    for tt in range(N):
        t = N - 1 - tt if reverse else tt
        if not omega[t]:
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        qt = q[t]
        rt = rho[t]
        a0 = r0[t]
        a1 = r1[t]
        own = 0.0
        for a in range(K):
            own += qt[a]
        # window values with this block's own contribution removed
        zc = d[t] - (s[t] + own) / rt
        for a in range(K):
            y = idx[a]
            if y < 0:
                w[a] = 0.0
                z[a] = zc
            else:
                w[a] = rho[y]
                z[a] = d[y] - (s[y] - qt[a]) / w[a]
            zt[a] = z[a]
        z[center] = zc
        zt[center] = zc + (a0 - a1) / rt
        zmax = -np.inf
        zmin = np.inf
        wmax = 1.0
        wmin = 1.0
        for a in range(K):
            if w[a] > 0.0:
                if zt[a] > zmax:
                    zmax = zt[a]
                    wmax = w[a]
                if zt[a] < zmin:
                    zmin = zt[a]
                    wmin = w[a]
        M = _top_level(zt, w, K, a0, zmax, wmax, top[t])
        m = _bottom_level(zt, w, K, a1, zmin, wmin, bot[t])
        top[t] = M
        bot[t] = m
        if m < M:
            for a in range(K):
                qn[a] = w[a] * (z[a] - min(max(zt[a], m), M))
        else:
            # the two levels cross: the window collapses to its weighted mean
            num = 0.0
            den = 0.0
            for a in range(K):
                num += w[a] * z[a]
                den += w[a]
            c = num / den
            for a in range(K):
                qn[a] = w[a] * (z[a] - c)
        qn[center] = 0.0
        pos = 0.0
        neg = 0.0
        for a in range(K):
            pos += max(qn[a], 0.0)
            neg += max(-qn[a], 0.0)
        # guard the capacities against rounding in the level search
        sp = a0 / pos if pos > a0 else 1.0
        sn = a1 / neg if neg > a1 else 1.0
        dsum = 0.0
        for a in range(K):
            y = idx[a]
            if y < 0 or a == center:
                continue
            v = qn[a] * (sp if qn[a] > 0.0 else sn)
            dv = v - qt[a]
            qt[a] = v
            s[y] += dv
            dsum += dv
        s[t] -= dsum


@nb.njit(cache=True)
def _cap_project(v, K, cap, out):
    # Euclidean projection of max(v, 0) onto {x >= 0, sum x <= cap}
    tot = 0.0
    vmax = 0.0
    for a in range(K):
        out[a] = max(v[a], 0.0)
        tot += out[a]
        vmax = max(vmax, out[a])
    if tot <= cap:
        return
    tau = vmax - cap
    for _ in range(200):
        g = 0.0
        c = 0
        for a in range(K):
            if v[a] > tau:
                g += v[a] - tau
                c += 1
        r = g - cap
        if r <= 1e-14 * cap:
            break
        tau += r / c
    for a in range(K):
        out[a] = max(v[a] - tau, 0.0)


@nb.njit(cache=True)
def _project_row(qt, idx, center, a0, a1, pos, neg, pp, nn):
    K = qt.shape[0]
    for a in range(K):
        if idx[a] < 0 or a == center:
            qt[a] = 0.0
        pos[a] = max(qt[a], 0.0)
        neg[a] = max(-qt[a], 0.0)
    _cap_project(pos, K, a0, pp)
    _cap_project(neg, K, a1, nn)
    for a in range(K):
        qt[a] = pp[a] - nn[a]


@nb.njit(cache=True)
def extrapolate(q, qprev, beta, r0, r1, omega, inside, offs, delta, center, n0, n1, s):
    """Momentum step ``q <- P(q + beta (q - qprev))``, ``qprev <- old q``, ``s <- K^T q``.

    ``P`` projects every block onto its capacity set.
    """
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    pos = np.empty(K)
    neg = np.empty(K)
    pp = np.empty(K)
    nn = np.empty(K)
    for t in range(N):
        s[t] = 0.0
    for t in range(N):
        if not omega[t]:
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        qt = q[t]
        qp = qprev[t]
        for a in range(K):
            v = qt[a]
            qt[a] = v + beta * (v - qp[a])
            qp[a] = v
        _project_row(qt, idx, center, r0[t], r1[t], pos, neg, pp, nn)
        tot = 0.0
        for a in range(K):
            y = idx[a]
            if y < 0 or a == center:
                continue
            s[y] += qt[a]
            tot += qt[a]
        s[t] -= tot


@nb.njit(cache=True)
def flux(q, omega, inside, offs, delta, n0, n1, s):
    """``s <- K^T q``."""
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    for t in range(N):
        s[t] = 0.0
    for t in range(N):
        if not omega[t]:
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        tot = 0.0
        for a in range(K):
            y = idx[a]
            if y < 0 or y == t:
                continue
            v = q[t, a]
            s[y] += v
            tot += v
        s[t] -= tot


@nb.njit(cache=True)
def window_gap(u, q, r0, r1, omega, inside, offs, delta, n0, n1):
    """``sum_x [r0 (max_W u - u_x) + r1 (u_x - min_W u) - <q_x, (K u)_x>]``.

    Each summand is nonnegative for a feasible ``q``, so the sum has no
    cancellation.
    """
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    g = 0.0
    for t in range(N):
        if not omega[t]:
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        ut = u[t]
        mx = ut
        mn = ut
        lin = 0.0
        for a in range(K):
            y = idx[a]
            if y < 0:
                continue
            uy = u[y]
            if uy > mx:
                mx = uy
            if uy < mn:
                mn = uy
            lin += q[t, a] * (uy - ut)
        g += r0[t] * (mx - ut) + r1[t] * (ut - mn) - lin
    return g


@nb.njit(cache=True)
def project_blocks(q, r0, r1, omega, inside, offs, delta, center, n0, n1):
    """Project every block onto its capacity set (used for random starts)."""
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    pos = np.empty(K)
    neg = np.empty(K)
    pp = np.empty(K)
    nn = np.empty(K)
    for t in range(N):
        if not omega[t]:
            q[t, :] = 0.0
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        _project_row(q[t], idx, center, r0[t], r1[t], pos, neg, pp, nn)


@nb.njit(cache=True)
def window_tv(u, r0, r1, omega, inside, offs, delta, n0, n1):
    """``sum_x [r0 (max_W u - u_x) + r1 (u_x - min_W u)]``."""
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    g = 0.0
    for t in range(N):
        if not omega[t]:
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        ut = u[t]
        mx = ut
        mn = ut
        for a in range(K):
            y = idx[a]
            if y < 0:
                continue
            mx = max(mx, u[y])
            mn = min(mn, u[y])
        g += r0[t] * (mx - ut) + r1[t] * (ut - mn)
    return g


@nb.njit(cache=True)
def prolong(qc, offc, omega_c, n1c, fine_of, omega, n0, n1, q):
    """Copy each coarse block to its four children with doubled offsets.

    ``fine_of[a]`` is the fine offset index of ``2 * offc[a]``.  Entries whose
    target leaves the fine domain are dropped, which keeps every block feasible
    up to the capacity rescaling done afterwards.
    """
    for i in range(n0):
        for j in range(n1):
            t = i * n1 + j
            if not omega[t]:
                continue
            tc = (i // 2) * n1c + (j // 2)
            if not omega_c[tc]:
                continue
            for a in range(offc.shape[0]):
                v = qc[tc, a]
                if v == 0.0:
                    continue
                ii = i + 2 * offc[a, 0]
                jj = j + 2 * offc[a, 1]
                if ii < 0 or ii >= n0 or jj < 0 or jj >= n1:
                    continue
                y = ii * n1 + jj
                if y == t or not omega[y]:
                    continue
                q[t, fine_of[a]] = v


@nb.njit(cache=True)
def select_flux(u, r0, r1, omega, inside, offs, delta, n0, n1, acc):
    """Add the TV part of the selected subgradient to ``acc``.

    Argmax/argmin cells are chosen per window with ties going to the lowest
    linear cell index.
    """
    K = offs.shape[0]
    N = n0 * n1
    idx = np.empty(K, np.int64)
    for t in range(N):
        if not omega[t]:
            continue
        window_index(t, n0, n1, offs, delta, inside, omega, idx)
        up = t
        dn = t
        for a in range(K):
            y = idx[a]
            if y < 0:
                continue
            if u[y] > u[up] or (u[y] == u[up] and y < up):
                up = y
            if u[y] < u[dn] or (u[y] == u[dn] and y < dn):
                dn = y
        acc[up] += r0[t]
        acc[dn] -= r1[t]
        acc[t] += r1[t] - r0[t]
