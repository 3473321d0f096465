"""Compiled inner loops.

Every kernel consumes a buffer of increments and carries its per-replication
state in a small array, so a replication may span several buffers.  A kernel
returns when the buffer is exhausted or the block's replication budget is
met; the caller refills and calls again.  Nothing here draws random numbers.
"""

import math

import numpy as np
from numba import njit

# state slots shared by the kernels
_S, _M, _N, _AUX0, _AUX1, _REP, _J, _ACTIVE = range(8)
STATE_LEN = 8


@njit(nogil=True, cache=True)
def stopped_kernel(buf, st, sig_pre, fixed_n, ladder_k, has_mu, mu_level, cap, drift,
                   grid, hgrid, pre, icnt, fsum, hit_m, hit_a1, hit_a2, hit_s):
    """Walk until the flattened rule fires or ``cap`` steps.

    icnt: [done, capped, sigma_sum]
    fsum: [sum S_sigma, sum S_sigma^2, sum sigma^2, sum D, sum D^2] with D = S_sigma + drift*sigma
    """
    nreps = sig_pre.shape[0]
    G = grid.shape[0]
    S = st[_S]
    M = st[_M]
    n = np.int64(st[_N])
    lad = st[_AUX0]
    ladc = np.int64(st[_AUX1])
    rep = np.int64(st[_REP])
    jm = np.int64(st[_J])
    active = st[_ACTIVE] > 0.5
    pos = 0
    nb = buf.shape[0]
    while rep < nreps:
        if not active:
            S = 0.0
            M = 0.0
            n = 0
            lad = 0.0
            ladc = 0
            jm = 0
            active = True
            sig = sig_pre[rep]
            if fixed_n == 0 or sig == 0:
                stop = True
            else:
                stop = False
        else:
            if pos >= nb:
                break
            sig = sig_pre[rep]
            xi = buf[pos]
            pos += 1
            sprev = S
            S = S + xi
            n += 1
            if S > M:
                while jm < G and grid[jm] < S:
                    pre[jm] = sprev
                    jm += 1
                M = S
            stop = False
            if fixed_n >= 0 and n >= fixed_n:
                stop = True
            if ladder_k > 0 and S <= lad:
                ladc += 1
                lad = S
                if ladc >= ladder_k:
                    stop = True
            if has_mu and S > mu_level:
                stop = True
            if sig >= 0 and n >= sig:
                stop = True
        if stop:
            icnt[0] += 1
            icnt[2] += n
            fsum[0] += S
            fsum[1] += S * S
            fsum[2] += float(n) * float(n)
            d = S + drift * n
            fsum[3] += d
            fsum[4] += d * d
            for j in range(jm):
                hit_m[j] += 1
                if pre[j] <= hgrid[j]:
                    hit_a1[j] += 1
                else:
                    hit_a2[j] += 1
            for j in range(G):
                if S > grid[j]:
                    hit_s[j] += 1
                else:
                    break
            rep += 1
            active = False
        elif n >= cap:
            icnt[1] += 1
            rep += 1
            active = False
    st[_S] = S
    st[_M] = M
    st[_N] = n
    st[_AUX0] = lad
    st[_AUX1] = ladc
    st[_REP] = rep
    st[_J] = jm
    st[_ACTIVE] = 1.0 if active else 0.0
    return rep >= nreps


@njit(nogil=True, cache=True)
def cycle_kernel(buf, st, nreps, cap, levels, cur, icnt, fsum, n_sum, n_sq, n_tau, m_hits):
    """tau-cycles with downcrossing counts N-(x) at each level.

    icnt: [done, capped, tau_sum]; fsum: [sum tau^2, sum S_tau]
    n_tau[j] accumulates N-(x_j) * tau for ratio-estimator variances.
    """
    G = levels.shape[0]
    S = st[_S]
    M = st[_M]
    n = np.int64(st[_N])
    rep = np.int64(st[_REP])
    active = st[_ACTIVE] > 0.5
    pos = 0
    nb = buf.shape[0]
    while rep < nreps:
        if not active:
            S = 0.0
            M = 0.0
            n = 0
            for j in range(G):
                cur[j] = 0
            active = True
        if pos >= nb:
            break
        xi = buf[pos]
        pos += 1
        sprev = S
        S = S + xi
        n += 1
        if S > M:
            M = S
        if S < sprev:
            for j in range(G):
                if sprev > levels[j] and S <= levels[j]:
                    cur[j] += 1
        if S <= 0.0:
            icnt[0] += 1
            icnt[2] += n
            fsum[0] += float(n) * float(n)
            fsum[1] += S
            for j in range(G):
                c = cur[j]
                n_sum[j] += c
                n_sq[j] += c * c
                n_tau[j] += float(c) * float(n)
                if M > levels[j]:
                    m_hits[j] += 1
            rep += 1
            active = False
        elif n >= cap:
            icnt[1] += 1
            rep += 1
            active = False
    st[_S] = S
    st[_M] = M
    st[_N] = n
    st[_REP] = rep
    st[_ACTIVE] = 1.0 if active else 0.0
    return rep >= nreps


@njit(nogil=True, cache=True)
def downcross_kernel(buf, st, nreps, cap, tgrid, barrier, cur, icnt, c_sum, c_sq):
    """Downcrossings of -t before the running minimum reaches -t - barrier.

    icnt: [done, capped]
    """
    G = tgrid.shape[0]
    S = st[_S]
    runmin = st[_AUX0]
    n = np.int64(st[_N])
    rep = np.int64(st[_REP])
    active = st[_ACTIVE] > 0.5
    floor_all = -tgrid[G - 1] - barrier
    pos = 0
    nb = buf.shape[0]
    while rep < nreps:
        if not active:
            S = 0.0
            runmin = 0.0
            n = 0
            for j in range(G):
                cur[j] = 0
            active = True
        if pos >= nb:
            break
        xi = buf[pos]
        pos += 1
        sprev = S
        S = S + xi
        n += 1
        if S < sprev:
            for j in range(G):
                lvl = -tgrid[j]
                if sprev > lvl and S <= lvl and runmin > lvl - barrier:
                    cur[j] += 1
        if S < runmin:
            runmin = S
        if runmin <= floor_all:
            icnt[0] += 1
            for j in range(G):
                c = cur[j]
                c_sum[j] += c
                c_sq[j] += c * c
            rep += 1
            active = False
        elif n >= cap:
            icnt[1] += 1
            rep += 1
            active = False
    st[_S] = S
    st[_AUX0] = runmin
    st[_N] = n
    st[_REP] = rep
    st[_ACTIVE] = 1.0 if active else 0.0
    return rep >= nreps


@njit(nogil=True, cache=True)
def supremum_kernel(buf, st, nreps, cap, floor_l, edges, hist, store, icnt):
    """Running maximum until the walk first drops below -floor_l.

    hist[j] counts replications with exactly j edges strictly below M.
    The first ``store.shape[0]`` maxima are written to ``store``.
    icnt: [done, capped]
    """
    E = edges.shape[0]
    S = st[_S]
    M = st[_M]
    n = np.int64(st[_N])
    rep = np.int64(st[_REP])
    active = st[_ACTIVE] > 0.5
    nstore = store.shape[0]
    pos = 0
    nb = buf.shape[0]
    while rep < nreps:
        if not active:
            S = 0.0
            M = 0.0
            n = 0
            active = True
        if pos >= nb:
            break
        xi = buf[pos]
        pos += 1
        S += xi
        n += 1
        if S > M:
            M = S
        if S < -floor_l:
            j = np.searchsorted(edges, M, side="left")
            hist[j] += 1
            if rep < nstore:
                store[rep] = M
            icnt[0] += 1
            rep += 1
            active = False
        elif n >= cap:
            icnt[1] += 1
            rep += 1
            active = False
    st[_S] = S
    st[_M] = M
    st[_N] = n
    st[_REP] = rep
    st[_ACTIVE] = 1.0 if active else 0.0
    return rep >= nreps


@njit(nogil=True, cache=True)
def excursion_kernel(buf, st, nreps, cap, floor_l, psi, icnt):
    """Excursions from 0: ends at the first strict rise (ladder height
    recorded in ``psi``) or on dropping below -floor_l.

    icnt: [done, floored, n_psi, capped]
    """
    S = st[_S]
    n = np.int64(st[_N])
    rep = np.int64(st[_REP])
    active = st[_ACTIVE] > 0.5
    pos = 0
    nb = buf.shape[0]
    while rep < nreps:
        if not active:
            S = 0.0
            n = 0
            active = True
        if pos >= nb:
            break
        S += buf[pos]
        pos += 1
        n += 1
        if S > 0.0:
            psi[icnt[2]] = S
            icnt[2] += 1
            icnt[0] += 1
            rep += 1
            active = False
        elif S < -floor_l:
            icnt[1] += 1
            icnt[0] += 1
            rep += 1
            active = False
        elif n >= cap:
            icnt[3] += 1
            icnt[0] += 1
            rep += 1
            active = False
    st[_S] = S
    st[_N] = n
    st[_REP] = rep
    st[_ACTIVE] = 1.0 if active else 0.0
    return rep >= nreps


@njit(nogil=True, cache=True)
def left_cdf(code, p, x):
    """F(x) = P(xi <= x) for x <= 0 (the left part of every family is elementary)."""
    if code == 0:  # Pareto: P(X <= x + b)
        y = x + p[2]
        if y <= p[1]:
            return 0.0
        return 1.0 - (y / p[1]) ** (-p[0])
    if code == 1:  # Weibull
        y = x + p[2]
        if y <= 0.0:
            return 0.0
        return -math.expm1(-((y / p[1]) ** p[0]))
    if code == 2:  # lognormal
        y = x + p[2]
        if y <= 0.0:
            return 0.0
        z = (math.log(y) - p[0]) / p[1]
        return 0.5 * math.erfc(-z / math.sqrt(2.0))
    if code == 3:  # exponential
        y = x + p[1]
        if y <= 0.0:
            return 0.0
        return -math.expm1(-p[0] * y)
    # lattice: support {-1, 0, 1, ...}
    if x < -1.0:
        return 0.0
    if x < 0.0:
        return p[0]
    return p[0] + p[2]


@njit(nogil=True, cache=True)
def lindley_kernel(buf, st, code, params, levels, cross, rb):
    """W_n = max(0, W_{n-1} + xi_n) over the whole buffer.

    cross[j] counts steps with W_{n-1} > x_j >= W_n; rb[j] accumulates the
    conditional version 1{W_{n-1} > x_j} F(x_j - W_{n-1}).
    """
    G = levels.shape[0]
    W = st[_S]
    for i in range(buf.shape[0]):
        for j in range(G):
            lv = levels[j]
            if W > lv:
                rb[j] += left_cdf(code, params, lv - W)
        Wn = W + buf[i]
        if Wn < 0.0:
            Wn = 0.0
        if Wn < W:
            for j in range(G):
                if W > levels[j] and Wn <= levels[j]:
                    cross[j] += 1
        W = Wn
    st[_S] = W
