"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``.

Signatures and semantics match the Cython module exactly so either can be
bound by :mod:`graphclust._backend`.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = np.finfo(np.float64).eps


class ConvergenceError(ArithmeticError):
    pass


def tridiagonalize(a):
    """Householder reduction of a symmetric matrix to tridiagonal form.

    Returns ``(d, e, q)`` with ``q.T @ a @ q`` tridiagonal, ``d`` its
    diagonal and ``e[i]`` the coupling between rows ``i-1`` and ``i``
    (``e[0] = 0``).
    """
    a = np.array(a, dtype=np.float64, order="C")
    n = a.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = a[k + 1 :, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -norm if x[0] >= 0 else norm
        v = x.copy()
        v[0] -= alpha
        vnorm = math.sqrt(float(v @ v))
        if vnorm == 0.0:
            continue
        v /= vnorm
        blk = a[k + 1 :, k:]
        blk -= 2.0 * np.outer(v, v @ blk)
        blk = a[k:, k + 1 :]
        blk -= 2.0 * np.outer(blk @ v, v)
        qb = q[:, k + 1 :]
        qb -= 2.0 * np.outer(qb @ v, v)
    d = np.diag(a).copy()
    e = np.zeros(n)
    if n > 1:
        e[1:] = np.diag(a, -1)
    return d, e, q


def tridiagonal_ql(d, e, zt):
    """Implicit-shift QL on a tridiagonal matrix, in place.

    ``zt`` holds basis vectors as rows; rotations are applied to pairs of
    rows so on return row ``i`` is the eigenvector of ``d[i]``.
    """
    n = d.shape[0]
    if n == 0:
        return
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            if it == 60:
                raise ConvergenceError(f"QL iteration did not converge for eigenvalue {l}")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = zt[i].copy()
                zt[i] = c * zi - s * zt[i + 1]
                zt[i + 1] = s * zi + c * zt[i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0


def linear_assignment(cost):
    """Minimum-cost assignment of every row of an ``n x m`` (n <= m) matrix.

    Shortest-augmenting-path Hungarian method with potentials. Returns the
    column assigned to each row.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    inf = math.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            cols = np.flatnonzero(used)
            u[p[cols]] += delta
            v[cols] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    out = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            out[p[j] - 1] = j - 1
    return out


def _xlogx(x):
    return x * math.log(x) if x > 0 else 0.0


def _pair_term(e, npairs, b1, b2, lb0):
    return (
        math.lgamma(e + b1) + math.lgamma(npairs - e + b2)
        - math.lgamma(npairs + b1 + b2) - lb0
    )


def _npairs(nr, ns, same):
    return nr * (nr - 1) / 2.0 if same else float(nr) * ns


def mh_chain(
    indptr, indices, z, K, mode, alpha, beta1, beta2,
    nodes, offsets, uniforms, logp0, burn_in, thin,
    samples, trace_logp, trace_occ, best_z,
):
    """Single-node-reassignment Metropolis-Hastings over block labels.

    ``mode`` 0 targets the collapsed Beta-Bernoulli SBM posterior with a
    Dirichlet-multinomial label prior; mode 1 targets ``exp(L_KN)``.
    ``z`` is updated in place. Returns ``(accepted, best_logp)``.
    """
    n = z.shape[0]
    iters = nodes.shape[0]
    sizes = np.bincount(z, minlength=K).astype(np.int64)
    ecount = np.zeros((K, K))
    for u in range(n):
        zu = z[u]
        for idx in range(indptr[u], indptr[u + 1]):
            v = indices[idx]
            if mode == 0:
                if u < v:
                    a_, b_ = (zu, z[v]) if zu <= z[v] else (z[v], zu)
                    ecount[a_, b_] += 1
            else:
                ecount[zu, z[v]] += 1
    if mode == 0:
        ecount = ecount + np.triu(ecount, 1).T
    block_deg = ecount.sum(axis=1)
    lb0 = math.lgamma(beta1) + math.lgamma(beta2) - math.lgamma(beta1 + beta2)
    kcnt = np.zeros(K)
    logp = logp0
    best = logp0
    best_z[:] = z
    accepted = 0
    occupied = int(np.count_nonzero(sizes))
    sample_idx = 0
    for it in range(iters):
        i = nodes[it]
        r = z[i]
        s = (r + offsets[it]) % K
        kcnt[:] = 0.0
        for idx in range(indptr[i], indptr[i + 1]):
            kcnt[z[indices[idx]]] += 1.0
        if mode == 0:
            delta = (
                math.lgamma(sizes[r] - 1 + alpha[r]) - math.lgamma(sizes[r] + alpha[r])
                + math.lgamma(sizes[s] + 1 + alpha[s]) - math.lgamma(sizes[s] + alpha[s])
            )
            for t in range(K):
                for blk in (r, s):
                    if blk == s and t == r:
                        continue
                    e_old = ecount[blk, t]
                    n_old = _npairs(sizes[blk], sizes[t], blk == t)
                    nr = sizes[r] - 1
                    ns = sizes[s] + 1
                    szb = nr if blk == r else ns
                    szt = nr if t == r else (ns if t == s else sizes[t])
                    n_new = _npairs(szb, szt, blk == t)
                    e_new = e_old + _edge_shift(blk, t, r, s, kcnt)
                    delta += _pair_term(e_new, n_new, beta1, beta2, lb0)
                    delta -= _pair_term(e_old, n_old, beta1, beta2, lb0)
        else:
            deg = indptr[i + 1] - indptr[i]
            old = 0.0
            new = 0.0
            for t in range(K):
                for blk in (r, s):
                    e_old = ecount[blk, t]
                    e_new = e_old + _kn_shift(blk, t, r, s, kcnt)
                    w = 2.0
                    if t == blk or (blk == s and t == r) or (blk == r and t == s):
                        w = 1.0
                    old += w * _xlogx(e_old)
                    new += w * _xlogx(e_new)
            old -= 2.0 * (_xlogx(block_deg[r]) + _xlogx(block_deg[s]))
            new -= 2.0 * (_xlogx(block_deg[r] - deg) + _xlogx(block_deg[s] + deg))
            delta = new - old
        if uniforms[it] <= math.exp(min(0.0, delta)):
            accepted += 1
            logp += delta
            if mode == 0:
                for t in range(K):
                    for blk in (r, s):
                        if blk == s and t == r:
                            continue
                        ecount[blk, t] += _edge_shift(blk, t, r, s, kcnt)
                        ecount[t, blk] = ecount[blk, t]
            else:
                for t in range(K):
                    for blk in (r, s):
                        if blk == s and t == r:
                            continue
                        ecount[blk, t] += _kn_shift(blk, t, r, s, kcnt)
                        ecount[t, blk] = ecount[blk, t]
                deg = indptr[i + 1] - indptr[i]
                block_deg[r] -= deg
                block_deg[s] += deg
            if sizes[r] == 1:
                occupied -= 1
            if sizes[s] == 0:
                occupied += 1
            sizes[r] -= 1
            sizes[s] += 1
            z[i] = s
            if logp > best:
                best = logp
                best_z[:] = z
        trace_logp[it] = logp
        trace_occ[it] = occupied
        if it >= burn_in and (it - burn_in) % thin == 0:
            samples[sample_idx] = z
            sample_idx += 1
    return accepted, best


def _edge_shift(blk, t, r, s, kcnt):
    """Change of the (blk, t) between-block edge count when a node moves r -> s.

    Counts follow the SBM convention: internal edges counted once.
    """
    if blk == r and t == r:
        return -kcnt[r]
    if blk == s and t == s:
        return kcnt[s]
    if {blk, t} == {r, s}:
        return kcnt[r] - kcnt[s]
    if blk == r:
        return -kcnt[t]
    if blk == s:
        return kcnt[t]
    return 0.0


def _kn_shift(blk, t, r, s, kcnt):
    """Same as :func:`_edge_shift` under the degree-sum convention (e_rr doubled)."""
    if blk == r and t == r:
        return -2.0 * kcnt[r]
    if blk == s and t == s:
        return 2.0 * kcnt[s]
    if {blk, t} == {r, s}:
        return kcnt[r] - kcnt[s]
    if blk == r:
        return -kcnt[t]
    if blk == s:
        return kcnt[t]
    return 0.0
