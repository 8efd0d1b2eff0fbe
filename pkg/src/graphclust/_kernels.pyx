# cython: language_level=3
"""Compiled hot loops: Householder + implicit QL, Hungarian assignment and
the Metropolis-Hastings label chains.

Semantics mirror :mod:`graphclust._fallback` one for one.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, hypot, lgamma, log, exp

cnp.import_array()

cdef double _EPS = np.finfo(np.float64).eps


class ConvergenceError(ArithmeticError):
    pass


def tridiagonalize(a):
    """Householder reduction to tridiagonal form; see the fallback docstring."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] zarr = np.array(a, dtype=np.float64, order="C")
    cdef double[:, ::1] z = zarr
    cdef Py_ssize_t n = z.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] darr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] earr = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] garr = np.zeros(n)
    cdef double[::1] d = darr
    cdef double[::1] e = earr
    cdef double[::1] gv = garr
    cdef Py_ssize_t i, j, k, l
    cdef double scale, hh, h, g, f, uj
    if n == 0:
        return darr, earr, zarr
    with nogil:
        for i in range(n - 1, 0, -1):
            l = i - 1
            h = 0.0
            scale = 0.0
            if l > 0:
                for k in range(i):
                    scale += fabs(z[i, k])
                if scale == 0.0:
                    e[i] = z[i, l]
                else:
                    for k in range(i):
                        z[i, k] /= scale
                        h += z[i, k] * z[i, k]
                    f = z[i, l]
                    g = -sqrt(h) if f >= 0.0 else sqrt(h)
                    e[i] = scale * g
                    h -= f * g
                    z[i, l] = f - g
                    # p = A u over the stored lower triangle, row-contiguous
                    for j in range(i):
                        e[j] = 0.0
                    for j in range(i):
                        z[j, i] = z[i, j] / h
                        uj = z[i, j]
                        g = 0.0
                        for k in range(j):
                            g += z[j, k] * z[i, k]
                            e[k] += z[j, k] * uj
                        g += z[j, j] * uj
                        e[j] += g
                    f = 0.0
                    for j in range(i):
                        e[j] /= h
                        f += e[j] * z[i, j]
                    hh = f / (h + h)
                    for j in range(i):
                        f = z[i, j]
                        g = e[j] - hh * f
                        e[j] = g
                        for k in range(j + 1):
                            z[j, k] -= f * e[k] + g * z[i, k]
            else:
                e[i] = z[i, l]
            d[i] = h
        d[0] = 0.0
        e[0] = 0.0
        for i in range(n):
            if d[i] != 0.0:
                for j in range(i):
                    gv[j] = 0.0
                for k in range(i):
                    f = z[i, k]
                    for j in range(i):
                        gv[j] += f * z[k, j]
                for k in range(i):
                    f = z[k, i]
                    for j in range(i):
                        z[k, j] -= gv[j] * f
            d[i] = z[i, i]
            z[i, i] = 1.0
            for j in range(i):
                z[j, i] = 0.0
                z[i, j] = 0.0
    return darr, earr, zarr


def tridiagonal_ql(double[::1] d, double[::1] e, double[:, ::1] zt):
    """Implicit-shift QL, in place, rotating rows of ``zt``."""
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t ncol = zt.shape[1]
    cdef Py_ssize_t i, l, m, k
    cdef int it
    cdef bint underflow
    cdef double dd, g, r, s, c, p, f, b, zi, zi1
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
                dd = fabs(d[m]) + fabs(d[m + 1])
                if fabs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            if it == 60:
                raise ConvergenceError(f"QL iteration did not converge for eigenvalue {l}")
            it += 1
            with nogil:
                g = (d[l + 1] - d[l]) / (2.0 * e[l])
                r = hypot(g, 1.0)
                g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
                s = 1.0
                c = 1.0
                p = 0.0
                i = m - 1
                underflow = False
                while i >= l:
                    f = s * e[i]
                    b = c * e[i]
                    r = hypot(f, g)
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
                    for k in range(ncol):
                        zi = zt[i, k]
                        zi1 = zt[i + 1, k]
                        zt[i, k] = c * zi - s * zi1
                        zt[i + 1, k] = s * zi + c * zi1
                    i -= 1
                if not underflow:
                    d[l] -= p
                    e[l] = g
                    e[m] = 0.0


def linear_assignment(cost):
    """Minimum-cost row assignment for ``n x m`` (n <= m); see fallback."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] carr = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[:, ::1] a = carr
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(m + 1)
    cdef double[::1] minv = np.zeros(m + 1)
    cdef Py_ssize_t[::1] p = np.zeros(m + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(m + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(m + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    cdef double inf = float("inf")
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(m + 1):
                minv[j] = inf
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = inf
                j1 = 0
                for j in range(1, m + 1):
                    if not used[j]:
                        cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(m + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
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


cdef inline double _xlogx(double x) nogil:
    return x * log(x) if x > 0 else 0.0


cdef inline double _npairs(double nr, double ns, bint same) nogil:
    return nr * (nr - 1.0) / 2.0 if same else nr * ns


cdef inline double _pair_term(double e, double npairs, double b1, double b2, double lb0) nogil:
    return lgamma(e + b1) + lgamma(npairs - e + b2) - lgamma(npairs + b1 + b2) - lb0


cdef inline double _shift(Py_ssize_t blk, Py_ssize_t t, Py_ssize_t r, Py_ssize_t s,
                          double[::1] kcnt, double diag) nogil:
    if blk == r and t == r:
        return -diag * kcnt[r]
    if blk == s and t == s:
        return diag * kcnt[s]
    if (blk == r and t == s) or (blk == s and t == r):
        return kcnt[r] - kcnt[s]
    if blk == r:
        return -kcnt[t]
    if blk == s:
        return kcnt[t]
    return 0.0


def mh_chain(
    const long[::1] indptr, const long[::1] indices, long[::1] z, long K, int mode,
    const double[::1] alpha, double beta1, double beta2,
    const long[::1] nodes, const long[::1] offsets, const double[::1] uniforms,
    double logp0, long burn_in, long thin,
    short[:, ::1] samples, double[::1] trace_logp, int[::1] trace_occ, long[::1] best_z,
):
    """Metropolis-Hastings over block labels; see the fallback docstring."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t iters = nodes.shape[0]
    cdef double[:, ::1] ec = np.zeros((K, K))
    cdef double[::1] bdeg = np.zeros(K)
    cdef double[::1] kcnt = np.zeros(K)
    cdef long[::1] sizes = np.zeros(K, dtype=np.int64)
    cdef Py_ssize_t u, v, idx, it, i, r, s, t, blk, q
    cdef long zu, zv, a_, b_
    cdef double lb0 = lgamma(beta1) + lgamma(beta2) - lgamma(beta1 + beta2)
    cdef double logp = logp0, best = logp0, delta, e_old, e_new, n_old, n_new
    cdef double old, new, w, deg, nr, ns, szb, szt
    cdef long accepted = 0, occupied = 0, sample_idx = 0
    cdef double diag = 1.0 if mode == 0 else 2.0

    for u in range(n):
        sizes[z[u]] += 1
        zu = z[u]
        for idx in range(indptr[u], indptr[u + 1]):
            v = indices[idx]
            zv = z[v]
            if mode == 0:
                if u < v:
                    a_ = zu if zu <= zv else zv
                    b_ = zv if zu <= zv else zu
                    ec[a_, b_] += 1.0
            else:
                ec[zu, zv] += 1.0
    if mode == 0:
        for r in range(K):
            for t in range(r + 1, K):
                ec[t, r] = ec[r, t]
    for r in range(K):
        if sizes[r] > 0:
            occupied += 1
        for t in range(K):
            bdeg[r] += ec[r, t]
    for u in range(n):
        best_z[u] = z[u]

    with nogil:
        for it in range(iters):
            i = nodes[it]
            r = z[i]
            s = (r + offsets[it]) % K
            for t in range(K):
                kcnt[t] = 0.0
            for idx in range(indptr[i], indptr[i + 1]):
                kcnt[z[indices[idx]]] += 1.0
            if mode == 0:
                delta = (lgamma(sizes[r] - 1 + alpha[r]) - lgamma(sizes[r] + alpha[r])
                         + lgamma(sizes[s] + 1 + alpha[s]) - lgamma(sizes[s] + alpha[s]))
                nr = sizes[r] - 1
                ns = sizes[s] + 1
                for t in range(K):
                    for q in range(2):
                        blk = r if q == 0 else s
                        if blk == s and t == r:
                            continue
                        e_old = ec[blk, t]
                        n_old = _npairs(sizes[blk], sizes[t], blk == t)
                        szb = nr if blk == r else ns
                        if t == r:
                            szt = nr
                        elif t == s:
                            szt = ns
                        else:
                            szt = sizes[t]
                        n_new = _npairs(szb, szt, blk == t)
                        e_new = e_old + _shift(blk, t, r, s, kcnt, 1.0)
                        delta += _pair_term(e_new, n_new, beta1, beta2, lb0)
                        delta -= _pair_term(e_old, n_old, beta1, beta2, lb0)
            else:
                deg = indptr[i + 1] - indptr[i]
                old = 0.0
                new = 0.0
                for t in range(K):
                    for q in range(2):
                        blk = r if q == 0 else s
                        e_old = ec[blk, t]
                        e_new = e_old + _shift(blk, t, r, s, kcnt, 2.0)
                        w = 2.0
                        if t == blk or (blk == s and t == r) or (blk == r and t == s):
                            w = 1.0
                        old += w * _xlogx(e_old)
                        new += w * _xlogx(e_new)
                old -= 2.0 * (_xlogx(bdeg[r]) + _xlogx(bdeg[s]))
                new -= 2.0 * (_xlogx(bdeg[r] - deg) + _xlogx(bdeg[s] + deg))
                delta = new - old
            if uniforms[it] <= exp(delta if delta < 0.0 else 0.0):
                accepted += 1
                logp += delta
                for t in range(K):
                    for q in range(2):
                        blk = r if q == 0 else s
                        if blk == s and t == r:
                            continue
                        ec[blk, t] += _shift(blk, t, r, s, kcnt, diag)
                        ec[t, blk] = ec[blk, t]
                if mode != 0:
                    deg = indptr[i + 1] - indptr[i]
                    bdeg[r] -= deg
                    bdeg[s] += deg
                if sizes[r] == 1:
                    occupied -= 1
                if sizes[s] == 0:
                    occupied += 1
                sizes[r] -= 1
                sizes[s] += 1
                z[i] = s
                if logp > best:
                    best = logp
                    for u in range(n):
                        best_z[u] = z[u]
            trace_logp[it] = logp
            trace_occ[it] = occupied
            if it >= burn_in and (it - burn_in) % thin == 0:
                for u in range(n):
                    samples[sample_idx, u] = <short>z[u]
                sample_idx += 1
    return accepted, best
