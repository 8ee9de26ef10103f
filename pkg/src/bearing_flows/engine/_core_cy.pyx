# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernel.

Mirrors `_core_py.run` operation for operation; see that module for the
reference semantics.  Summation order matches the fallback on every
quantity that feeds back into the state, so both backends produce bitwise
identical trajectories (the build disables floating-point contraction to
keep it that way).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite, sqrt

cnp.import_array()

STOP_CONVERGED = 0
STOP_TIME_LIMIT = 1
STOP_NUMERICAL = 2


cdef int _find(int[::1] parent, int i) noexcept nogil:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


cdef void _union(int[::1] parent, int i, int j) noexcept nogil:
    cdef int ri = _find(parent, i)
    cdef int rj = _find(parent, j)
    if ri != rj:
        if ri < rj:
            parent[rj] = ri
        else:
            parent[ri] = rj


cdef int _capture_step(double[:, ::1] x, double[:, ::1] v, double dt,
                       double eps_c, int[::1] pair_a, int[::1] pair_b,
                       int[::1] pair_mult, unsigned char[::1] stationary,
                       int[::1] tails, int[::1] heads, double[:, ::1] term,
                       double[:, ::1] x_new, int[::1] cand_idx,
                       double[::1] cand_tau, int[::1] parent,
                       int[::1] label, unsigned char[::1] in_cluster,
                       double[::1] tau_root, double[:, ::1] vext) noexcept nogil:
    """Fill x_new with one capture step; mirrors _core_py._capture_step."""
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    cdef int n_pairs = pair_a.shape[0]
    cdef int m = tails.shape[0]
    cdef int n_cand = 0
    cdef int p, a, b, c, i, j, e, r, n_kept
    cdef double dpair, rdot, tau, acc, rho, s

    for p in range(n_pairs):
        a = pair_a[p]
        b = pair_b[p]
        dpair = 0.0
        for c in range(d):
            s = x[b, c] - x[a, c]
            dpair = dpair + s * s
        dpair = sqrt(dpair)
        if dpair <= eps_c:
            cand_idx[n_cand] = p
            cand_tau[n_cand] = 0.0
            n_cand += 1
            continue
        rdot = 0.0
        for c in range(d):
            rdot = rdot + (v[b, c] - v[a, c]) * (x[b, c] - x[a, c])
        rdot = rdot / dpair
        if rdot < 0.0 and dpair + dt * rdot <= eps_c:
            tau = (dpair - eps_c) / (-rdot)
            if tau < 0.0:
                tau = 0.0
            elif tau > dt:
                tau = dt
            cand_idx[n_cand] = p
            cand_tau[n_cand] = tau
            n_cand += 1

    if n_cand == 0:
        return 0

    for i in range(n):
        parent[i] = i
    for p in range(n_cand):
        _union(parent, pair_a[cand_idx[p]], pair_b[cand_idx[p]])
    for i in range(n):
        label[i] = _find(parent, i)

    for i in range(n):
        in_cluster[i] = 0
    for p in range(n_cand):
        in_cluster[pair_a[cand_idx[p]]] = 1
        in_cluster[pair_b[cand_idx[p]]] = 1
    for i in range(n):
        for c in range(d):
            vext[i, c] = v[i, c]
    for e in range(m):
        i = tails[e]
        j = heads[e]
        if in_cluster[i] and in_cluster[j] and label[i] == label[j]:
            for c in range(d):
                vext[i, c] = vext[i, c] - term[e, c]

    # sliding test against the pull available across each contact
    n_kept = 0
    for p in range(n_cand):
        a = pair_a[cand_idx[p]]
        b = pair_b[cand_idx[p]]
        rho = 0.0
        for c in range(d):
            s = vext[b, c] - vext[a, c]
            rho = rho + s * s
        rho = sqrt(rho)
        if rho < <double>pair_mult[cand_idx[p]]:
            cand_idx[n_kept] = cand_idx[p]
            cand_tau[n_kept] = cand_tau[p]
            n_kept += 1

    if n_kept == 0:
        return 0

    for i in range(n):
        parent[i] = i
    for p in range(n_kept):
        _union(parent, pair_a[cand_idx[p]], pair_b[cand_idx[p]])
    for i in range(n):
        label[i] = _find(parent, i)

    for i in range(n):
        in_cluster[i] = 0
        tau_root[i] = 0.0
    for p in range(n_kept):
        a = pair_a[cand_idx[p]]
        b = pair_b[cand_idx[p]]
        in_cluster[a] = 1
        in_cluster[b] = 1
        r = label[a]
        if cand_tau[p] > tau_root[r]:
            tau_root[r] = cand_tau[p]

    for i in range(n):
        for c in range(d):
            vext[i, c] = v[i, c]
    for e in range(m):
        i = tails[e]
        j = heads[e]
        if in_cluster[i] and in_cluster[j] and label[i] == label[j]:
            for c in range(d):
                vext[i, c] = vext[i, c] - term[e, c]

    for i in range(n):
        for c in range(d):
            x_new[i, c] = x[i, c] + dt * v[i, c]

    # collapse each sticking cluster; roots visited in ascending order and
    # members accumulated in ascending index, as in the reference kernel
    cdef int anchor, count
    cdef double p_c0, p_c1, p_c2, vb0, vb1, vb2
    for r in range(n):
        if not (in_cluster[r] and label[r] == r):
            continue
        anchor = -1
        count = 0
        for i in range(n):
            if in_cluster[i] and label[i] == r:
                count += 1
                if anchor < 0 and stationary[i]:
                    anchor = i
        tau = tau_root[r]
        for c in range(d):
            if anchor >= 0:
                acc = x[anchor, c]
                s = 0.0
            else:
                acc = 0.0
                s = 0.0
                for i in range(n):
                    if in_cluster[i] and label[i] == r:
                        acc = acc + (x[i, c] + tau * v[i, c])
                        s = s + vext[i, c]
                acc = acc / count
                s = s / count
            acc = acc + (dt - tau) * s
            for i in range(n):
                if in_cluster[i] and label[i] == r:
                    x_new[i, c] = acc
    return 1


def run(x0, n, d, tails, heads, ustar, is_formation, oidx,
        pair_a, pair_b, pair_mult, stationary,
        dt, n_steps, stop_tol, eps_c, merge, stride):
    """Compiled twin of `_core_py.run`; same arguments, same output dict."""
    cdef double[:, ::1] x = np.ascontiguousarray(
        np.asarray(x0, dtype=np.float64).reshape(n, d)).copy()
    cdef int[::1] tails_v = np.ascontiguousarray(tails, dtype=np.int32)
    cdef int[::1] heads_v = np.ascontiguousarray(heads, dtype=np.int32)
    cdef double[:, ::1] ustar_v = np.ascontiguousarray(ustar, dtype=np.float64)
    cdef int[::1] oidx_v = np.ascontiguousarray(oidx, dtype=np.int32)
    cdef int[::1] pa = np.ascontiguousarray(pair_a, dtype=np.int32)
    cdef int[::1] pb = np.ascontiguousarray(pair_b, dtype=np.int32)
    cdef int[::1] pm = np.ascontiguousarray(pair_mult, dtype=np.int32)
    cdef unsigned char[::1] stat = np.ascontiguousarray(stationary, dtype=np.uint8)

    cdef int nn = n, dd = d
    cdef int m = tails_v.shape[0]
    cdef int m_or = oidx_v.shape[0]
    cdef int n_pairs = pa.shape[0]
    cdef long n_steps_c = n_steps
    cdef long stride_c = stride
    cdef double dt_c = dt, tol = stop_tol, eps = eps_c
    cdef bint form = bool(is_formation)
    cdef bint merge_c = bool(merge)

    cdef long cap = n_steps_c // stride_c + 2
    times_a = np.empty(cap)
    states_a = np.empty((cap, nn * dd))
    phis_a = np.empty(cap)
    psis_a = np.empty(cap)
    vmaxs_a = np.empty(cap)
    gnorms_a = np.empty(cap)
    cents_a = np.empty((cap, dd))
    cdef double[::1] times = times_a
    cdef double[:, ::1] states = states_a
    cdef double[::1] phis = phis_a
    cdef double[::1] psis = psis_a
    cdef double[::1] vmaxs = vmaxs_a
    cdef double[::1] gnorms = gnorms_a
    cdef double[:, ::1] cents = cents_a

    cdef double[:, ::1] u = np.zeros((m, dd))
    cdef double[:, ::1] term = np.zeros((m, dd))
    cdef double[::1] dist = np.zeros(m)
    cdef double[::1] err = np.zeros(m)
    cdef double[:, ::1] v = np.zeros((nn, dd))
    cdef double[:, ::1] x_new = np.zeros((nn, dd))
    cdef int[::1] cand_idx = np.zeros(max(n_pairs, 1), dtype=np.int32)
    cdef double[::1] cand_tau = np.zeros(max(n_pairs, 1))
    cdef int[::1] parent = np.zeros(nn, dtype=np.int32)
    cdef int[::1] label = np.zeros(nn, dtype=np.int32)
    cdef unsigned char[::1] in_cluster = np.zeros(nn, dtype=np.uint8)
    cdef double[::1] tau_root = np.zeros(nn)
    cdef double[:, ::1] vext = np.zeros((nn, dd))

    cdef long n_rec = 0, last_rec = -1, k = 0
    cdef int stop_code = STOP_TIME_LIMIT
    cdef double t_conv = -1.0
    cdef int e, i, j, c, bad, captured, saw_nan
    cdef double s, acc, metric, phi, psi, vmax, gnorm
    cdef bint done

    while True:
        for e in range(m):
            acc = 0.0
            for c in range(dd):
                s = x[heads_v[e], c] - x[tails_v[e], c]
                acc = acc + s * s
            dist[e] = sqrt(acc)
            if dist[e] > eps:
                for c in range(dd):
                    u[e, c] = (x[heads_v[e], c] - x[tails_v[e], c]) / dist[e]
            else:
                for c in range(dd):
                    u[e, c] = 0.0
            acc = 0.0
            for c in range(dd):
                term[e, c] = u[e, c] - ustar_v[e, c]
                acc = acc + term[e, c] * term[e, c]
            err[e] = sqrt(acc)
        for i in range(nn):
            for c in range(dd):
                v[i, c] = 0.0
        for e in range(m):
            for c in range(dd):
                v[tails_v[e], c] = v[tails_v[e], c] + term[e, c]

        # max with NaN propagation, matching numpy's max in the fallback
        saw_nan = 0
        if form:
            metric = 0.0
            for e in range(m):
                if err[e] > metric:
                    metric = err[e]
                elif err[e] != err[e]:
                    saw_nan = 1
        else:
            metric = 0.0
            for i in range(nn):
                for j in range(i + 1, nn):
                    acc = 0.0
                    for c in range(dd):
                        s = x[j, c] - x[i, c]
                        acc = acc + s * s
                    acc = sqrt(acc)
                    if acc > metric:
                        metric = acc
                    elif acc != acc:
                        saw_nan = 1
        if saw_nan:
            metric = <double>np.nan

        done = metric < tol or k == n_steps_c
        if k % stride_c == 0 or done:
            if last_rec != k:
                phi = 0.0
                psi = 0.0
                for e in range(m_or):
                    phi = phi + dist[oidx_v[e]]
                    psi = psi + 0.5 * dist[oidx_v[e]] * err[oidx_v[e]] * err[oidx_v[e]]
                vmax = 0.0
                saw_nan = 0
                for i in range(nn):
                    for j in range(i + 1, nn):
                        acc = 0.0
                        for c in range(dd):
                            s = x[j, c] - x[i, c]
                            acc = acc + s * s
                        acc = sqrt(acc)
                        if acc > vmax:
                            vmax = acc
                        elif acc != acc:
                            saw_nan = 1
                if saw_nan:
                    vmax = <double>np.nan
                gnorm = 0.0
                for i in range(nn):
                    for c in range(dd):
                        gnorm = gnorm + v[i, c] * v[i, c]
                gnorm = sqrt(gnorm)
                times[n_rec] = k * dt_c
                for i in range(nn):
                    for c in range(dd):
                        states[n_rec, i * dd + c] = x[i, c]
                phis[n_rec] = phi
                psis[n_rec] = psi
                vmaxs[n_rec] = vmax
                gnorms[n_rec] = gnorm
                for c in range(dd):
                    acc = 0.0
                    for i in range(nn):
                        acc = acc + x[i, c]
                    cents[n_rec, c] = acc / nn
                n_rec += 1
                last_rec = k
        if metric < tol:
            stop_code = STOP_CONVERGED
            t_conv = k * dt_c
            break
        if k == n_steps_c:
            stop_code = STOP_TIME_LIMIT
            break

        captured = 0
        if merge_c:
            captured = _capture_step(x, v, dt_c, eps, pa, pb, pm, stat,
                                     tails_v, heads_v, term, x_new, cand_idx,
                                     cand_tau, parent, label, in_cluster,
                                     tau_root, vext)
        if captured:
            for i in range(nn):
                for c in range(dd):
                    x[i, c] = x_new[i, c]
        else:
            for i in range(nn):
                for c in range(dd):
                    x[i, c] = x[i, c] + dt_c * v[i, c]
        k += 1
        bad = 0
        for i in range(nn):
            for c in range(dd):
                if not isfinite(x[i, c]):
                    bad = 1
        if bad:
            times[n_rec] = k * dt_c
            for i in range(nn):
                for c in range(dd):
                    states[n_rec, i * dd + c] = x[i, c]
            phis[n_rec] = np.nan
            psis[n_rec] = np.nan
            vmaxs[n_rec] = np.nan
            gnorms[n_rec] = np.nan
            for c in range(dd):
                cents[n_rec, c] = np.nan
            n_rec += 1
            stop_code = STOP_NUMERICAL
            break

    return {
        "times": times_a[:n_rec].copy(),
        "states": states_a[:n_rec].copy(),
        "phi": phis_a[:n_rec].copy(),
        "psi": psis_a[:n_rec].copy(),
        "vmax": vmaxs_a[:n_rec].copy(),
        "gnorm": gnorms_a[:n_rec].copy(),
        "centroid": cents_a[:n_rec].copy(),
        "stop_code": stop_code,
        "t_converge": t_conv,
        "steps_done": k,
    }
