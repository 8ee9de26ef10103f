"""Reference integration kernel (pure numpy).

This module defines the stepping semantics; the compiled backend mirrors it
operation for operation.  Keep the two in sync: any change here must be
ported to `_core_cy.pyx`, preserving summation order on every quantity that
feeds back into the state.
"""
import math

import numpy as np

# stop_code values returned by run()
STOP_CONVERGED = 0
STOP_TIME_LIMIT = 1
STOP_NUMERICAL = 2


def _monitors(x, dist, err, v, oidx, n):
    """Recorded scalars for one state: phi, psi, pair diameter, speed norm."""
    do = dist[oidx]
    phi = float(do.sum())
    psi = float(0.5 * (do * err[oidx] ** 2).sum())
    diff = x[:, None, :] - x[None, :, :]
    vmax = float(np.sqrt((diff * diff).sum(axis=2)).max()) if n > 1 else 0.0
    gnorm = float(np.sqrt((v * v).sum()))
    return phi, psi, vmax, gnorm


def _capture_step(x, v, dt, eps_c, pair_a, pair_b, pair_mult, stationary,
                  tails, heads, term):
    """One Euler step with cluster capture.

    Pairs of adjacent agents that are in contact, or whose radial approach
    rate would carry them through contact within this step, are capture
    candidates.  A candidate cluster sticks only when the relative speed
    induced by agents outside it is below the number of directed edges
    joining each candidate pair (the available disagreement "pull" across
    the contact).  Sticking clusters collapse onto a common point at the
    largest candidate contact time and drift with the mean external
    velocity for the remainder of the step; a cluster containing a
    stationary agent (no out-edges) collapses onto that agent instead.
    """
    n = x.shape[0]
    n_pairs = pair_a.shape[0]

    cand = []  # (p, tau)
    for p in range(n_pairs):
        a = pair_a[p]
        b = pair_b[p]
        rvec = x[b] - x[a]
        dpair = math.sqrt(float((rvec * rvec).sum()))
        if dpair <= eps_c:
            cand.append((p, 0.0))
            continue
        dvel = v[b] - v[a]
        rdot = float((dvel * rvec).sum()) / dpair
        if rdot < 0.0 and dpair + dt * rdot <= eps_c:
            tau = (dpair - eps_c) / (-rdot)
            if tau < 0.0:
                tau = 0.0
            elif tau > dt:
                tau = dt
            cand.append((p, tau))

    if not cand:
        return x + dt * v

    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for p, _tau in cand:
        union(int(pair_a[p]), int(pair_b[p]))
    label = np.array([find(i) for i in range(n)])

    # velocity seen from outside the candidate cluster: remove intra-cluster
    # edge contributions, in the same edge order they were accumulated
    m = tails.shape[0]
    vext = v.copy()
    in_cluster = np.zeros(n, dtype=bool)
    for p, _tau in cand:
        in_cluster[int(pair_a[p])] = True
        in_cluster[int(pair_b[p])] = True
    for e in range(m):
        i = int(tails[e])
        j = int(heads[e])
        if in_cluster[i] and in_cluster[j] and label[i] == label[j]:
            vext[i] -= term[e]

    kept = []
    for p, tau in cand:
        a = int(pair_a[p])
        b = int(pair_b[p])
        dvel = vext[b] - vext[a]
        rho = math.sqrt(float((dvel * dvel).sum()))
        if rho < float(pair_mult[p]):
            kept.append((p, tau))

    if not kept:
        return x + dt * v

    parent = list(range(n))
    for p, _tau in kept:
        union(int(pair_a[p]), int(pair_b[p]))
    label = np.array([find(i) for i in range(n)])

    in_cluster = np.zeros(n, dtype=bool)
    tau_c = np.zeros(n)  # keyed by cluster root
    for p, tau in kept:
        a = int(pair_a[p])
        b = int(pair_b[p])
        in_cluster[a] = True
        in_cluster[b] = True
        r = label[a]
        if tau > tau_c[r]:
            tau_c[r] = tau

    vext = v.copy()
    for e in range(m):
        i = int(tails[e])
        j = int(heads[e])
        if in_cluster[i] and in_cluster[j] and label[i] == label[j]:
            vext[i] -= term[e]

    x_new = x + dt * v
    roots = sorted({int(label[i]) for i in range(n) if in_cluster[i]})
    for r in roots:
        members = [i for i in range(n) if in_cluster[i] and label[i] == r]
        anchor = -1
        for i in members:
            if stationary[i]:
                anchor = i
                break
        d = x.shape[1]
        if anchor >= 0:
            p_c = x[anchor].copy()
            v_bar = np.zeros(d)
        else:
            tau = tau_c[r]
            p_c = np.zeros(d)
            v_bar = np.zeros(d)
            for i in members:  # sequential, ascending index
                p_c = p_c + (x[i] + tau * v[i])
                v_bar = v_bar + vext[i]
            p_c = p_c / len(members)
            v_bar = v_bar / len(members)
        pos = p_c + (dt - tau_c[r]) * v_bar
        for i in members:
            x_new[i] = pos
    return x_new


def run(x0, n, d, tails, heads, ustar, is_formation, oidx,
        pair_a, pair_b, pair_mult, stationary,
        dt, n_steps, stop_tol, eps_c, merge, stride):
    """Integrate the bearing flow with explicit Euler steps.

    Per step k (state x_k at time k*dt):
      1. per-edge offsets r_e = x_head - x_tail, distances, bearings
         (a bearing is zero once the pair is within eps_c);
      2. per-edge terms u_e - ustar_e accumulated into agent velocities
         in edge order;
      3. stop metric: max pairwise distance (consensus) or max per-edge
         bearing error (formation); checked against stop_tol before
         stepping, so t_converge = k*dt is the first recorded time at
         which the metric is already below tolerance;
      4. record monitors when k % stride == 0 (the stopping state is
         always recorded);
      5. advance: plain Euler, or the capture step when merge is set.

    Parameters are pre-validated, 0-based arrays; see sim.simulate for the
    user-facing entry point.  Returns a dict of recorded series plus
    stop_code, t_converge and steps_done.
    """
    x = np.asarray(x0, dtype=np.float64).reshape(n, d).copy()
    m = tails.shape[0]
    cap = n_steps // stride + 2
    times = np.empty(cap)
    states = np.empty((cap, n * d))
    phis = np.empty(cap)
    psis = np.empty(cap)
    vmaxs = np.empty(cap)
    gnorms = np.empty(cap)
    cents = np.empty((cap, d))
    n_rec = 0
    last_rec = -1

    stop_code = STOP_TIME_LIMIT
    t_conv = -1.0
    k = 0
    while True:
        r = x[heads] - x[tails]
        dist = np.sqrt((r * r).sum(axis=1))
        u = np.zeros((m, d))
        ok = dist > eps_c
        u[ok] = r[ok] / dist[ok, None]
        term = u - ustar
        err = np.sqrt((term * term).sum(axis=1))
        v = np.zeros((n, d))
        np.add.at(v, tails, term)

        if is_formation:
            metric = float(err.max()) if m else 0.0
        else:
            diff = x[:, None, :] - x[None, :, :]
            metric = float(np.sqrt((diff * diff).sum(axis=2)).max()) if n > 1 else 0.0

        done = metric < stop_tol or k == n_steps
        if k % stride == 0 or done:
            phi, psi, vmax, gnorm = _monitors(x, dist, err, v, oidx, n)
            if last_rec != k:
                times[n_rec] = k * dt
                states[n_rec] = x.reshape(-1)
                phis[n_rec] = phi
                psis[n_rec] = psi
                vmaxs[n_rec] = vmax
                gnorms[n_rec] = gnorm
                cents[n_rec] = x.sum(axis=0) / n
                n_rec += 1
                last_rec = k
        if metric < stop_tol:
            stop_code = STOP_CONVERGED
            t_conv = k * dt
            break
        if k == n_steps:
            stop_code = STOP_TIME_LIMIT
            break

        if merge:
            x = _capture_step(x, v, dt, eps_c, pair_a, pair_b, pair_mult,
                              stationary, tails, heads, term)
        else:
            x = x + dt * v
        k += 1
        if not np.isfinite(x).all():
            times[n_rec] = k * dt
            states[n_rec] = x.reshape(-1)
            phis[n_rec] = np.nan
            psis[n_rec] = np.nan
            vmaxs[n_rec] = np.nan
            gnorms[n_rec] = np.nan
            cents[n_rec] = np.nan
            n_rec += 1
            stop_code = STOP_NUMERICAL
            break

    return {
        "times": times[:n_rec].copy(),
        "states": states[:n_rec].copy(),
        "phi": phis[:n_rec].copy(),
        "psi": psis[:n_rec].copy(),
        "vmax": vmaxs[:n_rec].copy(),
        "gnorm": gnorms[:n_rec].copy(),
        "centroid": cents[:n_rec].copy(),
        "stop_code": stop_code,
        "t_converge": t_conv,
        "steps_done": k,
    }
