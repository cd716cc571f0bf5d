"""Hot inner loops, each in a numba and a pure-numpy flavour.

Set ``ALLOCFLOW_DISABLE_NUMBA=1`` before import to force the numpy path.
Both flavours are always importable (``*_nb`` / ``*_np``) so tests can pit
them against each other; the unsuffixed names are the selected backend.

Graph kernels take arc lists (tail, head, cost as int64 arrays) and return
cycles as arrays of arc indices in traversal order.  All cost arithmetic is
exact int64.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_DISABLED = os.environ.get("ALLOCFLOW_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = numba is not None and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

INF = np.int64(2**62)

_EMPTY = np.zeros(0, dtype=np.int64)


def _njit(fn):
    if numba is None:  # pragma: no cover
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------- Bellman-Ford


@_njit
def _pred_cycle_nb(n, tail, pred):
    # colour 0 = unseen, walk id otherwise; returns arc list of a pred-graph cycle
    mark = np.zeros(n, dtype=np.int64)
    for start in range(n):
        if mark[start] != 0:
            continue
        v = start
        while v != -1 and mark[v] == 0:
            mark[v] = start + 1
            a = pred[v]
            v = tail[a] if a >= 0 else -1
        if v != -1 and mark[v] == start + 1:
            # v lies on a cycle
            count = 0
            u = v
            while True:
                count += 1
                u = tail[pred[u]]
                if u == v:
                    break
            out = np.empty(count, dtype=np.int64)
            u = v
            for k in range(count - 1, -1, -1):
                out[k] = pred[u]
                u = tail[pred[u]]
            return out
    return np.zeros(0, dtype=np.int64)


@_njit
def bellman_ford_cycle_nb(n, tail, head, cost):
    m = tail.shape[0]
    dist = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    last = -1
    for _ in range(n + 1):
        last = -1
        for a in range(m):
            u = tail[a]
            v = head[a]
            nd = dist[u] + cost[a]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = a
                last = v
        if last < 0:
            return np.zeros(0, dtype=np.int64)
        cyc = _pred_cycle_nb(n, tail, pred)
        if cyc.shape[0] > 0:
            total = 0
            for a in cyc:
                total += cost[a]
            if total < 0:
                return cyc
    return _walk_into_cycle_nb(n, tail, pred, last)


def _walk_into_cycle(n, tail, pred, v):
    # still relaxing after n+1 passes: n predecessor steps from v land on a cycle
    for _ in range(n):
        v = tail[pred[v]]
    count = 0
    u = v
    while True:
        count += 1
        u = tail[pred[u]]
        if u == v:
            break
    out = np.empty(count, dtype=np.int64)
    u = v
    for k in range(count - 1, -1, -1):
        out[k] = pred[u]
        u = tail[pred[u]]
    return out


_walk_into_cycle_nb = _njit(_walk_into_cycle)


def _pred_cycle_np(n, tail, pred):
    mark = np.zeros(n, dtype=np.int64)
    for start in range(n):
        if mark[start]:
            continue
        v = start
        while v != -1 and mark[v] == 0:
            mark[v] = start + 1
            a = pred[v]
            v = tail[a] if a >= 0 else -1
        if v != -1 and mark[v] == start + 1:
            arcs = []
            u = v
            while True:
                arcs.append(pred[u])
                u = tail[pred[u]]
                if u == v:
                    break
            return np.array(arcs[::-1], dtype=np.int64)
    return _EMPTY


def bellman_ford_cycle_np(n, tail, head, cost):
    """Synchronous (Jacobi) relaxation passes, vectorised over arcs."""
    dist = np.zeros(n, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    if len(tail) == 0:
        return _EMPTY
    order = np.lexsort((np.arange(len(tail)), head))
    h_sorted = head[order]
    starts = np.r_[0, np.nonzero(np.diff(h_sorted))[0] + 1]
    changed = _EMPTY
    for _ in range(n + 1):
        cand = dist[tail] + cost
        c_sorted = cand[order]
        best = np.minimum.reduceat(c_sorted, starts)
        heads = h_sorted[starts]
        improve = best < dist[heads]
        if not improve.any():
            return _EMPTY
        # first arc (canonical order) attaining the minimum at each head
        is_best = c_sorted == np.repeat(best, np.diff(np.r_[starts, len(order)]))
        first = np.full(len(starts), -1, dtype=np.int64)
        grp = np.repeat(np.arange(len(starts)), np.diff(np.r_[starts, len(order)]))
        hit = np.nonzero(is_best)[0]
        first_hit = np.unique(grp[hit], return_index=True)[1]
        first[grp[hit[first_hit]]] = order[hit[first_hit]]
        changed = heads[improve]
        dist[changed] = best[improve]
        pred[changed] = first[improve]
        cyc = _pred_cycle_np(n, tail, pred)
        if len(cyc) and cost[cyc].sum() < 0:
            return cyc
    return _walk_into_cycle(n, tail, pred, int(changed[0]))


# ------------------------------------------------------------------ Karp


@_njit
def karp_min_mean_nb(n, tail, head, cost):
    """Returns (cycle arcs, numerator, denominator) of a minimum-mean cycle.

    Empty cycle when the graph has no cycle at all.
    """
    m = tail.shape[0]
    inf = np.int64(2**62)
    d = np.full((n + 1, n), inf, dtype=np.int64)
    pa = np.full((n + 1, n), -1, dtype=np.int64)
    for v in range(n):
        d[0, v] = 0
    for k in range(1, n + 1):
        prev = d[k - 1]
        cur = d[k]
        pk = pa[k]
        for a in range(m):
            u = tail[a]
            if prev[u] == inf:
                continue
            nd = prev[u] + cost[a]
            v = head[a]
            if nd < cur[v]:
                cur[v] = nd
                pk[v] = a
    best_v = -1
    best_num = np.int64(0)
    best_den = np.int64(1)
    for v in range(n):
        if d[n, v] == inf:
            continue
        # max over k of (d[n,v] - d[k,v]) / (n - k)
        vnum = np.int64(0)
        vden = np.int64(0)
        for k in range(n):
            if d[k, v] == inf:
                continue
            num = d[n, v] - d[k, v]
            den = np.int64(n - k)
            if vden == 0 or num * vden > vnum * den:
                vnum = num
                vden = den
        if best_v < 0 or vnum * best_den < best_num * vden:
            best_v = v
            best_num = vnum
            best_den = vden
    if best_v < 0:
        return np.zeros(0, dtype=np.int64), np.int64(0), np.int64(1)
    # walk the n-arc minimum walk back from best_v until a vertex repeats
    seen = np.full(n, -1, dtype=np.int64)
    arcs = np.empty(n + 1, dtype=np.int64)
    v = best_v
    k = n
    seen[v] = k
    while k > 0:
        a = pa[k, v]
        arcs[k] = a
        v = tail[a]
        k -= 1
        if seen[v] >= 0:
            hi = seen[v]
            return arcs[k + 1:hi + 1].copy(), best_num, best_den
        seen[v] = k
    return np.zeros(0, dtype=np.int64), best_num, best_den  # pragma: no cover


def karp_min_mean_np(n, tail, head, cost):
    inf = INF
    d = np.full((n + 1, n), inf, dtype=np.int64)
    pa = np.full((n + 1, n), -1, dtype=np.int64)
    d[0] = 0
    m = len(tail)
    if m == 0 or n == 0:
        return _EMPTY, np.int64(0), np.int64(1)
    order = np.lexsort((np.arange(m), head))
    h_sorted = head[order]
    starts = np.r_[0, np.nonzero(np.diff(h_sorted))[0] + 1]
    sizes = np.diff(np.r_[starts, m])
    grp = np.repeat(np.arange(len(starts)), sizes)
    heads = h_sorted[starts]
    for k in range(1, n + 1):
        prev = d[k - 1]
        ok = prev[tail] != inf
        cand = np.where(ok, prev[tail] + cost, inf)[order]
        best = np.minimum.reduceat(cand, starts)
        hit = np.nonzero((cand == np.repeat(best, sizes)) & (cand != inf))[0]
        if len(hit) == 0:
            continue
        g, first = np.unique(grp[hit], return_index=True)
        d[k, heads[g]] = best[g]
        pa[k, heads[g]] = order[hit[first]]
    reach = d[n] != inf
    if not reach.any():
        return _EMPTY, np.int64(0), np.int64(1)
    vnum = np.zeros(n, dtype=np.int64)
    vden = np.zeros(n, dtype=np.int64)
    for k in range(n):
        ok = reach & (d[k] != inf)
        num = np.where(ok, d[n] - np.where(ok, d[k], 0), 0)
        den = n - k
        better = ok & ((vden == 0) | (num * vden > vnum * den))
        vnum[better] = num[better]
        vden[better] = den
    best_v, best_num, best_den = -1, 0, 1
    for v in np.nonzero(reach)[0]:
        if best_v < 0 or vnum[v] * best_den < best_num * vden[v]:
            best_v, best_num, best_den = int(v), int(vnum[v]), int(vden[v])
    seen = np.full(n, -1, dtype=np.int64)
    arcs = np.empty(n + 1, dtype=np.int64)
    v, k = best_v, n
    seen[v] = k
    while k > 0:
        a = pa[k, v]
        arcs[k] = a
        v = tail[a]
        k -= 1
        if seen[v] >= 0:
            return arcs[k + 1:seen[v] + 1].copy(), np.int64(best_num), np.int64(best_den)
        seen[v] = k
    raise AssertionError("walk of n arcs must repeat a vertex")  # pragma: no cover


# ------------------------------------------------------- permutation statistic


@_njit
def replicate_stats_nb(values, perms, arm_of, arm_size, pair_a, pair_b, pair_w):
    """Weighted mean |arm mean difference| for each row of ``perms``.

    ``perms[r]`` gives, for each observation slot, which original value lands
    there; slot membership in arms is fixed by ``arm_of``.
    """
    n_rep, n_obs = perms.shape
    n_arms = arm_size.shape[0]
    out = np.empty(n_rep)
    sums = np.empty(n_arms)
    for r in range(n_rep):
        sums[:] = 0.0
        for s in range(n_obs):
            sums[arm_of[s]] += values[perms[r, s]]
        stat = 0.0
        for p in range(pair_a.shape[0]):
            a = pair_a[p]
            b = pair_b[p]
            stat += pair_w[p] * abs(sums[a] / arm_size[a] - sums[b] / arm_size[b])
        out[r] = stat
    return out


def replicate_stats_np(values, perms, arm_of, arm_size, pair_a, pair_b, pair_w):
    n_rep = perms.shape[0]
    n_arms = len(arm_size)
    permuted = values[perms]  # n_rep x n_obs
    idx = arm_of[None, :] + n_arms * np.arange(n_rep)[:, None]
    sums = np.bincount(idx.ravel(), weights=permuted.ravel(),
                       minlength=n_rep * n_arms).reshape(n_rep, n_arms)
    means = sums / arm_size[None, :]
    return np.abs(means[:, pair_a] - means[:, pair_b]) @ pair_w


if USE_NUMBA:
    bellman_ford_cycle = bellman_ford_cycle_nb
    karp_min_mean = karp_min_mean_nb
    replicate_stats = replicate_stats_nb
else:
    bellman_ford_cycle = bellman_ford_cycle_np
    karp_min_mean = karp_min_mean_np
    replicate_stats = replicate_stats_np
