"""Hot loops for the gossip sweep and greedy-hop computations.

Every kernel is plain Python over flat numpy arrays so the same code runs
jitted (numba, the default) or interpreted (set SOCIALDHT_DISABLE_NUMBA=1).
Randomness never happens inside a kernel: callers pre-draw uniforms with a
seeded numpy Generator, which keeps results identical across both paths
and across numba versions.  The engine module carries an independent
readable implementation of one gossip attempt; tests cross-check the two.
"""

from __future__ import annotations

import os

import numpy as np

SCHEME_RANDOM = 0
SCHEME_DIRECT = 1
SCHEME_GREEDY = 2
SCHEME_SMART = 3

METRIC_RING = 0
METRIC_HOPS = 1


def _numba_enabled() -> bool:
    if os.environ.get("SOCIALDHT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _numba_enabled()


def _jit(fn):
    if not USING_NUMBA:
        return fn
    import numba
    return numba.njit(cache=True)(fn)


def _route_hops(long_links, src, dst):
    # Greedy-route hop count in slot-index space: ids are sorted, so the
    # clockwise index gap orders targets exactly like the clockwise id gap.
    n = long_links.shape[0]
    k = long_links.shape[1]
    cur = src
    hops = 0
    while cur != dst:
        gap = (dst - cur) % n
        best_rem = gap - 1  # successor
        for q in range(k):
            t = long_links[cur, q]
            if t >= 0:
                step = (t - cur) % n
                if step <= gap:
                    rem = gap - step
                    if rem < best_rem:
                        best_rem = rem
        cur = (dst - best_rem) % n
        hops += 1
    return hops


route_hops = _jit(_route_hops)


def _slot_distance(ids, long_links, hop_mat, a, b, metric_code, literal_abs):
    # Ring-id distance or greedy-route hops between two slots.
    if metric_code == METRIC_RING:
        d = abs(ids[a] - ids[b])
        if not literal_abs and d > 0.5:
            d = 1.0 - d
        return d
    if a == b:
        return 0.0
    if hop_mat.shape[0] > 0:
        return float(hop_mat[a, b])
    return float(route_hops(long_links, a, b))


slot_distance = _jit(_slot_distance)


def _pair_cost(indptr, indices, strengths, ids, long_links, hop_mat,
               user_slot, i, slot_i, j, slot_j, metric_code, literal_abs):
    # Combined neighbourhood cost of i occupying slot_i and j slot_j with
    # everyone else frozen; a friendship between i and j is evaluated at
    # the hypothetical positions on both sides.
    total = 0.0
    for p in range(indptr[i], indptr[i + 1]):
        v = indices[p]
        if v == j:
            sv = slot_j
        else:
            sv = user_slot[v]
        total += strengths[p] * slot_distance(ids, long_links, hop_mat,
                                              slot_i, sv, metric_code, literal_abs)
    for p in range(indptr[j], indptr[j + 1]):
        v = indices[p]
        if v == i:
            sv = slot_i
        else:
            sv = user_slot[v]
        total += strengths[p] * slot_distance(ids, long_links, hop_mat,
                                              slot_j, sv, metric_code, literal_abs)
    return total


pair_cost = _jit(_pair_cost)


def _gossip_sweep(indptr, indices, strengths,
                  ids, long_links, hop_mat,
                  user_slot, slot_user, moved,
                  order, u_sel, u_fing,
                  scheme_code, greedy_m, smart_indptr, smart_indices,
                  metric_code, literal_abs):
    # One pass of gossip attempts in the given initiator order.  Mutates
    # user_slot/slot_user/moved in place; every initiator counts as an
    # attempt even when peer selection yields no candidate.
    n = user_slot.shape[0]
    k = long_links.shape[1]
    swaps = 0
    attempts = 0
    for t in range(order.shape[0]):
        i = order[t]
        attempts += 1
        j = -1
        if scheme_code == SCHEME_RANDOM:
            j = int(u_sel[t] * (n - 1))
            if j >= i:
                j += 1
        else:
            deg = indptr[i + 1] - indptr[i]
            if scheme_code == SCHEME_DIRECT:
                if deg == 0:
                    continue
                m = indices[indptr[i] + int(u_sel[t] * deg)]
            elif scheme_code == SCHEME_GREEDY:
                m = greedy_m[i]
                if m < 0:
                    continue
            else:
                width = smart_indptr[i + 1] - smart_indptr[i]
                if width == 0:
                    continue
                m = smart_indices[smart_indptr[i] + int(u_sel[t] * width)]
            # uniform pick over m's slot's finger entries (predecessor,
            # successor, long links) whose occupant is not i itself
            ms = user_slot[m]
            pred = (ms - 1 + n) % n
            succ = (ms + 1) % n
            count = 0
            if slot_user[pred] != i:
                count += 1
            if slot_user[succ] != i:
                count += 1
            for q in range(k):
                tgt = long_links[ms, q]
                if tgt >= 0 and slot_user[tgt] != i:
                    count += 1
            if count == 0:
                continue
            pick = int(u_fing[t] * count)
            idx = 0
            if slot_user[pred] != i:
                if idx == pick:
                    j = slot_user[pred]
                idx += 1
            if j < 0 and slot_user[succ] != i:
                if idx == pick:
                    j = slot_user[succ]
                idx += 1
            if j < 0:
                for q in range(k):
                    tgt = long_links[ms, q]
                    if tgt >= 0 and slot_user[tgt] != i:
                        if idx == pick:
                            j = slot_user[tgt]
                            break
                        idx += 1
        if j < 0 or j == i:
            continue
        si = user_slot[i]
        sj = user_slot[j]
        before = pair_cost(indptr, indices, strengths, ids, long_links, hop_mat,
                           user_slot, i, si, j, sj, metric_code, literal_abs)
        after = pair_cost(indptr, indices, strengths, ids, long_links, hop_mat,
                          user_slot, i, sj, j, si, metric_code, literal_abs)
        if before > after:
            user_slot[i] = sj
            user_slot[j] = si
            slot_user[si] = j
            slot_user[sj] = i
            moved[i] = True
            moved[j] = True
            swaps += 1
    return swaps, attempts


gossip_sweep = _jit(_gossip_sweep)


def _hop_matrix(long_links):
    # All-pairs greedy-route hop counts.  For a fixed destination every
    # source's next hop strictly shrinks the clockwise gap, so filling
    # sources in increasing gap order resolves each entry with one lookup.
    n = long_links.shape[0]
    k = long_links.shape[1]
    mat = np.zeros((n, n), dtype=np.uint16)
    for dst in range(n):
        for gap in range(1, n):
            src = (dst - gap) % n
            best_rem = gap - 1
            for q in range(k):
                t = long_links[src, q]
                if t >= 0:
                    step = (t - src) % n
                    if step <= gap:
                        rem = gap - step
                        if rem < best_rem:
                            best_rem = rem
            mat[src, dst] = 1 + mat[(dst - best_rem) % n, dst]
    return mat


hop_matrix = _jit(_hop_matrix)
