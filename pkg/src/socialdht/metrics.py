"""Evaluation metrics over a (graph, ring, placement) snapshot.

Three families: lookup latency between friends (greedy-route hops),
migration cost (executed swaps over gossip attempts), and reliability
(friends among a user's fingers; friends reachable within i hops).  All
functions are pure reads of the snapshot; hop sums are exact integer sums
so results do not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from socialdht.graph import SocialGraph
from socialdht.overlay import Placement, Ring


def batch_route_hops(ring: Ring, srcs: np.ndarray, dsts: np.ndarray,
                     max_steps: Optional[int] = None) -> np.ndarray:
    """Greedy-route hop counts for many (src, dst) slot pairs at once.

    With ``max_steps`` set, pairs not reached within that many hops get
    ``max_steps + 1`` (used by the i-hop reliability early cutoff).
    """
    n = ring.n
    links = ring.long_links
    cur = np.asarray(srcs, dtype=np.int64).copy()
    dst = np.asarray(dsts, dtype=np.int64)
    hops = np.zeros(cur.shape[0], dtype=np.int64)
    active = np.nonzero(cur != dst)[0]
    limit = n if max_steps is None else max_steps
    steps = 0
    while active.size and steps < limit:
        c = cur[active]
        d = dst[active]
        gap = (d - c) % n
        if ring.k > 0:
            cand = links[c]
            step = (cand - c[:, None]) % n
            valid = (cand >= 0) & (step <= gap[:, None])
            rem = np.where(valid, gap[:, None] - step, n)
            best_rem = np.minimum(rem.min(axis=1), gap - 1)
        else:
            best_rem = gap - 1
        cur[active] = (d - best_rem) % n
        hops[active] += 1
        steps += 1
        active = active[cur[active] != dst[active]]
    if active.size:
        hops[active] = limit + 1
    return hops


def avg_friend_latency(g: SocialGraph, ring: Ring, placement: Placement,
                       sample_cap: Optional[int] = None,
                       seed=None) -> Optional[float]:
    """Mean greedy-route hops over friend pairs, both directions of each edge.

    Exhaustive when 2|E| fits under ``sample_cap`` (or the cap is None),
    otherwise a seeded uniform edge sample without replacement.  Returns
    None for an edgeless graph.
    """
    edges = g.edge_array()
    if edges.shape[0] == 0:
        return None
    if sample_cap is not None and 2 * edges.shape[0] > sample_cap:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        take = max(1, sample_cap // 2)
        pick = rng.choice(edges.shape[0], size=take, replace=False)
        edges = edges[pick]
    src_users = np.concatenate([edges[:, 0], edges[:, 1]])
    dst_users = np.concatenate([edges[:, 1], edges[:, 0]])
    hops = batch_route_hops(ring, placement.user_slot[src_users],
                            placement.user_slot[dst_users])
    return int(hops.sum()) / hops.shape[0]


def migration_cost(swaps: int, attempts: int) -> Optional[float]:
    """Executed identifier exchanges over gossip attempts; None before any attempt."""
    if attempts <= 0:
        return None
    return swaps / attempts


def _finger_table(ring: Ring, slots: np.ndarray) -> np.ndarray:
    """Per given slot: predecessor, successor and long links (slot -1 padding)."""
    n = ring.n
    pred = (slots - 1) % n
    succ = (slots + 1) % n
    return np.column_stack([pred, succ, ring.long_links[slots]])


def reliability_finger(g: SocialGraph, ring: Ring, placement: Placement,
                       degree_weighted: bool = False) -> float:
    """Average per-user fraction of finger entries occupied by friends.

    Fingers are predecessor + successor + filled long links; only users
    with at least one friend enter the average.
    """
    n = g.n
    fingers = _finger_table(ring, placement.user_slot)
    valid = fingers >= 0
    occupants = placement.slot_user[np.where(valid, fingers, 0)]
    users = np.broadcast_to(np.arange(n)[:, None], fingers.shape)
    friend = valid & g.edge_membership(users.ravel(), occupants.ravel()).reshape(fingers.shape)
    per_user = friend.sum(axis=1) / valid.sum(axis=1)
    mask = g.degrees > 0
    if degree_weighted:
        w = g.degrees[mask].astype(np.float64)
        return float((per_user[mask] * w).sum() / w.sum())
    return float(per_user[mask].mean())


def _ihop_per_user(g: SocialGraph, ring: Ring, placement: Placement,
                   max_i: int, mode: str) -> np.ndarray:
    """Per-user fraction of friends within i hops, shape (n, max_i)."""
    n = g.n
    src_users = np.repeat(np.arange(n, dtype=np.int64), g.degrees)
    dst_users = g.indices
    if mode == "route":
        hops = batch_route_hops(ring, placement.user_slot[src_users],
                                placement.user_slot[dst_users], max_steps=max_i)
    elif mode == "bfs":
        hops = _bfs_hops(ring, placement.user_slot[src_users],
                         placement.user_slot[dst_users], max_i)
    else:
        raise ValueError(f"unknown ihop mode {mode!r}")
    mask = g.degrees > 0
    deg = g.degrees.astype(np.float64)
    per_user = np.zeros((n, max_i))
    for i in range(1, max_i + 1):
        good = np.bincount(src_users, weights=(hops <= i), minlength=n)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_user[:, i - 1] = np.where(mask, good / deg, 0.0)
    return per_user


def reliability_ihop(g: SocialGraph, ring: Ring, placement: Placement,
                     max_i: int = 3, mode: str = "route",
                     degree_weighted: bool = False) -> list[float]:
    """Per i in 1..max_i, average fraction of a user's friends within i hops.

    "Within i hops" follows the greedy-routing hop count by default, which
    matches the latency metric; mode "bfs" instead explores the overlay
    out-link graph breadth-first (sensitivity check).
    """
    per_user = _ihop_per_user(g, ring, placement, max_i, mode)
    mask = g.degrees > 0
    if degree_weighted:
        w = g.degrees[mask].astype(np.float64)
        return [float((per_user[mask, i] * w).sum() / w.sum()) for i in range(max_i)]
    return [float(per_user[mask, i].mean()) for i in range(max_i)]


def reliability_ihop_means(g: SocialGraph, ring: Ring, placement: Placement,
                           max_i: int = 3, mode: str = "route") -> dict:
    """Unweighted and degree-weighted i-hop means from one routing pass."""
    per_user = _ihop_per_user(g, ring, placement, max_i, mode)
    mask = g.degrees > 0
    w = g.degrees[mask].astype(np.float64)
    return {
        "unweighted": [float(per_user[mask, i].mean()) for i in range(max_i)],
        "degree_weighted": [float((per_user[mask, i] * w).sum() / w.sum())
                            for i in range(max_i)],
    }


def _bfs_hops(ring: Ring, srcs: np.ndarray, dsts: np.ndarray, max_i: int) -> np.ndarray:
    """Minimum out-link hops slot->slot up to max_i, else max_i + 1."""
    import scipy.sparse as sp

    n = ring.n
    rows, cols = [], []
    for s in range(n):
        for t in ring.fingers(s):
            rows.append(s)
            cols.append(t)
    adj = sp.csr_matrix((np.ones(len(rows), dtype=bool), (rows, cols)), shape=(n, n))
    hops = np.full(srcs.shape[0], max_i + 1, dtype=np.int64)
    reach = sp.identity(n, dtype=bool, format="csr")
    for i in range(1, max_i + 1):
        reach = ((reach @ adj) + reach).astype(bool)
        hit = np.asarray(reach[srcs, dsts]).ravel()
        hops[(hops > i) & hit] = i
    return hops


def embedding_cost(g: SocialGraph, ring: Ring, placement: Placement,
                   strengths: np.ndarray, metric: str = "ring_distance",
                   literal_abs: bool = False) -> float:
    """The global objective: sum over ordered friend pairs of s_ij * d_ij."""
    src_users = np.repeat(np.arange(g.n, dtype=np.int64), g.degrees)
    a = ring.ids[placement.user_slot[src_users]]
    b = ring.ids[placement.user_slot[g.indices]]
    if metric == "ring_distance":
        d = np.abs(a - b)
        if not literal_abs:
            d = np.minimum(d, 1.0 - d)
    elif metric == "hop_count":
        d = batch_route_hops(ring, placement.user_slot[src_users],
                             placement.user_slot[g.indices]).astype(np.float64)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return float((strengths * d).sum())


@dataclass
class MetricsOptions:
    """What to measure per reported iteration and how hard to sample."""

    latency_sample_cap: Optional[int] = 200_000
    reliability: bool = True
    max_i: int = 3
    ihop_mode: str = "route"
    degree_weighted: bool = True


def measure_snapshot(g: SocialGraph, ring: Ring, placement: Placement,
                     options: Optional["MetricsOptions"] = None,
                     sample_seed=None) -> dict:
    """Latency and reliability values of one snapshot, as report fields."""
    options = options if options is not None else MetricsOptions()
    out = {"avg_latency": avg_friend_latency(g, ring, placement,
                                             sample_cap=options.latency_sample_cap,
                                             seed=sample_seed)}
    if options.reliability:
        out["rel_finger"] = reliability_finger(g, ring, placement)
        if options.degree_weighted:
            means = reliability_ihop_means(g, ring, placement, max_i=options.max_i,
                                           mode=options.ihop_mode)
            ihop = means["unweighted"]
            out["rel_finger_degw"] = reliability_finger(g, ring, placement,
                                                        degree_weighted=True)
            for idx, name in enumerate(("rel_1hop_degw", "rel_2hop_degw",
                                        "rel_3hop_degw")):
                if idx < len(means["degree_weighted"]):
                    out[name] = means["degree_weighted"][idx]
        else:
            ihop = reliability_ihop(g, ring, placement, max_i=options.max_i,
                                    mode=options.ihop_mode)
        for idx, name in enumerate(("rel_1hop", "rel_2hop", "rel_3hop")):
            if idx < len(ihop):
                out[name] = ihop[idx]
    return out


@dataclass
class IterationReport:
    """One metrics row; None marks a value not computed for that row."""

    iteration: int
    avg_latency: Optional[float] = None
    swaps: int = 0
    attempts: int = 0
    per_iter_fraction: Optional[float] = None
    cum_fraction: Optional[float] = None
    rel_finger: Optional[float] = None
    rel_1hop: Optional[float] = None
    rel_2hop: Optional[float] = None
    rel_3hop: Optional[float] = None
    cum_swaps: int = 0
    cum_attempts: int = 0
    cum_unique_movers: int = 0
    unique_mover_fraction: float = 0.0
    rel_finger_degw: Optional[float] = None
    rel_1hop_degw: Optional[float] = None
    rel_2hop_degw: Optional[float] = None
    rel_3hop_degw: Optional[float] = None


CSV_COLUMNS = [f.name for f in dataclass_fields(IterationReport)]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(reports: Sequence[IterationReport]) -> str:
    """Stable textual CSV; identical inputs yield byte-identical output."""
    lines = [",".join(CSV_COLUMNS)]
    for r in reports:
        lines.append(",".join(_cell(getattr(r, name)) for name in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_csv(path, reports: Sequence[IterationReport]) -> None:
    Path(path).write_text(render_csv(reports))


def read_csv(path) -> list[IterationReport]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split(",") != CSV_COLUMNS:
        raise ValueError(f"{path}: unrecognized metrics CSV header")
    types = {f.name: f.type for f in dataclass_fields(IterationReport)}
    out = []
    for line in lines[1:]:
        values = line.split(",")
        kwargs = {}
        for name, cell in zip(CSV_COLUMNS, values):
            if cell == "":
                kwargs[name] = None
            elif "int" in str(types[name]) and "Optional" not in str(types[name]):
                kwargs[name] = int(cell)
            elif name == "iteration":
                kwargs[name] = int(cell)
            else:
                kwargs[name] = float(cell)
        out.append(IterationReport(**kwargs))
    return out
