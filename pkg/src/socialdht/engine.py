"""Gossip-driven refinement of a random user-to-slot embedding.

Starting from a uniform random placement, every user repeatedly picks a
peer (through one of four selection schemes), compares the combined
neighborhood cost of the current and the exchanged positions, and swaps
identifiers when the exchange strictly lowers that cost.  The hot loop
lives in :mod:`socialdht.kernels`; this module owns configuration,
seeding, scheme precomputation and the per-iteration reporting, plus
plain-Python reference implementations of the cost and selection rules
used to cross-check the kernels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from socialdht import kernels
from socialdht.graph import SocialGraph, StrengthProvider
from socialdht.metrics import (
    IterationReport,
    MetricsOptions,
    measure_snapshot,
    migration_cost,
)
from socialdht.overlay import (
    Placement,
    Ring,
    build_ring,
    circular_distance,
    default_k,
    greedy_route,
    swap_users,
)

log = logging.getLogger(__name__)

SCHEME_CODES = {
    "random": kernels.SCHEME_RANDOM,
    "direct": kernels.SCHEME_DIRECT,
    "greedy": kernels.SCHEME_GREEDY,
    "smart": kernels.SCHEME_SMART,
}
METRIC_CODES = {
    "ring_distance": kernels.METRIC_RING,
    "hop_count": kernels.METRIC_HOPS,
}
ORDERINGS = ("random", "descending_degree", "ascending_degree")

# CamelCase aliases accepted on the CLI/API surface.
_CANON = {
    "randomorder": "random",
    "descendingdegree": "descending_degree",
    "ascendingdegree": "ascending_degree",
    "descending": "descending_degree",
    "ascending": "ascending_degree",
    "ringdistance": "ring_distance",
    "hopcount": "hop_count",
    "commonneighbors": "common_neighbors",
    "iddistance": "id_distance",
}

# Above this size the all-pairs hop table (n^2 uint16) is not built and the
# hop-count metric falls back to routing per evaluated pair.
HOP_TABLE_LIMIT = 6000


def canonical(value: str) -> str:
    v = value.strip().lower().replace("-", "_")
    return _CANON.get(v.replace("_", ""), v)


@dataclass
class GossipConfig:
    """Knobs of one refinement run.

    ``iteration_unit`` "sweep" means one iteration = every user initiates
    once; "attempt" makes one iteration a single gossip attempt, for
    comparing against attempt-indexed plots.
    """

    scheme: str = "direct"
    metric: str = "ring_distance"
    ordering: str = "random"
    iterations: int = 100
    seed: int = 0
    smart_width: int = 5
    strength_mode: str = "common_neighbors"
    reference_ids: Optional[np.ndarray] = None
    literal_abs: bool = False
    iteration_unit: str = "sweep"

    def __post_init__(self):
        self.scheme = canonical(self.scheme)
        self.metric = canonical(self.metric)
        self.ordering = canonical(self.ordering)
        self.strength_mode = canonical(self.strength_mode)
        if self.scheme not in SCHEME_CODES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.metric not in METRIC_CODES:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.smart_width < 1:
            raise ValueError("smart_width must be >= 1")
        if self.iteration_unit not in ("sweep", "attempt"):
            raise ValueError(f"unknown iteration unit {self.iteration_unit!r}")


@dataclass
class SwapDecision:
    """Outcome of one cost evaluation between an initiator and a candidate."""

    initiator: int
    candidate: int
    cost_before: float
    cost_after: float
    swapped: bool


@dataclass
class EngineState:
    """Everything a run mutates, plus precomputed scheme tables."""

    graph: SocialGraph
    ring: Ring
    placement: Placement
    config: GossipConfig
    provider: StrengthProvider
    strengths: np.ndarray
    rng: np.random.Generator
    iteration: int = 0
    cum_swaps: int = 0
    cum_attempts: int = 0
    moved: np.ndarray = field(default=None, repr=False)
    greedy_m: np.ndarray = field(default=None, repr=False)
    smart_indptr: np.ndarray = field(default=None, repr=False)
    smart_indices: np.ndarray = field(default=None, repr=False)
    hop_mat: np.ndarray = field(default=None, repr=False)
    fixed_order: Optional[np.ndarray] = field(default=None, repr=False)
    _cursor: int = field(default=0, repr=False)


def _strongest_friends(g: SocialGraph, strengths: np.ndarray) -> np.ndarray:
    """Per user, the friend with the strongest tie (-1 when friendless).

    Neighbor lists are sorted, so argmax's first-hit rule breaks strength
    ties toward the lowest friend id.
    """
    out = np.full(g.n, -1, dtype=np.int64)
    for i in range(g.n):
        lo, hi = int(g.indptr[i]), int(g.indptr[i + 1])
        if hi > lo:
            out[i] = g.indices[lo + int(np.argmax(strengths[lo:hi]))]
    return out


def _smart_lists(g: SocialGraph, strengths: np.ndarray,
                 width: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR lists of each user's top-``width`` friends by descending strength."""
    indptr = np.zeros(g.n + 1, dtype=np.int64)
    chunks = []
    for i in range(g.n):
        lo, hi = int(g.indptr[i]), int(g.indptr[i + 1])
        nbrs = g.indices[lo:hi]
        take = min(width, nbrs.size)
        if take:
            order = np.lexsort((nbrs, -strengths[lo:hi]))[:take]
            chunks.append(nbrs[order])
        indptr[i + 1] = indptr[i] + take
    flat = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return indptr, flat.astype(np.int64)


def initialize(g: SocialGraph, config: Optional[GossipConfig] = None,
               k: Optional[int] = None, id_mode: str = "uniform") -> EngineState:
    """Build ring + random placement and precompute scheme tables.

    One seed drives four independent streams (ring ids and links, initial
    placement, gossip draws, metric sampling), so any sub-stage is
    reproducible on its own.
    """
    config = config if config is not None else GossipConfig()
    n = g.n
    ring_ss, place_ss, gossip_ss, _metrics_ss = np.random.SeedSequence(config.seed).spawn(4)
    ring = build_ring(n, default_k(n) if k is None else k, seed=ring_ss)
    placement = Placement.random(n, np.random.default_rng(place_ss))
    if config.strength_mode == "id_distance":
        if config.reference_ids is None or len(config.reference_ids) != n:
            raise ValueError("id_distance strength needs one reference id per user")
    provider = StrengthProvider(mode=config.strength_mode,
                                reference_ids=config.reference_ids,
                                literal_abs=config.literal_abs)
    strengths = provider.all_neighbor_strengths(g)
    state = EngineState(
        graph=g, ring=ring, placement=placement, config=config,
        provider=provider, strengths=strengths,
        rng=np.random.default_rng(gossip_ss),
        moved=np.zeros(n, dtype=bool),
        greedy_m=_strongest_friends(g, strengths),
        smart_indptr=np.zeros(1, dtype=np.int64),
        smart_indices=np.zeros(0, dtype=np.int64),
        hop_mat=np.zeros((0, 0), dtype=np.uint16),
    )
    if config.scheme == "smart":
        state.smart_indptr, state.smart_indices = _smart_lists(g, strengths,
                                                               config.smart_width)
    if config.metric == "hop_count":
        if n <= HOP_TABLE_LIMIT:
            state.hop_mat = kernels.hop_matrix(ring.long_links)
        else:
            log.info("hop-count metric without a hop table (n=%d > %d): "
                     "each cost evaluation routes per neighbor", n, HOP_TABLE_LIMIT)
    if config.ordering == "descending_degree":
        state.fixed_order = np.lexsort((np.arange(n), -g.degrees))
    elif config.ordering == "ascending_degree":
        state.fixed_order = np.lexsort((np.arange(n), g.degrees))
    return state


# -- reference implementations (slow, readable; the kernels must agree) ----

def _slot_metric(state: EngineState, a: int, b: int) -> float:
    if a == b:
        return 0.0
    if state.config.metric == "ring_distance":
        return circular_distance(float(state.ring.ids[a]), float(state.ring.ids[b]),
                                 state.config.literal_abs)
    if state.hop_mat.shape[0]:
        return float(state.hop_mat[a, b])
    return float(greedy_route(state.ring, a, b).hop_count)


def _pair_cost(state: EngineState, i: int, slot_i: int, j: int, slot_j: int) -> float:
    """Combined cost of the pair at hypothetical slots.

    Accumulates in the same order as the compiled kernel (i's neighbors,
    then j's, one running total) so swap decisions agree bit for bit.
    """
    g = state.graph
    total = 0.0
    for u, su, v, sv in ((i, slot_i, j, slot_j), (j, slot_j, i, slot_i)):
        for p in range(int(g.indptr[u]), int(g.indptr[u + 1])):
            w = int(g.indices[p])
            tgt = sv if w == v else int(state.placement.user_slot[w])
            total += float(state.strengths[p]) * _slot_metric(state, su, tgt)
    return total


def node_cost(state: EngineState, i: int, at_slot: Optional[int] = None) -> float:
    """Strength-weighted distance from ``i`` to all friends at their slots.

    ``at_slot`` evaluates the hypothetical of i occupying another slot
    while everyone else stays put.
    """
    if not 0 <= i < state.graph.n:
        raise ValueError(f"no such user {i}")
    slot = int(state.placement.user_slot[i]) if at_slot is None else int(at_slot)
    g = state.graph
    total = 0.0
    for p in range(int(g.indptr[i]), int(g.indptr[i + 1])):
        v = int(g.indices[p])
        total += float(state.strengths[p]) * _slot_metric(
            state, slot, int(state.placement.user_slot[v]))
    return total


def select_peer(state: EngineState, i: int,
                u_select: Optional[float] = None,
                u_finger: Optional[float] = None) -> int:
    """Pick the swap candidate for initiator ``i``; -1 means no candidate.

    Random draws uniformly over other users.  Direct, Greedy and Smart
    first pick an intermediary friend m (uniform / strongest tie / uniform
    among the ``smart_width`` strongest), then return the occupant of a
    uniformly chosen finger entry of m's slot, excluding i.  The two
    uniforms can be injected for deterministic tests; by default they come
    from the state's gossip stream.
    """
    g = state.graph
    n = g.n
    if u_select is None:
        u_select = float(state.rng.random())
    if u_finger is None:
        u_finger = float(state.rng.random())
    scheme = state.config.scheme
    if scheme == "random":
        j = int(u_select * (n - 1))
        return j + 1 if j >= i else j
    deg = int(g.degrees[i])
    if scheme == "direct":
        if deg == 0:
            return -1
        m = int(g.neighbors(i)[int(u_select * deg)])
    elif scheme == "greedy":
        m = int(state.greedy_m[i])
        if m < 0:
            return -1
    else:
        width = int(state.smart_indptr[i + 1] - state.smart_indptr[i])
        if width == 0:
            return -1
        m = int(state.smart_indices[int(state.smart_indptr[i]) + int(u_select * width)])
    ms = int(state.placement.user_slot[m])
    entries = [int(state.placement.slot_user[t]) for t in state.ring.fingers(ms)
               if int(state.placement.slot_user[t]) != i]
    if not entries:
        return -1
    return entries[int(u_finger * len(entries))]


def evaluate_swap(state: EngineState, i: int, j: int) -> SwapDecision:
    """Compare combined neighborhood costs and swap ids when strictly cheaper.

    Both sides are evaluated with everyone else frozen; when i and j are
    friends the mutual term uses the hypothetical positions consistently
    on both sides.  Ties never swap.
    """
    if i == j:
        raise ValueError("cannot evaluate a self-swap")
    si = int(state.placement.user_slot[i])
    sj = int(state.placement.user_slot[j])
    before = _pair_cost(state, i, si, j, sj)
    after = _pair_cost(state, i, sj, j, si)
    swapped = before > after
    if swapped:
        swap_users(state.placement, i, j)
        state.moved[i] = True
        state.moved[j] = True
    return SwapDecision(initiator=i, candidate=j, cost_before=before,
                        cost_after=after, swapped=swapped)


# -- run loop --------------------------------------------------------------

def _advance(state: EngineState) -> tuple[int, int]:
    """Execute one iteration's worth of gossip attempts via the kernel."""
    cfg = state.config
    n = state.graph.n
    if cfg.iteration_unit == "attempt":
        if cfg.ordering == "random":
            order = state.rng.integers(0, n, size=1)
        else:
            order = state.fixed_order[state._cursor:state._cursor + 1]
            state._cursor = (state._cursor + 1) % n
        count = 1
    elif cfg.ordering == "random":
        order = state.rng.permutation(n)
        count = n
    else:
        order = state.fixed_order
        count = n
    u_sel = state.rng.random(count)
    u_fing = state.rng.random(count)
    return kernels.gossip_sweep(
        state.graph.indptr, state.graph.indices, state.strengths,
        state.ring.ids, state.ring.long_links, state.hop_mat,
        state.placement.user_slot, state.placement.slot_user, state.moved,
        order, u_sel, u_fing,
        SCHEME_CODES[cfg.scheme], state.greedy_m,
        state.smart_indptr, state.smart_indices,
        METRIC_CODES[cfg.metric], cfg.literal_abs)


def _report(state: EngineState, swaps: int, attempts: int,
            measure: bool, options: Optional[MetricsOptions]) -> IterationReport:
    options = options if options is not None else MetricsOptions()
    n = state.graph.n
    rep = IterationReport(
        iteration=state.iteration,
        swaps=swaps,
        attempts=attempts,
        per_iter_fraction=migration_cost(swaps, attempts),
        cum_fraction=migration_cost(state.cum_swaps, state.cum_attempts),
        cum_swaps=state.cum_swaps,
        cum_attempts=state.cum_attempts,
        cum_unique_movers=int(state.moved.sum()),
        unique_mover_fraction=float(state.moved.sum() / n),
    )
    if not measure:
        return rep
    # sampling seeded by (run seed, iteration): reported values do not
    # depend on how often metrics are collected
    sample_rng = np.random.default_rng([state.config.seed, state.iteration])
    measured = measure_snapshot(state.graph, state.ring, state.placement,
                                options=options, sample_seed=sample_rng)
    for name, value in measured.items():
        setattr(rep, name, value)
    return rep


def run_iteration(state: EngineState, measure: bool = True,
                  options: Optional[MetricsOptions] = None) -> IterationReport:
    """Advance one iteration and return its metrics row.

    With ``measure`` False only the cheap accounting columns are filled
    (swaps, attempts, fractions), which keeps long runs fast.
    """
    swaps, attempts = _advance(state)
    state.iteration += 1
    state.cum_swaps += int(swaps)
    state.cum_attempts += int(attempts)
    return _report(state, int(swaps), int(attempts), measure, options)


def run(state: EngineState, metrics_every: int = 1,
        options: Optional[MetricsOptions] = None,
        on_report: Optional[Callable[[IterationReport], None]] = None) -> list[IterationReport]:
    """Run until ``config.iterations``, one report row per iteration.

    Row 0 measures the untouched random placement.  Full metrics are
    collected every ``metrics_every`` iterations and always on the final
    one; other rows carry only swap/attempt accounting.  Deterministic
    given (graph, config): re-running with the same seed reproduces the
    rows byte for byte.
    """
    reports = []
    if state.iteration == 0:
        baseline = _report(state, 0, 0, True, options)
        reports.append(baseline)
        if on_report is not None:
            on_report(baseline)
    total = state.config.iterations
    for t in range(state.iteration + 1, total + 1):
        measure = t == total or (metrics_every > 0 and t % metrics_every == 0)
        rep = run_iteration(state, measure=measure, options=options)
        reports.append(rep)
        if on_report is not None:
            on_report(rep)
    return reports
