import numpy as np
import pytest

from socialdht import Placement, Ring, SocialGraph
from socialdht.engine import (EngineState, GossipConfig, _smart_lists,
                              _strongest_friends)
from socialdht.graph import StrengthProvider


@pytest.fixture
def quad_graph() -> SocialGraph:
    # edges {(0,1),(0,2),(1,2),(0,3)}: s(0,1)=1/3, s(1,0)=1/2
    return SocialGraph.from_edges([(0, 1), (0, 2), (1, 2), (0, 3)])


@pytest.fixture
def triangle_plus_loner() -> SocialGraph:
    # triangle 0,1,2 plus isolated user 3
    return SocialGraph.from_edges([(0, 1), (0, 2), (1, 2)],
                                  original_ids=np.arange(4))


def cycle_ring(ids) -> Ring:
    """Ring with the given slot ids and no long links."""
    ids = np.asarray(ids, dtype=np.float64)
    return Ring(ids, 0, np.zeros((ids.size, 0), dtype=np.int64))


def make_state(g: SocialGraph, ring: Ring, user_slot, *,
               provider: StrengthProvider = None, **config_kw) -> EngineState:
    """EngineState over a hand-built ring/placement for worked examples."""
    config = GossipConfig(**{"iterations": 1, **config_kw})
    provider = provider or StrengthProvider(
        mode=config.strength_mode, reference_ids=config.reference_ids,
        literal_abs=config.literal_abs)
    strengths = provider.all_neighbor_strengths(g)
    smart_indptr, smart_indices = _smart_lists(g, strengths, config.smart_width)
    return EngineState(
        graph=g, ring=ring,
        placement=Placement(np.asarray(user_slot, dtype=np.int64)),
        config=config, provider=provider, strengths=strengths,
        rng=np.random.default_rng(config.seed),
        moved=np.zeros(g.n, dtype=bool),
        greedy_m=_strongest_friends(g, strengths),
        smart_indptr=smart_indptr, smart_indices=smart_indices,
        hop_mat=np.zeros((0, 0), dtype=np.uint16))


def random_graph(n: int, avg_degree: float, seed: int) -> SocialGraph:
    """Connected-ish ER-style graph for routing/metric oracles."""
    rng = np.random.default_rng(seed)
    m = int(n * avg_degree / 2)
    src = rng.integers(0, n, size=m)
    dst = rng.integers(0, n, size=m)
    keep = src != dst
    edges = np.column_stack([src[keep], dst[keep]])
    chain = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    return SocialGraph.from_edges(np.concatenate([edges, chain]),
                                  original_ids=np.arange(n))
