"""Undirected social graph: loading, adjacency queries and tie strengths.

The graph is stored in CSR form (``indptr``/``indices``) with user ids
densely remapped to ``0..n-1``.  Original ids survive in a side table so
reports can refer back to the input file.  Tie strength between two users
is the common-neighbour ratio ``|N_i ∩ N_j| / |N_i|`` (note: normalised by
the caller's degree, so it is deliberately asymmetric), or alternatively
one minus the ring distance between externally supplied reference ids.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np
import scipy.sparse as sp


class EdgeListError(ValueError):
    """Raised for unreadable, malformed or empty edge-list input."""


class SocialGraph:
    """Immutable undirected graph with sorted adjacency sets.

    Build through :func:`load_edge_list` or :meth:`from_edges`; instances
    are safe to share across threads after construction.
    """

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray,
                 original_ids: Optional[np.ndarray] = None, meta: Optional[dict] = None):
        if n <= 0:
            raise EdgeListError("graph has no nodes")
        self.n = int(n)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        if original_ids is None:
            original_ids = np.arange(n, dtype=np.int64)
        self.original_ids = np.ascontiguousarray(original_ids, dtype=np.int64)
        self.meta = dict(meta or {})
        self.degrees = np.diff(self.indptr)
        self.edge_count = int(self.indices.size // 2)
        for arr in (self.indptr, self.indices, self.original_ids, self.degrees):
            arr.setflags(write=False)
        self._edge_keys: Optional[set] = None
        self._packed_sorted: Optional[np.ndarray] = None
        self._common_counts: Optional[np.ndarray] = None

    # -- construction ------------------------------------------------------

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]],
                   original_ids: Optional[np.ndarray] = None,
                   meta: Optional[dict] = None) -> "SocialGraph":
        """Build from an iterable of (i, j) pairs over dense ids.

        Self-loops and duplicates are dropped; both directions are added.
        """
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        arr = arr[arr[:, 0] != arr[:, 1]]
        if arr.size == 0:
            # edgeless is fine if the caller pins the user set explicitly
            if original_ids is None:
                raise EdgeListError("graph has no edges")
            n = len(original_ids)
            return cls(n, np.zeros(n + 1, dtype=np.int64),
                       np.empty(0, dtype=np.int64),
                       original_ids=original_ids, meta=meta)
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        base = int(hi.max()) + 1
        packed = np.unique(lo * base + hi)
        lo = packed // base
        hi = packed % base
        n = int(max(lo.max(), hi.max())) + 1
        if original_ids is not None:
            n = max(n, len(original_ids))
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(n, indptr, dst, original_ids=original_ids, meta=meta)

    # -- queries -----------------------------------------------------------

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbour ids of user ``i`` (a read-only view)."""
        self._check_id(i)
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        self._check_id(i)
        return int(self.degrees[i])

    def has_edge(self, i: int, j: int) -> bool:
        return self._pack(i, j) in self.edge_keys

    @property
    def edge_keys(self) -> set:
        """Set of packed directed keys ``i * n + j`` for O(1) membership."""
        if self._edge_keys is None:
            src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
            self._edge_keys = set((src * self.n + self.indices).tolist())
        return self._edge_keys

    def edge_membership(self, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        """Vectorized has_edge over parallel src/dst arrays."""
        if self._packed_sorted is None:
            s = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
            self._packed_sorted = s * self.n + self.indices
        packed = np.asarray(src, dtype=np.int64) * self.n + np.asarray(dst, dtype=np.int64)
        pos = np.searchsorted(self._packed_sorted, packed)
        pos_c = np.minimum(pos, self._packed_sorted.size - 1)
        return (pos < self._packed_sorted.size) & (self._packed_sorted[pos_c] == packed)

    def edges(self) -> Iterator[tuple[int, int]]:
        """Yield each undirected edge once, as (i, j) with i < j."""
        for i in range(self.n):
            for j in self.neighbors(i):
                if i < int(j):
                    yield i, int(j)

    def edge_array(self) -> np.ndarray:
        """All undirected edges as an (E, 2) array with src < dst."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    def adjacency_matrix(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.int64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def common_neighbor_counts(self) -> np.ndarray:
        """Per directed adjacency entry, |N_i ∩ N_j|, aligned with ``indices``."""
        if self._common_counts is None:
            a = self.adjacency_matrix()
            common = (a @ a).multiply(a).tocsr()
            counts = np.zeros(self.indices.size, dtype=np.int64)
            # common may drop explicit zeros; align by position
            for i in range(self.n):
                row = common.getrow(i)
                if row.nnz == 0:
                    continue
                nbrs = self.neighbors(i)
                pos = np.searchsorted(nbrs, row.indices)
                counts[self.indptr[i] + pos] = row.data
            counts.setflags(write=False)
            self._common_counts = counts
        return self._common_counts

    def average_clustering(self) -> float:
        """Mean local clustering coefficient (degree < 2 counts as 0)."""
        counts = self.common_neighbor_counts()
        tri = np.zeros(self.n, dtype=np.float64)
        np.add.at(tri, np.repeat(np.arange(self.n), self.degrees), counts)
        deg = self.degrees.astype(np.float64)
        denom = deg * (deg - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            local = np.where(denom > 0, tri / denom, 0.0)
        return float(local.mean())

    def induced_subgraph(self, nodes: np.ndarray) -> "SocialGraph":
        """Subgraph on the given dense ids, remapped to 0..len(nodes)-1."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        lookup = -np.ones(self.n, dtype=np.int64)
        lookup[nodes] = np.arange(nodes.size)
        edges = []
        for i in nodes:
            for j in self.neighbors(int(i)):
                if i < j and lookup[j] >= 0:
                    edges.append((lookup[i], lookup[j]))
        return SocialGraph.from_edges(edges, original_ids=self.original_ids[nodes],
                                      meta={"parent_edges": self.edge_count})

    def bfs_ball(self, start: int, size: int) -> np.ndarray:
        """Dense ids of the first ``size`` nodes reached by BFS from ``start``."""
        seen = np.zeros(self.n, dtype=bool)
        seen[start] = True
        out = [start]
        frontier = [start]
        while frontier and len(out) < size:
            nxt = []
            for u in frontier:
                for v in self.neighbors(u):
                    v = int(v)
                    if not seen[v]:
                        seen[v] = True
                        out.append(v)
                        nxt.append(v)
                        if len(out) >= size:
                            break
                if len(out) >= size:
                    break
            frontier = nxt
        return np.asarray(out[:size], dtype=np.int64)

    def _check_id(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise KeyError(f"unknown user id {i} (graph has {self.n} users)")

    def _pack(self, i: int, j: int) -> int:
        self._check_id(i)
        self._check_id(j)
        return i * self.n + j

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SocialGraph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.original_ids, other.original_ids))

    def __repr__(self) -> str:
        return f"SocialGraph(n={self.n}, edges={self.edge_count})"


def load_edge_list(path, directed_input: bool = False) -> SocialGraph:
    """Load a SNAP-style edge list: '#' comment lines, then "src dst" pairs.

    Ids are densely remapped (sorted by original id); original ids are kept
    in ``graph.original_ids``.  Directed input is symmetrised; duplicate
    edges and self-loops are dropped either way.  Gzipped files work too.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rt") as fh:
            raw = fh.readlines()
    except OSError as exc:
        raise EdgeListError(f"cannot read {path}: {exc}") from exc

    arcs = []
    for lineno, line in enumerate(raw, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"{path}:{lineno}: expected two ids, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(f"{path}:{lineno}: non-integer id in {line!r}") from None
        arcs.append((u, v))
    if not arcs:
        raise EdgeListError(f"{path}: no edges found")

    arr = np.asarray(arcs, dtype=np.int64)
    original = np.unique(arr)
    dense = np.searchsorted(original, arr)
    meta = {
        "path": str(path),
        "input_arcs": len(arcs),
        "directed_input": bool(directed_input),
    }
    g = SocialGraph.from_edges(dense, original_ids=original, meta=meta)
    g.meta["edges_after_symmetrization"] = g.edge_count
    return g


def write_edge_list(g: SocialGraph, path) -> None:
    """Write each undirected edge once using original ids ("u v" per line)."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# socialdht edge list: {g.n} nodes, {g.edge_count} edges\n")
        for i, j in g.edges():
            fh.write(f"{g.original_ids[i]} {g.original_ids[j]}\n")


@dataclass
class StrengthProvider:
    """Tie strength between users.

    mode "common_neighbors": s_ij = |N_i ∩ N_j| / |N_i|, in [0, 1] and 0 for
    degree-0 callers.  mode "id_distance": s_ij = 1 - ring distance between
    the reference ids of i and j, in (0, 1] and symmetric (used by the
    overlay self-relabeling experiment, where triangles are scarce).
    """

    mode: str = "common_neighbors"
    reference_ids: Optional[np.ndarray] = None
    literal_abs: bool = False
    _memo: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode not in ("common_neighbors", "id_distance"):
            raise ValueError(f"unknown strength mode {self.mode!r}")
        if self.mode == "id_distance":
            if self.reference_ids is None:
                raise ValueError("id_distance mode needs reference_ids")
            self.reference_ids = np.asarray(self.reference_ids, dtype=np.float64)

    def strength(self, g: SocialGraph, i: int, j: int) -> float:
        if i == j:
            raise ValueError("strength is undefined for i == j")
        g._check_id(i)
        g._check_id(j)
        if self.mode == "id_distance":
            d = abs(float(self.reference_ids[i]) - float(self.reference_ids[j]))
            if not self.literal_abs:
                d = min(d, 1.0 - d)
            return 1.0 - d
        ni = g.neighbors(i)
        if ni.size == 0:
            return 0.0
        common = np.intersect1d(ni, g.neighbors(j), assume_unique=True).size
        return common / ni.size

    def neighbor_strengths(self, g: SocialGraph, i: int) -> np.ndarray:
        """Strengths from ``i`` aligned with ``g.neighbors(i)`` (memoized)."""
        cached = self._memo.get(i)
        if cached is not None:
            return cached
        nbrs = g.neighbors(i)
        if self.mode == "id_distance":
            d = np.abs(self.reference_ids[i] - self.reference_ids[nbrs])
            if not self.literal_abs:
                d = np.minimum(d, 1.0 - d)
            out = 1.0 - d
        elif nbrs.size == 0:
            out = np.zeros(0, dtype=np.float64)
        else:
            counts = g.common_neighbor_counts()[g.indptr[i]:g.indptr[i + 1]]
            out = counts / nbrs.size
        out.setflags(write=False)
        self._memo[i] = out
        return out

    def all_neighbor_strengths(self, g: SocialGraph) -> np.ndarray:
        """Strength per directed adjacency entry, aligned with ``g.indices``."""
        if self.mode == "id_distance":
            src = np.repeat(np.arange(g.n), g.degrees)
            d = np.abs(self.reference_ids[src] - self.reference_ids[g.indices])
            if not self.literal_abs:
                d = np.minimum(d, 1.0 - d)
            return 1.0 - d
        counts = g.common_neighbor_counts().astype(np.float64)
        deg = np.repeat(g.degrees, g.degrees).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(deg > 0, counts / deg, 0.0)


def strength(g: SocialGraph, i: int, j: int, provider: StrengthProvider) -> float:
    """Tie strength s_ij; see :class:`StrengthProvider` for the two modes."""
    return provider.strength(g, i, j)


def top_k_strongest(g: SocialGraph, i: int, k: int, provider: StrengthProvider) -> list[int]:
    """The min(k, deg) neighbours of ``i`` by descending strength.

    Ties break by ascending user id, so the result is deterministic.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    nbrs = g.neighbors(i)
    if nbrs.size == 0:
        return []
    s = provider.neighbor_strengths(g, i)
    order = np.lexsort((nbrs, -s))
    return [int(x) for x in nbrs[order][:k]]
