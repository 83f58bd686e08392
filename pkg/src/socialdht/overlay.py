"""Fixed Symphony ring, greedy routing and the mutable user/slot placement.

A :class:`Ring` is immutable once built: slot identifiers live in (0,1],
each slot is wired to its ring neighbours plus up to ``k`` harmonic
long-range links.  Users occupy slots through a :class:`Placement`
bijection and migrate by swapping occupancy; finger tables never change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

LONG_LINK_RETRIES = 32  # redraws per link before leaving it unfilled


class Ring:
    """Sorted slot identifiers plus per-slot long links.

    Short links are implicit: slot i's successor is (i+1) % n and its
    predecessor (i-1) % n, since ``ids`` is sorted.  ``long_links`` is an
    (n, k) int array padded with -1 for unfilled entries.
    """

    def __init__(self, ids: np.ndarray, k: int, long_links: np.ndarray):
        ids = np.ascontiguousarray(ids, dtype=np.float64)
        if ids.size < 3:
            raise ValueError("ring needs at least 3 slots")
        if not (np.all(np.diff(ids) > 0) and ids[0] > 0.0 and ids[-1] <= 1.0):
            raise ValueError("slot ids must be strictly increasing within (0, 1]")
        self.ids = ids
        self.n = int(ids.size)
        self.k = int(k)
        self.long_links = np.ascontiguousarray(long_links, dtype=np.int64).reshape(self.n, self.k)
        self.ids.setflags(write=False)
        self.long_links.setflags(write=False)

    def successor(self, slot: int) -> int:
        return (slot + 1) % self.n

    def predecessor(self, slot: int) -> int:
        return (slot - 1) % self.n

    def fingers(self, slot: int) -> list[int]:
        """Outgoing finger entries: predecessor, successor, filled long links."""
        out = [self.predecessor(slot), self.successor(slot)]
        out.extend(int(t) for t in self.long_links[slot] if t >= 0)
        return out

    def __repr__(self) -> str:
        return f"Ring(n={self.n}, k={self.k})"


@dataclass
class RoutePath:
    """A greedy route: visited slot indices from source to destination."""

    visited: list[int]

    @property
    def hop_count(self) -> int:
        return len(self.visited) - 1


class Placement:
    """Mutable bijection between users and slots (always kept inverse)."""

    def __init__(self, user_slot: np.ndarray):
        self.user_slot = np.asarray(user_slot, dtype=np.int64).copy()
        n = self.user_slot.size
        self.slot_user = np.empty(n, dtype=np.int64)
        self.slot_user[self.user_slot] = np.arange(n, dtype=np.int64)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Placement":
        return cls(rng.permutation(n))

    @property
    def n(self) -> int:
        return self.user_slot.size

    def slot_of(self, user: int) -> int:
        return int(self.user_slot[user])

    def user_at(self, slot: int) -> int:
        return int(self.slot_user[slot])

    def swap(self, a: int, b: int) -> None:
        if a == b:
            raise ValueError("cannot swap a user with itself")
        sa, sb = self.user_slot[a], self.user_slot[b]
        self.user_slot[a], self.user_slot[b] = sb, sa
        self.slot_user[sa], self.slot_user[sb] = b, a

    def copy(self) -> "Placement":
        return Placement(self.user_slot)

    def check_bijection(self) -> bool:
        n = self.n
        return (np.array_equal(np.sort(self.user_slot), np.arange(n))
                and np.array_equal(self.slot_user[self.user_slot], np.arange(n)))


def swap_users(p: Placement, a: int, b: int) -> None:
    """Exchange the slots of users ``a`` and ``b`` in place."""
    p.swap(a, b)


def circular_distance(a: float, b: float, literal_abs: bool = False) -> float:
    """Ring distance min(|a-b|, 1-|a-b|); ``literal_abs`` keeps plain |a-b|.

    The plain form ignores wraparound (0.01 and 0.99 are ring-adjacent),
    so the circular form is the default cost distance.
    """
    d = abs(a - b)
    if literal_abs:
        return d
    return min(d, 1.0 - d)


def manager_of(ring: Ring, point: float) -> int:
    """Slot managing ``point``: smallest slot id >= point, wrapping past the top."""
    if not 0.0 < point <= 1.0:
        raise ValueError("point must lie in (0, 1]")
    idx = int(np.searchsorted(ring.ids, point, side="left"))
    return 0 if idx == ring.n else idx


def harmonic_distance(n: int, u: float) -> float:
    """Symphony's long-link distance n^(u-1) for u in [0,1); lies in [1/n, 1]."""
    return n ** (u - 1.0)


def _draw_long_links(ids: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Harmonic long links per slot; -1 marks entries left unfilled.

    Each draw picks u ~ U(0,1), walks n^(u-1) clockwise and targets the
    managing slot; self-links and duplicates are redrawn up to
    LONG_LINK_RETRIES times.
    """
    n = ids.size
    links = -np.ones((n, k), dtype=np.int64)
    if k == 0:
        return links
    for s in range(n):
        chosen: set[int] = set()
        for slot_link in range(k):
            target = -1
            for _ in range(LONG_LINK_RETRIES):
                u = rng.random()
                p = (ids[s] + harmonic_distance(n, u)) % 1.0
                if p == 0.0:
                    p = 1.0
                idx = int(np.searchsorted(ids, p, side="left"))
                if idx == n:
                    idx = 0
                if idx != s and idx not in chosen:
                    target = idx
                    break
            if target >= 0:
                links[s, slot_link] = target
                chosen.add(target)
    return links


def build_ring(n: int, k: int, seed, id_mode: str = "uniform") -> Ring:
    """Build a Symphony ring of ``n`` slots with ``k`` long links per slot.

    id_mode "uniform" draws n distinct ids from (0,1], the usual setting;
    "evenly_spaced" uses i/n, handy for exact unit tests.  ``seed`` may be
    an int or a numpy SeedSequence/Generator.
    """
    if n < 3:
        raise ValueError("ring needs at least 3 slots")
    if k < 0:
        raise ValueError("k must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if id_mode == "uniform":
        ids = 1.0 - rng.random(n)
        ids = np.unique(ids)
        while ids.size < n:  # measure-zero collisions still need handling
            extra = 1.0 - rng.random(n - ids.size)
            ids = np.unique(np.concatenate([ids, extra]))
        ids.sort()
    elif id_mode == "evenly_spaced":
        ids = np.arange(1, n + 1, dtype=np.float64) / n
    else:
        raise ValueError(f"unknown id_mode {id_mode!r}")
    links = _draw_long_links(ids, k, rng)
    return Ring(ids, k, links)


def default_k(n: int) -> int:
    """Default long-link budget, ceil(log2 n)."""
    return max(1, math.ceil(math.log2(n)))


def clockwise_gap(n: int, a: int, b: int) -> int:
    """Clockwise slot-index distance from a to b (0 iff a == b)."""
    return (b - a) % n


def greedy_route(ring: Ring, src: int, dst: int) -> RoutePath:
    """Unidirectional clockwise greedy route from slot ``src`` to ``dst``.

    At each step the successor and the slot's long links compete; the one
    ending closest (clockwise) to the destination wins, overshooting
    candidates are discarded.  The successor always qualifies, so the
    route terminates in at most n-1 hops.

    Minimising clockwise id distance is equivalent to minimising the
    clockwise index gap (ids are sorted), so the loop is pure integer
    arithmetic.
    """
    n = ring.n
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError("invalid slot index")
    visited = [src]
    cur = src
    while cur != dst:
        gap = clockwise_gap(n, cur, dst)
        best = (cur + 1) % n  # successor: gap 1, never overshoots
        best_rem = gap - 1
        for t in ring.long_links[cur]:
            t = int(t)
            if t < 0:
                continue
            step = clockwise_gap(n, cur, t)
            if step <= gap:
                rem = gap - step
                if rem < best_rem:
                    best = t
                    best_rem = rem
        assert clockwise_gap(n, cur, best) >= 1, "routing made no progress"
        cur = best
        visited.append(cur)
    return RoutePath(visited)


def rewire_fingers_to_friends(ring: Ring, placement: Placement, graph, seed) -> Ring:
    """Baseline heuristic: re-target long links at friends of the occupant.

    For each harmonic draw the slot picks, among its occupant's friends'
    slots not already targeted, the one circularly closest to the sampled
    point.  Occupants without friends keep plain harmonic targets.  The
    gossip algorithm never uses this; it exists for comparison runs.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = ring.n
    k = ring.k
    links = -np.ones((n, k), dtype=np.int64)
    for s in range(n):
        occupant = placement.user_at(s)
        friend_slots = placement.user_slot[graph.neighbors(occupant)]
        if friend_slots.size == 0:
            links[s] = ring.long_links[s]  # no friends: keep harmonic targets
            continue
        chosen: set[int] = set()
        for li in range(k):
            u = rng.random()
            p = (ring.ids[s] + harmonic_distance(n, u)) % 1.0
            if p == 0.0:
                p = 1.0
            best = -1
            best_d = 2.0
            for fs in friend_slots:
                fs = int(fs)
                if fs in chosen or fs == s:
                    continue
                d = circular_distance(float(ring.ids[fs]), p)
                if d < best_d or (d == best_d and fs < best):
                    best = fs
                    best_d = d
            if best >= 0:
                links[s, li] = best
                chosen.add(best)
    return Ring(ring.ids.copy(), k, links)


CHECKPOINT_VERSION = 1


def save_checkpoint(path, ring: Ring, placement: Optional[Placement] = None) -> None:
    """Write ring + placement as versioned text, one slot per line.

    Line format: ``slot_id occupant t1,t2,...`` with ``-`` when a slot has
    no long links.  Floats use repr for exact round-tripping.  Without a
    placement the identity mapping (user i at slot i) is recorded.
    """
    path = Path(path)
    if placement is None:
        placement = Placement(np.arange(ring.n, dtype=np.int64))
    lines = [f"# socialdht-checkpoint v{CHECKPOINT_VERSION}",
             f"# n={ring.n} k={ring.k}"]
    for s in range(ring.n):
        targets = [str(int(t)) for t in ring.long_links[s] if t >= 0]
        tfield = ",".join(targets) if targets else "-"
        lines.append(f"{float(ring.ids[s])!r} {placement.user_at(s)} {tfield}")
    path.write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[Ring, Placement]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("# socialdht-checkpoint v"):
        raise ValueError(f"{path}: not a socialdht checkpoint")
    version = int(lines[0].rsplit("v", 1)[1])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = dict(kv.split("=") for kv in lines[1].lstrip("# ").split())
    n, k = int(header["n"]), int(header["k"])
    body = lines[2:]
    if len(body) != n:
        raise ValueError(f"{path}: expected {n} slot lines, found {len(body)}")
    ids = np.empty(n, dtype=np.float64)
    slot_user = np.empty(n, dtype=np.int64)
    links = -np.ones((n, k), dtype=np.int64)
    for s, line in enumerate(body):
        id_str, occ_str, tfield = line.split()
        ids[s] = float(id_str)
        slot_user[s] = int(occ_str)
        if tfield != "-":
            targets = [int(x) for x in tfield.split(",")]
            links[s, :len(targets)] = targets
    ring = Ring(ids, k, links)
    user_slot = np.empty(n, dtype=np.int64)
    user_slot[slot_user] = np.arange(n, dtype=np.int64)
    return ring, Placement(user_slot)
