"""Small connected subgraphs, automorphism orbits, and global position indexing.

Subgraphs are the building blocks of the network. Every node slot of every
subgraph in a model gets a distinct global position index; orbits group the
slots that are interchangeable under the subgraph's automorphisms.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

MAX_SUBGRAPH_NODES = 7


class SubgraphError(ValueError):
    """Raised for malformed subgraph definitions."""


@dataclass(frozen=True, eq=False)
class Subgraph:
    """A small connected simple graph with a stable node ordering.

    The node ordering is part of the definition: it fixes which global
    position each local node maps to, so library subgraphs document their
    ordering (e.g. the square-with-diagonal lists its degree-3 nodes last).
    """

    id: str
    adj: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.adj, dtype=int)
        object.__setattr__(self, "adj", a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise SubgraphError(f"{self.id}: adjacency must be square")
        n = a.shape[0]
        if not 2 <= n <= MAX_SUBGRAPH_NODES:
            raise SubgraphError(
                f"{self.id}: node count {n} outside supported range "
                f"2..{MAX_SUBGRAPH_NODES}"
            )
        if not np.array_equal(a, a.T):
            raise SubgraphError(f"{self.id}: adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise SubgraphError(f"{self.id}: self-loops are not allowed")
        if not np.isin(a, (0, 1)).all():
            raise SubgraphError(f"{self.id}: adjacency entries must be 0/1")
        if not self._connected(a):
            raise SubgraphError(f"{self.id}: subgraph must be connected")

    @staticmethod
    def _connected(a: np.ndarray) -> bool:
        n = a.shape[0]
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(a[u]):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        return len(seen) == n

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def degree(self, v: int) -> int:
        return int(self.adj[v].sum())

    def neighbors(self, v: int) -> list[int]:
        return [int(u) for u in np.flatnonzero(self.adj[v])]

    def edges(self) -> list[tuple[int, int]]:
        n = self.n
        return [(u, v) for u in range(n) for v in range(u + 1, n)
                if self.adj[u, v]]

    def triangles_at(self, v: int) -> int:
        """Number of triangles of the subgraph incident to node v."""
        nbrs = self.neighbors(v)
        return sum(
            int(self.adj[u, w])
            for i, u in enumerate(nbrs) for w in nbrs[i + 1:]
        )

    def renamed(self, new_id: str) -> "Subgraph":
        return Subgraph(new_id, self.adj.copy())


@dataclass(frozen=True)
class OrbitPartition:
    """Disjoint node-index sets covering 0..n-1, sorted by smallest member."""

    orbits: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.orbits)

    def orbit_of(self, v: int) -> int:
        for k, orb in enumerate(self.orbits):
            if v in orb:
                return k
        raise KeyError(v)


def automorphisms(s: Subgraph) -> list[tuple[int, ...]]:
    """All adjacency-preserving permutations, by exhaustive search (n <= 7)."""
    a = s.adj
    n = s.n
    perms = []
    for p in itertools.permutations(range(n)):
        if all(a[p[u], p[v]] == a[u, v]
               for u in range(n) for v in range(u + 1, n)):
            perms.append(p)
    return perms


def compute_orbits(s: Subgraph) -> OrbitPartition:
    """Orbit partition of a subgraph's nodes under its full automorphism group.

    Deterministic: orbits are sorted by their smallest member.
    """
    n = s.n
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for p in automorphisms(s):
        for v in range(n):
            ru, rv = find(v), find(p[v])
            if ru != rv:
                parent[ru] = rv
    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    orbits = sorted((tuple(sorted(g)) for g in groups.values()),
                    key=lambda o: o[0])
    return OrbitPartition(tuple(orbits))


# Orbit keys are (subgraph id, orbit index within that subgraph).
OrbitKey = tuple[str, int]


@dataclass(frozen=True)
class PositionIndex:
    """Contiguous global indexing of every node slot of every subgraph.

    Positions are numbered 0..m-1 in subgraph declaration order, local node
    order within each subgraph.
    """

    subgraphs: tuple[Subgraph, ...]
    orbit_partitions: tuple[OrbitPartition, ...]
    subgraph_of: tuple[tuple[str, int], ...]   # position -> (id, local node)
    orbit_of: tuple[OrbitKey, ...]             # position -> orbit key
    offsets: dict[str, int]                    # id -> first global position

    @property
    def m(self) -> int:
        return len(self.subgraph_of)

    def position(self, subgraph_id: str, local: int) -> int:
        return self.offsets[subgraph_id] + local

    def positions_of(self, subgraph_id: str) -> range:
        off = self.offsets[subgraph_id]
        n = next(s.n for s in self.subgraphs if s.id == subgraph_id)
        return range(off, off + n)

    def orbit_keys(self) -> list[OrbitKey]:
        """All orbit keys, in declaration order."""
        keys: list[OrbitKey] = []
        for s, part in zip(self.subgraphs, self.orbit_partitions):
            keys.extend((s.id, k) for k in range(len(part)))
        return keys

    def orbit_positions(self, key: OrbitKey) -> tuple[int, ...]:
        """Global positions belonging to one orbit."""
        sid, k = key
        part = self.orbit_partitions[
            next(i for i, s in enumerate(self.subgraphs) if s.id == sid)]
        off = self.offsets[sid]
        return tuple(off + v for v in part.orbits[k])

    def subgraph(self, subgraph_id: str) -> Subgraph:
        for s in self.subgraphs:
            if s.id == subgraph_id:
                return s
        raise KeyError(subgraph_id)


def build_position_index(subgraphs: list[Subgraph]) -> PositionIndex:
    if not subgraphs:
        raise SubgraphError("at least one subgraph is required")
    ids = [s.id for s in subgraphs]
    if len(set(ids)) != len(ids):
        raise SubgraphError(f"duplicate subgraph ids in {ids}")
    parts = tuple(compute_orbits(s) for s in subgraphs)
    subgraph_of: list[tuple[str, int]] = []
    orbit_of: list[OrbitKey] = []
    offsets: dict[str, int] = {}
    for s, part in zip(subgraphs, parts):
        offsets[s.id] = len(subgraph_of)
        for v in range(s.n):
            subgraph_of.append((s.id, v))
            orbit_of.append((s.id, part.orbit_of(v)))
    return PositionIndex(tuple(subgraphs), parts, tuple(subgraph_of),
                         tuple(orbit_of), offsets)


def _cycle(n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=int)
    for v in range(n):
        a[v, (v + 1) % n] = a[(v + 1) % n, v] = 1
    return a


def _complete(n: int) -> np.ndarray:
    return np.ones((n, n), dtype=int) - np.eye(n, dtype=int)


def _diag_square() -> np.ndarray:
    # Nodes 0,1 have degree 2; nodes 2,3 have degree 3 (the diagonal).
    a = np.zeros((4, 4), dtype=int)
    for u, v in [(0, 2), (2, 1), (1, 3), (3, 0), (2, 3)]:
        a[u, v] = a[v, u] = 1
    return a


LIBRARY: dict[str, Subgraph] = {
    "edge": Subgraph("edge", _complete(2)),
    "triangle": Subgraph("triangle", _complete(3)),
    "square": Subgraph("square", _cycle(4)),
    "pentagon": Subgraph("pentagon", _cycle(5)),
    "hexagon": Subgraph("hexagon", _cycle(6)),
    "diag_square": Subgraph("diag_square", _diag_square()),
    "k4": Subgraph("k4", _complete(4)),
    "k5": Subgraph("k5", _complete(5)),
    "k6": Subgraph("k6", _complete(6)),
}

# The five-subgraph enumeration used throughout the worked examples; it
# yields m = 17 global positions.
FIVE_SUBGRAPH_SET = [LIBRARY["edge"], LIBRARY["triangle"], LIBRARY["k4"],
                     LIBRARY["square"], LIBRARY["diag_square"]]
