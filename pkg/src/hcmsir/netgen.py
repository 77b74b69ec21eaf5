"""Hyperstub degree sequence sampling and network assembly.

Sequences are drawn i.i.d. per node from the orbit marginals and resampled
wholesale until the cardinality constraints hold. Assembly fills hyperstub
bins and wires subgraph copies by uniform sampling without replacement,
rejecting draws that would create self- or duplicate edges.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import NetworkModel
from .subgraphs import OrbitKey


class ConstraintError(RuntimeError):
    """Cardinality constraints could not be satisfied."""


class AssemblyError(RuntimeError):
    """Wiring got stuck on unresolvable collisions; resample the sequence."""


@dataclass(frozen=True)
class HyperstubSequence:
    """Per-node hyperstub counts; one column per orbit."""

    counts: np.ndarray                 # shape (N, H), nonnegative ints
    orbit_keys: tuple[OrbitKey, ...]

    @property
    def n_nodes(self) -> int:
        return self.counts.shape[0]

    def column(self, key: OrbitKey) -> np.ndarray:
        return self.counts[:, self.orbit_keys.index(key)]


def sample_sequences(model: NetworkModel, n: int,
                     rng: np.random.Generator | int | None = None,
                     max_attempts: int = 1000) -> HyperstubSequence:
    """Draw a constraint-satisfying hyperstub degree sequence for n nodes.

    Multi-orbit subgraphs draw one orbit's column and obtain partner columns
    as random permutations of it, which keeps per-subgraph copy counts
    consistent; this requires the partner orbits to share the first orbit's
    marginal and size.
    """
    rng = np.random.default_rng(rng)
    index = model.index
    if n < max(s.n for s in index.subgraphs):
        raise ConstraintError(
            f"n={n} smaller than the largest subgraph")
    keys = index.orbit_keys()

    for _ in range(max_attempts):
        cols = {}
        ok = True
        for s, part in zip(index.subgraphs, index.orbit_partitions):
            sizes = [len(o) for o in part.orbits]
            fams = [model.marginal((s.id, k)) for k in range(len(part))]
            if len(part) > 1:
                if any(f != fams[0] for f in fams) or any(
                        sz != sizes[0] for sz in sizes):
                    raise ConstraintError(
                        f"{s.id}: partner orbits must share marginal and size "
                        f"for the permutation pairing device")
            first = fams[0].sample(rng, n)
            if int(first.sum()) % sizes[0] != 0:
                ok = False
                break
            cols[(s.id, 0)] = first
            for k in range(1, len(part)):
                cols[(s.id, k)] = rng.permutation(first)
        if ok:
            counts = np.column_stack([cols[k] for k in keys])
            return HyperstubSequence(counts, tuple(keys))
    raise ConstraintError(
        f"no constraint-satisfying sequence in {max_attempts} attempts "
        f"(orbit column sums must be divisible by the orbit size)")


@dataclass
class Network:
    """Undirected simple network with subgraph-copy provenance."""

    n_nodes: int
    edges: list[tuple[int, int]] = field(default_factory=list)
    adj: list[list[int]] = field(default_factory=list)
    provenance: dict[str, list[tuple[int, ...]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.adj:
            self.adj = [[] for _ in range(self.n_nodes)]
            for u, v in self.edges:
                self.adj[u].append(v)
                self.adj[v].append(u)

    def degree_sequence(self) -> np.ndarray:
        return np.array([len(a) for a in self.adj])


def _draw_distinct(rng: np.random.Generator, limit: int, k: int) -> list[int]:
    """k distinct integers below limit; cheap path for small k."""
    if k > limit:
        raise AssemblyError("hyperstub bin exhausted")
    for _ in range(200):
        idx = [int(rng.integers(limit)) for _ in range(k)]
        if len(set(idx)) == k:
            return idx
    return list(rng.choice(limit, size=k, replace=False))


def assemble(seq: HyperstubSequence, model: NetworkModel,
             rng: np.random.Generator | int | None = None,
             retry_budget: int = 100) -> Network:
    """Wire subgraph copies from hyperstub bins (rejection on collisions)."""
    rng = np.random.default_rng(rng)
    index = model.index
    n = seq.n_nodes
    edge_set: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    adj: list[list[int]] = [[] for _ in range(n)]
    provenance: dict[str, list[tuple[int, ...]]] = {}

    bins: dict[OrbitKey, list[int]] = {}
    for key in seq.orbit_keys:
        col = seq.column(key)
        bins[key] = list(np.repeat(np.arange(n), col))

    for s, part in zip(index.subgraphs, index.orbit_partitions):
        sub_edges = s.edges()
        orbit_nodes = [list(o) for o in part.orbits]
        sizes = [len(o) for o in orbit_nodes]
        n_copies = len(bins[(s.id, 0)]) // sizes[0]
        placed = provenance.setdefault(s.id, [])
        for _ in range(n_copies):
            for attempt in range(retry_budget):
                picks = {}
                assign = [0] * s.n
                for k, locals_ in enumerate(orbit_nodes):
                    b = bins[(s.id, k)]
                    idx = _draw_distinct(rng, len(b), sizes[k])
                    picks[k] = idx
                    for local, i in zip(locals_, idx):
                        assign[local] = b[i]
                if len(set(assign)) != s.n:
                    continue
                if any(_key(assign[u], assign[v]) in edge_set
                       for u, v in sub_edges):
                    continue
                # Commit: consume hyperstubs and place the copy.
                for k in picks:
                    b = bins[(s.id, k)]
                    for i in sorted(picks[k], reverse=True):
                        b[i] = b[-1]
                        b.pop()
                for u, v in sub_edges:
                    e = _key(assign[u], assign[v])
                    edge_set.add(e)
                    edges.append(e)
                    adj[e[0]].append(e[1])
                    adj[e[1]].append(e[0])
                placed.append(tuple(assign))
                break
            else:
                raise AssemblyError(
                    f"{s.id}: could not place a copy within "
                    f"{retry_budget} redraws")
    return Network(n, edges, adj, provenance)


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def generate_network(model: NetworkModel, n: int,
                     rng: np.random.Generator | int | None = None,
                     max_regenerations: int = 100) -> Network:
    """Sample sequences and assemble, resampling on tail collisions."""
    rng = np.random.default_rng(rng)
    for _ in range(max_regenerations):
        seq = sample_sequences(model, n, rng)
        try:
            return assemble(seq, model, rng)
        except AssemblyError:
            continue
    raise AssemblyError(
        f"assembly failed for {max_regenerations} fresh sequences")


@dataclass(frozen=True)
class NetworkMetrics:
    mean_degree: float
    degree_variance: float
    triangle_count: int
    path2_count: int
    global_clustering: float


def measure(net: Network) -> NetworkMetrics:
    """Exact triangle / path-of-length-2 counts and global transitivity."""
    deg = net.degree_sequence()
    nbr = [set(a) for a in net.adj]
    tri = 0
    for u, v in net.edges:
        tri += len(nbr[u] & nbr[v])
    tri //= 3
    paths2 = int(np.sum(deg * (deg - 1)) // 2)
    phi = 3.0 * tri / paths2 if paths2 > 0 else 0.0
    return NetworkMetrics(float(deg.mean()) if len(deg) else 0.0,
                          float(deg.var()), tri, paths2, phi)


def counts_from_provenance(net: Network, model: NetworkModel) -> np.ndarray:
    """Recount per-node hyperstub usage from placed copies (audit)."""
    index = model.index
    keys = index.orbit_keys()
    counts = np.zeros((net.n_nodes, len(keys)), dtype=np.int64)
    col = {k: i for i, k in enumerate(keys)}
    for s, part in zip(index.subgraphs, index.orbit_partitions):
        for copy in net.provenance.get(s.id, []):
            for k, orbit in enumerate(part.orbits):
                for local in orbit:
                    counts[copy[local], col[(s.id, k)]] += 1
    return counts


def save_edgelist(net: Network, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{net.n_nodes}\n")
        for u, v in net.edges:
            fh.write(f"{u} {v}\n")


def load_edgelist(path) -> Network:
    with open(path) as fh:
        n = int(fh.readline())
        edges = []
        for line in fh:
            if line.strip():
                u, v = map(int, line.split())
                edges.append(_key(u, v))
    return Network(n, edges)
