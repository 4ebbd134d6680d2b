"""Graph, permutation and seed primitives plus matching metrics.

Permutation convention
----------------------
A :class:`Permutation` ``q`` acts on a graph by *pulling* rows and columns::

    apply_permutation(g, q).adj[i, j] == g.adj[q.map[i], q.map[j]]

so ``q.map[i]`` names the vertex of the original graph that ends up at
position ``i``. A shuffled observation is ``b_tilde = apply_permutation(b, q_star)``
and ``apply_permutation(b_tilde, q_star.inverse())`` recovers ``b``. Read as a
matching, vertex ``i`` of ``b_tilde`` corresponds to vertex ``q.map[i]`` of the
unshuffled graph.

Worked example on the path ``0-1-2`` with ``q.map = [1, 2, 0]``::

    position 0 <- vertex 1, position 1 <- vertex 2, position 2 <- vertex 0
    edges {0,1}, {1,2} become {2,0}, {0,1}

i.e. the middle vertex of the path now sits at position 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph stored as a dense 0/1 adjacency matrix."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adj, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise ValueError("graph needs at least one vertex")
        if not np.isin(adj, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        adj = adj.astype(np.int8)
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diagonal(adj)):
            raise ValueError("adjacency must have a zero diagonal")
        object.__setattr__(self, "adj", _frozen(adj))

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum()) // 2

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = np.zeros((n, n), dtype=np.int8)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on vertex {u}")
            adj[u, v] = adj[v, u] = 1
        return cls(adj)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(np.zeros((n, n), dtype=np.int8))

    def edges(self) -> list[tuple[int, int]]:
        """Edge list with ``u < v``, in row-major order."""
        iu, ju = np.nonzero(np.triu(self.adj, 1))
        return list(zip(iu.tolist(), ju.tolist()))

    def degrees(self) -> np.ndarray:
        return self.adj.sum(axis=1).astype(np.int64)

    def as_float(self) -> np.ndarray:
        return self.adj.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())

    def __repr__(self):
        return f"Graph(n={self.n}, n_edges={self.n_edges})"


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on ``{0, ..., n-1}``; ``map[i]`` is the image of ``i``."""

    map: np.ndarray

    def __post_init__(self):
        m = np.array(self.map, dtype=np.int64).reshape(-1)
        n = m.shape[0]
        if n == 0 or not np.array_equal(np.sort(m), np.arange(n)):
            raise ValueError(f"not a permutation of 0..{n - 1}: {m.tolist()}")
        object.__setattr__(self, "map", _frozen(m))

    @property
    def n(self) -> int:
        return self.map.shape[0]

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    def inverse(self) -> "Permutation":
        return invert_permutation(self)

    def compose(self, other: "Permutation") -> "Permutation":
        """``(self o other).map[i] = self.map[other.map[i]]``."""
        if other.n != self.n:
            raise ValueError("cannot compose permutations of different size")
        return Permutation(self.map[other.map])

    def fixes(self, ids: Iterable[int]) -> bool:
        ids = np.asarray(list(ids), dtype=np.int64)
        return bool(np.all(self.map[ids] == ids))

    def matrix(self) -> np.ndarray:
        """Permutation matrix ``Q`` with ``Q[map[i], i] = 1``.

        With this orientation ``Q @ M @ Q.T`` equals
        ``M[np.ix_(inv, inv)]`` where ``inv`` is the inverse map, matching
        ``apply_permutation(g, self.inverse())``.
        """
        q = np.zeros((self.n, self.n))
        q[self.map, np.arange(self.n)] = 1.0
        return q

    def __eq__(self, other):
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.map, other.map)

    def __hash__(self):
        return hash(self.map.tobytes())

    def __repr__(self):
        return f"Permutation({self.map.tolist()})"


@dataclass(frozen=True, eq=False)
class SeedSet:
    """Strictly increasing vertex ids whose correspondence is known."""

    ids: np.ndarray

    def __post_init__(self):
        ids = np.array(self.ids, dtype=np.int64).reshape(-1)
        if ids.size and (ids[0] < 0 or np.any(np.diff(ids) <= 0)):
            raise ValueError("seed ids must be non-negative and strictly increasing")
        object.__setattr__(self, "ids", _frozen(ids))

    @classmethod
    def of(cls, ids: Iterable[int]) -> "SeedSet":
        """Build from any iterable of distinct ids (sorted here)."""
        ids = sorted(int(i) for i in ids)
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate seed ids")
        return cls(np.asarray(ids, dtype=np.int64))

    @classmethod
    def first(cls, s: int) -> "SeedSet":
        return cls(np.arange(s))

    @property
    def s(self) -> int:
        return self.ids.shape[0]

    def __len__(self):
        return self.s

    def check(self, n: int) -> None:
        if self.s > n:
            raise ValueError(f"{self.s} seeds exceed {n} vertices")
        if self.s and self.ids[-1] >= n:
            raise ValueError(f"seed id {int(self.ids[-1])} out of range for n={n}")

    def complement(self, n: int) -> np.ndarray:
        """Sorted non-seed ids."""
        self.check(n)
        mask = np.ones(n, dtype=bool)
        mask[self.ids] = False
        return np.flatnonzero(mask)

    def __eq__(self, other):
        if not isinstance(other, SeedSet):
            return NotImplemented
        return np.array_equal(self.ids, other.ids)

    def __hash__(self):
        return hash(self.ids.tobytes())

    def __repr__(self):
        return f"SeedSet({self.ids.tolist()})"


def permute_matrix(m: np.ndarray, q: Permutation) -> np.ndarray:
    """``m[q.map][:, q.map]`` for any square array."""
    m = np.asarray(m)
    if m.shape != (q.n, q.n):
        raise ValueError(f"matrix shape {m.shape} does not match permutation size {q.n}")
    return m[np.ix_(q.map, q.map)]


def apply_permutation(g: Graph, q: Permutation) -> Graph:
    if q.n != g.n:
        raise ValueError(f"permutation size {q.n} != graph size {g.n}")
    return Graph(permute_matrix(g.adj, q))


def invert_permutation(q: Permutation) -> Permutation:
    inv = np.empty_like(q.map)
    inv[q.map] = np.arange(q.n)
    return Permutation(inv)


def embed_block(n: int, seeds: SeedSet, block: Sequence[int]) -> Permutation:
    """Lift a permutation of the non-seed positions to one on all ``n`` ids.

    ``block[k] = r`` sends the ``k``-th non-seed id to the ``r``-th non-seed id;
    seeds map to themselves.
    """
    rest = seeds.complement(n)
    block = np.asarray(block, dtype=np.int64)
    if block.shape != rest.shape:
        raise ValueError(f"block has {block.size} entries, expected {rest.size}")
    full = np.arange(n)
    full[rest] = rest[block]
    return Permutation(full)


def matching_error(q_hat: Permutation, q_star: Permutation, seeds: SeedSet) -> float:
    """Fraction of non-seed vertices whose estimated image is wrong."""
    if q_hat.n != q_star.n:
        raise ValueError("permutations differ in size")
    n = q_hat.n
    seeds.check(n)
    for name, q in (("q_hat", q_hat), ("q_star", q_star)):
        if not q.fixes(seeds.ids):
            bad = seeds.ids[q.map[seeds.ids] != seeds.ids][0]
            raise ValueError(f"{name} does not fix seed {int(bad)}")
    if n == seeds.s:
        return 0.0
    rest = seeds.complement(n)
    return float(np.count_nonzero(q_hat.map[rest] != q_star.map[rest])) / (n - seeds.s)


def edge_disagreement(a: Graph, b: Graph) -> int:
    """Squared Frobenius distance between adjacencies (each edge counted twice)."""
    if a.n != b.n:
        raise ValueError(f"graph sizes differ: {a.n} vs {b.n}")
    diff = a.adj.astype(np.int64) - b.adj.astype(np.int64)
    return int(np.sum(diff * diff))
