"""Edge covariates, node-covariate transforms and design rows.

A design row for the vertex pair ``(i, j)`` is laid out as::

    (1, A_ij, Y1_ij, ..., Yd1_ij, h1(Z_i1, Z_j1), ..., hd2(Z_id2, Z_jd2))
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .graph import Graph, SeedSet


class TransformKind(str, enum.Enum):
    """How a scalar node covariate becomes an edge covariate."""

    ABS_DIFF = "abs-diff"
    EQUALITY = "equality"

    @classmethod
    def parse(cls, value: "str | TransformKind") -> "TransformKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"absdiff": cls.ABS_DIFF, "equalityindicator": cls.EQUALITY,
                   "eq": cls.EQUALITY, "indicator": cls.EQUALITY}
        try:
            return cls(key)
        except ValueError:
            if key.replace("-", "") in aliases:
                return aliases[key.replace("-", "")]
            raise ValueError(f"unknown transform kind {value!r}") from None


def transform_node_pair(kind: TransformKind, zi: float, zj: float) -> float:
    kind = TransformKind.parse(kind)
    if kind is TransformKind.ABS_DIFF:
        return abs(zi - zj)
    return 1.0 if zi == zj else 0.0


def transform_matrix(kind: TransformKind, z: np.ndarray) -> np.ndarray:
    """All-pairs transform of one node covariate column, zero diagonal."""
    kind = TransformKind.parse(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind is TransformKind.ABS_DIFF:
        out = np.abs(z[:, None] - z[None, :])
    else:
        out = (z[:, None] == z[None, :]).astype(np.float64)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class CovariateBundle:
    """Edge covariate matrices plus a node covariate table.

    ``edge_covs`` holds ``d1`` symmetric ``n x n`` matrices; ``node_covs`` is
    ``n x d2`` with one :class:`TransformKind` per column. Missing values are
    rejected outright.
    """

    n: int
    edge_covs: tuple = ()
    node_covs: np.ndarray | None = None
    node_transforms: tuple = ()
    edge_names: tuple = ()
    node_names: tuple = ()
    _node_mats: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        n = self.n
        mats = []
        for k, y in enumerate(self.edge_covs):
            y = np.array(y, dtype=np.float64)
            if y.ndim != 2 or y.shape[0] != y.shape[1]:
                raise ValueError(f"edge covariate {k} is not square: shape {y.shape}")
            if y.shape[0] != n:
                raise ValueError(f"edge covariate {k} has size {y.shape[0]}, expected {n}")
            if not np.all(np.isfinite(y)):
                raise ValueError(f"edge covariate {k} has missing or non-finite values")
            if not np.array_equal(y, y.T):
                raise ValueError(f"edge covariate {k} is not symmetric")
            y = y.copy()
            np.fill_diagonal(y, 0.0)
            y.setflags(write=False)
            mats.append(y)
        object.__setattr__(self, "edge_covs", tuple(mats))

        z = self.node_covs
        if z is None:
            z = np.zeros((n, 0))
        z = np.array(z, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] != n:
            raise ValueError(f"node covariates have {z.shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(z)):
            raise ValueError("node covariates have missing or non-finite values")
        z.setflags(write=False)
        object.__setattr__(self, "node_covs", z)

        kinds = tuple(TransformKind.parse(k) for k in self.node_transforms)
        if len(kinds) != z.shape[1]:
            raise ValueError(f"{z.shape[1]} node covariates but {len(kinds)} transforms")
        object.__setattr__(self, "node_transforms", kinds)

        if not self.edge_names:
            object.__setattr__(self, "edge_names", tuple(f"edge{k + 1}" for k in range(len(mats))))
        if not self.node_names:
            object.__setattr__(self, "node_names", tuple(f"node{k + 1}" for k in range(z.shape[1])))
        if len(self.edge_names) != len(mats) or len(self.node_names) != z.shape[1]:
            raise ValueError("covariate names do not match covariate counts")

    @classmethod
    def empty(cls, n: int) -> "CovariateBundle":
        return cls(n)

    @property
    def d1(self) -> int:
        return len(self.edge_covs)

    @property
    def d2(self) -> int:
        return self.node_covs.shape[1]

    @property
    def d(self) -> int:
        """Design dimension including intercept and network term."""
        return self.d1 + self.d2 + 2

    def coef_names(self) -> list[str]:
        return ["intercept", "network", *self.edge_names, *self.node_names]

    def node_matrix(self, k: int) -> np.ndarray:
        """Transformed node covariate ``k`` as an ``n x n`` matrix (cached)."""
        if not self._node_mats:
            self._node_mats.extend(
                transform_matrix(kind, self.node_covs[:, j])
                for j, kind in enumerate(self.node_transforms)
            )
        return self._node_mats[k]

    def __eq__(self, other):
        if not isinstance(other, CovariateBundle):
            return NotImplemented
        return (
            self.n == other.n
            and len(self.edge_covs) == len(other.edge_covs)
            and all(np.array_equal(x, y) for x, y in zip(self.edge_covs, other.edge_covs))
            and np.array_equal(self.node_covs, other.node_covs)
            and self.node_transforms == other.node_transforms
        )


def _check_pair(n: int, i: int, j: int) -> None:
    if i == j:
        raise ValueError(f"design rows exclude the diagonal (i = j = {i})")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")


def design_columns(a: Graph, c: CovariateBundle) -> Iterator[np.ndarray]:
    """Yield the ``d`` predictor columns as full ``n x n`` matrices."""
    if a.n != c.n:
        raise ValueError(f"graph has {a.n} vertices, covariates {c.n}")
    yield np.ones((a.n, a.n))
    yield a.as_float()
    yield from c.edge_covs
    for k in range(c.d2):
        yield c.node_matrix(k)


def build_design_row(a: Graph, c: CovariateBundle, i: int, j: int) -> np.ndarray:
    _check_pair(a.n, i, j)
    if a.n != c.n:
        raise ValueError(f"graph has {a.n} vertices, covariates {c.n}")
    row = [1.0, float(a.adj[i, j])]
    row.extend(float(y[i, j]) for y in c.edge_covs)
    row.extend(
        transform_node_pair(kind, c.node_covs[i, k], c.node_covs[j, k])
        for k, kind in enumerate(c.node_transforms)
    )
    return np.asarray(row)


def seed_pairs(seeds: SeedSet) -> list[tuple[int, int]]:
    """Unordered seed pairs ``(i, j)`` with ``i > j``, each listed once."""
    ids = seeds.ids.tolist()
    return [(ids[b], ids[a]) for b in range(len(ids)) for a in range(b)]


def pair_index(ids: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised form of :func:`seed_pairs` over arbitrary ids."""
    ids = np.asarray(ids, dtype=np.int64)
    r, c = np.tril_indices(ids.size, k=-1)
    return ids[r], ids[c]


def design_matrix(a: Graph, c: CovariateBundle, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Stack design rows for the pairs ``(rows[k], cols[k])``."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if np.any(rows == cols):
        raise ValueError("design rows exclude the diagonal")
    return np.column_stack([m[rows, cols] for m in design_columns(a, c)])


def seed_design(a: Graph, b_tilde: Graph, c: CovariateBundle, seeds: SeedSet) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix and 0/1 responses over all unordered seed pairs."""
    seeds.check(a.n)
    i, j = pair_index(seeds.ids)
    return design_matrix(a, c, i, j), b_tilde.adj[i, j].astype(np.float64)


def max_design_norm(a: Graph, c: CovariateBundle) -> float:
    """Largest Euclidean norm of any off-diagonal design row."""
    sq = np.zeros((a.n, a.n))
    for m in design_columns(a, c):
        sq += m * m
    np.fill_diagonal(sq, 0.0)
    return float(np.sqrt(sq.max())) if a.n > 1 else 0.0
