"""Plain-text input formats, label remapping and atomic output.

Formats
-------
graph edge list
    One undirected edge per line as two whitespace-separated labels. A line
    with a single label declares an isolated vertex. ``#`` starts a comment
    line. Repeated edges are dropped with a warning.
edge covariate
    Triplets ``u v value`` over graph-A labels; unlisted pairs are 0. A
    ``.npy`` file holding a dense matrix in graph-A id order is also accepted.
node covariates
    CSV with a header row; the first column is the graph-A label, every other
    column one numeric covariate.
seeds
    Two-column CSV ``label_a,label_b``; an optional header with exactly those
    names is skipped.

Graph-A labels are sorted in natural order and numbered ``0..n-1``. Each
seed's graph-B label receives its partner's id; the remaining graph-B labels
fill the free ids in natural order.
"""

from __future__ import annotations

import csv
import logging
import os
import re
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .covariates import CovariateBundle, TransformKind
from .graph import Graph, SeedSet

log = logging.getLogger(__name__)


class InputError(ValueError):
    """Malformed or inconsistent input files."""


def natural_key(label: str):
    return [(0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.split(r"(\d+)", label) if t]


@dataclass(frozen=True)
class InputSpec:
    graph_a_path: str
    graph_b_path: str
    seeds_path: str
    edge_cov_paths: tuple = ()
    node_cov_path: Optional[str] = None
    transforms: tuple = ()
    link: str = "logit"
    method: str = "cov-qap"
    max_iter: int = 30
    rel_tol: float = 1e-6
    init: str = "barycenter"
    rng_seed: int = 0
    standardize: bool = False
    output_path: Optional[str] = None

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class LoadedInputs:
    a: Graph
    b_tilde: Graph
    covariates: CovariateBundle
    seeds: SeedSet
    labels_a: tuple
    labels_b: tuple
    seed_pairs: tuple = field(default=())


def _lines(path) -> list[tuple[int, list[str]]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            out.append((lineno, text.split()))
    return out


def read_edge_list(path) -> tuple[list[str], list[tuple[str, str]]]:
    """Vertex labels (first-seen order) and deduplicated undirected edges."""
    labels: dict[str, None] = {}
    edges: dict[frozenset, tuple[str, str]] = {}
    dupes = 0
    for lineno, tok in _lines(path):
        if len(tok) == 1:
            labels.setdefault(tok[0])
            continue
        if len(tok) != 2:
            raise InputError(f"{path}:{lineno}: expected 1 or 2 labels, got {len(tok)}")
        u, v = tok
        if u == v:
            raise InputError(f"{path}:{lineno}: self-loop on {u!r}")
        labels.setdefault(u)
        labels.setdefault(v)
        key = frozenset((u, v))
        if key in edges:
            dupes += 1
            continue
        edges[key] = (u, v)
    if dupes:
        warnings.warn(f"{path}: dropped {dupes} duplicate edge line(s)", UserWarning, stacklevel=2)
    return list(labels), list(edges.values())


def read_seeds(path) -> list[tuple[str, str]]:
    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if rows and [c.strip() for c in rows[0]] == ["label_a", "label_b"]:
        rows = rows[1:]
    for k, row in enumerate(rows, 1):
        if len(row) != 2:
            raise InputError(f"{path}: seed row {k} needs 2 columns, got {len(row)}")
        pairs.append((row[0].strip(), row[1].strip()))
    return pairs


def _graph_from(labels_index: dict, n: int, edges) -> Graph:
    adj = np.zeros((n, n), dtype=np.int8)
    for u, v in edges:
        i, j = labels_index[u], labels_index[v]
        adj[i, j] = adj[j, i] = 1
    return Graph(adj)


def _read_edge_cov(path, index_a: dict, n: int) -> np.ndarray:
    if str(path).endswith(".npy"):
        y = np.load(path)
        if y.ndim != 2 or y.shape[0] != y.shape[1]:
            raise InputError(f"{path}: edge covariate matrix is not square, shape {y.shape}")
        if y.shape[0] != n:
            raise InputError(f"{path}: edge covariate has size {y.shape[0]}, graph has {n}")
        if not np.array_equal(y, y.T):
            raise InputError(f"{path}: edge covariate matrix is not symmetric")
        return y.astype(np.float64)
    y = np.zeros((n, n))
    seen: dict[tuple[int, int], float] = {}
    for lineno, tok in _lines(path):
        if len(tok) != 3:
            raise InputError(f"{path}:{lineno}: expected 'u v value'")
        u, v, raw = tok
        for lab in (u, v):
            if lab not in index_a:
                raise InputError(f"{path}:{lineno}: unknown label {lab!r}")
        if u == v:
            raise InputError(f"{path}:{lineno}: diagonal entry for {u!r}")
        try:
            val = float(raw)
        except ValueError:
            raise InputError(f"{path}:{lineno}: value {raw!r} is not numeric") from None
        if not np.isfinite(val):
            raise InputError(f"{path}:{lineno}: missing or non-finite value")
        i, j = index_a[u], index_a[v]
        if (j, i) in seen and seen[(j, i)] != val:
            raise InputError(f"{path}:{lineno}: asymmetric values for pair ({u!r}, {v!r})")
        if (i, j) in seen and seen[(i, j)] != val:
            raise InputError(f"{path}:{lineno}: conflicting values for pair ({u!r}, {v!r})")
        seen[(i, j)] = val
        y[i, j] = y[j, i] = val
    return y


def _read_node_covs(path, index_a: dict, n: int) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise InputError(f"{path}: empty node covariate file")
    header = [c.strip() for c in rows[0]]
    names = header[1:]
    z = np.full((n, len(names)), np.nan)
    filled = np.zeros(n, dtype=bool)
    for k, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {k} has {len(row)} fields, header has {len(header)}")
        lab = row[0].strip()
        if lab not in index_a:
            raise InputError(f"{path}: unknown label {lab!r}")
        try:
            z[index_a[lab]] = [float(x) for x in row[1:]]
        except ValueError:
            raise InputError(f"{path}: non-numeric covariate for {lab!r}") from None
        filled[index_a[lab]] = True
    if not filled.all() or not np.all(np.isfinite(z)):
        raise InputError(f"{path}: node covariates missing for {int((~filled).sum())} vertices")
    return z, names


def load_inputs(spec: InputSpec) -> LoadedInputs:
    labels_a, edges_a = read_edge_list(spec.graph_a_path)
    labels_b, edges_b = read_edge_list(spec.graph_b_path)
    if len(labels_a) != len(labels_b):
        raise InputError(f"graph A has {len(labels_a)} vertices, graph B has {len(labels_b)}")
    order_a = sorted(labels_a, key=natural_key)
    index_a = {lab: i for i, lab in enumerate(order_a)}
    set_b = set(labels_b)
    n = len(order_a)

    pairs = read_seeds(spec.seeds_path)
    used_a, used_b = set(), set()
    for la, lb in pairs:
        if la not in index_a:
            raise InputError(f"seed label {la!r} not found in graph A")
        if lb not in set_b:
            raise InputError(f"seed label {lb!r} not found in graph B")
        if la in used_a or lb in used_b:
            raise InputError(f"seed pair ({la!r}, {lb!r}) repeats a label")
        used_a.add(la)
        used_b.add(lb)
    index_b = {lb: index_a[la] for la, lb in pairs}
    free_ids = [i for i in range(n) if order_a[i] not in used_a]
    rest_b = sorted((lab for lab in labels_b if lab not in used_b), key=natural_key)
    index_b.update(zip(rest_b, free_ids))
    order_b = [""] * n
    for lab, i in index_b.items():
        order_b[i] = lab

    a = _graph_from(index_a, n, edges_a)
    b = _graph_from(index_b, n, edges_b)

    edge_covs = [_read_edge_cov(p, index_a, n) for p in spec.edge_cov_paths]
    edge_names = [Path(p).stem for p in spec.edge_cov_paths]
    z, node_names = (np.zeros((n, 0)), [])
    if spec.node_cov_path:
        z, node_names = _read_node_covs(spec.node_cov_path, index_a, n)
    transforms = list(spec.transforms) or ["abs-diff"] * z.shape[1]
    if len(transforms) != z.shape[1]:
        raise InputError(f"{z.shape[1]} node covariates but {len(transforms)} transforms given")
    try:
        cov = CovariateBundle(
            n,
            edge_covs=tuple(edge_covs),
            node_covs=z,
            node_transforms=tuple(TransformKind.parse(t) for t in transforms),
            edge_names=tuple(edge_names),
            node_names=tuple(node_names),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    seeds = SeedSet.of(index_a[la] for la, _ in pairs)
    return LoadedInputs(a, b, cov, seeds, tuple(order_a), tuple(order_b), tuple(pairs))


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_instance(
    directory,
    a: Graph,
    b_tilde: Graph,
    cov: CovariateBundle,
    seeds: SeedSet,
    labels_a: Optional[Sequence[str]] = None,
    labels_b: Optional[Sequence[str]] = None,
    link: str = "logit",
    method: str = "cov-qap",
) -> InputSpec:
    """Serialise an in-memory instance into the text formats above.

    Default labels are ``a00000, a00001, ...`` and ``b00000, ...`` so that
    :func:`load_inputs` reproduces the same vertex ids.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    n = a.n
    la = list(labels_a) if labels_a is not None else [f"a{i:05d}" for i in range(n)]
    lb = list(labels_b) if labels_b is not None else [f"b{i:05d}" for i in range(n)]

    def edge_text(g: Graph, labels) -> str:
        lines = [f"{labels[i]} {labels[j]}" for i, j in g.edges()]
        deg = g.degrees()
        lines += [labels[i] for i in range(n) if deg[i] == 0]
        return "\n".join(lines) + "\n"

    atomic_write_text(d / "graph_a.txt", edge_text(a, la))
    atomic_write_text(d / "graph_b.txt", edge_text(b_tilde, lb))
    cov_paths = []
    for k, y in enumerate(cov.edge_covs):
        iu, ju = np.nonzero(np.triu(y, 1))
        body = "".join(f"{la[i]} {la[j]} {float(y[i, j])!r}\n" for i, j in zip(iu, ju))
        p = d / f"{cov.edge_names[k]}.txt"
        atomic_write_text(p, body)
        cov_paths.append(str(p))
    node_path = None
    if cov.d2:
        rows = [",".join(["label", *cov.node_names])]
        rows += [",".join([la[i], *(repr(float(v)) for v in cov.node_covs[i])]) for i in range(n)]
        node_path = str(d / "node_covs.csv")
        atomic_write_text(node_path, "\n".join(rows) + "\n")
    seed_rows = ["label_a,label_b"] + [f"{la[i]},{lb[i]}" for i in seeds.ids.tolist()]
    atomic_write_text(d / "seeds.csv", "\n".join(seed_rows) + "\n")
    return InputSpec(
        graph_a_path=str(d / "graph_a.txt"),
        graph_b_path=str(d / "graph_b.txt"),
        seeds_path=str(d / "seeds.csv"),
        edge_cov_paths=tuple(cov_paths),
        node_cov_path=node_path,
        transforms=tuple(k.value for k in cov.node_transforms),
        link=link,
        method=method,
    )
