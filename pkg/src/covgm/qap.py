"""Seeded quadratic assignment: objective, Frank-Wolfe (FAQ) solver, brute force.

For a candidate permutation ``q`` the objective is::

    ||P - Q B Q'||_F^2 = sum_ij (P[q(i), q(j)] - B[i, j])^2

with ``Q[q(i), i] = 1``, i.e. ``q.map[i]`` is the vertex of ``P`` matched to
vertex ``i`` of ``B``. When ``B = apply_permutation(B0, q_star)`` the truth
is ``q = q_star``.

The solver relaxes the non-seed block ``D`` to the Birkhoff polytope and
maximises ``tr(P22 D B22 D') + 2 tr(D' P21 B21')``, which differs from minus
half the objective by a constant. Rows of ``D`` index non-seeds of ``P``,
columns index non-seeds of ``B``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assign import Sense, solve_lap
from .graph import Graph, Permutation, SeedSet, embed_block, permute_matrix

BRUTE_FORCE_MAX = 8
DS_ATOL = 1e-9


def as_matrix(x) -> np.ndarray:
    """Float view of a :class:`Graph`, ``ProbMatrix`` or array."""
    if isinstance(x, Graph):
        return x.as_float()
    values = getattr(x, "values", x)
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def qap_objective(p_hat, b_tilde, q: Permutation) -> float:
    p = as_matrix(p_hat)
    b = as_matrix(b_tilde)
    if p.shape != b.shape:
        raise ValueError(f"matrix sizes differ: {p.shape} vs {b.shape}")
    diff = permute_matrix(p, q) - b
    return float(np.sum(diff * diff))


@dataclass(frozen=True)
class FaqOptions:
    """Frank-Wolfe settings.

    ``init`` is ``"barycenter"``, ``"randomized"`` (midpoint of the barycenter
    and a random permutation matrix drawn from ``rng_seed``) or an explicit
    doubly stochastic matrix over the non-seed block.
    """

    max_iter: int = 30
    rel_tol: float = 1e-6
    init: object = "barycenter"
    rng_seed: int = 0

    def __post_init__(self):
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if isinstance(self.init, str) and self.init not in ("barycenter", "randomized"):
            raise ValueError(f"unknown init {self.init!r}")

    def to_dict(self) -> dict:
        init = self.init if isinstance(self.init, str) else "given"
        return {"max_iter": int(self.max_iter), "rel_tol": self.rel_tol,
                "init": init, "rng_seed": self.rng_seed}


@dataclass(frozen=True)
class FaqStep:
    """Per-iteration record handed to the solver callback."""

    iteration: int
    gamma: float
    f_prev: float
    f_vertex: float
    f_new: float
    iterate: np.ndarray


@dataclass(frozen=True)
class FaqResult:
    permutation: Permutation
    objective: float
    n_iter: int
    converged: bool
    init_objective: float
    relaxed_value: float

    def __iter__(self):
        return iter((self.permutation, self.objective, self.n_iter))


def is_doubly_stochastic(d: np.ndarray, atol: float = DS_ATOL) -> bool:
    d = np.asarray(d, dtype=np.float64)
    return bool(
        d.ndim == 2
        and d.shape[0] == d.shape[1]
        and np.all(d >= -1e-12)
        and np.allclose(d.sum(axis=0), 1.0, rtol=0, atol=atol)
        and np.allclose(d.sum(axis=1), 1.0, rtol=0, atol=atol)
    )


def _initial_iterate(opts: FaqOptions, m: int) -> np.ndarray:
    bary = np.full((m, m), 1.0 / m)
    if isinstance(opts.init, str):
        if opts.init == "barycenter":
            return bary
        perm = np.random.default_rng(opts.rng_seed).permutation(m)
        return 0.5 * (bary + np.eye(m)[perm])
    d = np.array(opts.init, dtype=np.float64)
    if d.shape != (m, m) or not is_doubly_stochastic(d):
        raise ValueError(f"initial iterate must be a {m}x{m} doubly stochastic matrix")
    return d


def _project(d: np.ndarray) -> np.ndarray:
    """Block permutation nearest to ``d`` in the trace sense, as a map on ``B`` indices."""
    pi, _ = solve_lap(d, Sense.MAX)
    # row k (P side) takes column pi[k] (B side): q(pi[k]) = k
    block = np.empty_like(pi.map)
    block[pi.map] = np.arange(pi.n)
    return block


def _check_inputs(p, b, seeds: SeedSet):
    if p.shape != b.shape:
        raise ValueError(f"matrix sizes differ: {p.shape} vs {b.shape}")
    n = p.shape[0]
    seeds.check(n)
    return n


def seeded_faq(
    p_hat,
    b_tilde,
    seeds: SeedSet,
    opts: Optional[FaqOptions] = None,
    callback: Optional[Callable[[FaqStep], None]] = None,
) -> FaqResult:
    """Approximate the seeded QAP with Frank-Wolfe over doubly stochastic matrices.

    Each iteration takes the linear-assignment vertex of the gradient, moves
    toward it by the exact maximiser of the (quadratic) restricted objective,
    and stops once the relative change drops below ``opts.rel_tol``. The last
    iterate is rounded to a permutation; if that rounding scores worse than
    the rounding of the starting point, the latter is returned instead.
    """
    opts = opts or FaqOptions()
    p = as_matrix(p_hat)
    b = as_matrix(b_tilde)
    n = _check_inputs(p, b, seeds)
    if seeds.s >= n:
        raise ValueError(f"need at least one non-seed vertex (n={n}, s={seeds.s})")
    s_ids = seeds.ids
    rest = seeds.complement(n)
    m = rest.size
    p22 = p[np.ix_(rest, rest)]
    b22 = b[np.ix_(rest, rest)]
    lin = p[np.ix_(rest, s_ids)] @ b[np.ix_(rest, s_ids)].T

    def value(d):
        return float(np.sum(p22 * (d @ b22 @ d.T)) + 2.0 * np.sum(d * lin))

    d = _initial_iterate(opts, m)
    f_cur = value(d)
    init_block = _project(d)
    converged = False
    n_iter = 0
    for n_iter in range(1, int(opts.max_iter) + 1):
        grad = 2.0 * (p22 @ d @ b22 + lin)
        vertex, _ = solve_lap(grad, Sense.MAX)
        s_mat = np.zeros((m, m))
        s_mat[np.arange(m), vertex.map] = 1.0
        delta = s_mat - d
        curv = float(np.sum(p22 * (delta @ b22 @ delta.T)))
        slope = float(np.sum(grad * delta))
        if curv < 0:
            gamma = min(max(-slope / (2.0 * curv), 0.0), 1.0)
        else:
            gamma = 1.0 if curv + slope >= 0 else 0.0
        f_vertex = f_cur + slope + curv
        f_new = f_cur + gamma * slope + gamma * gamma * curv
        d = d + gamma * delta
        if callback is not None:
            callback(FaqStep(n_iter, gamma, f_cur, f_vertex, f_new, d))
        change = abs(f_new - f_cur) / max(abs(f_cur), 1e-12)
        f_cur = f_new
        if gamma == 0.0 or change < opts.rel_tol:
            converged = True
            break

    final_block = _project(d)
    q_final = embed_block(n, seeds, final_block)
    q_init = embed_block(n, seeds, init_block)
    obj_final = qap_objective(p, b, q_final)
    obj_init = qap_objective(p, b, q_init)
    if obj_init < obj_final:
        q_final, obj_final = q_init, obj_init
    return FaqResult(q_final, obj_final, n_iter, converged, obj_init, value(d))


def brute_force_qap(p_hat, b_tilde, seeds: SeedSet) -> tuple[Permutation, float]:
    """Exact seeded QAP by enumeration; ties go to the lexicographically smallest map."""
    p = as_matrix(p_hat)
    b = as_matrix(b_tilde)
    n = _check_inputs(p, b, seeds)
    rest = seeds.complement(n)
    m = rest.size
    if m > BRUTE_FORCE_MAX:
        raise ValueError(f"brute force limited to n - s <= {BRUTE_FORCE_MAX}, got {m}")
    if m == 0:
        q = Permutation.identity(n)
        return q, qap_objective(p, b, q)
    blocks = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    maps = np.tile(np.arange(n), (blocks.shape[0], 1))
    maps[:, rest] = rest[blocks]
    best_k, best_val = -1, np.inf
    chunk = max(1, 2_000_000 // (n * n))
    for start in range(0, maps.shape[0], chunk):
        qm = maps[start:start + chunk]
        diff = p[qm[:, :, None], qm[:, None, :]] - b[None, :, :]
        vals = np.einsum("kij,kij->k", diff, diff)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_k, best_val = start + k, float(vals[k])
    q = Permutation(maps[best_k])
    return q, qap_objective(p, b, q)
