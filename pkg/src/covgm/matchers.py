"""End-to-end seeded matchers, with and without covariates."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .assign import Sense, solve_lap
from .covariates import CovariateBundle
from .glm import GlmError, GlmFit, LinkKind, fit_seed_glm, predict_prob_matrix
from .graph import Graph, Permutation, SeedSet, embed_block
from .qap import FaqOptions, as_matrix, qap_objective, seeded_faq


class InsufficientSeedsError(GlmError):
    pass


@dataclass(frozen=True)
class MatchResult:
    """Output of one matcher.

    ``objective`` is always the QAP objective ``||S - Q B Q'||_F^2`` of the
    similarity matrix ``S`` the method matched against (``P_hat``, ``A`` or the
    averaged matrix), so values are comparable within a method family.
    """

    permutation: Permutation
    method: str
    objective: float
    fit: Optional[GlmFit] = None
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)


def _check_pair(a: Graph, b_tilde: Graph, seeds: SeedSet) -> None:
    if a.n != b_tilde.n:
        raise ValueError(f"graph sizes differ: {a.n} vs {b_tilde.n}")
    seeds.check(a.n)
    if seeds.s >= a.n:
        raise ValueError(f"need at least one non-seed vertex (n={a.n}, s={seeds.s})")


def neighborhood_match(p_hat, b_tilde, seeds: SeedSet) -> tuple[Permutation, float]:
    """Match non-seeds by their connections to the seeds.

    Solves ``max_q sum_i <B[i, seeds], P[q(i), seeds]>`` over non-seed ``i``
    as a linear assignment; returns the full permutation (seeds fixed) and the
    attained score.
    """
    p = as_matrix(p_hat)
    b = as_matrix(b_tilde)
    if p.shape != b.shape:
        raise ValueError(f"matrix sizes differ: {p.shape} vs {b.shape}")
    n = p.shape[0]
    if seeds.s == 0:
        raise ValueError("neighborhood matching needs at least one seed")
    if seeds.s >= n:
        raise ValueError(f"need at least one non-seed vertex (n={n}, s={seeds.s})")
    rest = seeds.complement(n)
    score = b[np.ix_(rest, seeds.ids)] @ p[np.ix_(rest, seeds.ids)].T
    pi, total = solve_lap(score, Sense.MAX)
    return embed_block(n, seeds, pi.map), total


def _fit_and_predict(a, b_tilde, c, seeds, link, standardize):
    if c.n != a.n:
        raise ValueError(f"covariates cover {c.n} vertices, graph has {a.n}")
    if seeds.s < c.d:
        raise InsufficientSeedsError(
            f"insufficient seeds: {seeds.s} seeds for {c.d} coefficients"
        )
    fit = fit_seed_glm(a, b_tilde, c, seeds, LinkKind.parse(link), standardize=standardize)
    return fit, predict_prob_matrix(fit, a, c)


def cov_qap(
    a: Graph,
    b_tilde: Graph,
    c: CovariateBundle,
    seeds: SeedSet,
    link: LinkKind = LinkKind.LOGIT,
    faq_opts: Optional[FaqOptions] = None,
    standardize: bool = False,
) -> MatchResult:
    t0 = time.perf_counter()
    _check_pair(a, b_tilde, seeds)
    fit, p_hat = _fit_and_predict(a, b_tilde, c, seeds, link, standardize)
    res = seeded_faq(p_hat, b_tilde, seeds, faq_opts)
    return MatchResult(
        res.permutation, "cov-qap", res.objective, fit, time.perf_counter() - t0,
        {"n_iter": res.n_iter, "faq_converged": res.converged, "n_clamped": p_hat.n_clamped},
    )


def cov_neigh(
    a: Graph,
    b_tilde: Graph,
    c: CovariateBundle,
    seeds: SeedSet,
    link: LinkKind = LinkKind.LOGIT,
    standardize: bool = False,
) -> MatchResult:
    t0 = time.perf_counter()
    _check_pair(a, b_tilde, seeds)
    if seeds.s == 0:
        raise ValueError("neighborhood matching needs at least one seed")
    fit, p_hat = _fit_and_predict(a, b_tilde, c, seeds, link, standardize)
    q, score = neighborhood_match(p_hat, b_tilde, seeds)
    return MatchResult(
        q, "cov-neigh", qap_objective(p_hat, b_tilde, q), fit, time.perf_counter() - t0,
        {"lap_score": score, "n_clamped": p_hat.n_clamped},
    )


def no_cov_qap(
    a: Graph, b_tilde: Graph, seeds: SeedSet, faq_opts: Optional[FaqOptions] = None
) -> MatchResult:
    t0 = time.perf_counter()
    _check_pair(a, b_tilde, seeds)
    res = seeded_faq(a, b_tilde, seeds, faq_opts)
    return MatchResult(
        res.permutation, "no-cov-qap", res.objective, None, time.perf_counter() - t0,
        {"n_iter": res.n_iter, "faq_converged": res.converged},
    )


def no_cov_neigh(a: Graph, b_tilde: Graph, seeds: SeedSet) -> MatchResult:
    t0 = time.perf_counter()
    _check_pair(a, b_tilde, seeds)
    q, score = neighborhood_match(a, b_tilde, seeds)
    return MatchResult(
        q, "no-cov-neigh", qap_objective(a, b_tilde, q), None, time.perf_counter() - t0,
        {"lap_score": score},
    )


def average_similarity(a: Graph, c: CovariateBundle) -> np.ndarray:
    """``(A + mean of edge covariates) / 2``."""
    if c.d1 == 0:
        raise ValueError("average-similarity matching needs at least one edge covariate")
    if c.n != a.n:
        raise ValueError(f"covariates cover {c.n} vertices, graph has {a.n}")
    return 0.5 * (a.as_float() + np.mean(np.stack(c.edge_covs), axis=0))


def avg_sim(
    a: Graph,
    b_tilde: Graph,
    c: CovariateBundle,
    seeds: SeedSet,
    faq_opts: Optional[FaqOptions] = None,
) -> MatchResult:
    t0 = time.perf_counter()
    _check_pair(a, b_tilde, seeds)
    m = average_similarity(a, c)
    res = seeded_faq(m, b_tilde, seeds, faq_opts)
    return MatchResult(
        res.permutation, "avg-sim", res.objective, None, time.perf_counter() - t0,
        {"n_iter": res.n_iter, "faq_converged": res.converged},
    )


METHOD_NAMES = ("cov-qap", "cov-neigh", "no-cov-qap", "no-cov-neigh", "avg-sim")


def run_method(
    name: str,
    a: Graph,
    b_tilde: Graph,
    c: CovariateBundle,
    seeds: SeedSet,
    link: LinkKind = LinkKind.LOGIT,
    faq_opts: Optional[FaqOptions] = None,
    standardize: bool = False,
) -> MatchResult:
    """Dispatch by method name with a uniform argument list."""
    table: dict[str, Callable[[], MatchResult]] = {
        "cov-qap": lambda: cov_qap(a, b_tilde, c, seeds, link, faq_opts, standardize),
        "cov-neigh": lambda: cov_neigh(a, b_tilde, c, seeds, link, standardize),
        "no-cov-qap": lambda: no_cov_qap(a, b_tilde, seeds, faq_opts),
        "no-cov-neigh": lambda: no_cov_neigh(a, b_tilde, seeds),
        "avg-sim": lambda: avg_sim(a, b_tilde, c, seeds, faq_opts),
    }
    key = name.strip().lower().replace("_", "-")
    if key not in table:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHOD_NAMES)}")
    return table[key]()
