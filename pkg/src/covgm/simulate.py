"""Synthetic benchmark: ER graph plus ER edge covariate, linear edge model, shuffling.

For signal strength ``alpha`` and covariate share ``gamma`` the second graph
is drawn from ``P = theta0 + theta1 * A + theta2 * Y`` with
``theta1 = +/- alpha * (1 - gamma)`` (sign set by the scenario) and
``theta2 = alpha * gamma``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .covariates import CovariateBundle
from .glm import LinkKind, ProbMatrix, clamp_probabilities
from .graph import Graph, Permutation, SeedSet, apply_permutation, matching_error, permute_matrix
from .matchers import METHOD_NAMES, run_method
from .qap import FaqOptions

MASK64 = (1 << 64) - 1


class Scenario(str, enum.Enum):
    EASY = "easy"
    DIFFICULT = "difficult"


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def rep_seed(base_seed: int, rep: int) -> int:
    """Seed of replication ``rep``: the base seed XOR a splitmix of the index."""
    return (int(base_seed) & MASK64) ^ splitmix64(int(rep))


def rep_rng(base_seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(rep_seed(base_seed, rep))


def _lower_bernoulli(prob, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((n, n))
    upper = np.triu(u < prob, 1)
    return (upper | upper.T).astype(np.int8)


def gen_er(n: int, p: float, rng: np.random.Generator) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    return Graph(_lower_bernoulli(p, n, rng))


def build_p_matrix(a: Graph, y: Graph, theta0: float, theta1: float, theta2: float) -> ProbMatrix:
    """``clip(theta0 + theta1 * A + theta2 * Y, 0, 1)`` with zero diagonal.

    The number of clipped vertex pairs is kept on the result.
    """
    if a.n != y.n:
        raise ValueError(f"graph sizes differ: {a.n} vs {y.n}")
    raw = theta0 + theta1 * a.as_float() + theta2 * y.as_float()
    return clamp_probabilities(raw)


def sample_graph(p: ProbMatrix, rng: np.random.Generator) -> Graph:
    return Graph(_lower_bernoulli(p.values, p.n, rng))


def shuffle_nonseeds(b: Graph, seeds: SeedSet, rng: np.random.Generator) -> tuple[Graph, Permutation]:
    """Uniformly permute the non-seed vertices; returns ``(b_tilde, q_star)``."""
    rest = seeds.complement(b.n)
    full = np.arange(b.n)
    full[rest] = rest[rng.permutation(rest.size)]
    q = Permutation(full)
    return apply_permutation(b, q), q


@dataclass(frozen=True)
class SimConfig:
    n: int = 500
    p: float = 0.1
    q: float = 0.1
    theta0: float = 0.01
    alpha: float = 0.55
    gamma: float = 0.45
    sign: Scenario = Scenario.EASY
    n_seeds: int = 100
    n_reps: int = 50
    link: LinkKind = LinkKind.IDENTITY
    base_rng_seed: int = 0
    faq: FaqOptions = field(default_factory=FaqOptions)

    def __post_init__(self):
        object.__setattr__(self, "sign", Scenario(self.sign))
        object.__setattr__(self, "link", LinkKind.parse(self.link))
        if isinstance(self.faq, dict):
            object.__setattr__(self, "faq", FaqOptions(**self.faq))
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise ValueError("p and q must lie in (0, 1)")
        if not 0 <= self.n_seeds < self.n:
            raise ValueError(f"n_seeds must be in [0, n), got {self.n_seeds} with n={self.n}")
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")

    @property
    def theta(self) -> tuple[float, float, float]:
        theta1 = self.alpha * (1.0 - self.gamma)
        if self.sign is Scenario.DIFFICULT:
            theta1 = -theta1
        return (self.theta0, theta1, self.alpha * self.gamma)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sign"] = self.sign.value
        out["link"] = self.link.value
        out["faq"] = self.faq.to_dict()
        return out


@dataclass(frozen=True)
class SimInstance:
    a: Graph
    y: Graph
    p: ProbMatrix
    b: Graph
    b_tilde: Graph
    q_star: Permutation
    seeds: SeedSet

    @property
    def covariates(self) -> CovariateBundle:
        return CovariateBundle(self.a.n, edge_covs=(self.y.as_float(),), edge_names=("Y",))


def simulate_instance(cfg: SimConfig, rng: np.random.Generator) -> SimInstance:
    """Draw one replication; every random choice comes from ``rng``."""
    a = gen_er(cfg.n, cfg.p, rng)
    y = gen_er(cfg.n, cfg.q, rng)
    p = build_p_matrix(a, y, *cfg.theta)
    b = sample_graph(p, rng)
    # relabel everything jointly so the seeds are the first n_seeds ids
    sigma = Permutation(rng.permutation(cfg.n))
    a, y, b = (apply_permutation(g, sigma) for g in (a, y, b))
    p = ProbMatrix(permute_matrix(p.values, sigma), n_clamped=p.n_clamped)
    seeds = SeedSet.first(cfg.n_seeds)
    b_tilde, q_star = shuffle_nonseeds(b, seeds, rng)
    return SimInstance(a, y, p, b, b_tilde, q_star, seeds)


@dataclass(frozen=True)
class RepRecord:
    rep: int
    rep_seed: int
    method: str
    matching_error: float
    objective: float
    wall_time: float
    n_clamped: int


def run_replication(cfg: SimConfig, rep: int, methods: Sequence[str]) -> list[RepRecord]:
    seed = rep_seed(cfg.base_rng_seed, rep)
    inst = simulate_instance(cfg, np.random.default_rng(seed))
    cov = inst.covariates
    out = []
    for name in methods:
        res = run_method(name, inst.a, inst.b_tilde, cov, inst.seeds, cfg.link, cfg.faq)
        out.append(RepRecord(
            rep=rep,
            rep_seed=seed,
            method=res.method,
            matching_error=matching_error(res.permutation, inst.q_star, inst.seeds),
            objective=res.objective,
            wall_time=res.wall_time,
            n_clamped=inst.p.n_clamped,
        ))
    return out


@dataclass(frozen=True)
class MethodStats:
    mean_error: float
    std_error: float
    mean_wall_time: float
    n_reps: int


@dataclass(frozen=True)
class ExperimentSummary:
    config: SimConfig
    methods: tuple
    records: tuple
    stats: dict

    def to_dict(self, include_timing: bool = True) -> dict:
        stats = {}
        for name, st in self.stats.items():
            entry = {"mean_error": st.mean_error, "std_error": st.std_error, "n_reps": st.n_reps}
            if include_timing:
                entry["mean_wall_time"] = st.mean_wall_time
            stats[name] = entry
        records = []
        for r in self.records:
            rec = asdict(r)
            if not include_timing:
                rec.pop("wall_time")
            records.append(rec)
        return {"config": self.config.to_dict(), "methods": list(self.methods),
                "stats": stats, "records": records}


def summarize(cfg: SimConfig, methods: Sequence[str], records: Sequence[RepRecord]) -> ExperimentSummary:
    """Aggregate per-rep records; the result does not depend on record order."""
    order = {m: k for k, m in enumerate(methods)}
    records = tuple(sorted(records, key=lambda r: (r.rep, order.get(r.method, len(order)), r.method)))
    stats = {}
    for name in methods:
        errs = [r.matching_error for r in records if r.method == name]
        times = [r.wall_time for r in records if r.method == name]
        k = len(errs)
        mean = math.fsum(errs) / k
        var = math.fsum((e - mean) ** 2 for e in errs) / (k - 1) if k > 1 else 0.0
        stats[name] = MethodStats(mean, math.sqrt(var), math.fsum(times) / k, k)
    return ExperimentSummary(cfg, tuple(methods), records, stats)


def _rep_job(args):
    cfg, rep, methods = args
    return run_replication(cfg, rep, methods)


def run_experiment(
    cfg: SimConfig, methods: Sequence[str] = METHOD_NAMES, n_jobs: int = 1
) -> ExperimentSummary:
    methods = tuple(m.strip().lower().replace("_", "-") for m in methods)
    for m in methods:
        if m not in METHOD_NAMES:
            raise ValueError(f"unknown method {m!r}")
    jobs = [(cfg, rep, methods) for rep in range(cfg.n_reps)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunks = list(pool.map(_rep_job, jobs))
    else:
        chunks = [_rep_job(j) for j in jobs]
    return summarize(cfg, methods, [r for chunk in chunks for r in chunk])


def run_grid(
    base: SimConfig,
    alphas: Sequence[float],
    gammas: Sequence[float],
    methods: Sequence[str] = METHOD_NAMES,
    n_jobs: int = 1,
) -> list[tuple[float, float, ExperimentSummary]]:
    """Run one experiment per ``(alpha, gamma)`` cell, sharing replication seeds."""
    out = []
    for alpha in alphas:
        for gamma in gammas:
            cfg = replace(base, alpha=float(alpha), gamma=float(gamma))
            out.append((float(alpha), float(gamma), run_experiment(cfg, methods, n_jobs)))
    return out


def correlated_er_instance(
    n: int, p: float, rho: float, n_seeds: int, rng: np.random.Generator
) -> tuple[Graph, Graph, ProbMatrix, Permutation, SeedSet]:
    """Correlated Erdos-Renyi pair: ``P(B_ij = 1 | A) = (1 - rho) p + rho A_ij``.

    Returns ``(a, b_tilde, p_matrix, q_star, seeds)`` with seeds ``0..n_seeds-1``.
    """
    a = gen_er(n, p, rng)
    pm = build_p_matrix(a, a, (1.0 - rho) * p, rho, 0.0)
    b = sample_graph(pm, rng)
    seeds = SeedSet.first(n_seeds)
    b_tilde, q_star = shuffle_nonseeds(b, seeds, rng)
    return a, b_tilde, pm, q_star, seeds
