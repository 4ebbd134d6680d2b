"""Covariate-assisted seeded graph matching."""

__version__ = "0.1.0"

from .assign import Sense, brute_force_lap, solve_lap
from .covariates import (
    CovariateBundle,
    TransformKind,
    build_design_row,
    seed_pairs,
    transform_node_pair,
)
from .glm import (
    GlmError,
    GlmFit,
    LinkKind,
    ProbMatrix,
    fit_glm,
    fit_seed_glm,
    glm_gradient_hessian,
    glm_loss,
    predict_prob_matrix,
)
from .graph import (
    Graph,
    Permutation,
    SeedSet,
    apply_permutation,
    edge_disagreement,
    invert_permutation,
    matching_error,
)
from .matchers import (
    MatchResult,
    avg_sim,
    cov_neigh,
    cov_qap,
    neighborhood_match,
    no_cov_neigh,
    no_cov_qap,
    run_method,
)
from .qap import FaqOptions, brute_force_qap, qap_objective, seeded_faq
from .simulate import SimConfig, run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
