"""Seed-block GLM fit and edge-probability prediction.

The loss over unordered seed pairs is the negative Bernoulli/Gaussian
log-likelihood written through the cumulant function::

    L(theta) = sum_{i>j in seeds} -B_ij * x_ij' theta + psi(x_ij' theta)
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .covariates import CovariateBundle, design_columns, seed_design
from .graph import Graph, SeedSet

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_ITER = 100
THETA_CAP = 30.0
RIDGE_FACTOR = 1e-8


class GlmError(ValueError):
    """Raised when the seed-block regression cannot be fitted."""


class SeparationWarning(RuntimeWarning):
    pass


class LinkKind(str, enum.Enum):
    IDENTITY = "identity"
    LOGIT = "logit"

    @classmethod
    def parse(cls, value: "str | LinkKind") -> "LinkKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"linear": cls.IDENTITY, "ols": cls.IDENTITY, "logistic": cls.LOGIT}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown link {value!r}") from None

    def mean(self, t):
        if self is LinkKind.IDENTITY:
            return np.asarray(t, dtype=np.float64)
        return _sigmoid(t)

    def mean_deriv(self, t):
        if self is LinkKind.IDENTITY:
            return np.ones_like(np.asarray(t, dtype=np.float64))
        mu = _sigmoid(t)
        return mu * (1.0 - mu)

    def cumulant(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self is LinkKind.IDENTITY:
            return 0.5 * t * t
        return np.logaddexp(0.0, t)


def _sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _as_problem(theta, x, y):
    theta = np.asarray(theta, dtype=np.float64)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("no design rows")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"{x.shape[0]} design rows but {y.shape[0]} responses")
    if theta.shape != (x.shape[1],):
        raise ValueError(f"theta has shape {theta.shape}, design has {x.shape[1]} columns")
    for name, arr in (("theta", theta), ("design", x), ("response", y)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite values in {name}")
    return theta, x, y


def glm_loss(theta, x, y, link: LinkKind) -> float:
    theta, x, y = _as_problem(theta, x, y)
    link = LinkKind.parse(link)
    eta = x @ theta
    return float(np.sum(link.cumulant(eta) - y * eta))


def glm_gradient_hessian(theta, x, y, link: LinkKind) -> tuple[np.ndarray, np.ndarray]:
    theta, x, y = _as_problem(theta, x, y)
    link = LinkKind.parse(link)
    eta = x @ theta
    grad = -x.T @ (y - link.mean(eta))
    hess = (x * link.mean_deriv(eta)[:, None]).T @ x
    return grad, 0.5 * (hess + hess.T)


@dataclass(frozen=True)
class GlmFit:
    """Fitted seed-block regression.

    ``theta`` is always in original covariate units. When the fit was run on
    standardized columns, ``theta_scaled`` and ``column_scale`` hold the
    scaled-unit coefficients and the per-column divisors.
    """

    link: LinkKind
    theta: np.ndarray
    loss_trace: tuple
    converged: bool
    std_errors: np.ndarray | None = None
    n_iter: int = 0
    grad_inf: float = float("nan")
    ridge_used: bool = False
    separated: bool = False
    theta_scaled: np.ndarray | None = None
    column_scale: np.ndarray | None = None
    n_obs: int = 0

    @property
    def d(self) -> int:
        return self.theta.shape[0]

    def to_dict(self, names=None) -> dict:
        names = names or [f"theta{k}" for k in range(self.d)]
        out = {
            "link": self.link.value,
            "coefficients": {k: float(v) for k, v in zip(names, self.theta)},
            "std_errors": None if self.std_errors is None
            else {k: float(v) for k, v in zip(names, self.std_errors)},
            "converged": self.converged,
            "n_iter": self.n_iter,
            "grad_inf": self.grad_inf,
            "ridge_used": self.ridge_used,
            "separated": self.separated,
            "n_obs": self.n_obs,
            "final_loss": self.loss_trace[-1] if self.loss_trace else None,
        }
        if self.theta_scaled is not None:
            out["coefficients_scaled"] = {k: float(v) for k, v in zip(names, self.theta_scaled)}
            out["column_scale"] = {k: float(v) for k, v in zip(names, self.column_scale)}
        return out


def _newton_direction(hess: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``hess @ step = grad``, adding a single ridge if needed."""
    try:
        chol = np.linalg.cholesky(hess)
        ridged = False
    except np.linalg.LinAlgError:
        d = hess.shape[0]
        ridge = RIDGE_FACTOR * np.trace(hess) / d
        warnings.warn(
            f"singular Hessian, adding ridge {ridge:.3g}; design columns may be collinear",
            RuntimeWarning,
            stacklevel=3,
        )
        try:
            if not np.isfinite(ridge) or ridge <= 0:
                raise np.linalg.LinAlgError("zero ridge")
            chol = np.linalg.cholesky(hess + ridge * np.eye(d))
        except np.linalg.LinAlgError:
            raise GlmError(
                "Hessian is singular even after ridge; the design is degenerate "
                "(collinear or constant covariates on the seed block)"
            ) from None
        ridged = True
    z = np.linalg.solve(chol, grad)
    return np.linalg.solve(chol.T, z), ridged


def _std_errors(x, y, theta, link, hess) -> np.ndarray | None:
    m, d = x.shape
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return None
    if link is LinkKind.IDENTITY:
        # binary responses are heteroskedastic: sandwich (HC1) covariance
        if m <= d:
            return None
        resid = y - x @ theta
        meat = (x * (resid * resid)[:, None]).T @ x
        cov = cov @ meat @ cov * (m / (m - d))
    diag = np.diag(cov)
    if np.any(diag < 0):
        return None
    return np.sqrt(diag)


def fit_glm(
    x,
    y,
    link: LinkKind = LinkKind.LOGIT,
    grad_tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
    theta_cap: float = THETA_CAP,
    std_errors: bool = True,
) -> GlmFit:
    """Minimise the GLM loss by Newton-Raphson with step halving.

    The identity link has a closed form and is solved through the normal
    equations (plus one refinement step). For the logit link iterations stop
    when ``max|grad| <= grad_tol``; if a coefficient runs past ``theta_cap``
    the data are treated as separated, the coefficients are clipped and the
    fit is flagged as not converged.
    """
    link = LinkKind.parse(link)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    m, d = x.shape
    if m < d:
        raise GlmError(f"insufficient seeds: {m} seed pairs for {d} coefficients")
    dead = np.flatnonzero(~np.any(x != 0, axis=0))
    if dead.size:
        raise GlmError(
            f"degenerate design: column(s) {dead.tolist()} are identically zero, "
            "so the Hessian is singular"
        )
    theta = np.zeros(d)
    loss = glm_loss(theta, x, y, link)
    if not np.isfinite(loss):
        raise GlmError("non-finite loss at the starting point")
    trace = [loss]
    ridge_used = separated = False
    n_iter = 0

    if link is LinkKind.IDENTITY:
        for n_iter in range(1, 3):
            grad, hess = glm_gradient_hessian(theta, x, y, link)
            if np.max(np.abs(grad)) <= grad_tol:
                break
            step, ridged = _newton_direction(hess, grad)
            ridge_used |= ridged
            theta = theta - step
            trace.append(glm_loss(theta, x, y, link))
    else:
        for n_iter in range(1, max_iter + 1):
            grad, hess = glm_gradient_hessian(theta, x, y, link)
            if np.max(np.abs(grad)) <= grad_tol:
                n_iter -= 1
                break
            step, ridged = _newton_direction(hess, grad)
            ridge_used |= ridged
            t = 1.0
            for _ in range(60):
                cand = theta - t * step
                cand_loss = glm_loss(cand, x, y, link)
                if cand_loss <= loss:
                    break
                t *= 0.5
            else:
                log.debug("step halving failed to reduce the loss at iteration %d", n_iter)
                break
            theta, loss = cand, cand_loss
            trace.append(loss)
            if np.max(np.abs(theta)) > theta_cap:
                theta = np.clip(theta, -theta_cap, theta_cap)
                separated = True
                warnings.warn(
                    f"coefficients exceeded {theta_cap:g}; seed block looks separated",
                    SeparationWarning,
                    stacklevel=2,
                )
                trace.append(glm_loss(theta, x, y, link))
                break

    grad, hess = glm_gradient_hessian(theta, x, y, link)
    grad_inf = float(np.max(np.abs(grad)))
    if not np.isfinite(trace[-1]):
        raise GlmError("non-finite loss during fitting")
    converged = (grad_inf <= grad_tol) and not separated
    se = _std_errors(x, y, theta, link, hess) if std_errors else None
    return GlmFit(
        link=link,
        theta=theta,
        loss_trace=tuple(float(v) for v in trace),
        converged=converged,
        std_errors=se,
        n_iter=n_iter,
        grad_inf=grad_inf,
        ridge_used=ridge_used,
        separated=separated,
        n_obs=m,
    )


def fit_seed_glm(
    a: Graph,
    b_tilde: Graph,
    c: CovariateBundle,
    seeds: SeedSet,
    link: LinkKind = LinkKind.LOGIT,
    standardize: bool = False,
    **opts,
) -> GlmFit:
    """Fit the regression of ``b_tilde`` on ``a`` and covariates over seed pairs.

    With ``standardize`` every non-intercept column is divided by its largest
    absolute value on the seed block before fitting.
    """
    if a.n != b_tilde.n:
        raise ValueError(f"graph sizes differ: {a.n} vs {b_tilde.n}")
    x, y = seed_design(a, b_tilde, c, seeds)
    if not standardize:
        return fit_glm(x, y, link, **opts)
    scale = np.max(np.abs(x), axis=0)
    scale[0] = 1.0
    scale[scale == 0] = 1.0
    fit = fit_glm(x / scale, y, link, **opts)
    se = None if fit.std_errors is None else fit.std_errors / scale
    return GlmFit(
        link=fit.link,
        theta=fit.theta / scale,
        loss_trace=fit.loss_trace,
        converged=fit.converged,
        std_errors=se,
        n_iter=fit.n_iter,
        grad_inf=fit.grad_inf,
        ridge_used=fit.ridge_used,
        separated=fit.separated,
        theta_scaled=fit.theta,
        column_scale=scale,
        n_obs=fit.n_obs,
    )


@dataclass(frozen=True, eq=False)
class ProbMatrix:
    """Symmetric matrix of edge probabilities with a zero diagonal."""

    values: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"probability matrix must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("probability matrix must be symmetric")
        if np.any(np.diagonal(v) != 0):
            raise ValueError("probability matrix must have a zero diagonal")
        if np.any(v < 0) or np.any(v > 1) or not np.all(np.isfinite(v)):
            raise ValueError("probabilities must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def clamp_probabilities(raw: np.ndarray) -> ProbMatrix:
    """Clip to ``[0, 1]``, zero the diagonal and count clipped vertex pairs."""
    raw = np.array(raw, dtype=np.float64)
    np.fill_diagonal(raw, 0.0)
    out = (raw < 0) | (raw > 1)
    n_clamped = int(np.count_nonzero(np.triu(out, 1)))
    if n_clamped:
        log.info("clamped %d predicted probabilities into [0, 1]", n_clamped)
    return ProbMatrix(np.clip(raw, 0.0, 1.0), n_clamped=n_clamped)


def linear_predictor(theta, a: Graph, c: CovariateBundle) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (c.d,):
        raise ValueError(f"coefficient vector has length {theta.size}, design needs {c.d}")
    eta = np.zeros((a.n, a.n))
    for coef, col in zip(theta, design_columns(a, c)):
        if coef != 0.0:
            eta += coef * col
    return eta


def predict_prob_matrix(fit: GlmFit, a: Graph, c: CovariateBundle) -> ProbMatrix:
    eta = linear_predictor(fit.theta, a, c)
    return clamp_probabilities(fit.link.mean(eta))
