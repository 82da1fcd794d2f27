"""Model weights from pointwise predictive densities: four schemes.

All schemes consume an n x K :class:`PointwiseMatrix` of leave-one-out log
predictive densities (or, for :func:`bma`, per-model log marginal
likelihoods) and return a :class:`WeightVector` on the simplex.

* :func:`pseudo_bma` -- weights proportional to exponentiated elpd totals.
* :func:`pseudo_bma_plus` -- pseudo-BMA regularized by a Bayesian bootstrap
  over observations, acknowledging uncertainty about future data.
* :func:`stacking` -- weights maximizing the leave-one-out log score of the
  mixture predictive; the objective is concave on the simplex.
* :func:`bma` -- posterior model probabilities from marginal likelihoods.

Exponentials of log densities and elpd totals are always evaluated with
log-sum-exp shifts; totals in the minus-hundreds are routine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointwiseMatrix",
    "WeightVector",
    "pseudo_bma",
    "pseudo_bma_plus",
    "stacking",
    "stacking_objective",
    "stacking_kkt_residual",
    "bma",
]

MIN_BOOTSTRAP = 100
SIMPLEX_TOL = 1e-12


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointwiseMatrix:
    """n x K matrix with entry (i, k) = log p(y_i | y_without_i, model k)."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("pointwise matrix must be two-dimensional")
        n, k = values.shape
        if n < 2:
            raise ValueError("pointwise matrix needs at least 2 observations")
        if k < 2:
            raise ValueError("model comparison needs K >= 2 models")
        if not np.isfinite(values).all():
            raise ValueError("pointwise log densities must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        labels = self.labels
        if labels is None:
            labels = tuple(f"M{j + 1}" for j in range(k))
        else:
            labels = tuple(str(lab) for lab in labels)
            if len(labels) != k:
                raise ValueError("label count must match the number of models")
            if len(set(labels)) != k:
                raise ValueError("model labels must be unique")
        object.__setattr__(self, "labels", labels)

    @property
    def n_obs(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_models(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Nonnegative weights summing to one, tagged with the producing scheme."""

    weights: np.ndarray
    scheme: str
    labels: tuple[str, ...] | None = None
    iterations: int | None = None
    converged: bool | None = None
    bootstrap_draws: int | None = None

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must form a nonempty vector")
        if not np.isfinite(w).all() or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("weights must sum to 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != w.size:
                raise ValueError("label count must match the number of weights")
            object.__setattr__(self, "labels", labels)


def _as_weights(w) -> np.ndarray:
    if isinstance(w, WeightVector):
        return np.asarray(w.weights, dtype=float)
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 1:
        raise ValueError("weights must form a vector")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-8:
        raise ValueError("weights must be nonnegative and sum to 1")
    return arr


# ---------------------------------------------------------------------------
# Pseudo-BMA and its Bayesian-bootstrap variant
# ---------------------------------------------------------------------------


def pseudo_bma(matrix: PointwiseMatrix) -> WeightVector:
    """Weights proportional to exp(elpd_k), shifted by the best total."""
    totals = matrix.values.sum(axis=0)
    z = np.exp(totals - totals.max())
    return WeightVector(z / z.sum(), "pseudo_bma", matrix.labels)


def pseudo_bma_plus(
    matrix: PointwiseMatrix, bootstrap_draws: int = 1000, seed: int = 0
) -> WeightVector:
    """Pseudo-BMA averaged over Bayesian-bootstrap reweightings of the observations.

    Each replicate draws Dirichlet(1, ..., 1) weights over observations as
    normalized unit-rate exponentials from a counter-based stream, rescales
    the weighted pointwise sums back to the sample size, and softmaxes; the
    reported weights average the replicates.  Deterministic given ``seed``.
    """
    if bootstrap_draws < MIN_BOOTSTRAP:
        raise ValueError(f"need at least {MIN_BOOTSTRAP} bootstrap draws")
    values = matrix.values
    if np.all(np.ptp(values, axis=0) == 0.0):
        # Every column is constant, so each Dirichlet reweighting reproduces
        # the plain column totals and the bootstrap is degenerate.
        base = pseudo_bma(matrix)
        return WeightVector(
            base.weights, "pseudo_bma_plus", matrix.labels, bootstrap_draws=bootstrap_draws
        )
    n = matrix.n_obs
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    draws = rng.standard_exponential((bootstrap_draws, n))
    draws /= draws.sum(axis=1, keepdims=True)
    replicate_elpd = n * (draws @ values)
    shifted = replicate_elpd - replicate_elpd.max(axis=1, keepdims=True)
    softmax = np.exp(shifted)
    softmax /= softmax.sum(axis=1, keepdims=True)
    w = softmax.mean(axis=0)
    return WeightVector(
        w / w.sum(), "pseudo_bma_plus", matrix.labels, bootstrap_draws=bootstrap_draws
    )


# ---------------------------------------------------------------------------
# Stacking
# ---------------------------------------------------------------------------


def stacking_objective(w, matrix: PointwiseMatrix) -> float:
    """Leave-one-out log score of the mixture predictive at weights ``w``."""
    weights = _as_weights(w)
    if weights.size != matrix.n_models:
        raise ValueError("weight count must match the number of models")
    values = matrix.values
    support = weights > 0
    sub = values[:, support]
    shift = sub.max(axis=1)
    inner = np.exp(sub - shift[:, None]) @ weights[support]
    return float(np.sum(shift + np.log(inner)))


def _mixture_gradient(dens: np.ndarray, counts: np.ndarray, w: np.ndarray) -> np.ndarray:
    # d/dw_k of sum_u c_u log(dens_u . w); the simplex multiplier is n because
    # w . gradient == sum(counts) identically.
    return dens.T @ (counts / (dens @ w))

def _kkt_residual(w: np.ndarray, grad: np.ndarray, n: float) -> float:
    slack = (w * np.abs(grad - n)).max()
    dual = (grad - n).max()
    return max(slack, dual, 0.0) / n


def stacking_kkt_residual(w, matrix: PointwiseMatrix) -> float:
    """Stationarity certificate at ``w``: 0 at the exact optimum.

    Combines complementary slackness ``w_k |g_k - n|`` with dual feasibility
    ``g_k <= n``, scaled by ``n`` (the simplex multiplier of the concave
    objective).
    """
    weights = _as_weights(w)
    values = matrix.values
    dens = np.exp(values - values.max(axis=1, keepdims=True))
    grad = _mixture_gradient(dens, np.ones(matrix.n_obs), weights)
    return _kkt_residual(weights, grad, float(matrix.n_obs))


def stacking(matrix: PointwiseMatrix, tol: float = 1e-10, max_iter: int = 100_000) -> WeightVector:
    """Maximize the mixture log score over the simplex.

    Multiplicative (exponentiated-gradient) ascent from the barycenter with
    backtracking on the objective; because the objective is concave, the
    fixed point of the full step is the global maximum.  Iteration stops
    when the stationarity certificate drops below ``tol``; if the cap is hit
    first, the best iterate is returned with ``converged=False``.

    Starting at the barycenter makes the update symmetric under model
    permutations, so exact ties resolve to the uniform distribution over the
    optimal face rather than an arbitrary vertex.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rows, row_counts = np.unique(matrix.values, axis=0, return_counts=True)
    dens = np.exp(rows - rows.max(axis=1, keepdims=True))
    counts = row_counts.astype(float)
    n = float(counts.sum())
    k = matrix.n_models

    w = np.full(k, 1.0 / k)
    objective = float(counts @ np.log(dens @ w))
    grad = _mixture_gradient(dens, counts, w)
    iterations = 0
    converged = _kkt_residual(w, grad, n) <= tol
    while not converged and iterations < max_iter:
        step = 1.0
        while True:
            candidate = w * (grad / n) ** step
            candidate /= candidate.sum()
            cand_objective = float(counts @ np.log(dens @ candidate))
            if cand_objective >= objective - 1e-12 * (1.0 + abs(objective)) or step <= 1e-3:
                break
            step *= 0.5
        w, objective = candidate, cand_objective
        grad = _mixture_gradient(dens, counts, w)
        iterations += 1
        converged = _kkt_residual(w, grad, n) <= tol
    return WeightVector(
        w, "stacking", matrix.labels, iterations=iterations, converged=bool(converged)
    )


# ---------------------------------------------------------------------------
# Marginal-likelihood model averaging
# ---------------------------------------------------------------------------


def bma(log_marginals, prior_probs=None, labels=None) -> WeightVector:
    """Posterior model probabilities from log marginal likelihoods.

    ``-inf`` marginals (models contradicted by the data) receive weight
    exactly 0; it is an error for every marginal to be ``-inf``.
    """
    lm = np.asarray(log_marginals, dtype=float)
    if lm.ndim != 1 or lm.size < 2:
        raise ValueError("model comparison needs K >= 2 marginal likelihoods")
    if np.any(np.isnan(lm)) or np.any(lm == math.inf):
        raise ValueError("log marginal likelihoods must be finite or -inf")
    finite = lm > -math.inf
    if not finite.any():
        raise ValueError("all marginal likelihoods are -inf")
    if prior_probs is None:
        prior = np.full(lm.size, 1.0 / lm.size)
    else:
        prior = np.asarray(prior_probs, dtype=float)
        if prior.shape != lm.shape:
            raise ValueError("prior probabilities must match the number of models")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-8:
            raise ValueError("prior probabilities must be nonnegative and sum to 1")
    z = prior * np.exp(lm - lm[finite].max())
    total = z.sum()
    if total == 0.0:
        raise ValueError("prior assigns no mass to any model with finite marginal")
    return WeightVector(z / total, "bma", labels)
