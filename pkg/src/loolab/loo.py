"""Elpd estimates, paired model comparisons, and Pareto-smoothed importance sampling.

The expected log pointwise predictive density (elpd) of a model is the sum
over observations of log p(y_i | y_without_i).  For conjugate models the
pointwise terms come from :mod:`loolab.models` in closed form; for models
available only as posterior draws, :func:`psis_loo` estimates them by
importance sampling with Pareto-smoothed weights and reports the fitted
tail-shape diagnostic ``khat`` per observation.

Reporting conventions
---------------------
``elpd`` is a *sum* over observations, not a mean, and ``se`` is
``sqrt(n * sample_variance(pointwise))`` so that it is the standard error of
that sum.  The sample variance is the simple empirical estimator; it is
known to be optimistic for cross-validation scores and no corrected
estimator is provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "DegenerateTailError",
    "ElpdEstimate",
    "PairedDiff",
    "LogLikDraws",
    "ParetoDiagnostics",
    "sample_variance",
    "elpd_from_pointwise",
    "paired_diff",
    "gpd_fit",
    "smooth_importance_weights",
    "psis_loo",
]

MIN_DRAWS = 100
KHAT_THRESHOLD = 0.7


class DegenerateTailError(ValueError):
    """Raised when a tail sample carries no information about its shape."""


# ---------------------------------------------------------------------------
# Elpd containers and arithmetic
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ElpdEstimate:
    """Elpd point estimate, its empirical standard error, and the pointwise terms."""

    elpd: float
    se: float
    pointwise: np.ndarray


@dataclass(frozen=True, eq=False)
class PairedDiff:
    """Elpd difference of two models decomposed over shared observations."""

    diff: float
    se_diff: float
    pointwise_diff: np.ndarray


@dataclass(frozen=True, eq=False)
class LogLikDraws:
    """S x n matrix of log p(y_i | theta_s) over posterior draws."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("log-likelihood draws must form an S x n matrix")
        if values.shape[0] < MIN_DRAWS:
            raise ValueError(f"need at least {MIN_DRAWS} draws, got {values.shape[0]}")
        if not np.isfinite(values).all():
            raise ValueError("log-likelihood draws must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != values.shape[1]:
                raise ValueError("label count must match the number of observations")
            object.__setattr__(self, "labels", labels)

    @property
    def n_draws(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_obs(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True, eq=False)
class ParetoDiagnostics:
    """Fitted tail shapes per observation; ``khat > threshold`` flags leverage points."""

    khat: np.ndarray
    threshold: float = KHAT_THRESHOLD

    @property
    def flagged(self) -> np.ndarray:
        return np.flatnonzero(self.khat > self.threshold)


def sample_variance(values) -> float:
    """Unbiased sample variance; exactly 0.0 for a constant vector."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("sample variance needs at least 2 values")
    if np.ptp(x) == 0.0:
        return 0.0
    return float(np.var(x, ddof=1))


def elpd_from_pointwise(pointwise) -> ElpdEstimate:
    """Sum pointwise log predictive densities into an elpd with standard error."""
    x = np.asarray(pointwise, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("pointwise vector must be one-dimensional with length >= 2")
    if not np.isfinite(x).all():
        raise ValueError("pointwise log densities must be finite")
    return ElpdEstimate(
        elpd=float(x.sum()),
        se=math.sqrt(x.size * sample_variance(x)),
        pointwise=x.copy(),
    )


def paired_diff(pw_a, pw_b) -> PairedDiff:
    """Pointwise elpd difference (model A minus model B) with its standard error."""
    a = np.asarray(pw_a, dtype=float)
    b = np.asarray(pw_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("pointwise vectors must have equal length")
    if a.ndim != 1 or a.size < 2:
        raise ValueError("pointwise vectors must be one-dimensional with length >= 2")
    d = a - b
    return PairedDiff(
        diff=float(d.sum()),
        se_diff=math.sqrt(d.size * sample_variance(d)),
        pointwise_diff=d,
    )


# ---------------------------------------------------------------------------
# Generalized Pareto tail fitting
# ---------------------------------------------------------------------------


def gpd_fit(tail) -> tuple[float, float]:
    """Estimate generalized Pareto shape ``k`` and scale ``sigma`` from exceedances.

    ``tail`` must hold at least 5 exceedances over a threshold, sorted
    ascending.  The estimate profiles the likelihood over a fixed grid of
    candidate reparametrized shapes and averages the grid with the profile
    weights; the returned ``k`` is shrunk toward 0.5 with ten pseudo
    observations, which stabilizes small tails without moving large ones.
    """
    x = np.asarray(tail, dtype=float)
    n = x.size
    if n < 5:
        raise ValueError("generalized Pareto fit needs at least 5 exceedances")
    if np.any(np.diff(x) < 0):
        raise ValueError("exceedances must be sorted ascending")
    if x[0] < 0 or not np.isfinite(x).all():
        raise ValueError("exceedances must be finite and nonnegative")
    if np.ptp(x) == 0.0:
        raise DegenerateTailError("constant tail admits no shape estimate")
    quartile = x[int(n / 4 + 0.5) - 1]
    if quartile <= 0 or x[-1] <= 0:
        raise DegenerateTailError("tail has no positive spread below the quartile")

    m = 30 + math.isqrt(n)
    grid = np.arange(1.0, m + 1.0)
    b = 1.0 / x[-1] + (1.0 - np.sqrt(m / (grid - 0.5))) / (3.0 * quartile)
    k_profile = np.mean(np.log1p(np.outer(-b, x)), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lik = n * (np.log(-b / k_profile) - k_profile - 1.0)
    log_lik = np.nan_to_num(log_lik, nan=-np.inf)
    weights = np.exp(log_lik - log_lik.max())
    weights /= weights.sum()
    b_post = float(np.sum(b * weights))
    if b_post == 0.0:
        raise DegenerateTailError("profile collapsed onto a zero rate")
    k_post = float(np.mean(np.log1p(-b_post * x)))
    sigma = -k_post / b_post
    k_hat = (n * k_post + 5.0) / (n + 10.0)
    return k_hat, sigma


def _gpd_quantile(u, sigma: float, k: float):
    if k == 0.0:
        return -sigma * np.log1p(-u)
    return sigma * np.expm1(-k * np.log1p(-u)) / k


# ---------------------------------------------------------------------------
# Pareto-smoothed importance sampling
# ---------------------------------------------------------------------------


def smooth_importance_weights(log_ratios) -> tuple[np.ndarray, float]:
    """Normalize importance ratios after Pareto-smoothing their largest values.

    The ``ceil(min(0.2 S, 3 sqrt(S)))`` largest ratios are replaced by
    expected order statistics of a generalized Pareto distribution fitted to
    their exceedances over the largest remaining ratio, then truncated at
    the raw maximum.  Returns the normalized weights and the fitted tail
    shape ``khat``; a tail too degenerate to fit leaves the weights
    unsmoothed and reports ``khat = -inf``.
    """
    lr = np.asarray(log_ratios, dtype=float)
    if lr.ndim != 1:
        raise ValueError("log ratios must be one-dimensional")
    s = lr.size
    if s < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} ratios, got {s}")
    if not np.isfinite(lr).all():
        raise ValueError("log ratios must be finite")

    ratios = np.exp(lr - lr.max())
    if np.ptp(ratios) == 0.0:
        return ratios / ratios.sum(), -math.inf

    m = int(math.ceil(min(0.2 * s, 3.0 * math.sqrt(s))))
    order = np.argsort(ratios, kind="stable")
    tail_idx = order[s - m :]
    cutoff = ratios[order[s - m - 1]]
    exceedances = ratios[tail_idx] - cutoff
    if np.ptp(exceedances) == 0.0 or exceedances[-1] <= 0.0:
        return ratios / ratios.sum(), -math.inf
    try:
        k_hat, sigma = gpd_fit(exceedances)
    except DegenerateTailError:
        return ratios / ratios.sum(), -math.inf

    u = (np.arange(1.0, m + 1.0) - 0.5) / m
    smoothed = ratios.copy()
    smoothed[tail_idx] = np.minimum(cutoff + _gpd_quantile(u, sigma, k_hat), 1.0)
    return smoothed / smoothed.sum(), float(k_hat)


def psis_loo(
    draws: LogLikDraws, khat_threshold: float = KHAT_THRESHOLD
) -> tuple[ElpdEstimate, ParetoDiagnostics]:
    """PSIS leave-one-out elpd from posterior log-likelihood draws.

    For each observation the importance ratios are the reciprocal
    likelihoods (largest where the observation is most influential); the
    smoothed, truncated weights then average the likelihood draws:
    ``elpd_i = log( sum_s w_s exp(loglik_si) / sum_s w_s )``.
    """
    ll = draws.values
    n = draws.n_obs
    pointwise = np.empty(n)
    khat = np.empty(n)
    for i in range(n):
        weights, k = smooth_importance_weights(-ll[:, i])
        with np.errstate(divide="ignore"):
            log_weights = np.log(weights)
        pointwise[i] = logsumexp(log_weights + ll[:, i])
        khat[i] = k
    return elpd_from_pointwise(pointwise), ParetoDiagnostics(khat, khat_threshold)
