"""Conjugate Bayesian model families with closed-form predictive densities.

Four families cover the point-null versus conjugate-alternative comparisons
used throughout the package:

* ``BernoulliPoint`` -- Bernoulli likelihood with the success probability
  pinned to a point (endpoints 0 and 1 are allowed and act as deterministic
  null models);
* ``BetaBernoulli`` -- Bernoulli likelihood with a Beta(a, b) prior;
* ``NormalPoint`` -- known-variance normal likelihood with the mean pinned;
* ``NormalConjugate`` -- known-variance normal likelihood with a normal
  prior on the mean.

Every quantity of interest (leave-one-out predictive density, marginal
likelihood, posterior predictive density) exists in closed form, so these
families double as exact references for the sampling-based estimators in
:mod:`loolab.loo`.

Sign conventions: all densities are returned on the log scale.  A point-mass
model that assigns probability zero to an observed value yields ``-inf``;
the value propagates through sums but is rejected by weight schemes that
require finite pointwise densities (see :mod:`loolab.weights`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

__all__ = [
    "Dataset",
    "DgpSpec",
    "Model",
    "BernoulliPoint",
    "BetaBernoulli",
    "NormalPoint",
    "NormalConjugate",
    "exact_loo_pointwise",
    "log_marginal_likelihood",
    "posterior_predictive_logpdf",
    "simulate",
]

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered sequence of real observations (Bernoulli data coded 0/1)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("observations must form a one-dimensional sequence")
        if values.size and not np.isfinite(values).all():
            raise ValueError("observations must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)


def _as_dataset(data) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(np.asarray(data))


def _require_binary(values: np.ndarray, what: str = "data") -> None:
    if values.size and not np.isin(values, (0.0, 1.0)).all():
        raise ValueError(f"Bernoulli-family models require 0/1 {what}")


def _normal_logpdf(y, mean, var):
    return -_HALF_LOG_2PI - 0.5 * np.log(var) - (y - mean) ** 2 / (2.0 * var)


# ---------------------------------------------------------------------------
# Model families
# ---------------------------------------------------------------------------


class Model:
    """Shared interface of the conjugate families.

    Subclasses provide ``loo_pointwise``, ``log_marginal`` and
    ``predictive_logpdf``; the module-level functions below add the
    cross-family precondition checks.
    """

    def check_data(self, data: Dataset) -> None:
        raise NotImplementedError

    def loo_pointwise(self, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    def log_marginal(self, data: Dataset) -> float:
        raise NotImplementedError

    def predictive_logpdf(self, data: Dataset, y_new: float) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class BernoulliPoint(Model):
    """Bernoulli likelihood with success probability fixed at ``theta0``.

    ``theta0`` may sit on the endpoints 0 or 1; an observation contradicting
    an endpoint point mass has log density ``-inf`` and the ``0 * log 0 = 0``
    convention applies to the marginal likelihood.
    """

    theta0: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta0 <= 1.0:
            raise ValueError("theta0 must lie in [0, 1]")

    def check_data(self, data: Dataset) -> None:
        _require_binary(data.values)

    def _log_pmf(self, y):
        with np.errstate(divide="ignore"):
            log_p1 = np.log(self.theta0)
            log_p0 = np.log1p(-self.theta0)
        return np.where(np.asarray(y) == 1.0, log_p1, log_p0)

    def loo_pointwise(self, data: Dataset) -> np.ndarray:
        return self._log_pmf(data.values)

    def log_marginal(self, data: Dataset) -> float:
        s = float(data.values.sum())
        f = data.n - s
        total = 0.0
        if s > 0:
            total += s * (math.log(self.theta0) if self.theta0 > 0 else -math.inf)
        if f > 0:
            total += f * (math.log1p(-self.theta0) if self.theta0 < 1 else -math.inf)
        return total

    def predictive_logpdf(self, data: Dataset, y_new: float) -> float:
        _require_binary(np.asarray([float(y_new)]), "query values")
        return float(self._log_pmf(float(y_new)))


@dataclass(frozen=True)
class BetaBernoulli(Model):
    """Bernoulli likelihood with a Beta(a, b) prior on the success probability."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta hyperparameters a, b must be positive")

    def check_data(self, data: Dataset) -> None:
        _require_binary(data.values)

    def loo_pointwise(self, data: Dataset) -> np.ndarray:
        y = data.values
        n = data.n
        s = float(y.sum())
        f = n - s
        # Posterior mean of the Beta posterior built from the other n-1 points,
        # written symmetrically in (a, successes) and (b, failures) so that
        # balanced data under a symmetric prior gives bit-identical entries.
        numer = np.where(y == 1.0, self.a + (s - 1.0), self.b + (f - 1.0))
        denom = self.a + self.b + (n - 1.0)
        return np.log(numer / denom)

    def log_marginal(self, data: Dataset) -> float:
        s = float(data.values.sum())
        f = data.n - s
        return float(betaln(self.a + s, self.b + f) - betaln(self.a, self.b))

    def predictive_logpdf(self, data: Dataset, y_new: float) -> float:
        _require_binary(np.asarray([float(y_new)]), "query values")
        s = float(data.values.sum())
        f = data.n - s
        numer = self.a + s if float(y_new) == 1.0 else self.b + f
        return math.log(numer / (self.a + self.b + data.n))


@dataclass(frozen=True)
class NormalPoint(Model):
    """Normal likelihood with known standard deviation and fixed mean."""

    mu0: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def check_data(self, data: Dataset) -> None:
        pass

    def loo_pointwise(self, data: Dataset) -> np.ndarray:
        return _normal_logpdf(data.values, self.mu0, self.sigma**2)

    def log_marginal(self, data: Dataset) -> float:
        return float(np.sum(_normal_logpdf(data.values, self.mu0, self.sigma**2)))

    def predictive_logpdf(self, data: Dataset, y_new: float) -> float:
        return float(_normal_logpdf(float(y_new), self.mu0, self.sigma**2))


@dataclass(frozen=True)
class NormalConjugate(Model):
    """Known-variance normal likelihood with a N(mu0, tau0^2) prior on the mean."""

    mu0: float
    tau0: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.tau0 > 0:
            raise ValueError("prior sd tau0 must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def check_data(self, data: Dataset) -> None:
        pass

    def _posterior(self, total: float, n: int) -> tuple[float, float]:
        prior_prec = self.tau0**-2
        lik_prec = self.sigma**-2
        prec = prior_prec + n * lik_prec
        mean = (self.mu0 * prior_prec + total * lik_prec) / prec
        return mean, 1.0 / prec

    def loo_pointwise(self, data: Dataset) -> np.ndarray:
        y = data.values
        n = data.n
        prior_prec = self.tau0**-2
        lik_prec = self.sigma**-2
        prec = prior_prec + (n - 1) * lik_prec
        means = (self.mu0 * prior_prec + (y.sum() - y) * lik_prec) / prec
        var = 1.0 / prec + self.sigma**2
        return _normal_logpdf(y, means, var)

    def log_marginal(self, data: Dataset) -> float:
        n = data.n
        if n == 0:
            return 0.0
        y = data.values
        ybar = float(y.mean())
        ss = float(np.sum((y - ybar) ** 2))
        var = self.sigma**2
        # Factor the joint density into the within-sample spread around the
        # mean and the marginal law of the sample mean.
        out = -n * (_HALF_LOG_2PI + 0.5 * math.log(var)) - ss / (2.0 * var)
        out += _HALF_LOG_2PI + 0.5 * math.log(var / n)
        out += float(_normal_logpdf(ybar, self.mu0, self.tau0**2 + var / n))
        return out

    def predictive_logpdf(self, data: Dataset, y_new: float) -> float:
        mean, var = self._posterior(float(data.values.sum()), data.n)
        return float(_normal_logpdf(float(y_new), mean, var + self.sigma**2))


# ---------------------------------------------------------------------------
# Spec-level operations
# ---------------------------------------------------------------------------


def exact_loo_pointwise(model: Model, data) -> np.ndarray:
    """Closed-form log p(y_i | y_without_i) for every observation.

    Requires at least two observations so that leaving one out leaves data.
    Entries may be ``-inf`` when a point-mass model contradicts the data.
    """
    data = _as_dataset(data)
    if data.n < 2:
        raise ValueError("leave-one-out needs at least 2 observations")
    model.check_data(data)
    return model.loo_pointwise(data)


def log_marginal_likelihood(model: Model, data) -> float:
    """Closed-form log p(y | model); equals the summed one-step-ahead chain."""
    data = _as_dataset(data)
    model.check_data(data)
    return model.log_marginal(data)


def posterior_predictive_logpdf(model: Model, data, y_new: float) -> float:
    """Log predictive density of ``y_new`` given all of ``data``.

    An empty dataset yields the prior predictive density.
    """
    data = _as_dataset(data)
    model.check_data(data)
    return model.predictive_logpdf(data, y_new)


# ---------------------------------------------------------------------------
# Data-generating processes
# ---------------------------------------------------------------------------

_IDEALIZED_KINDS = ("all_ones", "alternating_pairs", "all_zeros")
_STOCHASTIC_KINDS = ("bernoulli_iid", "normal_iid")


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process: an idealized sequence or a seeded sampler.

    Kinds
    -----
    ``all_ones``, ``alternating_pairs`` (1,0,1,0,...), ``all_zeros``:
        deterministic sequences, no seed required.
    ``bernoulli_iid``:
        iid Bernoulli(theta); requires ``theta`` and ``seed``.
    ``normal_iid``:
        iid Normal(mu, sigma^2); requires ``mu``, ``sigma`` and ``seed``.
    """

    kind: str
    theta: float | None = None
    mu: float | None = None
    sigma: float | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _IDEALIZED_KINDS + _STOCHASTIC_KINDS:
            raise ValueError(f"unknown dgp kind {self.kind!r}")
        if self.kind in _STOCHASTIC_KINDS and self.seed is None:
            raise ValueError(f"dgp kind {self.kind!r} requires a seed")
        if self.kind == "bernoulli_iid":
            if self.theta is None or not 0.0 <= self.theta <= 1.0:
                raise ValueError("bernoulli_iid requires theta in [0, 1]")
        if self.kind == "normal_iid":
            if self.mu is None or self.sigma is None or not self.sigma > 0:
                raise ValueError("normal_iid requires mu and sigma > 0")


def _rng(seed: int) -> np.random.Generator:
    # Philox is counter-based: streams keyed this way are stable across
    # platforms and safe to derive per replication.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def simulate(dgp: DgpSpec, n: int) -> Dataset:
    """Draw ``n`` observations; deterministic given ``(kind, seed, n)``.

    For stochastic kinds the draw at size ``n`` is a prefix of the draw at
    any larger size with the same seed, so growing-sample trajectories can
    reuse a single stream.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if dgp.kind == "all_ones":
        return Dataset(np.ones(n))
    if dgp.kind == "all_zeros":
        return Dataset(np.zeros(n))
    if dgp.kind == "alternating_pairs":
        return Dataset(np.where(np.arange(n) % 2 == 0, 1.0, 0.0))
    rng = _rng(int(dgp.seed))
    if dgp.kind == "bernoulli_iid":
        return Dataset((rng.random(n) < dgp.theta).astype(float))
    return Dataset(dgp.mu + dgp.sigma * rng.standard_normal(n))
