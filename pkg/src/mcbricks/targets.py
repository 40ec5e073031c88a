"""Built-in analytic targets for the harness and the test suite.

Every target is expressed through the library-wide Target contract
(unnormalized log density plus gradient).  Two carry analytic moments for
exactness checks; the banana and funnel stress curved and varying-scale
geometry; the logistic-regression posterior is built on synthetic data
generated deterministically from an RNG key, so runs remain reproducible
without shipping data files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Target
from .rng import RngKey, normal_matrix, normal_vector, split_key, uniform_vector
from .smc.tempering import TemperedTarget

__all__ = [
    "BuiltinTarget",
    "MCMC_TARGET_NAMES",
    "SMC_TARGET_NAMES",
    "make_builtin",
    "make_tempered",
    "std_normal",
    "aniso_gauss",
    "banana",
    "funnel",
    "logistic_synth",
    "LogisticData",
    "make_logistic_data",
    "conjugate_gaussian_data",
    "conjugate_gaussian_log_evidence",
    "conjugate_gaussian_posterior",
]

LOGISTIC_NUM_POINTS = 200
LOGISTIC_NUM_FEATURES = 5
CONJUGATE_NUM_OBSERVATIONS = 5


@dataclass(frozen=True)
class BuiltinTarget:
    """A named target, optionally with per-dimension analytic moments."""

    name: str
    target: Target
    analytic_moments: Optional[tuple[np.ndarray, np.ndarray]]


def _saturating_exp(value: float) -> float:
    """exp that returns inf instead of raising past the double range."""
    try:
        return math.exp(value)
    except OverflowError:
        return math.inf


def _sigmoid(scores: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, no overflow warnings."""
    out = np.empty_like(scores, dtype=float)
    positive = scores >= 0.0
    out[positive] = 1.0 / (1.0 + np.exp(-scores[positive]))
    exp_scores = np.exp(scores[~positive])
    out[~positive] = exp_scores / (1.0 + exp_scores)
    return out


def std_normal(dim: int) -> BuiltinTarget:
    """Standard normal in ``dim`` dimensions."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")

    def logdensity(x: np.ndarray) -> float:
        return -0.5 * float(x @ x)

    def gradient(x: np.ndarray) -> np.ndarray:
        return -x

    return BuiltinTarget(
        "std_normal",
        Target(dim, logdensity, gradient),
        (np.zeros(dim), np.ones(dim)),
    )


def aniso_variances(dim: int) -> np.ndarray:
    """Geometric variance ladder from 1 to 100 across the coordinates."""
    if dim == 1:
        return np.ones(1)
    return np.geomspace(1.0, 100.0, dim)


def aniso_gauss(dim: int) -> BuiltinTarget:
    """Axis-aligned Gaussian with variances spanning two decades."""
    if dim < 1:
        raise ValueError("dimension must be at least 1")
    variances = aniso_variances(dim)
    precision = 1.0 / variances

    def logdensity(x: np.ndarray) -> float:
        return -0.5 * float(np.sum(precision * x * x))

    def gradient(x: np.ndarray) -> np.ndarray:
        return -precision * x

    return BuiltinTarget(
        "aniso_gauss",
        Target(dim, logdensity, gradient),
        (np.zeros(dim), variances.copy()),
    )


BANANA_CURVATURE = 0.5
BANANA_SPREAD = 4.0  # variance of the first coordinate


def banana(dim: int = 2) -> BuiltinTarget:
    """Banana-shaped density: a Gaussian bent along a parabola.

    The first coordinate is N(0, spread); the second follows a unit
    Gaussian centered on the parabola ``-b * (x1^2 - spread)``; any further
    coordinates are independent standard normals.
    """
    if dim < 2:
        raise ValueError("banana needs at least two dimensions")
    b = BANANA_CURVATURE
    spread = BANANA_SPREAD

    def logdensity(x: np.ndarray) -> float:
        bend = x[1] + b * (x[0] * x[0] - spread)
        tail = float(x[2:] @ x[2:]) if dim > 2 else 0.0
        return -0.5 * (x[0] * x[0] / spread + bend * bend + tail)

    def gradient(x: np.ndarray) -> np.ndarray:
        bend = x[1] + b * (x[0] * x[0] - spread)
        grad = np.array(x, dtype=float, copy=True)
        grad[0] = -x[0] / spread - bend * 2.0 * b * x[0]
        grad[1] = -bend
        if dim > 2:
            grad[2:] = -x[2:]
        return grad

    return BuiltinTarget("banana", Target(dim, logdensity, gradient), None)


FUNNEL_SCALE = 3.0  # standard deviation of the neck coordinate


def funnel(dim: int = 2) -> BuiltinTarget:
    """Neal's funnel: the first coordinate sets the log-scale of the rest.

    ``x0 ~ N(0, 9)`` and ``x_i | x0 ~ N(0, exp(x0))`` for i >= 1, a
    standard stress test for step-size adaptation.
    """
    if dim < 2:
        raise ValueError("funnel needs at least two dimensions")
    neck_var = FUNNEL_SCALE * FUNNEL_SCALE

    def logdensity(x: np.ndarray) -> float:
        sumsq = float(x[1:] @ x[1:])
        base = -0.5 * x[0] * x[0] / neck_var - 0.5 * (dim - 1) * x[0]
        # Guard sumsq == 0 so a saturated exp cannot produce inf * 0.
        if sumsq == 0.0:
            return base
        return base - 0.5 * _saturating_exp(-x[0]) * sumsq

    def gradient(x: np.ndarray) -> np.ndarray:
        sumsq = float(x[1:] @ x[1:])
        scale = _saturating_exp(-x[0])
        grad = np.empty(dim)
        correction = 0.5 * scale * sumsq if sumsq > 0.0 else 0.0
        grad[0] = -x[0] / neck_var - 0.5 * (dim - 1) + correction
        grad[1:] = -scale * x[1:]
        return grad

    return BuiltinTarget("funnel", Target(dim, logdensity, gradient), None)


@dataclass(frozen=True)
class LogisticData:
    """Synthetic logistic-regression data, fully determined by a key."""

    design: np.ndarray
    labels: np.ndarray
    true_weights: np.ndarray


def make_logistic_data(key: RngKey) -> LogisticData:
    """200 points, 5 standard-normal features, N(0,1) true weights."""
    key_design, key_weights, key_labels = split_key(key, 3)
    design = normal_matrix(key_design, LOGISTIC_NUM_POINTS, LOGISTIC_NUM_FEATURES)
    weights = normal_vector(key_weights, LOGISTIC_NUM_FEATURES)
    probabilities = _sigmoid(design @ weights)
    labels = (
        uniform_vector(key_labels, LOGISTIC_NUM_POINTS) < probabilities
    ).astype(float)
    return LogisticData(design, labels, weights)


def _logistic_terms(data: LogisticData):
    design, labels = data.design, data.labels

    def loglik(w: np.ndarray) -> float:
        scores = design @ w
        return float(labels @ scores - np.sum(np.logaddexp(0.0, scores)))

    def grad_loglik(w: np.ndarray) -> np.ndarray:
        scores = design @ w
        return design.T @ (labels - _sigmoid(scores))

    return loglik, grad_loglik


def logistic_synth(key: RngKey) -> BuiltinTarget:
    """Bayesian logistic regression posterior on synthetic data.

    Standard-normal prior on the 5 weights; data from
    :func:`make_logistic_data` using the supplied key.
    """
    loglik, grad_loglik = _logistic_terms(make_logistic_data(key))

    def logdensity(w: np.ndarray) -> float:
        return -0.5 * float(w @ w) + loglik(w)

    def gradient(w: np.ndarray) -> np.ndarray:
        return -w + grad_loglik(w)

    return BuiltinTarget(
        "logistic_synth",
        Target(LOGISTIC_NUM_FEATURES, logdensity, gradient),
        None,
    )


MCMC_TARGET_NAMES = ("std_normal", "aniso_gauss", "banana", "funnel", "logistic_synth")
SMC_TARGET_NAMES = ("gauss_conjugate", "logistic_synth")


def make_builtin(name: str, dim: int, data_key: Optional[RngKey] = None) -> BuiltinTarget:
    """Look up a built-in target by name.

    ``logistic_synth`` requires ``data_key`` (its dimension is fixed at 5);
    the other targets take ``dim`` directly.
    """
    if name == "std_normal":
        return std_normal(dim)
    if name == "aniso_gauss":
        return aniso_gauss(dim)
    if name == "banana":
        return banana(dim)
    if name == "funnel":
        return funnel(dim)
    if name == "logistic_synth":
        if data_key is None:
            raise ValueError("logistic_synth needs a data key")
        if dim not in (0, LOGISTIC_NUM_FEATURES):
            raise ValueError("logistic_synth has fixed dimension 5")
        return logistic_synth(data_key)
    raise ValueError(f"unknown target {name!r}; choose from {MCMC_TARGET_NAMES}")


def conjugate_gaussian_data(key: RngKey, dim: int, num_observations: int) -> np.ndarray:
    """Observations for the conjugate-Gaussian model, drawn from N(0, 2I).

    Matches the model's marginal spread (prior N(0, I) plus unit
    observation noise), keeping the synthetic data typical for it.
    """
    return math.sqrt(2.0) * normal_matrix(key, num_observations, dim)


def conjugate_gaussian_log_evidence(observations: np.ndarray) -> float:
    """Closed-form log evidence of the conjugate-Gaussian model.

    Model: ``theta ~ N(0, I_dim)`` and ``y_j | theta ~ N(theta, I_dim)``.
    Marginally each coordinate of ``(y_1, ..., y_k)`` is N(0, I_k + 1 1^T),
    whose determinant is ``1 + k`` and whose inverse is
    ``I - 1 1^T / (1 + k)``, giving the quadratic form below.
    """
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    k = observations.shape[0]
    col_sums = observations.sum(axis=0)
    quad = float(np.sum(observations * observations) - col_sums @ col_sums / (1.0 + k))
    dim = observations.shape[1]
    return -0.5 * (
        dim * k * math.log(2.0 * math.pi) + dim * math.log(1.0 + k) + quad
    )


def conjugate_gaussian_posterior(observations: np.ndarray) -> tuple[np.ndarray, float]:
    """Posterior mean vector and (isotropic) variance given the data."""
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    k = observations.shape[0]
    return observations.sum(axis=0) / (1.0 + k), 1.0 / (1.0 + k)


def _conjugate_tempered(observations: np.ndarray) -> TemperedTarget:
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    dim = observations.shape[1]
    count = observations.shape[0]
    col_sums = observations.sum(axis=0)
    sq_total = float(np.sum(observations * observations))

    def log_prior(x: np.ndarray) -> float:
        return -0.5 * float(x @ x)

    def grad_prior(x: np.ndarray) -> np.ndarray:
        return -x

    def log_likelihood(x: np.ndarray) -> float:
        # sum_j -0.5 ||y_j - x||^2, constants included so the evidence
        # estimate matches the normalized model.
        quad = count * float(x @ x) - 2.0 * float(col_sums @ x) + sq_total
        return -0.5 * quad - 0.5 * count * dim * math.log(2.0 * math.pi)

    def grad_likelihood(x: np.ndarray) -> np.ndarray:
        return col_sums - count * x

    return TemperedTarget(dim, log_prior, grad_prior, log_likelihood, grad_likelihood)


def make_tempered(name: str, dim: int, data_key: RngKey) -> tuple[TemperedTarget, dict]:
    """Build a tempered (prior/likelihood) target for SMC by name.

    Returns the target plus a details dict (observations or data handles)
    so callers can recover analytic quantities where they exist.
    """
    if name == "gauss_conjugate":
        observations = conjugate_gaussian_data(data_key, dim, CONJUGATE_NUM_OBSERVATIONS)
        return _conjugate_tempered(observations), {"observations": observations}
    if name == "logistic_synth":
        if dim not in (0, LOGISTIC_NUM_FEATURES):
            raise ValueError("logistic_synth has fixed dimension 5")
        data = make_logistic_data(data_key)
        loglik, grad_loglik = _logistic_terms(data)
        tempered = TemperedTarget(
            LOGISTIC_NUM_FEATURES,
            lambda w: -0.5 * float(w @ w),
            lambda w: -w,
            loglik,
            grad_loglik,
        )
        return tempered, {"data": data}
    raise ValueError(f"unknown tempered target {name!r}; choose from {SMC_TARGET_NAMES}")
