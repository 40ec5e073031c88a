"""Leapfrog integration of Hamiltonian dynamics over a Euclidean metric.

The integrator is deliberately independent of any acceptance step: it maps
an :class:`IntegratorState` to another, and samplers decide what to do with
the endpoint.  Velocity Verlet is the only scheme shipped, but every
consumer takes the integrator as a callable, so higher-order schemes can be
slotted in without touching the samplers.

The metric is the mass matrix M of the momentum distribution N(0, M),
with kinetic energy ``0.5 * p^T M^{-1} p``.  Identity and diagonal metrics
store the inverse mass as a vector; dense metrics store the full inverse
mass matrix plus a Cholesky factor of M for momentum sampling.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import Target
from .rng import RngKey, normal_vector

__all__ = [
    "Metric",
    "IntegratorState",
    "identity_metric",
    "diagonal_metric",
    "dense_metric",
    "integrator_state",
    "kinetic_energy",
    "sample_momentum",
    "velocity",
    "total_energy",
    "leapfrog",
    "trajectory",
]


class Metric(NamedTuple):
    """Euclidean metric: mass matrix M given through its inverse.

    ``inverse_mass`` is a length-dim vector for identity/diagonal kinds and
    a symmetric positive-definite matrix for the dense kind.
    ``mass_cholesky`` is the factor L with ``L @ L.T = M`` (a vector of
    square roots in the diagonal case), used to sample momenta.
    """

    kind: str
    inverse_mass: np.ndarray
    mass_cholesky: np.ndarray


class IntegratorState(NamedTuple):
    """Phase-space point with cached target evaluations at ``position``."""

    position: np.ndarray
    momentum: np.ndarray
    logdensity: float
    gradient: np.ndarray


def identity_metric(dim: int) -> Metric:
    """Unit mass matrix in ``dim`` dimensions."""
    if dim < 1:
        raise ValueError("metric dimension must be at least 1")
    ones = np.ones(dim)
    return Metric("identity", ones, ones)


def diagonal_metric(inverse_mass: np.ndarray) -> Metric:
    """Diagonal mass matrix from its inverse's diagonal."""
    inverse_mass = np.asarray(inverse_mass, dtype=float)
    if inverse_mass.ndim != 1:
        raise ValueError("diagonal metric expects a vector of inverse masses")
    if not np.all(inverse_mass > 0.0):
        raise ValueError("inverse mass entries must be strictly positive")
    return Metric("diagonal", inverse_mass, 1.0 / np.sqrt(inverse_mass))


def dense_metric(inverse_mass: np.ndarray) -> Metric:
    """Dense mass matrix from its symmetric positive-definite inverse."""
    inverse_mass = np.asarray(inverse_mass, dtype=float)
    if inverse_mass.ndim != 2 or inverse_mass.shape[0] != inverse_mass.shape[1]:
        raise ValueError("dense metric expects a square matrix")
    if not np.allclose(inverse_mass, inverse_mass.T, rtol=1e-8, atol=1e-12):
        raise ValueError("inverse mass matrix must be symmetric")
    try:
        mass = np.linalg.inv(inverse_mass)
        mass = 0.5 * (mass + mass.T)
        chol = np.linalg.cholesky(mass)
    except np.linalg.LinAlgError as exc:
        raise ValueError("inverse mass matrix must be positive definite") from exc
    return Metric("dense", inverse_mass, chol)


def integrator_state(target: Target, position: np.ndarray, momentum: np.ndarray) -> IntegratorState:
    """Evaluate the target once and assemble a phase-space state."""
    position = np.asarray(position, dtype=float)
    momentum = np.asarray(momentum, dtype=float)
    return IntegratorState(
        position,
        momentum,
        float(target.logdensity(position)),
        np.asarray(target.gradient(position), dtype=float),
    )


def kinetic_energy(momentum: np.ndarray, metric: Metric) -> float:
    """``0.5 * p^T M^{-1} p``; non-negative for valid metrics."""
    momentum = np.asarray(momentum, dtype=float)
    if momentum.shape[0] != metric.inverse_mass.shape[0]:
        raise ValueError("momentum and metric dimensions disagree")
    if metric.kind == "dense":
        return 0.5 * float(momentum @ (metric.inverse_mass @ momentum))
    return 0.5 * float(np.sum(metric.inverse_mass * momentum * momentum))


def sample_momentum(key: RngKey, metric: Metric) -> np.ndarray:
    """Draw ``p ~ N(0, M)`` as ``mass_cholesky @ z`` with standard-normal z."""
    dim = metric.inverse_mass.shape[0]
    z = normal_vector(key, dim)
    if metric.kind == "dense":
        return metric.mass_cholesky @ z
    return metric.mass_cholesky * z


def velocity(momentum: np.ndarray, metric: Metric) -> np.ndarray:
    """``M^{-1} p``, the position drift rate."""
    if metric.kind == "dense":
        return metric.inverse_mass @ momentum
    return metric.inverse_mass * momentum


def total_energy(state: IntegratorState, metric: Metric) -> float:
    """Hamiltonian ``H(q, p) = -logdensity(q) + kinetic(p)``."""
    return -state.logdensity + kinetic_energy(state.momentum, metric)


def leapfrog(
    state: IntegratorState,
    step_size: float,
    metric: Metric,
    target: Target,
) -> IntegratorState:
    """One velocity-Verlet step: half kick, drift, half kick.

    Costs one fresh gradient evaluation; the incoming state's cached
    gradient supplies the first half kick.  Non-finite values propagate to
    the returned state and are absorbed by the acceptance atoms downstream,
    so overflow here is expected behaviour, not worth a warning.
    """
    half = 0.5 * step_size
    with np.errstate(over="ignore", invalid="ignore"):
        p_half = state.momentum + half * state.gradient
        position = state.position + step_size * velocity(p_half, metric)
        logdensity = float(target.logdensity(position))
        gradient = np.asarray(target.gradient(position), dtype=float)
        momentum = p_half + half * gradient
    return IntegratorState(position, momentum, logdensity, gradient)


def trajectory(
    state: IntegratorState,
    step_size: float,
    metric: Metric,
    target: Target,
    num_steps: int,
) -> IntegratorState:
    """``num_steps`` leapfrog steps composed."""
    if num_steps < 1:
        raise ValueError("trajectory needs at least one step")
    for _ in range(num_steps):
        state = leapfrog(state, step_size, metric, target)
    return state
