"""Shared contracts: targets, algorithm records, the chain runner.

A *target* is a log-density (up to an additive constant) together with its
gradient, over an unconstrained real vector.  An *algorithm* is a pair (or
triple, for approximations) of pure functions following the init/step
protocol: ``init`` builds the algorithm state from a starting position,
``step`` advances it one transition under an explicit RNG key and returns
``(new_state, info)``.  Because steps are pure, running a chain is a plain
fold and replaying it with the same key reproduces every draw bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np

from .rng import RngKey, fold_in, normal_vector, split_key

__all__ = [
    "Target",
    "SamplingAlgorithm",
    "ApproxAlgorithm",
    "ChainError",
    "run_chain",
    "gradient_discrepancy",
]


@dataclass(frozen=True)
class Target:
    """Differentiable unnormalised log-density on ``R**dim``.

    Parameters
    ----------
    dim
        Dimensionality of the state space, at least 1.
    logdensity
        Maps a position of shape ``(dim,)`` to a float.  May return
        ``-inf`` outside the support; must never return ``+inf``.
    gradient
        Maps a position to the gradient array of shape ``(dim,)``.
    """

    dim: int
    logdensity: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("target dimension must be at least 1")


class SamplingAlgorithm(NamedTuple):
    """Packaged MCMC procedure: ``init(position)`` and ``step(key, state)``."""

    init: Callable[[np.ndarray], Any]
    step: Callable[[RngKey, Any], tuple[Any, Any]]


class ApproxAlgorithm(NamedTuple):
    """Packaged approximate-inference procedure.

    ``init``/``step`` as for sampling; ``sample(key, state, num_samples)``
    draws from the fitted approximation.
    """

    init: Callable[[np.ndarray], Any]
    step: Callable[[RngKey, Any], tuple[Any, Any]]
    sample: Callable[[RngKey, Any, int], np.ndarray]


class ChainError(RuntimeError):
    """A kernel failed mid-chain; ``step_index`` says where."""

    def __init__(self, step_index: int, cause: Exception) -> None:
        super().__init__(f"chain step {step_index} failed: {cause}")
        self.step_index = step_index


def run_chain(
    key: RngKey,
    step: Callable[[RngKey, Any], tuple[Any, Any]],
    initial_state: Any,
    num_steps: int,
) -> tuple[Any, list, np.ndarray]:
    """Fold ``step`` over ``num_steps`` per-iteration child keys.

    Returns ``(final_state, infos, positions)`` where ``infos`` collects the
    per-step info records and ``positions`` is the ``(num_steps, dim)``
    array of visited positions.  States must expose a ``position`` field.
    """
    if num_steps < 0:
        raise ValueError("number of steps must be non-negative")
    state = initial_state
    dim = np.asarray(initial_state.position).shape[0]
    positions = np.empty((num_steps, dim))
    infos: list = []
    # Kernels absorb transient non-finite arithmetic via their divergence
    # handling, so suppress the corresponding warnings for the whole sweep.
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(num_steps):
            try:
                state, info = step(fold_in(key, i), state)
            except ChainError:
                raise
            except Exception as exc:
                raise ChainError(i, exc) from exc
            infos.append(info)
            positions[i] = state.position
    return state, infos, positions


def gradient_discrepancy(
    target: Target,
    key: RngKey,
    num_points: int = 100,
    scale: float = 1.0,
) -> float:
    """Largest relative gap between ``target.gradient`` and finite differences.

    Checks central differences with per-coordinate step
    ``h = 1e-5 * (1 + |x|)`` at ``num_points`` positions drawn from
    ``scale * N(0, I)``.  The gap is relative to ``max(1, |gradient|)``
    coordinate-wise.  A well-formed target stays below ``1e-4``.
    """
    worst = 0.0
    for point_key in split_key(key, num_points):
        x = scale * normal_vector(point_key, target.dim)
        grad = np.asarray(target.gradient(x), dtype=float)
        for j in range(target.dim):
            h = 1e-5 * (1.0 + abs(x[j]))
            up = x.copy()
            down = x.copy()
            up[j] += h
            down[j] -= h
            fd = (target.logdensity(up) - target.logdensity(down)) / (2.0 * h)
            rel = abs(fd - grad[j]) / max(1.0, abs(grad[j]))
            worst = max(worst, rel)
    return worst
