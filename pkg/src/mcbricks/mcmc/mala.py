"""Metropolis-adjusted Langevin algorithm.

One Euler step of the overdamped Langevin diffusion as the proposal,
corrected for its asymmetry.  The transition density is Gaussian,

    log q(a | b) = -||a - b - eps * grad(b)||^2 / (4 * eps) + const,

with the constant cancelling between forward and reverse directions.
"""

from __future__ import annotations

from functools import partial
from typing import Callable, NamedTuple

import math

import numpy as np

from ..core import SamplingAlgorithm, Target
from ..proposal import asymmetric_log_ratio, binomial_accept
from ..rng import RngKey, normal_vector, split_key

__all__ = ["MalaState", "MalaInfo", "init", "build_kernel", "as_algorithm"]


class MalaState(NamedTuple):
    position: np.ndarray
    logdensity: float
    gradient: np.ndarray


class MalaInfo(NamedTuple):
    p_accept: float
    accepted: bool
    is_divergent: bool
    energy: float


def init(position: np.ndarray, target: Target) -> MalaState:
    position = np.asarray(position, dtype=float)
    return MalaState(
        position,
        float(target.logdensity(position)),
        np.asarray(target.gradient(position), dtype=float),
    )


def _log_transition(to: np.ndarray, frm: np.ndarray, gradient: np.ndarray, step_size: float) -> float:
    drift = to - frm - step_size * gradient
    return -float(drift @ drift) / (4.0 * step_size)


def build_kernel(
    step_size: float,
) -> Callable[[RngKey, MalaState, Target], tuple[MalaState, MalaInfo]]:
    """Kernel proposing ``q' = q + eps * grad(q) + sqrt(2 eps) * z``."""
    if step_size <= 0.0:
        raise ValueError("step size must be strictly positive")
    noise_scale = math.sqrt(2.0 * step_size)

    def kernel(key: RngKey, state: MalaState, target: Target) -> tuple[MalaState, MalaInfo]:
        key_prop, key_accept = split_key(key, 2)
        noise = normal_vector(key_prop, target.dim)
        position = state.position + step_size * state.gradient + noise_scale * noise
        logdensity = float(target.logdensity(position))
        gradient = np.asarray(target.gradient(position), dtype=float)
        proposed = MalaState(position, logdensity, gradient)
        divergent = not (math.isfinite(logdensity) and np.all(np.isfinite(gradient)))
        if divergent:
            log_ratio = -math.inf
        else:
            log_ratio = asymmetric_log_ratio(
                -state.logdensity,
                -logdensity,
                _log_transition(state.position, position, gradient, step_size),
                _log_transition(position, state.position, state.gradient, step_size),
            )
        chosen, accepted, p_accept = binomial_accept(key_accept, log_ratio, proposed, state)
        info = MalaInfo(p_accept, accepted, divergent, -chosen.logdensity)
        return chosen, info

    return kernel


def as_algorithm(target: Target, step_size: float) -> SamplingAlgorithm:
    kernel = build_kernel(step_size)
    return SamplingAlgorithm(
        init=partial(init, target=target),
        step=lambda key, state: kernel(key, state, target),
    )
