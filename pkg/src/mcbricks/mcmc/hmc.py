"""Hamiltonian Monte Carlo with a fixed number of leapfrog steps."""

from __future__ import annotations

import math
from functools import partial
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..core import SamplingAlgorithm, Target
from ..integrator import (
    IntegratorState,
    Metric,
    identity_metric,
    kinetic_energy,
    sample_momentum,
    trajectory,
)
from ..proposal import binomial_accept, safe_energy_diff
from ..rng import RngKey, split_key

__all__ = ["HmcState", "HmcInfo", "init", "build_kernel", "as_algorithm"]

DEFAULT_DIVERGENCE_THRESHOLD = 1000.0


class HmcState(NamedTuple):
    position: np.ndarray
    logdensity: float
    gradient: np.ndarray


class HmcInfo(NamedTuple):
    p_accept: float
    accepted: bool
    is_divergent: bool
    energy: float
    num_integration_steps: int


def init(position: np.ndarray, target: Target) -> HmcState:
    position = np.asarray(position, dtype=float)
    return HmcState(
        position,
        float(target.logdensity(position)),
        np.asarray(target.gradient(position), dtype=float),
    )


def build_kernel(
    step_size: float,
    num_integration_steps: int,
    metric: Optional[Metric] = None,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> Callable[[RngKey, HmcState, Target], tuple[HmcState, HmcInfo]]:
    """Momentum resampling, a leapfrog trajectory, then binomial acceptance.

    The log acceptance ratio is ``H(start) - H(end)`` on total energies.
    Trajectories whose energy error exceeds ``divergence_threshold`` (or
    blow up to non-finite values) are rejected outright and flagged; the
    reported ``p_accept`` still reflects the raw endpoint energies.
    """
    if step_size <= 0.0:
        raise ValueError("step size must be strictly positive")
    if num_integration_steps < 1:
        raise ValueError("need at least one integration step")

    def kernel(key: RngKey, state: HmcState, target: Target) -> tuple[HmcState, HmcInfo]:
        kernel_metric = metric if metric is not None else identity_metric(target.dim)
        key_momentum, key_accept = split_key(key, 2)
        momentum = sample_momentum(key_momentum, kernel_metric)
        start = IntegratorState(state.position, momentum, state.logdensity, state.gradient)
        energy_start = -state.logdensity + kinetic_energy(momentum, kernel_metric)
        end = trajectory(start, step_size, kernel_metric, target, num_integration_steps)
        if math.isfinite(end.logdensity):
            energy_end = -end.logdensity + kinetic_energy(end.momentum, kernel_metric)
        else:
            energy_end = math.inf
        log_ratio = safe_energy_diff(energy_start, energy_end)
        p_accept = min(1.0, math.exp(min(log_ratio, 0.0)))
        divergent = not math.isfinite(energy_end) or (energy_end - energy_start) > divergence_threshold
        proposed = HmcState(end.position, end.logdensity, end.gradient)
        if divergent:
            chosen, accepted = state, False
        else:
            chosen, accepted, p_accept = binomial_accept(key_accept, log_ratio, proposed, state)
        info = HmcInfo(
            p_accept,
            accepted,
            divergent,
            energy_end if accepted else energy_start,
            num_integration_steps,
        )
        return chosen, info

    return kernel


def as_algorithm(
    target: Target,
    step_size: float,
    num_integration_steps: int,
    metric: Optional[Metric] = None,
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD,
) -> SamplingAlgorithm:
    kernel = build_kernel(step_size, num_integration_steps, metric, divergence_threshold)
    return SamplingAlgorithm(
        init=partial(init, target=target),
        step=lambda key, state: kernel(key, state, target),
    )
