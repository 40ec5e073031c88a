"""Generalized HMC (Horowitz): persistent momentum, one leapfrog step.

Momentum is only partially refreshed each iteration, so trajectories build
up across many single-step transitions instead of inside one long
trajectory.  Rejections negate the momentum (required for invariance); the
nonreversible slice rule keeps the rejection rate from destroying the
persistent flow, and the slice variable itself persists in the state.
"""

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
    leapfrog,
    sample_momentum,
)
from ..proposal import SliceVariable, nonreversible_slice_accept, perturb_slice, safe_energy_diff
from ..rng import RngKey, split_key

__all__ = ["GhmcState", "GhmcInfo", "init", "build_kernel", "as_algorithm"]


class GhmcState(NamedTuple):
    position: np.ndarray
    logdensity: float
    gradient: np.ndarray
    momentum: np.ndarray
    slice_var: SliceVariable


class GhmcInfo(NamedTuple):
    p_accept: float
    accepted: bool
    is_divergent: bool
    energy: float


def init(
    position: np.ndarray,
    target: Target,
    momentum: Optional[np.ndarray] = None,
    slice_u: float = 0.5,
) -> GhmcState:
    """Initial state with zero momentum and a mid-range slice by default.

    Both fields are part of the chain and converge to their stationary
    marginals during burn-in; pass explicit values to control them (the
    slice must lie strictly inside (-1, 1), and a nonzero value keeps the
    very first acceptance decision non-trivial).
    """
    position = np.asarray(position, dtype=float)
    if momentum is None:
        momentum = np.zeros_like(position)
    if not abs(slice_u) < 1.0:
        raise ValueError("slice variable must lie in (-1, 1)")
    return GhmcState(
        position,
        float(target.logdensity(position)),
        np.asarray(target.gradient(position), dtype=float),
        np.asarray(momentum, dtype=float),
        SliceVariable(slice_u),
    )


def build_kernel(
    step_size: float,
    persistence: float = 0.9,
    metric: Optional[Metric] = None,
    slice_jitter: float = 0.0,
) -> Callable[[RngKey, GhmcState, Target], tuple[GhmcState, GhmcInfo]]:
    """One generalized-HMC transition.

    ``persistence`` is the momentum autocorrelation a in the partial
    refresh ``p <- a * p + sqrt(1 - a^2) * zeta`` with ``zeta ~ N(0, M)``;
    0 refreshes fully, values near 1 keep momentum across steps.
    ``slice_jitter`` in [0, 1] controls the per-step slice refresh: 0
    leaves the slice fully persistent, 1 redraws it uniformly each step.
    """
    if step_size <= 0.0:
        raise ValueError("step size must be strictly positive")
    if not 0.0 <= persistence <= 1.0:
        raise ValueError("persistence must lie in [0, 1]")
    refresh_scale = math.sqrt(1.0 - persistence * persistence)

    def kernel(key: RngKey, state: GhmcState, target: Target) -> tuple[GhmcState, GhmcInfo]:
        kernel_metric = metric if metric is not None else identity_metric(target.dim)
        key_refresh, key_slice = split_key(key, 2)
        fresh = sample_momentum(key_refresh, kernel_metric)
        momentum = persistence * state.momentum + refresh_scale * fresh
        energy_start = -state.logdensity + kinetic_energy(momentum, kernel_metric)
        start = IntegratorState(state.position, momentum, state.logdensity, state.gradient)
        end = leapfrog(start, step_size, kernel_metric, target)
        if math.isfinite(end.logdensity):
            energy_end = -end.logdensity + kinetic_energy(end.momentum, kernel_metric)
        else:
            energy_end = math.inf
        log_ratio = safe_energy_diff(energy_start, energy_end)
        p_accept = min(1.0, math.exp(min(log_ratio, 0.0)))
        proposed = GhmcState(end.position, end.logdensity, end.gradient, end.momentum, state.slice_var)
        current = GhmcState(state.position, state.logdensity, state.gradient, momentum, state.slice_var)
        chosen, accepted, new_slice = nonreversible_slice_accept(
            state.slice_var, log_ratio, proposed, current
        )
        if not accepted:
            chosen = chosen._replace(momentum=-chosen.momentum)
        new_slice = perturb_slice(key_slice, new_slice, slice_jitter)
        chosen = chosen._replace(slice_var=new_slice)
        info = GhmcInfo(
            p_accept,
            accepted,
            not math.isfinite(energy_end),
            energy_end if accepted else energy_start,
        )
        return chosen, info

    return kernel


def as_algorithm(
    target: Target,
    step_size: float,
    persistence: float = 0.9,
    metric: Optional[Metric] = None,
    slice_jitter: float = 0.0,
) -> SamplingAlgorithm:
    kernel = build_kernel(step_size, persistence, metric, slice_jitter)
    return SamplingAlgorithm(
        init=partial(init, target=target),
        step=lambda key, state: kernel(key, state, target),
    )
