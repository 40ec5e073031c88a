"""Metropolis-Hastings acceptance atoms.

The pieces of an accept/reject decision, kept separate from proposal
generation so samplers can mix and match: energy-difference log ratios
(with a safety clause that turns numerical blow-ups into rejections), the
asymmetric-proposal correction, and two interchangeable acceptance rules.
The binomial rule is the textbook coin flip.  The nonreversible slice rule
(Neal 2020) thresholds a persistent uniform variable instead of drawing a
fresh one, which suppresses the random-walk behaviour of repeated
accept/reject decisions; both rules leave the same target invariant.

Energy convention, library-wide: energy = -logdensity, plus the kinetic
term where momenta exist, so log acceptance ratios are prev - new.
"""

from __future__ import annotations

import math
from typing import Any, NamedTuple

from .rng import RngKey, uniform

__all__ = [
    "Proposal",
    "SliceVariable",
    "make_proposal",
    "safe_energy_diff",
    "asymmetric_log_ratio",
    "binomial_accept",
    "nonreversible_slice_accept",
    "perturb_slice",
]

_OPEN_ONE = math.nextafter(1.0, 0.0)


class Proposal(NamedTuple):
    """A candidate state with its energy and log acceptance ratio."""

    state: Any
    energy: float
    log_ratio: float


class SliceVariable(NamedTuple):
    """Persistent slice variable ``u`` in the open interval (-1, 1)."""

    u: float


def make_proposal(state: Any, energy: float, log_ratio: float) -> Proposal:
    """Build a :class:`Proposal`, forcing ``log_ratio = -inf`` on bad energy."""
    if not math.isfinite(energy):
        log_ratio = -math.inf
    return Proposal(state, energy, log_ratio)


def safe_energy_diff(prev_energy: float, new_energy: float) -> float:
    """Log acceptance ratio ``prev - new``, absorbing numerical blow-ups.

    Returns ``-inf`` when ``new_energy`` is NaN or ``+inf`` (the proposal
    landed in a forbidden region or the dynamics diverged), so downstream
    acceptance rules reject instead of propagating NaN.
    """
    if math.isnan(new_energy) or new_energy == math.inf:
        return -math.inf
    return prev_energy - new_energy


def asymmetric_log_ratio(
    prev_energy: float,
    new_energy: float,
    log_q_reverse: float,
    log_q_forward: float,
) -> float:
    """Log acceptance ratio with the asymmetric-proposal correction.

    ``(prev - new) + (log q(current|proposed) - log q(proposed|current))``,
    under the same safety clause as :func:`safe_energy_diff`.
    """
    base = safe_energy_diff(prev_energy, new_energy)
    if base == -math.inf:
        return -math.inf
    ratio = base + (log_q_reverse - log_q_forward)
    if math.isnan(ratio):
        return -math.inf
    return ratio


def binomial_accept(
    key: RngKey,
    log_ratio: float,
    proposed: Any,
    current: Any,
) -> tuple[Any, bool, float]:
    """Static binomial accept/reject.

    Returns ``(chosen, accepted, p_accept)`` with
    ``p_accept = min(1, exp(log_ratio))`` and acceptance exactly when
    ``uniform(key) < p_accept``.  A non-negative log ratio therefore always
    accepts (uniform draws live on [0, 1)).
    """
    if math.isnan(log_ratio):
        return current, False, 0.0
    p_accept = min(1.0, math.exp(min(log_ratio, 0.0)))
    if uniform(key) < p_accept:
        return proposed, True, p_accept
    return current, False, p_accept


def nonreversible_slice_accept(
    slice_var: SliceVariable,
    log_ratio: float,
    proposed: Any,
    current: Any,
) -> tuple[Any, bool, SliceVariable]:
    """Neal's nonreversible accept rule driven by a persistent uniform.

    Accepts exactly when ``log|u| <= log_ratio``; on acceptance the slack
    is banked by the deterministic update ``u' = u * exp(-log_ratio)``
    (magnitude at most 1 by the acceptance test), on rejection ``u`` is
    kept.  Proposals with ``log_ratio = -inf`` (zero density) are always
    rejected, even at ``u = 0``.
    """
    u = slice_var.u
    if math.isnan(log_ratio) or log_ratio == -math.inf:
        return current, False, slice_var
    log_abs_u = math.log(abs(u)) if u != 0.0 else -math.inf
    if log_abs_u > log_ratio:
        return current, False, slice_var
    if -log_ratio > 690.0:
        # u * exp(-log_ratio) would overflow; |u| <= exp(log_ratio) makes
        # the log-space form safe and <= 1 by construction.
        new_u = math.copysign(math.exp(log_abs_u - log_ratio), u)
    else:
        new_u = u * math.exp(-log_ratio)
    if abs(new_u) >= 1.0:
        new_u = math.copysign(_OPEN_ONE, new_u)
    return proposed, True, SliceVariable(new_u)


def perturb_slice(key: RngKey, slice_var: SliceVariable, jitter: float) -> SliceVariable:
    """Refresh the slice variable by a random wrap-around drift.

    ``u' = ((u + 1 + jitter * 2 * uniform(key)) mod 2) - 1``.  Zero jitter
    is exactly the identity; jitter 1 is a full uniform refresh on (-1, 1);
    intermediate values interpolate.  The wrap preserves the uniform
    marginal for every jitter.
    """
    if not 0.0 <= jitter <= 1.0:
        raise ValueError("jitter must lie in [0, 1]")
    if jitter == 0.0:
        return slice_var
    shifted = math.fmod(slice_var.u + 1.0 + jitter * 2.0 * uniform(key), 2.0) - 1.0
    if shifted <= -1.0:
        shifted = -_OPEN_ONE
    elif shifted >= 1.0:
        shifted = _OPEN_ONE
    return SliceVariable(shifted)
