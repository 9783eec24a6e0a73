"""Closed-form advantages and bounds used as ground truth for the simulations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .attribute import AttributeSchema, decision_regions
from .core import erf
from .errors import DomainError

__all__ = [
    "CurvePoint",
    "curve_membership_bounded",
    "curve_membership_threshold",
    "curve_attribute_binary",
    "curve_attribute_general",
    "bound_dp_advantage",
    "expected_colluding_advantage",
    "max_advantage",
    "curve",
]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class CurvePoint:
    abscissa: float
    value: float
    curve_id: str


def curve_membership_bounded(R_gen: float, B: float) -> float:
    """Advantage of the bounded-loss adversary: ``R_gen / B``."""
    if not B > 0:
        raise DomainError("loss bound must be positive")
    return R_gen / B


def curve_membership_threshold(ratio: float, mode: str = "known") -> float:
    """Advantage of the residual-threshold adversary at ``ratio = sigma_D / sigma_S``.

    ``known`` uses the equal-density cut-off; ``unknown`` cuts at ``sigma_S``.
    Both are 0 at ratio 1.
    """
    if mode not in ("known", "unknown"):
        raise DomainError(f"mode must be 'known' or 'unknown', got {mode!r}")
    if math.isnan(ratio) or ratio < 1:
        raise DomainError(f"ratio must be >= 1, got {ratio}")
    if ratio == 1:
        return 0.0
    if mode == "unknown":
        inner = 0.0 if math.isinf(ratio) else erf(1.0 / (SQRT2 * ratio))
        return erf(1.0 / SQRT2) - inner
    if math.isinf(ratio):
        return 1.0
    a = math.sqrt(math.log1p(ratio - 1.0) / ((ratio - 1.0) * (ratio + 1.0)))
    return erf(ratio * a) - erf(a)


def curve_attribute_binary(tau: float, sigma_S: float, sigma_D: float) -> float:
    """Attribute advantage for two equally likely targets whose outputs differ by ``tau``."""
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    if not (sigma_S > 0 and sigma_D > 0):
        raise DomainError("sigma_S and sigma_D must be positive")
    c = 2.0 * SQRT2
    return 0.5 * (erf(tau / (c * sigma_S)) - erf(tau / (c * sigma_D)))


def _interval_mass(lo: float, hi: float, centre: float, sigma: float) -> float:
    return 0.5 * (math.erf((hi - centre) / (SQRT2 * sigma)) - math.erf((lo - centre) / (SQRT2 * sigma)))


def curve_attribute_general(
    schema: AttributeSchema,
    tau_vector: Sequence[float],
    sigma_S: float,
    sigma_D: float,
    sigma_guess: float | None = None,
) -> float:
    """Attribute advantage of the general adversary on Gaussian error channels.

    ``tau_vector[i]`` is the model output when the target is ``t_i`` (the
    part shared by all targets cancels). The adversary's decision intervals
    are integrated against ``N(tau_i, sigma_S^2)`` for members and
    ``N(tau_i, sigma_D^2)`` for the population, then prior-weighted.
    """
    if not (sigma_S > 0 and sigma_D > 0):
        raise DomainError("sigma_S and sigma_D must be positive")
    regions = decision_regions(schema, tau_vector, sigma_guess or sigma_S)
    total_S = total_D = 0.0
    for i, p in enumerate(schema.prior):
        hit_S = hit_D = 0.0
        for lo, hi, w in regions.intervals():
            if w == i:
                hit_S += _interval_mass(lo, hi, tau_vector[i], sigma_S)
                hit_D += _interval_mass(lo, hi, tau_vector[i], sigma_D)
        total_S += p * hit_S
        total_D += p * hit_D
    return total_S - total_D


def bound_dp_advantage(dp_epsilon: float) -> float:
    """Membership advantage ceiling of an ``eps``-DP learner: ``e^eps - 1``."""
    if not dp_epsilon >= 0:
        raise DomainError("dp_epsilon must be nonnegative")
    return math.expm1(dp_epsilon)


def expected_colluding_advantage(m_bits: int, k: int, mu: float) -> float:
    """``1 - mu - 2^(-m_bits * k)`` for the keyed collusion adversary."""
    if m_bits < 1 or k < 1:
        raise DomainError("m_bits and k must be positive")
    if not 0.0 <= mu <= 1.0:
        raise DomainError("mu must lie in [0, 1]")
    return 1.0 - mu - 2.0 ** (-m_bits * k)


def max_advantage(mu: float) -> float:
    """Best possible membership advantage when fresh points collide with ``S`` at rate ``mu``."""
    if not 0.0 <= mu <= 1.0:
        raise DomainError("mu must lie in [0, 1]")
    return 1.0 - mu


def curve(curve_id: str, abscissae: Iterable[float], **params) -> list[CurvePoint]:
    """Evaluate a named curve along a grid.

    ``curve_id`` is one of ``membership-threshold-known``,
    ``membership-threshold-unknown``, ``membership-bounded`` (params ``B``),
    ``attribute-binary`` (abscissa ``tau``; params ``sigma_S``, ``sigma_D``)
    or ``dp-bound``.
    """
    fns = {
        "membership-threshold-known": lambda x: curve_membership_threshold(x, "known"),
        "membership-threshold-unknown": lambda x: curve_membership_threshold(x, "unknown"),
        "membership-bounded": lambda x: curve_membership_bounded(x, params.get("B", 1.0)),
        "attribute-binary": lambda x: curve_attribute_binary(x, params["sigma_S"], params["sigma_D"]),
        "dp-bound": bound_dp_advantage,
    }
    if curve_id not in fns:
        raise DomainError(f"unknown curve {curve_id!r}; choose from {sorted(fns)}")
    return [CurvePoint(float(x), fns[curve_id](x), curve_id) for x in abscissae]
