"""Membership-inference adversaries.

Each adversary maps a challenge point and black-box model access to a guess:
``0`` claims the point was in the training set, ``1`` claims it was drawn
from the population. The class wrappers give every adversary the uniform
signature ``adversary(z, model, rng)`` used by the harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataPoint, LossSpec, encode_features, loss_eval
from .errors import ContractError, DegenerateThresholdError, DomainError, LossTypeError, PreconditionError
from .models import CollusionKeys, Model

__all__ = [
    "MembershipGuess",
    "adv_bounded_loss",
    "adv_threshold",
    "adv_colluding",
    "equal_density_threshold",
    "BoundedLossAdversary",
    "ThresholdAdversary",
    "ColludingAdversary",
    "ConstantMembershipAdversary",
]


@dataclass(frozen=True)
class MembershipGuess:
    """``bit`` is 0 for member and 1 for non-member; ``score`` is a diagnostic."""

    bit: int
    score: float | None = None

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise DomainError(f"membership guess must be 0 or 1, got {self.bit!r}")


def adv_bounded_loss(z: DataPoint, model: Model, loss: LossSpec, rng: np.random.Generator) -> MembershipGuess:
    """Guess non-member with probability ``loss(model, z) / B``."""
    if not loss.bounded:
        raise ContractError("bounded-loss adversary needs a finite loss bound")
    value = loss_eval(model, z, loss)
    if value < 0 or value > loss.bound:
        raise ContractError(f"loss {value} outside [0, {loss.bound}]")
    return MembershipGuess(int(rng.random() < value / loss.bound), value)


def equal_density_threshold(sigma_S: float, sigma_D: float) -> float:
    """Positive residual where ``N(0, sigma_S^2)`` and ``N(0, sigma_D^2)`` densities cross."""
    if not sigma_S > 0:
        raise PreconditionError("sigma_S must be positive")
    if not sigma_D > sigma_S:
        raise DegenerateThresholdError(
            f"sigma_D={sigma_D} must exceed sigma_S={sigma_S}; the two error laws do not separate"
        )
    r = sigma_D / sigma_S
    return sigma_D * math.sqrt(2.0 * math.log(r) / ((r - 1.0) * (r + 1.0)))


def _residual(z: DataPoint, model: Model) -> float:
    if model.output != "real":
        raise LossTypeError("the threshold adversary needs a real-valued model")
    return float(z.y - model(z.v, z.t))


def adv_threshold(z: DataPoint, model: Model, sigma_S: float, sigma_D: float | None = None) -> MembershipGuess:
    """Guess member when the residual is small.

    With ``sigma_D`` known the cut-off is :func:`equal_density_threshold`;
    otherwise it is ``sigma_S`` itself.
    """
    if not sigma_S > 0:
        raise PreconditionError("sigma_S must be positive")
    cut = sigma_S if sigma_D is None else equal_density_threshold(sigma_S, sigma_D)
    eps = _residual(z, model)
    return MembershipGuess(int(abs(eps) >= cut), eps)


def adv_colluding(z: DataPoint, model: Model, keys: CollusionKeys) -> MembershipGuess:
    """Query the model at every ``F_j(x)`` and claim membership iff all answers equal ``G_j(x)``."""
    x = encode_features(z.v, z.t, model.targets)
    matches = 0
    for j in range(keys.k):
        if model.query(keys.F(j, x)) == keys.G(j, x):
            matches += 1
    return MembershipGuess(0 if matches == keys.k else 1, float(matches))


# ---------------------------------------------------------------------------
# uniform-signature wrappers


@dataclass(frozen=True)
class BoundedLossAdversary:
    loss: LossSpec
    name = "bounded-loss"

    def __call__(self, z, model, rng):
        return adv_bounded_loss(z, model, self.loss, rng)


@dataclass(frozen=True)
class ThresholdAdversary:
    sigma_S: float
    sigma_D: float | None = None
    name = "threshold"

    def __post_init__(self):
        if not self.sigma_S > 0:
            raise PreconditionError("sigma_S must be positive")
        object.__setattr__(
            self,
            "cut",
            self.sigma_S if self.sigma_D is None else equal_density_threshold(self.sigma_S, self.sigma_D),
        )

    @property
    def mode(self) -> str:
        return "unknown" if self.sigma_D is None else "known"

    def __call__(self, z, model, rng=None):
        eps = _residual(z, model)
        return MembershipGuess(int(abs(eps) >= self.cut), eps)


@dataclass(frozen=True)
class ColludingAdversary:
    keys: CollusionKeys
    name = "colluding"

    def __call__(self, z, model, rng=None):
        return adv_colluding(z, model, self.keys)


@dataclass(frozen=True)
class ConstantMembershipAdversary:
    bit: int = 0
    name = "constant"

    def __call__(self, z, model, rng=None):
        return MembershipGuess(self.bit)
