"""Reductions between membership and attribute inference.

Each reduction uses another adversary as a black-box oracle. Oracles are
wrapped in :class:`OracleHandle`, which counts calls so tests can check how
many queries a reduction spends per challenge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .attribute import BOTTOM, AttributeGuess, AttributeSchema
from .core import DataPoint
from .errors import DomainError
from .membership import MembershipGuess

__all__ = [
    "OracleHandle",
    "red_membership_from_attribute",
    "red_attribute_uniform",
    "red_attribute_multiquery",
    "MembershipFromAttribute",
    "UniformAttributeReduction",
    "MultiQueryAttributeReduction",
]

KINDS = ("membership-oracle", "attribute-oracle")


@dataclass
class OracleHandle:
    """Counted access to an adversary used as an oracle.

    A membership oracle is called as ``fn(z, model, rng)``; an attribute
    oracle as ``fn(view, model, schema, rng)``.
    """

    kind: str
    fn: Callable[..., Any]
    query_counter: int = field(default=0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"oracle kind must be one of {KINDS}")

    def __call__(self, *args):
        self.query_counter += 1
        return self.fn(*args)


def _require(oracle: OracleHandle, kind: str):
    if oracle.kind != kind:
        raise DomainError(f"expected a {kind}, got a {oracle.kind}")


def red_membership_from_attribute(
    z: DataPoint, model, oracle: OracleHandle, schema: AttributeSchema, rng=None
) -> MembershipGuess:
    """Claim membership iff the attribute oracle recovers ``t`` from the view of ``z``."""
    _require(oracle, "attribute-oracle")
    guess = oracle(schema.phi(z), model, schema, rng)
    return MembershipGuess(0 if guess.value == schema.pi(z) else 1)


def red_attribute_uniform(view, model, oracle: OracleHandle, schema: AttributeSchema, rng) -> AttributeGuess:
    """Guess a uniformly drawn target and keep it only if the oracle calls the completion a member."""
    _require(oracle, "membership-oracle")
    t = schema.targets[int(rng.integers(schema.m))]
    answer = oracle(schema.complete(view, t), model, rng)
    return AttributeGuess(t if answer.bit == 0 else BOTTOM)


def red_attribute_multiquery(view, model, oracle: OracleHandle, schema: AttributeSchema, rng=None) -> AttributeGuess:
    """Query every completion; return the a-priori most likely accepted target."""
    _require(oracle, "membership-oracle")
    accepted = np.zeros(schema.m, dtype=bool)
    for i, t in enumerate(schema.targets):
        accepted[i] = oracle(schema.complete(view, t), model, rng).bit == 0
    if not accepted.any():
        return AttributeGuess(BOTTOM)
    weights = np.where(accepted, schema.prior, -1.0)
    return AttributeGuess(schema.targets[int(np.argmax(weights))])


# ---------------------------------------------------------------------------
# uniform-signature wrappers


@dataclass
class MembershipFromAttribute:
    oracle: OracleHandle
    schema: AttributeSchema
    name = "from-attribute"

    def __call__(self, z, model, rng=None):
        return red_membership_from_attribute(z, model, self.oracle, self.schema, rng)


@dataclass
class UniformAttributeReduction:
    oracle: OracleHandle
    name = "uniform-reduction"

    def __call__(self, view, model, schema, rng):
        return red_attribute_uniform(view, model, self.oracle, schema, rng)


@dataclass
class MultiQueryAttributeReduction:
    oracle: OracleHandle
    name = "multiquery-reduction"

    def __call__(self, view, model, schema, rng=None):
        return red_attribute_multiquery(view, model, self.oracle, schema, rng)
