"""Build distributions, trainers, losses and adversaries from JSON-style specs.

Specs are plain dicts with a ``kind`` key, so experiment configurations can
be stored, hashed and shipped to worker processes. Objects that are already
built pass through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .attribute import (
    AttributeGuess,
    AttributeSchema,
    GeneralAttributeAdversary,
    PriorArgmaxAdversary,
)
from .core import (
    ClassificationChannel,
    Dataset,
    FiniteClassification,
    GaussianLinear,
    LossSpec,
    RegressionChannel,
    SyntheticDistribution,
)
from .errors import ConfigError
from .membership import (
    BoundedLossAdversary,
    ColludingAdversary,
    ConstantMembershipAdversary,
    MembershipGuess,
    ThresholdAdversary,
)
from .models import (
    ChannelTrainer,
    CollusionKeys,
    ColludingTrainer,
    ConstantTrainer,
    DpFiniteTrainer,
    DpParams,
    ErmFiniteTrainer,
    RidgeTrainer,
    TreeTrainer,
    all_labelings,
)
from .reductions import (
    MembershipFromAttribute,
    MultiQueryAttributeReduction,
    OracleHandle,
    UniformAttributeReduction,
)

__all__ = [
    "TrialContext",
    "AdversaryFactory",
    "build_distribution",
    "build_trainer",
    "build_loss",
    "build_adversary",
    "MembershipGenie",
    "AttributeGenie",
    "MEMBERSHIP_ADVERSARIES",
    "ATTRIBUTE_ADVERSARIES",
]


@dataclass
class TrialContext:
    """What an adversary factory may see: the trained model and its setting.

    ``challenge`` holds ``(b, z)`` for the current trial. Only the genie
    oracles read it; real adversaries never do.
    """

    S: Dataset
    model: Any
    D: SyntheticDistribution
    schema: AttributeSchema | None
    trainer: Any
    loss: LossSpec | None
    keys: CollusionKeys | None = None
    challenge: tuple | None = None


# ---------------------------------------------------------------------------
# distributions


def _kind(spec, what):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"{what} spec must be an object with a 'kind'")
    return spec["kind"]


def build_distribution(spec) -> SyntheticDistribution:
    if isinstance(spec, SyntheticDistribution):
        return spec
    kind = _kind(spec, "distribution")
    if kind == "gaussian-linear":
        weights = spec.get("weights")
        if weights is None:
            dim = int(spec.get("dim", 1))
            weights = np.full(dim, 1.0 / math.sqrt(dim))
        return GaussianLinear(
            weights, spec.get("sigma", 1.0), spec.get("tau"), _tuple(spec.get("targets")),
            spec.get("prior"), spec.get("intercept", 0.0),
        )
    if kind == "idealized-regression-channel":
        sigma_S = spec.get("sigma_S", 1.0)
        sigma_D = spec.get("sigma_D", sigma_S * spec.get("ratio", 1.0))
        return RegressionChannel(
            weights=spec.get("weights", (1.0,)), tau=spec.get("tau"), targets=_tuple(spec.get("targets")),
            prior=spec.get("prior"), intercept=spec.get("intercept", 0.0), sigma_S=sigma_S, sigma_D=sigma_D,
        )
    if kind == "idealized-classification-channel":
        return ClassificationChannel(spec["p_S"], spec["p_D"], spec.get("n_labels", 2), spec.get("dim", 1))
    if kind == "finite-classification":
        if "grid" in spec:
            g = spec["grid"]
            return FiniteClassification.grid(g["levels"], g["dim"], g.get("n_labels", 4))
        if "random_labels" in spec:
            g = spec["random_labels"]
            return FiniteClassification.random_labels(g["domain_size"], g.get("n_labels", 2))
        return FiniteClassification(spec["support"], spec["labels"], spec["probs"], spec.get("t"), _tuple(spec.get("targets")))
    raise ConfigError(f"unknown distribution kind {kind!r}")


def _tuple(x):
    return None if x is None else tuple(x)


# ---------------------------------------------------------------------------
# losses and trainers


def build_loss(spec) -> LossSpec | None:
    if spec is None or isinstance(spec, LossSpec):
        return spec
    kind = _kind(spec, "loss")
    if kind == "zero-one":
        return LossSpec.zero_one()
    if kind == "squared-error":
        return LossSpec.squared()
    if kind == "bounded-custom":
        return LossSpec.truncated_squared(spec["bound"])
    raise ConfigError(f"unknown loss kind {kind!r}")


def _hypotheses(spec, D):
    h = spec.get("hypotheses", "all-labelings")
    if h != "all-labelings":
        raise ConfigError(f"unknown hypothesis class {h!r}")
    if not isinstance(D, FiniteClassification) or D.dim != 1:
        raise ConfigError("all-labelings hypotheses need a one-dimensional finite distribution")
    size = int(D.V[:, 0].max()) + 1
    return all_labelings(size, int(D.y.max()) + 1)


def build_trainer(spec, D, keys: CollusionKeys | None = None):
    if not isinstance(spec, dict):
        return spec
    kind = _kind(spec, "trainer")
    if kind == "ridge":
        return RidgeTrainer(spec.get("lambda", 1.0))
    if kind == "tree":
        return TreeTrainer(spec.get("max_depth"), spec.get("min_leaf", 1))
    if kind == "idealized-channel":
        return ChannelTrainer(D)
    if kind == "dp-finite":
        return DpFiniteTrainer(DpParams(spec["dp_epsilon"], _hypotheses(spec, D)), build_loss(spec.get("loss")) or LossSpec.zero_one())
    if kind == "erm-finite":
        return ErmFiniteTrainer(_hypotheses(spec, D), build_loss(spec.get("loss")) or LossSpec.zero_one(), spec.get("claimed_epsilon"))
    if kind == "colluding":
        if keys is None:
            raise ConfigError("colluding trainer needs keys")
        return ColludingTrainer(build_trainer(spec["base"], D), keys, spec.get("mode", "wrap"))
    if kind == "constant":
        return ConstantTrainer(spec.get("value", 0.0), spec.get("output", "real"))
    raise ConfigError(f"unknown trainer kind {kind!r}")


def build_keys(spec, rng) -> CollusionKeys | None:
    if not isinstance(spec, dict) or spec.get("kind") != "colluding":
        return None
    return CollusionKeys.generate(
        spec.get("k", 3), spec.get("d", 32), spec.get("m_bits", 8), rng, spec.get("low", 0.0), spec.get("high", 1.0)
    )


# ---------------------------------------------------------------------------
# constructed oracles


@dataclass(frozen=True)
class MembershipGenie:
    """Membership oracle built with access to ``S``.

    Answers 0 with probability ``p_member`` for points of ``S`` and
    ``p_nonmember`` otherwise, so its advantage on a continuous law is
    ``p_member - p_nonmember``.
    """

    S: Dataset
    p_member: float
    p_nonmember: float
    name = "genie"

    def __call__(self, z, model, rng):
        p = self.p_member if self.S.contains(z) else self.p_nonmember
        return MembershipGuess(int(rng.random() >= p))


@dataclass
class AttributeGenie:
    """Attribute oracle that reads the hidden challenge.

    For a challenge with target index ``i`` it answers correctly with
    probability ``member_accuracy[i]`` when the point is in ``S`` and
    ``nonmember_accuracy[i]`` otherwise; wrong answers are a uniformly
    chosen other target. Its advantage is therefore known in closed form.
    """

    ctx: TrialContext
    member_accuracy: tuple
    nonmember_accuracy: tuple
    name = "genie"

    def __call__(self, view, model, schema, rng):
        _, z = self.ctx.challenge
        if schema.phi(z) != view:
            return AttributeGuess(schema.prior_argmax())
        i = schema.index(schema.pi(z))
        acc = self.member_accuracy if self.ctx.S.contains(z) else self.nonmember_accuracy
        u = rng.random()
        wrong = int(rng.integers(schema.m - 1))
        if u < acc[i]:
            return AttributeGuess(schema.targets[i])
        return AttributeGuess(schema.targets[wrong if wrong < i else wrong + 1])


@dataclass(frozen=True)
class ConstantAttributeAdversary:
    value: Any
    name = "constant"

    def __call__(self, view, model, schema, rng=None):
        return AttributeGuess(self.value)


# ---------------------------------------------------------------------------
# adversaries


@dataclass
class AdversaryFactory:
    """Builds an adversary for a trial context.

    ``task`` is ``membership`` or ``attribute``; ``build(ctx)`` returns the
    adversary; ``info`` records resolved parameters (e.g. estimated sigmas).
    """

    task: str
    build: Callable[[TrialContext], Any]
    info: dict = field(default_factory=dict)
    per_context: bool = True


MEMBERSHIP_ADVERSARIES = ("constant", "bounded-loss", "threshold", "colluding", "from-attribute", "genie")
ATTRIBUTE_ADVERSARIES = (
    "general", "prior-argmax", "constant", "uniform-reduction", "multiquery-reduction", "genie",
)


def build_adversary(spec, task: str, resolved: dict | None = None) -> AdversaryFactory:
    """Factory for the adversary ``spec`` of the given task.

    ``resolved`` supplies values computed once per experiment (sigmas),
    keyed the way :func:`privleak.harness.resolve_parameters` stores them.
    """
    if isinstance(spec, AdversaryFactory):
        return spec
    if callable(spec) and not isinstance(spec, dict):
        return AdversaryFactory(task, lambda ctx, a=spec: a, per_context=False)
    resolved = resolved or {}
    kind = _kind(spec, "adversary")
    if task == "membership":
        return _membership_factory(kind, spec, resolved)
    if task == "attribute":
        return _attribute_factory(kind, spec, resolved)
    raise ConfigError(f"unknown task {task!r}")


def _membership_factory(kind, spec, resolved):
    if kind == "constant":
        adv = ConstantMembershipAdversary(spec.get("bit", 0))
        return AdversaryFactory("membership", lambda ctx: adv, per_context=False)
    if kind == "bounded-loss":
        def make(ctx):
            loss = build_loss(spec.get("loss")) or ctx.loss
            if loss is None or not loss.bounded:
                raise ConfigError("bounded-loss adversary needs a bounded loss; set adversary.loss")
            return BoundedLossAdversary(loss)
        return AdversaryFactory("membership", make, per_context=False)
    if kind == "threshold":
        sigma_S, sigma_D = resolved["sigma_S"], resolved["sigma_D"]
        mode = spec.get("mode", "known")
        limit = mode == "known" and not sigma_D > sigma_S
        adv = ThresholdAdversary(sigma_S, None if (mode == "unknown" or limit) else sigma_D)
        info = {"sigma_S": sigma_S, "sigma_D": sigma_D, "mode": mode, "cut": adv.cut, "limit_cut": limit}
        return AdversaryFactory("membership", lambda ctx: adv, info, per_context=False)
    if kind == "colluding":
        return AdversaryFactory("membership", lambda ctx: ColludingAdversary(ctx.keys), per_context=False)
    if kind == "from-attribute":
        inner = _attribute_factory(_kind(spec["oracle"], "oracle"), spec["oracle"], resolved)

        def make(ctx):
            return MembershipFromAttribute(OracleHandle("attribute-oracle", inner.build(ctx)), ctx.schema)

        return AdversaryFactory("membership", make, inner.info, inner.per_context)
    if kind == "genie":
        q0, q1 = spec["p_member"], spec["p_nonmember"]
        return AdversaryFactory("membership", lambda ctx: MembershipGenie(ctx.S, q0, q1))
    raise ConfigError(f"unknown membership adversary {kind!r}")


def _attribute_factory(kind, spec, resolved):
    if kind == "general":
        sigma = resolved.get("sigma_guess", resolved.get("sigma_S"))
        adv = GeneralAttributeAdversary(sigma)
        return AdversaryFactory("attribute", lambda ctx: adv, {"sigma_guess": sigma}, per_context=False)
    if kind == "prior-argmax":
        adv = PriorArgmaxAdversary()
        return AdversaryFactory("attribute", lambda ctx: adv, per_context=False)
    if kind == "constant":
        adv = ConstantAttributeAdversary(spec["value"])
        return AdversaryFactory("attribute", lambda ctx: adv, per_context=False)
    if kind in ("uniform-reduction", "multiquery-reduction"):
        inner = _membership_factory(_kind(spec["oracle"], "oracle"), spec["oracle"], resolved)
        wrap = UniformAttributeReduction if kind == "uniform-reduction" else MultiQueryAttributeReduction

        def make(ctx):
            return wrap(OracleHandle("membership-oracle", inner.build(ctx)))

        return AdversaryFactory("attribute", make, inner.info, inner.per_context)
    if kind == "genie":
        a0 = tuple(spec["member_accuracy"])
        a1 = tuple(spec["nonmember_accuracy"])
        return AdversaryFactory("attribute", lambda ctx: AttributeGenie(ctx, a0, a1))
    raise ConfigError(f"unknown attribute adversary {kind!r}")
