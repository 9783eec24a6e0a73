"""Attribute-inference adversaries and their analysis helpers.

The adversary sees a public view of a point (by default the model-inversion
view ``(v, y)``) and tries to recover its sensitive target ``t``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import (
    ClassificationChannel,
    DataPoint,
    EmpiricalDistribution,
    FiniteClassification,
    GaussianLinear,
    SyntheticDistribution,
    _normalise_prior,
)
from .errors import DomainError, LossTypeError, NotComputableError, PreconditionError
from .models import Model

__all__ = [
    "BOTTOM",
    "PublicView",
    "AttributeSchema",
    "AttributeGuess",
    "adv_general_attribute",
    "simulator_optimal",
    "decision_regions",
    "DecisionRegions",
    "GeneralAttributeAdversary",
    "PriorArgmaxAdversary",
]


class _Bottom:
    """The "no answer" output of attribute adversaries."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOTTOM"

    def __reduce__(self):
        return (_Bottom, ())


BOTTOM = _Bottom()


@dataclass(frozen=True, eq=False)
class PublicView:
    """Model-inversion view ``(v, y)`` of a point."""

    v: np.ndarray
    y: Any

    def __eq__(self, other):
        if not isinstance(other, PublicView):
            return NotImplemented
        return np.array_equal(self.v, other.v) and self.y == other.y

    def __hash__(self):
        return hash((np.asarray(self.v, dtype=float).tobytes(), self.y))


def _mi_phi(z: DataPoint) -> PublicView:
    return PublicView(z.v, z.y)


def _mi_pi(z: DataPoint):
    return z.t


def _mi_phi_inverse(w: PublicView) -> DataPoint:
    return DataPoint(w.v, w.y, None)


@dataclass(frozen=True)
class AttributeSchema:
    """Targets, prior and the view maps of an attribute-inference problem.

    ``phi_inverse`` rebuilds a point from its view with target ``None``;
    callers substitute a candidate target with :meth:`complete`.
    """

    targets: tuple
    prior: Any = None
    phi: Callable[[DataPoint], Any] = field(default=_mi_phi, compare=False)
    pi: Callable[[DataPoint], Any] = field(default=_mi_pi, compare=False)
    phi_inverse: Callable[[Any], DataPoint] = field(default=_mi_phi_inverse, compare=False)

    def __post_init__(self):
        targets, prior = _normalise_prior(self.targets, self.prior)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "prior", prior)
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "log_prior", np.log(prior))

    @classmethod
    def model_inversion(cls, targets: Sequence, prior=None) -> "AttributeSchema":
        return cls(tuple(targets), prior)

    @classmethod
    def for_distribution(cls, D: SyntheticDistribution) -> "AttributeSchema":
        if D.targets is None:
            raise PreconditionError(f"distribution {D.kind} has no sensitive attribute")
        return cls(D.targets, D.prior)

    @property
    def m(self) -> int:
        return len(self.targets)

    def index(self, t) -> int:
        return self.targets.index(t)

    def complete(self, view, t) -> DataPoint:
        z = self.phi_inverse(view)
        return DataPoint(z.v, z.y, t)

    def prior_argmax(self):
        return self.targets[int(np.argmax(self.prior))]


@dataclass(frozen=True)
class AttributeGuess:
    """Guessed target value (or :data:`BOTTOM`) with optional per-target scores."""

    value: Any
    posterior_scores: np.ndarray | None = None


def _posterior(log_scores: np.ndarray) -> np.ndarray:
    finite = np.isfinite(log_scores)
    if not finite.any():
        return np.full(log_scores.shape, 1.0 / log_scores.size)
    w = np.exp(log_scores - log_scores[finite].max())
    return w / w.sum()


def _gaussian_log_scores(y, preds, log_prior, sigma):
    eps = y - np.asarray(preds, dtype=float)
    return log_prior - eps * eps / (2.0 * sigma * sigma)


def adv_general_attribute(view: PublicView, model: Model, schema: AttributeSchema, sigma_guess: float) -> AttributeGuess:
    """Pick the target maximising ``prior(t) * N(y - model(v, t); 0, sigma_guess^2)``.

    Ties go to the lowest target index.
    """
    if model.output != "real":
        raise LossTypeError("the general attribute adversary needs a real-valued model")
    if not sigma_guess > 0:
        raise DomainError("sigma_guess must be positive")
    preds = [model(view.v, t) for t in schema.targets]
    scores = _gaussian_log_scores(float(view.y), preds, schema.log_prior, sigma_guess)
    return AttributeGuess(schema.targets[int(np.argmax(scores))], _posterior(scores))


def simulator_optimal(view: PublicView, D: SyntheticDistribution, schema: AttributeSchema) -> AttributeGuess:
    """Bayes-optimal guess of ``t`` from the view alone, under the law ``D``."""
    if isinstance(D, GaussianLinear):
        v = np.asarray(view.v, dtype=float)
        means = [D.mean(v, i) for i in range(schema.m)]
        scores = _gaussian_log_scores(float(view.y), means, schema.log_prior, D.noise_sigma)
        return AttributeGuess(schema.targets[int(np.argmax(scores))], _posterior(scores))
    if isinstance(D, (FiniteClassification, EmpiricalDistribution)):
        if isinstance(D, EmpiricalDistribution):
            V, y, t = D.data.V, D.data.y, D.data.t
            probs = np.full(D.data.n, 1.0 / D.data.n)
        else:
            V, y, t, probs = D.V, D.y, D.t, D.probs
        if t is None:
            raise NotComputableError("distribution carries no sensitive attribute")
        hit = np.all(V == np.asarray(view.v, dtype=float), axis=1) & (y == view.y)
        mass = np.bincount(t[hit], weights=probs[hit], minlength=schema.m)
        if mass.sum() == 0:
            mass = schema.prior
        post = mass / mass.sum()
        return AttributeGuess(schema.targets[int(np.argmax(post))], post)
    if isinstance(D, ClassificationChannel):
        raise NotComputableError("classification channel has no sensitive attribute")
    raise NotComputableError(f"no conditional target law for distribution kind {D.kind!r}")


# ---------------------------------------------------------------------------
# decision regions


@dataclass(frozen=True)
class DecisionRegions:
    """Partition of the response line by the general adversary's choice.

    ``breakpoints`` are sorted and ``winners[k]`` is the target index chosen
    on ``(breakpoints[k-1], breakpoints[k])`` with ``-inf``/``+inf`` at the
    ends. ``ties`` lists groups of target indices whose weighted densities
    coincide everywhere; the lowest index in each group takes the region.
    """

    targets: tuple
    breakpoints: tuple
    winners: tuple
    ties: tuple
    _scores: Callable = field(repr=False, compare=False)

    def intervals(self) -> list[tuple[float, float, int]]:
        edges = (-math.inf,) + self.breakpoints + (math.inf,)
        return [(edges[k], edges[k + 1], w) for k, w in enumerate(self.winners)]

    def regions(self) -> dict[Any, list[tuple[float, float]]]:
        out = {t: [] for t in self.targets}
        for lo, hi, w in self.intervals():
            out[self.targets[w]].append((lo, hi))
        return out

    def select_index(self, y: float) -> int:
        k = bisect.bisect_left(self.breakpoints, y)
        if k < len(self.breakpoints) and self.breakpoints[k] == y:
            return int(np.argmax(self._scores(y)))
        return self.winners[k]

    def select(self, y: float):
        return self.targets[self.select_index(y)]


def decision_regions(schema: AttributeSchema, model_outputs: Sequence[float], sigma_guess: float) -> DecisionRegions:
    """Response intervals on which each target wins under equal-variance Gaussian errors.

    Targets ``i`` and ``j`` have equal weighted density at
    ``(mu_i + mu_j)/2 + sigma^2 ln(p_j/p_i) / (mu_i - mu_j)``; the winner of
    each gap between consecutive crossings is found by direct evaluation.
    """
    mu = np.asarray(model_outputs, dtype=float)
    if mu.shape != (schema.m,):
        raise DomainError("need one model output per target")
    if not sigma_guess > 0:
        raise DomainError("sigma_guess must be positive")
    lp = schema.log_prior
    s2 = sigma_guess * sigma_guess

    # the shared -y^2/(2 sigma^2) term is dropped so large |y| cannot overflow
    def scores(y):
        with np.errstate(over="ignore", invalid="ignore"):
            return lp + (y * mu - 0.5 * mu * mu) / s2

    crossings = set()
    tie_groups: dict[int, list[int]] = {}
    for i in range(schema.m):
        for j in range(i + 1, schema.m):
            if not (np.isfinite(lp[i]) and np.isfinite(lp[j])):
                continue
            if mu[i] == mu[j]:
                if lp[i] == lp[j]:
                    root = next((g for g, members in tie_groups.items() if i in members), i)
                    tie_groups.setdefault(root, [root])
                    if j not in tie_groups[root]:
                        tie_groups[root].append(j)
                continue
            with np.errstate(over="ignore", divide="ignore"):
                cross = float(0.5 * (mu[i] + mu[j]) + s2 * (lp[j] - lp[i]) / (mu[i] - mu[j]))
            # an overflowing crossing lies beyond every finite response
            if math.isfinite(cross):
                crossings.add(cross)
    pts = sorted(crossings)
    winners = [int(np.argmax(scores(y))) for y in _gap_probes(pts)]
    bps, wins = [], [winners[0]]
    for b, w in zip(pts, winners[1:]):
        if w != wins[-1]:
            bps.append(b)
            wins.append(w)
    ties = tuple(tuple(sorted(g)) for g in tie_groups.values())
    return DecisionRegions(schema.targets, tuple(bps), tuple(wins), ties, scores)


def _gap_probes(pts):
    """One response inside each gap; outer probes step out by the crossing's own scale."""
    if not pts:
        return [0.0]
    big = np.finfo(float).max
    lo = max(pts[0] - max(1.0, abs(pts[0])), -big)
    hi = min(pts[-1] + max(1.0, abs(pts[-1])), big)
    return [lo] + [0.5 * a + 0.5 * b for a, b in zip(pts, pts[1:])] + [hi]


# ---------------------------------------------------------------------------
# uniform-signature wrappers


@dataclass(frozen=True)
class GeneralAttributeAdversary:
    sigma_guess: float
    name = "general"

    def __call__(self, view, model, schema, rng=None):
        return adv_general_attribute(view, model, schema, self.sigma_guess)


@dataclass(frozen=True)
class PriorArgmaxAdversary:
    """Ignores the model and returns the most likely target a priori."""

    name = "prior-argmax"

    def __call__(self, view, model, schema, rng=None):
        return AttributeGuess(schema.prior_argmax())
