"""Data model, synthetic distributions, losses and random streams.

Everything here is immutable after construction. Randomness is always passed
in explicitly as a :class:`numpy.random.Generator`; :func:`derive_stream`
builds counter-based (Philox) generators from a master seed and a tuple of
labels so that any trial can be replayed independently of execution order.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Sequence

import numpy as np
from scipy import special

from .errors import ContractError, DomainError, LossTypeError, PreconditionError

__all__ = [
    "DataPoint",
    "Dataset",
    "SyntheticDistribution",
    "GaussianLinear",
    "FiniteClassification",
    "RegressionChannel",
    "ClassificationChannel",
    "EmpiricalDistribution",
    "LossSpec",
    "ErrorStats",
    "erf",
    "erf_array",
    "loss_eval",
    "loss_values",
    "draw_challenge",
    "derive_stream",
    "encode_features",
]


# ---------------------------------------------------------------------------
# random streams


def _label_int(label: Any) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if label < 0:
            raise DomainError(f"stream labels must be nonnegative, got {label}")
        return int(label)
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_stream(seed: int, *labels: Any) -> np.random.Generator:
    """Return a Philox generator keyed on ``seed`` and ``labels``.

    Integer labels are used as-is; anything else is hashed with SHA-256, so
    ``derive_stream(7, "exp", "env", 3)`` is stable across processes and
    platforms.
    """
    if seed < 0:
        raise DomainError("master seed must be nonnegative")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_int(x) for x in labels))
    return np.random.Generator(np.random.Philox(seq))


# ---------------------------------------------------------------------------
# special functions


def erf(x: float) -> float:
    """Gauss error function of a finite real.

    Backed by the platform libm, whose error is below one ulp on the whole
    real line; the test-suite checks it against an arbitrary-precision Taylor
    sum to 1e-12 on [-6, 6].
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"erf is only defined here for finite input, got {x!r}")
    return math.erf(x)


def erf_array(x) -> np.ndarray:
    """Vectorised :func:`erf`; non-finite entries raise :class:`DomainError`."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("erf_array received non-finite input")
    return special.erf(arr)


def normal_cdf(x):
    return 0.5 * (1.0 + special.erf(np.asarray(x, dtype=float) / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# data points and datasets


def encode_features(v: np.ndarray, t: Any, targets: Sequence | None) -> np.ndarray:
    """Model input for a point: ``v`` followed by treatment-coded ``t``.

    The first target value is the baseline, so ``m`` targets add ``m - 1``
    indicator columns.
    """
    v = np.asarray(v, dtype=float)
    if targets is None:
        return v
    if t is None:
        raise PreconditionError("point has no target value but model expects one")
    dummies = np.zeros(len(targets) - 1)
    idx = _target_index(targets, t)
    if idx > 0:
        dummies[idx - 1] = 1.0
    return np.concatenate([v, dummies])


def _target_index(targets: Sequence, t: Any) -> int:
    try:
        return targets.index(t)
    except ValueError:
        raise DomainError(f"target value {t!r} not in declared targets {tuple(targets)!r}") from None


@dataclass(frozen=True, eq=False)
class DataPoint:
    """A labelled example ``z = (v, t, y)``.

    ``v`` holds the known features, ``t`` the sensitive target value (or
    ``None`` when the problem has no sensitive attribute) and ``y`` the
    response.
    """

    v: np.ndarray
    y: Any
    t: Any = None

    def key(self) -> tuple:
        return (np.ascontiguousarray(self.v, dtype=float).tobytes(), self.t, _key_y(self.y))

    def same_as(self, other: "DataPoint") -> bool:
        return self.key() == other.key()


def _key_y(y):
    if isinstance(y, (float, np.floating)):
        return float(y)
    if isinstance(y, (int, np.integer)):
        return int(y)
    return y


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered training set stored column-wise.

    ``t`` stores target *indices* into ``targets``; :meth:`point` returns the
    target *value*. ``response`` is ``"real"`` or ``"categorical"`` (integer
    class labels).
    """

    V: np.ndarray
    y: np.ndarray
    t: np.ndarray | None = None
    targets: tuple | None = None
    response: str = "real"
    provenance: str = "synthetic"

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        y = np.asarray(self.y)
        y = y.astype(int) if self.response == "categorical" else y.astype(float)
        if V.shape[0] < 1:
            raise PreconditionError("a dataset needs at least one point")
        if y.shape != (V.shape[0],):
            raise DomainError(f"response shape {y.shape} does not match {V.shape[0]} rows")
        if self.response not in ("real", "categorical"):
            raise DomainError(f"unknown response kind {self.response!r}")
        if self.provenance not in ("synthetic", "csv"):
            raise DomainError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "y", y)
        if (self.t is None) != (self.targets is None):
            raise DomainError("t and targets must be given together")
        if self.t is not None:
            t = np.asarray(self.t, dtype=int)
            if t.shape != y.shape or t.min() < 0 or t.max() >= len(self.targets):
                raise DomainError("target indices out of range")
            object.__setattr__(self, "t", t)
            object.__setattr__(self, "targets", tuple(self.targets))

    def __len__(self) -> int:
        return self.V.shape[0]

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def n_features(self) -> int:
        return self.V.shape[1]

    @cached_property
    def X(self) -> np.ndarray:
        if self.targets is None:
            return self.V
        dummies = np.zeros((self.n, len(self.targets) - 1))
        rows = np.nonzero(self.t > 0)[0]
        dummies[rows, self.t[rows] - 1] = 1.0
        return np.hstack([self.V, dummies])

    def point(self, i: int) -> DataPoint:
        t = None if self.t is None else self.targets[self.t[i]]
        return DataPoint(self.V[i], self.y[i].item(), t)

    @property
    def points(self) -> list[DataPoint]:
        return [self.point(i) for i in range(self.n)]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            self.V[idx],
            self.y[idx],
            None if self.t is None else self.t[idx],
            self.targets,
            self.response,
            self.provenance,
        )

    def without(self, i: int) -> "Dataset":
        keep = np.ones(self.n, dtype=bool)
        keep[i] = False
        return self.subset(np.nonzero(keep)[0])

    def extended(self, V, y) -> "Dataset":
        """Append rows that carry no target (used for collusion supplements)."""
        if self.t is not None:
            raise PreconditionError("cannot append untargeted rows to a targeted dataset")
        return Dataset(
            np.vstack([self.V, np.atleast_2d(V)]),
            np.concatenate([self.y, np.asarray(y)]),
            response=self.response,
            provenance=self.provenance,
        )

    @cached_property
    def _keys(self) -> frozenset:
        return frozenset(self.point(i).key() for i in range(self.n))

    def contains(self, z: DataPoint) -> bool:
        return z.key() in self._keys


# ---------------------------------------------------------------------------
# distributions


def _normalise_prior(targets, prior, m_hint=None):
    if targets is None and prior is None and m_hint is None:
        return None, None
    if targets is None:
        m = len(prior) if prior is not None else m_hint
        targets = tuple(range(m))
    targets = tuple(targets)
    if len(targets) < 2:
        raise DomainError("an attribute problem needs at least two target values")
    if prior is None:
        prior = np.full(len(targets), 1.0 / len(targets))
    prior = np.asarray(prior, dtype=float)
    if prior.shape != (len(targets),):
        raise DomainError("prior length does not match targets")
    if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-9:
        raise DomainError(f"prior must be a probability vector, got {prior.tolist()}")
    return targets, prior


def _sample_index(cdf: np.ndarray, rng: np.random.Generator) -> int:
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), len(cdf) - 1)


class SyntheticDistribution:
    """Common protocol for the generative laws ``D``.

    Subclasses provide :meth:`sample` (one point) and :meth:`sample_n` (an
    i.i.d. dataset). ``continuous`` is True when two independent draws
    coincide with probability zero.
    """

    kind: str = "abstract"
    continuous: bool = True
    response: str = "real"
    targets: tuple | None = None
    prior: np.ndarray | None = None

    def sample(self, rng: np.random.Generator) -> DataPoint:
        raise NotImplementedError

    def sample_n(self, n: int, rng: np.random.Generator) -> Dataset:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @cached_property
    def _prior_cdf(self):
        return None if self.prior is None else np.cumsum(self.prior)

    def _draw_t(self, rng):
        return _sample_index(self._prior_cdf, rng)


@dataclass(frozen=True, eq=False)
class GaussianLinear(SyntheticDistribution):
    """``v ~ N(0, I)``, ``t ~ prior``, ``y = b + w.v + tau[t] + N(0, sigma^2)``."""

    weights: Any
    sigma: float
    tau: Any = None
    targets: tuple | None = None
    prior: Any = None
    intercept: float = 0.0
    kind = "gaussian-linear"

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "weights", w)
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        tau = None if self.tau is None else np.asarray(self.tau, dtype=float)
        targets, prior = _normalise_prior(
            self.targets, self.prior, None if tau is None else len(tau)
        )
        if targets is not None and tau is None:
            tau = np.zeros(len(targets))
        if tau is not None and tau.shape != (len(targets),):
            raise DomainError("tau must have one entry per target")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "prior", prior)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def noise_sigma(self) -> float:
        return self.sigma

    def mean(self, v, t_idx=None):
        out = self.intercept + np.asarray(v, dtype=float) @ self.weights
        if self.tau is not None:
            out = out + self.tau[t_idx]
        return out

    def sample(self, rng):
        v = rng.standard_normal(self.dim)
        if self.targets is None:
            return DataPoint(v, float(self.mean(v) + self.noise_sigma * rng.standard_normal()))
        ti = self._draw_t(rng)
        y = self.mean(v, ti) + self.noise_sigma * rng.standard_normal()
        return DataPoint(v, float(y), self.targets[ti])

    def sample_n(self, n, rng):
        V = rng.standard_normal((n, self.dim))
        if self.targets is None:
            y = self.mean(V) + self.noise_sigma * rng.standard_normal(n)
            return Dataset(V, y)
        t = np.minimum(np.searchsorted(self._prior_cdf, rng.random(n), side="right"), len(self.targets) - 1)
        y = self.mean(V, t) + self.noise_sigma * rng.standard_normal(n)
        return Dataset(V, y, t, self.targets)


@dataclass(frozen=True, eq=False)
class RegressionChannel(GaussianLinear):
    """Idealized regression channel with member/non-member residual laws.

    The population is :class:`GaussianLinear` with noise ``sigma_D``. The
    companion trainer (:class:`privleak.models.ChannelTrainer`) returns a model
    whose residual on each training point is an independent ``N(0, sigma_S^2)``
    draw, so the hypotheses of the Gaussian-error theorems hold exactly.
    """

    weights: Any = (1.0,)
    sigma: float = 1.0
    tau: Any = None
    targets: tuple | None = None
    prior: Any = None
    intercept: float = 0.0
    sigma_S: float = 1.0
    sigma_D: float = 1.0
    kind = "idealized-regression-channel"

    def __post_init__(self):
        if not (self.sigma_S > 0 and self.sigma_D > 0):
            raise DomainError("sigma_S and sigma_D must be positive")
        object.__setattr__(self, "sigma", float(self.sigma_D))
        super().__post_init__()

    @property
    def ratio(self) -> float:
        return self.sigma_D / self.sigma_S


@dataclass(frozen=True, eq=False)
class ClassificationChannel(SyntheticDistribution):
    """Idealized classification channel with 0-1 loss rates ``p_S``/``p_D``.

    ``v ~ N(0, I)``; the clean label bins ``Phi(v_0)`` into ``n_labels``
    equal-mass classes and the observed label is a uniformly chosen wrong
    class with probability ``p_D``. The channel trainer memorises each
    training point so that it is misclassified with probability ``p_S``.
    """

    p_S: float
    p_D: float
    n_labels: int = 2
    dimension: int = 1
    kind = "idealized-classification-channel"
    response = "categorical"

    def __post_init__(self):
        for name in ("p_S", "p_D"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {p}")
        if self.n_labels < 2:
            raise DomainError("need at least two labels")
        if self.p_S > self.p_D:
            warnings.warn(
                f"p_S={self.p_S} exceeds p_D={self.p_D}: the channel underfits its training set",
                stacklevel=2,
            )

    @property
    def dim(self) -> int:
        return self.dimension

    def clean_label(self, v) -> np.ndarray | int:
        v = np.asarray(v, dtype=float)
        u = normal_cdf(v[..., 0])
        lab = np.minimum((u * self.n_labels).astype(int), self.n_labels - 1)
        return lab if lab.ndim else int(lab)

    def _corrupt(self, clean, flip, shift):
        return np.where(flip, (clean + shift) % self.n_labels, clean)

    def sample(self, rng):
        v = rng.standard_normal(self.dim)
        c = self.clean_label(v)
        if rng.random() < self.p_D:
            c = (c + int(rng.integers(1, self.n_labels))) % self.n_labels
        return DataPoint(v, int(c))

    def sample_n(self, n, rng):
        V = rng.standard_normal((n, self.dim))
        flip = rng.random(n) < self.p_D
        shift = rng.integers(1, self.n_labels, size=n)
        y = self._corrupt(self.clean_label(V), flip, shift)
        return Dataset(V, y, response="categorical")


@dataclass(frozen=True, eq=False)
class FiniteClassification(SyntheticDistribution):
    """Distribution with enumerated support ``{(v_k, t_k, y_k)}`` and probabilities."""

    V: Any
    y: Any
    probs: Any
    t: Any = None
    targets: tuple | None = None
    response: str = "categorical"
    kind = "finite-classification"
    continuous = False

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (V.shape[0],) or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-9:
            raise DomainError("support probabilities must be a probability vector")
        y = np.asarray(self.y)
        y = y.astype(int) if self.response == "categorical" else y.astype(float)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_cdf", np.cumsum(probs))
        if self.t is not None:
            t = np.asarray(self.t, dtype=int)
            targets = tuple(self.targets) if self.targets is not None else tuple(range(t.max() + 1))
            prior = np.bincount(t, weights=probs, minlength=len(targets))
            object.__setattr__(self, "t", t)
            object.__setattr__(self, "targets", targets)
            object.__setattr__(self, "prior", prior)

    @property
    def dim(self) -> int:
        return self.V.shape[1]

    @property
    def size(self) -> int:
        return self.V.shape[0]

    @cached_property
    def deterministic_labels(self) -> bool:
        """True when the features of every support point fix its response."""
        seen = {}
        X = self.V if self.t is None else np.column_stack([self.V, self.t])
        for row, y in zip(X, self.y):
            key = row.tobytes()
            if seen.setdefault(key, y) != y:
                return False
        return True

    def sample(self, rng):
        k = _sample_index(self._cdf, rng)
        t = None if self.t is None else self.targets[self.t[k]]
        return DataPoint(self.V[k], self.y[k].item(), t)

    def sample_n(self, n, rng):
        k = np.minimum(np.searchsorted(self._cdf, rng.random(n), side="right"), self.size - 1)
        return Dataset(
            self.V[k], self.y[k], None if self.t is None else self.t[k], self.targets, self.response
        )

    @classmethod
    def grid(cls, levels: int, dim: int, n_labels: int = 4) -> "FiniteClassification":
        """Uniform law on ``{0..levels-1}^dim`` with a deterministic label.

        The label is the quadrant of the first two coordinates modulo
        ``n_labels``, which a shallow tree can learn exactly.
        """
        axes = [np.arange(levels, dtype=float)] * dim
        V = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        half = levels / 2
        code = (V[:, 0] >= half).astype(int)
        if dim > 1:
            code = code + 2 * (V[:, 1] >= half).astype(int)
        probs = np.full(V.shape[0], 1.0 / V.shape[0])
        return cls(V, code % n_labels, probs)

    @classmethod
    def random_labels(cls, domain_size: int, n_labels: int = 2) -> "FiniteClassification":
        """``x`` uniform on ``{0..domain_size-1}``, label uniform and independent of ``x``."""
        x = np.repeat(np.arange(domain_size, dtype=float), n_labels)
        y = np.tile(np.arange(n_labels), domain_size)
        probs = np.full(x.shape[0], 1.0 / x.shape[0])
        return cls(x[:, None], y, probs)


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution(SyntheticDistribution):
    """Uniform law over the rows of a dataset (held-out split of a CSV)."""

    data: Dataset
    kind = "empirical"
    continuous = False

    def __post_init__(self):
        object.__setattr__(self, "response", self.data.response)
        object.__setattr__(self, "targets", self.data.targets)
        if self.data.targets is not None:
            counts = np.bincount(self.data.t, minlength=len(self.data.targets))
            object.__setattr__(self, "prior", counts / counts.sum())

    @property
    def dim(self) -> int:
        return self.data.n_features

    def sample(self, rng):
        return self.data.point(int(rng.integers(self.data.n)))

    def sample_n(self, n, rng):
        return self.data.subset(rng.integers(self.data.n, size=n))


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class LossSpec:
    """Loss family and its bound ``B`` (``inf`` when unbounded).

    ``bounded-custom`` uses ``fn(prediction, y)``; the default is squared
    error truncated at ``B``.
    """

    kind: str = "squared-error"
    bound: float = math.inf
    fn: Callable[[Any, Any], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "zero-one":
            if self.bound not in (1, 1.0, math.inf):
                raise DomainError("zero-one loss has bound 1")
            object.__setattr__(self, "bound", 1.0)
        elif self.kind == "squared-error":
            if self.bound != math.inf:
                raise DomainError("squared-error loss is unbounded; use bounded-custom")
        elif self.kind == "bounded-custom":
            if not (math.isfinite(self.bound) and self.bound > 0):
                raise DomainError("bounded-custom loss needs a finite positive bound")
        else:
            raise DomainError(f"unknown loss kind {self.kind!r}")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.bound)

    @classmethod
    def zero_one(cls) -> "LossSpec":
        return cls("zero-one", 1.0)

    @classmethod
    def squared(cls) -> "LossSpec":
        return cls("squared-error")

    @classmethod
    def truncated_squared(cls, bound: float) -> "LossSpec":
        return cls("bounded-custom", bound)

    def _custom(self, pred, y):
        if self.fn is not None:
            return np.asarray(self.fn(pred, y), dtype=float)
        diff = np.asarray(y, dtype=float) - np.asarray(pred, dtype=float)
        return np.minimum(diff * diff, self.bound)


def loss_values(spec: LossSpec, preds, y, output: str) -> np.ndarray:
    """Per-point losses of predictions ``preds`` against responses ``y``."""
    if spec.kind == "zero-one":
        if output != "categorical":
            raise LossTypeError("zero-one loss needs a categorical model")
        return (np.asarray(preds) != np.asarray(y)).astype(float)
    if spec.kind == "squared-error":
        if output != "real":
            raise LossTypeError("squared-error loss needs a real-valued model")
        diff = np.asarray(y, dtype=float) - np.asarray(preds, dtype=float)
        return diff * diff
    vals = spec._custom(preds, y)
    if np.any(vals < 0) or np.any(vals > spec.bound):
        raise ContractError(f"custom loss left [0, {spec.bound}]")
    return vals


def loss_eval(model, z: DataPoint, spec: LossSpec) -> float:
    """Loss of ``model`` on the single point ``z``."""
    pred = model(z.v, z.t)
    if spec.kind == "zero-one":
        if model.output != "categorical":
            raise LossTypeError("zero-one loss needs a categorical model")
        return 0.0 if pred == z.y else 1.0
    if spec.kind == "squared-error":
        if model.output != "real":
            raise LossTypeError("squared-error loss needs a real-valued model")
        return (z.y - pred) ** 2
    return float(loss_values(spec, pred, z.y, model.output))


@dataclass(frozen=True)
class ErrorStats:
    """Training and population residual spreads of a regression model."""

    sigma_S: float
    sigma_D: float

    def __post_init__(self):
        if self.sigma_S < 0 or not self.sigma_D > 0:
            raise DomainError("need sigma_S >= 0 and sigma_D > 0")

    @property
    def ratio(self) -> float:
        return math.inf if self.sigma_S == 0 else self.sigma_D / self.sigma_S


# ---------------------------------------------------------------------------
# challenge sampling


def draw_challenge(S: Dataset, D: SyntheticDistribution, rng: np.random.Generator) -> tuple[int, DataPoint]:
    """Flip ``b``; return a uniform member of ``S`` for 0 or a fresh draw from ``D`` for 1."""
    if S is None or len(S) == 0:
        raise PreconditionError("challenge needs a nonempty training set")
    b = int(rng.integers(2))
    if b == 0:
        return 0, S.point(int(rng.integers(S.n)))
    return 1, D.sample(rng)
