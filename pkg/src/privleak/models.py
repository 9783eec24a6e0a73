"""Predictors and the trainers that produce them.

A *trainer* is a callable ``trainer(S, rng) -> Model``. Every model answers
single queries through ``model(v, t)`` and batches through
``model.predict(X)`` on the encoded feature matrix (see
:func:`privleak.core.encode_features`).
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import (
    ClassificationChannel,
    Dataset,
    LossSpec,
    RegressionChannel,
    SyntheticDistribution,
    encode_features,
    loss_values,
)
from .errors import (
    ContractError,
    DomainError,
    EncodingOverflowError,
    PreconditionError,
    RegularizationRequiredError,
)

__all__ = [
    "Model",
    "RidgeModel",
    "TreeModel",
    "ConstantModel",
    "TableModel",
    "ChannelRegressionModel",
    "ChannelClassificationModel",
    "CollusionKeys",
    "CollusionModel",
    "DpParams",
    "GenStats",
    "RidgeTrainer",
    "TreeTrainer",
    "ChannelTrainer",
    "DpFiniteTrainer",
    "ErmFiniteTrainer",
    "ColludingTrainer",
    "ConstantTrainer",
    "train_ridge",
    "train_tree",
    "train_dp_finite",
    "train_colluding",
    "all_labelings",
    "estimate_generalization",
]


class Model:
    """Deterministic predictor.

    Attributes:
        kind: model family tag.
        output: ``"real"`` or ``"categorical"``.
        targets: declared target values when the model takes ``t`` as input.
        loss: loss the model was trained under.
        metadata: hyperparameters and the mean training loss ``L_S``.
    """

    kind = "abstract"
    output = "real"
    targets: tuple | None = None
    loss: LossSpec = LossSpec.squared()

    def __init__(self):
        self.metadata: dict[str, Any] = {}

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.query(row) for row in X])

    def query(self, x: np.ndarray):
        return self.predict(np.asarray(x, dtype=float)[None, :])[0].item()

    def __call__(self, v, t=None):
        return self.query(encode_features(v, t, self.targets))

    def losses(self, S: Dataset, loss: LossSpec | None = None) -> np.ndarray:
        return loss_values(loss or self.loss, self.predict(S.X), S.y, self.output)


def _attach_training_loss(model: Model, S: Dataset) -> Model:
    model.metadata["L_S"] = float(np.mean(model.losses(S)))
    return model


# ---------------------------------------------------------------------------
# ridge


class RidgeModel(Model):
    kind = "ridge"

    def __init__(self, coef, intercept, targets=None, lam=0.0):
        super().__init__()
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)
        self.targets = targets
        self.metadata["lambda"] = lam

    def predict(self, X):
        return self.intercept + np.atleast_2d(np.asarray(X, dtype=float)) @ self.coef

    def query(self, x):
        return float(self.intercept + np.dot(x, self.coef))


def _ridge_system(X, lam):
    A = np.hstack([np.ones((X.shape[0], 1)), X])
    P = lam * np.eye(A.shape[1])
    P[0, 0] = 0.0
    return A, A.T @ A + P


def train_ridge(S: Dataset, lam: float) -> RidgeModel:
    """Minimise ``sum (y - b - Xw)^2 + lam*|w|^2`` exactly; ``b`` is unpenalised."""
    if lam < 0 or not math.isfinite(lam):
        raise DomainError("lambda must be a finite nonnegative real")
    A, M = _ridge_system(S.X, lam)
    if lam == 0 and np.linalg.matrix_rank(A) < A.shape[1]:
        raise RegularizationRequiredError(
            f"design of rank {np.linalg.matrix_rank(A)} < {A.shape[1]} columns; use lambda > 0"
        )
    beta = np.linalg.solve(M, A.T @ S.y)
    return _attach_training_loss(RidgeModel(beta[1:], beta[0], S.targets, lam), S)


def ridge_loo_residuals(S: Dataset, lam: float) -> np.ndarray:
    """Leave-one-out residuals ``e_i / (1 - h_ii)`` from the hat matrix."""
    A, M = _ridge_system(S.X, lam)
    beta = np.linalg.solve(M, A.T @ S.y)
    resid = S.y - A @ beta
    h = np.einsum("ij,ji->i", A, np.linalg.solve(M, A.T))
    if np.any(1.0 - h < 1e-10):
        raise RegularizationRequiredError("a point has unit leverage; its LOO fit is undefined")
    return resid / (1.0 - h)


# ---------------------------------------------------------------------------
# decision tree


class TreeModel(Model):
    """Binary tree over encoded features; a row goes left when ``x[f] <= thr``."""

    kind = "tree"

    def __init__(self, feature, threshold, left, right, value, output, targets=None):
        super().__init__()
        self.feature = np.asarray(feature, dtype=int)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=int)
        self.right = np.asarray(right, dtype=int)
        self.value = np.asarray(value)
        self.output = output
        self.targets = targets
        self.loss = LossSpec.zero_one() if output == "categorical" else LossSpec.squared()

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=int)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]

    def query(self, x):
        i = 0
        feature, threshold = self.feature, self.threshold
        while feature[i] >= 0:
            i = self.left[i] if x[feature[i]] <= threshold[i] else self.right[i]
        return self.value[i].item()


def _best_split(X, Y, min_leaf):
    """Return ``(gain, feature, threshold)`` of the best variance-reduction split.

    ``Y`` is ``(n, q)``: the response column for regression, one-hot classes
    for classification (variance of indicators is the Gini impurity).
    """
    n = X.shape[0]
    base = float(np.sum(Y.sum(axis=0) ** 2)) / n
    best = (-math.inf, -1, 0.0)
    k = np.arange(1, n)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cs = np.cumsum(Y[order], axis=0)[:-1]
        tot = cs[-1] + Y[order[-1]] if n > 1 else Y[order[-1]]
        valid = (xs[:-1] < xs[1:]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        score = np.sum(cs**2, axis=1) / k + np.sum((tot - cs) ** 2, axis=1) / (n - k)
        score = np.where(valid, score, -math.inf)
        j = int(np.argmax(score))
        gain = score[j] - base
        if gain > best[0]:
            lo, hi = xs[j], xs[j + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (gain, f, thr)
    return best


def train_tree(S: Dataset, max_depth: int | None = None, min_leaf: int = 1) -> TreeModel:
    """Greedy CART fit.

    Nodes are split while they are impure, shallower than ``max_depth`` and
    admit a split leaving ``min_leaf`` rows per side, even at zero gain. With
    ``min_leaf=1`` and unlimited depth this reproduces every training label
    whenever feature rows are distinct.
    """
    if min_leaf < 1 or S.n < min_leaf:
        raise PreconditionError("need n >= min_leaf >= 1")
    if max_depth is not None and max_depth < 0:
        raise DomainError("max_depth must be nonnegative")
    X = S.X
    categorical = S.response == "categorical"
    if categorical:
        n_cls = int(S.y.max()) + 1
        Y = np.eye(n_cls)[S.y]
    else:
        Y = S.y[:, None].astype(float)

    feature, threshold, left, right, value = [], [], [], [], []

    def leaf_value(idx):
        if categorical:
            return int(np.argmax(Y[idx].sum(axis=0)))
        return float(Y[idx, 0].mean())

    stack = [(np.arange(S.n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value(idx))
        if max_depth is not None and depth >= max_depth:
            continue
        if len(idx) < 2 * min_leaf or np.all(np.ptp(Y[idx], axis=0) == 0):
            continue
        gain, f, thr = _best_split(X[idx], Y[idx], min_leaf)
        if f < 0:
            continue
        feature[node], threshold[node] = f, thr
        mask = X[idx, f] <= thr
        stack.append((idx[~mask], depth + 1, node, True))
        stack.append((idx[mask], depth + 1, node, False))

    model = TreeModel(
        feature, threshold, left, right, np.array(value), "categorical" if categorical else "real", S.targets
    )
    model.metadata.update(max_depth=max_depth, min_leaf=min_leaf)
    return _attach_training_loss(model, S)


# ---------------------------------------------------------------------------
# simple fixed models


class ConstantModel(Model):
    kind = "constant"

    def __init__(self, value, output="real", targets=None):
        super().__init__()
        self.value = value
        self.output = output
        self.targets = targets
        self.loss = LossSpec.zero_one() if output == "categorical" else LossSpec.squared()

    def predict(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.value)

    def query(self, x):
        return self.value


class TableModel(Model):
    """Classifier on ``x in {0..N-1}`` that returns ``table[x]``."""

    kind = "table"
    output = "categorical"

    def __init__(self, table):
        super().__init__()
        self.table = np.asarray(table, dtype=int)
        self.loss = LossSpec.zero_one()

    def predict(self, X):
        return self.table[np.atleast_2d(X)[:, 0].astype(int)]

    def query(self, x):
        return int(self.table[int(x[0])])


def all_labelings(domain_size: int, n_labels: int = 2) -> list[TableModel]:
    """Every function ``{0..N-1} -> {0..L-1}`` as a :class:`TableModel`."""
    if n_labels**domain_size > 1 << 16:
        raise DomainError("hypothesis class too large to enumerate")
    return [TableModel(t) for t in itertools.product(range(n_labels), repeat=domain_size)]


# ---------------------------------------------------------------------------
# idealized channels


class ChannelRegressionModel(Model):
    """Population regression function plus a per-member offset.

    For a memorised feature vector ``v`` the prediction is shifted by
    ``offset[v]`` so the member residual equals a fresh ``N(0, sigma_S^2)``
    draw; all other inputs get the noiseless population mean.
    """

    kind = "idealized-channel"

    def __init__(self, D: RegressionChannel, offsets: dict[bytes, float]):
        super().__init__()
        self.D = D
        self.targets = D.targets
        self.offsets = offsets
        self.p = D.dim
        self.metadata.update(sigma_S=D.sigma_S, sigma_D=D.sigma_D)

    def _mean_row(self, x):
        v = x[: self.p]
        out = self.D.intercept + float(np.dot(v, self.D.weights))
        if self.targets is not None:
            dummies = x[self.p :]
            out += self.D.tau[0] + float(np.dot(dummies, self.D.tau[1:] - self.D.tau[0]))
        return out

    def query(self, x):
        x = np.asarray(x, dtype=float)
        key = np.ascontiguousarray(x[: self.p]).tobytes()
        return self._mean_row(x) + self.offsets.get(key, 0.0)

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.query(row) for row in X])

    def __call__(self, v, t=None):
        v = np.asarray(v, dtype=float)
        out = self.D.intercept + float(np.dot(v, self.D.weights))
        if self.targets is not None:
            out += self.D.tau[self.targets.index(t)]
        return out + self.offsets.get(v.tobytes(), 0.0)


class ChannelClassificationModel(Model):
    """Clean-label rule with memorised labels for training points."""

    kind = "idealized-channel"
    output = "categorical"

    def __init__(self, D: ClassificationChannel, memo: dict[bytes, int]):
        super().__init__()
        self.D = D
        self.memo = memo
        self.loss = LossSpec.zero_one()
        self.metadata.update(p_S=D.p_S, p_D=D.p_D)

    def query(self, x):
        x = np.asarray(x, dtype=float)
        hit = self.memo.get(x.tobytes())
        return self.D.clean_label(x) if hit is None else hit

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.query(row) for row in X], dtype=int)


# ---------------------------------------------------------------------------
# collusion


@dataclass(frozen=True)
class CollusionKeys:
    """Keys and encodings for the colluding trainer and its adversary.

    Each feature is quantised to ``d // p`` bits on ``[low, high)``; the
    codes are concatenated into a ``d``-bit input code. ``F_j`` maps a code
    to a pseudorandom code (decoded back to a grid point) and ``G_j`` maps it
    to a pseudorandom ``m_bits``-bit response, both keyed on ``keys[j]``.
    """

    keys: tuple
    d: int
    m_bits: int
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if len(self.keys) < 1:
            raise DomainError("need at least one key")
        if self.d < 1 or self.m_bits < 1:
            raise DomainError("d and m_bits must be positive")
        if not self.high > self.low:
            raise DomainError("encoding range must have high > low")
        object.__setattr__(self, "keys", tuple(int(k) for k in self.keys))

    @classmethod
    def generate(cls, k: int, d: int, m_bits: int, rng: np.random.Generator, low=0.0, high=1.0):
        return cls(tuple(int(x) for x in rng.integers(0, 2**63 - 1, size=k)), d, m_bits, low, high)

    @property
    def k(self) -> int:
        return len(self.keys)

    def bits_per_feature(self, p: int) -> int:
        b = self.d // p
        if b < 1:
            raise EncodingOverflowError(f"d={self.d} bits cannot hold {p} features")
        return b

    def encode(self, x) -> int:
        x = np.asarray(x, dtype=float).ravel()
        b = self.bits_per_feature(x.shape[0])
        if np.any(x < self.low) or np.any(x >= self.high) or not np.all(np.isfinite(x)):
            raise EncodingOverflowError(f"feature outside [{self.low}, {self.high})")
        q = np.floor((x - self.low) / (self.high - self.low) * (1 << b)).astype(np.int64)
        code = 0
        for qi in q:
            code = (code << b) | int(min(qi, (1 << b) - 1))
        return code

    def decode(self, code: int, p: int) -> np.ndarray:
        b = self.bits_per_feature(p)
        width = (self.high - self.low) / (1 << b)
        q = [(code >> (b * (p - 1 - i))) & ((1 << b) - 1) for i in range(p)]
        return self.low + (np.array(q, dtype=float) + 0.5) * width

    def _prf(self, j: int, tag: bytes, code: int, bits: int) -> int:
        h = hashlib.blake2b(
            tag + code.to_bytes((self.d + 7) // 8 + 1, "little"),
            key=self.keys[j].to_bytes(8, "little"),
            digest_size=16,
        )
        return int.from_bytes(h.digest(), "little") & ((1 << bits) - 1)

    def F_code(self, j: int, x) -> int:
        p = np.asarray(x).size
        return self._prf(j, b"F", self.encode(x), self.bits_per_feature(p) * p)

    def F(self, j: int, x) -> np.ndarray:
        p = np.asarray(x).size
        return self.decode(self.F_code(j, x), p)

    def G(self, j: int, x) -> int:
        return self._prf(j, b"G", self.encode(x), self.m_bits)


class CollusionModel(Model):
    """Base model wrapped with a lookup table of planted query/response pairs."""

    kind = "collusion-wrapped"
    output = "categorical"

    def __init__(self, base: Model, keys: CollusionKeys, table: dict[int, int]):
        super().__init__()
        self.base = base
        self.keys = keys
        self.table = table
        self.targets = base.targets
        self.loss = base.loss
        self.metadata.update(base.metadata, planted=len(table))

    def query(self, x):
        x = np.asarray(x, dtype=float)
        try:
            code = self.keys.encode(x)
        except EncodingOverflowError:
            return self.base.query(x)
        hit = self.table.get(code)
        return self.base.query(x) if hit is None else hit

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.asarray(self.base.predict(X)).copy()
        for i, row in enumerate(X):
            try:
                hit = self.table.get(self.keys.encode(row))
            except EncodingOverflowError:
                continue
            if hit is not None:
                out[i] = hit
        return out


def _check_collusion_inputs(S: Dataset, keys: CollusionKeys):
    if S.response != "categorical":
        raise DomainError("collusion needs categorical responses")
    if S.y.min() < 0 or S.y.max() >= 1 << keys.m_bits:
        raise EncodingOverflowError(f"responses do not fit in {keys.m_bits} bits")
    for row in S.X:
        keys.encode(row)


def train_colluding(S: Dataset, base, keys: CollusionKeys, rng=None, mode: str = "wrap") -> Model:
    """Train ``base`` on ``S`` and plant ``G_j(x_i)`` at ``F_j(x_i)`` for every pair.

    ``mode="wrap"`` answers planted queries from a lookup table in front of
    the base model. ``mode="retrain"`` appends the ``k*n`` planted pairs to
    ``S`` and retrains the base trainer on the supplemented set; the planted
    answers then survive only as far as the base learner memorises them.
    """
    _check_collusion_inputs(S, keys)
    X = S.X
    planted_x, planted_y, table = [], [], {}
    for j in range(keys.k):
        for row in X:
            code = keys.F_code(j, row)
            g = keys.G(j, row)
            table[code] = g
            planted_x.append(keys.decode(code, row.size))
            planted_y.append(g)
    if mode == "wrap":
        return CollusionModel(_call_trainer(base, S, rng), keys, table)
    if mode == "retrain":
        model = _call_trainer(base, S.extended(np.array(planted_x), np.array(planted_y)), rng)
        model.metadata["collusion_mode"] = "retrain"
        return model
    raise DomainError(f"unknown collusion mode {mode!r}")


def _call_trainer(trainer, S, rng):
    return trainer(S, rng)


# ---------------------------------------------------------------------------
# differential privacy


@dataclass(frozen=True)
class DpParams:
    dp_epsilon: float
    hypothesis_class: Sequence[Model]

    def __post_init__(self):
        if not self.dp_epsilon >= 0:
            raise DomainError("dp_epsilon must be nonnegative")
        if len(self.hypothesis_class) == 0:
            raise DomainError("hypothesis class is empty")


def _empirical_risks(hypotheses, S, loss):
    return np.array([np.mean(loss_values(loss, h.predict(S.X), S.y, h.output)) for h in hypotheses])


def dp_selection_probabilities(S: Dataset, p: DpParams, loss: LossSpec) -> np.ndarray:
    """Exact output law of :func:`train_dp_finite` on ``S``."""
    if not loss.bounded:
        raise ContractError("the exponential mechanism needs a bounded loss")
    logits = -p.dp_epsilon * S.n * _empirical_risks(p.hypothesis_class, S, loss) / (2 * loss.bound)
    w = np.exp(logits - logits.max())
    return w / w.sum()


def train_dp_finite(S: Dataset, p: DpParams, loss: LossSpec, rng: np.random.Generator) -> Model:
    """Exponential mechanism over a finite class.

    Selects ``h`` with probability proportional to
    ``exp(-eps * n * R_emp(h) / (2B))``. Replacing one point moves the mean
    loss by at most ``B/n``, so the selection is ``eps``-differentially private.
    Sampling uses the Gumbel-max trick.
    """
    if not loss.bounded:
        raise ContractError("the exponential mechanism needs a bounded loss")
    logits = -p.dp_epsilon * S.n * _empirical_risks(p.hypothesis_class, S, loss) / (2 * loss.bound)
    idx = int(np.argmax(logits + rng.gumbel(size=logits.shape[0])))
    return p.hypothesis_class[idx]


# ---------------------------------------------------------------------------
# trainer objects


class Trainer:
    """Callable ``(S, rng) -> Model`` with a naive leave-one-out evaluator."""

    name = "trainer"
    loss: LossSpec = LossSpec.squared()
    dp_epsilon: float | None = None

    def __call__(self, S: Dataset, rng: np.random.Generator | None = None) -> Model:
        raise NotImplementedError

    def loo_losses(self, S: Dataset, rng: np.random.Generator, folds=None) -> np.ndarray:
        folds = range(S.n) if folds is None else folds
        folds = list(folds)
        rngs = rng.spawn(len(folds))
        out = np.empty(len(folds))
        for k, (i, r) in enumerate(zip(folds, rngs)):
            model = self(S.without(i), r)
            z = S.subset([i])
            out[k] = loss_values(self.loss, model.predict(z.X), z.y, model.output)[0]
        return out


@dataclass
class RidgeTrainer(Trainer):
    lam: float = 1.0
    name = "ridge"

    def __call__(self, S, rng=None):
        return train_ridge(S, self.lam)

    def loo_losses(self, S, rng=None, folds=None):
        r = ridge_loo_residuals(S, self.lam) ** 2
        return r if folds is None else r[list(folds)]


@dataclass
class TreeTrainer(Trainer):
    max_depth: int | None = None
    min_leaf: int = 1
    name = "tree"
    loss: LossSpec = LossSpec.squared()

    def __call__(self, S, rng=None):
        model = train_tree(S, self.max_depth, self.min_leaf)
        self.loss = model.loss
        return model


@dataclass
class ChannelTrainer(Trainer):
    """Trainer for the idealized channels; draws each member's residual from the channel."""

    D: SyntheticDistribution
    name = "idealized-channel"

    def __post_init__(self):
        if isinstance(self.D, RegressionChannel):
            self.loss = LossSpec.squared()
        elif isinstance(self.D, ClassificationChannel):
            self.loss = LossSpec.zero_one()
        else:
            raise DomainError("channel trainer needs an idealized channel distribution")

    def __call__(self, S, rng):
        D = self.D
        if isinstance(D, RegressionChannel):
            offsets = (S.y - D.mean(S.V, S.t)) - D.sigma_S * rng.standard_normal(S.n)
            table = {S.V[i].tobytes(): float(offsets[i]) for i in range(S.n)}
            model = ChannelRegressionModel(D, table)
        else:
            wrong = rng.random(S.n) < D.p_S
            shift = rng.integers(1, D.n_labels, size=S.n)
            labels = np.where(wrong, (S.y + shift) % D.n_labels, S.y)
            memo = {S.V[i].tobytes(): int(labels[i]) for i in range(S.n)}
            model = ChannelClassificationModel(D, memo)
        return _attach_training_loss(model, S)


@dataclass
class DpFiniteTrainer(Trainer):
    params: DpParams
    loss: LossSpec = field(default_factory=LossSpec.zero_one)
    name = "dp-finite"

    def __post_init__(self):
        if not self.loss.bounded:
            raise ContractError("the exponential mechanism needs a bounded loss")
        self.dp_epsilon = self.params.dp_epsilon

    def __call__(self, S, rng):
        return train_dp_finite(S, self.params, self.loss, rng)


@dataclass
class ErmFiniteTrainer(Trainer):
    """Empirical risk minimiser over a finite class (no privacy).

    ``claimed_epsilon`` lets audits label it as if it were private; it is a
    negative control, since its true privacy loss is unbounded.
    """

    hypotheses: Sequence[Model]
    loss: LossSpec = field(default_factory=LossSpec.zero_one)
    claimed_epsilon: float | None = None
    name = "erm-finite"

    def __post_init__(self):
        self.dp_epsilon = self.claimed_epsilon

    def __call__(self, S, rng=None):
        return self.hypotheses[int(np.argmin(_empirical_risks(self.hypotheses, S, self.loss)))]


@dataclass
class ColludingTrainer(Trainer):
    base: Trainer
    keys: CollusionKeys
    mode: str = "wrap"
    name = "colluding"

    def __post_init__(self):
        self.loss = self.base.loss

    def __call__(self, S, rng=None):
        return train_colluding(S, self.base, self.keys, rng, self.mode)


@dataclass
class ConstantTrainer(Trainer):
    value: Any = 0.0
    output: str = "real"
    name = "constant"

    def __post_init__(self):
        self.loss = LossSpec.zero_one() if self.output == "categorical" else LossSpec.squared()

    def __call__(self, S, rng=None):
        return ConstantModel(self.value, self.output, S.targets)


# ---------------------------------------------------------------------------
# generalization error


@dataclass(frozen=True)
class GenStats:
    """Training, cross-validated and population losses of a trainer.

    ``R_gen_hat`` is mean population loss minus mean training loss, with
    ``R_gen_stderr`` from the spread over training sets. ``R_cv`` is the mean
    leave-one-out loss. For squared error ``sigma_S``/``sigma_D`` are the
    root mean training and population losses.
    """

    R_emp: float
    R_pop: float
    R_cv: float
    R_gen_hat: float
    R_gen_stderr: float
    R_cv_stderr: float
    sigma_S: float | None
    sigma_D: float | None
    trials: int

    @property
    def ratio(self) -> float | None:
        if self.sigma_S is None:
            return None
        return math.inf if self.sigma_S == 0 else self.sigma_D / self.sigma_S


def estimate_generalization(
    trainer,
    D: SyntheticDistribution,
    n: int,
    loss: LossSpec,
    trials: int,
    rng: np.random.Generator,
    n_test: int = 2000,
    loo_folds: int | None = None,
) -> GenStats:
    """Average training, population and leave-one-out losses over fresh ``S``.

    ``loo_folds`` caps how many points per training set are left out (chosen
    uniformly); ``None`` uses all ``n``.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    emp, pop, cv = np.empty(trials), np.empty(trials), np.empty(trials)
    for r, sub in enumerate(rng.spawn(trials)):
        s_rng, t_rng, test_rng, cv_rng = sub.spawn(4)
        S = D.sample_n(n, s_rng)
        model = trainer(S, t_rng)
        emp[r] = np.mean(loss_values(loss, model.predict(S.X), S.y, model.output))
        T = D.sample_n(n_test, test_rng)
        pop[r] = np.mean(loss_values(loss, model.predict(T.X), T.y, model.output))
        folds = None
        if loo_folds is not None and loo_folds < n:
            folds = np.sort(cv_rng.choice(n, size=loo_folds, replace=False))
        cv[r] = np.mean(_loo(trainer, S, cv_rng, folds, loss))
    gen = pop - emp
    se = lambda a: float(a.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    squared = loss.kind == "squared-error"
    return GenStats(
        R_emp=float(emp.mean()),
        R_pop=float(pop.mean()),
        R_cv=float(cv.mean()),
        R_gen_hat=float(gen.mean()),
        R_gen_stderr=se(gen),
        R_cv_stderr=se(cv),
        sigma_S=math.sqrt(emp.mean()) if squared else None,
        sigma_D=math.sqrt(pop.mean()) if squared else None,
        trials=trials,
    )


def _loo(trainer, S, rng, folds, loss):
    if hasattr(trainer, "loo_losses") and trainer.loss.kind == loss.kind:
        return trainer.loo_losses(S, rng, folds)
    folds = range(S.n) if folds is None else folds
    out = []
    for i, r in zip(folds, rng.spawn(len(list(folds)))):
        model = trainer(S.without(i), r)
        z = S.subset([i])
        out.append(loss_values(loss, model.predict(z.X), z.y, model.output)[0])
    return np.array(out)
