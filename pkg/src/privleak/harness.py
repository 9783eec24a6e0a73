"""Monte Carlo drivers for the membership and attribute experiments.

Trials are grouped into fixed-size blocks. Every block draws from its own
counter-based streams keyed on ``(seed, experiment_id, purpose, repeat,
block)``, and results are concatenated in block order, so estimates are
bit-identical for any number of worker processes.
"""

from __future__ import annotations

import copy
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Sequence

import numpy as np

from . import analytic
from .attribute import AttributeSchema, simulator_optimal
from .core import (
    ClassificationChannel,
    EmpiricalDistribution,
    FiniteClassification,
    LossSpec,
    RegressionChannel,
    derive_stream,
    draw_challenge,
    loss_values,
)
from .errors import ConfigError, NotComputableError, PrivleakError
from .registry import (
    TrialContext,
    build_adversary,
    build_distribution,
    build_keys,
    build_loss,
    build_trainer,
)

__all__ = [
    "ExperimentConfig",
    "AdvantageEstimate",
    "MuEstimate",
    "SweepRow",
    "DpAuditRow",
    "CollusionReport",
    "PairedReduction",
    "run_membership_experiment",
    "run_attribute_experiment",
    "run_experiment",
    "estimate_mu",
    "sweep",
    "audit_dp_bound",
    "run_collusion",
    "run_paired_reduction",
    "analytic_for",
]

MIN_TRIALS = 100
CHALLENGE_LAWS = ("standard", "modified")


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``distribution``, ``trainer`` and ``adversary`` are spec dicts (see
    :mod:`privleak.registry`) or prebuilt objects. With
    ``fresh_S_per_trial=False`` the trials are split evenly over ``repeats``
    independently drawn training sets. ``challenge_law="modified"`` replaces
    each challenge by its reconstruction from the public view with the true
    target restored. ``jobs`` only changes speed, never results.
    """

    distribution: Any
    trainer: Any
    adversary: Any
    n: int = 100
    trials: int = 1000
    seed: int = 0
    fresh_S_per_trial: bool = True
    repeats: int = 1
    challenge_law: str = "standard"
    experiment_id: str = "experiment"
    loss: Any = None
    simulator_metric: bool = False
    record_outcomes: bool = False
    jobs: int = 1
    block_size: int = 4096

    def problems(self) -> list[str]:
        out = []
        if not isinstance(self.trials, int) or self.trials < MIN_TRIALS:
            out.append(f"trials must be an integer >= {MIN_TRIALS}, got {self.trials!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            out.append(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not isinstance(self.n, int) or self.n < 1:
            out.append(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.repeats, int) or self.repeats < 1:
            out.append(f"repeats must be a positive integer, got {self.repeats!r}")
        if self.challenge_law not in CHALLENGE_LAWS:
            out.append(f"challenge_law must be one of {CHALLENGE_LAWS}, got {self.challenge_law!r}")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            out.append(f"jobs must be a positive integer, got {self.jobs!r}")
        if not isinstance(self.block_size, int) or self.block_size < 1:
            out.append("block_size must be a positive integer")
        for name in ("distribution", "trainer", "adversary"):
            if getattr(self, name) is None:
                out.append(f"{name} is required")
        return out

    def validate(self) -> "ExperimentConfig":
        probs = self.problems()
        if probs:
            raise ConfigError(probs)
        return self

    def with_updates(self, delta: dict) -> "ExperimentConfig":
        """Copy with dotted-key overrides, e.g. ``{"distribution.ratio": 2.0}``."""
        cfg = copy.deepcopy(self)
        for key, value in delta.items():
            head, *rest = key.split(".")
            if head not in {f.name for f in fields(cfg)}:
                raise ConfigError(f"unknown config field {head!r}")
            if not rest:
                setattr(cfg, head, copy.deepcopy(value))
                continue
            node = getattr(cfg, head)
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {key!r}: {head} is not a spec dict")
            for part in rest[:-1]:
                node = node.setdefault(part, {})
            node[rest[-1]] = copy.deepcopy(value)
        return cfg

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value if _jsonable(value) else repr(value)
        return out


def _jsonable(x) -> bool:
    if x is None or isinstance(x, (bool, int, float, str)):
        return True
    if isinstance(x, (list, tuple)):
        return all(_jsonable(v) for v in x)
    if isinstance(x, dict):
        return all(isinstance(k, str) and _jsonable(v) for k, v in x.items())
    return False


# ---------------------------------------------------------------------------
# results


@dataclass
class AdvantageEstimate:
    """Monte Carlo advantage with its binomial standard error.

    ``components`` are the success rates given ``b=0`` and ``b=1`` (for
    membership: rate of guessing "member"; for attributes: rate of recovering
    the target). ``value`` is their difference and ``accuracy`` the balanced
    accuracy, so ``2*accuracy - 1`` equals ``value``.
    """

    value: float
    stderr: float
    trials: int
    ci95: tuple
    components: tuple
    counts: tuple
    accuracy: float
    task: str
    per_target: dict | None = None
    extras: dict = field(default_factory=dict)
    outcomes: dict | None = field(default=None, repr=False)

    def within(self, reference: float, k: float = 2.0) -> bool:
        return abs(self.value - reference) <= k * self.stderr

    def to_dict(self, include_outcomes: bool = False) -> dict:
        d = {
            "value": self.value,
            "stderr": self.stderr,
            "trials": self.trials,
            "ci95": list(self.ci95),
            "components": list(self.components),
            "counts": list(self.counts),
            "accuracy": self.accuracy,
            "task": self.task,
            "per_target": self.per_target,
            "extras": _to_json(self.extras),
        }
        if include_outcomes and self.outcomes is not None:
            d["outcomes"] = {k: np.asarray(v).tolist() for k, v in self.outcomes.items()}
        return d


def _to_json(x):
    if isinstance(x, dict):
        return {str(k): _to_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_json(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _rate(pos: np.ndarray, mask: np.ndarray) -> tuple[float, int]:
    n = int(mask.sum())
    return (float(pos[mask].mean()) if n else math.nan), n


def _estimate(b, pos, t_idx, task, prior=None, extras=None, outcomes=None) -> AdvantageEstimate:
    c0, n0 = _rate(pos, b == 0)
    c1, n1 = _rate(pos, b == 1)
    if n0 == 0 or n1 == 0:
        raise PrivleakError("one challenge branch received no trials; increase trials")
    value = c0 - c1
    stderr = math.sqrt(c0 * (1 - c0) / n0 + c1 * (1 - c1) / n1)
    per_target = None
    extras = dict(extras or {})
    if prior is not None and t_idx is not None and np.all(t_idx >= 0):
        per_target = {}
        weighted = 0.0
        for i, p in enumerate(prior):
            r0, m0 = _rate(pos, (b == 0) & (t_idx == i))
            r1, m1 = _rate(pos, (b == 1) & (t_idx == i))
            per_target[str(i)] = {"rate_member": r0, "rate_population": r1, "counts": [m0, m1]}
            weighted += p * (r0 - r1) if p > 0 else 0.0
        extras["prior_weighted_value"] = weighted
    return AdvantageEstimate(
        value=value,
        stderr=stderr,
        trials=int(b.size),
        ci95=(value - 1.96 * stderr, value + 1.96 * stderr),
        components=(c0, c1),
        counts=(n0, n1),
        accuracy=0.5 * (c0 + (1.0 - c1)),
        task=task,
        per_target=per_target,
        extras=extras,
        outcomes=outcomes,
    )


# ---------------------------------------------------------------------------
# the simulated world (built once per process)


def _needs_sigma(spec) -> bool:
    if not isinstance(spec, dict):
        return False
    if spec.get("kind") in ("threshold", "general"):
        return True
    return _needs_sigma(spec.get("oracle"))


def _find_sigma_spec(spec):
    while isinstance(spec, dict):
        if spec.get("kind") in ("threshold", "general"):
            return spec
        spec = spec.get("oracle")
    return {}


class _World:
    """Everything needed to run trials, rebuilt identically in each worker."""

    def __init__(self, cfg: ExperimentConfig, task: str, resolved: dict):
        self.cfg = cfg
        self.task = task
        self.resolved = resolved
        self.csv = None
        if isinstance(cfg.distribution, dict) and cfg.distribution.get("kind") == "csv":
            from .datasets import CsvSchema, load_csv

            spec = cfg.distribution
            self.csv = load_csv(spec["path"], CsvSchema.from_dict(spec["schema"]), quiet=True).dataset
            self.train_fraction = spec.get("train_fraction", 0.75)
            self.D = EmpiricalDistribution(self.csv)
        else:
            self.D = build_distribution(cfg.distribution)
        keys_rng = derive_stream(cfg.seed, cfg.experiment_id, "keys")
        self.keys = build_keys(cfg.trainer, keys_rng)
        self.trainer = build_trainer(cfg.trainer, self.D, self.keys)
        self.loss = build_loss(cfg.loss) or getattr(self.trainer, "loss", None)
        self.schema = None
        if task == "attribute" or cfg.challenge_law == "modified" or _uses_schema(cfg.adversary):
            if self.D.targets is None:
                raise ConfigError(f"distribution {self.D.kind!r} has no sensitive attribute")
            self.schema = AttributeSchema.for_distribution(self.D)
        self.factory = None if resolved is None else build_adversary(cfg.adversary, task, resolved)
        self._fixed: dict[int, tuple] = {}

    def stream(self, *labels):
        return derive_stream(self.cfg.seed, self.cfg.experiment_id, *labels)

    def environment(self, *labels):
        """Training set, population law and model for a fixed-S repeat."""
        if self.csv is not None:
            from .datasets import train_test_split

            S, T = train_test_split(self.csv, self.train_fraction, self.stream("split", *labels))
            D = EmpiricalDistribution(T)
        else:
            S = self.D.sample_n(self.cfg.n, self.stream("S", *labels))
            D = self.D
        model = self.trainer(S, self.stream("train", *labels))
        return S, D, model

    def context(self, S, D, model):
        return TrialContext(S, model, D, self.schema, self.trainer, self.loss, self.keys)

    def fixed(self, r):
        if r not in self._fixed:
            S, D, model = self.environment(r)
            ctx = self.context(S, D, model)
            self._fixed[r] = (ctx, self.factory.build(ctx))
        return self._fixed[r]

    def run_unit(self, unit):
        r, blk, count = unit
        cfg = self.cfg
        env = self.stream("env", r, blk)
        adv_rng = self.stream("adv", r, blk)
        train_rng = self.stream("train-fresh", r, blk)
        schema, task = self.schema, self.task
        modified = cfg.challenge_law == "modified"
        want_sim = cfg.simulator_metric and task == "attribute"
        b = np.empty(count, dtype=np.int8)
        pos = np.empty(count, dtype=np.int8)
        t_idx = np.full(count, -1, dtype=np.int32)
        score = np.full(count, np.nan)
        sim = np.full(count, -1, dtype=np.int8)
        sim_error = None
        static_adv = None
        for k in range(count):
            if cfg.fresh_S_per_trial:
                S = self.D.sample_n(cfg.n, env)
                model = self.trainer(S, train_rng)
                ctx = self.context(S, self.D, model)
                if static_adv is None or self.factory.per_context:
                    static_adv = self.factory.build(ctx)
                adv = static_adv
                D = self.D
            else:
                ctx, adv = self.fixed(r)
                S, D, model = ctx.S, ctx.D, ctx.model
            bit, z = draw_challenge(S, D, env)
            if modified:
                z = schema.complete(schema.phi(z), schema.pi(z))
            ctx.challenge = (bit, z)
            b[k] = bit
            if schema is not None and z.t is not None:
                t_idx[k] = schema.index(z.t)
            if task == "membership":
                g = adv(z, model, adv_rng)
                pos[k] = 1 - g.bit
                if g.score is not None:
                    score[k] = g.score
            else:
                view = schema.phi(z)
                truth = schema.pi(z)
                g = adv(view, model, schema, adv_rng)
                pos[k] = g.value == truth
                if want_sim and bit == 1 and sim_error is None:
                    try:
                        sim[k] = simulator_optimal(view, D, schema).value == truth
                    except NotComputableError as exc:
                        sim_error = str(exc)
        return {"b": b, "pos": pos, "t_idx": t_idx, "score": score, "sim": sim, "sim_error": sim_error}


def _uses_schema(spec) -> bool:
    if not isinstance(spec, dict):
        return False
    if spec.get("kind") in ("from-attribute", "uniform-reduction", "multiquery-reduction"):
        return True
    return _uses_schema(spec.get("oracle"))


_WORKER_WORLD: _World | None = None


def _init_worker(cfg, task, resolved):
    global _WORKER_WORLD
    _WORKER_WORLD = _World(cfg, task, resolved)


def _worker_unit(unit):
    return _WORKER_WORLD.run_unit(unit)


def _units(cfg: ExperimentConfig) -> list[tuple[int, int, int]]:
    repeats = 1 if cfg.fresh_S_per_trial else cfg.repeats
    base, extra = divmod(cfg.trials, repeats)
    units = []
    for r in range(repeats):
        todo = base + (1 if r < extra else 0)
        blk = 0
        while todo > 0:
            c = min(cfg.block_size, todo)
            units.append((r, blk, c))
            todo -= c
            blk += 1
    return units


def resolve_parameters(cfg: ExperimentConfig, world: _World) -> dict:
    """Values fixed once per experiment, such as the sigmas a threshold adversary uses."""
    spec = _find_sigma_spec(cfg.adversary)
    if not spec:
        return {}
    D = world.D
    source = spec.get("sigma", "channel" if isinstance(D, RegressionChannel) else "estimate")
    out = {"sigma_source": source}
    if source == "channel":
        if not isinstance(D, RegressionChannel):
            raise ConfigError("sigma='channel' needs an idealized regression channel")
        out.update(sigma_S=float(D.sigma_S), sigma_D=float(D.sigma_D))
    elif source == "explicit":
        if "sigma_S" not in spec:
            raise ConfigError("sigma='explicit' needs sigma_S")
        out.update(sigma_S=float(spec["sigma_S"]), sigma_D=float(spec.get("sigma_D", spec["sigma_S"])))
    elif source == "estimate":
        out.update(_estimate_sigmas(world, int(spec.get("estimate_trials", 20)), int(spec.get("estimate_test", 2000))))
    else:
        raise ConfigError(f"unknown sigma source {source!r}")
    if "sigma_guess" in spec and spec["sigma_guess"] is not None:
        out["sigma_guess"] = float(spec["sigma_guess"])
    if not out["sigma_S"] > 0:
        raise ConfigError("training residual spread is zero; the threshold adversary is undefined")
    return out


def _estimate_sigmas(world: _World, trials: int, n_test: int) -> dict:
    sq = LossSpec.squared()
    emp, pop = [], []
    for r in range(trials):
        S, D, model = world.environment("sigma", r)
        if model.output != "real":
            raise ConfigError("sigma estimation needs a real-valued model")
        emp.append(np.mean(loss_values(sq, model.predict(S.X), S.y, "real")))
        T = D.sample_n(n_test, world.stream("sigma-test", r))
        pop.append(np.mean(loss_values(sq, model.predict(T.X), T.y, "real")))
    return {"sigma_S": math.sqrt(float(np.mean(emp))), "sigma_D": math.sqrt(float(np.mean(pop))), "estimate_trials": trials}


def _preflight(world: _World):
    """Run one throwaway trial so incompatible pieces fail before the real trials."""
    try:
        S, D, model = world.environment("preflight")
        ctx = world.context(S, D, model)
        adv = world.factory.build(ctx)
        rng = world.stream("preflight-challenge")
        bit, z = draw_challenge(S, D, rng)
        if world.cfg.challenge_law == "modified":
            z = world.schema.complete(world.schema.phi(z), world.schema.pi(z))
        ctx.challenge = (bit, z)
        if world.task == "membership":
            adv(z, model, rng)
        else:
            adv(world.schema.phi(z), model, world.schema, rng)
    except ConfigError:
        raise
    except (PrivleakError, TypeError) as exc:
        raise ConfigError(f"adversary {_name(world.cfg.adversary)} is incompatible with this setup: {exc}") from exc


def _name(spec):
    return spec.get("kind") if isinstance(spec, dict) else type(spec).__name__


def run_experiment(cfg: ExperimentConfig, task: str) -> AdvantageEstimate:
    cfg.validate()
    resolved = resolve_parameters(cfg, _World(cfg, task, None))
    world = _World(cfg, task, resolved)
    _preflight(world)
    units = _units(cfg)
    if cfg.jobs == 1 or len(units) == 1:
        parts = [world.run_unit(u) for u in units]
    else:
        with ProcessPoolExecutor(
            max_workers=min(cfg.jobs, len(units)), initializer=_init_worker, initargs=(cfg, task, resolved)
        ) as pool:
            parts = list(pool.map(_worker_unit, units))
    b = np.concatenate([p["b"] for p in parts])
    pos = np.concatenate([p["pos"] for p in parts])
    t_idx = np.concatenate([p["t_idx"] for p in parts])
    score = np.concatenate([p["score"] for p in parts])
    sim = np.concatenate([p["sim"] for p in parts])
    extras = {"resolved": resolved, "adversary_info": world.factory.info, "repeats": 1 if cfg.fresh_S_per_trial else cfg.repeats}
    if task == "attribute" and cfg.simulator_metric:
        errors = [p["sim_error"] for p in parts if p["sim_error"]]
        if errors:
            extras["simulator_metric"] = {"error": errors[0]}
        else:
            c0 = float(pos[b == 0].mean())
            s1 = float(sim[b == 1].mean())
            extras["simulator_metric"] = {"value": c0 - s1, "simulator_rate": s1}
    prior = world.schema.prior if world.schema is not None else None
    outcomes = None
    if cfg.record_outcomes:
        outcomes = {"b": b, "success": pos, "t_idx": t_idx, "score": score}
    return _estimate(b, pos, t_idx if prior is not None else None, task, prior, extras, outcomes)


def run_membership_experiment(cfg: ExperimentConfig) -> AdvantageEstimate:
    """Membership experiment: advantage is P(guess member | b=0) - P(guess member | b=1)."""
    return run_experiment(cfg, "membership")


def run_attribute_experiment(cfg: ExperimentConfig, schema: AttributeSchema | None = None) -> AdvantageEstimate:
    """Attribute experiment: advantage is P(correct | b=0) - P(correct | b=1).

    The schema is derived from the distribution's targets and prior; a
    passed ``schema`` must agree with it.
    """
    if schema is not None:
        D = build_distribution(cfg.distribution) if not _is_csv(cfg) else None
        if D is not None and (D.targets != schema.targets or not np.allclose(D.prior, schema.prior)):
            raise ConfigError("schema does not match the distribution's targets and prior")
    return run_experiment(cfg, "attribute")


def _is_csv(cfg):
    return isinstance(cfg.distribution, dict) and cfg.distribution.get("kind") == "csv"


# ---------------------------------------------------------------------------
# collision probability


@dataclass(frozen=True)
class MuEstimate:
    mu: float
    method: str
    stderr: float
    trials: int


def estimate_mu(D, n: int, trials: int, rng: np.random.Generator) -> MuEstimate:
    """Probability that a fresh draw from ``D`` coincides with a member of ``S ~ D^n``."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    D = build_distribution(D) if isinstance(D, dict) else D
    if D.continuous:
        return MuEstimate(0.0, "analytic-zero", 0.0, 0)
    hits = 0
    if isinstance(D, FiniteClassification):
        for _ in range(trials):
            idx = np.searchsorted(D._cdf, rng.random(n + 1), side="right")
            idx = np.minimum(idx, D.size - 1)
            hits += bool(np.any(idx[:-1] == idx[-1]))
    else:
        for _ in range(trials):
            S = D.sample_n(n, rng)
            hits += S.contains(D.sample(rng))
    mu = hits / trials
    return MuEstimate(mu, "monte-carlo", math.sqrt(mu * (1 - mu) / trials), trials)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    abscissa: float
    delta: dict
    estimate: AdvantageEstimate | None
    analytic: analytic.CurvePoint | None
    error: str | None = None

    @property
    def within_ci(self) -> bool | None:
        if self.estimate is None or self.analytic is None:
            return None
        lo, hi = self.estimate.ci95
        return lo <= self.analytic.value <= hi

    def to_dict(self) -> dict:
        return {
            "abscissa": _to_json(self.abscissa),
            "delta": self.delta,
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
            "analytic": None if self.analytic is None else _to_json(asdict(self.analytic)),
            "error": self.error,
            "within_ci": self.within_ci,
        }


def analytic_for(cfg: ExperimentConfig, estimate: AdvantageEstimate | None = None) -> analytic.CurvePoint | None:
    """Closed-form reference for a configuration, when one exists."""
    spec = cfg.adversary if isinstance(cfg.adversary, dict) else {}
    kind = spec.get("kind")
    if _is_csv(cfg):
        return None
    D = build_distribution(cfg.distribution)
    resolved = (estimate.extras.get("resolved", {}) if estimate else {}) or {}
    if kind == "threshold":
        mode = spec.get("mode", "known")
        if isinstance(D, RegressionChannel):
            ratio = D.ratio
        elif "sigma_S" in resolved:
            ratio = resolved["sigma_D"] / resolved["sigma_S"]
        else:
            return None
        curve_id = f"membership-threshold-{mode}"
        return analytic.CurvePoint(ratio, analytic.curve_membership_threshold(max(ratio, 1.0), mode), curve_id)
    if kind == "bounded-loss" and isinstance(D, ClassificationChannel):
        r_gen = D.p_D - D.p_S
        return analytic.CurvePoint(r_gen, analytic.curve_membership_bounded(r_gen, 1.0), "membership-bounded")
    if kind == "general" and isinstance(D, RegressionChannel) and D.targets is not None:
        guess = spec.get("sigma_guess") or D.sigma_S
        schema = AttributeSchema.for_distribution(D)
        if schema.m == 2 and np.allclose(schema.prior, 0.5) and guess == D.sigma_S:
            tau = abs(float(D.tau[1] - D.tau[0]))
            return analytic.CurvePoint(tau, analytic.curve_attribute_binary(tau, D.sigma_S, D.sigma_D), "attribute-binary")
        value = analytic.curve_attribute_general(schema, D.tau, D.sigma_S, D.sigma_D, guess)
        return analytic.CurvePoint(float(np.ptp(D.tau)), value, "attribute-general")
    return None


def sweep(
    base: ExperimentConfig,
    grid: Sequence[dict],
    task: str = "membership",
    abscissa: str | Callable | None = None,
) -> list[SweepRow]:
    """Run ``base`` once per delta in ``grid``; rows come back sorted by abscissa.

    The abscissa is taken from ``abscissa`` (a dotted key of the delta or a
    callable ``(cfg, estimate) -> float``), else from the analytic reference,
    else from the first value in the delta. A failing cell is recorded with
    its error message and the sweep continues.
    """
    if not grid:
        raise ConfigError("sweep grid is empty")
    rows = []
    for delta in grid:
        cfg = base.with_updates(delta)
        est, ref, err = None, None, None
        try:
            est = run_experiment(cfg, task)
            ref = analytic_for(cfg, est)
        except PrivleakError as exc:
            err = f"{type(exc).__name__}: {exc}"
        if callable(abscissa):
            x = abscissa(cfg, est)
        elif isinstance(abscissa, str):
            x = delta[abscissa]
        elif ref is not None:
            x = ref.abscissa
        else:
            x = next(iter(delta.values()))
        rows.append(SweepRow(float(x), dict(delta), est, ref, err))
    rows.sort(key=lambda row: row.abscissa)
    return rows


# ---------------------------------------------------------------------------
# differential privacy audit


@dataclass
class DpAuditRow:
    epsilon: float
    estimate: AdvantageEstimate
    bound: float
    violation: bool

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "estimate": self.estimate.to_dict(), "bound": self.bound, "violation": self.violation}


def audit_dp_bound(cfg: ExperimentConfig, epsilons: Sequence[float], k_sigma: float = 3.0) -> list[DpAuditRow]:
    """Compare the bounded-loss adversary with the ``e^eps - 1`` ceiling at each ``eps``.

    For a ``dp-finite`` trainer each ``eps`` sets the mechanism's budget;
    for an ``erm-finite`` trainer it only sets the claimed label. A row is
    flagged when the advantage exceeds the bound by more than ``k_sigma``
    standard errors.
    """
    if not isinstance(cfg.trainer, dict) or cfg.trainer.get("kind") not in ("dp-finite", "erm-finite"):
        raise ConfigError("audit needs a dp-finite or erm-finite trainer spec")
    key = "trainer.dp_epsilon" if cfg.trainer["kind"] == "dp-finite" else "trainer.claimed_epsilon"
    rows = []
    for eps in epsilons:
        c = cfg.with_updates({key: float(eps), "experiment_id": f"{cfg.experiment_id}/eps={eps!r}"})
        if not isinstance(c.adversary, dict):
            c.adversary = {"kind": "bounded-loss"}
        est = run_membership_experiment(c)
        bound = analytic.bound_dp_advantage(eps)
        rows.append(DpAuditRow(float(eps), est, bound, est.value - bound > k_sigma * est.stderr))
    return rows


# ---------------------------------------------------------------------------
# collusion


@dataclass
class CollusionReport:
    estimate: AdvantageEstimate
    mu: MuEstimate
    expected: float
    max_advantage: float
    utility: dict

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.to_dict(),
            "mu": asdict(self.mu),
            "expected_colluding_advantage": self.expected,
            "max_advantage": self.max_advantage,
            "utility": _to_json(self.utility),
        }


def run_collusion(cfg: ExperimentConfig, n_test: int = 20000, mu_trials: int = 20000) -> CollusionReport:
    """Colluding-adversary advantage, its expected value and the wrapper's utility cost."""
    if not isinstance(cfg.trainer, dict) or cfg.trainer.get("kind") != "colluding":
        raise ConfigError("collusion run needs a colluding trainer spec")
    if not isinstance(cfg.adversary, dict):
        cfg = cfg.with_updates({"adversary": {"kind": "colluding"}})
    est = run_membership_experiment(cfg)
    world = _World(cfg, "membership", None)
    mu = estimate_mu(world.D, cfg.n, mu_trials, world.stream("mu"))
    keys = world.keys
    expected = analytic.expected_colluding_advantage(keys.m_bits, keys.k, mu.mu)
    S, D, model = world.environment(0)
    base = getattr(model, "base", None)
    T = D.sample_n(n_test, world.stream("utility"))
    wrapped_pred = model.predict(T.X)
    utility = {"n_test": n_test, "acc_wrapped": float(np.mean(wrapped_pred == T.y))}
    if base is not None:
        base_pred = base.predict(T.X)
        disagree = base_pred != wrapped_pred
        rate = float(disagree.mean())
        utility.update(
            acc_base=float(np.mean(base_pred == T.y)),
            disagreement=rate,
            disagreement_stderr=math.sqrt(max(rate * (1 - rate), 1.0 / n_test) / n_test),
            collision_bound=keys.k * cfg.n * 2.0 ** (-keys.d),
        )
        utility["drop"] = utility["acc_base"] - utility["acc_wrapped"]
    return CollusionReport(est, mu, expected, analytic.max_advantage(mu.mu), utility)


# ---------------------------------------------------------------------------
# paired reduction


@dataclass
class PairedReduction:
    attribute: AdvantageEstimate
    membership: AdvantageEstimate
    identical: bool

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute.to_dict(),
            "membership": self.membership.to_dict(),
            "identical_outcomes": self.identical,
        }


def run_paired_reduction(cfg: ExperimentConfig, oracle_spec: dict) -> PairedReduction:
    """Run an attribute oracle and the membership reduction built on it over the same trials.

    Both experiments share seed and experiment id, so they see the same
    training sets, challenges and oracle randomness. The reduction claims
    membership exactly when the oracle is right, so the two success vectors
    must coincide element by element.
    """
    attr_cfg = cfg.with_updates({"adversary": oracle_spec, "record_outcomes": True})
    mem_cfg = cfg.with_updates({"adversary": {"kind": "from-attribute", "oracle": oracle_spec}, "record_outcomes": True})
    attr = run_attribute_experiment(attr_cfg)
    mem = run_membership_experiment(mem_cfg)
    same = bool(
        np.array_equal(attr.outcomes["b"], mem.outcomes["b"])
        and np.array_equal(attr.outcomes["success"], mem.outcomes["success"])
    )
    return PairedReduction(attr, mem, same)
