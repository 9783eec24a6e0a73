"""Command-line front end.

Subcommands: simulate, sweep, collude, audit-dp, curves, report. Every run
writes ``results.json`` (sorted keys, no timestamps) and, where a curve
exists, ``<name>.curve.csv`` with columns abscissa, empirical, stderr,
analytic. Exit status is 0 on success, 2 for configuration problems and 1
for runtime failures (artifacts written so far are kept).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import platform
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, analytic
from .errors import ConfigError, PrivleakError
from .harness import (
    ExperimentConfig,
    _to_json,
    analytic_for,
    audit_dp_bound,
    run_collusion,
    run_experiment,
    sweep,
)
from .report import emit_report

COMMANDS = ("simulate", "sweep", "collude", "audit-dp", "curves", "report")
ATTRIBUTE_KINDS = ("general", "prior-argmax", "uniform-reduction", "multiquery-reduction")
SECTION_FOR = {"sweep": "sweep", "audit-dp": "audit", "curves": "curves"}
HIST_BINS = 40


def config_schema() -> dict:
    return json.loads(resources.files("privleak").joinpath("config.schema.json").read_text())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privleak", description="Membership and attribute inference workbench")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override experiment.seed")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    p.add_argument("--trials", type=int, help="override experiment.trials")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--results", type=Path, help="results.json to render (report only; default <out>/results.json)")
    return p


# ---------------------------------------------------------------------------
# validation


def validate_document(doc, command: str) -> list[str]:
    """All problems with a configuration document, schema and semantics together."""
    validator = jsonschema.Draft202012Validator(config_schema())
    problems = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message)):
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        problems.append(f"{where}: {err.message}")
    if isinstance(doc, dict) and isinstance(doc.get("experiment"), dict):
        section = SECTION_FOR.get(command)
        if section and section not in doc:
            problems.append(f"<root>: command {command!r} needs a {section!r} section")
        if command == "sweep" and isinstance(doc.get("sweep"), dict) and doc["sweep"].get("grid") == []:
            problems.append("sweep/grid: must not be empty")
    return problems


def _experiment(doc, jobs: int) -> ExperimentConfig:
    exp = dict(doc["experiment"])
    exp.pop("jobs", None)
    return ExperimentConfig(**exp, jobs=jobs)


def infer_task(doc) -> str:
    if "task" in doc:
        return doc["task"]
    adv = doc["experiment"]["adversary"]
    kind = adv.get("kind")
    if kind in ATTRIBUTE_KINDS or (kind == "genie" and "member_accuracy" in adv):
        return "attribute"
    return "membership"


def config_hash(doc) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def versions() -> dict:
    return {
        "privleak": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------------------
# artifact writers


def _num(x):
    if x is None:
        return ""
    return repr(float(x))


def write_curve_csv(path: Path, rows, seed, digest):
    """``rows`` are ``(abscissa, empirical, stderr, analytic)``; ``None`` becomes an empty cell."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed}\n# config_hash={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["abscissa", "empirical", "stderr", "analytic"])
        for row in rows:
            w.writerow([_num(v) for v in row])


def write_residual_histogram(path: Path, outcomes, seed, digest):
    score, b = np.asarray(outcomes["score"]), np.asarray(outcomes["b"])
    ok = np.isfinite(score)
    if not ok.any():
        return
    edges = np.histogram_bin_edges(score[ok], bins=HIST_BINS)
    h0, _ = np.histogram(score[ok & (b == 0)], bins=edges)
    h1, _ = np.histogram(score[ok & (b == 1)], bins=edges)
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed}\n# config_hash={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count_member", "count_population"])
        for lo, hi, c0, c1 in zip(edges[:-1], edges[1:], h0, h1):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c0), int(c1)])


def write_results(out: Path, doc: dict):
    text = json.dumps(_to_json(doc), sort_keys=True, indent=2, allow_nan=False)
    (out / "results.json").write_text(text + "\n")


# ---------------------------------------------------------------------------
# commands


def _cmd_simulate(doc, cfg, out, meta, entries):
    task = infer_task(doc)
    is_threshold = cfg.adversary.get("kind") == "threshold"
    if is_threshold:
        cfg = cfg.with_updates({"record_outcomes": True})
    est = run_experiment(cfg, task)
    ref = analytic_for(cfg, est)
    entries.append(
        {
            "kind": "estimate",
            "label": cfg.experiment_id,
            "task": task,
            "estimate": est.to_dict(),
            "analytic": None if ref is None else {"abscissa": ref.abscissa, "value": ref.value, "curve_id": ref.curve_id},
        }
    )
    if is_threshold:
        write_residual_histogram(out / "residuals.hist.csv", est.outcomes, *meta)


def _cmd_sweep(doc, cfg, out, meta, entries):
    spec = doc["sweep"]
    name = spec.get("name", "sweep")
    rows = sweep(cfg, spec["grid"], infer_task(doc), spec.get("abscissa"))
    entries.append({"kind": "sweep", "label": name, "rows": [r.to_dict() for r in rows]})
    write_curve_csv(
        out / f"{name}.curve.csv",
        [
            (
                r.abscissa,
                None if r.estimate is None else r.estimate.value,
                None if r.estimate is None else r.estimate.stderr,
                None if r.analytic is None else r.analytic.value,
            )
            for r in rows
        ],
        *meta,
    )


def _cmd_audit(doc, cfg, out, meta, entries):
    spec = doc["audit"]
    entry = {"kind": "audit", "label": cfg.experiment_id, "rows": []}
    entries.append(entry)
    csv_rows = []
    try:
        for eps in spec["epsilons"]:
            (row,) = audit_dp_bound(cfg, [eps], spec.get("k_sigma", 3.0))
            entry["rows"].append(row.to_dict())
            csv_rows.append((row.epsilon, row.estimate.value, row.estimate.stderr, row.bound))
    finally:
        write_curve_csv(out / "audit.curve.csv", csv_rows, *meta)


def _cmd_collude(doc, cfg, out, meta, entries):
    spec = doc.get("collude", {})
    rep = run_collusion(cfg, spec.get("n_test", 20000), spec.get("mu_trials", 20000))
    entries.append({"kind": "collusion", "label": cfg.experiment_id, **rep.to_dict()})


def _cmd_curves(doc, cfg, out, meta, entries):
    spec = doc["curves"]
    name = spec.get("name", spec["curve"])
    pts = analytic.curve(spec["curve"], spec["abscissae"], **spec.get("params", {}))
    entries.append(
        {"kind": "curve", "label": name, "curve_id": spec["curve"], "points": [{"abscissa": p.abscissa, "value": p.value} for p in pts]}
    )
    write_curve_csv(out / f"{name}.curve.csv", [(p.abscissa, None, None, p.value) for p in pts], *meta)


HANDLERS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "audit-dp": _cmd_audit,
    "collude": _cmd_collude,
    "curves": _cmd_curves,
}


def _report(args) -> int:
    path = args.results or args.out / "results.json"
    try:
        doc = json.loads(Path(path).read_text())
        text = emit_report(doc)
    except FileNotFoundError:
        print(f"error: {path} not found", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: {path} is not valid JSON: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    Path(path).with_name("report.txt").write_text(text)
    return 0


def run_config(doc: dict, command: str, out: Path, jobs: int = 1) -> int:
    """Validate ``doc``, run ``command`` and write artifacts into ``out``."""
    problems = validate_document(doc, command)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    out.mkdir(parents=True, exist_ok=True)
    cfg = _experiment(doc, jobs)
    digest = config_hash(doc)
    meta = (cfg.seed, digest)
    entries: list = []
    results = {
        "command": command,
        "seed": cfg.seed,
        "config_hash": digest,
        "config": doc,
        "versions": versions(),
        "tolerance": {"k_sigma": doc.get("report", {}).get("k_sigma", 2.0)},
        "status": "ok",
        "results": entries,
    }
    code = 0
    try:
        HANDLERS[command](doc, cfg, out, meta, entries)
    except ConfigError as exc:
        results.update(status="failed", error=str(exc))
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        code = 2
    except (PrivleakError, ValueError, ArithmeticError) as exc:
        results.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    write_results(out, results)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        return _report(args)
    if args.config is None:
        print("config error: --config is required for this command", file=sys.stderr)
        return 2
    try:
        doc = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    doc = copy.deepcopy(doc)
    if isinstance(doc, dict) and isinstance(doc.get("experiment"), dict):
        if args.seed is not None:
            doc["experiment"]["seed"] = args.seed
        if args.trials is not None:
            doc["experiment"]["trials"] = args.trials
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return 2
    return run_config(doc, args.command, args.out, args.jobs)


if __name__ == "__main__":
    sys.exit(main())
