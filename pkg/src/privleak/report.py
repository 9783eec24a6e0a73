"""Plain-text summaries rendered purely from a results document."""

from __future__ import annotations

from .errors import ConfigError

__all__ = ["emit_report", "check_results"]

REQUIRED = ("command", "seed", "config_hash", "status", "results")
ENTRY_KINDS = ("estimate", "sweep", "audit", "collusion", "curve")
COLLUSION_ABS_TOL = 0.01


def check_results(results) -> list[str]:
    """List every structural problem with a results document."""
    if not isinstance(results, dict):
        return ["results document must be a JSON object"]
    problems = [f"missing key {k!r}" for k in REQUIRED if k not in results]
    entries = results.get("results", [])
    if not isinstance(entries, list):
        problems.append("'results' must be a list")
        entries = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict) or e.get("kind") not in ENTRY_KINDS:
            problems.append(f"results[{i}] has no valid 'kind' (expected one of {ENTRY_KINDS})")
    return problems


def _fmt(x, width=9):
    if x is None:
        return "-".rjust(width)
    if isinstance(x, str):
        return x.rjust(width)
    return f"{x:.4f}".rjust(width)


def _flag(value, stderr, reference, k):
    if reference is None or value is None:
        return "n/a"
    return "PASS" if abs(value - reference) <= k * stderr else "FAIL"


def _table(header, rows):
    lines = ["  " + " ".join(h.rjust(9) for h in header)]
    lines += ["  " + " ".join(_fmt(c) for c in row) for row in rows]
    return lines


def emit_report(results, k_sigma: float | None = None) -> str:
    """Render tables pairing empirical and analytic values with pass/fail flags.

    Estimates pass when within ``k_sigma`` standard errors of the analytic
    value (default taken from the document, else 2). DP audit rows show the
    violation flag computed by the audit itself.
    """
    problems = check_results(results)
    if problems:
        raise ConfigError([f"malformed results: {p}" for p in problems])
    k = k_sigma if k_sigma is not None else results.get("tolerance", {}).get("k_sigma", 2.0)
    out = [
        f"command: {results['command']}  status: {results['status']}",
        f"seed: {results['seed']}  config_hash: {results['config_hash']}",
        f"tolerance: |empirical - analytic| <= {k} * stderr",
    ]
    if results.get("error"):
        out.append(f"error: {results['error']}")
    entries = results["results"]
    if not entries:
        out.append("no experiments")
        return "\n".join(out) + "\n"
    for e in entries:
        out.append("")
        out.extend(_render(e, k))
    return "\n".join(out) + "\n"


def _render(e, k):
    kind = e["kind"]
    title = f"[{kind}] {e.get('label', '')}".rstrip()
    if kind == "estimate":
        est, ref = e["estimate"], e.get("analytic")
        refv = None if ref is None else ref["value"]
        rows = [[ref and ref["abscissa"], est["value"], est["stderr"], refv, _flag(est["value"], est["stderr"], refv, k)]]
        lines = [title] + _table(["abscissa", "empirical", "stderr", "analytic", "flag"], rows)
        sim = est.get("extras", {}).get("simulator_metric")
        if sim:
            lines.append(f"  alternative (simulator) metric: {sim.get('value', sim.get('error'))}")
        return lines
    if kind == "sweep":
        rows = []
        for r in e["rows"]:
            if r["estimate"] is None:
                rows.append([r["abscissa"], None, None, None, "ERROR"])
                continue
            ref = r["analytic"]
            refv = None if ref is None else ref["value"]
            est = r["estimate"]
            rows.append([r["abscissa"], est["value"], est["stderr"], refv, _flag(est["value"], est["stderr"], refv, k)])
        lines = [title] + _table(["abscissa", "empirical", "stderr", "analytic", "flag"], rows)
        lines += [f"  error at {r['abscissa']}: {r['error']}" for r in e["rows"] if r.get("error")]
        return lines
    if kind == "audit":
        rows = [
            [r["epsilon"], r["estimate"]["value"], r["estimate"]["stderr"], r["bound"], "VIOLATION" if r["violation"] else "ok"]
            for r in e["rows"]
        ]
        return [title] + _table(["epsilon", "advantage", "stderr", "bound", "flag"], rows)
    if kind == "collusion":
        est = e["estimate"]
        tol = max(k * est["stderr"], COLLUSION_ABS_TOL)
        flag = "PASS" if abs(est["value"] - e["expected_colluding_advantage"]) <= tol else "FAIL"
        u = e["utility"]
        lines = [title]
        lines += _table(
            ["advantage", "stderr", "expected", "mu", "flag"],
            [[est["value"], est["stderr"], e["expected_colluding_advantage"], e["mu"]["mu"], flag]],
        )
        lines.append(f"  max advantage 1 - mu: {e['max_advantage']:.4f}")
        for key in ("acc_base", "acc_wrapped", "drop", "disagreement", "collision_bound"):
            if key in u:
                lines.append(f"  utility {key}: {u[key]:.6g}")
        return lines
    rows = [[p["abscissa"], p["value"]] for p in e["points"]]
    return [f"[curve] {e.get('curve_id', '')}"] + _table(["abscissa", "value"], rows)
