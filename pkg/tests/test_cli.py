import json
import warnings

import numpy as np
import pytest

from privleak.cli import config_hash, main, validate_document
from privleak.core import derive_stream
from privleak.datasets import CsvSchema, load_csv, train_test_split
from privleak.errors import ConfigError, CsvParseError
from privleak.report import emit_report

SIMULATE = {
    "experiment": {
        "distribution": {"kind": "idealized-regression-channel", "sigma_S": 1.0, "ratio": 2.0},
        "trainer": {"kind": "idealized-channel"},
        "adversary": {"kind": "threshold", "mode": "known"},
        "n": 200,
        "trials": 3000,
        "seed": 11,
        "fresh_S_per_trial": False,
        "repeats": 3,
        "block_size": 500,
    }
}


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _run(tmp_path, doc, command, out="out", *extra):
    cfg = _write(tmp_path, doc)
    return main([command, "--config", str(cfg), "--out", str(tmp_path / out), *extra])


# --- configuration validation ------------------------------------------------------


def test_validate_reports_all_problems_at_once():
    bad = {"experiment": {"distribution": {}, "trainer": {"kind": "magic"}, "trials": 5}, "extra": 1}
    problems = validate_document(bad, "simulate")
    text = "\n".join(problems)
    for needle in ("adversary", "seed", "kind", "magic", "trials", "extra"):
        assert needle in text
    assert len(problems) >= 6


def test_command_needs_its_section():
    assert any("sweep" in p for p in validate_document(SIMULATE, "sweep"))


def test_config_error_exit_code(tmp_path, capsys):
    code = _run(tmp_path, {"experiment": {"seed": 1}}, "simulate")
    assert code == 2
    err = capsys.readouterr().err
    assert err.count("config error") >= 3
    assert not (tmp_path / "out" / "results.json").exists()


def test_missing_config_flag(capsys):
    assert main(["simulate"]) == 2


def test_config_hash_is_canonical():
    a = {"x": 1, "y": [1, 2]}
    b = {"y": [1, 2], "x": 1}
    assert config_hash(a) == config_hash(b)


# --- simulate ------------------------------------------------------------------


def test_simulate_writes_artifacts_and_is_byte_stable(tmp_path):
    assert _run(tmp_path, SIMULATE, "simulate", "a") == 0
    assert _run(tmp_path, SIMULATE, "simulate", "b", "--jobs", "2") == 0
    a = (tmp_path / "a" / "results.json").read_bytes()
    b = (tmp_path / "b" / "results.json").read_bytes()
    assert a == b
    doc = json.loads(a)
    assert doc["status"] == "ok" and doc["seed"] == 11
    entry = doc["results"][0]
    assert entry["kind"] == "estimate" and entry["analytic"]["curve_id"] == "membership-threshold-known"
    hist = (tmp_path / "a" / "residuals.hist.csv").read_text().splitlines()
    assert hist[0] == "# seed=11" and hist[1].startswith("# config_hash=")
    assert hist[2] == "bin_low,bin_high,count_member,count_population"
    counts = [list(map(int, line.split(",")[2:])) for line in hist[3:]]
    assert sum(c[0] + c[1] for c in counts) == 3000


def test_seed_and_trials_overrides(tmp_path):
    assert _run(tmp_path, SIMULATE, "simulate", "o", "--seed", "5", "--trials", "1000") == 0
    doc = json.loads((tmp_path / "o" / "results.json").read_text())
    assert doc["seed"] == 5 and doc["results"][0]["estimate"]["trials"] == 1000


def test_runtime_failure_exit_code_keeps_results(tmp_path, capsys):
    doc = json.loads(json.dumps(SIMULATE))
    doc["experiment"]["distribution"]["sigma_S"] = -1.0
    assert _run(tmp_path, doc, "simulate") == 1
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    assert res["status"] == "failed" and "error" in res


# --- sweep, curves, audit, collude ---------------------------------------------------


def test_sweep_writes_curve_csv(tmp_path):
    doc = dict(SIMULATE, sweep={"grid": [{"distribution.ratio": r} for r in (1.0, 2.0)], "name": "ratios"})
    doc["experiment"] = dict(SIMULATE["experiment"], trials=1000)
    assert _run(tmp_path, doc, "sweep") == 0
    lines = (tmp_path / "out" / "ratios.curve.csv").read_text().splitlines()
    assert lines[2] == "abscissa,empirical,stderr,analytic"
    rows = [list(map(float, line.split(","))) for line in lines[3:]]
    assert [r[0] for r in rows] == [1.0, 2.0]
    assert rows[0][3] == 0.0


def test_curves_command(tmp_path):
    doc = dict(SIMULATE, curves={"curve": "membership-threshold-unknown", "abscissae": [1, 2]})
    assert _run(tmp_path, doc, "curves") == 0
    lines = (tmp_path / "out" / "membership-threshold-unknown.curve.csv").read_text().splitlines()
    assert lines[-1].startswith("2.0,,,0.2997")


def test_audit_command_flags(tmp_path):
    doc = {
        "experiment": {
            "distribution": {"kind": "finite-classification", "random_labels": {"domain_size": 4, "n_labels": 2}},
            "trainer": {"kind": "erm-finite"},
            "adversary": {"kind": "bounded-loss"},
            "n": 4,
            "trials": 2000,
            "seed": 0,
        },
        "audit": {"epsilons": [0.01]},
    }
    assert _run(tmp_path, doc, "audit-dp") == 0
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    assert res["results"][0]["rows"][0]["violation"] is True
    assert main(["report", "--out", str(tmp_path / "out")]) == 0
    assert "VIOLATION" in (tmp_path / "out" / "report.txt").read_text()


def test_collude_command_rejects_plain_trainer(tmp_path, capsys):
    assert _run(tmp_path, SIMULATE, "collude") == 2
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    assert res["status"] == "failed"


# --- report --------------------------------------------------------------------


def test_report_from_simulate(tmp_path, capsys):
    _run(tmp_path, SIMULATE, "simulate")
    assert main(["report", "--out", str(tmp_path / "out")]) == 0
    text = (tmp_path / "out" / "report.txt").read_text()
    assert "[estimate]" in text and ("PASS" in text or "FAIL" in text)


def test_report_empty_and_malformed(tmp_path, capsys):
    empty = {"command": "simulate", "seed": 0, "config_hash": "x", "status": "ok", "results": []}
    assert "no experiments" in emit_report(empty)
    with pytest.raises(ConfigError):
        emit_report({"results": [{"kind": "???"}]})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["report", "--results", str(bad)]) == 2
    assert main(["report", "--results", str(tmp_path / "missing.json")]) == 2


# --- CSV ingestion ---------------------------------------------------------------


CSV_TEXT = """age,colour,income,label,ignored
30,red,1.0,yes,x
40,blue,2.0,no,x
50,red,,yes,x
60,green,4.0,no,x
"""


def _schema(**kw):
    d = {
        "roles": {"label": "response", "colour": "target-attribute", "ignored": "ignore"},
        "response_type": "categorical",
    }
    d.update(kw)
    return CsvSchema.from_dict(d)


def test_load_csv_encodes_and_standardises(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(CSV_TEXT)
    with pytest.warns(UserWarning, match="dropped 1"):
        loaded = load_csv(path, _schema())
    ds = loaded.dataset
    assert loaded.dropped_rows == 1 and ds.n == 3
    assert loaded.feature_names == ["age", "income"]
    np.testing.assert_allclose(ds.V.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(ds.V.std(axis=0), 1, atol=1e-12)
    assert loaded.targets == ("blue", "green", "red")
    assert ds.y.tolist() == [1, 0, 0] and loaded.labels == ("no", "yes")


def test_load_csv_one_hot_features(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text(CSV_TEXT)
    schema = CsvSchema.from_dict({"roles": {"income": "response", "label": "ignore", "ignored": "ignore"}, "categorical": ["colour"]})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        loaded = load_csv(path, schema)
    assert loaded.feature_names == ["age", "colour=blue", "colour=green", "colour=red"]
    np.testing.assert_array_equal(loaded.dataset.V[:, 1:].sum(axis=1), 1.0)


def test_load_csv_errors(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n3,oops\n")
    with pytest.raises(CsvParseError, match=":3:"):
        load_csv(path, CsvSchema.from_dict({"roles": {"a": "response"}}))
    with pytest.raises(ConfigError):
        load_csv(path, CsvSchema.from_dict({"roles": {"zzz": "response"}}))
    with pytest.raises(ConfigError):
        CsvSchema.from_dict({"roles": {"a": "feature"}})


def test_train_test_split_partitions():
    from privleak.core import Dataset

    ds = Dataset(np.arange(20.0)[:, None], np.arange(20.0))
    S, T = train_test_split(ds, 0.75, derive_stream(0, "split"))
    assert S.n == 15 and T.n == 5
    assert sorted(np.r_[S.y, T.y].tolist()) == list(range(20))


def test_csv_distribution_through_cli(tmp_path):
    rng = np.random.default_rng(0)
    rows = ["x1,x2,grp,y"]
    for _ in range(200):
        x1, x2 = rng.standard_normal(2)
        g = rng.choice(["a", "b"])
        rows.append(f"{x1},{x2},{g},{x1 + 2 * (g == 'b') + 0.3 * rng.standard_normal()}")
    path = tmp_path / "data.csv"
    path.write_text("\n".join(rows) + "\n")
    doc = {
        "experiment": {
            "distribution": {"kind": "csv", "path": str(path), "schema": {"roles": {"y": "response", "grp": "target-attribute"}}},
            "trainer": {"kind": "tree", "max_depth": 8},
            "adversary": {"kind": "general", "sigma": "estimate", "estimate_trials": 3},
            "trials": 400,
            "seed": 1,
            "fresh_S_per_trial": False,
        },
        "task": "attribute",
    }
    assert _run(tmp_path, doc, "simulate") == 0
    res = json.loads((tmp_path / "out" / "results.json").read_text())
    est = res["results"][0]["estimate"]
    assert est["task"] == "attribute" and est["trials"] == 400
