import json
import subprocess
import sys

import pytest

from txsmc.cli import RunConfig, main, read_expectations, run_corpus, CliError
from txsmc.trace import Tid, Trace, WeakTrace


def cli(*args):
    return main([str(a) for a in args])


def test_safe_and_unsafe_exit_codes(bench, capsys):
    assert cli("check", bench / "lost_update.tpl", "--model", "ccv") == 1
    assert "UNSAFE" in capsys.readouterr().out
    assert cli("check", bench / "repeated_read_2.tpl", "--model", "ccv") == 0
    assert cli("check", bench / "repeated_read_2.tpl", "--model", "cc") == 1


def test_empty_body_program(tmp_path, capsys):
    p = tmp_path / "empty.tpl"
    p.write_text("var x; process p { transaction { } }\n")
    assert cli("check", p, "--json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdict"] == "SAFE" and doc["traces"] == 1


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.tpl"
    p.write_text("var x; process p { transaction { x := ; } }")
    assert cli("check", p) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli("check", tmp_path / "nope.tpl") == 2


def test_budget_exit_code(bench):
    assert cli("check", bench / "worked" / "dpor_example.tpl", "--max-traces", "3") == 3
    assert cli("check", bench / "worked" / "dpor_example.tpl", "--max-nodes", "5") == 3


def test_report_schema(bench, capsys):
    assert cli("check", bench / "lost_update.tpl", "--json", "--oracle") == 1
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"program", "model", "verdict", "traces", "duplicates", "violations", "stats", "oracle"}
    assert doc["duplicates"] == 0
    assert doc["oracle"]["agree"] and doc["oracle"]["traces"] == doc["traces"]
    v = doc["violations"][0]
    assert set(v) == {"assert_site", "observation_sequence", "rf_edges"}
    assert set(doc["stats"]) == {"nodes", "millis"}


def test_reports_identical_apart_from_timing(bench, tmp_path):
    docs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        cli("check", bench / "long_fork.tpl", "--model", "cc", "--report", out)
        doc = json.loads(out.read_text())
        doc["stats"].pop("millis")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_emit_one_file_per_trace(bench, tmp_path):
    out = tmp_path / "traces"
    assert cli("check", bench / "worked" / "dpor_example.tpl", "--emit", "json", "--out", out) == 0
    files = sorted(out.glob("*.json"))
    assert len(files) == 13
    again = tmp_path / "again"
    cli("check", bench / "worked" / "dpor_example.tpl", "--emit", "json", "--out", again)
    assert [f.name for f in files] == sorted(f.name for f in again.glob("*.json"))
    assert all(f.read_text() == (again / f.name).read_text() for f in files)


def test_emit_dot(tmp_path):
    p = tmp_path / "one.tpl"
    p.write_text("var x; process p { transaction { x := 1; } }")
    assert cli("check", p, "--emit", "dot", "--out", tmp_path / "d") == 0
    (f,) = (tmp_path / "d").glob("*.dot")
    assert f.read_text().startswith("digraph")


def test_emit_needs_out(bench):
    assert cli("check", bench / "lost_update.tpl", "--emit", "json") == 2


def test_validate_round_trip(bench, tmp_path, capsys):
    out = tmp_path / "t"
    cli("check", bench / "worked" / "dpor_example.tpl", "--emit", "json", "--out", out)
    for f in out.glob("*.json"):
        wt = WeakTrace.from_json(f.read_text())
        assert wt.digest() == f.stem
        assert WeakTrace.from_json(wt.to_json()) == wt
        assert cli("validate", f, "--model", "ccv") == 0
    assert "consistent under ccv" in capsys.readouterr().out


def test_validate_rejects_inconsistent(tmp_path):
    # p1.t0 reads x from the initializer although p0.t0 already reached it
    tr = Trace(("x", "y"))
    a, b, c = Tid(0, 0), Tid(0, 1), Tid(1, 0)
    for t in (a, b, c):
        tr.add_transaction(t)
    tr.add_write(a, "x", 1)
    tr.add_write(b, "y", 1)
    tr.add_rf(b, c, "y")
    tr.add_rf(tr.init("x"), c, "x")
    p = tmp_path / "bad.json"
    p.write_text(tr.weaken().to_json())
    assert cli("validate", p, "--model", "cc") == 1
    assert cli("validate", p) == 1


def test_validate_bad_input(tmp_path):
    p = tmp_path / "junk.json"
    p.write_text("not json")
    assert cli("validate", p) == 2


def test_corpus_runner(bench):
    rows = run_corpus(bench / "litmus", bench / "litmus" / "expected.txt")
    assert all(exp == obs for _, exp, obs, _ in rows)


def test_corpus_missing_entry(tmp_path, capsys):
    (tmp_path / "expected.txt").write_text("ghost SAFE SAFE\n")
    assert cli("corpus", tmp_path, "--expect", tmp_path / "expected.txt") == 2
    assert "ghost" in capsys.readouterr().err


def test_corpus_mismatch_exit_code(bench, tmp_path):
    (tmp_path / "lost_update.tpl").write_text((bench / "lost_update.tpl").read_text())
    (tmp_path / "expected.txt").write_text("lost_update SAFE SAFE\n")
    assert cli("corpus", tmp_path, "--expect", tmp_path / "expected.txt") == 1


def test_expectations_format(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# comment\na SAFE UNSAFE\n\n")
    assert read_expectations(p) == [("a", "SAFE", "UNSAFE")]
    p.write_text("a MAYBE SAFE\n")
    with pytest.raises(CliError):
        read_expectations(p)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(unroll=0)
    with pytest.raises(ValueError):
        RunConfig(max_traces=0)
    with pytest.raises(ValueError):
        RunConfig(emit="svg")


def test_console_entry_point(bench):
    r = subprocess.run([sys.executable, "-m", "txsmc.cli", "check", str(bench / "lost_update.tpl")],
                       capture_output=True, text=True)
    assert r.returncode == 1
    assert "UNSAFE" in r.stdout
