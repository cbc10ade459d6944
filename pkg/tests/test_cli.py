from __future__ import annotations

import json

import pytest

from helpers import CORPUS
from wmrobust import cli
from wmrobust.cli import EXIT_CLEAN, EXIT_FINDINGS, EXIT_INCONCLUSIVE, EXIT_USAGE, main


def lit(name):
    return str(CORPUS / f"{name}.lit")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("argv, code", [
    (["oracle", lit("sb")], EXIT_FINDINGS),
    (["oracle", lit("mp")], EXIT_CLEAN),
    (["oracle", lit("peterson"), "--budget", "5"], EXIT_INCONCLUSIVE),
    (["explore", lit("sb")], EXIT_FINDINGS),
    (["explore", lit("mp")], EXIT_CLEAN),
    (["explore", lit("peterson"), "--node-budget", "5"], EXIT_INCONCLUSIVE),
    (["run", lit("mp"), "--seeds", "20"], EXIT_CLEAN),
    (["run", lit("sb"), "--seeds", "20"], EXIT_FINDINGS),
    (["race", lit("mp-na"), "--exhaustive"], EXIT_CLEAN),
    (["race", lit("mp-na-rlx"), "--exhaustive"], EXIT_FINDINGS),
    (["check-graph", str(CORPUS / "fig1-mp-1.json")], EXIT_CLEAN),
    (["check-graph", str(CORPUS / "fig1-mp-3.json")], EXIT_FINDINGS),
    (["check-graph", str(CORPUS / "fig1-sb-4.json"), "--model", "sc"], EXIT_FINDINGS),
    (["check-graph", str(CORPUS / "fig1-sb-4.json")], EXIT_CLEAN),
])
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_parse_error_is_reported_with_position(capsys, tmp_path):
    bad = tmp_path / "bad.lit"
    bad.write_text("atomic x;\nthread t1 {\n    x.store(1, bogus);\n}\n")
    code, out, err = run(capsys, "explore", bad)
    assert code == EXIT_USAGE and out == ""
    first = err.splitlines()[0]
    assert first.startswith(f"{bad}:3:")
    assert "bogus" in err


def test_missing_file_and_bad_trace(capsys, tmp_path):
    assert run(capsys, "oracle", tmp_path / "nope.lit")[0] == EXIT_USAGE
    tr = tmp_path / "t.json"
    tr.write_text('{"not": "a list"}')
    code, _, err = run(capsys, "replay", lit("sb"), "--trace", tr)
    assert code == EXIT_USAGE and "JSON array" in err
    tr.write_text('["t9"]')
    assert run(capsys, "replay", lit("sb"), "--trace", tr)[0] == EXIT_USAGE


def test_malformed_graph(capsys, tmp_path):
    g = tmp_path / "g.json"
    g.write_text('{"events": [{"id": 0}]}')
    assert run(capsys, "check-graph", g)[0] == EXIT_USAGE


def test_check_graph_names_the_violated_axiom(capsys):
    code, out, _ = run(capsys, "check-graph", CORPUS / "fig1-mp-3.json", "--json")
    assert json.loads(out) == {"model": "rc20", "verdict": "inconsistent", "violated": "read coherence"}


def test_replay_dumps_every_step(capsys):
    code, out, _ = run(capsys, "replay", lit("sb"), "--trace", CORPUS / "sb-fig5.trace.json", "--json", "--bm")
    data = json.loads(out)
    assert code == EXIT_FINDINGS
    assert [s.get("thread") for s in data["steps"]] == [None, "t1", "t1", "t2"]
    assert all("bm" in s and "lc" in s and "race" in s for s in data["steps"])
    [v] = data["violations"]
    assert v["thread"] == "t2" and v["loc"] == "x1"


def test_explore_fixed_trace(capsys):
    code, out, _ = run(capsys, "explore", lit("ex31"), "--trace", CORPUS / "ex31-sequential.trace.json")
    assert code == EXIT_FINDINGS and "robustness violation" in out


@pytest.mark.parametrize("argv", [
    ["run", lit("sb"), "--seeds", "30", "--json"],
    ["explore", lit("ex31"), "--json"],
    ["oracle", lit("sb"), "--json", "--witness-sc"],
    ["race", lit("mp-na-rlx"), "--json"],
])
def test_json_output_is_deterministic(capsys, argv):
    a = run(capsys, *argv)[1]
    b = run(capsys, *argv)[1]
    assert a == b
    json.loads(a)


def test_seed_from_environment(capsys, monkeypatch):
    argv = ["run", lit("sb"), "--seeds", "5", "--json", "--preempt", "0.3"]
    outs = {}
    for seed in ("7", "7", "8"):
        monkeypatch.setenv("WMROBUST_SEED", seed)
        outs.setdefault(seed, []).append(run(capsys, *argv)[1])
    assert outs["7"][0] == outs["7"][1]
    monkeypatch.setenv("WMROBUST_SEED", "8")
    assert run(capsys, *argv, "--seed", "7")[1] == outs["7"][0]


def test_default_seed_ignores_garbage(monkeypatch):
    monkeypatch.setenv("WMROBUST_SEED", "abc")
    assert cli._default_seed() == 0
    monkeypatch.delenv("WMROBUST_SEED")
    assert cli._default_seed() == 0


def test_run_stops_at_first_violation_by_default(capsys):
    _, out, _ = run(capsys, "run", lit("sb"), "--seeds", "1", "--json")
    _, out2, _ = run(capsys, "run", lit("sb"), "--seeds", "1", "--json", "--continue-on-violation")
    assert len(json.loads(out)["findings"]) == 1
    assert len(json.loads(out2)["findings"]) >= 1


def test_usage_error_from_argparse(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_USAGE
