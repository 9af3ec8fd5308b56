import json
import subprocess
import sys

import jsonschema
import pydot
import pytest

from tsogames.cli import main, schema

from conftest import DATA, GOLDEN

FLAG = str(DATA / "flag_race.prog")
DEKKER = str(GOLDEN / "dekker.prog")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, name, *argv):
    code, out, err = run(capsys, *argv)
    data = json.loads(out)
    jsonschema.validate(data, schema(name))
    return code, data


def test_solve_group1(capsys):
    code, data = run_json(capsys, "solve", "solve", FLAG, "--policy", "A=always,B=always")
    assert code == 0
    assert (data["group"], data["winner"], data["decidable"]) == ("I", "B", True)
    assert data["policy"] == {"A": "always", "B": "always"}
    assert set(data["stats"]) >= {"configs", "edges", "solveMs"}


def test_solve_undecidable_exit_1(capsys):
    code, data = run_json(capsys, "solve", "solve", FLAG, "--policy", "A=never,B=after")
    assert code == 1
    assert data["group"] == "III" and not data["decidable"] and "winner" not in data


def test_solve_bounded_analysis(capsys):
    code, data = run_json(capsys, "solve", "solve", FLAG, "--policy", "A=always,B=never", "--capacity", "2")
    assert code == 1
    assert data["boundedAnalysis"]["winnerAtBound"] == "A"
    assert "not sound in either direction" in data["boundedAnalysis"]["caveat"]


def test_solve_sc_and_groups(capsys):
    code, data = run_json(capsys, "solve", "solve", FLAG, "--sc")
    assert code == 0 and data["winner"] == "B" and data["stats"]["configs"] == 6
    code, data = run_json(capsys, "solve", "solve", FLAG, "--policy", "A=before,B=before")
    assert data["group"] == "II" and data["stats"]["bound"] == 1
    code, data = run_json(capsys, "solve", "solve", FLAG, "--policy", "A=never,B=never")
    assert data["group"] == "IV" and data["winner"] == "A"


@pytest.mark.parametrize("argv", [
    ["solve", "/nonexistent.prog"],
    ["solve", FLAG, "--policy", "A=sometimes,B=never"],
    ["solve", FLAG, "--finals", "P2.zz"],
    ["classify", "--policy", "garbage"],
    ["classify"],
    ["generate", "atm", FLAG],
    ["reach", FLAG, "--target", "r2"],
])
def test_input_errors_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:") and out == ""


def test_bad_program_reports_line(capsys, tmp_path):
    f = tmp_path / "bad.prog"
    f.write_text("domain 0 1\nvars x\nprocess P\n  state a init\n  a -> q9 : skip\n")
    code, _, err = run(capsys, "solve", str(f))
    assert code == 2 and "q9" in err


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["solve", FLAG, "--capacity", "-1"])
    assert e.value.code == 2


def test_classify(capsys):
    code, out, _ = run(capsys, "classify", "--policy", "A=before,B=before")
    assert (code, out) == (0, "II\n")
    code, out, _ = run(capsys, "classify", "--all")
    rows = out.splitlines()
    assert len(rows) == 16
    groups = [r.split()[-1] for r in rows]
    assert groups.count("I") == 7 and groups.count("III") == 7 and groups.count("II") == groups.count("IV") == 1
    assert rows[0].split() == ["A=always", "B=always", "I"]
    assert rows[-1].split() == ["A=never", "B=never", "IV"]


@pytest.mark.parametrize("kind,src,golden", [
    ("pcs-a", "pcs_small.json", "pcs_small_a.prog"),
    ("pcs-b", "pcs_small.json", "pcs_small_b.prog"),
    ("pcs-ab", "pcs_small.json", "pcs_small_ab.prog"),
    ("atm", "atm_accept.json", "atm_accept.prog"),
    ("atm", "atm_reject.json", "atm_reject.prog"),
])
def test_generate_goldens(capsys, kind, src, golden):
    _, first, _ = run(capsys, "generate", kind, str(GOLDEN / src))
    _, second, _ = run(capsys, "generate", kind, str(GOLDEN / src))
    assert first == second == (GOLDEN / golden).read_text()


def test_generated_atm_program_solves(capsys, tmp_path):
    for name, winner in (("atm_accept", "B"), ("atm_reject", "A")):
        code, data = run_json(capsys, "solve", "solve", str(GOLDEN / f"{name}.prog"), "--sc")
        assert code == 0 and data["winner"] == winner


def test_generate_pcs_a_has_arbiter(capsys):
    _, out, _ = run(capsys, "generate", "pcs-a", str(GOLDEN / "pcs_small.json"))
    block = out.split("process P3")[1]
    assert block.count("state ") == 4


def test_generate_ownership(capsys):
    code, out, _ = run(capsys, "generate", "ownership", FLAG, "--owned", "P2.r1")
    assert code == 0 and "own_F" in out and "P2.own_F" in out


def test_export_dot(capsys):
    args = ["export-dot", FLAG, "--policy", "A=always,B=never", "--capacity", "1"]
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    assert first == second == (GOLDEN / "flag_race_always_never.dot").read_text()
    (graph,) = pydot.graph_from_dot_data(first)
    assert len(graph.get_edges()) == 15
    _, sc, _ = run(capsys, "export-dot", FLAG, "--sc")
    assert sc == (GOLDEN / "flag_race_sc.dot").read_text()
    _, nn, _ = run(capsys, "export-dot", FLAG, "--policy", "A=never,B=never", "--capacity", "2")
    assert "up_" not in nn


def test_reach(capsys):
    code, data = run_json(capsys, "reach", "reach", DEKKER, "--target", "P1.q3,P2.r3")
    assert code == 0 and not data["reachable"] and data["witness"] == []
    code, data = run_json(capsys, "reach", "reach", DEKKER, "--target", "P1.q3,P2.r3", "--mode", "tso",
                          "--capacity", "1")
    assert data["reachable"] and len(data["witness"]) <= 8 and data["capacity"] == 1


def test_replay_extracted_strategies(capsys, tmp_path):
    dump = tmp_path / "strat.json"
    code, _, _ = run(capsys, "solve", FLAG, "--sc", "--dump-strategies", str(dump))
    jsonschema.validate(json.loads(dump.read_text()), schema("strategies"))
    code, out, _ = run(capsys, "replay", FLAG, "--sc", "--strategies", str(dump), "--horizon", "20")
    assert code == 0
    lines = out.splitlines()
    assert lines[-1].startswith("outcome: B reached a final configuration at step")
    assert int(lines[-1].rsplit(" ", 1)[1]) <= 6
    code, out, _ = run(capsys, "replay", FLAG, "--sc", "--strategies", str(dump), "--horizon", "0")
    assert out.splitlines()[-1] == "outcome: A avoided the finals for 0 steps"


def test_replay_missing_strategy_names_config(capsys, tmp_path):
    dump = tmp_path / "strat.json"
    run(capsys, "solve", FLAG, "--sc", "--dump-strategies", str(dump))
    data = json.loads(dump.read_text())
    start = 'A:{"M":{"x":"0"},"S":{"P1":"q1","P2":"r1"}}'
    del data["strategyA"][start]
    dump.write_text(json.dumps(data))
    code, _, err = run(capsys, "replay", FLAG, "--sc", "--strategies", str(dump))
    assert code == 2 and "undefined" in err and start in err


def test_harness_json(capsys, tmp_path):
    corpus = {"instances": [{"name": "small", "pcs": json.loads((GOLDEN / "pcs_small.json").read_text())}]}
    f = tmp_path / "corpus.json"
    f.write_text(json.dumps(corpus))
    code, data = run_json(capsys, "harness", "harness", "--corpus", str(f), "--json")
    assert code == 0 and data["agreement"] == data["total"] == 3
    assert "not sound in either direction" in data["caveat"]
    code, data = run_json(capsys, "harness", "harness", "--random", "2", "--seed", "3", "--variant", "B", "--json")
    assert data["total"] == 2 and [r["name"] for r in data["reports"]] == ["random_3_0", "random_3_1"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "tsogames.cli", "classify", "--policy", "A=never,B=never"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "IV\n"
