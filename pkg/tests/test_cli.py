"""Problem files and the command line."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from helpers import ALS, DLL, TPTR, TREE, UNFOLD
from slentail.cli import ParseError, format_problem, parse, run

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def write(tmp_path, text, name="p.sl"):
    f = tmp_path / name
    f.write_text(text)
    return str(f)


# ---------------------------------------------------------------- parsing

@pytest.mark.parametrize("path", sorted(PROBLEMS.glob("*.sl")), ids=lambda p: p.name)
def test_print_parse_round_trip(path):
    pb = parse(path.read_text())
    again = parse(format_problem(pb))
    assert again.rules == pb.rules
    assert [q.sequent for q in again.queries] == [q.sequent for q in pb.queries]
    assert format_problem(again) == format_problem(pb)


def test_sorts_are_inferred():
    pb = parse(UNFOLD + "entail p(x,y) |- r(x);")
    (q,) = pb.queries
    y = q.sequent.lhs.spatial[0].args[1]
    assert y.sort.name == "d" and not y.sort.is_loc
    assert "p(x,y:d)" in format_problem(pb)


def test_annotations_and_constants():
    pb = parse("sort d;\nconst a : d;\nrule p(x) <= x -> (a, y:d);\nentail p(x) |- p(x);")
    rule = pb.rules[0]
    assert rule.body.spatial[0].args[0].is_const
    assert rule.body.spatial[0].args[1].sort.name == "d"


@pytest.mark.parametrize("text,where", [
    ("rule p(x) <= x -> (y)", (1, 22)),
    ("rule p(x) <= x -> (y);\nentail p(x) |- ;", (2, 16)),
    ("rule p(x) <= x => (y);", (1, 17)),
    ("sort d;\nconst a : d;\nrule p(x) <= x -> (a) /\\ x = a;", None),
])
def test_parse_errors_carry_positions(text, where):
    with pytest.raises(ParseError) as err:
        parse(text)
    if where is not None:
        assert (err.value.line, err.value.col) == where


# ---------------------------------------------------------------- commands

def test_check_exit_codes(tmp_path, capsys):
    assert run(["check", write(tmp_path, ALS + DLL + TREE)]) == 0
    assert run(["check", str(PROBLEMS / "nonprule.sl")]) == 2
    out = capsys.readouterr().out
    assert "[condition-2]" in out and "[no-points-to]" in out and "[condition-1]" in out


def test_check_json(capsys):
    assert run(["check", "--json", str(PROBLEMS / "paper_sets.sl")]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["valid"] and rec["deterministic"]
    assert rec["measures"] == {"ar_max": 3, "record_max": 4, "width": 4}


def test_prove_valid_file(capsys):
    assert run(["prove", "--proof", "--no-timing", str(PROBLEMS / "unfold.sl")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("query 1: valid (7 sequents)")
    assert "back-edge" in out


def test_prove_invalid_file(capsys):
    assert run(["prove", "--countermodel", str(PROBLEMS / "anti.sl")]) == 1
    out = capsys.readouterr().out
    assert out.count("counter-model:") == 5
    for k in range(1, 6):
        assert f"[anti-axiom {k}]" in out


def test_prove_json_schema(capsys):
    assert run(["prove", "--json", "--countermodel", str(PROBLEMS / "paper_sets.sl")]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 7
    for i, line in enumerate(lines, start=1):
        rec = json.loads(line)
        assert {"query", "valid", "nodes", "milliseconds", "evidence"} <= set(rec)
        assert rec["query"] == i
        assert isinstance(rec["milliseconds"], float)
        assert rec["evidence"] in ("axiom", "proof", "anti-axiom", "stuck")
        if not rec["valid"]:
            assert rec["detail"]["countermodel"]["heap"]


def test_prove_rejects_invalid_rules(tmp_path, capsys):
    assert run(["prove", write(tmp_path, "rule ls(x,y) <= x -> (y);\nrule ls(x,y) <= x -> (z) * ls(z,y);\n"
                                         "entail ls(x,y) |- ls(x,y);")]) == 2
    assert "non-deterministic" in capsys.readouterr().err


def test_resource_limit_is_an_error(capsys):
    assert run(["prove", "--max-sequents", "3", str(PROBLEMS / "chain.sl")]) == 2
    assert "node cap" in capsys.readouterr().err


def test_missing_file_and_bad_flags(capsys):
    assert run(["prove", "/nonexistent/file.sl"]) == 2
    assert run(["prove"]) == 2
    assert run(["oracle", "--max-cells", "0", str(PROBLEMS / "anti.sl")]) == 2


def test_oracle_command(capsys, tmp_path):
    assert run(["oracle", "--max-cells", "3", "--max-locs", "4", str(PROBLEMS / "anti.sl")]) == 1
    assert run(["oracle", "--json", write(tmp_path, TPTR + "entail x -> () |- tptr(x,y,z);")]) == 0
    rec = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert rec["countermodel"] is None


def test_bench_writes_table_and_plot(tmp_path, capsys):
    png = tmp_path / "scaling.png"
    assert run(["bench", "--plot", str(png), str(PROBLEMS / "chain.sl")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "query\tlhs_atoms\tvalid\tnodes\tmilliseconds"
    rows = [l.split("\t") for l in lines[1:]]
    assert [r[1] for r in rows] == ["4", "8"]
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "slentail.cli", "check", str(PROBLEMS / "lists.sl")],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "rule set is valid" in out.stdout
