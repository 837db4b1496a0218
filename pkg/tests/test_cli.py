import json
import shutil
import subprocess
import sys
from fractions import Fraction as F

import pytest

from conftest import sigma_bar_0, thirds_strategy
from diceygames.cli import EXIT_NO, EXIT_OK, EXIT_USAGE, main
from diceygames.families import BETA
from diceygames.game import parse_game, serialize_game
from diceygames.strategy import evaluate, parse_strategy, serialize_strategy


@pytest.fixture
def files(tmp_path, tri):
    game = tmp_path / "tri.json"
    game.write_text(serialize_game(tri))
    thirds = tmp_path / "thirds.json"
    thirds.write_text(serialize_strategy(tri, thirds_strategy(tri)))
    return tmp_path, game, thirds


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_and_eval(capsys, files):
    tmp, _, _ = files
    game, pack = tmp / "mp4.json", tmp / "pack4.json"
    assert run(capsys, "gen", "clique-mp", "-n", 4, "-o", game, "--pack-out", pack)[0] == EXIT_OK
    dg = parse_game(game.read_text())
    assert len(dg.team_players) == 4 and len(dg.dice) == 6
    assert len(json.loads(pack.read_text())["dice"]) == 6


def test_eval_exact(capsys, files):
    _, game, thirds = files
    code, out, _ = run(capsys, "eval", game, thirds)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["per_action"] == {"H": "8/27", "T": "7/27"}


def test_threshold_yes_writes_witness(capsys, files, tri):
    tmp, game, _ = files
    witness = tmp / "w.json"
    code, out, _ = run(capsys, "threshold", game, "-t", "1/4", "-w", witness)
    assert code == EXIT_OK
    assert json.loads(out)["verdict"] == "YES"
    assert evaluate(tri, parse_strategy(tri, witness.read_text())).value >= 0.25


def test_threshold_no(capsys, files):
    _, game, _ = files
    code, out, _ = run(capsys, "threshold", game, "-t", "279/1000")
    assert code == EXIT_NO
    assert json.loads(out)["verdict"] == "NO_WITHIN_SEARCH"


@pytest.mark.parametrize("argv", [["solve", "--bogus", "x"], ["frobnicate"], [],
                                  ["threshold", "g.json", "-t", "abc"]])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_USAGE


def test_missing_file_and_bad_game(capsys, files):
    tmp, _, thirds = files
    assert run(capsys, "eval", tmp / "nope.json", thirds)[0] == EXIT_USAGE
    bad = tmp / "bad.json"
    bad.write_text("{")
    assert run(capsys, "eval", bad, thirds)[0] == EXIT_USAGE


def test_budget_refusal(capsys, tmp_path):
    game = tmp_path / "mp4.json"
    run(capsys, "gen", "clique-mp", "-n", 4, "-o", game)
    code, _, err = run(capsys, "solve", game, "--mode", "exhaustive")
    assert code == EXIT_USAGE and "budget" in err


def test_conjecture_check(capsys):
    code, out, _ = run(capsys, "conjecture-check", "-n", 4, "--json")
    assert code == EXIT_OK
    row = json.loads(out)["results"][0]
    assert row["conjectured"] == "1/4" and row["match"]
    code, out, _ = run(capsys, "conjecture-check", "-n", 3, 5)
    assert code == EXIT_OK and out.count("[match]") == 2


def test_normalize_and_certify(capsys, files, tri):
    tmp, game, _ = files
    s0 = tmp / "s0.json"
    s0.write_text(serialize_strategy(tri, sigma_bar_0(tri)))
    out = tmp / "n.json"
    assert run(capsys, "normalize", game, s0, "-o", out)[0] == EXIT_OK
    norm = parse_strategy(tri, out.read_text())
    assert norm.grid_size == 2 and evaluate(tri, norm).value >= F(7, 27)
    code, text, _ = run(capsys, "solve", game, "--mode", "hybrid", "--strategy-out", tmp / "opt.json")
    assert code == EXIT_OK and abs(json.loads(text)["value"] - BETA) < 1e-6
    code, text, _ = run(capsys, "certify", game, tmp / "opt.json")
    assert code == EXIT_OK and json.loads(text)["status"] == "FEASIBLE"


def test_mc_reproducible(capsys, files):
    _, game, thirds = files
    a = run(capsys, "mc", game, thirds, "--samples", 20000, "--seed", 4)[1]
    b = run(capsys, "mc", game, thirds, "--samples", 20000, "--seed", 4)[1]
    assert a == b and json.loads(a)["per_action"]["H"]["samples"] == 20000


def test_reduce_and_allocate(capsys, tmp_path):
    src = tmp_path / "f.dqbf"
    src.write_text("forall x1\nexists y1 : x1\nclause -x1 y1\n")
    code, out, err = run(capsys, "reduce", "dqbf", src)
    assert code == EXIT_OK and "threshold 1" in err
    assert parse_game(out).devil_actions == ("rand0_x1", "rand1_x1", "C1")
    quad = tmp_path / "q.txt"
    quad.write_text("vars 2\nineq 1 2 1 2 1 1\n")
    assert run(capsys, "reduce", "quad", quad)[0] == EXIT_OK
    game, pack = tmp_path / "mp3.json", tmp_path / "pack.json"
    run(capsys, "gen", "clique-mp", "-n", 3, "-o", game)
    pack.write_text('{"dice": [{"id": "D1", "acc": 3}]}')
    code, out, _ = run(capsys, "allocate", game, pack)
    doc = json.loads(out)
    assert code == EXIT_OK and abs(doc["value"] - 0.5) < 1e-6 and doc["canonical_count"] == 1


def test_export_smt(capsys, files, tri, monkeypatch):
    monkeypatch.delenv("DICEY_SMT_SOLVER", raising=False)
    tmp, game, _ = files
    code, out, _ = run(capsys, "export-smt", game, "-t", "1/4", "--k", 2)
    assert code == EXIT_OK and out.startswith("; dice")
    opt = tmp / "opt.json"
    from diceygames.families import build_conjecture_strategy
    opt.write_text(serialize_strategy(tri, build_conjecture_strategy(3, tri)))
    code, out, _ = run(capsys, "export-smt", game, "-t", "278/1000", "--strategy", opt)
    assert code == EXIT_OK and "(/ 139 500)" in out
    assert run(capsys, "export-smt", game, "-t", "1/4", "--check")[0] == EXIT_USAGE
    if shutil.which("z3"):
        code, _, err = run(capsys, "export-smt", game, "-t", "278/1000", "--strategy", opt,
                           "--check", "--solver", "z3")
        assert code == EXIT_OK and err.strip() == "sat"


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "diceygames.cli", "conjecture-check", "-n", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK and "[match]" in proc.stdout
