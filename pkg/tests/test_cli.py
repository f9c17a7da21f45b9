import json
import subprocess
import sys
from pathlib import Path

import pytest

from sumproduct.cli import (
    EXIT_BUDGET,
    EXIT_DEGENERATE,
    EXIT_GOLDEN,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_REFUSED,
    main,
)

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_stats_formats(capsys):
    code, out, err = run(capsys, "stats", "--set", "p=7:{1,2,4}", "--format", "json")
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["E"] == 27 and d["sizes"]["A.A"] == 3 and d["sizes"]["A+A"] == 6
    assert "outside" in err  # |A|^2 >= p warning
    code, out, _ = run(capsys, "stats", "--set", "p=7:{1,2,4}", "--format", "csv")
    assert out == "slope,count\n1,3\n2,3\n4,3\n"
    code, out, _ = run(capsys, "stats", "--set", "p=101:{0,1,2}")
    assert code == EXIT_OK and "E_*" not in out


def test_generators(capsys):
    _, out, _ = run(capsys, "stats", "--gen", "ap", "--p", "101", "--n", "5", "--format", "json")
    assert json.loads(out)["set"] == "p=101:{1,2,3,4,5}"
    _, out, _ = run(capsys, "stats", "--gen", "gp", "--p", "101", "--n", "4", "--ratio", "3", "--format", "json")
    assert json.loads(out)["set"] == "p=101:{1,3,9,27}"
    code, out, _ = run(capsys, "stats", "--gen", "random", "--p", "1009", "--n", "7", "--seed", "2", "--format", "json")
    assert code == EXIT_OK and json.loads(out)["sizes"]["A"] == 7


@pytest.mark.parametrize(
    "argv,code",
    [
        (["stats", "--set", "p=7:{1,2"], EXIT_PARSE),
        (["stats"], EXIT_PARSE),
        (["nonsense"], EXIT_PARSE),
        (["trace", "--set", "p=7:{1,2,4}"], EXIT_HYPOTHESIS),
        (["trace", "--set", "p=101:{0,1,2}"], EXIT_HYPOTHESIS),
        (["trace", "--set", "p=101:{1,2}"], EXIT_DEGENERATE),
        (["scan", "--p", "101", "--n", "10", "--exhaustive"], EXIT_BUDGET),
        (["fit", "--points", "3:5,4:7"], EXIT_REFUSED),
        (["fit", "--points", "3-5"], EXIT_PARSE),
        (["trace", "--set", "p=1009:{1,2,3}", "--tau", "abc"], EXIT_PARSE),
    ],
)
def test_exit_codes(capsys, argv, code):
    assert run(capsys, *argv)[0] == code


def test_trace_and_golden_check(capsys, tmp_path):
    (golden,) = sorted(GOLDEN.glob("case_iii_*.json"))
    d = json.loads(golden.read_text())
    literal = d["header"]["input"]
    code, out, _ = run(capsys, "trace", "--set", literal, "--tau", "1", "--golden-check", str(golden))
    assert code == EXIT_OK
    assert json.loads(out)["case_taken"] == "iii"
    code, _, err = run(capsys, "trace", "--set", literal, "--golden-check", str(golden))
    assert code == EXIT_GOLDEN and "mismatch" in err
    dest = tmp_path / "r.json"
    assert run(capsys, "trace", "--set", literal, "--tau", "1", "--output", str(dest))[0] == EXIT_OK
    assert dest.read_text() == golden.read_text()


def test_config_file_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# low threshold\ntau = 1\nset = p=103:{1,46,56}\n")
    _, out, _ = run(capsys, "--config", str(cfg), "trace")
    assert json.loads(out)["case_taken"] == "iii"
    _, out, _ = run(capsys, "--config", str(cfg), "trace", "--tau", "4")
    assert json.loads(out)["case_taken"] == "ii"
    cfg.write_text("tau\n")
    assert run(capsys, "--config", str(cfg), "trace")[0] == EXIT_PARSE


def test_lemma_commands(capsys):
    code, out, _ = run(capsys, "lemma", "cover", "--x1", "p=11:{0,1,2,3}", "--x2", "p=11:{0,1}", "--eps", "0")
    assert code == EXIT_OK and json.loads(out)["translates"] == [0, 2]
    code, out, _ = run(capsys, "lemma", "pr", "--y", "p=31:{1,2,3,5,8}", "--x", "p=31:{0,1}", "--eps", "1/5")
    d = json.loads(out)
    assert code == EXIT_OK and len(json.loads(json.dumps(d))["Y_prime"]) > 0
    code, out, _ = run(capsys, "lemma", "focus", "--set", "p=103:{1,46,56}")
    d = json.loads(out)
    assert (d["c1"], d["c2"], d["c3"]) == ("1", "1", "1")


def test_scan_anneal_fit(capsys, tmp_path):
    code, out, _ = run(capsys, "scan", "--samples", "0")
    assert code == EXIT_OK and out == "p,n,s,m,objective,normalized,seed\n"
    code, out, _ = run(capsys, "scan", "--p", "19", "--n", "4", "--exhaustive", "--format", "json")
    d = json.loads(out)
    assert d["objective"] == 7 and d["members"] == [1, 3, 16, 18]
    assert sum(d["histogram"].values()) == 3060
    csv_path = tmp_path / "scan.csv"
    for n in (5, 8, 12):
        code, out, _ = run(capsys, "scan", "--p", "1009", "--n", str(n), "--samples", "50")
        with csv_path.open("a") as fh:
            fh.write(out if n == 5 else out.split("\n", 1)[1])
    code, out, _ = run(capsys, "fit", "--input", str(csv_path))
    assert code == EXIT_OK and json.loads(out)["slope"] > 1
    code, out, _ = run(capsys, "fit", "--points", "2:4,4:16,8:64")
    assert json.loads(out)["slope"] == pytest.approx(2)
    code, out, _ = run(capsys, "anneal", "--p", "19", "--n", "4", "--steps", "500", "--restarts", "4", "--format", "json")
    assert code == EXIT_OK and json.loads(out)["objective"] == 7


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "sumproduct", "stats", "--set", "p=101:{1,2,4}", "--format", "json"],
        capture_output=True, text=True, check=True,
    )
    d = json.loads(proc.stdout)
    assert (d["E"], d["sizes"]["A.A"], d["sizes"]["A+A"]) == (19, 5, 6)
