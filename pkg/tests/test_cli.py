import json
import math
import subprocess
import sys

import pytest

from gesolve.cli import main, read_trace


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_map_golden(capsys):
    code, out, _ = run(capsys, "map", "--codons", "10,4,8,15,3,7,19,21,9")
    lines = out.splitlines()
    assert code == 0
    assert lines[-1] == "sqrt(3/x)"
    assert lines[0].split() == ["String_BNF", "Chromosome", "Operation"]
    assert lines[1].endswith("10 mod 4=2")
    assert lines[9].endswith("9 mod 3=0")


def test_map_rejected(capsys):
    code, out, _ = run(capsys, "map", "--codons", "0")
    assert code == 0
    assert out.splitlines()[-1] == "REJECTED: wrap limit"
    assert len(out.splitlines()) == 5  # header + 3 partial steps + verdict


def test_map_empty_is_usage_error(capsys):
    code, _, err = run(capsys, "map", "--codons", "")
    assert code == 2 and "codon" in err


def test_map_bad_codons_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["map", "--codons", "1,a"])
    assert info.value.code == 2


def test_eval_near_exact_eigenfunction(capsys):
    code, out, _ = run(capsys, "eval", "--expr", "sin(3.141592653589793*x)", "--problem", "box")
    fields = dict(line.split(": ", 1) for line in out.splitlines())
    assert code == 0
    assert float(fields["residual_sse"]) <= 1e-8
    assert fields["valid"] == "True"


def test_eval_log_of_negative_is_penalty(capsys):
    _, out, _ = run(capsys, "eval", "--expr", "log(0-x)")
    fields = dict(line.split(": ", 1) for line in out.splitlines())
    assert float(fields["total"]) == 1e10


def test_eval_one_over_x_large_residual(capsys):
    _, out, _ = run(capsys, "eval", "--expr", "1/x")
    fields = dict(line.split(": ", 1) for line in out.splitlines())
    assert math.isfinite(float(fields["total"]))
    assert float(fields["residual_sse"]) > 1e6


def test_eval_at_point(capsys):
    assert run(capsys, "eval", "--expr", "sqrt(3/x)", "--at", "3")[1].strip() == "1.0"
    assert run(capsys, "eval", "--expr", "log(x)", "--at", "0")[1].startswith("domain error")


def test_eval_syntax_error(capsys):
    code, _, err = run(capsys, "eval", "--expr", "sin(")
    assert code == 2 and err.startswith("error:")


def test_oracle_box(capsys):
    code, out, _ = run(capsys, "oracle", "--problem", "box")
    assert code == 0
    assert abs(float(out) - math.pi**2 / 2) < 1e-3


def test_oracle_harmonic(capsys):
    _, out, _ = run(capsys, "oracle", "--problem", "harmonic", "--domain=-8,8")
    assert abs(float(out) - 0.5) < 1e-3


def test_oracle_small_grid(capsys):
    code, _, err = run(capsys, "oracle", "--N", "5")
    assert code == 2 and "N" in err


def test_solve_writes_artifacts(capsys, tmp_path):
    code, out, _ = run(
        capsys, "solve", "--problem", "box", "--pop", "20", "--gens", "5", "--seed", "1", "--out", str(tmp_path)
    )
    assert code == 0 and out.startswith("termination:")
    rows = read_trace(tmp_path / "trace.csv")
    assert [r["t"] for r in rows] == list(range(6))
    bests = [r["best"] for r in rows]
    assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))
    header = (tmp_path / "trace.csv").read_text().splitlines()[0]
    assert header == "t,best,mean,worst,pc,invalid_count"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["evolution"]["rng_seed"] == 1
    assert report["config"]["evolution"]["population_size"] == 20
    assert set(report["best"]["fitness"]) >= {"residual_sse", "norm_penalty", "boundary_penalty", "total"}


def test_report_round_trips_config(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "solve", "--problem", "harmonic", "--pop", "10", "--gens", "2", "--seed", "4", "--c", "0.5", "--out", str(a))
    first = json.loads((a / "report.json").read_text())
    run(capsys, "solve", "--config", str(a / "report.json"), "--out", str(b))
    second = json.loads((b / "report.json").read_text())
    assert second["config"] == first["config"]
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_harmonic_paper_echo(capsys, tmp_path):
    run(capsys, "solve", "--problem", "harmonic-paper", "--pop", "4", "--gens", "0", "--k", "2", "--out", str(tmp_path))
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["problem"]["omega"] == pytest.approx(447.2136, abs=1e-4)


def test_solve_pop_one_is_validation_error(capsys):
    code, _, err = run(capsys, "solve", "--pop", "1")
    assert code == 2 and "population_size" in err


def test_config_file_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"evolution": {"pop_size": 10}}))
    code, _, err = run(capsys, "solve", "--config", str(cfg))
    assert code == 2 and "evolution.pop_size" in err


def test_config_file_flags_override(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": {"preset": "box"}, "evolution": {"population_size": 10, "max_generations": 1}}))
    out = tmp_path / "o"
    assert run(capsys, "solve", "--config", str(cfg), "--gens", "2", "--out", str(out))[0] == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["evolution"]["max_generations"] == 2
    assert report["config"]["evolution"]["population_size"] == 10


def test_missing_config_file_is_runtime_failure(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "--config", str(tmp_path / "absent.json"))
    assert code == 1 and err.startswith("failed:")


def test_custom_potential_flag(capsys):
    _, out, _ = run(capsys, "eval", "--expr", "exp((0-x*x)/2)", "--potential-expr", "x*x/2", "--domain=-5,5", "--energy", "0.5")
    fields = dict(line.split(": ", 1) for line in out.splitlines())
    assert float(fields["residual_sse"]) < 1e-16


def test_grammar_check(capsys, tmp_path):
    code, out, _ = run(capsys, "grammar-check", "--builtin", "xyz")
    assert code == 0 and "<func>: 9 alternatives" in out
    bad = tmp_path / "g.bnf"
    bad.write_text("<expr> ::= <missing>\n")
    code, _, err = run(capsys, "grammar-check", "--grammar", str(bad))
    assert code == 2 and "missing" in err


def test_grammar_file_round_trip(capsys, tmp_path):
    _, text, _ = run(capsys, "grammar-check", "--builtin", "x_only", "--print")
    bnf = "\n".join(text.splitlines()[6:]) + "\n"
    path = tmp_path / "x.bnf"
    path.write_text(bnf)
    code, out, _ = run(capsys, "map", "--codons", "2,0,0,3,3,2,3,10,0", "--grammar", str(path))
    assert code == 0 and out.splitlines()[-1] == "sin(3*x)"


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gesolve", "map", "--codons", "3,5"], capture_output=True, text=True, check=True
    )
    assert proc.stdout.splitlines()[-1] == "5"
