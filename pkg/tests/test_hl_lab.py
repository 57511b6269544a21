import csv
import re

import pytest

import hl_lab
from utils.inequality_verifier import VerificationReport


def run(capsys, *argv):
    code = hl_lab.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_rows(path):
    with open(path, newline="") as input_file:
        return list(csv.DictReader(input_file))


def test_count(capsys):
    code, out, _ = run(capsys, "count", "--q", "2", "--dim", "2", "--t", "2")
    assert code == 0
    assert out == "13\n"


def test_volume_beyond_float_range(capsys):
    code, out, _ = run(capsys, "volume", "--body", "cube", "--dim", "1000", "--t", "10")
    assert code == 0
    assert "*2^" in out


def test_usage_errors(capsys):
    code, _, err = run(capsys, "count", "--dim", "0", "--t", "1")
    assert code == 2
    assert "error: dimension must be a positive integer" in err
    assert run(capsys, "count", "--bogus")[0] == 2
    assert run(capsys)[0] == 2


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["count"], "--t"),
        (["volume"], "--t"),
        (["average"], "--t"),
        (["semigroup"], "--time"),
        (["multiplier"], "--N"),
        (["verify"], "--suite"),
        (["sweep"], "--op"),
    ],
)
def test_missing_required_flag(capsys, argv, flag):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert "error: %s is required" % flag in err


def test_config_file_and_precedence(capsys, tmp_path):
    path = tmp_path / "count.config"
    path.write_text("# three dimensions\ndim = 3\nt = 1\nq = 2\n")
    assert run(capsys, "count", "--config", str(path))[1] == "7\n"
    assert run(capsys, "count", "--config", str(path), "--dim", "2")[1] == "5\n"

    path.write_text("bogus = 1\n")
    assert run(capsys, "count", "--config", str(path), "--t", "1")[0] == 2


def test_sidecar_replays_the_run(capsys, tmp_path):
    first = str(tmp_path / "first.json")
    second = str(tmp_path / "second.json")
    code, out, _ = run(capsys, "count", "--dim", "2", "--t", "2", "-o", first)
    assert code == 0 and out == "13\n"
    assert run(capsys, "count", "--config", first + ".config", "-o", second)[0] == 0
    with open(first) as a, open(second) as b:
        assert a.read() == b.read()


def test_weak_constant_search(capsys):
    code, out, _ = run(
        capsys,
        "constant",
        "--body",
        "cube",
        "--atoms-max",
        "3",
        "--radius",
        "10",
        "--evaluations",
        "300",
        "--local-steps",
        "0",
    )
    assert code == 0
    bound = float(re.search(r"lower bound ([0-9.e+-]+)", out).group(1))
    assert 10 / 9 - 1e-9 <= bound <= 1.5675209
    assert "\nwitness: 0:" in out


def test_weak_constant_of_explicit_atoms(capsys):
    code, out, _ = run(
        capsys, "constant", "--body", "cube", "--atoms", "0:1;2:1;4:1", "--t-max", "40"
    )
    assert code == 0
    assert "lower bound 1.11111111111" in out
    assert out.endswith("witness: 0:1;2:1;4:1\n")


def test_strong_constant_needs_p(capsys):
    code, _, err = run(capsys, "constant", "--kind", "strong", "--body", "cube")
    assert code == 2
    assert "--p" in err


def test_maximal_to_stdout(capsys):
    code, out, _ = run(capsys, "maximal", "--body", "cube", "--t-max", "3", "-o", "-")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n1,value"
    assert lines[4] == "0,1"
    assert len(lines) == 8


def test_function_files_chain(capsys, tmp_path):
    path = str(tmp_path / "avg.hlf")
    assert run(capsys, "average", "--atoms", "0:1;3:2", "--t", "1", "-o", path)[0] == 0
    code, out, _ = run(capsys, "maximal", "--input", path, "--t-max", "2")
    assert code == 0
    assert out.startswith("maximal all(t_max=2)")


def test_semigroup_and_square_function(capsys):
    code, out, _ = run(capsys, "semigroup", "--time", "1")
    assert code == 0 and out.startswith("semigroup t=1")
    code, out, _ = run(capsys, "squarefn", "--c1", "1", "--c2", "2")
    assert code == 0 and "window [1.0, 2.0]" in out
    assert run(capsys, "squarefn")[0] == 2


def test_transfer(capsys):
    code, out, _ = run(capsys, "transfer", "--mode", "step", "--body", "cube")
    assert code == 0
    assert out.startswith("step_extension_maximal pass")
    code, out, _ = run(
        capsys, "transfer", "--body", "cube", "--generator", "plateau", "--K", "10"
    )
    assert code == 0
    assert out.startswith("sampling_transference pass")
    assert run(capsys, "transfer", "--body", "cube")[0] == 2


def test_multiplier(capsys):
    code, out, _ = run(
        capsys, "multiplier", "--body", "cube", "--N", "1", "--xi", "0.25"
    )
    assert code == 0
    assert float(out) == pytest.approx(1 / 3)
    assert run(capsys, "multiplier", "--N", "1")[0] == 2


def test_multiplier_output_is_deterministic(capsys, tmp_path):
    paths = [str(tmp_path / name) for name in ("a.csv", "b.csv")]
    for path in paths:
        argv = ["multiplier", "--dim", "2", "--N", "5", "--samples", "50"]
        assert run(capsys, *argv, "--format", "csv", "-o", path)[0] == 0
    with open(paths[0]) as a, open(paths[1]) as b:
        assert a.read() == b.read()
    assert len(read_rows(paths[0])) == 50


def test_verify_suites(capsys):
    code, out, _ = run(
        capsys, "verify", "--suite", "prop1", "--dim", "3", "--samples", "200"
    )
    assert code == 0 and out.startswith("prop1 pass")
    code, out, _ = run(
        capsys, "verify", "--suite", "shift", "--r", "1", "--z", "0.4"
    )
    assert code == 0
    assert out.splitlines()[0].startswith("lemma10 pass")
    code, out, _ = run(capsys, "verify", "--suite", "prop2", "--dim", "1", "--N", "5")
    assert code == 0 and "out of regime" in out
    assert run(capsys, "verify")[0] == 2


def test_verify_exit_code():
    passing = VerificationReport("x", {}, 1.0, 2.0, 1.0, True, verdict="pass")
    failing = VerificationReport("x", {}, 2.0, 1.0, -1.0, True, verdict="fail")
    assert hl_lab.verdict_code([passing]) == 0
    assert hl_lab.verdict_code([passing, failing]) == 1


def test_sweep_with_empty_grid(capsys, tmp_path):
    path = str(tmp_path / "count.csv")
    code, out, _ = run(capsys, "sweep", "--op", "count", "--d-grid", "", "-o", path)
    assert code == 0
    assert out == "sweep count: 0 rows, 0 failed\n"
    with open(path) as input_file:
        assert input_file.read() == "d,t,count,exact,error\n"


def test_sweep_count_keeps_order(capsys, tmp_path):
    path = str(tmp_path / "count.csv")
    argv = ["sweep", "--op", "count", "--d-grid", "2,1", "--t-grid", "2,1"]
    assert run(capsys, *argv, "-o", path)[0] == 0
    rows = read_rows(path)
    assert [(r["d"], r["count"]) for r in rows] == [
        ("2", "13"),
        ("2", "5"),
        ("1", "5"),
        ("1", "3"),
    ]


def test_sweep_envelope_grid(capsys, tmp_path):
    path = str(tmp_path / "envelope.csv")
    argv = ["sweep", "--op", "multiplier-envelope", "--d-grid", "1,2,3"]
    argv += ["--N-grid", "12,24,48", "--samples", "20", "-o", path]
    assert run(capsys, *argv)[0] == 0
    rows = read_rows(path)
    assert len(rows) == 9
    assert not any(row["error"] for row in rows)


def test_sweep_weak_search_is_monotone(capsys, tmp_path):
    path = str(tmp_path / "weak.csv")
    argv = ["sweep", "--op", "weak-search", "--body", "cube", "--k-grid", "1,2,3"]
    argv += ["--radius", "4", "--evaluations", "100", "--local-steps", "0"]
    assert run(capsys, *argv, "-o", path)[0] == 0
    bounds = [float(row["lower_bound"]) for row in read_rows(path)]
    assert len(bounds) == 3
    assert bounds == sorted(bounds)
    assert bounds[0] == pytest.approx(1.0)


def test_verify_prop1_example(capsys):
    argv = ["verify", "--suite", "prop1", "--q", "2", "--dim", "2", "--N", "2"]
    assert run(capsys, *argv, "--samples", "10000", "--seed", "1")[0] == 0


@pytest.mark.slow
def test_weak_constant_example(capsys):
    argv = ["constant", "--kind", "weak11", "--body", "cube", "--dim", "1"]
    argv += ["--atoms-max", "3", "--radius", "30", "--seed", "7"]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    bound = float(re.search(r"lower bound ([0-9.e+-]+)", out).group(1))
    assert bound <= 1.5675209
    assert "witness: " in out
