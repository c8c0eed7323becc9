import json
from pathlib import Path

import pytest

from ncint.cli import main
from ncint.systems import builtin

FIXTURES = Path(__file__).parent / "fixtures"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_so21_passes(capsys):
    code, out, _ = run(capsys, "verify", "--builtin", "so21", "--points", "20")
    report = json.loads(out)
    assert code == 0 and report["pass"] and report["m"] == 1


def test_verify_is_byte_identical_across_runs(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--builtin", "so21", "--seed", "7", "--out", str(a)]) == 0
    assert main(["verify", "--builtin", "so21", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_failure_exits_one(capsys):
    code, out, _ = run(capsys, "verify", "--builtin", "so21-corrupted", "--points", "10")
    assert code == 1 and not json.loads(out)["pass"]


def test_verify_perturbed_file_fails_closure(capsys):
    code, out, _ = run(capsys, "verify", "--system", str(FIXTURES / "so21_perturbed.system"), "--points", "10")
    assert code == 1 and json.loads(out)["checks"]["closure"]["pass"] is False


@pytest.mark.parametrize("argv, fragment", [
    (["verify", "--system", str(FIXTURES / "malformed.system")], "line 16, column 15"),
    (["verify", "--system", str(FIXTURES / "too_many_integrals.system")], "exceeds 2n"),
    (["verify", "--builtin", "so21-coalgebra"], "declare n"),
    (["verify", "--builtin", "nope"], "unknown builtin"),
    (["verify"], "--system"),
    (["verify", "--system", str(FIXTURES / "missing.system")], "No such file"),
    (["verify", "--builtin", "so21", "--points", "0"], "--points"),
    (["flow", "--builtin", "so21", "--field", "integral:1", "--x0", "1,2"], "4 values"),
    (["flow", "--builtin", "so21", "--field", "casimir:2", "--x0", "2,0,0,0"], "casimir:2"),
    (["flow", "--builtin", "so21", "--field", "wobble:1", "--x0", "2,0,0,0"], "selector"),
    (["bracket", "--builtin", "so21", "H4", "H1"], "H4"),
])
def test_input_errors_exit_two(capsys, argv, fragment):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert fragment in err


def test_bracket_of_coalgebra_coordinates(capsys):
    code, out, _ = run(capsys, "bracket", "--builtin", "so21-coalgebra", "x1", "x2", "--format", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "-x3" and len(lines) == 6
    for line in lines[1:]:
        coords, value = line.split("\t")
        x3 = float(coords.split("x3=")[1])
        assert float(value) == -x3


def test_bracket_of_named_integrals_matches_the_table(capsys):
    code, out, _ = run(capsys, "bracket", "--builtin", "so21", "H2", "H3")
    data = json.loads(out)
    assert code == 0
    for s in data["samples"]:
        assert s["value"] == pytest.approx(s["point"]["x1"], abs=1e-12)


def test_bracket_with_composed_casimir_vanishes(capsys):
    _, out, _ = run(capsys, "bracket", "--builtin", "so21", "C1", "H2")
    assert all(abs(s["value"]) < 1e-12 for s in json.loads(out)["samples"])


def test_flow_writes_csv_and_reports_drift(capsys, tmp_path):
    path = tmp_path / "osc.csv"
    code, _, err = run(capsys, "flow", "--builtin", "oscillator", "--field", "integral:1",
                       "--x0", "1,0", "--t-end", "6.283185307179586", "--out", str(path))
    rows = path.read_text().splitlines()
    assert code == 0 and rows[0] == "t,q,p"
    q_end = float(rows[-1].split(",")[1])
    assert q_end == pytest.approx(1.0, abs=1e-8)
    assert json.loads(err)["drift"]["H1"] < 1e-8


def test_flow_along_casimir_field_moves_only_y(capsys):
    code, out, _ = run(capsys, "flow", "--builtin", "so21", "--field", "casimir:1", "--x0", "2,0,0.3,0.1",
                       "--t-end", "1", "--spacing", "0.5")
    last = [float(v) for v in out.splitlines()[-1].split(",")]
    assert code == 0 and last == pytest.approx([1.0, 2.0, 1.0, 0.3, 0.1], abs=1e-12)


def test_flow_action_hamiltonian(capsys):
    # H = r^2 written in coalgebra coordinates: y advances at 2r
    _, out, _ = run(capsys, "flow", "--builtin", "so21", "--field", "action:x1^2 + x2^2 - x3^2",
                    "--x0", "2,0,0.3,0.1", "--t-end", "1")
    last = [float(v) for v in out.splitlines()[-1].split(",")]
    assert last[2] == pytest.approx(4.0, rel=1e-9)


def test_flow_leaving_the_chart_exits_one(capsys):
    code, _, err = run(capsys, "flow", "--builtin", "so21", "--field", "integral:2", "--x0", "0.3,0,0.3,0.5")
    assert code == 1 and "chart" in err


@pytest.mark.parametrize("name, label", [("so21", "R^1"), ("oscillator", "T^1"),
                                         ("oscillator-free", "R^1 x T^1")])
def test_classify(capsys, name, label):
    code, out, _ = run(capsys, "classify", "--builtin", name, "--t-max", "40")
    report = json.loads(out)
    assert code == 0 and report["classification"] == label
    assert report["x0"] == list(builtin(name).sample_points(1, 0)[0])


def test_bracket_of_a_function_with_itself_is_zero(capsys):
    _, out, _ = run(capsys, "bracket", "--builtin", "so21", "H2", "H2", "--format", "csv")
    assert out.splitlines()[0] == "0"


def test_casimir_flow_has_linear_y_column(capsys):
    code, out, err = run(capsys, "flow", "--builtin", "so21", "--field", "casimir:1", "--x0", "2,0,0,0",
                         "--t-end", "10")
    rows = [[float(v) for v in line.split(",")] for line in out.splitlines()[1:]]
    assert code == 0 and len(rows) == 101
    assert all(abs(row[2] - row[0]) < 1e-12 for row in rows)
    assert max(json.loads(err)["drift"].values()) < 1e-8


def test_zero_field_gives_a_constant_trajectory(capsys):
    _, out, _ = run(capsys, "flow", "--builtin", "oscillator", "--field", "hamiltonian:0", "--x0", "0.7,0.2",
                    "--t-end", "1")
    rows = out.splitlines()[1:]
    assert {r.split(",", 1)[1] for r in rows} == {"0.69999999999999996,0.20000000000000001"}
