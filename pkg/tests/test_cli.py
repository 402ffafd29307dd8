import json
import math
import subprocess
import sys

import pytest

from affine_sobolev import __version__, cli
from affine_sobolev import fields as F


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    return code, json.loads(out)


def test_constants(capsys):
    code, doc = run_json(capsys, "constants", "--p", "2", "--n", "2")
    assert code == 0
    assert doc["schema"] == 1 and doc["version"] == __version__
    assert doc["config"] == {"command": "constants", "n": 2, "p": 2.0}
    assert doc["report"]["sharp_constant"] == pytest.approx(3.544908, abs=1e-6)


def test_constants_alpha_for_large_p(capsys):
    _, doc = run_json(capsys, "constants", "--p", "3", "--n", "2")
    assert doc["report"]["alpha"] == pytest.approx(3.2540, abs=5e-4)
    assert doc["report"]["q"] == -6


def test_chain_cone(capsys):
    code, doc = run_json(capsys, "chain", "--field", "cone2d", "--p", "2")
    rep = doc["report"]
    assert code == 0 and rep["verdict"] == "pass"
    last = [l for l in rep["links"] if l["larger"] == "E_p_sym" and l["smaller"] == "sharp_times_ainfp"][0]
    assert last["margin"] == pytest.approx(0.3253, abs=5e-3)
    assert doc["config"]["resolution"] is None and doc["config"]["seed"] == 0
    assert rep["inputs"]["rule"]["resolution"] == 2048


def test_petty_square(capsys):
    code, doc = run_json(capsys, "petty", "--polytope", "builtin:square")
    assert code == 0
    assert doc["report"]["margin"] == pytest.approx(0.3923, abs=5e-4)
    assert doc["report"]["verdict"] == "pass"


def test_petty_without_vertices(capsys, tmp_path):
    path = tmp_path / "k.json"
    path.write_text(json.dumps({"n": 2, "facets": [{"normal": [1, 0], "area": 1}, {"normal": [-1, 0], "area": 1},
                                                   {"normal": [0, 1], "area": 1}, {"normal": [0, -1], "area": 1}]}))
    code, doc = run_json(capsys, "petty", "--polytope", str(path))
    assert code == 0 and doc["report"]["volume"] == "volume unavailable"


def test_energy_zero_field_is_not_failure(capsys, tmp_path):
    f = F.named_field("cone", cells=33).scaled(0.0)
    F.save_field(f, tmp_path / "zero.bin")
    code, doc = run_json(capsys, "energy", "--field", str(tmp_path / "zero.bin"), "--p", "2")
    assert code == 0
    assert doc["report"] == {"value": 0.0, "rule_tolerance": 0.0, "degenerate": True}


def test_energy_from_file_matches_builtin(capsys, tmp_path):
    F.save_field(F.named_field("two_bumps", cells=65), tmp_path / "tb.bin")
    _, a = run_json(capsys, "energy", "--field", str(tmp_path / "tb.bin"), "--p", "3", "--resolution", "256")
    _, b = run_json(capsys, "energy", "--field", "two_bumps", "--cells", "65", "--p", "3", "--resolution", "256")
    assert a["report"] == b["report"]


def test_sweep_and_csv(capsys):
    code, doc = run_json(capsys, "sweep", "--p", "2", "--n", "2", "--steps", "6")
    assert code == 0 and doc["report"]["family"] == "log"
    code, out, _ = run(capsys, "sweep", "--p", "2", "--n", "2", "--steps", "6", "--csv")
    lines = out.strip().splitlines()
    assert lines[0] == "step,eps,T,ratio" and len(lines) == 7


def test_sweep_regime_mismatch_is_input_error(capsys):
    code, _, err = run(capsys, "sweep", "--family", "log", "--p", "1", "--n", "2")
    assert code == 2 and "p = n" in err


def test_prop24_and_hsp(capsys):
    code, doc = run_json(capsys, "prop24", "--profile", '{"piecewise_linear": [[0, 1], [1, 0]]}', "--p", "3", "--n", "2")
    assert code == 0 and doc["report"]["links"][0]["margin"] == pytest.approx(0.4349, abs=1e-4)
    code, doc = run_json(capsys, "hsp", "--profile", '{"family": "one_minus_power", "params": {"r": 0.25}}', "--p", "3", "--n", "2")
    assert code == 0 and doc["report"]["verdict"] == "pass"


def test_infinite_values_serialize_as_strings(capsys):
    code, doc = run_json(capsys, "prop24", "--profile", '{"family": "one_minus_power", "params": {"r": 0.16666666666666666}}', "--p", "3", "--n", "2")
    assert code == 0
    assert doc["report"]["flags"]["ainfp_norm"] == "inf"


@pytest.mark.parametrize(
    "argv",
    [
        ("chain", "--field", "/nonexistent/field.bin", "--p", "2"),
        ("chain", "--field", "builtin:nope", "--p", "2"),
        ("prop24", "--profile", "{not json", "--p", "3", "--n", "2"),
        ("prop24", "--profile", '{"piecewise_linear": [[0, 1], [1, 0]]}', "--p", "2", "--n", "2"),
        ("hsp", "--profile", '{"family": "exponential"}', "--p", "3", "--n", "2"),
        ("petty", "--polytope", "nothing_here.json"),
    ],
)
def test_malformed_input_exit_2(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and err.startswith("error:")


def test_malformed_field_sidecar(capsys, tmp_path):
    F.save_field(F.named_field("cone", cells=17), tmp_path / "c.bin")
    (tmp_path / "c.bin").write_bytes(b"\0" * 16)
    code, _, err = run(capsys, "chain", "--field", str(tmp_path / "c.bin"), "--p", "2")
    assert code == 2


def test_failing_verdict_exit_1(capsys, monkeypatch):
    monkeypatch.setitem(cli.COMMANDS, "constants", lambda args: ({"verdict": "fail"}, False))
    code, _, _ = run(capsys, "constants", "--p", "2", "--n", "2")
    assert code == 1


def test_extremize(capsys):
    code, doc = run_json(capsys, "extremize", "--p", "2", "--n", "2", "--knots", "8", "--budget", "200")
    assert code == 0 and doc["report"]["evaluations"] <= 200
    assert 0 < doc["report"]["ratio"] <= 1 + 1e-8


def test_dumps_precision_and_specials():
    s = cli.dumps({"a": 0.1, "b": math.inf, "c": math.nan, "d": [1, 2.5], "e": True, "f": None})
    doc = json.loads(s)
    assert doc == {"a": 0.1, "b": "inf", "c": "nan", "d": [1, 2.5], "e": True, "f": None}
    assert "0.10000000000000001" in s


def test_byte_identical_output_across_processes():
    argv = [sys.executable, "-m", "affine_sobolev.cli", "chain", "--field", "two_bumps", "--cells", "65", "--p", "2.5",
            "--resolution", "256"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv + ["--threads", "1"], capture_output=True, check=True).stdout
    assert a == b and a


def test_reproduce_subset_writes_reports(capsys, tmp_path):
    code, out, err = run(capsys, "reproduce", "--only", "4,5", "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and set(doc["report"]["criteria"]) == {"4", "5"}
    assert sorted(p.name for p in tmp_path.iterdir()) == ["criterion_04.json", "criterion_05.json"]
