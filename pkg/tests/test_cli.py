import json
import subprocess
import sys

import numpy as np
import pytest

from qrecall import formats
from qrecall.cli import main
from qrecall.quantum import KET0, KET_PLUS, projector

OBLIVIOUS = {"n": 2, "alphabets": [2, 2], "info": [{"gen": "constant"}, {"gen": "constant"}]}
RECALL = {"n": 2, "alphabets": [2, 2], "info": [{"gen": "constant"}, {"gen": "perfect-recall"}]}
ANTI = {"alphabets": [2, 2], "probs": [0, 0.5, 0.5, 0]}


@pytest.fixture
def files(tmp_path):
    def write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
        return str(path)

    return write


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_check_infeasible_exits_one_with_witness(capsys, files):
    code, doc = run(capsys, "check", "--process", files("p.json", OBLIVIOUS), "--target", files("t.json", ANTI))
    assert code == 1
    assert doc == {"feasible": False, "witness": {"k": 2, "y": 0, "h": [0], "h2": [1], "gap": 1.0}}


def test_check_feasible_returns_certificate(capsys, files):
    code, doc = run(capsys, "check", "--process", files("p.json", RECALL), "--target", files("t.json", ANTI))
    assert code == 0 and doc["feasible"]
    assert doc["certificate"]["tables"][1] == [[0, 1], [1, 0]]


def test_eval_classical(capsys, files):
    model = {"tables": [[[0.3, 0.7]], [[0.2, 0.8]]]}
    code, doc = run(capsys, "eval", "classical", "--process", files("p.json", OBLIVIOUS), "--model", files("m.json", model))
    assert code == 0
    np.testing.assert_allclose(doc["probs"], [0.06, 0.24, 0.14, 0.56], atol=1e-15)


def test_eval_latent(capsys, files):
    model = {"latent_probs": [0.5, 0.5], "deterministic": [[0, 1], [1, 0]]}
    code, doc = run(capsys, "eval", "latent", "--process", files("p.json", OBLIVIOUS), "--model", files("m.json", model))
    assert code == 0 and doc["probs"] == [0, 0.5, 0.5, 0]


def test_example_bundle_verifies(capsys, files):
    code, bundle = run(capsys, "construct", "example", "illex2")
    assert code == 0
    path = files("b.json", bundle)
    code, doc = run(capsys, "verify", "--process", path, "--model", path, "--target", path)
    assert code == 0 and doc["passed"] and doc["max_abs_error"] <= 1e-12
    code, bundle = run(capsys, "eval", "quantum", "--process", path, "--model", path)
    np.testing.assert_allclose(bundle["probs"], ANTI["probs"], atol=1e-12)


def test_verify_failure_exits_one(capsys, files):
    _, bundle = run(capsys, "construct", "example", "illex2")
    path = files("b.json", bundle)
    uniform = files("u.json", {"alphabets": [2, 2], "probs": [0.25] * 4})
    code, doc = run(capsys, "verify", "--process", path, "--model", path, "--target", uniform)
    assert code == 1 and not doc["passed"]
    assert doc["max_abs_error"] == pytest.approx(0.25)


def test_non_complete_povm_is_input_error(capsys, files):
    _, bundle = run(capsys, "construct", "example", "illex2")
    bundle["model"]["povms"][0][0] = [formats.dump_matrix(2 * np.eye(2))]
    path = files("b.json", bundle)
    code, doc = run(capsys, "eval", "quantum", "--process", path, "--model", path)
    assert code == 2
    assert doc["error"]["type"] == "CompletenessError"
    assert doc["error"]["magnitude"] == pytest.approx(1.0)


def test_missing_prefix_error_names_stage_and_prefix(capsys, files):
    bad = {"n": 2, "alphabets": [2, 2], "info": [{"gen": "constant"}, {"map": {"0": 0}}]}
    code, doc = run(capsys, "check", "--process", files("p.json", bad), "--target", files("t.json", ANTI))
    assert code == 2
    assert "stage 2" in doc["error"]["message"] and "(1)" in doc["error"]["message"]


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["construct", "example", "nope"],
        ["check", "--target", "nowhere.json"],
        ["fit", "--metric", "hellinger"],
        ["check", "--process", "/does/not/exist.json", "--target", "x"],
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    code, doc = run(capsys, *argv)
    assert code == 2 and "error" in doc


def test_fit_reports_distance(capsys, files):
    code, doc = run(
        capsys, "fit", "--process", files("p.json", OBLIVIOUS), "--target", files("t.json", ANTI),
        "--metric", "l2", "--restarts", "1", "--seed", "3",
    )
    assert code == 0
    assert doc["metric"] == "L2" and doc["distance"] == pytest.approx(0.5, abs=1e-3)


def test_construct_thm1_and_diag_universal(capsys, files):
    proc = files("p.json", OBLIVIOUS)
    latent = files("m.json", {"latent_probs": [0.5, 0.5], "deterministic": [[0, 1], [1, 0]]})
    code, bundle = run(capsys, "construct", "thm1", "--process", proc, "--model", latent)
    assert code == 0 and bundle["target"]["probs"] == ANTI["probs"]
    path = files("b.json", bundle)
    assert run(capsys, "verify", "--process", path, "--model", path, "--target", path)[0] == 0
    code, bundle = run(capsys, "construct", "diag-universal", "--process", proc, "--target", files("t.json", ANTI))
    path = files("b2.json", bundle)
    assert code == 0 and bundle["model"]["dims"] == [4, 4]
    assert run(capsys, "verify", "--process", path, "--model", path, "--target", path)[0] == 0


def test_construct_thm2_diagnostics(capsys, files):
    r = 2**-0.5
    spec = {"latent_probs": [0.5, 0.5], "g": [0, 1], "h": [1, 0], "basis_A": [[1, 0], [0, 1]], "states_B": [[r, r], [r, -r]]}
    code, bundle = run(capsys, "construct", "thm2", "--spec", files("s.json", spec))
    assert code == 0
    assert bundle["diagnostics"]["commutation_witness"] < 1e-12
    assert bundle["diagnostics"]["declared_basis_off_diagonal"] == pytest.approx(0.5)
    spec["states_B"] = [[1, 0], [r, r]]
    code, doc = run(capsys, "construct", "thm2", "--spec", files("s2.json", spec))
    assert code == 2 and doc["error"]["type"] == "ConstructionError"


def test_discord_and_witness(capsys, files):
    rho = 0.5 * (np.kron(projector(KET0), projector(KET0)) + np.kron(projector([0, 1]), projector(KET_PLUS)))
    state = files("s.json", {"dims": [2, 2], "state": formats.dump_matrix(rho)})
    code, doc = run(capsys, "discord", "--state", state, "--grid", "64")
    assert code == 0 and doc["discord"] > 0.19
    code, doc = run(capsys, "discord", "--state", state, "--side", "A", "--grid", "64")
    assert doc["discord"] < 1e-9
    r = 2**-0.5
    code, doc = run(capsys, "witness-cc", "--states", files("e.json", {"vectors": [[1, 0], [r, r]]}))
    assert code == 0 and doc["witness"] == pytest.approx(0.5) and doc["commuting"] is False


def test_output_is_byte_identical_across_processes(tmp_path):
    (tmp_path / "p.json").write_text(json.dumps(OBLIVIOUS))
    (tmp_path / "t.json").write_text(json.dumps(ANTI))
    argv = [sys.executable, "-m", "qrecall", "fit", "--process", "p.json", "--target", "t.json",
            "--metric", "l2", "--restarts", "1", "--seed", "11", "--max-iter", "20"]
    outs = [subprocess.run(argv, cwd=tmp_path, capture_output=True, check=True).stdout for _ in range(2)]
    assert outs[0] == outs[1] and outs[0]


def test_human_format_is_indented(capsys):
    assert main(["construct", "example", "diagonal-flip", "--format", "human"]) == 0
    assert capsys.readouterr().out.startswith('{\n  "model"')
