import csv
import json

import pytest

from nactnet.cli import main
from nactnet.pwl import n_function, save_function


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip()
    return code, (json.loads(out) if out.startswith("{") else out)


def test_compile_and_verify(tmp_path, capsys):
    save_function(n_function(), tmp_path / "f.json")
    code, res = run(capsys, "compile", "--in", str(tmp_path / "f.json"), "--out", str(tmp_path / "n.json"))
    assert code == 0 and res["passed"]
    code, res = run(capsys, "verify", "--net", str(tmp_path / "n.json"), "--fn", str(tmp_path / "f.json"))
    assert code == 0 and res["max_abs_error"] <= 1e-12


def test_random_fn_then_compile(tmp_path, capsys):
    code, res = run(capsys, "--seed", "5", "random-fn", "--k", "6", "--out", str(tmp_path / "r.json"))
    assert code == 0
    code, res = run(capsys, "compile", "--in", str(tmp_path / "r.json"))
    assert code == 0 and res["k"] == 6


def test_verify_mismatch_exits_1(tmp_path, capsys):
    from nactnet.pwl import CpwlFunction
    save_function(n_function(), tmp_path / "f.json")
    save_function(CpwlFunction([0.0], [1.0, -1.0], (0.0, 0.0)), tmp_path / "g.json")
    run(capsys, "compile", "--in", str(tmp_path / "g.json"), "--out", str(tmp_path / "n.json"))
    code, res = run(capsys, "verify", "--net", str(tmp_path / "n.json"), "--fn", str(tmp_path / "f.json"))
    assert code == 1 and not res["passed"]


def test_invalid_inputs_exit_2(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    assert run(capsys, "compile", "--in", str(tmp_path / "bad.json"))[0] == 2
    assert run(capsys, "compile", "--in", str(tmp_path / "missing.json"))[0] == 2
    (tmp_path / "steep.json").write_text(json.dumps({"breakpoints": [0.0], "slopes": [2.0, 0.0], "anchor": [0.0, 0.0]}))
    assert run(capsys, "compile", "--in", str(tmp_path / "steep.json"))[0] == 2
    assert main(["nope"]) == 2
    capsys.readouterr()


def test_grad_check_and_audit(capsys):
    code, res = run(capsys, "grad-check", "--width", "4", "--depth", "3")
    assert code == 0 and res["max_rel_error"] <= 1e-5
    code, res = run(capsys, "audit", "--layer-type", "soc", "--width", "4", "--depth", "3", "--trials", "200")
    assert code == 0 and res["passed"]


def test_train_and_certify(tmp_path, capsys):
    out = tmp_path / "run"
    code, res = run(capsys, "train", "--epochs", "2", "--width", "8", "--depth", "3",
                    "--audit-trials", "100", "--out", str(out))
    assert code == 0
    with open(out / "history.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and "cra36" in rows[0]
    code, res = run(capsys, "certify", "--net", str(out / "checkpoint.json"), "--out", str(tmp_path / "c.csv"))
    assert code == 0 and 0.0 <= res["accuracy"] <= 1.0
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[-1].startswith("all")


def test_certify_missing_cifar(tmp_path, capsys):
    out = tmp_path / "run"
    run(capsys, "train", "--epochs", "1", "--width", "4", "--depth", "2", "--audit-trials", "10",
        "--out", str(out))
    code, res = run(capsys, "certify", "--net", str(out / "checkpoint.json"), "--data-dir", str(tmp_path))
    assert code == 2 and res["error"] == "DatasetError"


@pytest.mark.slow
def test_fit_toy(tmp_path, capsys):
    code, res = run(capsys, "fit-toy", "--epochs", "5", "--out", str(tmp_path / "toy"))
    assert code == 0
    assert (tmp_path / "toy" / "learned.json").is_file()
    assert len((tmp_path / "toy" / "history.csv").read_text().splitlines()) == 6
