import json
import subprocess
import sys

import pytest

from contentlab.cli import main


def run(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "contentlab.cli", *args], capture_output=True,
                          text=True, cwd=cwd)


def test_content_writes_reports(tmp_path):
    out = tmp_path / "r"
    res = run("content", "--map", "zoo:projection", "--K", "3", "--out", str(out))
    assert res.returncode == 0, res.stderr
    rep = json.loads(res.stdout)
    assert rep["upper"] == pytest.approx(1.0) and rep["lower"] == 1.0 and rep["sandwich"]
    names = {p.name for p in out.iterdir()}
    assert {"report.json", "report.csv", "dp_certificate.json", "faces_certificate.json",
            "map.json"} <= names
    assert (out / "report.csv").read_text().startswith("# schema 1\n")


def test_reports_are_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["content", "--map", "zoo:random", "--param", "seed=3", "--K", "3",
                     "--out", str(d)]) == 0
    for name in ("report.json", "report.csv", "dp_certificate.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_verify_in_fresh_process(tmp_path):
    out = tmp_path / "r"
    assert run("certify", "--map", "zoo:projection", "--K", "3", "--out", str(out)).returncode == 0
    for cert in ("positive_certificate.json", "witness.json", "dp_certificate.json",
                 "faces_certificate.json"):
        res = run("verify", str(out / cert), str(out / "map.json"))
        assert res.returncode == 0, res.stdout
        assert json.loads(res.stdout)["passed"]


def test_verify_failure_exit_code(tmp_path):
    out = tmp_path / "r"
    assert main(["content", "--map", "zoo:projection", "--K", "2", "--out", str(out)]) == 0
    other = tmp_path / "fold.json"
    assert main(["zoo", "export", "fold", "--K", "2", "--out", str(other)]) == 0
    assert main(["verify", str(out / "faces_certificate.json"), str(other)]) == 2


def test_usage_errors_exit_one(tmp_path, capsys):
    assert main(["content", "--map", "zoo:nothing"]) == 1
    assert main(["content", "--map", str(tmp_path / "missing.json")]) == 1
    assert main(["content", "--map", "zoo:projection", "--K", "2", "--Lmax", "5"]) == 1
    assert main(["content", "--map", "zoo:projection", "--tol", "-1"]) == 1
    assert main(["md", "--map", "zoo:projection", "--cube", "x"]) == 1
    assert run("content", "--bogus").returncode == 1
    assert "error" in capsys.readouterr().err


def test_zoo_export_writes_factorization(tmp_path):
    out = tmp_path / "star.json"
    assert main(["zoo", "export", "star_tree", "--K", "2", "--out", str(out)]) == 0
    assert (tmp_path / "star.factorization.json").exists()


def test_goodcube_and_md(capsys):
    assert main(["goodcube", "--map", "zoo:constant", "--K", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["found"] is False
    assert main(["md", "--map", "zoo:fold", "--K", "3", "--cube", "1:0,0", "--C0", "3"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["bracket_ok"] and rep["clipped"]


def test_continuity_family(capsys):
    assert main(["continuity", "--family", "shrink", "--count", "4", "--K", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["consistent"] and len(rep["rows"]) == 4
    assert main(["continuity"]) == 1
