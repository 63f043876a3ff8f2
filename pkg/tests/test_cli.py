import json

import numpy as np
import pytest

from conftest import circle_points
from shrinker_spectra.cli import main
from shrinker_spectra.geometry import build_cross_section, write_curve_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_solve_writes_curve_and_certificate(capsys, workdir):
    code, out, _ = run(capsys, "solve", "--n", "512", "--out", "t")
    assert code == 0
    cert = json.loads((workdir / "t_certificate.json").read_text())
    assert 1.84 <= cert["sigma_length"] <= 1.86
    assert cert["passed"] and cert["n_points"] == 512
    assert json.loads(out) == cert
    assert (workdir / "t_curve.csv").read_text().startswith("r,z\n")


def test_solve_is_deterministic(capsys, workdir):
    run(capsys, "solve", "--n", "256", "--no-reference", "--out", "a")
    run(capsys, "solve", "--n", "256", "--no-reference", "--out", "b")
    assert (workdir / "a_curve.csv").read_bytes() == (workdir / "b_curve.csv").read_bytes()
    assert (workdir / "a_certificate.json").read_bytes() == (workdir / "b_certificate.json").read_bytes()


def test_solve_rejects_tiny_grid(capsys):
    code, _, err = run(capsys, "solve", "--n", "8")
    assert code == 3
    assert json.loads(err)["error"] == "UsageError"


def test_solve_bad_bracket_is_solver_failure(capsys):
    code, _, err = run(capsys, "solve", "--bracket", "5.0", "6.0")
    assert code == 2
    assert json.loads(err)["error"] == "NoSignChangeError"


def test_missing_input(capsys, workdir):
    code, _, err = run(capsys, "index", "--input", "nope.csv")
    assert code == 3
    assert json.loads(err)["exit_code"] == 3
    code, _, _ = run(capsys, "index")
    assert code == 3


def test_malformed_input(capsys, workdir):
    (workdir / "bad.csv").write_text("r,z\n1,x\n")
    code, _, err = run(capsys, "entropy", "--input", "bad.csv")
    assert code == 3 and json.loads(err)["error"] == "CurveFormatError"


def test_unknown_command_and_flag(capsys):
    assert run(capsys, "frobnicate")[0] == 3
    assert run(capsys, "solve", "--bogus")[0] == 3


def test_index_on_torus(capsys, torus_csv):
    code, out, _ = run(capsys, "index", "--input", str(torus_csv), "--n", "512")
    assert code == 0
    rep = json.loads(out)
    assert rep["counts"][:4] == [3, 2, 1, 0]
    assert rep["index_computed"] == 5 and rep["index_upper_fine"] == 29
    assert [m["bounds"]["upper"] for m in rep["per_mode"]][:4] == [7, 5, 5, 3]


def test_index_text_and_files(capsys, torus_csv, workdir):
    code, out, _ = run(capsys, "index", "--input", str(torus_csv), "--n", "512",
                       "--format", "text", "--out", "x")
    assert code == 0
    assert out == (workdir / "x_index.txt").read_text()
    assert out.splitlines()[0] == " k   i_k  lower  upper"
    json.loads((workdir / "x_index.json").read_text())


def test_index_on_circle_warns(capsys, workdir):
    write_curve_csv(workdir / "circle.csv", build_cross_section(circle_points(2.0, 0.0, 0.5, 256)))
    code, out, _ = run(capsys, "index", "--input", "circle.csv")
    assert code == 0
    rep = json.loads(out)
    assert any("not a critical point" in w for w in rep["warnings"])


def test_bound_violation_exit_code(capsys, torus_csv):
    # a huge zero tolerance hides every negative eigenvalue, so i_0 = 0 < 1
    code, _, err = run(capsys, "index", "--input", str(torus_csv), "--n", "256", "--tau", "100")
    assert code == 1
    doc = json.loads(err)
    assert doc["error"] == "BoundViolationError" and doc["k"] == 0


def test_verify_torus(capsys, torus_csv):
    code, out, _ = run(capsys, "verify", "--input", str(torus_csv))
    doc = json.loads(out)
    assert code == 0 and doc["passed"], [i for i in doc["items"] if not i["passed"]]
    names = {i["name"] for i in doc["items"]}
    assert {"eigenvalue_k0_-1", "eigenvalue_k1_-0.5", "eigenfunction_H_sigma_k0", "inertia_k4"} <= names


def test_verify_beyond_k_max(capsys, torus_csv):
    code, out, _ = run(capsys, "verify", "--input", str(torus_csv), "--n", "512", "--k-max", "6")
    items = {i["name"]: i for i in json.loads(out)["items"]}
    assert code == 0
    assert items["inertia_k6"]["passed"] and "k_max" in items["inertia_k6"]["note"]


def test_verify_jittered_curve(capsys, torus, workdir):
    rng = np.random.default_rng(0)
    pts = torus.points[::16] + 1e-2 * rng.standard_normal((128, 2))
    write_curve_csv(workdir / "jit.csv", build_cross_section(pts))
    code, out, _ = run(capsys, "verify", "--input", "jit.csv", "--n", "512")
    items = {i["name"]: i for i in json.loads(out)["items"]}
    assert code == 1
    assert not items["eigenfunction_H_sigma_k0"]["passed"]
    assert not items["eigenfunction_e_z_perp_k0"]["passed"]
    assert all(v["passed"] for k, v in items.items() if k.startswith("inertia"))


def test_entropy_and_bounds(capsys, torus_csv):
    code, out, _ = run(capsys, "entropy", "--input", str(torus_csv))
    doc = json.loads(out)
    assert code == 0 and doc["sigma_length"] > doc["entropy_lb_translation"]
    code, out, _ = run(capsys, "bounds", "--input", str(torus_csv))
    doc = json.loads(out)
    assert code == 0
    assert doc["index_upper_fine"] == 29 and doc["index_lower_fine_raw"] == -1
    code, out, _ = run(capsys, "bounds", "--input", str(torus_csv), "--format", "csv")
    assert out.splitlines()[1] == "0,1,7,0"


def test_spectrum_exports(capsys, torus_csv, workdir):
    code, out, _ = run(capsys, "spectrum", "--input", str(torus_csv), "--n", "128", "--k-max", "1",
                       "--out", "s", "--eigenfunctions", "2")
    assert code == 0
    docs = json.loads(out)
    assert [d["k"] for d in docs] == [0, 1]
    assert json.loads((workdir / "s_spectrum_k1.json").read_text()) == docs[1]
    assert (workdir / "s_eigenfunction_k1_j0.csv").read_text().startswith("s,u\n")
    code, out, _ = run(capsys, "spectrum", "--input", str(torus_csv), "--n", "128",
                       "--k-max", "0", "--format", "csv")
    assert out.splitlines()[0] == "k,j,eigenvalue" and len(out.splitlines()) == 129


def test_figure(capsys, torus_csv, workdir):
    code, _, _ = run(capsys, "figure", "--input", str(torus_csv), "--variation", "sigma_inv",
                     "--out", "f")
    assert code == 0
    assert 'id="quiver"' in (workdir / "f_quiver.svg").read_text()
    assert 'id="quiver"' not in (workdir / "f_curve.svg").read_text()
    first = (workdir / "f_quiver.svg").read_bytes()
    run(capsys, "figure", "--input", str(torus_csv), "--variation", "sigma_inv", "--out", "f")
    assert (workdir / "f_quiver.svg").read_bytes() == first


def test_figure_eigenfunction_length_checked(capsys, torus_csv, workdir):
    (workdir / "u.csv").write_text("s,u\n0,1\n1,2\n")
    code, _, err = run(capsys, "figure", "--input", str(torus_csv), "--eigenfunction", "u.csv")
    assert code == 3


def test_config_precedence(capsys, torus_csv, workdir):
    (workdir / "cfg.json").write_text(json.dumps({"n": 128, "format": "text", "k_max": 0}))
    code, out, _ = run(capsys, "spectrum", "--input", str(torus_csv), "--config", "cfg.json")
    assert code == 0 and out.startswith(" k  negative")
    code, out, _ = run(capsys, "spectrum", "--input", str(torus_csv), "--config", "cfg.json",
                       "--format", "json")
    docs = json.loads(out)
    assert docs[0]["n"] == 128 and len(docs) == 1


def test_config_errors(capsys, workdir):
    (workdir / "bad.json").write_text("{not json")
    assert run(capsys, "solve", "--config", "bad.json")[0] == 3
    (workdir / "unknown.json").write_text(json.dumps({"colour": "red"}))
    assert run(capsys, "solve", "--config", "unknown.json")[0] == 3
