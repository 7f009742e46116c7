import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qsezoo import __version__, reconstruct, steering
from qsezoo.cli import main, read_points_csv
from qsezoo.states import make_state


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_qse_compute_rho4(capsys):
    code, doc = run_json(capsys, ["qse", "compute", "--state", "rho4", "--party", "B_given_A"])
    assert code == 0
    assert doc["result"]["shape"] == "ellipsoid"
    # the reference value 0.5214 is 1.3e-4 above the exact 112 pi / 675
    assert abs(doc["result"]["measure"] - 112 * math.pi / 675) < 1e-4
    assert abs(doc["result"]["measure"] - 0.5214) < 2e-4
    assert doc["version"] == __version__ and doc["seed"] == 0
    assert doc["config"]["state"] == "rho4"


def test_qse_compute_rho6(capsys):
    code, doc = run_json(capsys, ["qse", "compute", "--state", "rho6", "--party", "B_given_A"])
    assert code == 0
    assert doc["result"]["shape"] == "needle"
    assert doc["result"]["measure_kind"] == "length"
    assert doc["result"]["measure"] == 2


def test_config_echoes_resolved_parameters(capsys):
    _, doc = run_json(capsys, ["state", "show", "--state", "rho3"])
    assert doc["config"]["theta"] == 0.3 and doc["config"]["p"] == 0.55
    assert doc["result"]["diagnostics"]["is_valid"] is True


def test_json_is_deterministic(capsys):
    argv = ["simulate", "tomography", "--state", "rho8", "--events", "2000", "--seed", "5"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first
    main(["simulate", "tomography", "--state", "rho8", "--events", "2000", "--seed", "6"])
    assert capsys.readouterr().out != first


def test_twelve_significant_digits(capsys):
    _, doc = run_json(capsys, ["qse", "compute", "--state", "rho4"])
    assert doc["result"]["measure"] == float(f"{112 * math.pi / 675:.12g}")


def test_usage_errors_exit_2(capsys):
    assert main(["qse", "compute", "--state", "rho42"]) == 2
    assert main(["qse", "compute", "--bogus"]) == 2
    assert main(["qse", "compute", "--party", "B|A"]) == 2


def test_numeric_error_exit_3(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([[[1.0 if i == j == 0 else (-0.5 if i == j == 1 else 0.0), 0.0]
                                for j in range(4)] for i in range(4)]))
    code = main(["state", "show", "--state", str(bad)])
    assert code == 3
    doc = json.loads(capsys.readouterr().out)
    assert doc["error"] == "InvalidStateError"
    assert main(["qse", "compute", "--state", "rho2", "--p", "1.5"]) == 3


def test_custom_state_file(capsys, tmp_path):
    rho = np.diag([0.5, 0, 0, 0.5])
    path = tmp_path / "rho6.json"
    path.write_text(json.dumps({"rho": [[[float(x), 0.0] for x in row] for row in rho]}))
    code, doc = run_json(capsys, ["qse", "compute", "--state", str(path)])
    assert code == 0
    assert doc["result"]["shape"] == "needle"


def test_csv_round_trip(capsys, tmp_path):
    csv_path = tmp_path / "pts.csv"
    assert main(["qse", "sample", "--state", "rho4", "--n", "200", "--format", "csv",
                 "--out", str(csv_path)]) == 0
    pts = read_points_csv(str(csv_path))
    assert pts.shape == (200, 3)
    code, doc = run_json(capsys, ["qse", "fit", "--points", str(csv_path)])
    assert code == 0
    points = steering.sample_surface(make_state("rho4"), "B|A", 200, 0)
    xyz = np.array([p.bloch for p in points])
    np.testing.assert_array_equal(xyz, pts)
    res = reconstruct.extract_geometry(reconstruct.fit_quadric(xyz), xyz)
    fit = reconstruct.extract_geometry(reconstruct.fit_quadric(pts), pts)
    np.testing.assert_allclose(fit.center, res.center, atol=1e-12)
    np.testing.assert_allclose(fit.semiaxes, res.semiaxes, atol=1e-12)
    assert abs(doc["result"]["fit"]["measure"] - res.measure) < 1e-11


def test_sample_json_and_obj(capsys, tmp_path):
    code, doc = run_json(capsys, ["qse", "sample", "--state", "rho1", "--n", "5", "--format", "json"])
    assert code == 0 and len(doc["result"]["points"]) == 5
    obj = tmp_path / "mesh.obj"
    assert main(["qse", "sample", "--state", "rho8", "--format", "obj", "--out", str(obj)]) == 0
    lines = obj.read_text().splitlines()
    verts = [l for l in lines if l.startswith("v ")]
    faces = [l for l in lines if l.startswith("f ")]
    assert len(verts) == 32 * 15 + 2
    assert len(faces) == 2 * 32 * 15
    idx = np.array([[int(t) for t in f.split()[1:]] for f in faces])
    assert idx.min() == 1 and idx.max() == len(verts)


def test_qse_fit_icosahedron(capsys):
    code, doc = run_json(capsys, ["qse", "fit", "--state", "rho8", "--party", "A_given_B",
                                  "--rotation-seed", "4"])
    assert code == 0
    assert doc["result"]["fit"]["shape"] == "ellipse"
    assert abs(doc["result"]["fit"]["measure"] - math.pi / 9) < 1e-6


def test_report_zoo(capsys):
    code, doc = run_json(capsys, ["report", "zoo"])
    assert code == 0
    zoo = doc["result"]["zoo"]
    assert len(zoo) == 10
    types = [e["type"] for e in zoo]
    assert types == ["Ent. & Comp."] * 2 + ["Sep. & Comp."] * 2 + ["Ent. & Comp."] * 2 + [
        "Sep. & Incomp.", "Sep. & Comp.", "Sep. & Comp.", "Sep. & Incomp."]
    rho5 = zoo[6]["ellipsoids"]["B_given_A"]["green_points"]
    assert rho5[0]["bloch"] == [0, 0, float(f"{1 / 3:.12g}")]
    assert rho5[1]["bloch"] == [0, 0, -1]


def test_report_tables_small(capsys):
    code, doc = run_json(capsys, ["report", "tables", "--events", "2000", "--samples", "3", "--n", "50"])
    assert code == 0
    res = doc["result"]
    assert len(res["fidelities"]) == 10
    assert len(res["werner_ellipsoids"]) == 6
    assert [r["state"] for r in res["icosahedron_fits"]] == ["rho4", "rho8", "rho6"]


def test_module_entry_point(tmp_path):
    out = tmp_path / "o.json"
    proc = subprocess.run([sys.executable, "-m", "qsezoo", "qse", "compute", "--state", "rho7",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["result"]["shape"] == "pancake"


@pytest.mark.parametrize("argv", [["--version"], ["qse", "compute", "--help"]])
def test_version_and_help_exit_zero(argv, capsys):
    assert main(argv) == 0
