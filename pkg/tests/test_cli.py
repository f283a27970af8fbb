import json

import numpy as np
import pytest

from dpgeom.cli import dumps, main


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    return {
        "ball": write("ball.json", {"kind": "ball", "dim": 4, "scale": 1.0}),
        "l1": write("l1.json", {"kind": "cross_polytope", "dim": 8, "scale": 1.0}),
        "workload": write("w.json", {"m": 2, "universe": 4, "matrix": [[0, 1, 0, 1], [0, 0, 1, 1]]}),
        "elements": write("e.json", {"elements": [1, 3, 3]}),
        "points": write("p.json", {"points": [[0.5, 0.0, 0.0, 0.0], [0.0, -0.5, 0.0, 0.0]]}),
        "mp_points": write("mp.json", {"points": [[0.5, 0.2], [0.1, 0.3]]}),
        "bad": write("bad.json", {"kind": "vpolytope", "dim": 2, "vertices": [[1.0, "x"]]}),
        "dir": tmp_path,
    }


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out.read_text() if out.exists() else None


def test_width_report(files):
    code, text = run(["width", "--body", files["ball"], "--seed", "1", "--samples", "5000"], files["dir"])
    assert code == 0
    report = json.loads(text)
    assert report["config"]["seed"] == 1
    assert report["results"]["full_dimensional"] is True
    assert report["results"]["ell_star"]["value"] == pytest.approx(1.88, abs=0.05)


def test_seed_is_mandatory(files, capsys):
    assert main(["width", "--body", files["ball"]]) == 2


def test_malformed_input_exit_codes(files):
    assert main(["width", "--body", files["bad"], "--seed", "0"]) == 2
    assert main(["width", "--body", str(files["dir"] / "missing.json"), "--seed", "0"]) == 2
    assert main(["compare", "--body", files["l1"], "--seed", "0", "--n-grid", "10:5:1"]) == 2


def test_domain_error_exit_code(files):
    assert main(["bounds", "--body", files["ball"], "--seed", "0", "--alpha", "2"]) == 3
    assert main(["mechanism", "--body", files["ball"], "--db", files["points"], "--seed", "0", "--eps", "-1"]) == 3


def test_mechanism_json_and_csv(files):
    args = ["mechanism", "--body", files["ball"], "--db", files["points"], "--seed", "4", "--trials", "3"]
    code, text = run(args, files["dir"], "m.json")
    assert code == 0
    res = json.loads(text)["results"]
    assert len(res["errors"]) == 3 and res["declared_eps"] == 1.0
    code, csv = run(args + ["--format", "csv"], files["dir"], "m.csv")
    lines = csv.splitlines()
    assert lines[0].startswith("# config: ")
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "trial,error,output_0,output_1,output_2,output_3"


def test_query_release_with_exact_inner_is_exact(files):
    args = ["mechanism", "--mech", "qr-from-meanpoint", "--inner", "exact", "--workload", files["workload"],
            "--db", files["elements"], "--seed", "0"]
    code, text = run(args, files["dir"])
    res = json.loads(text)["results"]
    np.testing.assert_allclose(res["outputs"][0], [1.0, 2 / 3], atol=1e-15)
    assert res["declared_eps"] == 0.0


def test_reduce_meanpoint_direction(files):
    args = ["reduce", "--workload", files["workload"], "--db", files["mp_points"], "--inner", "exact",
            "--seed", "2", "--trials", "400"]
    code, text = run(args, files["dir"])
    assert code == 0
    res = json.loads(text)["results"]
    assert res["direction"] == "meanpoint-from-qr"
    assert res["max_support"] <= 3
    assert res["second_moment"] <= 1.1 * res["sampling_bound_4R2_over_n"]


def test_compare_and_samplecomplexity(files):
    code, text = run(["compare", "--body", files["l1"], "--seed", "1", "--n-grid", "50:150:50", "--trials", "50",
                      "--samples", "2000"], files["dir"], "c.json")
    assert code == 0
    rows = json.loads(text)["table"]["rows"]
    assert [r[0] for r in rows] == [50, 100, 150]
    code, text = run(["samplecomplexity", "--body", files["ball"], "--seed", "1", "--alpha", "0.5", "--trials", "50"],
                     files["dir"], "s.json")
    res = json.loads(text)["results"]
    assert res["error_at_n"] <= 0.5 < res["error_below"]


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_replay_is_byte_identical(files, fmt):
    args = ["bounds", "--body", files["l1"], "--seed", "5", "--samples", "3000", "--format", fmt]
    code, text = run(args, files["dir"], "r1")
    assert code == 0
    code = main(["replay", str(files["dir"] / "r1"), "--out", str(files["dir"] / "r2")])
    assert code == 0
    assert (files["dir"] / "r2").read_bytes() == (files["dir"] / "r1").read_bytes()


def test_dumps_uses_full_precision():
    assert dumps(0.1) == "0.10000000000000001"
    assert json.loads(dumps({"a": [1.0 / 3, 2], "b": None})) == {"a": [1.0 / 3, 2], "b": None}
