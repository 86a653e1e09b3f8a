import json

import numpy as np
import pytest

from rbfxfer.harness.cli import main
from rbfxfer.io import read_field, read_points


def test_gen_writes_files(tmp_path):
    assert main(["gen", "--kind", "twist", "--grid", "3,3,3", "--q", "2", "--seed", "1", "--out", str(tmp_path)]) == 0
    pts = read_points(tmp_path / "points.csv")
    kind, F = read_field(tmp_path / "field.csv")
    assert pts.count == 216 and kind == "tensor" and F.shape == (216, 3, 3)
    kind, d = read_field(tmp_path / "displacement.csv")
    assert kind == "displacement" and d.shape == (64, 3)


def test_gen_without_displacement(tmp_path):
    assert main(["gen", "--kind", "randsmooth", "--grid", "2,2,2", "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "displacement.csv").exists()


@pytest.mark.parametrize("method", ["rbf-f-e", "rbf-f-svd", "rbf-d"])
def test_transfer(tmp_path, method):
    main(["gen", "--kind", "stretch", "--grid", "5,5,5", "--out", str(tmp_path / "src")])
    main(["gen", "--kind", "stretch", "--grid", "7,7,7", "--out", str(tmp_path / "dst")])
    if method == "rbf-d":
        src, field = "nodes.csv", "displacement.csv"
    else:
        src, field = "points.csv", "field.csv"
    rc = main([
        "transfer", "--src", str(tmp_path / "src" / src), "--src-field", str(tmp_path / "src" / field),
        "--dst", str(tmp_path / "dst" / "points.csv"), "--method", method,
        "--M", "2", "--alpha", "2.5", "--threads", "2", "--out", str(tmp_path / "out"),
    ])
    assert rc == 0
    kind, F = read_field(tmp_path / "out" / "field.csv")
    assert F.shape == (343, 3, 3)
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["methods"][0]["name"] == method and rep["config"]["alpha"] == 2.5


def test_transfer_scalar(tmp_path):
    (tmp_path / "s.csv").write_text("x,y,z\n0,0,0\n1,0,0\n0,1,0\n0,0,1\n")
    (tmp_path / "v.csv").write_text("value\n2\n2\n2\n2\n")
    (tmp_path / "d.csv").write_text("x,y,z\n0.2,0.2,0.2\n")
    rc = main(["transfer", "--src", str(tmp_path / "s.csv"), "--src-field", str(tmp_path / "v.csv"),
               "--dst", str(tmp_path / "d.csv"), "--method", "rbf-f-e", "--out", str(tmp_path / "o")])
    assert rc == 0
    kind, v = read_field(tmp_path / "o" / "field.csv")
    assert kind == "scalar" and v[0] == pytest.approx(2.0, abs=1e-9)


def test_run_exit_codes(tmp_path):
    cfg = {"src_grid": {"cells": [4, 4, 4]}, "dst_grid": {"cells": [6, 6, 6]}, "q_dst": 1}
    (tmp_path / "ok.json").write_text(json.dumps(cfg))
    assert main(["run", "--config", str(tmp_path / "ok.json"), "--out", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / "hist_rbf-f-svd.csv").exists()
    (tmp_path / "bad.json").write_text(json.dumps(dict(cfg, field_kind="randsmooth")))
    assert main(["run", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "b")]) == 2


def test_numeric_failure_in_transfer(tmp_path):
    (tmp_path / "s.csv").write_text("x,y,z\n0,0,0\n1,0,0\n")
    (tmp_path / "f.csv").write_text("F11,F12,F13,F21,F22,F23,F31,F32,F33\n1,0,0,0,1,0,0,0,1\n-1,0,0,0,1,0,0,0,1\n")
    rc = main(["transfer", "--src", str(tmp_path / "s.csv"), "--src-field", str(tmp_path / "f.csv"),
               "--dst", str(tmp_path / "s.csv"), "--method", "rbf-f-svd", "--M", "1", "--out", str(tmp_path / "o")])
    assert rc == 2
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["methods"][0]["status"] == "failed"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["gen", "--kind", "twist", "--grid", "3,3", "--out", "x"],
        ["gen", "--kind", "spiral", "--grid", "3,3,3", "--out", "x"],
        ["transfer", "--src", "a", "--src-field", "b", "--dst", "c", "--method", "nested-d", "--out", "o"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 1


def test_io_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    (tmp_path / "c.json").write_text('{"bogus": 1}')
    assert main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 1
    assert main(["transfer", "--src", str(tmp_path / "no.csv"), "--src-field", "x", "--dst", "y",
                 "--method", "rbf-f-e", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err
