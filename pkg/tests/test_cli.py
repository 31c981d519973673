import csv
import json
import math

import numpy as np
import pytest

from edgesdf.cli import STRESS_COLUMNS, main, stress_inputs
from edgesdf.data import PointCloud
from edgesdf.fileio import load_cloud, save_cloud
from edgesdf.mesh import sample_segments, square_polyline

TINY = ["--set", "model.input_dim=2", "--set", "model.hidden_width=16", "--set", "model.num_hidden_layers=2",
        "--set", "model.skip_layers=", "--set", "train.iterations=25", "--set", "train.batch_size=32",
        "--set", "metrics.samples=500", "--seed", "3", "--deterministic"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def square_cloud(tmp_path_factory):
    d = tmp_path_factory.mktemp("square")
    sq = square_polyline(0.5)
    pts = sample_segments(sq.vertices[sq.faces], 200, np.random.default_rng(0))
    path = d / "square.xyz"
    save_cloud(path, PointCloud(pts * 3.0 + 1.0))
    return path


@pytest.fixture(scope="module")
def fitted(square_cloud, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert main(["fit", str(square_cloud), "-o", str(out)] + TINY) == 0
    return out


def test_missing_input_exits_1(tmp_path, capsys):
    missing = tmp_path / "nope.xyz"
    assert main(["fit", str(missing), "-o", str(tmp_path / "o")] + TINY) == 1
    assert str(missing) in capsys.readouterr().err


def test_bad_arguments_exit_1(tmp_path, square_cloud):
    with pytest.raises(SystemExit) as e:
        main(["fit", "--bogus"])
    assert e.value.code == 1
    assert main(["fit", str(square_cloud), "-o", str(tmp_path), "--set", "train.nope=1"]) == 1


def test_fit_writes_log_and_manifest(fitted, square_cloud):
    log = rows(fitted / "loss.csv")
    assert log[0] == ["step", "vanish", "eikonal", "laplacian", "total", "edge_fraction", "seconds"]
    assert len(log) == 1 + 25
    assert [int(r[0]) for r in log[1:]] == list(range(1, 26))
    assert all(float(r[6]) == 0.0 for r in log[1:])
    man = json.loads((fitted / "manifest.json").read_text())
    assert man["command"] == "fit" and man["seed"] == 3 and man["deterministic"] is True
    assert man["config"]["train"]["iterations"] == 25
    assert man["inputs"]["input"]["path"].endswith("square.xyz") and len(man["inputs"]["input"]["sha256"]) == 64
    assert "numpy" in man["versions"]


def test_fit_is_deterministic(square_cloud, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit", str(square_cloud), "-o", str(a)] + TINY) == 0
    assert main(["fit", str(square_cloud), "-o", str(b)] + TINY) == 0
    for name in ("model.ckpt", "loss.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_fit_does_not_touch_input(square_cloud, fitted):
    before = square_cloud.read_bytes()
    main(["fit", str(square_cloud), "-o", str(fitted.parent / "again")] + TINY)
    assert square_cloud.read_bytes() == before


def test_mesh_normals_edges_hist(fitted, square_cloud, tmp_path):
    ckpt = str(fitted / "model.ckpt")
    assert main(["mesh", ckpt, "-o", str(tmp_path / "m.obj"), "--resolution", "64"] + TINY) == 0
    assert (tmp_path / "m.obj").stat().st_size > 0
    assert (tmp_path / "m.obj.manifest.json").exists()

    assert main(["normals", ckpt, str(square_cloud), "-o", str(tmp_path / "n.xyz")] + TINY) == 0
    out = load_cloud(tmp_path / "n.xyz")
    assert len(out) == len(load_cloud(square_cloud))
    assert np.allclose(np.linalg.norm(out.normals, axis=1), 1.0)

    assert main(["edges", ckpt, str(square_cloud), "-o", str(tmp_path / "e.csv"), "--tau", "1e30"] + TINY) == 0
    assert rows(tmp_path / "e.csv") == [["x", "y", "index", "laplacian"]]
    assert main(["edges", ckpt, str(square_cloud), "-o", str(tmp_path / "e0.csv"), "--tau", "1e-12"] + TINY) == 0
    assert len(rows(tmp_path / "e0.csv")) == 1 + 200

    assert main(["hist", ckpt, str(square_cloud), "-o", str(tmp_path / "h.csv"), "--bins", "8"] + TINY) == 0
    h = rows(tmp_path / "h.csv")
    assert h[0] == ["bin_lo", "bin_hi", "count"] and sum(int(r[2]) for r in h[1:]) == 200


def test_checkpoint_config_mismatch_exits_1(fitted, tmp_path, capsys):
    code = main(["mesh", str(fitted / "model.ckpt"), "-o", str(tmp_path / "m.obj"),
                 "--set", "model.hidden_width=32"])
    assert code == 1
    assert "hidden_width" in capsys.readouterr().err


def test_eval_identical_sets(square_cloud, tmp_path):
    pts = load_cloud(square_cloud).points
    edge_csv = tmp_path / "gt_edges.csv"
    edge_csv.write_text("x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in pts[:20]))
    prefix = tmp_path / "rep"
    assert main(["eval", "--pred", str(square_cloud), "--gt", str(square_cloud), "--pred-edges", str(edge_csv),
                 "--gt-edges", str(edge_csv), "-o", str(prefix)] + TINY) == 0
    header, row = rows(str(prefix) + ".csv")
    rep = dict(zip(header, map(float, row)))
    assert rep["chamfer_mean"] == 0 and rep["hausdorff"] == 0 and rep["ecd"] == 0
    assert rep["edge_precision"] == rep["edge_recall"] == rep["edge_iou"] == 1.0
    assert math.isnan(rep["angle_mean"])
    assert (tmp_path / "rep.txt").exists()


def test_eval_oracle_agrees(fitted, square_cloud, tmp_path):
    mesh = tmp_path / "m.ply"
    assert main(["mesh", str(fitted / "model.ckpt"), "-o", str(mesh), "--resolution", "64"] + TINY) == 0
    fast, slow = tmp_path / "fast", tmp_path / "slow"
    assert main(["eval", "--pred", str(mesh), "--gt", str(square_cloud), "-o", str(fast)] + TINY) == 0
    assert main(["eval", "--pred", str(mesh), "--gt", str(square_cloud), "-o", str(slow), "--oracle"] + TINY) == 0
    a, b = rows(str(fast) + ".csv")[1], rows(str(slow) + ".csv")[1]
    for x, y in zip(a, b):
        assert float(x) == pytest.approx(float(y), abs=1e-12, nan_ok=True)


def test_eval_missing_file(tmp_path):
    assert main(["eval", "--pred", str(tmp_path / "a.xyz"), "--gt", str(tmp_path / "b.xyz"),
                 "-o", str(tmp_path / "r")]) == 1


def test_stress_single_cell_equals_fit_and_eval(tmp_path):
    out = tmp_path / "stress"
    assert main(["stress", "--shapes", "square", "--noise", "0.01", "--density", "300", "-o", str(out)] + TINY) == 0
    table = rows(out / "stress.csv")
    assert table[0] == list(STRESS_COLUMNS) and len(table) == 2
    row = dict(zip(table[0], table[1]))
    assert row["shapes_ok"] == "1" and row["shapes_failed"] == "0"

    manual = tmp_path / "manual"
    inp, gt = stress_inputs("square", 0.01, 300, 3, manual)
    assert main(["fit", inp, "-o", str(manual / "fit")] + TINY) == 0
    assert main(["mesh", str(manual / "fit" / "model.ckpt"), "-o", str(manual / "mesh.ply")] + TINY) == 0
    assert main(["eval", "--pred", str(manual / "mesh.ply"), "--gt", gt, "-o", str(manual / "rep")] + TINY) == 0
    header, vals = rows(str(manual / "rep") + ".csv")
    rep = dict(zip(header, vals))
    assert float(row["chamfer_mean"]) == float(rep["chamfer_mean"])
    assert float(row["hausdorff_mean"]) == float(rep["hausdorff"])


def test_stress_grid_shape_and_partial_failure(tmp_path):
    out = tmp_path / "grid"
    code = main(["stress", "--shapes", f"square,{tmp_path / 'missing.obj'}", "--noise", "0,0.01",
                 "--density", "100,150", "-o", str(out)] + TINY + ["--set", "train.iterations=3"])
    assert code == 0
    table = rows(out / "stress.csv")
    assert len(table) == 1 + 2 * 2
    for r in table[1:]:
        cell = dict(zip(table[0], r))
        assert cell["shapes_ok"] == "1" and cell["shapes_failed"] == "1"
        assert "missing.obj" in cell["failures"]
    assert len(rows(out / "cases.csv")) == 1 + 2 * 2 * 2


@pytest.mark.slow
def test_stress_noise_trend_on_cube(tmp_path):
    # scaled-down nets and grids; only the direction of the noise effect is checked
    small = ["--set", "model.hidden_width=64", "--set", "train.iterations=1000", "--set", "mesh.resolution=64",
             "--set", "metrics.samples=5000", "--deterministic"]
    worse = 0
    for seed in range(5):
        out = tmp_path / f"seed{seed}"
        assert main(["stress", "--shapes", "cube", "--noise", "0,0.01", "--density", "2048", "-o", str(out),
                     "--seed", str(seed)] + small) == 0
        table = rows(out / "stress.csv")
        dc = {float(r[0]): float(r[table[0].index("chamfer_mean")]) for r in table[1:]}
        worse += dc[0.01] >= dc[0.0]
    assert worse >= 4
