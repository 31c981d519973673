import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from edgesdf.errors import ConfigError
from edgesdf.metrics import (MetricReport, chamfer, chamfer_bruteforce, edge_chamfer, edge_chamfer_bruteforce,
                             edge_pr_iou, edge_pr_iou_bruteforce, evaluate, hausdorff, hausdorff_bruteforce,
                             normal_angle_error)


def random_pair(rng):
    d = int(rng.integers(2, 4))
    a = rng.normal(size=(int(rng.integers(1, 501)), d))
    b = rng.normal(size=(int(rng.integers(1, 501)), d)) * rng.uniform(0.5, 2) + rng.normal(size=d)
    return a, b


def matcher_by_hand(pred, gt, r):
    # explicit double loop, independent of the vectorized brute-force helper
    tp = sum(any(np.linalg.norm(p - g) <= r for g in gt) for p in pred)
    rec = sum(any(np.linalg.norm(g - p) <= r for p in pred) for g in gt)
    fn = len(gt) - rec
    return tp / len(pred), rec / len(gt), tp / (tp + (len(pred) - tp) + fn)


def test_chamfer_examples():
    a = np.random.default_rng(0).normal(size=(30, 3))
    assert chamfer(a, a) == 0.0
    assert chamfer([[0.0, 0, 0]], [[1.0, 0, 0]]) == 1.0
    # Euclidean, not squared, with the half-sum convention
    assert chamfer([[0.0, 0, 0]], [[2.0, 0, 0], [3.0, 0, 0]]) == pytest.approx(0.5 * (2.0 + 2.5))


def test_hausdorff_examples():
    a = np.random.default_rng(1).normal(size=(30, 3))
    assert hausdorff(a, a) == 0.0
    assert hausdorff([[0.0, 0, 0], [2.0, 0, 0]], [[0.0, 0, 0]]) == 2.0


def test_empty_sets_raise():
    with pytest.raises(ValueError):
        chamfer(np.zeros((0, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        hausdorff(np.zeros((2, 3)), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        edge_chamfer(np.zeros((0, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        edge_pr_iou(np.zeros((2, 3)), np.zeros((0, 3)))


def test_agreement_with_bruteforce():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a, b = random_pair(rng)
        r = float(rng.uniform(0.05, 1.0))
        assert abs(chamfer(a, b) - chamfer_bruteforce(a, b)) < 1e-12
        assert abs(hausdorff(a, b) - hausdorff_bruteforce(a, b)) < 1e-12
        assert abs(edge_chamfer(a, b) - edge_chamfer_bruteforce(a, b)) < 1e-12
        assert np.allclose(edge_pr_iou(a, b, r), edge_pr_iou_bruteforce(a, b, r), rtol=0, atol=1e-12)


def test_pr_iou_against_hand_matcher():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pred = rng.random((int(rng.integers(1, 40)), 2))
        gt = rng.random((int(rng.integers(1, 40)), 2))
        assert np.allclose(edge_pr_iou(pred, gt, 0.1), matcher_by_hand(pred, gt, 0.1), rtol=0, atol=1e-15)


def test_pr_iou_examples():
    gt = np.random.default_rng(4).normal(size=(50, 3))
    assert edge_pr_iou(gt, gt, 1e-9) == (1.0, 1.0, 1.0)
    assert edge_pr_iou(gt + 100.0, gt, 0.5) == (0.0, 0.0, 0.0)
    assert edge_pr_iou(np.zeros((0, 3)), gt, 0.5) == (0.0, 0.0, 0.0)
    # radius is inclusive
    assert edge_pr_iou([[1.0, 0.0]], [[0.0, 0.0]], 1.0) == (1.0, 1.0, 1.0)
    # two predictions, one matches; three GT points, one recalled
    p, r, iou = edge_pr_iou([[0.0, 0.0], [5.0, 5.0]], [[0.0, 0.05], [9.0, 0.0], [0.0, 9.0]], 0.1)
    assert (p, r, iou) == (0.5, pytest.approx(1 / 3), pytest.approx(1 / 4))
    with pytest.raises(ConfigError):
        edge_pr_iou(gt, gt, 0.0)


def test_symmetry_and_ordering():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a, b = random_pair(rng)
        assert chamfer(a, b) == pytest.approx(chamfer(b, a), rel=1e-15)
        assert hausdorff(a, b) == hausdorff(b, a)
        assert hausdorff(a, b) >= chamfer(a, b) >= 0.0


def test_rigid_motion_invariance():
    rng = np.random.default_rng(6)
    for i in range(20):
        a = rng.normal(size=(200, 3))
        b = rng.normal(size=(150, 3))
        R = Rotation.random(random_state=i).as_matrix()
        t = rng.normal(size=3) * 3
        a2, b2 = a @ R.T + t, b @ R.T + t
        assert abs(chamfer(a, b) - chamfer(a2, b2)) < 1e-9
        assert abs(hausdorff(a, b) - hausdorff(a2, b2)) < 1e-9
        assert abs(edge_chamfer(a, b) - edge_chamfer(a2, b2)) < 1e-9


def test_normal_angle_examples():
    n = np.random.default_rng(7).normal(size=(20, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    assert normal_angle_error(n, n) == pytest.approx(0.0, abs=1e-7)
    assert normal_angle_error([[1.0, 0, 0]], [[0.0, 1, 0]]) == pytest.approx(math.pi / 2)
    assert normal_angle_error(-n, n) == pytest.approx(0.0, abs=1e-7)
    assert normal_angle_error(-n, n, orient_invariant=False) == pytest.approx(math.pi, abs=1e-7)
    with pytest.raises(ConfigError):
        normal_angle_error(n[:3], n)


def test_evaluate_and_report(tmp_path):
    rng = np.random.default_rng(8)
    a = rng.normal(size=(60, 3))
    rep = evaluate(a, a, pred_edges=a[:10], gt_edges=a[:10])
    assert rep.chamfer_mean == 0 and rep.hausdorff == 0 and rep.ecd == 0
    assert (rep.edge_precision, rep.edge_recall, rep.edge_iou) == (1.0, 1.0, 1.0)
    assert math.isnan(rep.angle_mean)
    empty = evaluate(pred_edges=np.zeros((0, 3)), gt_edges=a)
    assert empty.ecd == math.inf and empty.edge_recall == 0.0
    b = rng.normal(size=(40, 3))
    fast, slow = evaluate(a, b, pred_edges=b, gt_edges=a), evaluate(a, b, pred_edges=b, gt_edges=a, oracle=True)
    for k in MetricReport.columns():
        assert getattr(fast, k) == pytest.approx(getattr(slow, k), abs=1e-12, nan_ok=True)
    p = tmp_path / "r.csv"
    rep.write_csv(p)
    header, row = p.read_text().splitlines()
    assert header == "chamfer_mean,hausdorff,angle_mean,edge_precision,edge_recall,edge_iou,ecd"
    assert len(row.split(",")) == 7
    assert "chamfer_mean" in rep.text()
