"""Reconstruction, normal and edge metrics on point sets.

Distances are Euclidean (not squared). Chamfer is the average of the two
directed mean nearest-neighbor distances; Hausdorff the larger of the two
directed max-min distances. Every accelerated metric has an ``O(n*m)``
``*_bruteforce`` twin used as a test oracle and by ``eval --oracle``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError

DEFAULT_MATCH_RADIUS = 0.01


def _points(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if len(a) == 0:
        raise ValueError(f"{name} is empty")
    return a


def nn_distances(src, dst):
    """Distance from each point of ``src`` to its nearest neighbor in ``dst``."""
    return cKDTree(dst).query(src, k=1)[0]


def nn_distances_bruteforce(src, dst):
    out = np.empty(len(src))
    for i, p in enumerate(src):
        out[i] = np.sqrt(((dst - p) ** 2).sum(axis=1)).min()
    return out


def chamfer(a, b, nn=nn_distances):
    a, b = _points(a, "a"), _points(b, "b")
    return 0.5 * (float(nn(a, b).mean()) + float(nn(b, a).mean()))


def hausdorff(a, b, nn=nn_distances):
    a, b = _points(a, "a"), _points(b, "b")
    return max(float(nn(a, b).max()), float(nn(b, a).max()))


def chamfer_bruteforce(a, b):
    return chamfer(a, b, nn=nn_distances_bruteforce)


def hausdorff_bruteforce(a, b):
    return hausdorff(a, b, nn=nn_distances_bruteforce)


def normal_angle_error(pred, gt, orient_invariant=True):
    """Mean angle in radians between corresponding normals."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ConfigError(f"normal count mismatch: {pred.shape} vs {gt.shape}")
    dots = np.einsum("ij,ij->i", pred, gt)
    if orient_invariant:
        ang = np.arccos(np.clip(np.abs(dots), 0.0, 1.0))
    else:
        ang = np.arccos(np.clip(dots, -1.0, 1.0))
    return float(ang.mean())


def edge_pr_iou(pred_edges, gt_edges, match_radius=DEFAULT_MATCH_RADIUS, nn=nn_distances):
    """Precision, recall and IoU of predicted edge points against ground-truth edge points.

    A prediction is a true positive if some ground-truth point lies within
    ``match_radius``; a ground-truth point is recalled if some prediction does.
    ``IoU = TP / (TP + FP + FN)`` with ``FN`` the unrecalled ground-truth points.
    """
    if not match_radius > 0:
        raise ConfigError("match_radius must be > 0")
    gt = _points(gt_edges, "ground-truth edge set")
    pred = np.asarray(pred_edges, dtype=float).reshape(-1, gt.shape[1])
    if len(pred) == 0:
        return 0.0, 0.0, 0.0
    tp = int((nn(pred, gt) <= match_radius).sum())
    fp = len(pred) - tp
    recalled = int((nn(gt, pred) <= match_radius).sum())
    fn = len(gt) - recalled
    return tp / len(pred), recalled / len(gt), tp / (tp + fp + fn)


def edge_pr_iou_bruteforce(pred_edges, gt_edges, match_radius=DEFAULT_MATCH_RADIUS):
    return edge_pr_iou(pred_edges, gt_edges, match_radius, nn=nn_distances_bruteforce)


def edge_chamfer(pred_edges, gt_edges, nn=nn_distances):
    """Chamfer distance between edge point sets."""
    return chamfer(_points(pred_edges, "predicted edge set"), _points(gt_edges, "ground-truth edge set"), nn=nn)


def edge_chamfer_bruteforce(pred_edges, gt_edges):
    return edge_chamfer(pred_edges, gt_edges, nn=nn_distances_bruteforce)


@dataclass
class MetricReport:
    chamfer_mean: float = math.nan
    hausdorff: float = math.nan
    angle_mean: float = math.nan
    edge_precision: float = math.nan
    edge_recall: float = math.nan
    edge_iou: float = math.nan
    ecd: float = math.nan

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            w.writerow([repr(float(v)) for v in asdict(self).values()])

    def text(self):
        width = max(len(c) for c in self.columns())
        return "\n".join(f"{k:<{width}}  {v:.6g}" for k, v in asdict(self).items()) + "\n"


def evaluate(pred_points=None, gt_points=None, pred_normals=None, gt_normals=None,
             pred_edges=None, gt_edges=None, match_radius=DEFAULT_MATCH_RADIUS,
             oracle=False, orient_invariant=True):
    """Fill whichever metrics the given inputs allow; the rest stay NaN.

    An empty predicted edge set gives zero precision/recall/IoU and an
    infinite ECD.
    """
    nn = nn_distances_bruteforce if oracle else nn_distances
    r = MetricReport()
    if pred_points is not None and gt_points is not None:
        r.chamfer_mean = chamfer(pred_points, gt_points, nn=nn)
        r.hausdorff = hausdorff(pred_points, gt_points, nn=nn)
    if pred_normals is not None and gt_normals is not None:
        r.angle_mean = normal_angle_error(pred_normals, gt_normals, orient_invariant)
    if gt_edges is not None and pred_edges is not None:
        r.edge_precision, r.edge_recall, r.edge_iou = edge_pr_iou(pred_edges, gt_edges, match_radius, nn=nn)
        r.ecd = edge_chamfer(pred_edges, gt_edges, nn=nn) if len(pred_edges) else math.inf
    return r
