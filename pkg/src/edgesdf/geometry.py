"""Artifacts derived from a fitted implicit function.

Zero level sets (marching cubes / squares), normals from the gradient, edge
points from large ``|lap f|`` and the Laplacian distribution used to pick the
edge threshold.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from skimage import measure

from .errors import ConfigError, NumericalError
from .jets import eval_jets
from .losses import jet_fields, select_non_edge
from .mesh import TriMesh
from .model import forward
from .train import scaled_bbox

DEFAULT_RESOLUTION = {2: 512, 3: 128}


def model_fields(model, points, chunk=4096):
    """``(f, grad, lap)`` of ``model`` at ``points``, evaluated in chunks."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = model.config.input_dim
    if len(points) == 0:
        return np.zeros(0), np.zeros((0, d)), np.zeros(0)
    fs, gs, ls = [], [], []
    for i in range(0, len(points), chunk):
        out, _ = eval_jets(model, points[i:i + chunk])
        f, g, lap = jet_fields(out)
        fs.append(f)
        gs.append(g)
        ls.append(lap)
    return np.concatenate(fs), np.concatenate(gs), np.concatenate(ls)


def model_field(model, chunk=65536):
    """Wrap a model as a batched ``points -> values`` evaluator."""
    def field(points):
        points = np.asarray(points, dtype=float)
        return np.concatenate([forward(model, points[i:i + chunk])
                               for i in range(0, len(points), chunk)])
    return field


def _grid(bbox, resolution, scale):
    lo, hi = scaled_bbox(bbox[0], bbox[1], scale)
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(len(lo))]
    spacing = (hi - lo) / (resolution - 1)
    return lo, spacing, axes


def extract_isosurface(field, bbox, resolution=None, scale=1.1):
    """Zero level set of ``field`` on a regular grid over the scaled ``bbox``.

    ``field`` maps an ``(M, d)`` array to ``(M,)`` values. Returns a
    :class:`TriMesh` of triangles (3D, classic marching-cubes table) or
    segments (2D, marching squares); empty when the field has no sign change.
    """
    lo_in = np.asarray(bbox[0], dtype=float)
    d = lo_in.shape[0]
    resolution = DEFAULT_RESOLUTION[d] if resolution is None else int(resolution)
    if resolution < 2:
        raise ConfigError("resolution must be >= 2")
    lo, spacing, axes = _grid(bbox, resolution, scale)
    mesh_pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    values = np.asarray(field(mesh_pts), dtype=float).reshape((resolution,) * d)
    if not np.isfinite(values).all():
        cell = tuple(int(i) for i in np.argwhere(~np.isfinite(values))[0])
        raise NumericalError(f"field is not finite at grid cell {cell}")
    if values.min() > 0 or values.max() < 0 or (values.min() == 0 and values.max() == 0):
        return TriMesh.empty(d)
    if d == 3:
        verts, faces, _, _ = measure.marching_cubes(values, level=0.0, method="lorensen",
                                                    allow_degenerate=False)
        return TriMesh(lo + _refine_on_edges(verts, values) * spacing, faces)
    contours = measure.find_contours(values, 0.0)
    verts, segs = [], []
    for c in contours:
        closed = len(c) > 2 and np.allclose(c[0], c[-1])
        pts = c[:-1] if closed else c
        base = len(verts)
        verts.extend(lo + pts * spacing)
        k = len(pts)
        for i in range(k - 1 if not closed else k):
            segs.append((base + i, base + (i + 1) % k))
    if not segs:
        return TriMesh.empty(2)
    return TriMesh(np.array(verts), np.array(segs, dtype=np.int64))


def _refine_on_edges(idx, values):
    """Redo the linear interpolation of grid-index vertices in float64.

    marching_cubes reports float32 positions; each vertex lies on one grid
    edge (one non-integral coordinate) whose end values change sign.
    """
    idx = np.asarray(idx, dtype=float)
    n = len(idx)
    if n == 0:
        return idx
    rows = np.arange(n)
    top = np.array(values.shape) - 1
    node = np.round(idx).astype(np.int64)
    axis = np.argmax(np.abs(idx - node), axis=1)
    best = idx.copy()
    done = np.zeros(n, dtype=bool)
    # the float32 position may round into a neighboring cell, so try the nearby ones
    for shift in (0, -1, 1):
        a = node.copy()
        a[rows, axis] = np.floor(idx[rows, axis]).astype(np.int64) + shift
        b = a.copy()
        b[rows, axis] += 1
        ok = ~done & (a[rows, axis] >= 0) & (b[rows, axis] <= top[axis])
        a, b = np.clip(a, 0, top), np.clip(b, 0, top)
        va, vb = values[tuple(a.T)], values[tuple(b.T)]
        ok &= (va * vb <= 0) & (va != vb)
        t = np.divide(va, va - vb, out=np.zeros(n), where=ok)
        cand = a.astype(float)
        cand[rows, axis] += t
        best[ok] = cand[ok]
        done |= ok
    return best


def estimate_normals(model, points):
    """Unit ``grad f`` at each point; zero rows (with a warning) where the gradient vanishes."""
    _, g, _ = model_fields(model, points)
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    flagged = norm[:, 0] == 0
    if flagged.any():
        warnings.warn(f"{int(flagged.sum())} points have zero gradient; their normals are zero",
                      RuntimeWarning, stacklevel=2)
    return np.divide(g, norm, out=np.zeros_like(g), where=norm > 0)


def mesh_vertex_normals(model, mesh):
    if mesh.is_empty:
        return mesh
    mesh.vertex_normals = estimate_normals(model, mesh.vertices)
    return mesh


@dataclass
class EdgeReport:
    edge_points: np.ndarray
    laplacian_values: np.ndarray
    tau: float
    edge_mask: np.ndarray

    @property
    def count(self):
        return int(self.edge_mask.sum())


def edges_from_laplacian(points, laplacians, tau):
    if not tau > 0:
        raise ConfigError("tau must be > 0")
    lap = np.asarray(laplacians, dtype=float)
    # a tie counts as an edge, so this is the exact complement of select_non_edge
    mask = ~select_non_edge(lap, tau)
    return EdgeReport(np.asarray(points, dtype=float)[mask], lap, float(tau), mask)


def detect_edges(model, points, tau=20.0):
    """Points with ``|lap f| >= tau``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    _, _, lap = model_fields(model, points)
    return edges_from_laplacian(points, lap, tau)


@dataclass
class LaplacianHistogram:
    counts: np.ndarray
    bin_edges: np.ndarray
    quantiles: dict

    def rows(self):
        for k, c in enumerate(self.counts):
            yield self.bin_edges[k], self.bin_edges[k + 1], int(c)


HIST_QUANTILES = (0.5, 0.9, 0.99)


def histogram_of(values, bins=50, value_range=None):
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    a = np.abs(np.asarray(values, dtype=float))
    if value_range is None:
        top = float(a.max()) if a.size else 0.0
        value_range = (0.0, top if top > 0 else 1.0)
    counts, edges = np.histogram(np.clip(a, value_range[0], value_range[1]), bins=bins, range=value_range)
    q = {p: float(np.quantile(a, p)) for p in HIST_QUANTILES} if a.size else {p: float("nan") for p in HIST_QUANTILES}
    return LaplacianHistogram(counts, edges, q)


def laplacian_histogram(model, points, bins=50, value_range=None):
    """Fixed-width histogram of ``|lap f|`` with its 50/90/99% quantiles.

    Values beyond ``value_range`` are clamped into the end bins so the counts
    always sum to the number of points.
    """
    _, _, lap = model_fields(model, points)
    return histogram_of(lap, bins, value_range)
