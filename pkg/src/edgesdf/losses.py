"""Loss terms on jets, each returning its value and per-point adjoint seeds.

All terms are batch means, so the default weights do not depend on batch size.
The seeds are partial derivatives of the term with respect to each point's
``f``, ``grad f`` and ``lap f``; :func:`edgesdf.jets.backprop` turns the
fused seeds into a parameter gradient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError
from .jets import Jet2, JetArray, backprop, eval_jets, laplacian


@dataclass
class Seeds:
    d_value: np.ndarray
    d_grad: np.ndarray
    d_lap: np.ndarray

    @classmethod
    def zeros(cls, n, d):
        return cls(np.zeros(n), np.zeros((n, d)), np.zeros(n))

    def __add__(self, other):
        return Seeds(self.d_value + other.d_value, self.d_grad + other.d_grad, self.d_lap + other.d_lap)

    def __mul__(self, c):
        return Seeds(self.d_value * c, self.d_grad * c, self.d_lap * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class LossWeights:
    lambda_eikonal: float = 0.1
    lambda_laplacian: float = 0.001
    lambda_normal: float = 0.0
    tau_edge: float = 20.0
    lambda_neighbor: float = 0.0
    neighbor_k: int = 5

    def __post_init__(self):
        for name in ("lambda_eikonal", "lambda_laplacian", "lambda_normal", "lambda_neighbor"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.tau_edge > 0:
            raise ConfigError("tau_edge must be > 0 (use inf to disable edge sampling)")
        if self.neighbor_k < 1:
            raise ConfigError("neighbor_k must be >= 1")


@dataclass
class LossBreakdown:
    vanish: float
    eikonal: float
    laplacian: float
    neighbor: float
    total: float
    non_edge_mask: np.ndarray = field(repr=False)
    edge_fraction: float
    normal: float = 0.0

    def as_row(self):
        return {"vanish": self.vanish, "eikonal": self.eikonal, "laplacian": self.laplacian,
                "total": self.total, "edge_fraction": self.edge_fraction}


class FieldBatch:
    """Precomputed ``(f, grad, lap)`` arrays standing in for a jet batch."""

    def __init__(self, f, g, lap):
        self.f, self.g, self.lap = f, g, lap


def jet_fields(jets):
    """``(f, grad, lap)`` arrays of shape ``(B,), (B, d), (B,)`` from jets."""
    if isinstance(jets, FieldBatch):
        return jets.f, jets.g, jets.lap
    if isinstance(jets, JetArray):
        return jets.value[:, 0], jets.grad[:, :, 0].T, jets.laplacian[:, 0]
    if isinstance(jets, Jet2):
        jets = [jets]
    jets = list(jets)
    f = np.array([j.value for j in jets])
    g = np.array([j.grad for j in jets])
    lap = np.array([laplacian(j) for j in jets])
    return f, g, lap


def _nonempty(n, what):
    if n == 0:
        raise ValueError(f"{what}: empty batch")


def loss_vanish(jets):
    f, g, _ = jet_fields(jets)
    n = f.shape[0]
    _nonempty(n, "loss_vanish")
    seeds = Seeds.zeros(n, g.shape[1])
    seeds.d_value = np.sign(f) / n
    return float(np.mean(np.abs(f))), seeds


def loss_eikonal(jets):
    f, g, _ = jet_fields(jets)
    n = f.shape[0]
    _nonempty(n, "loss_eikonal")
    norm = np.linalg.norm(g, axis=1)
    seeds = Seeds.zeros(n, g.shape[1])
    safe = np.where(norm > 0, norm, 1.0)
    coef = np.where(norm > 0, 2.0 * (norm - 1.0) / (n * safe), 0.0)
    seeds.d_grad = coef[:, None] * g
    return float(np.mean((norm - 1.0) ** 2)), seeds


def loss_normal(jets, gt_normals):
    f, g, _ = jet_fields(jets)
    gt = np.asarray(gt_normals, dtype=float).reshape(g.shape[0], -1) if len(gt_normals) == g.shape[0] else None
    if gt is None or gt.shape != g.shape:
        raise ConfigError(f"loss_normal: {len(gt_normals)} normals for {g.shape[0]} points")
    n = f.shape[0]
    _nonempty(n, "loss_normal")
    diff = g - gt
    dist = np.linalg.norm(diff, axis=1)
    seeds = Seeds.zeros(n, g.shape[1])
    seeds.d_grad = np.where(dist[:, None] > 0, diff / (n * np.where(dist > 0, dist, 1.0))[:, None], 0.0)
    return float(np.mean(dist)), seeds


def knn_table(points, k):
    """Indices of the ``k`` nearest other points for every point, shape ``(N, k)``."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if k > n - 1:
        raise ConfigError(f"k={k} neighbors requested from a batch of {n}")
    _, idx = cKDTree(points).query(points, k=k + 1)
    idx = np.atleast_2d(idx)
    table = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        row = idx[i][idx[i] != i]
        table[i] = row[:k]
    return table


def loss_neighbor(jets, neighbor_index):
    """Mean gradient disagreement between each point and its listed neighbors."""
    f, g, _ = jet_fields(jets)
    nb = np.asarray(neighbor_index, dtype=np.int64)
    n, k = nb.shape
    if n != g.shape[0]:
        raise ConfigError("neighbor table does not match batch")
    if k > n - 1:
        raise ConfigError(f"k={k} neighbors requested from a batch of {n}")
    diff = g[:, None, :] - g[nb]
    dist = np.linalg.norm(diff, axis=2)
    unit = np.where(dist[..., None] > 0, diff / np.where(dist > 0, dist, 1.0)[..., None], 0.0) / (n * k)
    seeds = Seeds.zeros(n, g.shape[1])
    seeds.d_grad += unit.sum(axis=1)
    np.add.at(seeds.d_grad, nb.reshape(-1), -unit.reshape(-1, g.shape[1]))
    return float(dist.sum() / (n * k)), seeds


def select_non_edge(laplacians, tau):
    """``|lap| < tau`` per point; ties count as edge points."""
    if not tau > 0:
        raise ConfigError("tau must be > 0")
    return np.abs(np.asarray(laplacians, dtype=float)) < tau


def loss_laplacian(jets, mask=None):
    """Mean of ``lap(f)^2`` over the points selected by ``mask`` (all if None)."""
    f, g, lap = jet_fields(jets)
    n = f.shape[0]
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ConfigError(f"mask length {mask.shape} != batch {n}")
    seeds = Seeds.zeros(n, g.shape[1])
    m = int(mask.sum())
    if m == 0:
        return 0.0, seeds
    seeds.d_lap = np.where(mask, 2.0 * lap / m, 0.0)
    return float(np.mean(lap[mask] ** 2)), seeds


def total_loss(model, surface_batch, domain_batch=None, weights=LossWeights(), surface_normals=None):
    """Weighted objective and its exact parameter gradient.

    Vanish and the edge-masked Laplacian use the surface points; the Eikonal
    term uses surface and domain points together. Returns
    ``(LossBreakdown, gradient)``.
    """
    surface = np.atleast_2d(np.asarray(surface_batch, dtype=float))
    ns = surface.shape[0]
    _nonempty(ns, "total_loss")
    out, tape = eval_jets(model, surface)
    f, g, lap = jet_fields(out)
    d = g.shape[1]
    has_domain = domain_batch is not None and len(domain_batch) > 0
    if has_domain:
        # domain points only feed the Eikonal term, so first-order jets suffice
        dom_out, dom_tape = eval_jets(model, np.atleast_2d(np.asarray(domain_batch, dtype=float)), order=1)
        f_dom = dom_out.value[:, 0]
        g_dom = dom_out.grad[:, :, 0].T
        eik, s_e = _loss_on(loss_eikonal, (np.concatenate([f, f_dom]), np.concatenate([g, g_dom]), None))
    else:
        eik, s_e = _loss_on(loss_eikonal, (f, g, lap))

    vanish, seeds = _loss_on(loss_vanish, (f, g, lap))
    mask = select_non_edge(lap, weights.tau_edge)
    lapl, s_l = _loss_on(loss_laplacian, (f, g, lap), mask)
    seeds = seeds + weights.lambda_eikonal * _head(s_e, ns) + weights.lambda_laplacian * s_l
    total = vanish + weights.lambda_eikonal * eik + weights.lambda_laplacian * lapl

    neigh = 0.0
    if weights.lambda_neighbor > 0:
        neigh, s_n = _loss_on(loss_neighbor, (f, g, lap), knn_table(surface, weights.neighbor_k))
        seeds = seeds + weights.lambda_neighbor * s_n
        total += weights.lambda_neighbor * neigh
    normal = 0.0
    if weights.lambda_normal > 0:
        if surface_normals is None:
            raise ConfigError("lambda_normal > 0 needs surface normals")
        normal, s_m = _loss_on(loss_normal, (f, g, lap), surface_normals)
        seeds = seeds + weights.lambda_normal * s_m
        total += weights.lambda_normal * normal

    grad = backprop(model, tape, seeds.d_value, seeds.d_grad, seeds.d_lap)
    if has_domain:
        grad += backprop(model, dom_tape, np.zeros(len(f_dom)),
                         weights.lambda_eikonal * s_e.d_grad[ns:], None)
    breakdown = LossBreakdown(vanish=vanish, eikonal=eik, laplacian=lapl, neighbor=neigh,
                              total=float(total), non_edge_mask=mask,
                              edge_fraction=1.0 - float(np.mean(mask)), normal=normal)
    return breakdown, grad


def _head(seeds, n):
    return Seeds(seeds.d_value[:n], seeds.d_grad[:n], seeds.d_lap[:n])


def _loss_on(fn, fields, *args):
    return fn(FieldBatch(*fields), *args)


def is_finite_breakdown(b):
    return all(math.isfinite(v) for v in (b.vanish, b.eikonal, b.laplacian, b.neighbor, b.total))
