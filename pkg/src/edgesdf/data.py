"""Point clouds: normalization, surface sampling and noise injection."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .mesh import TriMesh

DEFAULT_NOISE_SIGMA = 0.005
DEFAULT_SAMPLE_COUNT = 16384


@dataclass
class PointCloud:
    """``points`` (N, d) with optional unit ``normals`` and boolean ``edge_labels``.

    ``centroid`` and ``scale`` record the normalization applied so far:
    ``original = points * scale + centroid``.
    """

    points: np.ndarray
    normals: np.ndarray = None
    edge_labels: np.ndarray = None
    centroid: np.ndarray = None
    scale: float = 1.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] not in (2, 3):
            raise ConfigError(f"points must be (N, 2) or (N, 3), got {self.points.shape}")
        if len(self.points) == 0:
            raise ConfigError("point cloud is empty")
        if not np.isfinite(self.points).all():
            raise ConfigError("point cloud contains NaN or Inf")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float)
            if self.normals.shape != self.points.shape:
                raise ConfigError("normals shape does not match points")
            if not np.isfinite(self.normals).all():
                raise ConfigError("normals contain NaN or Inf")
        if self.edge_labels is not None:
            self.edge_labels = np.asarray(self.edge_labels, dtype=bool).reshape(-1)
            if self.edge_labels.shape[0] != len(self.points):
                raise ConfigError(f"{len(self.edge_labels)} edge labels for {len(self.points)} points")
        if self.centroid is None:
            self.centroid = np.zeros(self.dim)
        self.centroid = np.asarray(self.centroid, dtype=float)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    @property
    def edge_points(self):
        if self.edge_labels is None:
            return np.zeros((0, self.dim))
        return self.points[self.edge_labels]

    def subset(self, idx):
        return replace(self, points=self.points[idx],
                       normals=None if self.normals is None else self.normals[idx],
                       edge_labels=None if self.edge_labels is None else self.edge_labels[idx])


def unit_rows(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=1, keepdims=True)
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


def normalize(cloud):
    """Center on the centroid and scale so the farthest point sits at distance 1."""
    c = cloud.points.mean(axis=0)
    r = np.linalg.norm(cloud.points - c, axis=1).max()
    if not r > 0:
        raise ConfigError("cannot normalize: all points are identical")
    return replace(cloud, points=(cloud.points - c) / r,
                   centroid=cloud.centroid + cloud.scale * c, scale=cloud.scale * r)


def to_normalized(points, cloud):
    """Map original-frame points into ``cloud``'s normalized frame."""
    return (np.asarray(points, dtype=float) - cloud.centroid) / cloud.scale


def to_original(points, cloud):
    return np.asarray(points, dtype=float) * cloud.scale + cloud.centroid


def sample_mesh_surface(mesh: TriMesh, count, rng):
    """Area-weighted (length-weighted in 2D) uniform samples with face normals."""
    if mesh.is_empty:
        raise ConfigError("cannot sample an empty mesh")
    w = mesh.face_measures()
    total = w.sum()
    if not total > 0:
        raise ConfigError("cannot sample a mesh with zero total area")
    face = rng.choice(len(w), size=count, p=w / total)
    v = mesh.vertices[mesh.faces[face]]
    if mesh.dim == 3:
        u = rng.random((count, 2))
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        pts = v[:, 0] + u[:, :1] * (v[:, 1] - v[:, 0]) + u[:, 1:] * (v[:, 2] - v[:, 0])
    else:
        t = rng.random((count, 1))
        pts = v[:, 0] + t * (v[:, 1] - v[:, 0])
    return PointCloud(pts, normals=mesh.face_normals()[face])


def add_noise(cloud, sigma=DEFAULT_NOISE_SIGMA, rng=None):
    """Independent Gaussian jitter on every coordinate; normals and labels are kept."""
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0:
        return replace(cloud, points=cloud.points.copy())
    rng = np.random.default_rng() if rng is None else rng
    return replace(cloud, points=cloud.points + rng.normal(0.0, sigma, size=cloud.points.shape))
