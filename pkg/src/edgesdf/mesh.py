"""Triangle meshes (3D) and segment meshes (2D), plus the synthetic test shapes."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class TriMesh:
    """Vertices ``(V, d)`` and faces: triangles ``(F, 3)`` when d=3, segments ``(F, 2)`` when d=2."""

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise ConfigError(f"vertices must be (V, 2) or (V, 3), got {self.vertices.shape}")
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.size == 0:
            self.faces = np.zeros((0, self.dim), dtype=np.int64)
        if not np.isfinite(self.vertices).all():
            raise ConfigError("mesh has non-finite vertices")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ConfigError("face index out of range")
        if self.faces.shape[1] != self.dim:
            raise ConfigError(f"{self.dim}D mesh needs faces with {self.dim} indices")

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def is_empty(self):
        return len(self.faces) == 0

    @classmethod
    def empty(cls, d):
        return cls(np.zeros((0, d)), np.zeros((0, d), dtype=np.int64))

    def face_measures(self):
        """Triangle areas (3D) or segment lengths (2D)."""
        v = self.vertices[self.faces]
        if self.dim == 3:
            return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
        return np.linalg.norm(v[:, 1] - v[:, 0], axis=1)

    def face_normals(self):
        """Unit face normals; zero rows for degenerate faces."""
        v = self.vertices[self.faces]
        if self.dim == 3:
            n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        else:
            t = v[:, 1] - v[:, 0]
            n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)


def cube_mesh(half=0.5):
    """Axis-aligned cube ``[-half, half]^3`` with 12 outward-facing triangles."""
    verts = np.array(list(itertools.product([-half, half], repeat=3)), dtype=float)
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return TriMesh(verts, np.array(faces))


def icosphere(subdivisions=3, radius=1.0):
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriMesh(radius * np.array(verts), np.array(faces))


def circle_polyline(n=256, radius=1.0):
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    verts = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    faces = np.stack([np.arange(n), (np.arange(n) + 1) % n], axis=1)
    return TriMesh(verts, faces)


def square_polyline(half=0.5):
    verts = np.array([(-half, -half), (half, -half), (half, half), (-half, half)], dtype=float)
    return TriMesh(verts, np.array([(0, 1), (1, 2), (2, 3), (3, 0)]))


def cube_edge_segments(half=0.5):
    """The 12 edges of the cube as ``(12, 2, 3)`` endpoint pairs."""
    corners = np.array(list(itertools.product([-half, half], repeat=3)), dtype=float)
    segs = []
    for i, j in itertools.combinations(range(8), 2):
        if np.count_nonzero(corners[i] != corners[j]) == 1:
            segs.append((corners[i], corners[j]))
    return np.array(segs)


def square_corner_points(half=0.5):
    return np.array(list(itertools.product([-half, half], repeat=2)), dtype=float)


def sample_segments(segments, count, rng):
    """Length-weighted uniform samples on a set of segments ``(S, 2, d)``."""
    segments = np.asarray(segments, dtype=float)
    lengths = np.linalg.norm(segments[:, 1] - segments[:, 0], axis=1)
    idx = rng.choice(len(segments), size=count, p=lengths / lengths.sum())
    t = rng.random(count)[:, None]
    return segments[idx, 0] + t * (segments[idx, 1] - segments[idx, 0])
