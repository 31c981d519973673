"""Shared fit-and-score protocols for the long acceptance runs and the demos."""
import numpy as np

from edgesdf.data import PointCloud, add_noise, normalize, sample_mesh_surface, to_normalized
from edgesdf.geometry import detect_edges, extract_isosurface, model_field
from edgesdf.losses import LossWeights
from edgesdf.mesh import TriMesh, cube_edge_segments, cube_mesh, sample_segments
from edgesdf.metrics import chamfer, edge_chamfer, edge_pr_iou
from edgesdf.model import MlpConfig
from edgesdf.train import TrainConfig, train

EVAL_SAMPLES = 10000
SMALL_3D = MlpConfig(input_dim=3, hidden_width=128, num_hidden_layers=4, skip_layers=())


def noisy_shape_cloud(mesh, count, sigma, seed):
    """Sample ``mesh``, normalize the samples and jitter them.

    Returns ``(noisy, clean)``; the clean cloud carries the normalization frame.
    """
    clean = sample_mesh_surface(mesh, count, np.random.default_rng([seed, count]))
    cloud = normalize(PointCloud(clean.points))
    return add_noise(cloud, sigma, np.random.default_rng([seed, count, 1])), cloud


def reconstruction_chamfer(model, gt_mesh, bbox, seed, resolution=128):
    rec = extract_isosurface(model_field(model), bbox, resolution)
    if rec.is_empty:
        return float("inf"), rec
    rng = np.random.default_rng([seed, 7])
    a = sample_mesh_surface(rec, EVAL_SAMPLES, rng).points
    b = sample_mesh_surface(gt_mesh, EVAL_SAMPLES, rng).points
    return chamfer(a, b), rec


def sphere_fit(iterations=3000, seed=0, count=2048, resolution=128):
    """Noiseless unit sphere; the model sees the raw samples (already unit radius)."""
    rng = np.random.default_rng([seed, count])
    v = rng.normal(size=(count, 3))
    pts = v / np.linalg.norm(v, axis=1, keepdims=True)
    model, hist = train(pts, SMALL_3D, TrainConfig(iterations=iterations, seed=seed))
    rec = extract_isosurface(model_field(model), (pts.min(0), pts.max(0)), resolution)
    rng = np.random.default_rng([seed, 7])
    a = sample_mesh_surface(rec, EVAL_SAMPLES, rng).points
    g = rng.normal(size=(EVAL_SAMPLES, 3))
    b = g / np.linalg.norm(g, axis=1, keepdims=True)
    return chamfer(a, b), model, hist, pts


def cube_case(seed, lambda_laplacian, tau, iterations=3000, learning_rate=1e-4, count=4096,
              sigma=0.005, detect_tau=20.0, match_radius=0.01, resolution=128):
    """Fit a noisy cube and score reconstruction and edge recognition.

    Edges are detected on the noisy input points with ``|lap f| >= detect_tau``
    and compared with dense samples of the 12 true cube edges.
    """
    mesh = cube_mesh(0.5)
    cloud, frame = noisy_shape_cloud(mesh, count, sigma, seed)
    gt_mesh = TriMesh(to_normalized(mesh.vertices, frame), mesh.faces)
    segs = to_normalized(cube_edge_segments(0.5).reshape(-1, 3), frame).reshape(-1, 2, 3)
    gt_edges = sample_segments(segs, EVAL_SAMPLES, np.random.default_rng([seed, 11]))
    weights = LossWeights(lambda_laplacian=lambda_laplacian, tau_edge=tau)
    cfg = TrainConfig(iterations=iterations, learning_rate=learning_rate, seed=seed, weights=weights)
    model, hist = train(cloud, SMALL_3D, cfg)
    dc, _ = reconstruction_chamfer(model, gt_mesh, cloud.bbox(), seed, resolution)
    rep = detect_edges(model, cloud.points, detect_tau)
    if rep.count:
        ecd = edge_chamfer(rep.edge_points, gt_edges)
    else:
        ecd = float("inf")
    precision, recall, iou = edge_pr_iou(rep.edge_points, gt_edges, match_radius)
    return {"seed": seed, "lambda_laplacian": lambda_laplacian, "tau": tau, "chamfer": dc, "ecd": ecd,
            "precision": precision, "recall": recall, "iou": iou, "edges": rep.count,
            "final_loss": hist.last.total, "model": model, "cloud": cloud, "gt_edges": gt_edges}
