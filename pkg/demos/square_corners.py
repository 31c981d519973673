"""Fit a 2D square and look at where the Laplacian is large.

A smooth implicit function cannot have a true corner, so the fitted field
rounds it off, and the rounding shows up as a spike in |lap f|. This script
fits a small net to samples of a square and then prints the points with the
largest |lap f| and their distance to the nearest corner.

In 2D, |lap f| near a corner rounded to radius rho is about 1 / rho, so the
peak value also says how sharp the fit managed to get.

    python3 demos/square_corners.py [iterations]
"""
import sys

import numpy as np

from edgesdf.data import PointCloud, normalize, sample_mesh_surface, to_normalized
from edgesdf.geometry import model_fields
from edgesdf.mesh import square_corner_points, square_polyline
from edgesdf.model import MlpConfig
from edgesdf.train import TrainConfig, train

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
square = square_polyline(0.5)
cloud = normalize(PointCloud(sample_mesh_surface(square, 400, np.random.default_rng(0)).points))

model, hist = train(cloud, MlpConfig(2, 64, 4, ()), TrainConfig(iterations=iterations, seed=0, lr_decay_every=500))
last = hist.last
print(f"after {iterations} steps: vanish {last.vanish:.2e}  eikonal {last.eikonal:.2e}  total {last.total:.2e}")

_, _, lap = model_fields(model, cloud.points)
corners = to_normalized(square_corner_points(0.5), cloud)
order = np.argsort(-np.abs(lap))
print("\n  |lap f|   distance to nearest corner")
for i in order[:12]:
    print(f"  {abs(lap[i]):7.2f}   {np.linalg.norm(corners - cloud.points[i], axis=1).min():.4f}")
print(f"\nmedian |lap f| over all points: {np.median(np.abs(lap)):.2f}")
