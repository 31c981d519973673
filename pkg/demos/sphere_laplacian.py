"""Second-order jets on a field whose Laplacian is known in closed form.

For the distance to a sphere of radius r, the Laplacian on the surface is
(d - 1) / r. The jet arithmetic carries values, gradients and Hessians
through every operation, so the trace of the propagated Hessian should match
that to rounding error.
"""
import math

import numpy as np

from edgesdf.jets import Jet2, laplacian


def sphere_distance(x, r, eps=1e-9):
    d = len(x)
    sq = Jet2.constant(eps * eps, d)
    for k in range(d):
        v = Jet2.variable(x, k)
        sq = sq + v * v
    rho = math.sqrt(sq.value)
    return sq.apply(rho, 0.5 / rho, -0.25 / rho ** 3) - r


rng = np.random.default_rng(0)
for d in (2, 3):
    for r in (0.3, 1.0, 4.0):
        u = rng.normal(size=d)
        jet = sphere_distance(r * u / np.linalg.norm(u), r)
        print(f"d={d}  r={r:<4}  f={jet.value:+.1e}  |grad|={np.linalg.norm(jet.grad):.12f}  "
              f"lap={laplacian(jet):.12f}  expected {(d - 1) / r:.12f}")
