"""Independent oracles shared by the tests."""
import numpy as np

from edgesdf.model import MlpModel, param_count


def fd_grad_hess(f, x, h=1e-4):
    """Central-difference gradient and Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    E = np.eye(d) * h
    g = np.array([(f(x + E[i]) - f(x - E[i])) / (2 * h) for i in range(d)])
    H = np.empty((d, d))
    f0 = f(x)
    for i in range(d):
        H[i, i] = (f(x + E[i]) - 2 * f0 + f(x - E[i])) / h ** 2
        for j in range(i + 1, d):
            H[i, j] = H[j, i] = (f(x + E[i] + E[j]) - f(x + E[i] - E[j])
                                 - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h * h)
    return g, H


def fd_param_grad(loss, params, h=1e-5):
    params = np.asarray(params, dtype=float)
    out = np.empty_like(params)
    for k in range(params.shape[0]):
        p = params.copy()
        p[k] += h
        up = loss(p)
        p[k] -= 2 * h
        out[k] = (up - loss(p)) / (2 * h)
    return out


def random_model(cfg, rng, scale=1.0):
    """Gaussian parameters scaled by fan-in."""
    return MlpModel(cfg, rng.normal(size=param_count(cfg)) * scale / np.sqrt(cfg.hidden_width))


def tally_params(d, width, layers, skips):
    """Layer-by-layer parameter count written independently of the library."""
    total = 0
    fan_in = d
    for l in range(layers):
        if l in skips:
            fan_in += d
        total += fan_in * width + width
        fan_in = width
    return total + fan_in + 1
