"""Second-order forward jets through the MLP and the adjoint sweep over them.

A jet bundles a scalar with its exact gradient and Hessian with respect to the
input point. Batches of jets are stored channel-stacked in one array of shape
``(C, B, n)``: channel 0 is the value, channels ``1..d`` the gradient and the
remaining ``d(d+1)/2`` channels the upper triangle of the Hessian, in the
order given by :func:`hess_pairs`. Because every channel of an affine map uses
the same weights, one matmul propagates all of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericalError, TapeMismatchError


@lru_cache(maxsize=None)
def hess_pairs(d):
    """Index pairs ``(i, j)``, ``i <= j``, of the packed upper triangle."""
    return tuple((i, j) for i in range(d) for j in range(i, d))


@lru_cache(maxsize=None)
def _diag_slots(d):
    pairs = hess_pairs(d)
    return tuple(p for p, (i, j) in enumerate(pairs) if i == j)


def n_channels(d):
    return 1 + d + d * (d + 1) // 2


def softplus(z, beta):
    """``log(1 + exp(beta*z)) / beta`` without overflow."""
    return np.logaddexp(0.0, beta * z) / beta


def _softplus_derivs(z, beta, third=False):
    t = beta * z
    s = expit(t)
    q = s * expit(-t)
    d2 = beta * q
    if not third:
        return s, d2
    return s, d2, beta * d2 * (1.0 - 2.0 * s)


def unpack_hessian(packed, d):
    """Packed upper triangle (..., P) -> full symmetric (..., d, d)."""
    packed = np.asarray(packed, dtype=float)
    full = np.zeros(packed.shape[:-1] + (d, d))
    for p, (i, j) in enumerate(hess_pairs(d)):
        full[..., i, j] = packed[..., p]
        full[..., j, i] = packed[..., p]
    return full


@dataclass
class Jet2:
    """A scalar with its gradient and (packed, symmetric) Hessian."""

    value: float
    grad: np.ndarray
    hess: np.ndarray = None

    def __post_init__(self):
        self.value = float(self.value)
        self.grad = np.asarray(self.grad, dtype=float).reshape(-1)
        d = self.grad.shape[0]
        if self.hess is None:
            self.hess = np.zeros(d * (d + 1) // 2)
        else:
            h = np.asarray(self.hess, dtype=float)
            if h.shape == (d, d):
                h = np.array([h[i, j] for i, j in hess_pairs(d)])
            self.hess = h.reshape(-1)
            if self.hess.shape[0] != d * (d + 1) // 2:
                raise ConfigError(f"packed Hessian for d={d} needs {d * (d + 1) // 2} entries")

    @property
    def dim(self):
        return self.grad.shape[0]

    @property
    def hessian(self):
        return unpack_hessian(self.hess, self.dim)

    @classmethod
    def constant(cls, value, d):
        return cls(value, np.zeros(d))

    @classmethod
    def variable(cls, x, k):
        """Seed jet for coordinate ``k`` of point ``x``."""
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[0])
        g[k] = 1.0
        return cls(x[k], g)

    def apply(self, f0, f1, f2):
        """Chain rule for a scalar function with value/first/second derivative at ``self.value``."""
        outer = np.array([self.grad[i] * self.grad[j] for i, j in hess_pairs(self.dim)])
        return Jet2(f0, f1 * self.grad, f1 * self.hess + f2 * outer)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        return Jet2(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            cross = np.array([self.grad[i] * other.grad[j] + self.grad[j] * other.grad[i]
                              for i, j in hess_pairs(self.dim)])
            return Jet2(self.value * other.value,
                        self.value * other.grad + other.value * self.grad,
                        self.value * other.hess + other.value * self.hess + cross)
        return Jet2(self.value * other, self.grad * other, self.hess * other)

    __rmul__ = __mul__


def laplacian(jet):
    """Trace of the Hessian. Works on a :class:`Jet2` or a :class:`JetArray`."""
    if isinstance(jet, JetArray):
        return jet.laplacian
    d = jet.dim
    return float(sum(jet.hess[p] for p in _diag_slots(d)))


@dataclass
class JetArray:
    """Channel-stacked batch of jets, ``data.shape == (C, B, n)``."""

    data: np.ndarray
    dim: int

    @property
    def value(self):
        return self.data[0]

    @property
    def grad(self):
        """Gradient, shape ``(d, B, n)``."""
        return self.data[1:1 + self.dim]

    @property
    def order(self):
        return 2 if self.data.shape[0] > 1 + self.dim else 1

    @property
    def hess(self):
        """Packed Hessian, shape ``(P, B, n)``; empty for first-order jets."""
        return self.data[1 + self.dim:]

    @property
    def laplacian(self):
        if self.order == 1:
            raise ValueError("first-order jets carry no Laplacian")
        h = self.hess
        return sum(h[p] for p in _diag_slots(self.dim))

    @property
    def width(self):
        return self.data.shape[2]

    def jet(self, b=0, i=0):
        return Jet2(self.data[0, b, i], self.data[1:1 + self.dim, b, i], self.data[1 + self.dim:, b, i])

    @classmethod
    def from_jets(cls, jets):
        jets = list(jets)
        d = jets[0].dim
        data = np.empty((n_channels(d), 1, len(jets)))
        for i, j in enumerate(jets):
            data[0, 0, i] = j.value
            data[1:1 + d, 0, i] = j.grad
            data[1 + d:, 0, i] = j.hess
        return cls(data, d)

    def to_jets(self, b=0):
        return [self.jet(b, i) for i in range(self.width)]


def seed_jets(points, order=2):
    """Input jets ``(x_k, e_k, 0)`` for a batch of points, shape ``(C, B, d)``.

    ``order=1`` drops the Hessian channels (value and gradient only).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    B, d = points.shape
    data = np.zeros((n_channels(d) if order == 2 else 1 + d, B, d))
    data[0] = points
    for k in range(d):
        data[1 + k, :, k] = 1.0
    return JetArray(data, d)


def _as_jet_array(jets):
    if isinstance(jets, JetArray):
        return jets, False
    if isinstance(jets, Jet2):
        return JetArray.from_jets([jets]), True
    return JetArray.from_jets(jets), True


def affine_jet(weights, bias, jets):
    """Apply ``W @ a + b`` to every channel; the bias only touches the value."""
    W = np.asarray(weights, dtype=float)
    b = np.asarray(bias, dtype=float)
    arr, wrapped = _as_jet_array(jets)
    if W.ndim != 2 or W.shape[1] != arr.width or b.shape != (W.shape[0],):
        raise ConfigError(f"affine_jet: weights {W.shape}, bias {b.shape}, input width {arr.width}")
    out = np.empty(arr.data.shape[:2] + (W.shape[0],))
    out[0] = arr.data[0] @ W.T + b
    out[1:] = arr.data[1:] @ W.T
    res = JetArray(out, arr.dim)
    return res.to_jets() if wrapped else res


def _softplus_array(z, beta):
    d = z.dim
    zv = z.data[0]
    s, d2 = _softplus_derivs(zv, beta)
    out = np.empty_like(z.data)
    out[0] = softplus(zv, beta)
    g = z.data[1:1 + d]
    out[1:1 + d] = s * g
    if z.order == 2:
        for p, (i, j) in enumerate(hess_pairs(d)):
            out[1 + d + p] = s * z.data[1 + d + p] + d2 * g[i] * g[j]
    return JetArray(out, d)


def softplus_jet(a, beta):
    """Softplus with sharpness ``beta`` applied to a jet (or a batch of jets)."""
    if beta <= 0:
        raise ConfigError("softplus beta must be positive")
    if isinstance(a, JetArray):
        return _softplus_array(a, beta)
    if isinstance(a, Jet2):
        return _softplus_array(JetArray.from_jets([a]), beta).jet()
    return _softplus_array(JetArray.from_jets(a), beta).to_jets()


@dataclass
class JetTape:
    """Forward state cached by :func:`eval_jets` for the adjoint sweep.

    ``inputs[l]`` is the jet batch fed to linear layer ``l`` (after any skip
    concatenation) and ``pre[l]`` its output before the activation.
    """

    points: np.ndarray
    inputs: list
    pre: list
    params: np.ndarray = field(repr=False)
    config: object = None

    @property
    def num_layers(self):
        return len(self.inputs)

    @property
    def output(self):
        return self.pre[-1]

    def replay(self, model):
        """Re-run the forward pass; returns the output jets."""
        out, _ = eval_jets(model, self.points)
        return out


def _check_finite(W, b, layer):
    if not (np.isfinite(W).all() and np.isfinite(b).all()):
        raise NumericalError(f"non-finite parameter in layer {layer}")


def eval_jets(model, points, order=2):
    """Jets of ``f`` at a batch of points, plus the tape for :func:`backprop`.

    Returns a :class:`JetArray` of width 1 and batch ``len(points)``. With
    ``order=1`` only values and gradients are propagated.
    """
    cfg = model.config
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[1] != cfg.input_dim:
        raise ConfigError(f"point dimension {x.shape[1]} != model input_dim {cfg.input_dim}")
    seed = seed_jets(x, order)
    layers = model.layers()
    last = len(layers) - 1
    a = seed
    inputs, pre = [], []
    for l, (W, b) in enumerate(layers):
        _check_finite(W, b, l)
        if l in cfg.skip_layers:
            a = JetArray(np.concatenate([a.data, seed.data], axis=2), a.dim)
        inputs.append(a)
        z = affine_jet(W, b, a)
        pre.append(z)
        a = z if l == last else _softplus_array(z, cfg.softplus_beta)
    return pre[-1], JetTape(x, inputs, pre, model.params, cfg)


def eval_jet(model, x):
    """Jet of ``f`` at a single point and its tape."""
    out, tape = eval_jets(model, np.asarray(x, dtype=float).reshape(1, -1))
    return out.jet(), tape


def _softplus_adjoint(z, abar, beta):
    """Pull an adjoint through the softplus jet map. Both arrays are ``(C, B, n)``."""
    d = z.dim
    zv = z.data[0]
    g = z.data[1:1 + d]
    av = abar[0]
    ag = abar[1:1 + d]
    zbar = np.empty_like(abar)
    if z.order == 1:
        d1, d2 = _softplus_derivs(zv, beta)
        zbar[1:1 + d] = d1 * ag
        zbar[0] = d1 * av + d2 * np.einsum("kbn,kbn->bn", ag, g)
        return zbar
    H = z.data[1 + d:]
    ah = abar[1 + d:]
    d1, d2, d3 = _softplus_derivs(zv, beta, third=True)
    zbar[1 + d:] = d1 * ah
    gbar = d1 * ag
    acc_h = np.zeros_like(zv)
    acc_gg = np.zeros_like(zv)
    for p, (i, j) in enumerate(hess_pairs(d)):
        gbar[i] += d2 * ah[p] * g[j]
        gbar[j] += d2 * ah[p] * g[i]
        acc_h += ah[p] * H[p]
        acc_gg += ah[p] * g[i] * g[j]
    zbar[1:1 + d] = gbar
    zbar[0] = d1 * av + d2 * np.einsum("kbn,kbn->bn", ag, g) + d3 * acc_gg + d2 * acc_h
    return zbar


def backprop(model, tape, d_value, d_grad=None, d_lap=None, d_hess=None):
    """Parameter gradient of ``sum_b L_b`` given per-point partials.

    ``d_value`` (B,), ``d_grad`` (B, d), ``d_lap`` (B,) and optionally
    ``d_hess`` (B, P) are the partial derivatives of the loss with respect to
    each point's value, gradient, Laplacian and packed Hessian. Returns a flat
    vector laid out like ``model.params``.
    """
    if tape.params is not model.params or tape.config != model.config:
        raise TapeMismatchError("tape was recorded with different model parameters")
    cfg = model.config
    d = cfg.input_dim
    B = tape.points.shape[0]
    order = tape.output.order
    seed = np.zeros((tape.output.data.shape[0], B, 1))
    seed[0, :, 0] = d_value
    if d_grad is not None:
        seed[1:1 + d, :, 0] = np.asarray(d_grad, dtype=float).reshape(B, d).T
    if order == 1 and (d_hess is not None or (d_lap is not None and np.any(d_lap))):
        raise ValueError("second-order seeds need a second-order tape")
    if order == 2 and d_lap is not None:
        dl = np.asarray(d_lap, dtype=float).reshape(B)
        for p in _diag_slots(d):
            seed[1 + d + p, :, 0] += dl
    if d_hess is not None:
        seed[1 + d:, :, 0] += np.asarray(d_hess, dtype=float).reshape(B, -1).T

    layers = model.layers()
    out = np.zeros_like(model.params)
    views = model.layer_slices()
    zbar = seed
    for l in range(len(layers) - 1, -1, -1):
        W, _ = layers[l]
        A = tape.inputs[l].data
        C = A.shape[0]
        zflat = zbar.reshape(C * B, -1)
        (w0, w1), (b0, b1) = views[l]
        out[w0:w1] = (zflat.T @ A.reshape(C * B, -1)).reshape(-1)
        out[b0:b1] = zbar[0].sum(axis=0)
        if l == 0:
            break
        abar = zbar @ W
        if l in cfg.skip_layers:
            abar = abar[:, :, :abar.shape[2] - d]
        zbar = _softplus_adjoint(tape.pre[l - 1], abar, cfg.softplus_beta)
    return out


def backprop_point(model, tape, seed):
    """Adjoint for one point; ``seed = (dL/df, dL/dgrad, dL/dlap)``."""
    d_value, d_grad, d_lap = seed
    d = model.config.input_dim
    return backprop(model, tape,
                    np.atleast_1d(float(d_value)),
                    np.asarray(d_grad if d_grad is not None else np.zeros(d), dtype=float).reshape(1, d),
                    np.atleast_1d(float(d_lap)))
