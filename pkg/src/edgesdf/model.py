"""Softplus MLP for the implicit function and its checkpoint format.

Parameter layout: one flat float64 vector holding, for each linear layer in
order, its weight matrix (``out x in``, row-major) followed by its bias.
Layer ``l`` in ``skip_layers`` takes ``[hidden, x]`` (width ``H + d``) as input.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DataFormatError
from .jets import softplus

CHECKPOINT_MAGIC = b"EDGESDF-CKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int = 3
    hidden_width: int = 512
    num_hidden_layers: int = 8
    skip_layers: tuple = (4,)
    softplus_beta: float = 100.0
    init_radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "skip_layers", tuple(sorted(int(s) for s in self.skip_layers)))
        if self.input_dim not in (2, 3):
            raise ConfigError(f"input_dim must be 2 or 3, got {self.input_dim}")
        if self.hidden_width < 1:
            raise ConfigError("hidden_width must be positive")
        # zero hidden layers gives a plain affine map, used for hand-built fixtures
        if self.num_hidden_layers < 0:
            raise ConfigError("num_hidden_layers must be >= 0")
        for s in self.skip_layers:
            if not 1 <= s < self.num_hidden_layers:
                raise ConfigError(f"skip layer {s} outside [1, {self.num_hidden_layers})")
        if self.softplus_beta <= 0:
            raise ConfigError("softplus_beta must be positive")
        if self.init_radius <= 0:
            raise ConfigError("init_radius must be positive")


def layer_shapes(config):
    """``(out, in)`` for every linear layer."""
    d, H, L = config.input_dim, config.hidden_width, config.num_hidden_layers
    if L == 0:
        return [(1, d)]
    shapes = [(H, d)]
    for l in range(1, L):
        shapes.append((H, H + (d if l in config.skip_layers else 0)))
    shapes.append((1, H))
    return shapes


def param_count(config):
    return sum(o * i + o for o, i in layer_shapes(config))


@dataclass(frozen=True, eq=False)
class MlpModel:
    config: MlpConfig
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.params, dtype=np.float64).reshape(-1)
        if p.shape[0] != param_count(self.config):
            raise ConfigError(f"expected {param_count(self.config)} parameters, got {p.shape[0]}")
        p.flags.writeable = False
        object.__setattr__(self, "params", p)

    def layer_slices(self):
        out, pos = [], 0
        for o, i in layer_shapes(self.config):
            w = (pos, pos + o * i)
            pos += o * i
            b = (pos, pos + o)
            pos += o
            out.append((w, b))
        return out

    def layers(self):
        """List of ``(W, b)`` views into ``params``."""
        res = []
        for (o, i), ((w0, w1), (b0, b1)) in zip(layer_shapes(self.config), self.layer_slices()):
            res.append((self.params[w0:w1].reshape(o, i), self.params[b0:b1]))
        return res

    def with_params(self, params):
        return MlpModel(self.config, params)

    def __call__(self, x):
        return forward(self, x)

    @property
    def num_params(self):
        return self.params.shape[0]


def init_geometric(config, seed=0):
    """Sphere-like initialization: ``f(x) ~ |x| - init_radius`` before training."""
    rng = np.random.default_rng(seed)
    chunks = []
    shapes = layer_shapes(config)
    for l, (o, i) in enumerate(shapes):
        if l == len(shapes) - 1:
            W = rng.normal(np.sqrt(np.pi) / np.sqrt(i), 1e-4, size=(o, i))
            b = np.full(o, -config.init_radius)
        else:
            W = rng.normal(0.0, np.sqrt(2.0) / np.sqrt(o), size=(o, i))
            b = np.zeros(o)
        chunks += [W.reshape(-1), b]
    params = np.concatenate(chunks)
    model = MlpModel(config, params)
    # softplus adds ~ln2/beta per unit; pin f(0) = -init_radius to cancel the drift
    params[-1] -= forward(model, np.zeros(config.input_dim)) + config.init_radius
    return MlpModel(config, params)


def affine_model(weights, bias, input_dim=None):
    """Hand-built ``f(x) = w.x + b`` as a zero-hidden-layer model."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    cfg = MlpConfig(input_dim=input_dim or w.shape[0], hidden_width=1,
                    num_hidden_layers=0, skip_layers=())
    return MlpModel(cfg, np.concatenate([w, [float(bias)]]))


def forward(model, x):
    """``f(x)`` for one point (returns float) or a batch ``(B, d)`` (returns ``(B,)``)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    cfg = model.config
    if x.shape[1] != cfg.input_dim:
        raise ConfigError(f"point dimension {x.shape[1]} != model input_dim {cfg.input_dim}")
    a = x
    layers = model.layers()
    last = len(layers) - 1
    for l, (W, b) in enumerate(layers):
        if l in cfg.skip_layers:
            a = np.concatenate([a, x], axis=1)
        z = a @ W.T + b
        a = z if l == last else softplus(z, cfg.softplus_beta)
    out = a[:, 0]
    return float(out[0]) if single else out


def forward_chunked(model, x, chunk=65536):
    x = np.asarray(x, dtype=float)
    return np.concatenate([forward(model, x[i:i + chunk]) for i in range(0, len(x), chunk)]) \
        if len(x) else np.zeros(0)


def save_checkpoint(path, model, step=0, seed=0, extra=None):
    """Write ``magic\\n<json header>\\n<float64 LE params>``; byte-stable for equal inputs."""
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "num_params": int(model.num_params),
        "step": int(step),
        "seed": int(seed),
        "dtype": "<f8",
    }
    if extra:
        header["extra"] = extra
    header["config"]["skip_layers"] = list(model.config.skip_layers)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC + b"\n")
        fh.write(blob + b"\n")
        fh.write(model.params.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(model, header)``."""
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != CHECKPOINT_MAGIC:
            raise DataFormatError("not a checkpoint file", path, 1)
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except ValueError as exc:
            raise DataFormatError(f"bad checkpoint header ({exc})", path, 2) from None
        if header.get("version") != CHECKPOINT_VERSION:
            raise DataFormatError(f"unsupported checkpoint version {header.get('version')}", path, 2)
        raw = fh.read()
    cfg = dict(header["config"])
    cfg["skip_layers"] = tuple(cfg["skip_layers"])
    config = MlpConfig(**cfg)
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.shape[0] != header["num_params"]:
        raise DataFormatError(f"expected {header['num_params']} parameters, found {params.shape[0]}", path)
    return MlpModel(config, params), header
