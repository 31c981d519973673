"""Optimization loop: batch sampling, per-step edge masking and Adam updates."""
from __future__ import annotations

import csv
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, TrainingDiverged
from .losses import LossBreakdown, LossWeights, is_finite_breakdown, total_loss
from .model import MlpModel, init_geometric, save_checkpoint

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "vanish", "eikonal", "laplacian", "total", "edge_fraction", "seconds")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 10000
    batch_size: int = 128
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_every: int = 0
    deterministic: bool = True
    log_every: int = 1
    lr_decay_every: int = 0
    lr_decay_factor: float = 0.5
    domain_scale: float = 1.1

    def __post_init__(self):
        if self.iterations <= 0:
            raise ConfigError("iterations must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.log_every < 1:
            raise ConfigError("log_every must be >= 1")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params, grad, state, config, lr=None):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise ConfigError("adam_step: shape mismatch")
    b1, b2 = config.adam_beta1, config.adam_beta2
    lr = config.learning_rate if lr is None else lr
    t = state.t + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    mhat = m / (1.0 - b1 ** t)
    vhat = v / (1.0 - b2 ** t)
    new = params - lr * mhat / (np.sqrt(vhat) + config.adam_eps)
    return new, AdamState(m, v, t)


def sample_surface_batch(points, batch_size, rng):
    """Uniform draw without replacement, or with replacement if ``batch_size > N``."""
    points = np.asarray(points)
    n = len(points)
    if n == 0:
        raise ConfigError("cannot sample from an empty cloud")
    idx = rng.choice(n, size=batch_size, replace=batch_size > n)
    return points[idx]


def scaled_bbox(lo, hi, scale=1.1):
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    c, half = (lo + hi) / 2.0, (hi - lo) / 2.0 * scale
    return c - half, c + half


def sample_domain_batch(bbox, count, rng, scale=1.1):
    """Uniform points in the bounding box grown by ``scale`` about its center."""
    lo, hi = scaled_bbox(*bbox, scale)
    if np.any(hi < lo):
        raise ConfigError("invalid bounding box")
    return lo + rng.random((count, lo.shape[0])) * (hi - lo)


@dataclass
class StepRecord:
    step: int
    breakdown: LossBreakdown
    seconds: float

    def csv_row(self):
        b = self.breakdown
        return [str(self.step), repr(b.vanish), repr(b.eikonal), repr(b.laplacian),
                repr(b.total), repr(b.edge_fraction), repr(self.seconds)]


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    model: MlpModel = None

    @property
    def steps(self):
        return [r.step for r in self.records]

    @property
    def last(self):
        return self.records[-1].breakdown

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            for r in self.records:
                w.writerow(r.csv_row())


def train(cloud, mlp_config, train_config=TrainConfig(), checkpoint_dir=None, callback=None,
          checkpoint_extra=None):
    """Fit an implicit function to ``cloud`` (a normalized :class:`PointCloud` or an array).

    Each step draws a surface batch and an equally sized domain batch,
    evaluates jets, masks the Laplacian term by ``|lap f| < tau`` on the
    current parameters and takes one Adam step.
    """
    points = getattr(cloud, "points", cloud)
    points = np.asarray(points, dtype=float)
    if points.shape[1] != mlp_config.input_dim:
        raise ConfigError(f"cloud dimension {points.shape[1]} != model input_dim {mlp_config.input_dim}")
    if np.linalg.norm(points, axis=1).max() > 1.5:
        log.warning("cloud does not look normalized (max radius %.3g)",
                    np.linalg.norm(points, axis=1).max())
    cfg = train_config
    init_seq, sample_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    model = init_geometric(mlp_config, int(init_seq.generate_state(1)[0]))
    rng = np.random.default_rng(sample_seq)
    bbox = (points.min(axis=0), points.max(axis=0))
    batch = min(cfg.batch_size, len(points))
    state = AdamState.zeros(model.num_params)
    history = TrainHistory()
    t0 = time.perf_counter()
    for step in range(1, cfg.iterations + 1):
        surface = sample_surface_batch(points, batch, rng)
        domain = sample_domain_batch(bbox, batch, rng, cfg.domain_scale)
        breakdown, grad = total_loss(model, surface, domain, cfg.weights)
        if not (is_finite_breakdown(breakdown) and np.isfinite(grad).all()):
            raise TrainingDiverged(step, breakdown)
        lr = cfg.learning_rate
        if cfg.lr_decay_every > 0:
            lr *= cfg.lr_decay_factor ** ((step - 1) // cfg.lr_decay_every)
        params, state = adam_step(model.params, grad, state, cfg, lr)
        model = model.with_params(params)
        if step % cfg.log_every == 0 or step == cfg.iterations:
            # wall time breaks bit-exact reproducibility, so it is zeroed in deterministic mode
            secs = 0.0 if cfg.deterministic else time.perf_counter() - t0
            rec = StepRecord(step, breakdown, secs)
            history.records.append(rec)
            if callback is not None:
                callback(rec, model)
        if checkpoint_dir and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            save_checkpoint(os.path.join(checkpoint_dir, f"step_{step:07d}.ckpt"), model, step, cfg.seed,
                            extra=checkpoint_extra)
    history.model = model
    if not math.isfinite(history.last.total):
        raise TrainingDiverged(cfg.iterations, history.last)
    return model, history
