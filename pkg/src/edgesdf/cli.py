"""Command-line front end: ``edgesdf <command> [options]``.

Commands: ``fit``, ``mesh``, ``normals``, ``edges``, ``hist``, ``eval`` and
``stress``. Every command accepts ``--config``, ``--set section.key=value``,
``--seed`` and ``--deterministic/--no-deterministic`` and writes a JSON
manifest next to its output.

Exit status: 0 on success, 1 on validation or I/O errors, 2 when a numerical
check aborts the run.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import platform
import statistics
import sys
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import build_config, read_sections
from .data import PointCloud, add_noise, normalize, sample_mesh_surface, to_normalized, to_original
from .errors import ConfigError, DataFormatError, EdgeSDFError, NumericalError
from .fileio import detect_format, load_cloud, load_edge_ground_truth, load_mesh, save_cloud, save_mesh
from .geometry import (detect_edges, estimate_normals, extract_isosurface, laplacian_histogram,
                       mesh_vertex_normals, model_field)
from .mesh import TriMesh, circle_polyline, cube_mesh, icosphere, square_polyline
from .metrics import MetricReport, evaluate
from .model import load_checkpoint, save_checkpoint
from .train import train

log = logging.getLogger("edgesdf")

THREADS_ENV = "EDGESDF_THREADS"
STRESS_NOISE = (0.0, 0.005, 0.01)
STRESS_DENSITY = (4096, 8192, 16384)
STRESS_COLUMNS = ("noise", "density", "shapes_ok", "shapes_failed", "chamfer_mean", "chamfer_median",
                  "hausdorff_mean", "hausdorff_median", "failures")
CASE_COLUMNS = ("noise", "density", "shape", "chamfer", "hausdorff", "status")
BUILTIN_SHAPES = ("cube", "sphere", "circle", "square")

Frame = namedtuple("Frame", "centroid scale bbox")


# ---------------------------------------------------------------- plumbing

def _versions():
    import scipy
    import skimage
    return {"edgesdf": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-image": skimage.__version__, "python": platform.python_version()}


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command, cfg, inputs=None, options=None):
    """Config echo, seed, input hashes and library versions; no timings or output paths."""
    doc = {
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.train.seed,
        "deterministic": cfg.train.deterministic,
        "inputs": {k: {"path": str(v), "sha256": file_digest(v) if os.path.isfile(v) else None}
                   for k, v in (inputs or {}).items() if v},
        "options": options or {},
        "versions": _versions(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sections(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
    if args.deterministic is not None:
        overrides.append(f"train.deterministic={args.deterministic}")
    return read_sections(args.config, overrides)


def _require(path, what):
    if not path:
        raise ConfigError(f"missing {what}")
    if not os.path.exists(path):
        raise FileNotFoundError(2, f"{what} not found", str(path))
    return path


def _frame(header, d):
    extra = header.get("extra") or {}
    centroid = np.asarray(extra.get("centroid", np.zeros(d)), dtype=float)
    scale = float(extra.get("scale", 1.0))
    lo, hi = extra.get("bbox", (-np.ones(d), np.ones(d)))
    return Frame(centroid, scale, (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)))


def load_model(path, sections=None):
    """Checkpoint plus its normalization frame; explicit ``[model]`` keys must match it."""
    model, header = load_checkpoint(_require(path, "checkpoint"))
    given = (sections or {}).get("model", {})
    if given:
        wanted = build_config({"model": given}).model
        for key in given:
            if getattr(wanted, key) != getattr(model.config, key):
                raise ConfigError(f"model.{key} = {getattr(wanted, key)} but checkpoint {path} has "
                                  f"{getattr(model.config, key)}")
    return model, _frame(header, model.config.input_dim)


def _read_cloud(path, fmt, what="input cloud"):
    return load_cloud(_require(path, what), fmt or None)


def _cloud_in_frame(path, fmt, model, frame):
    cloud = _read_cloud(path, fmt)
    if cloud.dim != model.config.input_dim:
        raise ConfigError(f"{path} is {cloud.dim}D but the checkpoint model is {model.config.input_dim}D")
    return cloud, to_normalized(cloud.points, frame)


def _out_dir(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# ---------------------------------------------------------------- pipeline steps

def run_fit(cfg, input_path, out_dir, input_format=""):
    """Load, normalize, (optionally) jitter and fit; writes ``model.ckpt`` and ``loss.csv``."""
    cloud = _read_cloud(input_path, input_format or cfg.data.format)
    if cloud.dim != cfg.model.input_dim:
        raise ConfigError(f"{input_path} is {cloud.dim}D but model.input_dim = {cfg.model.input_dim}")
    if cfg.data.normalize:
        cloud = normalize(cloud)
    if cfg.data.noise_sigma > 0:
        cloud = add_noise(cloud, cfg.data.noise_sigma, np.random.default_rng(cfg.data.noise_seed))
    os.makedirs(out_dir, exist_ok=True)
    lo, hi = cloud.bbox()
    extra = {"centroid": [float(v) for v in cloud.centroid], "scale": float(cloud.scale),
             "bbox": [[float(v) for v in lo], [float(v) for v in hi]]}
    every = max(1, cfg.train.iterations // 20)

    def progress(rec, _model):
        if rec.step % every == 0:
            log.info("step %d  total %.6g  edge_fraction %.3f", rec.step, rec.breakdown.total,
                     rec.breakdown.edge_fraction)

    model, history = train(cloud, cfg.model, cfg.train, checkpoint_dir=out_dir, callback=progress,
                           checkpoint_extra=extra)
    ckpt = os.path.join(out_dir, "model.ckpt")
    save_checkpoint(ckpt, model, cfg.train.iterations, cfg.train.seed, extra=extra)
    history.write_csv(os.path.join(out_dir, "loss.csv"))
    return model, history, ckpt


def run_mesh(cfg, ckpt, out_path, resolution=None, with_normals=False, sections=None):
    model, frame = load_model(ckpt, sections)
    res = resolution or cfg.mesh.resolution or None
    mesh = extract_isosurface(model_field(model), frame.bbox, res, cfg.mesh.bbox_scale)
    if mesh.is_empty:
        log.warning("zero level set not found inside the box; writing an empty mesh")
    elif with_normals:
        mesh = mesh_vertex_normals(model, mesh)
    mesh = TriMesh(to_original(mesh.vertices, frame), mesh.faces, mesh.vertex_normals)
    _out_dir(out_path)
    save_mesh(out_path, mesh)
    return mesh


def point_set(path, samples, rng):
    """Points of a cloud file, or ``samples`` area-weighted samples of a mesh file."""
    _require(path, "point set")
    if detect_format(path) in ("obj", "ply"):
        mesh = load_mesh(path)
        if len(mesh.faces):
            return sample_mesh_surface(mesh, samples, rng).points
    return load_cloud(path).points


def _normals_of(path):
    cloud = load_cloud(_require(path, "normals file"))
    if cloud.normals is None:
        raise DataFormatError("file carries no normals", path)
    return cloud.normals


def run_eval(cfg, pred=None, gt=None, pred_edges=None, gt_edges=None, pred_normals=None, gt_normals=None,
             oracle=False, normalize_by="gt", match_radius=None):
    """Build a :class:`MetricReport` from files.

    Meshes are sampled with ``metrics.samples`` points (prediction first, then
    ground truth) from a generator seeded by ``train.seed``. With
    ``normalize_by="gt"`` every point set is mapped into the frame where the
    ground truth is centered with unit max radius.
    """
    if normalize_by not in ("gt", "none"):
        raise ConfigError("normalize_by must be 'gt' or 'none'")
    rng = np.random.default_rng(cfg.train.seed)
    n = cfg.metrics.samples
    a = point_set(pred, n, rng) if pred else None
    b = point_set(gt, n, rng) if gt else None
    if (a is None) != (b is None):
        raise ConfigError("eval needs both --pred and --gt, or neither")
    e_pred = e_gt = None
    if pred_edges or gt_edges:
        e_pred = load_edge_ground_truth(_require(pred_edges, "predicted edge file"))
        e_gt = load_edge_ground_truth(_require(gt_edges, "ground-truth edge file"))
        if e_gt.dtype == bool:
            if not gt:
                raise ConfigError("index,is_edge ground truth needs --gt to index into")
            e_gt = load_cloud(gt).points[e_gt] if detect_format(gt) != "obj" else load_mesh(gt).vertices[e_gt]
        if e_pred.dtype == bool:
            raise ConfigError("predicted edges must be point samples (x,y[,z] header)")
    sets = [s for s in (a, b, e_pred, e_gt) if s is not None and len(s)]
    if len({s.shape[1] for s in sets}) > 1:
        raise ConfigError("prediction and ground truth differ in dimension")
    if normalize_by == "gt":
        ref = b if b is not None else e_gt
        if ref is not None:
            c = ref.mean(axis=0)
            r = float(np.linalg.norm(ref - c, axis=1).max()) or 1.0
            a, b, e_pred, e_gt = [None if s is None else (s - c) / r for s in (a, b, e_pred, e_gt)]
    n_pred = n_gt = None
    if pred_normals or gt_normals:
        n_pred, n_gt = _normals_of(pred_normals), _normals_of(gt_normals)
        if n_pred.shape != n_gt.shape:
            raise ConfigError(f"normal count mismatch: {len(n_pred)} predicted vs {len(n_gt)} ground truth")
    r = cfg.metrics.match_radius if match_radius is None else match_radius
    return evaluate(a, b, n_pred, n_gt, e_pred, e_gt, match_radius=r, oracle=oracle,
                    orient_invariant=cfg.metrics.orient_invariant)


def shape_mesh(name):
    if name == "cube":
        return cube_mesh(0.5)
    if name == "sphere":
        return icosphere(4)
    if name == "circle":
        return circle_polyline(512)
    if name == "square":
        return square_polyline(0.5)
    mesh = load_mesh(_require(name, "shape mesh"))
    if not len(mesh.faces):
        raise DataFormatError("shape mesh has no faces", name)
    return mesh


def stress_inputs(shape, noise, density, seed, out_dir):
    """Write ``input.ply`` (sampled, normalized, jittered) and ``gt.ply`` for one grid case.

    Clean samples depend on ``(seed, density)`` only and the jitter draw on
    ``(seed, density)`` too, so noise levels differ only by scale.
    """
    mesh = shape_mesh(shape)
    clean = sample_mesh_surface(mesh, density, np.random.default_rng([seed, density]))
    cloud = normalize(PointCloud(clean.points))
    gt = TriMesh(to_normalized(mesh.vertices, cloud), mesh.faces)
    noisy = add_noise(cloud, noise, np.random.default_rng([seed, density, 1]))
    os.makedirs(out_dir, exist_ok=True)
    inp, gt_path = os.path.join(out_dir, "input.ply"), os.path.join(out_dir, "gt.ply")
    save_cloud(inp, PointCloud(noisy.points), binary=True)
    save_mesh(gt_path, gt)
    return inp, gt_path


def stress_case(job):
    shape, noise, density, cfg, out_dir = job
    with _thread_limit():
        try:
            inp, gt = stress_inputs(shape, noise, density, cfg.train.seed, out_dir)
            _, _, ckpt = run_fit(cfg, inp, out_dir)
            mesh_path = os.path.join(out_dir, "mesh.ply")
            mesh = run_mesh(cfg, ckpt, mesh_path)
            if mesh.is_empty:
                raise NumericalError("empty reconstruction")
            rep = run_eval(cfg, mesh_path, gt)
            return shape, noise, density, rep.chamfer_mean, rep.hausdorff, "ok"
        except (EdgeSDFError, OSError, ValueError, FloatingPointError) as exc:
            return shape, noise, density, math.nan, math.nan, f"{type(exc).__name__}: {exc}"


def run_stress(cfg, shapes, noises, densities, out_dir, jobs=1):
    """Fit and score every ``noise x density x shape`` case; one aggregated row per grid cell."""
    if not shapes or not noises or not densities:
        raise ConfigError("stress needs at least one shape, noise level and density")
    for s in noises:
        if s < 0:
            raise ConfigError("noise levels must be >= 0")
    for n in densities:
        if n < 1:
            raise ConfigError("densities must be >= 1")
    work = []
    for x in noises:
        for n in densities:
            for k, shape in enumerate(shapes):
                tag = os.path.splitext(os.path.basename(shape))[0]
                work.append((shape, x, n, cfg, os.path.join(out_dir, f"noise_{x:g}_density_{n}", f"{k}_{tag}")))
    os.makedirs(out_dir, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cases = list(pool.map(stress_case, work))
    else:
        cases = [stress_case(w) for w in work]
    rows = []
    for x in noises:
        for n in densities:
            cell = [c for c in cases if c[1] == x and c[2] == n]
            ok = [c for c in cell if c[5] == "ok"]
            dc, dh = [c[3] for c in ok], [c[4] for c in ok]
            stat = (lambda f, v: f(v) if v else math.nan)
            rows.append({"noise": x, "density": n, "shapes_ok": len(ok), "shapes_failed": len(cell) - len(ok),
                         "chamfer_mean": stat(statistics.fmean, dc), "chamfer_median": stat(statistics.median, dc),
                         "hausdorff_mean": stat(statistics.fmean, dh),
                         "hausdorff_median": stat(statistics.median, dh),
                         "failures": "; ".join(f"{c[0]}: {c[5]}" for c in cell if c[5] != "ok")})
    with open(os.path.join(out_dir, "stress.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, STRESS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    with open(os.path.join(out_dir, "cases.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CASE_COLUMNS)
        for shape, x, n, dc, dh, status in cases:
            w.writerow([repr(float(x)), n, shape, repr(float(dc)), repr(float(dh)), status])
    return rows, cases


# ---------------------------------------------------------------- commands

def cmd_fit(args):
    sections = _sections(args)
    cfg = build_config(sections)
    path = args.input or cfg.data.input
    _require(path, "input cloud")
    model, history, ckpt = run_fit(cfg, path, args.out)
    write_manifest(os.path.join(args.out, "manifest.json"), "fit", cfg, {"input": path})
    print(f"fit: {len(history.records)} log rows, final total {history.last.total:.6g}, "
          f"{model.num_params} parameters -> {ckpt}")


def cmd_mesh(args):
    sections = _sections(args)
    cfg = build_config(sections)
    mesh = run_mesh(cfg, args.checkpoint, args.out, args.resolution, args.normals, sections)
    write_manifest(args.out + ".manifest.json", "mesh", cfg, {"checkpoint": args.checkpoint},
                   {"resolution": args.resolution, "normals": args.normals})
    kind = "triangles" if mesh.dim == 3 else "segments"
    print(f"mesh: {len(mesh.vertices)} vertices, {len(mesh.faces)} {kind} -> {args.out}")


def cmd_normals(args):
    sections = _sections(args)
    cfg = build_config(sections)
    model, frame = load_model(args.checkpoint, sections)
    cloud, pts = _cloud_in_frame(args.input, cfg.data.format, model, frame)
    out = dataclasses.replace(cloud, normals=estimate_normals(model, pts))
    _out_dir(args.out)
    save_cloud(args.out, out, binary=True)
    write_manifest(args.out + ".manifest.json", "normals", cfg,
                   {"checkpoint": args.checkpoint, "input": args.input})
    print(f"normals: {len(out)} points -> {args.out}")


def cmd_edges(args):
    sections = _sections(args)
    cfg = build_config(sections)
    model, frame = load_model(args.checkpoint, sections)
    cloud, pts = _cloud_in_frame(args.input, cfg.data.format, model, frame)
    tau = cfg.metrics.tau if args.tau is None else args.tau
    report = detect_edges(model, pts, tau)
    _out_dir(args.out)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list("xyz"[:cloud.dim]) + ["index", "laplacian"])
        for i in np.flatnonzero(report.edge_mask):
            w.writerow([repr(float(v)) for v in cloud.points[i]] + [int(i), repr(float(report.laplacian_values[i]))])
    write_manifest(args.out + ".manifest.json", "edges", cfg,
                   {"checkpoint": args.checkpoint, "input": args.input}, {"tau": tau})
    print(f"edges: {report.count} of {len(cloud)} points with |lap f| > {tau:g} -> {args.out}")


def cmd_hist(args):
    sections = _sections(args)
    cfg = build_config(sections)
    model, frame = load_model(args.checkpoint, sections)
    _, pts = _cloud_in_frame(args.input, cfg.data.format, model, frame)
    rng = None if args.max is None else (0.0, args.max)
    hist = laplacian_histogram(model, pts, args.bins, rng)
    _out_dir(args.out)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in hist.rows():
            w.writerow([repr(float(lo)), repr(float(hi)), c])
    write_manifest(args.out + ".manifest.json", "hist", cfg,
                   {"checkpoint": args.checkpoint, "input": args.input}, {"bins": args.bins, "max": args.max})
    qs = "  ".join(f"q{int(p * 100)} {v:.6g}" for p, v in hist.quantiles.items())
    print(f"hist: |lap f| {qs} -> {args.out}")


def cmd_eval(args):
    sections = _sections(args)
    cfg = build_config(sections)
    if not (args.pred or args.pred_edges or args.pred_normals):
        raise ConfigError("eval needs --pred, --pred-edges or --pred-normals")
    rep = run_eval(cfg, args.pred, args.gt, args.pred_edges, args.gt_edges, args.pred_normals, args.gt_normals,
                   oracle=args.oracle, normalize_by=args.normalize_by, match_radius=args.match_radius)
    _out_dir(args.out)
    rep.write_csv(args.out + ".csv")
    with open(args.out + ".txt", "w") as fh:
        fh.write(rep.text())
    inputs = {k: getattr(args, k) for k in ("pred", "gt", "pred_edges", "gt_edges", "pred_normals", "gt_normals")}
    write_manifest(args.out + ".manifest.json", "eval", cfg, inputs,
                   {"oracle": args.oracle, "normalize_by": args.normalize_by, "match_radius": args.match_radius})
    sys.stdout.write(rep.text())


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def cmd_stress(args):
    sections = _sections(args)
    cfg = build_config(sections)
    shapes = [s.strip() for s in args.shapes.split(",") if s.strip()]
    rows, _ = run_stress(cfg, shapes, args.noise, args.density, args.out, args.jobs)
    inputs = {f"shape{k}": s for k, s in enumerate(shapes) if s not in BUILTIN_SHAPES}
    write_manifest(os.path.join(args.out, "manifest.json"), "stress", cfg, inputs,
                   {"shapes": shapes, "noise": args.noise, "density": args.density})
    for row in rows:
        print(f"noise {row['noise']:g}  density {row['density']}  d_C mean {row['chamfer_mean']:.6g}  "
              f"median {row['chamfer_median']:.6g}  d_H mean {row['hausdorff_mean']:.6g}  "
              f"failed {row['shapes_failed']}")
    print(f"stress: {len(rows)} cells -> {os.path.join(args.out, 'stress.csv')}")


# ---------------------------------------------------------------- entry point

class _Parser(argparse.ArgumentParser):
    # usage errors are validation failures: exit 1, keeping 2 for numerical aborts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config value")
    common.add_argument("--seed", type=int, help="run seed (train.seed)")
    common.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                        help="bit-reproducible output (train.deterministic)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="edgesdf", description="Edge-preserving neural SDF fitting for point clouds.")
    parser.add_argument("--version", action="version", version=f"edgesdf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit an implicit function to a point cloud")
    p.add_argument("input", nargs="?", help="point cloud (.xyz, .csv, .ply, .obj); default data.input")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mesh", parents=[common], help="extract the zero level set")
    p.add_argument("checkpoint")
    p.add_argument("-o", "--out", required=True, help=".obj or .ply")
    p.add_argument("--resolution", type=int, help="grid points per axis (default mesh.resolution)")
    p.add_argument("--normals", action="store_true", help="attach gradient normals to vertices")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("normals", parents=[common], help="gradient normals at input points")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("-o", "--out", required=True, help=".xyz, .csv or .ply")
    p.set_defaults(func=cmd_normals)

    p = sub.add_parser("edges", parents=[common], help="points with large |laplacian|")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("-o", "--out", required=True, help="edge CSV")
    p.add_argument("--tau", type=float, help="threshold (default metrics.tau)")
    p.set_defaults(func=cmd_edges)

    p = sub.add_parser("hist", parents=[common], help="histogram of |laplacian| at input points")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("-o", "--out", required=True, help="histogram CSV")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--max", type=float, help="upper end of the bin range (default: largest value)")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("eval", parents=[common], help="compare predictions with ground truth")
    p.add_argument("--pred", help="predicted mesh or cloud")
    p.add_argument("--gt", help="ground-truth mesh or cloud")
    p.add_argument("--pred-edges", help="edge CSV with x,y[,z] columns")
    p.add_argument("--gt-edges", help="edge CSV (x,y[,z] samples or index,is_edge labels of --gt)")
    p.add_argument("--pred-normals", help="cloud file with predicted normals")
    p.add_argument("--gt-normals", help="cloud file with ground-truth normals")
    p.add_argument("--match-radius", type=float, help="edge match radius (default metrics.match_radius)")
    p.add_argument("--normalize-by", choices=("gt", "none"), default="gt")
    p.add_argument("--oracle", action="store_true", help="use brute-force nearest neighbors")
    p.add_argument("-o", "--out", required=True, help="report prefix; writes PREFIX.csv and PREFIX.txt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stress", parents=[common], help="noise x density robustness grid")
    p.add_argument("--shapes", default="cube,sphere", help="comma list of cube, sphere, circle, square or mesh paths")
    p.add_argument("--noise", type=_float_list, default=list(STRESS_NOISE))
    p.add_argument("--density", type=_int_list, default=list(STRESS_DENSITY))
    p.add_argument("--jobs", type=int, default=1, help="grid cases run in parallel")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_stress)
    return parser


@contextlib.contextmanager
def _thread_limit():
    value = os.environ.get(THREADS_ENV, "").strip()
    if not value:
        yield
        return
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{value}'") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{value}'")
    from threadpoolctl import threadpool_limits
    with threadpool_limits(limits=n):
        yield


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="edgesdf: %(message)s", stream=sys.stderr)
    try:
        with _thread_limit():
            args.func(args)
    except (NumericalError, FloatingPointError) as exc:
        print(f"edgesdf: numerical abort: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        where = f": {exc.filename}" if exc.filename else ""
        print(f"edgesdf: error: {exc.strerror or exc}{where}", file=sys.stderr)
        return 1
    except (EdgeSDFError, ValueError) as exc:
        print(f"edgesdf: error: {exc}", file=sys.stderr)
        return 1
    return 0
