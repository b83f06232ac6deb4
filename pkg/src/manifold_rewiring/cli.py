"""Command-line driver for the rewiring experiments.

Every subcommand writes its artifacts plus ``manifest.json`` (config echo and
realized metrics) into ``--out``. Outputs are staged in a sibling temporary
directory and moved into place only when the command succeeds.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .cryoem import (
    edge_angle_histogram,
    gaussian_blob_phantom,
    simulate_projection_set,
    write_histogram_csv,
    write_projection_set,
    write_volume,
)
from .experiments import (
    CIRCLE_SIGMAS,
    run_circle,
    run_cryo,
    run_grid,
    train_on_targets,
    verify_uniform_directions,
)
from .graph import Graph, read_edge_list, write_edge_list
from .kernels import BACKEND
from .manifolds import (
    GRID_KINDS,
    build_target_graph,
    circle_target_graph,
    equal_area_bin,
    sample_so3_uniform,
    viewing_direction,
    write_point_cloud_csv,
)
from .mlp import load_params, save_params
from .rewiring import (
    degree_histogram,
    iterative_rewire,
    select_trustworthy,
    threshold_denoise,
    write_report_csv,
)
from .walk import build_training_set, n_features, write_training_csv

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
MAX_SEED = 2**64 - 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# --------------------------------------------------------------------------
# argument types

def _int_in(lo, hi=None, what="integer"):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo or (hi is not None and v > hi):
            bound = f">= {lo}" if hi is None else f"in [{lo}, {hi}]"
            raise argparse.ArgumentTypeError(f"{what} must be {bound}, got {v}")
        return v
    return parse


def _float_where(pred, desc):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
        if not (math.isfinite(v) and pred(v)):
            raise argparse.ArgumentTypeError(f"value must be {desc}, got {text}")
        return v
    return parse


positive_int = _int_in(1)
seed_int = _int_in(0, MAX_SEED, "seed")
positive_float = _float_where(lambda v: v > 0, "positive")
nonneg_float = _float_where(lambda v: v >= 0, "nonnegative")
unit_float = _float_where(lambda v: 0 <= v <= 1, "in [0, 1]")
fraction = _float_where(lambda v: 0 <= v < 1, "in [0, 1)")


def float_list(text):
    parse = nonneg_float
    vals = [parse(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return vals


# --------------------------------------------------------------------------
# output helpers

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer, np.bool_)):
        return str(v.item())
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (np.integer, np.bool_)):
        return v.item()
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def write_manifest(stage: Path, args, metrics: dict) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("out", "handler")}
    doc = {
        "tool": "manifold-rewiring",
        "version": __version__,
        "backend": BACKEND,
        "command": args.command,
        "config": config,
        "metrics": metrics,
        "outputs": sorted(p.name for p in stage.iterdir()) + ["manifest.json"],
    }
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    (stage / "manifest.json").write_text(text + "\n", encoding="utf-8")


def _histogram_rows(label, values, bins, upper):
    counts, edges = np.histogram(values, bins=bins, range=(0.0, upper))
    centers = (edges[:-1] + edges[1:]) / 2
    return [(label, c, n) for c, n in zip(centers, counts)]


def _degree_rows(g: Graph):
    return sorted(degree_histogram(g).items())


def _load_graph(path, flag) -> Graph:
    if not Path(path).is_file():
        raise UsageError(f"{flag}: no such file {path}")
    return read_edge_list(path)


# --------------------------------------------------------------------------
# subcommands

def cmd_synth_circle(args, out: Path) -> dict:
    res = run_circle(args.m, args.k, args.sigmas, args.hops, args.tau, args.epochs, args.copies,
                     args.method, args.seed, args.threads)
    write_point_cloud_csv(res.cloud, out / "points.csv")
    rows, hist = [], []
    for i, lv in enumerate(res.levels):
        write_edge_list(lv.noisy, out / f"noisy_{i}.edges")
        write_edge_list(lv.denoised, out / f"denoised_{i}.edges")
        for label, vals in (("noisy", lv.noisy_arc), ("retained", lv.retained_arc), ("removed", lv.removed_arc)):
            hist += [(lv.sigma, *r) for r in _histogram_rows(label, vals, 30, np.pi)]
        rows.append((lv.sigma, len(lv.noisy_arc), len(lv.removed_arc), len(lv.retained_arc),
                     lv.noisy_arc.mean(), lv.removed_arc.mean() if len(lv.removed_arc) else float("nan"),
                     lv.retained_arc.mean() if len(lv.retained_arc) else float("nan"), lv.p_value, int(lv.passed)))
    write_csv(out / "arc_hist.csv", ["sigma", "set", "bin_center", "count"], hist)
    header = ["sigma", "n_noisy", "n_removed", "n_retained", "mean_arc_noisy", "mean_arc_removed",
              "mean_arc_retained", "p_value", "passed"]
    write_csv(out / "summary.csv", header, rows)
    return {"levels": [dict(zip(header, r)) for r in rows], "final_train_loss": res.train.loss_trace[-1]}


def cmd_synth_grid(args, out: Path) -> dict:
    res = run_grid(args.kind, args.side, args.sigma, args.k, args.hops, args.tau, args.epochs,
                   args.copies, args.seed, args.threads)
    write_point_cloud_csv(res.cloud, out / "points.csv")
    write_edge_list(res.noisy, out / "noisy.edges")
    write_edge_list(res.denoised, out / "denoised.edges")
    upper = float(max(res.noisy_length.max(), 1e-12))
    hist = []
    for label, vals in (("noisy", res.noisy_length), ("retained", res.retained_length),
                        ("removed", res.removed_length)):
        hist += _histogram_rows(label, vals, 30, upper)
    write_csv(out / "length_hist.csv", ["set", "bin_center", "count"], hist)

    def mean(a):
        return float(a.mean()) if len(a) else float("nan")
    return {"n_noisy": res.noisy.n_edges, "n_removed": len(res.removed_length),
            "n_retained": res.denoised.n_edges, "mean_length_noisy": mean(res.noisy_length),
            "mean_length_removed": mean(res.removed_length),
            "mean_length_retained": mean(res.retained_length)}


def cmd_target_graph(args, out: Path) -> dict:
    if args.k >= args.m:
        raise UsageError(f"--k must be smaller than --m (got k={args.k}, m={args.m})")
    if args.manifold == "circle":
        g = circle_target_graph(args.m, args.k, args.sigma, args.seed)
    else:
        g, pc = build_target_graph(args.m, args.k, args.sigma, args.manifold == "projective",
                                   args.seed, return_points=True)
        write_point_cloud_csv(pc, out / "points.csv")
    write_edge_list(g, out / "target.edges")
    write_csv(out / "degrees.csv", ["degree", "count"], _degree_rows(g))
    deg = g.degrees()
    return {"n_vertices": g.n_vertices, "n_edges": g.n_edges, "min_degree": int(deg.min()),
            "max_degree": int(deg.max()), "mean_degree": float(deg.mean())}


def cmd_train(args, out: Path) -> dict:
    if args.graph is not None:
        targets = [_load_graph(args.graph, "--graph")]
    else:
        if args.k >= args.m:
            raise UsageError(f"--k must be smaller than --m (got k={args.k}, m={args.m})")
        targets = [build_target_graph(args.m, args.k, args.sigma, args.flips, args.seed)]
    if args.dump_features:
        write_training_csv(build_training_set(targets[0], args.hops, rng_seed=args.seed, threads=args.threads),
                           out / "training.csv")
    res = train_on_targets(targets, args.hops, args.epochs, args.seed, args.val, args.threads)
    save_params(res.params, out / "model.json", hops=args.hops)
    rows = []
    for k, loss in enumerate(res.loss_trace, 1):
        val = res.val_loss_trace[k - 1] if res.val_loss_trace else float("nan")
        rows.append((k, loss, val))
    write_csv(out / "loss.csv", ["epoch", "train_loss", "val_loss"], rows)
    return {"val_auc": res.val_auc, "final_train_loss": res.loss_trace[-1],
            "final_val_loss": res.val_loss_trace[-1] if res.val_loss_trace else None,
            "n_train": res.n_train, "n_val": res.n_val, "target_edges": targets[0].n_edges}


def _model_hops(params, flag_value):
    width = params.input_width
    h = (width // 2 + 1) // 2
    if n_features(h) != width:
        raise ValueError(f"model input width {width} is not a walk-feature width")
    if flag_value is not None and flag_value != h:
        raise UsageError(f"--hops {flag_value} does not match the model (trained with h={h})")
    return h


def cmd_rewire(args, out: Path) -> dict:
    g = _load_graph(args.graph, "--graph")
    if not Path(args.model).is_file():
        raise UsageError(f"--model: no such file {args.model}")
    params, _ = load_params(args.model)
    h = _model_hops(params, args.hops)
    if args.method == "threshold":
        res, rep = threshold_denoise(g, params, h, args.tau, threads=args.threads)
    else:
        res, rep = iterative_rewire(g, params, h, args.tau, args.max_iters, args.seed, args.mode,
                                    threads=args.threads)
    write_edge_list(res, out / "rewired.edges")
    write_csv(out / "removed.csv", ["u", "v"], rep.removed_edges)
    write_report_csv(rep, out / "removals.csv", out / "degrees.csv")
    if args.trustworthy:
        write_csv(out / "trustworthy.csv", ["vertex"], [(v,) for v in select_trustworthy(res, args.trustworthy)])
    return {"hops": h, "iterations": rep.iterations, "converged": rep.converged,
            "edges_before": g.n_edges, "edges_after": res.n_edges, "vertices_after": res.n_vertices}


def cmd_simulate(args, out: Path) -> dict:
    vol = gaussian_blob_phantom(args.n, rng_seed=args.seed)
    proj, _ = simulate_projection_set(vol, args.m, args.snr, args.seed, phantom_id=f"blobs-{args.seed}")
    write_volume(vol, out / "volume.mrv")
    write_projection_set(proj, out / "stack.mrs")
    axes = proj.axes
    write_csv(out / "angles.csv", ["index", "theta1", "theta2", "theta3", "axis_x", "axis_y", "axis_z"],
              [(i, *a, *x) for i, (a, x) in enumerate(zip(proj.angles.tolist(), axes.tolist()))])
    return {"realized_snr": proj.realized_snr, "target_snr": args.snr}


def cmd_cryoem_eval(args, out: Path) -> dict:
    params = None
    if args.model is not None:
        if not Path(args.model).is_file():
            raise UsageError(f"--model: no such file {args.model}")
        params, _ = load_params(args.model)
        _model_hops(params, args.hops)
    if args.k >= args.m:
        raise UsageError(f"--k must be smaller than --m (got k={args.k}, m={args.m})")
    res = run_cryo(args.n, args.m, args.k, args.snr, args.hops, args.tau, args.epochs, args.seed, params,
                   args.max_iters, args.mode, args.threads)
    write_edge_list(res.noisy, out / "noisy.edges")
    write_edge_list(res.rewired, out / "rewired.edges")
    for name, g in (("hist_before.csv", res.noisy), ("hist_after.csv", res.rewired)):
        write_histogram_csv(*edge_angle_histogram(g, res.projections), out / name)
    write_report_csv(res.report, out / "removals.csv", out / "degrees.csv")
    if args.trustworthy:
        write_csv(out / "trustworthy.csv", ["vertex"],
                  [(v,) for v in select_trustworthy(res.rewired, args.trustworthy)])
    return {"realized_snr": res.projections.realized_snr, "edges_before": res.noisy.n_edges,
            "edges_after": res.rewired.n_edges, "vertices_after": res.rewired.n_vertices,
            "iterations": res.report.iterations, "converged": res.report.converged,
            "median_view_deg_before": float(np.degrees(res.median_before)),
            "median_view_deg_after": float(np.degrees(res.median_after)),
            "mann_whitney_p": res.p_value, "mean_degree_after": res.mean_degree}


def cmd_verify_prop1(args, out: Path) -> dict:
    metrics = verify_uniform_directions(args.count, args.seed)
    axes = viewing_direction(sample_so3_uniform(args.count, args.seed))
    counts = np.bincount(equal_area_bin(axes), minlength=48)
    write_csv(out / "bins.csv", ["bin", "count", "expected"],
              [(b, int(c), args.count / 48) for b, c in enumerate(counts)])
    metrics["passed"] = bool(metrics["p_value"] > 0.01 and metrics["resultant_norm"] < 0.02)
    return metrics


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=seed_int, default=0, help="RNG seed (default 0)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--threads", type=positive_int, default=1, help="worker threads for walk features")

    p = _Parser(prog="manifold-rewiring", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, handler, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_)
        sp.set_defaults(handler=handler)
        return sp

    def learn_flags(sp, hops=2):
        sp.add_argument("--hops", type=positive_int, default=hops, help=f"enclosing radius h (default {hops})")
        sp.add_argument("--tau", type=unit_float, default=0.5, help="removal threshold (default 0.5)")
        sp.add_argument("--epochs", type=positive_int, default=100, help="training epochs (default 100)")

    sp = add("synth-circle", cmd_synth_circle, "denoise noisy K-NN graphs of points on a circle")
    sp.add_argument("--m", type=positive_int, default=100)
    sp.add_argument("--k", type=positive_int, default=10)
    sp.add_argument("--sigmas", type=float_list, default=list(CIRCLE_SIGMAS),
                    help="comma-separated noise amplitudes")
    sp.add_argument("--copies", type=positive_int, default=10, help="target graphs pooled for training")
    sp.add_argument("--method", choices=("threshold", "iterative"), default="threshold")
    learn_flags(sp, hops=1)

    sp = add("synth-grid", cmd_synth_grid, "denoise noisy K-NN graphs of a regular grid")
    sp.add_argument("--kind", choices=GRID_KINDS, default="triangle_moebius")
    sp.add_argument("--side", type=_int_in(2), default=12)
    sp.add_argument("--sigma", type=nonneg_float, default=0.3, help="noise in lattice spacings")
    sp.add_argument("--k", type=positive_int, default=None)
    sp.add_argument("--copies", type=positive_int, default=5)
    learn_flags(sp, hops=1)

    sp = add("target-graph", cmd_target_graph, "clean target K-NN graph on a sampled manifold")
    sp.add_argument("--manifold", choices=("sphere", "projective", "circle"), default="sphere")
    sp.add_argument("--m", type=positive_int, default=2000)
    sp.add_argument("--k", type=positive_int, default=12)
    sp.add_argument("--sigma", type=nonneg_float, default=0.01)

    sp = add("train", cmd_train, "train the link scorer on a target graph")
    sp.add_argument("--graph", default=None, help="edge list of the target graph (default: sample a sphere)")
    sp.add_argument("--m", type=positive_int, default=2000)
    sp.add_argument("--k", type=positive_int, default=12)
    sp.add_argument("--sigma", type=nonneg_float, default=0.01)
    sp.add_argument("--flips", action="store_true", help="use the projective metric")
    sp.add_argument("--val", type=fraction, default=0.2, help="held-out fraction (default 0.2)")
    sp.add_argument("--dump-features", action="store_true", help="also write training.csv")
    learn_flags(sp)

    sp = add("rewire", cmd_rewire, "remove low-scoring edges from a graph")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--hops", type=positive_int, default=None, help="must match the model if given")
    sp.add_argument("--tau", type=unit_float, default=0.5)
    sp.add_argument("--method", choices=("iterative", "threshold"), default="iterative")
    sp.add_argument("--mode", choices=("sequential", "batch"), default="sequential")
    sp.add_argument("--max-iters", type=positive_int, default=2000)
    sp.add_argument("--trustworthy", type=_int_in(0), default=0, help="write the top-N vertices by degree")

    sp = add("simulate", cmd_simulate, "simulate a noisy projection stack of a blob phantom")
    sp.add_argument("--n", type=_int_in(8), default=32)
    sp.add_argument("--m", type=positive_int, default=500)
    sp.add_argument("--snr", type=positive_float, default=0.05)

    sp = add("cryoem-eval", cmd_cryoem_eval, "simulate, build the affinity graph, rewire and evaluate")
    sp.add_argument("--n", type=_int_in(8), default=32)
    sp.add_argument("--m", type=positive_int, default=500)
    sp.add_argument("--k", type=positive_int, default=12)
    sp.add_argument("--snr", type=positive_float, default=0.05)
    sp.add_argument("--model", default=None, help="scorer checkpoint (default: train one)")
    sp.add_argument("--mode", choices=("sequential", "batch"), default="sequential")
    sp.add_argument("--max-iters", type=positive_int, default=2000)
    sp.add_argument("--trustworthy", type=_int_in(0), default=0)
    learn_flags(sp)

    sp = add("verify-prop1", cmd_verify_prop1, "check that random rotations give uniform viewing directions")
    sp.add_argument("--count", type=positive_int, default=50_000)
    return p


def _execute(args) -> dict:
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise UsageError(f"--out: {out} exists and is not a directory")
    created = not out.exists()
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.stage-", dir=out.parent))
    try:
        metrics = args.handler(args, stage)
        write_manifest(stage, args, metrics)
        out.mkdir(exist_ok=True)
        for f in sorted(stage.iterdir()):
            os.replace(f, out / f.name)
        return metrics
    except BaseException:
        if created and out.exists():
            shutil.rmtree(out, ignore_errors=True)
        raise
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    try:
        metrics = _execute(args)
    except UsageError as e:
        print(f"manifold-rewiring {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OverflowError, OSError, KeyError) as e:
        print(f"manifold-rewiring {args.command}: failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps(_jsonable({"command": args.command, "out": args.out, "metrics": metrics}), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
