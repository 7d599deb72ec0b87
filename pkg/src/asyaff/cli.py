"""Command-line entry point: ``asyaff <subcommand> [options]``.

Exit status is 0 on success, 1 on invalid input and 2 on internal failure.
Every subcommand accepts ``--config <json>`` and ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import __version__
from .affinity_graph import (
    DepthMap,
    NeighborhoodSpec,
    affinity_maps,
    enumerate_edges,
    qualify_color_edges,
    qualify_depth_edges,
)
from .files import (
    CAMERA_PRESETS,
    MAX_DEPTH_M,
    CameraParams,
    DisparityImage,
    disparity_to_depth,
    load_scene,
    read_image16,
    save_binary_maps,
    save_depth,
    save_png,
    save_scene,
    to_gray8,
    write_csv,
)
from .landscape import diagonal_cross_section, sample_surface, surface_rows
from .loss_core import AsymmetryConfig, analyze_gamma, gamma_closed_form_min
from .objective import PRESETS, ObjectiveConfig
from .optimize import RunConfig, optimize_instance, sweep
from .scene import SceneSpec, generate_scene

log = logging.getLogger("asyaff")

TRACE_HEADER = ["step", "L_proj", "L_color", "L_depth", "iou", "fill_ratio", "loss", "boundary_f", "threshold"]
SWEEP_HEADER = ["delta", "gamma", "mean_iou", "mean_fill_ratio", "n_runs"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    unknown = set(doc) - {"run", "objective", "scene"}
    if unknown:
        raise ValueError(f"config {path}: unknown sections {sorted(unknown)}")
    return doc


def _scene_spec(cfg: dict) -> SceneSpec:
    kw = dict(cfg.get("scene", {}))
    for key in ("shapes", "size_range", "object_depth_range"):
        if key in kw:
            kw[key] = tuple(kw[key])
    return SceneSpec(**kw)


def _run_config(args, cfg: dict) -> RunConfig:
    preset = getattr(args, "preset", None) or "default"
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    objective = PRESETS[preset]
    if "objective" in cfg:
        merged = objective.to_dict()
        for key, value in cfg["objective"].items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = value
        objective = ObjectiveConfig.from_dict(merged)
    run = RunConfig.from_dict({**cfg.get("run", {}), "objective": objective})
    overrides = {}
    for name in ("steps", "step_size", "init_noise", "record_every"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    return replace(run, **overrides)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands --------------------------------------------------------------


def cmd_landscape(args, cfg) -> int:
    acfg = AsymmetryConfig(args.delta, args.gamma, allow_unstable=True)
    sample = sample_surface(acfg, args.resolution)
    out = _out_dir(args.out_dir)
    write_csv(out / "surface.csv", ["x", "y", "loss"], surface_rows(sample))
    diag = diagonal_cross_section(sample)
    write_csv(out / "diagonal.csv", ["x", "loss"], zip(sample.axis, diag))
    save_png(out / "heatmap.png", to_gray8(sample.values))
    print(f"wrote {out}/surface.csv, diagonal.csv, heatmap.png")
    return 0


def cmd_gamma_scan(args, cfg) -> int:
    rows = []
    for g in args.gammas:
        res = analyze_gamma(g)
        _, closed = gamma_closed_form_min(g)
        rows.append((g, res.argmin_p, res.min_value, closed, res.has_extra_stationary_points))
    header = ["gamma", "argmin_p", "min_value", "closed_form_min", "has_extra_stationary_points"]
    write_csv(args.out or sys.stdout, header, rows)
    return 0


def cmd_gradcheck(args, cfg) -> int:
    from .gradcheck import run_all

    results = run_all(args.instances, args.seed or 0)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_gen_scenes(args, cfg) -> int:
    spec = _scene_spec(cfg)
    out = _out_dir(args.out_dir)
    base = args.seed or 0
    for i in range(args.count):
        save_scene(generate_scene(base + i, spec), out / f"scene_{base + i:04d}")
    print(f"wrote {args.count} scenes to {out}")
    return 0


def _scene_from_args(args, cfg):
    if args.scene:
        return load_scene(args.scene)
    return generate_scene(args.seed or 0, _scene_spec(cfg))


def cmd_affinity_maps(args, cfg) -> int:
    scene = _scene_from_args(args, cfg)
    if not 0 <= args.instance < len(scene.instances):
        raise ValueError(f"scene has {len(scene.instances)} instances, got --instance {args.instance}")
    h, w = scene.shape
    edges = enumerate_edges(h, w, NeighborhoodSpec(args.k, args.dilation))
    boxes = [scene.instances[args.instance].box]
    if args.modality == "depth":
        edges = qualify_depth_edges(edges, scene.depth, args.tau, boxes)
    else:
        edges = qualify_color_edges(edges, scene.lab, args.tau, boxes)
    paths = save_binary_maps(args.out_dir, affinity_maps(edges), f"{args.modality}_dir", args.format)
    print(f"wrote {len(paths)} maps to {args.out_dir}")
    return 0


def _trace_rows(trace):
    for r in trace.rows:
        yield (r.step, r.proj, r.color, r.depth, r.iou, r.fill_ratio, r.loss, r.boundary_f, r.threshold)


def cmd_optimize(args, cfg) -> int:
    run = _run_config(args, cfg)
    if args.snapshot_dir:
        run = replace(run, snapshot=True)
    scene = _scene_from_args(args, cfg)
    if not 0 <= args.instance < len(scene.instances):
        raise ValueError(f"scene has {len(scene.instances)} instances, got --instance {args.instance}")
    logits, trace = optimize_instance(scene, args.instance, run)
    write_csv(args.out, TRACE_HEADER, _trace_rows(trace))
    if args.snapshot_dir:
        out = _out_dir(args.snapshot_dir)
        for r in trace.rows:
            save_png(out / f"mask_{r.step:06d}.png", np.rint(r.mask * 255).astype(np.uint8))
    if args.logits_out:
        np.save(args.logits_out, logits)
    f = trace.final
    print(f"step {f.step}: loss {f.loss:.6f} iou {f.iou:.4f} fill_ratio {f.fill_ratio:.4f} "
          f"mean prob in box {float(expit(logits)[scene.instances[args.instance].box.indicator(*scene.shape)].mean()):.4f}")
    return 0


def cmd_sweep(args, cfg) -> int:
    run = _run_config(args, cfg)
    spec = _scene_spec(cfg)
    base = args.seed or 0
    scenes = [generate_scene(base + i, spec) for i in range(args.scenes)]
    if any(g >= np.e for g in args.gammas):
        raise ValueError("sweep gammas must be < e")
    cells = sweep(args.deltas, args.gammas, args.modality, scenes, run)
    write_csv(args.out, SWEEP_HEADER, cells)
    for c in cells:
        print(f"delta={c.delta:g} gamma={c.gamma:g}: mean IoU {c.mean_iou:.4f}, mean fill {c.mean_fill_ratio:.4f}")
    return 0


def cmd_convert_depth(args, cfg) -> int:
    cam = CAMERA_PRESETS[args.camera]
    cam = CameraParams(args.baseline or cam.baseline, args.focal or cam.focal_length)
    raw = read_image16(args.input)
    depth = disparity_to_depth(DisparityImage(raw), cam)
    if not 0 < args.max_depth <= MAX_DEPTH_M:
        raise ValueError(f"--max-depth must be in (0, {MAX_DEPTH_M}]")
    far = depth.valid & (depth.values > args.max_depth)
    depth = DepthMap(np.where(far, 0.0, depth.values), depth.valid & ~far)
    save_depth(args.output, depth)
    print(f"wrote {args.output}: {int(depth.valid.sum())} valid of {depth.valid.size} pixels, "
          f"{int(far.sum())} beyond {args.max_depth:g} m dropped")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with optional 'run', 'objective' and 'scene' sections")
    common.add_argument("--seed", type=int, default=None)

    p = _Parser(prog="asyaff", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("landscape", parents=[common], help="sample the pairwise loss surface")
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--gamma", type=float, default=0.0)
    s.add_argument("--resolution", type=int, default=201)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_landscape)

    s = sub.add_parser("gamma-scan", parents=[common], help="tabulate min f(P) per gamma")
    s.add_argument("--gammas", type=_floats, default=[0.5, 1.5, 2.5, 2.8, 3.5, 4.5])
    s.add_argument("--out")
    s.set_defaults(func=cmd_gamma_scan)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of all gradients")
    s.add_argument("--instances", type=int, default=1000)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("gen-scenes", parents=[common], help="write synthetic scenes")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_gen_scenes)

    s = sub.add_parser("affinity-maps", parents=[common], help="export per-direction affinity maps")
    s.add_argument("--scene", help="scene directory (default: generate from --seed)")
    s.add_argument("--instance", type=int, default=0)
    s.add_argument("--modality", choices=["depth", "color"], default="depth")
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--dilation", type=int, default=2)
    s.add_argument("--format", choices=["png", "pgm"], default="png")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_affinity_maps)

    s = sub.add_parser("optimize", parents=[common], help="gradient descent on one instance")
    s.add_argument("--preset", default="default", help=f"one of {', '.join(sorted(PRESETS))}")
    s.add_argument("--scene", help="scene directory (default: generate from --seed)")
    s.add_argument("--instance", type=int, default=0)
    s.add_argument("--steps", type=int)
    s.add_argument("--step-size", type=float)
    s.add_argument("--init-noise", type=float)
    s.add_argument("--record-every", type=int)
    s.add_argument("--out", required=True, help="trace CSV")
    s.add_argument("--snapshot-dir")
    s.add_argument("--logits-out")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("sweep", parents=[common], help="mean IoU over a delta x gamma grid")
    s.add_argument("--preset", default="default")
    s.add_argument("--deltas", type=_floats, default=[0.0, 1.5, 2.5, 3.5])
    s.add_argument("--gammas", type=_floats, default=[0.0, 1.5, 2.5])
    s.add_argument("--modality", choices=["depth", "color"], default="depth")
    s.add_argument("--scenes", type=int, default=10)
    s.add_argument("--steps", type=int)
    s.add_argument("--step-size", type=float)
    s.add_argument("--init-noise", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("convert-depth", parents=[common], help="16-bit disparity to 16-bit depth (mm)")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--camera", choices=sorted(CAMERA_PRESETS), default="cityscapes")
    s.add_argument("--baseline", type=float)
    s.add_argument("--focal", type=float)
    s.add_argument("--max-depth", type=float, default=MAX_DEPTH_M,
                   help="metres; farther pixels are stored as invalid (default: 16-bit mm limit)")
    s.set_defaults(func=cmd_convert_depth)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "tau", "unset") is None:
        args.tau = 0.01 if args.modality == "depth" else 0.3
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except (ValueError, TypeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("internal failure")
        return 2


if __name__ == "__main__":
    sys.exit(main())
