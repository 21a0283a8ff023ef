"""
Command-line entry points.

Usage:
    python -m animalbox label <scene> [--config cfg.toml] [--out label.json]
    python -m animalbox evaluate <scene-dir> [--report report.json]
    python -m animalbox sweep <scene> [--sigmas 0.5,1,2,3,4] [--trials 100] [--seed 42]
    python -m animalbox render <scene> <label> <out.svg> [--png]

Exit codes: 0 success, 1 usage error, 2 data error, 3 degenerate-only results.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from animalbox.config import PipelineConfig, load_config
from animalbox.errors import AnimalBoxError, DegenerateResult, StageError
from animalbox.evaluate import (
    NoiseSweepConfig,
    dumps_report,
    evaluation_report,
    format_evaluation_table,
    format_stability_table,
    stability_sweep,
    sweep_report,
)
from animalbox.labels import PoseRecord, read_label, write_label
from animalbox.pipeline import evaluate_scenes, run_label
from animalbox.render import render_overlay
from animalbox.scene_io import find_scenes, parse_scene

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEGENERATE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _sigma_list(text: str):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("need at least one sigma, all >= 0")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="animalbox", description="Orientation-aware 3D box labels for animals")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    label = sub.add_parser("label", help="label one scene")
    label.add_argument("scene", help="scene directory or scene.json")
    label.add_argument("--config", help="TOML configuration file")
    label.add_argument("--out", help="label JSON path (default: <scene dir>/label.json)")
    label.add_argument("--seed", type=int, help="RANSAC seed (default 42)")
    label.add_argument("--basic", action="store_true", help="skip refinement (EPnP/RANSAC pose only)")

    evaluate = sub.add_parser("evaluate", help="basic vs refined labeling over a scene directory")
    evaluate.add_argument("scene_dir")
    evaluate.add_argument("--config")
    evaluate.add_argument("--report", help="JSON report path")
    evaluate.add_argument("--workers", type=int, default=4)

    sweep = sub.add_parser("sweep", help="keypoint-noise stability sweep")
    sweep.add_argument("scene")
    sweep.add_argument("--config")
    sweep.add_argument("--sigmas", type=_sigma_list, help="comma-separated pixel sigmas")
    sweep.add_argument("--trials", type=int, help="trials per sigma")
    sweep.add_argument("--seed", type=int, help="random seed (default 42)")
    sweep.add_argument("--report", help="JSON report path")
    sweep.add_argument("--workers", type=int, default=1)

    render = sub.add_parser("render", help="draw a label over its scene")
    render.add_argument("scene")
    render.add_argument("label")
    render.add_argument("out", help="SVG path")
    render.add_argument("--config")
    render.add_argument("--png", action="store_true", help="also write a PNG next to the SVG")
    return parser


def _config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(getattr(args, "config", None))
    seed = getattr(args, "seed", None)
    sigmas = getattr(args, "sigmas", None)
    trials = getattr(args, "trials", None)
    if seed is not None or sigmas is not None or trials is not None:
        config = replace(
            config,
            sweep=NoiseSweepConfig(
                sigmas=sigmas if sigmas is not None else config.sweep.sigmas,
                trials_per_sigma=trials if trials is not None else config.sweep.trials_per_sigma,
                seed=seed if seed is not None else config.sweep.seed,
            ),
        )
    return config


def _cmd_label(args: argparse.Namespace) -> int:
    config = _config(args)
    scene = parse_scene(args.scene)
    print("\n" + "=" * 70)
    print(f"LABEL: {scene.name}")
    print("=" * 70)
    try:
        label = run_label(scene, config, refine=not args.basic)
    except StageError as e:
        if isinstance(e.cause, DegenerateResult):
            print(f"⚠️  {e}", file=sys.stderr)
            return EXIT_DEGENERATE
        raise
    out = Path(args.out) if args.out else scene.source.parent / "label.json"
    write_label(label, out)

    d = label.diagnostics
    print(f"  Frame:       {label.x_source} / {label.y_source}")
    print(f"  Inliers:     {d.inliers}/{d.keypoints}")
    if d.reprojection_error_px is not None:
        print(f"  Reproj. err: {d.reprojection_error_px:.3f} px (init {d.initial_reprojection_error_px:.3f} px)")
    if d.restarted:
        print("  Refinement restarted from the depth-flipped pose")
    for face in label.faces:
        if face.visible:
            print(f"  {face.face:<7} {face.percentage:6.2f}%")
    print(f"\n✓ Label written to {out}")
    if label.degenerate:
        print(f"⚠️  Degenerate label: {label.degenerate_reason}")
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config(args)
    root = Path(args.scene_dir)
    if not root.is_dir():
        print(f"❌ Not a directory: {root}", file=sys.stderr)
        return EXIT_DATA
    scenes = find_scenes(root)
    if not scenes:
        print(f"❌ No scenes found under {root}", file=sys.stderr)
        return EXIT_DATA
    outcomes = evaluate_scenes(scenes, config, workers=args.workers)
    print(format_evaluation_table(outcomes))
    report = evaluation_report(outcomes)
    if args.report:
        Path(args.report).write_text(dumps_report(report), encoding="utf-8")
        print(f"✓ Report written to {args.report}")

    summary = report["summary"]
    if summary["processed"] == 0:
        return EXIT_DATA
    if all(o.refined_degenerate for o in outcomes if o.failure is None):
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config(args)
    scene = parse_scene(args.scene)
    truth = scene.extras.get("ground_truth")
    pose = None
    if truth:
        pose = PoseRecord(tuple(truth["quaternion"]), tuple(truth["translation"])).to_pose()
    results = stability_sweep(scene, config.sweep, config.axis_policy, pose=pose, workers=args.workers)
    print(format_stability_table(results))
    text = dumps_report(sweep_report(results, config.sweep, scene.name))
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
        print(f"✓ Report written to {args.report}")
    return EXIT_OK


def _cmd_render(args: argparse.Namespace) -> int:
    config = _config(args)
    scene = parse_scene(args.scene)
    label = read_label(args.label)
    written = render_overlay(scene, label, args.out, png=args.png or config.render_png)
    for path in written:
        print(f"✓ Wrote {path}")
    if label.degenerate:
        print(f"⚠️  Degenerate label ({label.degenerate_reason}); only the watermark was drawn")
        return EXIT_DEGENERATE
    return EXIT_OK


COMMANDS = {"label": _cmd_label, "evaluate": _cmd_evaluate, "sweep": _cmd_sweep, "render": _cmd_render}


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except _UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logger.debug("Running %s", args.command)
    try:
        return COMMANDS[args.command](args)
    except (AnimalBoxError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_DATA


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli(argv))


if __name__ == "__main__":
    main()
