"""dsgs command line: train, render, eval, synth, match, report, compare.

Usage:
    python main.py synth --spec two-plane --out data/two_plane
    python main.py train --data data/two_plane --config cfg.json --out runs/a
    python main.py render --ply runs/a/point_cloud.ply --data data/two_plane --camera-id view_002 --out renders
    python main.py eval --ply runs/a/point_cloud.ply --data data/two_plane --out runs/a/metrics.json
    python main.py match --left l.png --right r.png --out disparity.pfm
    python main.py report runs/a/run.jsonl
    python main.py compare --data data/two_plane --modes none,sfm,stereo --seeds 0,1,2
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from core.config.app_settings import AppSettings
from core.config.logging_setup import setup_logging
from core.config.settings import PriorMode, StereoSettings, TrainConfig, build_model, load_train_config
from core.errors import ConfigurationError, SplatError
from core.io.dataset import Dataset
from core.io.images import read_png, write_png
from core.io.pfm import write_pfm
from core.io.ply import load_gaussians_ply, save_gaussians_ply
from core.io.store import load_dataset, save_dataset
from core.io.synth import gen_synth_scene, load_synth_spec, two_plane_spec
from core.priors.providers import build_prior_provider
from core.render.rasterizer import render_frame
from core.scene.camera import right_pose
from core.stereo.matcher import match_pair
from core.training.comparison import evaluate_cloud, format_table, run_comparison
from core.training.trainer import read_run_report, train, write_run_report

logger = logging.getLogger(__name__)

TWO_PLANE_PRESET = "two-plane"
PLY_NAME = "point_cloud.ply"
REPORT_NAME = "run.jsonl"
CONFIG_NAME = "config.json"


def load_scene(source: str, prior_dir: Optional[str] = None) -> Dataset:
    """Dataset from a directory, a scene spec JSON or the two-plane preset."""
    if source == TWO_PLANE_PRESET:
        dataset = gen_synth_scene(two_plane_spec())
    else:
        path = Path(source)
        if path.is_dir():
            return load_dataset(path, prior_dir)
        if path.suffix == ".json":
            dataset = gen_synth_scene(load_synth_spec(path))
        else:
            raise ConfigurationError(f"--data must be a dataset directory, a scene spec .json or "
                                     f"'{TWO_PLANE_PRESET}', got {source}")
    if prior_dir is not None:
        dataset.prior_dir = Path(prior_dir)
    return dataset


def _train_config(args) -> TrainConfig:
    cfg = load_train_config(args.config)
    overrides = {}
    if args.prior_mode is not None:
        overrides["prior_mode"] = args.prior_mode
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
        overrides["depth_start"] = min(cfg.depth_start, args.iterations)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = build_model(TrainConfig, {**cfg.model_dump(), **overrides})
    return cfg


def cmd_train(args) -> int:
    cfg = _train_config(args)
    dataset = load_scene(args.data, args.prior_dir)
    if cfg.prior_mode == PriorMode.NONE and cfg.lambda2 > 0:
        logger.info("Prior mode 'none': training without depth supervision")
        cfg = cfg.model_copy(update={"lambda2": 0.0})
    provider = build_prior_provider(cfg.prior_mode, dataset, cfg)
    cloud, report = train(dataset, cfg, provider)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_gaussians_ply(cloud, out / PLY_NAME)
    write_run_report(report, out / REPORT_NAME)
    (out / CONFIG_NAME).write_text(cfg.model_dump_json(indent=2), encoding="utf-8")
    print(json.dumps(report.summary()))
    return 0


def _run_config(args) -> TrainConfig:
    """Config of the run that wrote ``--ply``: ``--config``, else ``config.json`` beside the PLY, else defaults."""
    if args.config is not None:
        return load_train_config(args.config)
    path = Path(args.ply).with_name(CONFIG_NAME)
    if not path.is_file():
        logger.info(f"No {CONFIG_NAME} next to {args.ply}, rendering with default settings")
        return TrainConfig()
    return load_train_config(path)


def cmd_render(args) -> int:
    cloud = load_gaussians_ply(args.ply)
    cfg = _run_config(args)
    dataset = load_scene(args.data)
    view = dataset.view(args.camera_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    background = tuple(args.background) if args.background is not None else cfg.background

    frame = render_frame(cloud, view.camera, background, cfg.render)
    write_png(out / f"{view.id}.png", frame.color)
    write_pfm(out / f"{view.id}_depth.pfm", frame.depth, frame.alpha > 0)
    if args.right_baseline is not None:
        right = render_frame(cloud, right_pose(view.camera, args.right_baseline), background, cfg.render)
        write_png(out / f"{view.id}_right.png", right.color)
        write_pfm(out / f"{view.id}_right_depth.pfm", right.depth, right.alpha > 0)
    logger.info(f"Rendered {view.id} to {out}")
    return 0


def cmd_eval(args) -> int:
    cloud = load_gaussians_ply(args.ply)
    cfg = _run_config(args)
    dataset = load_scene(args.data)
    views = {"test": dataset.test_views, "train": dataset.train_views, "all": dataset.views}[args.split]
    if not views:
        views = dataset.views
    result = evaluate_cloud(cloud, views, cfg.render, cfg.background)
    metrics = result.to_dict()
    metrics["split"] = args.split
    text = json.dumps(metrics, indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    print(json.dumps(result.to_dict(include_views=False)))
    return 0


def cmd_synth(args) -> int:
    spec = two_plane_spec(seed=args.seed) if args.spec == TWO_PLANE_PRESET else load_synth_spec(args.spec)
    dataset = gen_synth_scene(spec)
    save_dataset(dataset, args.out)
    print(json.dumps({"views": len(dataset.views), "points": len(dataset.points),
                      "test": dataset.test_ids, "out": str(args.out)}))
    return 0


def cmd_match(args) -> int:
    settings = StereoSettings()
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        settings = build_model(StereoSettings, data)
    if args.window is not None:
        settings = build_model(StereoSettings, {**settings.model_dump(), "window": args.window})
    disparity = match_pair(read_png(args.left), read_png(args.right), args.d_max, settings)
    write_pfm(args.out, disparity.disparity, disparity.valid)
    print(json.dumps({"valid_fraction": disparity.valid_fraction, "d_max": disparity.d_max}))
    return 0


def cmd_report(args) -> int:
    report = read_run_report(args.report)
    print(json.dumps({**report.summary(), "prior_stats": _prior_summary(report.prior_stats)}, indent=2))
    return 0


def _prior_summary(stats):
    if not stats:
        return None
    return {k: v for k, v in stats.items() if k != "events"}


def cmd_compare(args) -> int:
    cfg = load_train_config(args.config)
    if args.iterations is not None:
        cfg = build_model(TrainConfig, {**cfg.model_dump(), "iterations": args.iterations,
                                        "depth_start": min(cfg.depth_start, args.iterations)})
    dataset = load_scene(args.data, args.prior_dir)
    modes = [PriorMode(m.strip()) for m in args.modes.split(",") if m.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    rows = run_comparison(dataset, cfg, modes, seeds)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps([r.to_dict() for r in rows], indent=2), encoding="utf-8")
    print(format_table(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsgs", description="Depth-supervised Gaussian splatting")
    parser.add_argument("--log-level", default=None, help="Overrides DSGS_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train a cloud and write PLY + run report")
    p.add_argument("--data", required=True, help=f"Dataset directory, scene spec .json or '{TWO_PLANE_PRESET}'")
    p.add_argument("--config", default=None, help="TrainConfig JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--prior-mode", choices=[m.value for m in PriorMode], default=None)
    p.add_argument("--prior-dir", default=None, help="Directory of <view_id>.pfm external priors")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="Render color and depth of one camera")
    p.add_argument("--ply", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--camera-id", required=True)
    p.add_argument("--right-baseline", type=float, default=None)
    p.add_argument("--background", type=float, nargs=3, default=None, help="Overrides the run config background")
    p.add_argument("--config", default=None, help=f"TrainConfig JSON; defaults to {CONFIG_NAME} beside the PLY")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="Depth and image metrics of a cloud on a dataset")
    p.add_argument("--ply", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["test", "train", "all"], default="test")
    p.add_argument("--config", default=None, help=f"TrainConfig JSON; defaults to {CONFIG_NAME} beside the PLY")
    p.add_argument("--out", default=None, help="Metrics JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="Materialize a synthetic dataset")
    p.add_argument("--spec", required=True, help=f"Scene spec .json or '{TWO_PLANE_PRESET}'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("match", help="Disparity of a rectified PNG pair")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--out", required=True, help="Disparity PFM path")
    p.add_argument("--d-max", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--config", default=None, help="StereoSettings JSON")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("report", help="Summarize a run report")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("compare", help="Train and evaluate one model per prior mode and seed")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--modes", default="none,sfm,stereo")
    p.add_argument("--seeds", default="0")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--prior-dir", default=None)
    p.add_argument("--out", default=None, help="Comparison JSON path")
    p.set_defaults(func=cmd_compare)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; 0 on success, 1 on a pipeline error, 2 on a usage error."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return int(e.code or 0)

    settings = AppSettings()
    if args.log_level:
        settings = settings.model_copy(update={"log_level": args.log_level})
    setup_logging(settings)
    try:
        return args.func(args)
    except (SplatError, OSError, ValueError) as e:
        logger.debug(f"{args.command} failed", exc_info=True)
        print(f"error: {' '.join(str(e).split())}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli_main(argv))


if __name__ == "__main__":
    main()
