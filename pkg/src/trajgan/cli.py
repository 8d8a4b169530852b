"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric abort. ``TRAJGAN_LOG`` selects error, info or debug logging.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .config import ExperimentConfig
from .corpus import generate_corpus, read_corpus, write_corpus
from .errors import ConfigError, TrajGanError
from .evaluation import eval_inputs, evaluate, evaluate_baseline, predict_local
from .persistence import load_model, save_model
from .scene import load_map, read_scene_csv
from .svg import render_boxplot, render_scene
from .training import train

log = logging.getLogger("trajgan")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging():
    level = os.environ.get("TRAJGAN_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"TRAJGAN_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _config(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config) if args.config else ExperimentConfig()


def _out(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.paths.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> int:
    cfg = _config(args)
    seed = cfg.seeds.data if args.seed is None else args.seed
    if args.n < 0:
        raise ConfigError("--n must be >= 0")
    if not 0.0 <= args.mix <= 1.0:
        raise ConfigError("--mix must lie in [0, 1]")
    cfg = cfg.with_values("seeds", data=seed)
    corpus = generate_corpus(args.n, args.mix, seed, cfg)
    out = write_corpus(args.out or cfg.paths.corpus_dir, corpus)
    log.info("wrote %d scenes to %s", len(corpus), out)
    return EXIT_OK


def _load_corpus(args, cfg):
    return read_corpus(args.corpus or cfg.paths.corpus_dir, cfg.window, args.map or cfg.paths.map_file or None)


def cmd_train(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_values("seeds", train=args.seed)
    corpus = _load_corpus(args, cfg)
    labels = corpus.labels if all(corpus.labels) and corpus.labels else None
    out = _out(args, cfg)
    result = train(cfg, corpus.scenes, labels)
    model = result.best_model()
    save_model(out / "checkpoint.tgf", model, cfg.window)
    (out / "metrics.csv").write_text(result.log_csv(), encoding="utf-8")
    cfg.save(out / "config.ini")
    log.info("best val ADE %.4f at iteration %d", result.best_val_ade, result.best_iteration)
    return EXIT_OK


def _load_checked(path, cfg: ExperimentConfig):
    model, window = load_model(path)
    if window != cfg.window:
        raise ConfigError(f"checkpoint window {window} does not match configured window {cfg.window}")
    if model.config != cfg.model:
        raise ConfigError(f"checkpoint model settings {model.config} differ from config {cfg.model}")
    return model


def cmd_predict(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_values("seeds", eval=args.seed)
    model = _load_checked(args.checkpoint, cfg)
    area = load_map(args.map)
    scene = read_scene_csv(args.scene, area, cfg.window, require_future=False)
    feats, z = eval_inputs(scene, cfg)
    pred = feats.to_global(predict_local(model, [feats], z[None], scene.t_pred)[0])
    out = _out(args, cfg)
    with (out / f"{scene.scene_id}_prediction.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("frame", "x", "y"))
        for k, (x, y) in enumerate(pred):
            w.writerow((scene.t_obs + k, repr(float(x)), repr(float(y))))
    if args.svg:
        svg = render_scene(scene, pred, feats.targets.global_points())
        (out / f"{scene.scene_id}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_values("seeds", eval=args.seed)
    model = _load_checked(args.checkpoint, cfg)
    corpus = _load_corpus(args, cfg)
    if not corpus.scenes:
        raise TrajGanError(f"corpus {args.corpus or cfg.paths.corpus_dir} holds no scenes")
    labels = corpus.labels if all(corpus.labels) else None
    out = _out(args, cfg)
    report = evaluate(model, corpus.scenes, cfg, labels)
    report.write(out, "report")
    baseline = evaluate_baseline(corpus.scenes, cfg, [r[1] for r in report.rows])
    baseline.write(out, "baseline")
    for metric in ("ade", "fde"):
        groups = {}
        for cls in ("straight", "curve"):
            groups[cls] = report.values(metric, cls)
            groups[f"{cls} (CV)"] = baseline.values(metric, cls)
        svg = render_boxplot(groups, f"{metric.upper()} by trajectory class")
        (out / f"boxplot_{metric}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def cmd_plot(args) -> int:
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_values("seeds", eval=args.seed)
    area = load_map(args.map)
    scene = read_scene_csv(args.scene, area, cfg.window, require_future=False)
    feats, z = eval_inputs(scene, cfg)
    pred = None
    if args.checkpoint:
        model = _load_checked(args.checkpoint, cfg)
        pred = feats.to_global(predict_local(model, [feats], z[None], scene.t_pred)[0])
    out = _out(args, cfg)
    svg = render_scene(scene, pred, feats.targets.global_points())
    (out / f"{scene.scene_id}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI)")
    common.add_argument("--seed", type=int, help="override the seed used by this subcommand")
    common.add_argument("--out", help="output directory")

    parser = _Parser(prog="trajgan", description="Goal-conditioned GAN trajectory forecasting.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic corpus")
    p.add_argument("--n", type=int, default=100, help="number of scenes")
    p.add_argument("--mix", type=float, default=0.3, help="fraction of straight scenes")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train a model on a corpus")
    p.add_argument("--corpus", help="corpus directory")
    p.add_argument("--map", help="map JSON (default: <corpus>/map.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict one scene")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scene", required=True, help="scene CSV")
    p.add_argument("--map", required=True, help="map JSON")
    p.add_argument("--svg", action="store_true", help="also render an SVG")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", help="corpus directory")
    p.add_argument("--map", help="map JSON (default: <corpus>/map.json)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", parents=[common], help="render a scene with its goal points")
    p.add_argument("--scene", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--checkpoint", help="optionally overlay a prediction")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _setup_logging()
        return args.func(args)
    except TrajGanError as exc:
        print(f"trajgan: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"trajgan: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"trajgan: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
