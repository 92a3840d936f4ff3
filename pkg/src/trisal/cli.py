"""Command-line interface.

Subcommands: ``fixtures``, ``pretrain``, ``train``, ``eval``, ``infer``,
``visualize-sw``. Output paths default to $TRISAL_OUTPUT_ROOT (or
``./runs``). Training configs are plain-text key-value files; see
config.py for the key list.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import TrainConfig, parse_config
from .data import load_dataset
from .fixtures import FixtureSpec, corrupted_variant, make_fixture


def _output_root() -> Path:
    return Path(os.environ.get("TRISAL_OUTPUT_ROOT", "runs"))


def _load_config(args) -> TrainConfig:
    base = TrainConfig.desk_profile() if args.profile == "desk" else TrainConfig.full_profile()
    if args.config:
        return parse_config(args.config, base=base)
    return base


def _add_common(p, config=True):
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--out", default=None, help="output directory")
    if config:
        p.add_argument("--config", default=None, help="key-value config file")
        p.add_argument(
            "--profile",
            choices=("desk", "full"),
            default="desk",
            help="base profile the config file overrides",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trisal",
        description="Trimodal video salient-object detection with selective fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", help="render a synthetic dataset")
    p.add_argument("--spec", default=None, help="fixture spec file (key = value)")
    p.add_argument("--out", required=True, help="dataset root to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--corrupt",
        choices=("none", "flow", "depth"),
        default="none",
        help="make one modality useless (constant fill)",
    )

    p = sub.add_parser("pretrain", help="pre-train one stream against GT")
    p.add_argument("--stage", choices=("depth", "flow", "rgb"), required=True)
    _add_common(p)

    p = sub.add_parser("train", help="fine-tune the full network")
    _add_common(p)
    p.add_argument(
        "--from-pretrained",
        default=None,
        help="directory holding pretrain_{depth,flow,rgb}.pt",
    )
    p.add_argument("--no-psf", action="store_true", help="baseline wiring: concat+conv fusion")
    p.add_argument("--no-msam", action="store_true", help="concat+conv instead of axis attention")
    p.add_argument("--no-pgt", action="store_true", help="train the weight map unsupervised")

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset-name", default="fixture")
    _add_common(p, config=False)

    p = sub.add_parser("infer", help="write per-frame saliency PNGs")
    p.add_argument("--checkpoint", required=True)
    _add_common(p, config=False)

    p = sub.add_parser("visualize-sw", help="weight-map and feature visualizations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frame", type=int, default=0)
    _add_common(p, config=False)
    return parser


def _cmd_fixtures(args) -> int:
    spec = FixtureSpec.from_file(args.spec) if args.spec else FixtureSpec()
    if args.corrupt != "none":
        spec = corrupted_variant(spec, args.corrupt)
    index = make_fixture(spec, seed=args.seed, root=args.out)
    print(f"wrote {len(index)} frames across {len(index.sequences)} sequences to {args.out}")
    return 0


def _apply_ablation_flags(config: TrainConfig, args) -> TrainConfig:
    model = config.model
    if args.no_psf:
        model = replace(model, use_selective_fusion=False)
    if args.no_msam:
        model = replace(model, use_axis_attention=False)
    if args.no_pgt:
        model = replace(model, supervise_weight_map=False)
    return replace(config, model=model)


def _cmd_pretrain(args) -> int:
    from .harness import pretrain_stream

    config = _load_config(args)
    index = load_dataset(args.data, "train")
    out = Path(args.out) if args.out else _output_root() / "pretrain"
    path = pretrain_stream(args.stage, config, index, out)
    print(f"checkpoint written to {path}")
    return 0


def _cmd_train(args) -> int:
    from .harness import finetune

    config = _apply_ablation_flags(_load_config(args), args)
    index = load_dataset(args.data, "train")
    pretrained = None
    if args.from_pretrained:
        root = Path(args.from_pretrained)
        pretrained = {
            stream: root / f"pretrain_{stream}.pt"
            for stream in ("depth", "flow", "rgb")
            if (root / f"pretrain_{stream}.pt").is_file()
        }
    out = Path(args.out) if args.out else _output_root() / "train"
    path = finetune(config, index, pretrained, out)
    print(f"checkpoint written to {path}")
    return 0


def _cmd_eval(args) -> int:
    from .harness import run_eval

    index = load_dataset(args.data, "test")
    report = run_eval(args.checkpoint, index)
    print(report.to_markdown(args.dataset_name))
    out = Path(args.out) if args.out else _output_root() / "eval"
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "metrics.csv"
    csv_path.write_text(report.to_csv(args.dataset_name))
    print(f"csv written to {csv_path}")
    return 0


def _cmd_infer(args) -> int:
    from .harness import run_inference

    index = load_dataset(args.data, "test")
    out = Path(args.out) if args.out else _output_root() / "infer"
    written = run_inference(args.checkpoint, index, out)
    print(f"wrote {len(written)} saliency maps to {out}")
    return 0


def _cmd_visualize(args) -> int:
    from .visualize import visualize_weight_map

    index = load_dataset(args.data, "test")
    out = Path(args.out) if args.out else _output_root() / "visualize"
    written = visualize_weight_map(args.checkpoint, index, out, frame=args.frame)
    print(f"wrote {len(written)} images to {out}")
    return 0


_COMMANDS = {
    "fixtures": _cmd_fixtures,
    "pretrain": _cmd_pretrain,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "visualize-sw": _cmd_visualize,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
