"""Command-line entry points: synth, train, eval, ablate, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evaluation import Protocol, evaluate, point_sweep, run_ablation_grid, write_ablation_csv
from .model import ModelConfig, build_model, load_checkpoint, save_checkpoint
from .synth import SynthConfig, load_dataset, sample_pairs, save_dataset, synth_dataset
from .training import LossConfig, TrainConfig, train, write_loss_curve


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        return yaml.safe_load(text) or {}
    return json.loads(text)


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg_dict = _load_config_file(args.config)
    if args.seed is not None:
        cfg_dict["seed"] = args.seed
    cfg = SynthConfig(**cfg_dict)
    pyramids = synth_dataset(cfg)
    save_dataset(pyramids, args.out)
    print(f"wrote {len(pyramids)} pyramids to {args.out}")
    return 0


def _split_configs(raw: dict) -> tuple[ModelConfig, TrainConfig, LossConfig]:
    model_cfg = ModelConfig(**raw.get("model", {}))
    train_cfg = TrainConfig(**raw.get("train", {}))
    loss_cfg = LossConfig(**raw.get("loss", {}))
    return model_cfg, train_cfg, loss_cfg


def _cmd_train(args: argparse.Namespace) -> int:
    raw = _load_config_file(args.config)
    model_cfg, train_cfg, loss_cfg = _split_configs(raw)
    dataset = load_dataset(args.data)
    model = build_model(model_cfg)
    result = train(model, dataset, train_cfg, loss_cfg)
    save_checkpoint(model, args.out)
    if args.curve:
        write_loss_curve(result.loss_curve, args.curve)
    final = result.loss_curve[-1][1] if result.loss_curve else float("nan")
    print(f"trained {train_cfg.steps} steps (final loss {final:.4f}), checkpoint at {args.out}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.data)
    pairs = sample_pairs(
        dataset,
        n_per_image=args.pairs_per_image,
        hr_level=args.hr_level,
        patch_size=model.cfg.patch_size,
        seed=args.seed,
        fg_bias=1.0,
        require_nonempty=True,
    )
    protocol = Protocol.parse(args.protocol)
    report = evaluate(model, pairs, protocol, args.seed)
    Path(args.out).write_text(report.to_json())
    print(f"mean dice {report.mean_dice:.4f} over {len(report.per_sample_dice)} samples -> {args.out}")
    return 0


def _parse_axes(text: str) -> dict[str, list]:
    axes: dict[str, list] = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        name, _, values = part.partition("=")
        axes[name.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    if not axes:
        raise ValueError(f"no axes parsed from {text!r}")
    return axes


def _cmd_ablate(args: argparse.Namespace) -> int:
    raw = _load_config_file(args.config)
    model_cfg, train_cfg, loss_cfg = _split_configs(raw)
    if args.steps is not None:
        from dataclasses import replace

        train_cfg = replace(train_cfg, steps=args.steps)
    dataset = load_dataset(args.data)
    pairs = sample_pairs(
        dataset,
        n_per_image=args.pairs_per_image,
        hr_level=train_cfg.hr_level,
        patch_size=model_cfg.patch_size,
        seed=args.seed,
        fg_bias=1.0,
        require_nonempty=True,
    )
    cells = run_ablation_grid(
        dataset, pairs, _parse_axes(args.axes), model_cfg, train_cfg, loss_cfg,
        Protocol.parse(args.protocol), eval_seed=args.seed,
    )
    write_ablation_csv(cells, args.out)
    for c in cells:
        shown = "failed" if c.mean_dice is None else f"{c.mean_dice:.4f}"
        print(f"{c.axis}={c.value}: {shown}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.ckpt)
    dataset = load_dataset(args.data)
    pairs = sample_pairs(
        dataset, n_per_image=args.pairs_per_image, hr_level=args.hr_level,
        patch_size=model.cfg.patch_size, seed=args.seed, fg_bias=1.0, require_nonempty=True,
    )
    ks = [int(k) for k in args.ks.split(",")]
    curve = point_sweep(model, pairs, ks, args.seed)
    for k, dice in curve:
        print(f"k={k}: mean dice {dice:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps({"curve": curve}, indent=2))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    if args.ckpt:
        model = load_checkpoint(args.ckpt)
        ckpt_id = Path(args.ckpt).name
    else:
        print("warning: no checkpoint given, serving an untrained model", file=sys.stderr)
        model = build_model(ModelConfig(patch_size=args.patch_size))
        ckpt_id = "untrained"
    model.eval()
    app = create_app(model, ckpt_id=ckpt_id, max_image_px=args.max_image_px)
    if args.ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.ui_dir, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="duoseg", description="Dual-resolution promptable segmentation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic pyramid dataset")
    p.add_argument("--config", help="SynthConfig as JSON/YAML")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the learnable additions on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="{model:{...}, train:{...}, loss:{...}} as JSON/YAML")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--curve", help="optional loss-curve CSV path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="prompted zero-shot evaluation")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--protocol", default="box", help="box | box:JITTER | points:K | coarse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--pairs-per-image", type=int, default=2)
    p.add_argument("--hr-level", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train+eval a one-axis-at-a-time grid")
    p.add_argument("--data", required=True)
    p.add_argument("--axes", required=True, help='e.g. "mode=avg,max,concat_fc;hr_weight=0.25,0.5,0.75"')
    p.add_argument("--config", help="base configs as JSON/YAML")
    p.add_argument("--steps", type=int, default=None, help="override training steps per cell")
    p.add_argument("--protocol", default="box")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs-per-image", type=int, default=2)
    p.add_argument("--out", required=True, help="grid CSV path")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("sweep", help="mean dice vs click count")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--ks", default="3,5,10")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs-per-image", type=int, default=2)
    p.add_argument("--hr-level", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--ckpt")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--max-image-px", type=int, default=4_194_304)
    p.add_argument("--patch-size", type=int, default=128, help="used only when serving untrained")
    p.add_argument("--ui-dir", help="serve a static browser UI from this directory")
    p.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
