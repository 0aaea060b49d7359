"""Experiment runner.

Subcommands:

    run <config> [--resume ckpt]   train per config; writes history.csv,
                                   config.resolved and checkpoints
    eval <checkpoint> <data>       evaluate a checkpoint on a dataset
    verify <suite>                 gradcheck | whitening | initstats |
                                   budget | ellipticity
    flops <config>                 per-layer real-multiply counts
    ellipticity ...                covariance condition-number harness (CSV)

Exit codes: 0 ok, 1 verification failure, 2 config error, 3 NaN-guard abort.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import config as cfgmod
from .cbn import ellipticity_harness
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError
from .convlstm import ConvLstmForecaster
from .data import (channel_stats, load_cifar_binary, normalize_images,
                   synthetic_image_task, synthetic_phasor_sequences)
from .resnet import ModelSpec, build_model
from .train import (Adam, LrSchedule, SgdNesterov, classification_loss,
                    classification_metric, flops_breakdown, model_flops,
                    next_frame_loss, next_frame_mse, paper_lr_schedule,
                    train_loop)
from .verify import SUITES

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_NAN = 3


def _build_model_from_config(cfg):
    kind = cfgmod.get_str(cfg, "model.kind")
    if kind == "resnet":
        spec = ModelSpec(
            variant=cfgmod.get_str(cfg, "model.variant"),
            start_filters=cfgmod.get_int(cfg, "model.start_filters"),
            blocks_per_stage=cfgmod.get_int(cfg, "model.blocks_per_stage"),
            activation=cfgmod.get_str(cfg, "model.activation"),
            norm=cfgmod.get_str(cfg, "model.norm"),
            n_classes=cfgmod.get_int(cfg, "model.n_classes"),
            is_complex=cfgmod.get_bool(cfg, "model.is_complex"),
            input_channels=cfgmod.get_int(cfg, "model.input_channels"),
            init_flavor=cfgmod.get_str(cfg, "model.init_flavor"),
            init_criterion=cfgmod.get_str(cfg, "model.init_criterion"),
            seed=cfgmod.get_int(cfg, "train.seed"),
        )
        try:
            spec.validate()
        except ValueError as err:
            raise ConfigError(str(err)) from err
        return build_model(spec), {"kind": "resnet", **spec.to_dict()}
    if kind == "convlstm":
        model = ConvLstmForecaster(
            in_channels=cfgmod.get_int(cfg, "model.input_channels"),
            feature_maps=cfgmod.get_int(cfg, "model.feature_maps"),
            kernel_size=cfgmod.get_int(cfg, "model.kernel_size"),
            complex_valued=cfgmod.get_bool(cfg, "model.is_complex"),
            seq_len=cfgmod.get_int(cfg, "dataset.seq_len"),
            seed=cfgmod.get_int(cfg, "train.seed"),
        )
        spec = {"kind": "convlstm",
                "in_channels": model.cell.in_channels,
                "feature_maps": model.cell.hidden_channels,
                "kernel_size": model.cell.kernel_size,
                "complex_valued": model.complex_valued,
                "seq_len": model.seq_len,
                "seed": cfgmod.get_int(cfg, "train.seed")}
        return model, spec
    raise ConfigError(f"model.kind must be 'resnet' or 'convlstm', got {kind!r}")


def _model_from_spec_dict(spec):
    kind = spec.get("kind")
    if kind == "resnet":
        fields = {k: v for k, v in spec.items() if k != "kind"}
        return build_model(ModelSpec.from_dict(fields))
    if kind == "convlstm":
        return ConvLstmForecaster(
            in_channels=spec["in_channels"], feature_maps=spec["feature_maps"],
            kernel_size=spec["kernel_size"], complex_valued=spec["complex_valued"],
            seq_len=spec["seq_len"], seed=spec.get("seed", 0))
    raise CheckpointError(f"unknown model kind in checkpoint: {kind!r}")


def _build_dataset(cfg):
    """Returns (train_data, val_data, task, extra_meta)."""
    kind = cfgmod.get_str(cfg, "dataset.kind")
    seed = cfgmod.get_int(cfg, "dataset.seed")
    n_train = cfgmod.get_int(cfg, "dataset.n_train")
    n_val = cfgmod.get_int(cfg, "dataset.n_val")
    if kind == "gratings":
        hw = cfgmod.get_int(cfg, "dataset.hw")
        noise = cfgmod.get_float(cfg, "dataset.noise")
        train = synthetic_image_task(n_train, seed, hw=hw, noise=noise)
        val = synthetic_image_task(n_val, seed + 1, hw=hw, noise=noise)
        return train, val, "classification", {}
    if kind == "phasors":
        t_len = cfgmod.get_int(cfg, "dataset.seq_len")
        hw = cfgmod.get_int(cfg, "dataset.hw")
        noise = cfgmod.get_float(cfg, "dataset.noise")
        train = synthetic_phasor_sequences(n_train, t_len, seed, hw=hw, noise=noise)
        val = synthetic_phasor_sequences(n_val, t_len, seed + 1, hw=hw, noise=noise)
        return train, val, "sequence", {}
    if kind == "cifar10":
        path = cfgmod.get_str(cfg, "dataset.path")
        if not path or not os.path.exists(path):
            raise ConfigError(f"dataset.path does not exist: {path!r}")
        images, labels = load_cifar_binary(path)
        if n_train + n_val > images.shape[0]:
            raise ConfigError(f"requested {n_train}+{n_val} examples, file has "
                              f"{images.shape[0]}")
        mean, std = channel_stats(images[:n_train])
        images = normalize_images(images, mean, std)
        train = (images[:n_train], labels[:n_train])
        val = (images[n_train:n_train + n_val], labels[n_train:n_train + n_val])
        meta = {"norm_mean": mean.tolist(), "norm_std": std.tolist()}
        return train, val, "classification", meta
    raise ConfigError(f"dataset.kind must be gratings|phasors|cifar10, got {kind!r}")


def _build_optimizer(cfg, model):
    kind = cfgmod.get_str(cfg, "opt.kind")
    lr = cfgmod.get_float(cfg, "opt.lr")
    if kind == "sgd_nesterov":
        return SgdNesterov(model.parameters(), lr=lr,
                           momentum=cfgmod.get_float(cfg, "opt.momentum"))
    if kind == "adam":
        return Adam(model.parameters(), lr=lr,
                    beta1=cfgmod.get_float(cfg, "opt.beta1"),
                    beta2=cfgmod.get_float(cfg, "opt.beta2"),
                    eps=cfgmod.get_float(cfg, "opt.eps"))
    raise ConfigError(f"opt.kind must be sgd_nesterov|adam, got {kind!r}")


def _build_schedule(cfg):
    kind = cfgmod.get_str(cfg, "sched.kind")
    if kind == "constant":
        return LrSchedule([(0, cfgmod.get_float(cfg, "opt.lr"))])
    if kind == "paper":
        return paper_lr_schedule()
    if kind == "custom":
        points = cfgmod.parse_breakpoints(cfgmod.get_str(cfg, "sched.breakpoints"))
        return LrSchedule(points)
    raise ConfigError(f"sched.kind must be constant|paper|custom, got {kind!r}")


HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "val_loss", "metric", "flag")


def _write_history(path, rows):
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in HISTORY_COLUMNS])
    os.replace(tmp, path)


def cmd_run(args):
    cfg = cfgmod.resolve(cfgmod.load_config(args.config))
    out_dir = cfgmod.get_str(cfg, "out.dir")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.resolved"), "w", encoding="utf-8") as fh:
        fh.write(cfgmod.resolved_text(cfg))
    train_data, val_data, task, meta = _build_dataset(cfg)
    model, spec_dict = _build_model_from_config(cfg)
    optimizer = _build_optimizer(cfg, model)
    schedule = _build_schedule(cfg)
    seed = cfgmod.get_int(cfg, "train.seed")
    start_epoch = 0
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        model.load_state_arrays(
            {k[len("model:"):]: v for k, v in ckpt.state.items() if k.startswith("model:")}
            if any(k.startswith("model:") for k in ckpt.state) else ckpt.state)
        optimizer.load_state_arrays(ckpt.optimizer_state)
        start_epoch = ckpt.epoch + 1
    if task == "classification":
        loss_fn, metric_fn, higher = classification_loss, classification_metric, True
    else:
        loss_fn, metric_fn, higher = next_frame_loss, (lambda m, d: next_frame_mse(m, d)), False
    ckpt_every = cfgmod.get_int(cfg, "train.ckpt_every")

    def epoch_hook(epoch, row, mdl, opt):
        if (epoch + 1) % ckpt_every == 0:
            save_checkpoint(os.path.join(out_dir, "last.ckpt"), spec=spec_dict,
                            state=mdl.state_arrays(), seed=seed, epoch=epoch,
                            optimizer=(opt.kind, opt.hyperparams(), opt.state_arrays()),
                            extra={"config": cfg, **meta})

    result = train_loop(
        model, train_data, val_data, loss_fn=loss_fn, metric_fn=metric_fn,
        optimizer=optimizer, schedule=schedule,
        epochs=cfgmod.get_int(cfg, "train.epochs"),
        batch_size=cfgmod.get_int(cfg, "train.batch_size"),
        clip_norm=cfgmod.get_float(cfg, "train.clip_norm"),
        seed=seed, higher_is_better=higher,
        patience=cfgmod.get_int(cfg, "train.patience"),
        start_epoch=start_epoch, epoch_hook=epoch_hook)
    _write_history(os.path.join(out_dir, "history.csv"), result.history)
    if result.best_state is not None:
        save_checkpoint(os.path.join(out_dir, "best.ckpt"), spec=spec_dict,
                        state=result.best_state, seed=seed, epoch=result.best_epoch,
                        optimizer=(optimizer.kind, optimizer.hyperparams(),
                                   result.best_optimizer_state),
                        extra={"config": cfg, **meta})
    if result.aborted:
        print(f"aborted: {result.abort_reason}", file=sys.stderr)
        return EXIT_NAN
    if result.history:
        last = result.history[-1]
        print(f"done: {len(result.history)} epochs, best metric "
              f"{result.best_metric:.4f} at epoch {result.best_epoch}, "
              f"final val loss {last['val_loss']:.6f}")
    return EXIT_OK


def _parse_data_descriptor(desc, ckpt):
    """'gratings:500:7', 'phasors:200:9' or 'cifar10:<path>'."""
    parts = desc.split(":")
    kind = parts[0]
    cfg = ckpt.extra.get("config", {})
    if kind == "gratings":
        n = int(parts[1]) if len(parts) > 1 else 500
        seed = int(parts[2]) if len(parts) > 2 else 1
        hw = int(cfg.get("dataset.hw", "16"))
        noise = float(cfg.get("dataset.noise", "0.3"))
        return synthetic_image_task(n, seed, hw=hw, noise=noise), "classification"
    if kind == "phasors":
        n = int(parts[1]) if len(parts) > 1 else 200
        seed = int(parts[2]) if len(parts) > 2 else 1
        t_len = int(cfg.get("dataset.seq_len", "5"))
        hw = int(cfg.get("dataset.hw", "8"))
        noise = float(cfg.get("dataset.noise", "0.0"))
        return synthetic_phasor_sequences(n, t_len, seed, hw=hw, noise=noise), "sequence"
    if kind == "cifar10":
        path = desc.split(":", 1)[1]
        images, labels = load_cifar_binary(path)
        mean = np.array(ckpt.extra["norm_mean"])
        std = np.array(ckpt.extra["norm_std"])
        return (normalize_images(images, mean, std), labels), "classification"
    raise ConfigError(f"unknown data descriptor {desc!r}")


def cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    model = _model_from_spec_dict(ckpt.spec)
    model.load_state_arrays(ckpt.state)
    model.eval()
    data, task = _parse_data_descriptor(args.data, ckpt)
    if task == "classification":
        acc = classification_metric(model, data)
        print(f"accuracy = {acc:.4f} on {data[0].shape[0]} examples")
    else:
        err = next_frame_mse(model, data)
        print(f"mse = {err:.6f} on {data[0][0].shape[0]} sequences")
    return EXIT_OK


def cmd_verify(args):
    suite = SUITES.get(args.suite)
    if suite is None:
        print(f"unknown suite {args.suite!r}; options: {sorted(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    passed, lines = suite()
    for line in lines:
        print(line)
    return EXIT_OK if passed else EXIT_VERIFY_FAIL


def cmd_flops(args):
    cfg = cfgmod.resolve(cfgmod.load_config(args.config))
    model, spec_dict = _build_model_from_config(cfg)
    hw = (cfgmod.get_int(cfg, "dataset.hw"), cfgmod.get_int(cfg, "dataset.hw"))
    rows, total = flops_breakdown(model, hw)
    for name, count in rows:
        print(f"{name:24s} {count:>14,}")
    print(f"{'total':24s} {total:>14,}")
    if spec_dict.get("kind") == "resnet" and spec_dict.get("is_complex"):
        twin = ModelSpec.from_dict({k: v for k, v in spec_dict.items() if k != "kind"})
        twin.is_complex = False
        twin.activation = "relu"
        twin.norm = "bn"
        real_total = model_flops(build_model(twin), hw)
        print(f"{'real twin (same geometry)':24s} {real_total:>14,}")
        print(f"complex/real multiply ratio: {total / real_total:.3f}")
    return EXIT_OK


def cmd_ellipticity(args):
    rows = []
    for seed in range(args.seeds):
        conds = ellipticity_harness(args.points, args.layers, args.mode, seed)
        for layer, cond in enumerate(conds):
            rows.append((seed, layer, cond))
    out = sys.stdout if args.out is None else open(args.out, "w", encoding="utf-8")
    try:
        writer = csv.writer(out)
        writer.writerow(("seed", "layer", "condition"))
        for row in rows:
            writer.writerow(row)
    finally:
        if args.out is not None:
            out.close()
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(prog="cplxnet",
                                     description="complex-valued network experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train a model per config")
    p.add_argument("config")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("data", help="gratings:N:SEED | phasors:N:SEED | cifar10:PATH")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("flops", help="per-layer real multiply counts")
    p.add_argument("config")
    p.set_defaults(fn=cmd_flops)

    p = sub.add_parser("ellipticity", help="covariance condition harness")
    p.add_argument("--layers", type=int, default=20)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--mode", choices=("naive", "full"), default="full")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ellipticity)
    return parser


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
