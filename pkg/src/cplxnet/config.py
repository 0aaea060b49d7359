"""Flat key=value experiment configs with dotted keys.

Example:

    model.kind = resnet
    model.start_filters = 4
    opt.lr = 0.05

Any key can be overridden from the environment with the CPLX_ prefix,
upper-cased and with dots spelled as double underscores
(CPLX_OPT__LR=0.1). The fully resolved config is echoed next to the run
outputs so a run is reproducible from its artifacts alone.
"""

from __future__ import annotations

import os


class ConfigError(Exception):
    pass


ENV_PREFIX = "CPLX_"

DEFAULTS = {
    "model.kind": "resnet",
    "model.variant": "WS",
    "model.start_filters": "12",
    "model.blocks_per_stage": "16",
    "model.activation": "crelu",
    "model.norm": "cbn",
    "model.n_classes": "10",
    "model.is_complex": "true",
    "model.input_channels": "3",
    "model.init_flavor": "unitary",
    "model.init_criterion": "he",
    "model.feature_maps": "8",
    "model.kernel_size": "3",
    "dataset.kind": "gratings",
    "dataset.path": "",
    "dataset.n_train": "2000",
    "dataset.n_val": "500",
    "dataset.hw": "16",
    "dataset.noise": "0.3",
    "dataset.seq_len": "5",
    "dataset.seed": "123",
    "opt.kind": "sgd_nesterov",
    "opt.lr": "0.05",
    "opt.momentum": "0.9",
    "opt.beta1": "0.9",
    "opt.beta2": "0.999",
    "opt.eps": "1e-8",
    "sched.kind": "constant",
    "sched.breakpoints": "",
    "train.epochs": "10",
    "train.batch_size": "64",
    "train.clip_norm": "1.0",
    "train.patience": "30",
    "train.seed": "0",
    "train.ckpt_every": "1",
    "out.dir": "runs/out",
}


def parse_config_text(text, source="<config>"):
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        cfg[key] = value.strip()
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(text, source=path)


def apply_env_overrides(cfg, environ=None):
    environ = os.environ if environ is None else environ
    for var, value in environ.items():
        if var.startswith(ENV_PREFIX):
            key = var[len(ENV_PREFIX):].lower().replace("__", ".")
            cfg[key] = value
    return cfg


def resolve(cfg):
    """Defaults, then file values, then environment overrides."""
    merged = dict(DEFAULTS)
    merged.update(cfg)
    apply_env_overrides(merged)
    unknown = set(merged) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return merged


def resolved_text(cfg):
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


def get_str(cfg, key):
    return cfg[key]


def get_int(cfg, key):
    try:
        return int(cfg[key])
    except ValueError as err:
        raise ConfigError(f"{key}: expected an integer, got {cfg[key]!r}") from err


def get_float(cfg, key):
    try:
        return float(cfg[key])
    except ValueError as err:
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from err


def get_bool(cfg, key):
    value = cfg[key].strip().lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {cfg[key]!r}")


def parse_breakpoints(text):
    """'0:0.01,10:0.1' -> [(0, 0.01), (10, 0.1)]"""
    points = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            epoch, lr = part.split(":")
            points.append((int(epoch), float(lr)))
        except ValueError as err:
            raise ConfigError(f"bad schedule breakpoint {part!r}") from err
    return points
