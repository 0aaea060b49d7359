"""Versioned binary checkpoints.

Layout: magic "CPLX" | u32 version | u64 header length | JSON header |
raw tensor blob. The header carries the model spec, the root seed, run
metadata, and a manifest of (name, shape, dtype, offset) records; arrays
are stored little-endian in manifest order, real plane before imaginary
(plane names end in ".re"/".im"). Writes are atomic (temp + rename) and
round-trips are bit-exact.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CPLX"
VERSION = 1

_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    spec: dict
    seed: int
    epoch: int
    state: dict
    optimizer_kind: str = ""
    optimizer_hyper: dict = field(default_factory=dict)
    optimizer_state: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def _dtype_code(arr):
    code = arr.dtype.newbyteorder("<").str
    if code not in _DTYPES:
        raise CheckpointError(f"unsupported dtype {arr.dtype} (use f4/f8/i8)")
    return code


def _manifest(arrays, start_offset):
    manifest = []
    offset = start_offset
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        code = _dtype_code(arr)
        nbytes = arr.size * arr.itemsize
        manifest.append({"name": name, "shape": list(arr.shape),
                         "dtype": code, "offset": offset, "nbytes": nbytes})
        offset += nbytes
    return manifest, offset


def save_checkpoint(path, *, spec, state, seed, epoch=0, optimizer=None,
                    extra=None):
    """Write a checkpoint atomically.

    `state` is a flat name -> array mapping (model parameters and buffers);
    `optimizer` is None or (kind, hyperparams dict, slot arrays dict).
    """
    opt_kind, opt_hyper, opt_state = ("", {}, {})
    if optimizer is not None:
        opt_kind, opt_hyper, opt_state = optimizer
    model_manifest, offset = _manifest(state, 0)
    opt_manifest, _ = _manifest(opt_state, offset)
    header = {
        "spec": spec,
        "seed": int(seed),
        "epoch": int(epoch),
        "extra": extra or {},
        "optimizer": {"kind": opt_kind, "hyper": opt_hyper},
        "tensors": model_manifest,
        "opt_tensors": opt_manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", VERSION))
            fh.write(struct.pack("<Q", len(header_bytes)))
            fh.write(header_bytes)
            for arrays in (state, opt_state):
                for arr in arrays.values():
                    arr = np.asarray(arr)
                    fh.write(np.ascontiguousarray(arr).astype(
                        arr.dtype.newbyteorder("<"), copy=False).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_blob(blob, manifest):
    out = {}
    for rec in manifest:
        dtype = _DTYPES[rec["dtype"]]
        start = rec["offset"]
        arr = np.frombuffer(blob[start:start + rec["nbytes"]], dtype=dtype)
        out[rec["name"]] = arr.reshape(rec["shape"]).copy()
    return out


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}, not a checkpoint")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(
                f"{path}: format version {version} not supported (reader is version {VERSION})")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        blob = fh.read()
    return Checkpoint(
        spec=header["spec"],
        seed=header["seed"],
        epoch=header["epoch"],
        state=_read_blob(blob, header["tensors"]),
        optimizer_kind=header["optimizer"]["kind"],
        optimizer_hyper=header["optimizer"]["hyper"],
        optimizer_state=_read_blob(blob, header["opt_tensors"]),
        extra=header.get("extra", {}),
    )
