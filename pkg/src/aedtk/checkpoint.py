"""Binary checkpoints.

Layout, all integers little-endian:

    b"AEDC"                magic
    u32                    format version (1)
    u32                    length of the JSON metadata blob
    bytes                  UTF-8 JSON: {"spec": <network spec>,
                           "classes": [...], "meta": {...}} with sorted keys
    u32                    tensor count
    per tensor:
        u16  name length, then the UTF-8 name
        u8   dtype code (0 = float32, 1 = float64)
        u8   ndim, then ndim * u32 dims
        payload, row-major little-endian

Network parameters are stored in the public layout (conv weights as
(out, in, k, k), dense weights as (out, in)); feature standardization
statistics ride along as the tensors "feature_mean" / "feature_std".
Writing is deterministic: identical state produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nnet import Network, NetworkSpec

CHECKPOINT_MAGIC = b"AEDC"
CHECKPOINT_VERSION = 1
_DTYPE_CODES = {0: "<f4", 1: "<f8"}
_CODES_BY_KIND = {"f4": 0, "f8": 1}


class CheckpointError(Exception):
    pass


def _write_tensor(fh, name: str, array: np.ndarray) -> None:
    kind = array.dtype.str.lstrip("<>|=")
    if kind not in _CODES_BY_KIND:
        array = array.astype("<f4")
        kind = "f4"
    arr = np.ascontiguousarray(array, dtype="<" + kind)
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<BB", _CODES_BY_KIND[kind], arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes())


def _read_tensor(fh) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", fh.read(2))
    name = fh.read(name_len).decode("utf-8")
    code, ndim = struct.unpack("<BB", fh.read(2))
    if code not in _DTYPE_CODES:
        raise CheckpointError(f"unknown dtype code {code}")
    shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
    dtype = np.dtype(_DTYPE_CODES[code])
    count = int(np.prod(shape)) if ndim else 1
    payload = fh.read(count * dtype.itemsize)
    if len(payload) != count * dtype.itemsize:
        raise CheckpointError(f"truncated tensor {name!r}")
    return name, np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def save_checkpoint(
    path,
    network: Network,
    classes: list[str],
    feature_mean: np.ndarray | None = None,
    feature_std: np.ndarray | None = None,
    meta: dict | None = None,
) -> None:
    header = {
        "spec": network.spec.to_dict(),
        "classes": list(classes),
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tensors = list(network.state_dict().items())
    if feature_mean is not None:
        tensors.append(("feature_mean", np.asarray(feature_mean)))
        tensors.append(("feature_std", np.asarray(feature_std)))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, array in tensors:
            _write_tensor(fh, name, array)


def load_checkpoint(path) -> dict:
    """Returns {"network", "classes", "meta", "feature_mean", "feature_std"}."""
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = dict(_read_tensor(fh) for _ in range(count))
    spec = NetworkSpec.from_dict(header["spec"])
    network = Network(spec)
    state = {k: v for k, v in tensors.items() if not k.startswith("feature_")}
    network.load_state_dict(state)
    return {
        "network": network,
        "classes": header["classes"],
        "meta": header.get("meta", {}),
        "feature_mean": tensors.get("feature_mean"),
        "feature_std": tensors.get("feature_std"),
    }
