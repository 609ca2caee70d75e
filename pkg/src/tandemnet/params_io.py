"""Binary container for model parameters and mean images.

Layout (all integers little-endian):

    magic   4 bytes  b"TNPC"
    version u32      currently 1
    seed    i64
    name    u16 length + utf-8 bytes         (spec name, or "mean-image")
    count   u32
    entry*  name (u16 + utf-8), ndim u8, dims u64 each, offset u64
    data    concatenated raw little-endian float64

Offsets count float64 elements from the start of the data block.  Entry
order is preserved, so save -> load -> save is byte-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .networks import ModelParams

MAGIC = b"TNPC"
VERSION = 1


def save_params(path, params: ModelParams) -> None:
    header = bytearray()
    header += MAGIC
    header += struct.pack("<I", VERSION)
    header += struct.pack("<q", params.seed)
    header += _pack_name(params.spec_name)
    header += struct.pack("<I", len(params.tensors))
    blobs = []
    offset = 0
    for name, arr in params.tensors.items():
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        header += _pack_name(name)
        header += struct.pack("<B", arr.ndim)
        header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        header += struct.pack("<Q", offset)
        blobs.append(arr.astype("<f8").tobytes())
        offset += arr.size
    with open(path, "wb") as fh:
        fh.write(bytes(header))
        for blob in blobs:
            fh.write(blob)


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a parameter container (bad magic {raw[:4]!r})")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    pos = 8
    (seed,) = struct.unpack_from("<q", raw, pos)
    pos += 8
    spec_name, pos = _unpack_name(raw, pos, path)
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    entries = []
    for _ in range(count):
        name, pos = _unpack_name(raw, pos, path)
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        dims = struct.unpack_from(f"<{ndim}Q", raw, pos)
        pos += 8 * ndim
        (offset,) = struct.unpack_from("<Q", raw, pos)
        pos += 8
        entries.append((name, dims, offset))
    data = np.frombuffer(raw, dtype="<f8", offset=pos)
    tensors = {}
    for name, dims, offset in entries:
        size = int(np.prod(dims)) if dims else 1
        if offset + size > data.size:
            raise ValueError(f"{path}: entry {name!r} overruns data block")
        tensors[name] = data[offset : offset + size].reshape(dims).astype(np.float64)
    return ModelParams(spec_name, seed, tensors)


def _pack_name(name: str) -> bytes:
    encoded = name.encode("utf-8")
    return struct.pack("<H", len(encoded)) + encoded


def _unpack_name(raw: bytes, pos: int, path) -> tuple[str, int]:
    (n,) = struct.unpack_from("<H", raw, pos)
    pos += 2
    if pos + n > len(raw):
        raise ValueError(f"{path}: truncated header at byte {pos}")
    return raw[pos : pos + n].decode("utf-8"), pos + n


MEAN_CONTAINER_NAME = "mean-image"


def save_mean_image(path, mean: np.ndarray) -> None:
    save_params(path, ModelParams(MEAN_CONTAINER_NAME, 0, {"mean": mean}))


def load_mean_image(path) -> np.ndarray:
    params = load_params(path)
    if params.spec_name != MEAN_CONTAINER_NAME or "mean" not in params.tensors:
        raise ValueError(f"{path}: not a mean-image container")
    return params.tensors["mean"]
