"""Binary checkpoint format for a ``SymbolicAutoencoder``.

Layout (all integers little-endian)::

    bytes 0-7    magic  b"SIGMAECK"
    bytes 8-11   uint32 format version
    bytes 12-15  uint32 header length H
    bytes 16..   H bytes of UTF-8 JSON header
    then         tensor payload

The header records the model config, both vocabularies, free-form metadata
and, per parameter, its name, dtype, shape, byte offset into the payload and
byte count. Tensors are stored C-contiguous in native little-endian order, so
a save/load round trip is bit-exact.
"""
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .transducer import ModelConfig, SymbolicAutoencoder
from .vocab import Vocab

MAGIC = b"SIGMAECK"
FORMAT_VERSION = 1
_DTYPES = {torch.float32: "<f4", torch.float64: "<f8", torch.float16: "<f2", torch.int64: "<i8"}


def save_checkpoint(pair: SymbolicAutoencoder, path, meta: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name, p in pair.named_parameters():
        arr = p.detach().cpu().contiguous().numpy()
        code = _DTYPES[p.dtype]
        raw = arr.astype(code, copy=False).tobytes(order="C")
        entries.append({"name": name, "dtype": code, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "format_version": FORMAT_VERSION,
        "config": pair.config.to_dict(),
        "vocab_x": pair.vocab_x.itos,
        "vocab_z": pair.vocab_z.itos,
        "meta": meta or {},
        "tensors": entries,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(hbytes)))
        fh.write(hbytes)
        for raw in blobs:
            fh.write(raw)


def read_header(path) -> tuple[dict, int]:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
    return header, 16 + hlen


def load_checkpoint(path) -> tuple[SymbolicAutoencoder, dict]:
    header, start = read_header(path)
    data = Path(path).read_bytes()[start:]
    vocab_x = Vocab(header["vocab_x"][3:])
    vocab_z = Vocab(header["vocab_z"][3:])
    pair = SymbolicAutoencoder(vocab_x, vocab_z, ModelConfig(**header["config"]))
    params = dict(pair.named_parameters())
    seen = set()
    for e in header["tensors"]:
        if e["name"] not in params:
            raise ValueError(f"checkpoint tensor {e['name']!r} does not exist in the model")
        p = params[e["name"]]
        arr = np.frombuffer(data, dtype=e["dtype"], count=int(np.prod(e["shape"], dtype=np.int64)), offset=e["offset"])
        arr = arr.reshape(e["shape"])
        if tuple(arr.shape) != tuple(p.shape):
            raise ValueError(f"shape mismatch for {e['name']}: {arr.shape} vs {tuple(p.shape)}")
        with torch.no_grad():
            p.copy_(torch.from_numpy(arr.copy()))
        seen.add(e["name"])
    missing = set(params) - seen
    if missing:
        raise ValueError(f"checkpoint lacks parameters: {sorted(missing)[:5]}")
    return pair, header["meta"]
