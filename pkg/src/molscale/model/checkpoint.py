"""Versioned binary checkpoint container.

Layout: magic ``MSCK``, uint32 format version, uint64 header length, a UTF-8
JSON header (model config, metadata, tensor manifest of name/shape/offset),
then raw little-endian float32 payloads. Optimizer moments travel in the same
file under ``opt.m.*`` / ``opt.v.*`` names.
"""

import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import ValidationError

from molscale.diffcore import Tensor
from molscale.errors import CheckpointIOError
from molscale.model.config import ModelConfig
from molscale.model.params import ModelState

logger = logging.getLogger(__name__)

MAGIC = b"MSCK"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")
_PREAMBLE = struct.Struct("<4sIQ")


@dataclass
class Checkpoint:
    state: ModelState
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)


def encode_checkpoint(
    state: ModelState,
    arrays: Optional[dict[str, np.ndarray]] = None,
    meta: Optional[dict[str, Any]] = None,
) -> bytes:
    tensors = [(name, t.data) for name, t in state] + list((arrays or {}).items())
    manifest, chunks, offset = [], [], 0
    for name, data in tensors:
        payload = np.ascontiguousarray(data, dtype=PAYLOAD_DTYPE).tobytes()
        manifest.append({"name": name, "shape": list(data.shape), "offset": offset})
        chunks.append(payload)
        offset += len(payload)
    header = json.dumps(
        {
            "config": state.config.model_dump(),
            "meta": meta or {},
            "params": len(state),
            "tensors": manifest,
        }
    ).encode("utf-8")
    return b"".join([_PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)), header, *chunks])


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    if len(blob) < _PREAMBLE.size:
        raise CheckpointIOError(f"{source}: file too short for a checkpoint")
    magic, version, header_len = _PREAMBLE.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointIOError(f"{source}: not a molscale checkpoint")
    if version != FORMAT_VERSION:
        raise CheckpointIOError(f"{source}: unsupported checkpoint version {version}")
    start = _PREAMBLE.size + header_len
    try:
        header = json.loads(blob[_PREAMBLE.size:start].decode("utf-8"))
        config = ModelConfig.model_validate(header["config"])
        manifest = header["tensors"]
        n_params = int(header["params"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError) as e:
        raise CheckpointIOError(f"{source}: unreadable checkpoint header: {e}") from e

    loaded: dict[str, np.ndarray] = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = math.prod(shape)
        offset = start + entry["offset"]
        if offset + count * PAYLOAD_DTYPE.itemsize > len(blob):
            raise CheckpointIOError(f"{source}: payload of {entry['name']} is truncated")
        array = np.frombuffer(blob, dtype=PAYLOAD_DTYPE, count=count, offset=offset)
        loaded[entry["name"]] = array.reshape(shape).astype(np.float32)

    names = [entry["name"] for entry in manifest]
    params = {
        name: Tensor(loaded[name], requires_grad=True, dtype=np.float32, name=name)
        for name in names[:n_params]
    }
    arrays = {name: loaded[name] for name in names[n_params:]}
    return Checkpoint(ModelState(config, params), arrays, header.get("meta", {}))


def save_checkpoint(
    path: Path,
    state: ModelState,
    arrays: Optional[dict[str, np.ndarray]] = None,
    meta: Optional[dict[str, Any]] = None,
) -> Path:
    """Encode and write atomically."""
    return write_atomic(path, encode_checkpoint(state, arrays, meta))


def write_atomic(path: Path, blob: bytes) -> Path:
    """Write ``blob`` to a temporary sibling file, then rename it over ``path``."""
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as f:
            f.write(blob)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        tmp.unlink(missing_ok=True)
        raise CheckpointIOError(f"cannot write checkpoint {path}: {e}") from e
    logger.debug(f"Wrote checkpoint {path} ({len(blob):,} bytes)")
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(blob, str(path))
