"""Binary model files.

Layout (all integers little-endian)::

    8 bytes   magic b"PERSILND"
    uint32    format version
    uint32    length of the JSON header in bytes
    bytes     UTF-8 JSON: the NetworkSpec plus optional metadata
    uint64    length of the parameter payload in bytes
    bytes     float32 parameters, C order, in declaration order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..exceptions import InvalidInputError
from .model import Network, NetworkSpec

MAGIC = b"PERSILND"
VERSION = 1

__all__ = ["MAGIC", "VERSION", "save_model", "load_model", "model_to_bytes", "model_from_bytes"]


def model_to_bytes(network: Network, metadata: dict | None = None) -> bytes:
    header = {"spec": network.spec.to_dict()}
    if metadata:
        header["metadata"] = metadata
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in network.params.values())
    return b"".join(
        [MAGIC, struct.pack("<II", VERSION, len(blob)), blob, struct.pack("<Q", len(payload)), payload]
    )


def model_from_bytes(data: bytes) -> tuple[Network, dict]:
    if data[:8] != MAGIC:
        raise InvalidInputError("not a model file (bad magic)")
    try:
        version, n_json = struct.unpack_from("<II", data, 8)
        if version != VERSION:
            raise InvalidInputError(f"unsupported model file version {version}")
        pos = 16
        header = json.loads(data[pos : pos + n_json].decode("utf-8"))
        pos += n_json
        (n_payload,) = struct.unpack_from("<Q", data, pos)
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"corrupt model header: {exc}") from None
    pos += 8
    payload = data[pos : pos + n_payload]
    if len(payload) != n_payload:
        raise InvalidInputError("model file is truncated")
    spec = NetworkSpec.from_dict(header["spec"])
    params = {}
    offset = 0
    for name, shape in spec.parameter_shapes().items():
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        params[name] = arr.reshape(shape).astype(np.float64)
        offset += 4 * count
    if offset != n_payload:
        raise InvalidInputError(f"payload holds {n_payload} bytes, spec needs {offset}")
    return Network(spec, params), header.get("metadata", {})


def save_model(path, network: Network, metadata: dict | None = None) -> None:
    Path(path).write_bytes(model_to_bytes(network, metadata))


def load_model(path) -> Network:
    network, _ = model_from_bytes(Path(path).read_bytes())
    return network
