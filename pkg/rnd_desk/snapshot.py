"""
Deterministic structured-binary container for nets, normalizers and runs

Layout: b"RNDS" | version byte | u32 header length (big-endian) | UTF-8 JSON
header | raw little-endian array bytes. The JSON header holds the tree with
arrays replaced by {"__array__": i} and a table of (dtype, shape, offset).
"""

import json
import struct
from typing import Any, Dict, List

import numpy as np

from .errors import SnapshotError

MAGIC = b"RNDS"
VERSION = 1
_PREFIX = struct.Struct(">4sBI")


def _little_endian(dtype: np.dtype) -> np.dtype:
    if dtype.byteorder in ("=", ">") and dtype.itemsize > 1:
        return dtype.newbyteorder("<")
    return dtype


def pack(tree: Dict[str, Any]) -> bytes:
    """Serialize a nested dict of arrays and JSON values"""
    arrays: List[np.ndarray] = []

    def encode(node: Any) -> Any:
        if isinstance(node, np.ndarray):
            if node.dtype.kind not in "biuf":
                raise SnapshotError(f"cannot store arrays of dtype {node.dtype}")
            arrays.append(node)
            return {"__array__": len(arrays) - 1}
        if isinstance(node, dict):
            for key in node:
                if not isinstance(key, str):
                    raise SnapshotError(f"snapshot keys must be strings, got {key!r}")
            return {key: encode(value) for key, value in node.items()}
        if isinstance(node, (list, tuple)):
            return [encode(value) for value in node]
        if isinstance(node, np.generic):
            return node.item()
        return node

    body = encode(tree)
    table = []
    chunks = []
    offset = 0
    for array in arrays:
        dtype = _little_endian(array.dtype)
        raw = np.ascontiguousarray(array, dtype=dtype).tobytes()
        table.append({"dtype": dtype.str, "shape": list(array.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)

    header = json.dumps({"tree": body, "arrays": table}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + b"".join(chunks)


def unpack(blob: bytes) -> Dict[str, Any]:
    """Inverse of `pack`; arrays come back in native byte order"""
    if len(blob) < _PREFIX.size:
        raise SnapshotError("snapshot shorter than its fixed prefix")
    magic, version, header_len = _PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad snapshot magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    start = _PREFIX.size
    if len(blob) < start + header_len:
        raise SnapshotError("snapshot header truncated")
    try:
        header = json.loads(blob[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"snapshot header unreadable: {exc}") from exc

    data = memoryview(blob)[start + header_len:]
    arrays = []
    for spec in header["arrays"]:
        end = spec["offset"] + spec["nbytes"]
        if end > len(data):
            raise SnapshotError("snapshot array data truncated")
        dtype = np.dtype(spec["dtype"])
        array = np.frombuffer(data[spec["offset"]:end], dtype=dtype).reshape(spec["shape"])
        arrays.append(array.astype(dtype.newbyteorder("="), copy=True))

    def decode(node: Any) -> Any:
        if isinstance(node, dict):
            if set(node) == {"__array__"}:
                return arrays[node["__array__"]]
            return {key: decode(value) for key, value in node.items()}
        if isinstance(node, list):
            return [decode(value) for value in node]
        return node

    return decode(header["tree"])


def rng_state(rng: np.random.Generator) -> Dict[str, Any]:
    return dict(rng.bit_generator.state)


def restore_rng(state: Dict[str, Any]) -> np.random.Generator:
    bit_generator = getattr(np.random, state["bit_generator"])()
    bit_generator.state = state
    return np.random.Generator(bit_generator)
