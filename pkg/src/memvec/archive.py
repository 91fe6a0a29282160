"""Weight archive io.

Layout: bytes 0-7 hold a little-endian uint64 header length H; bytes 8..8+H
hold a JSON object mapping tensor name -> {"dtype": "F32", "shape": [...],
"data_offsets": [begin, end]} with offsets relative to the data section that
follows; tensor data is contiguous little-endian float32. An optional
"__metadata__" entry carries string-valued metadata (the model config
snapshot lives under its "config" key).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .model import ModelConfig, ModelWeights, parameter_shapes


class ArchiveError(ValueError):
    pass


def save_tensors(path, tensors: dict[str, np.ndarray], metadata: dict[str, str] | None = None) -> None:
    """Write arrays in canonical (sorted-name) order; float32 only."""
    header: dict[str, object] = {}
    if metadata:
        header["__metadata__"] = {str(k): str(v) for k, v in metadata.items()}
    offset = 0
    blobs: list[bytes] = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        raw = arr.tobytes()
        header[name] = {
            "dtype": "F32",
            "shape": list(arr.shape),
            "data_offsets": [offset, offset + len(raw)],
        }
        offset += len(raw)
        blobs.append(raw)
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        for raw in blobs:
            f.write(raw)


def load_tensors(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Parse an archive; returns (tensors, metadata). Structured errors on
    malformed headers, truncation, or unsupported dtypes."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise ArchiveError("archive too short for a header length frame")
    (head_len,) = struct.unpack("<Q", data[:8])
    if 8 + head_len > len(data):
        raise ArchiveError("archive truncated inside the header")
    try:
        header = json.loads(data[8 : 8 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"malformed archive header: {exc}") from None
    if not isinstance(header, dict):
        raise ArchiveError("archive header must be a JSON object")
    body = data[8 + head_len :]
    metadata = header.pop("__metadata__", {})
    tensors: dict[str, np.ndarray] = {}
    for name, entry in header.items():
        try:
            dtype, shape, (begin, end) = entry["dtype"], entry["shape"], entry["data_offsets"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ArchiveError(f"malformed entry for tensor {name!r}: {exc}") from None
        if dtype != "F32":
            raise ArchiveError(f"tensor {name!r} has unsupported dtype {dtype!r}")
        if not 0 <= begin <= end <= len(body):
            raise ArchiveError(f"tensor {name!r} data range [{begin}, {end}) exceeds the archive")
        arr = np.frombuffer(body[begin:end], dtype="<f4")
        expected = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if arr.size != expected:
            raise ArchiveError(
                f"tensor {name!r} holds {arr.size} values but shape {shape} needs {expected}"
            )
        tensors[name] = arr.reshape(shape).copy()
    return tensors, dict(metadata)


def save_weights(weights: ModelWeights, path) -> None:
    metadata = {"config": json.dumps(weights.config.to_dict(), sort_keys=True)}
    save_tensors(path, {n: t.values for n, t in weights.tensors.items()}, metadata)


def load_weights(path, config: ModelConfig | None = None) -> ModelWeights:
    """Load and freeze a model, validating shapes against the config."""
    tensors, metadata = load_tensors(path)
    if config is None:
        if "config" not in metadata:
            raise ArchiveError("archive carries no config metadata; pass one explicitly")
        config = ModelConfig.from_dict(json.loads(metadata["config"]))
    expected = parameter_shapes(config)
    missing = sorted(set(expected) - set(tensors))
    extra = sorted(set(tensors) - set(expected))
    if missing or extra:
        raise ArchiveError(f"archive tensor names mismatch: missing {missing}, unexpected {extra}")
    for name, shape in expected.items():
        if tuple(tensors[name].shape) != shape:
            raise ArchiveError(
                f"tensor {name!r} has shape {tuple(tensors[name].shape)}, expected {shape}"
            )
    weights = ModelWeights(
        config=config,
        tensors={n: Tensor(a, requires_grad=False) for n, a in tensors.items()},
    )
    weights.freeze()
    return weights
