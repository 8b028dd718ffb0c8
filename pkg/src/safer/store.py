"""Named-tensor container I/O.

Files use the safetensors interchange layout: an 8-byte little-endian
unsigned header length, a JSON header mapping tensor names to
``{"dtype", "shape", "data_offsets"}`` entries (plus an optional
``__metadata__`` string map), followed by the raw row-major payloads.
Payload bytes round-trip exactly; third-party safetensors readers can
open anything written here and vice versa.

Only float16/float32/float64 tensors are supported. All in-memory
compute elsewhere in the package is float64; ``NamedTensor.as_f64`` is
the boundary cast.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, FormatError, IntegrityError

# dtype tag <-> little-endian numpy dtype <-> header tag
_TAG_TO_NP = {
    "float16": np.dtype("<f2"),
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
}
_TAG_TO_HDR = {"float16": "F16", "float32": "F32", "float64": "F64"}
_HDR_TO_TAG = {v: k for k, v in _TAG_TO_HDR.items()}

_MAX_HEADER_BYTES = 100_000_000  # sanity cap against garbage headers

METADATA_PREFIX = "safer."


def _canonical_array(values, dtype_tag: str) -> np.ndarray:
    if dtype_tag not in _TAG_TO_NP:
        raise ArgumentError(f"unsupported dtype {dtype_tag!r}; expected one of {sorted(_TAG_TO_NP)}")
    arr = np.asarray(values)
    if arr.dtype != _TAG_TO_NP[dtype_tag]:
        arr = arr.astype(_TAG_TO_NP[dtype_tag], copy=False)
    return np.ascontiguousarray(arr)


@dataclass
class NamedTensor:
    """A named, typed, row-major tensor."""

    name: str
    values: np.ndarray
    dtype: str = "float32"

    def __post_init__(self):
        if not self.name:
            raise ArgumentError("tensor name must be non-empty")
        self.values = _canonical_array(self.values, self.dtype)

    @classmethod
    def from_array(cls, name: str, values) -> "NamedTensor":
        """Wrap an array, inferring the dtype tag from its dtype."""
        arr = np.asarray(values)
        kind = {2: "float16", 4: "float32", 8: "float64"}.get(arr.dtype.itemsize)
        if arr.dtype.kind != "f" or kind is None:
            raise ArgumentError(f"unsupported array dtype {arr.dtype}; expected float16/32/64")
        return cls(name, arr, dtype=kind)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.values.shape)

    def as_f64(self) -> np.ndarray:
        return self.values.astype(np.float64)

    def tobytes(self) -> bytes:
        return self.values.tobytes()


@dataclass
class TensorStore:
    """An ordered collection of named tensors plus free-form string metadata.

    Stores are treated as immutable once loaded; mutate an owned copy
    (see :meth:`copy`).
    """

    tensors: dict[str, NamedTensor] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def add(self, tensor: NamedTensor) -> None:
        if tensor.name in self.tensors:
            raise ArgumentError(f"duplicate tensor name {tensor.name!r}")
        self.tensors[tensor.name] = tensor

    def replace(self, tensor: NamedTensor) -> None:
        if tensor.name not in self.tensors:
            raise ArgumentError(f"no tensor named {tensor.name!r} to replace")
        # rebuild so insertion order is untouched
        self.tensors[tensor.name] = tensor

    def names(self) -> list[str]:
        return list(self.tensors)

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __len__(self) -> int:
        return len(self.tensors)

    def __getitem__(self, name: str) -> NamedTensor:
        try:
            return self.tensors[name]
        except KeyError:
            raise KeyError(f"store has no tensor named {name!r}") from None

    def array(self, name: str) -> np.ndarray:
        return self[name].values

    def copy(self) -> "TensorStore":
        """Shallow copy: entries may be replaced without touching the source."""
        return TensorStore(dict(self.tensors), dict(self.metadata))


def _check_nonfinite(store: TensorStore) -> None:
    for name, tensor in store.tensors.items():
        vals = tensor.values
        if vals.size and not np.all(np.isfinite(vals.astype(np.float64))):
            raise ArgumentError(
                f"tensor {name!r} contains NaN/Inf; pass allow_nonfinite=True to write anyway"
            )


def save_store(store: TensorStore, path, *, allow_nonfinite: bool = False) -> None:
    """Write a store to disk in the container format.

    Tensor order is preserved exactly; metadata keys are written sorted
    so identical stores serialize to identical bytes.
    """
    if not allow_nonfinite:
        _check_nonfinite(store)
    for key, value in store.metadata.items():
        if not isinstance(key, str) or not isinstance(value, str):
            raise ArgumentError("metadata must map strings to strings")

    header: dict[str, object] = {}
    if store.metadata:
        header["__metadata__"] = {k: store.metadata[k] for k in sorted(store.metadata)}
    offset = 0
    payloads = []
    for name, tensor in store.tensors.items():
        data = tensor.tobytes()
        header[name] = {
            "dtype": _TAG_TO_HDR[tensor.dtype],
            "shape": list(tensor.shape),
            "data_offsets": [offset, offset + len(data)],
        }
        payloads.append(data)
        offset += len(data)

    header_bytes = json.dumps(header, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    # pad with spaces to an 8-byte boundary, matching common writers
    pad = (-(8 + len(header_bytes))) % 8
    header_bytes += b" " * pad

    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for data in payloads:
            fh.write(data)


def _parse_header(raw: bytes, path) -> dict:
    def reject_duplicates(pairs):
        seen = set()
        out = {}
        for key, value in pairs:
            if key in seen:
                raise FormatError(f"{path}: duplicate name {key!r} in header")
            seen.add(key)
            out[key] = value
        return out

    try:
        header = json.loads(raw.decode("utf-8"), object_pairs_hook=reject_duplicates)
    except FormatError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: header is not valid JSON ({exc})") from exc
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    return header


def load_store(path) -> TensorStore:
    """Read a store from disk, eagerly materializing every tensor."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IntegrityError(f"cannot read {path}: {exc}") from exc

    if len(blob) < 8:
        raise FormatError(f"{path}: file too short for a header length")
    (header_len,) = struct.unpack("<Q", blob[:8])
    if header_len > _MAX_HEADER_BYTES:
        raise FormatError(f"{path}: implausible header length {header_len}")
    if 8 + header_len > len(blob):
        raise FormatError(f"{path}: header length {header_len} exceeds file size")

    header = _parse_header(blob[8 : 8 + header_len], path)
    buffer = blob[8 + header_len :]

    metadata: dict[str, str] = {}
    raw_meta = header.pop("__metadata__", {})
    if not isinstance(raw_meta, dict) or any(
        not isinstance(k, str) or not isinstance(v, str) for k, v in raw_meta.items()
    ):
        raise FormatError(f"{path}: __metadata__ must map strings to strings")
    metadata.update(raw_meta)

    store = TensorStore(metadata=metadata)
    spans = []
    for name, entry in header.items():
        if not isinstance(entry, dict):
            raise FormatError(f"{path}: entry for {name!r} is not an object")
        try:
            hdr_dtype = entry["dtype"]
            shape = entry["shape"]
            begin, end = entry["data_offsets"]
        except (KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}: malformed entry for {name!r}") from exc
        if hdr_dtype not in _HDR_TO_TAG:
            raise FormatError(f"{path}: unsupported dtype {hdr_dtype!r} for {name!r}")
        tag = _HDR_TO_TAG[hdr_dtype]
        if not isinstance(shape, list) or any(not isinstance(s, int) or s < 0 for s in shape):
            raise FormatError(f"{path}: invalid shape {shape!r} for {name!r}")
        if not isinstance(begin, int) or not isinstance(end, int) or begin < 0 or end < begin:
            raise FormatError(f"{path}: invalid data_offsets for {name!r}")
        np_dtype = _TAG_TO_NP[tag]
        expected = int(np.prod(shape, dtype=np.int64)) * np_dtype.itemsize
        if end - begin != expected:
            raise FormatError(
                f"{path}: {name!r} payload length {end - begin} does not match shape {shape}"
            )
        if end > len(buffer):
            raise IntegrityError(f"{path}: payload for {name!r} is truncated")
        spans.append((begin, end, name))
        arr = np.frombuffer(buffer[begin:end], dtype=np_dtype).reshape(shape)
        store.add(NamedTensor(name, arr.copy(), dtype=tag))

    spans.sort()
    for (b0, e0, n0), (b1, _e1, n1) in zip(spans, spans[1:]):
        if b1 < e0:
            raise FormatError(f"{path}: payloads of {n0!r} and {n1!r} overlap")

    return store
