"""Merge a projector into checkpoint weights.

The behavioral contract: after patching, every matched weight applied
to an embedding e must equal the original weight applied to (P e).
Checkpoints differ in storage orientation, so the contraction axis is
resolved per tensor: `input-cols` means the embedding indexes axis 1
(W' = W P), `input-rows` means axis 0 (W' = P^T W). With orientation
`auto`, exactly one axis must have the expected extent; square weights
are a hard error rather than a guess.

Patch math runs in float64 and casts back to the stored dtype; tensors
the selector does not match are carried over untouched, byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousOrientationError,
    ArgumentError,
    SelectorError,
    VerificationError,
)
from .projector import Projector
from .store import NamedTensor, TensorStore

# text-conditioned cross-attention K/V projections; the only weights
# that consume text embeddings directly
DEFAULT_PATTERN = r"attn2\.to_[kv]\.weight$"

ORIENT_AUTO = "auto"
ORIENT_ROWS = "input-rows"
ORIENT_COLS = "input-cols"

VERIFY_TOLERANCES = {"float64": 1e-9, "float32": 1e-4, "float16": 3e-2}


@dataclass
class LayerSelector:
    """Selects checkpoint tensors by name and declares the embedding axis."""

    pattern: str = DEFAULT_PATTERN
    expected_dim: int = 768
    orientation: str = ORIENT_AUTO

    def __post_init__(self):
        if self.orientation not in (ORIENT_AUTO, ORIENT_ROWS, ORIENT_COLS):
            raise ArgumentError(f"unknown orientation {self.orientation!r}")
        if self.expected_dim < 1:
            raise ArgumentError("expected_dim must be >= 1")
        try:
            self._regex = re.compile(self.pattern)
        except re.error as exc:
            raise ArgumentError(f"invalid selector pattern: {exc}") from exc

    def matches(self, store: TensorStore) -> list[str]:
        return [name for name in store.names() if self._regex.search(name)]


@dataclass
class PatchRecord:
    name: str
    shape: tuple[int, ...]
    orientation: str
    max_delta: float
    fro_delta: float
    cast_error: float

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "shape": list(self.shape),
                "orientation": self.orientation,
                "max_delta": self.max_delta,
                "fro_delta": self.fro_delta,
                "cast_error": self.cast_error,
            },
            separators=(", ", ": "),
        )


@dataclass
class PatchReport:
    records: list[PatchRecord]
    projector_fingerprint: str
    pattern: str

    @property
    def count(self) -> int:
        return len(self.records)

    def to_text(self) -> str:
        head = json.dumps(
            {
                "projector_fingerprint": self.projector_fingerprint,
                "pattern": self.pattern,
                "count": self.count,
            },
            separators=(", ", ": "),
        )
        lines = [head] + [r.to_json_line() for r in self.records]
        return "\n".join(lines) + "\n"

    def text_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def projector_fingerprint(proj: Projector) -> str:
    return hashlib.sha256(proj.matrix.astype("<f8").tobytes()).hexdigest()


def _resolve_orientation(name: str, shape: tuple[int, ...], sel: LayerSelector) -> str:
    if len(shape) != 2:
        raise ArgumentError(f"matched tensor {name!r} is {len(shape)}-D; only 2-D weights can be patched")
    d = sel.expected_dim
    if sel.orientation == ORIENT_AUTO:
        on_rows, on_cols = shape[0] == d, shape[1] == d
        if on_rows and on_cols:
            raise AmbiguousOrientationError(
                f"{name!r} is square with both axes == {d}; pass an explicit orientation"
            )
        if on_rows:
            return ORIENT_ROWS
        if on_cols:
            return ORIENT_COLS
        raise ArgumentError(f"{name!r} has shape {shape}; no axis matches expected dim {d}")
    axis = 0 if sel.orientation == ORIENT_ROWS else 1
    if shape[axis] != d:
        raise ArgumentError(
            f"{name!r} has extent {shape[axis]} on the {sel.orientation} axis, expected {d}"
        )
    return sel.orientation


def _patched_weight(weight64: np.ndarray, proj: Projector, orientation: str) -> np.ndarray:
    if orientation == ORIENT_COLS:
        return weight64 @ proj.matrix
    return proj.matrix.T @ weight64


def patch_checkpoint(
    ckpt: TensorStore,
    proj: Projector,
    sel: LayerSelector,
) -> tuple[TensorStore, PatchReport]:
    """Rewrite every selected weight so it consumes projected embeddings.

    Returns a new store (the input is never mutated) and a per-tensor
    report; unmatched tensors are the same payload bytes as the input.
    """
    if proj.dim != sel.expected_dim:
        raise ArgumentError(f"projector dim {proj.dim} != selector expected_dim {sel.expected_dim}")
    matched = sel.matches(ckpt)
    if not matched:
        raise SelectorError(f"selector {sel.pattern!r} matched no tensors")

    out = ckpt.copy()
    records = []
    for name in matched:
        tensor = ckpt[name]
        orientation = _resolve_orientation(name, tensor.shape, sel)
        w64 = tensor.as_f64()
        patched64 = _patched_weight(w64, proj, orientation)
        patched = patched64.astype(tensor.values.dtype)
        cast_error = float(np.max(np.abs(patched.astype(np.float64) - patched64))) if patched.size else 0.0
        records.append(
            PatchRecord(
                name=name,
                shape=tensor.shape,
                orientation=orientation,
                max_delta=float(np.max(np.abs(patched64 - w64))) if w64.size else 0.0,
                fro_delta=float(np.linalg.norm(patched64 - w64)),
                cast_error=cast_error,
            )
        )
        out.replace(NamedTensor(name, patched, dtype=tensor.dtype))

    records.sort(key=lambda r: r.name)
    report = PatchReport(
        records=records,
        projector_fingerprint=projector_fingerprint(proj),
        pattern=sel.pattern,
    )
    out.metadata["safer.patch_report_hash"] = report.text_hash()
    return out, report


@dataclass
class VerifyRecord:
    name: str
    orientation: str
    max_error: float
    tolerance: float
    passed: bool


@dataclass
class VerifyReport:
    records: list[VerifyRecord]
    trials: int
    unmatched_checked: int

    @property
    def failures(self) -> list[str]:
        return [r.name for r in self.records if not r.passed]


def verify_patch(
    original: TensorStore,
    patched: TensorStore,
    proj: Projector,
    sel: LayerSelector,
    trials: int = 100,
    *,
    seed: int = 0,
) -> VerifyReport:
    """Assert the behavioral contract on every matched tensor.

    Samples `trials` standard-normal embeddings per tensor and checks
    W'(e) == W(P e) within the stored dtype's tolerance; also asserts
    every unmatched tensor is byte-identical between the two stores.
    Raises VerificationError naming the offending tensors.
    """
    if trials < 1:
        raise ArgumentError("trials must be >= 1")
    if original.names() != patched.names():
        raise ArgumentError("stores do not share tensor names")
    for name in original.names():
        if original[name].shape != patched[name].shape:
            raise ArgumentError(f"shape mismatch for {name!r}")

    matched = sel.matches(original)
    if not matched:
        raise SelectorError(f"selector {sel.pattern!r} matched no tensors")
    matched_set = set(matched)

    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    corrupted = []
    for name in matched:
        orig = original[name]
        new = patched[name]
        if orig.dtype != new.dtype:
            raise ArgumentError(f"dtype mismatch for {name!r}")
        orientation = _resolve_orientation(name, orig.shape, sel)
        tol = VERIFY_TOLERANCES[orig.dtype]
        w = orig.as_f64()
        w_new = new.as_f64()
        e = rng.standard_normal((sel.expected_dim, trials))
        projected = proj.matrix @ e
        if orientation == ORIENT_COLS:
            lhs, rhs = w_new @ e, w @ projected
        else:
            lhs, rhs = w_new.T @ e, w.T @ projected
        max_error = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
        records.append(VerifyRecord(name, orientation, max_error, tol, max_error <= tol))

    unmatched = [n for n in original.names() if n not in matched_set]
    for name in unmatched:
        if original[name].tobytes() != patched[name].tobytes():
            corrupted.append(name)

    report = VerifyReport(records=records, trials=trials, unmatched_checked=len(unmatched))
    bad = report.failures + corrupted
    if bad:
        detail = []
        for r in records:
            if not r.passed:
                detail.append(f"{r.name}: max error {r.max_error:.3e} > {r.tolerance:.0e}")
        for name in corrupted:
            detail.append(f"{name}: unmatched tensor bytes changed")
        raise VerificationError("patch verification failed: " + "; ".join(detail), failures=bad)
    return report
