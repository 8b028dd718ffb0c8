"""Progressive subspace expansion over a set of reference concepts.

Starting from an anchor concept, each candidate is admitted when its
image-feature cosine similarity to the reference exceeds the threshold
tau; admitted candidates right-multiply their removal projector onto
the running product. The fold is sequential by definition (ordered
product); the admission log records every decision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_vector
from .errors import ArgumentError, IntegrityError
from .projector import Projector, compose, removal_projector
from .store import NamedTensor, TensorStore
from .subspace import ConceptBasis

ANCHOR_FIRST = "first"
ANCHOR_ANY_ADMITTED = "any-admitted"


@dataclass
class FeatureVector:
    """An image-encoder feature vector tagged with its reference-image id."""

    label: str
    values: np.ndarray
    norm: float = 0.0

    def __post_init__(self):
        self.values = as_float_vector(self.values, f"feature {self.label!r}")
        self.norm = float(np.linalg.norm(self.values))
        if self.norm == 0.0:
            raise ArgumentError(f"feature {self.label!r} has zero norm")


@dataclass
class ExpansionConfig:
    tau: float = 0.85
    anchor_policy: str = ANCHOR_FIRST
    max_rank: int | None = None

    def __post_init__(self):
        if not -1.0 <= self.tau <= 1.0:
            raise ArgumentError(f"tau must lie in [-1, 1], got {self.tau}")
        if self.anchor_policy not in (ANCHOR_FIRST, ANCHOR_ANY_ADMITTED):
            raise ArgumentError(f"unknown anchor policy {self.anchor_policy!r}")
        if self.max_rank is not None and self.max_rank < 1:
            raise ArgumentError("max_rank must be >= 1 when set")


@dataclass
class AdmissionRecord:
    """One gate decision; serializes to a deterministic JSON line."""

    label: str
    score: float
    tau: float
    admitted: bool
    reason: str | None = None  # set only for max-rank rejections

    def to_json_line(self) -> str:
        line = (
            f'{{"label": {json.dumps(self.label)}, "score": {self.score:.6f}, '
            f'"tau": {self.tau:.6f}, "admitted": {json.dumps(self.admitted)}'
        )
        if self.reason is not None:
            line += f', "reason": {json.dumps(self.reason)}'
        return line + "}"


def similarity(a: FeatureVector, b: FeatureVector) -> float:
    """Cosine of the angle between two feature vectors."""
    if a.values.shape != b.values.shape:
        raise ArgumentError(
            f"feature length mismatch: {a.values.shape[0]} vs {b.values.shape[0]}"
        )
    return float(a.values @ b.values / (a.norm * b.norm))


def expand(
    anchor_basis: ConceptBasis,
    anchor_feat: FeatureVector,
    candidates: list[tuple[FeatureVector, ConceptBasis]],
    cfg: ExpansionConfig | None = None,
) -> tuple[Projector, list[AdmissionRecord]]:
    """Fold admitted candidates into the anchor's removal projector.

    Admission compares each candidate feature against the anchor
    feature (policy `first`) or against the best match among everything
    admitted so far (policy `any-admitted`). The product order is the
    candidate list order, so output is deterministic for fixed inputs.
    """
    cfg = cfg or ExpansionConfig()
    parts = [removal_projector(anchor_basis)]
    admitted_feats = [anchor_feat]
    erased = anchor_basis.rank
    log: list[AdmissionRecord] = []

    for feat, basis in candidates:
        if basis.dim != anchor_basis.dim:
            raise ArgumentError(
                f"candidate {feat.label!r} basis dim {basis.dim} != anchor dim {anchor_basis.dim}"
            )
        if cfg.anchor_policy == ANCHOR_FIRST:
            score = similarity(anchor_feat, feat)
        else:
            score = max(similarity(prev, feat) for prev in admitted_feats)

        if score > cfg.tau:
            if cfg.max_rank is not None and erased + basis.rank > cfg.max_rank:
                log.append(AdmissionRecord(feat.label, score, cfg.tau, False, reason="max-rank"))
                continue
            parts.append(removal_projector(basis))
            admitted_feats.append(feat)
            erased += basis.rank
            log.append(AdmissionRecord(feat.label, score, cfg.tau, True))
        else:
            log.append(AdmissionRecord(feat.label, score, cfg.tau, False))

    return compose(parts), log


def features_to_store(features: list[FeatureVector], dtype: str = "float64") -> TensorStore:
    """Feature dump: `features` [M, m] with labels in metadata."""
    if not features:
        raise ArgumentError("need at least one feature vector")
    lengths = {f.values.shape[0] for f in features}
    if len(lengths) != 1:
        raise ArgumentError(f"feature vectors have mixed lengths {sorted(lengths)}")
    store = TensorStore(metadata={
        "safer.kind": "features",
        "safer.labels": json.dumps([f.label for f in features]),
    })
    store.add(NamedTensor("features", np.stack([f.values for f in features]), dtype=dtype))
    return store


def features_from_store(store: TensorStore) -> list[FeatureVector]:
    if "features" not in store:
        raise IntegrityError("store has no `features` tensor")
    values = store["features"].as_f64()
    if values.ndim != 2:
        raise IntegrityError(f"`features` must be 2-D, got shape {values.shape}")
    try:
        labels = json.loads(store.metadata.get("safer.labels", "[]"))
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"safer.labels metadata is not valid JSON: {exc}") from exc
    if len(labels) != values.shape[0]:
        raise IntegrityError(
            f"{len(labels)} labels for {values.shape[0]} feature rows"
        )
    return [FeatureVector(label, row) for label, row in zip(labels, values)]
