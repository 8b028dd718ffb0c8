"""Similarity and accuracy bookkeeping over precomputed features/labels.

Feature extraction itself (style models, classifiers) lives outside the
package; these operations only consume dumped vectors and predictions.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix
from .errors import ArgumentError, IntegrityError
from .store import NamedTensor, TensorStore


@dataclass
class FeatureSet:
    """N feature rows with ids; rows must be normalizable (no zero rows)."""

    labels: list[str]
    features: np.ndarray

    def __post_init__(self):
        self.features = as_float_matrix(self.features, "features")
        if self.features.shape[0] < 1:
            raise ArgumentError("feature set must contain at least one row")
        if len(self.labels) != self.features.shape[0]:
            raise ArgumentError(
                f"{len(self.labels)} labels for {self.features.shape[0]} feature rows"
            )
        norms = np.linalg.norm(self.features, axis=1)
        if np.any(norms == 0.0):
            bad = [self.labels[i] for i in np.nonzero(norms == 0.0)[0]]
            raise ArgumentError(f"zero feature rows: {bad}")
        self._unit = self.features / norms[:, None]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def unit_rows(self) -> np.ndarray:
        return self._unit


def style_similarity(ref: FeatureSet, fake: FeatureSet) -> float:
    """Mean over fake rows of the best cosine match against the ref set."""
    if ref.dim != fake.dim:
        raise ArgumentError(f"feature dim mismatch: ref {ref.dim} vs fake {fake.dim}")
    sims = fake.unit_rows() @ ref.unit_rows().T  # N_fake x N_ref
    return float(np.mean(np.max(sims, axis=1)))


def accuracy_summary(
    predictions: list[tuple[str, str]],
    target_label: str,
) -> tuple[float, dict[str, int]]:
    """Fraction of predictions equal to the target, plus per-label counts."""
    if not predictions:
        raise ArgumentError("predictions must be non-empty")
    counts = Counter(label for _, label in predictions)
    acc = counts.get(target_label, 0) / len(predictions)
    return acc, dict(sorted(counts.items()))


def feature_set_to_store(fs: FeatureSet, dtype: str = "float64") -> TensorStore:
    store = TensorStore(metadata={
        "safer.kind": "features",
        "safer.labels": json.dumps(fs.labels),
    })
    store.add(NamedTensor("features", fs.features, dtype=dtype))
    return store


def feature_set_from_store(store: TensorStore) -> FeatureSet:
    if "features" not in store:
        raise IntegrityError("store has no `features` tensor")
    try:
        labels = json.loads(store.metadata.get("safer.labels", "[]"))
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"safer.labels metadata is not valid JSON: {exc}") from exc
    values = store["features"].as_f64()
    if len(labels) != values.shape[0]:
        raise IntegrityError(f"{len(labels)} labels for {values.shape[0]} feature rows")
    return FeatureSet(labels=labels, features=values)


def read_predictions(text: str) -> list[tuple[str, str]]:
    """Parse line-delimited `id<TAB>label` records (blank lines skipped)."""
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ArgumentError(f"line {lineno}: expected `id<TAB>label`, got {line!r}")
        out.append((parts[0], parts[1]))
    return out
