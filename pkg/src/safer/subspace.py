"""Concept-subspace estimation from prompt embeddings.

A concept shared across diverse prompts shows up as a common low-rank
component of the stacked embedding matrix: the expected Gram matrix in
embedding space is rank-1 along the concept direction plus diagonal
noise. The dominant right-singular vectors of the N x d matrix (left
singular vectors once transposed into embedding space) therefore span
the concept subspace, and the ratio of squared singular values measures
how strongly the leading direction dominates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import as_float_matrix, check_orthonormal
from .errors import ArgumentError, DegenerateSpectrumError, IntegrityError
from .store import NamedTensor, TensorStore

CENTERED_COLMEAN_TOL = 1e-9


@dataclass
class EmbeddingMatrix:
    """N x d matrix of prompt embeddings, one prompt per row."""

    values: np.ndarray
    centered: bool = False
    provenance: str | None = None

    def __post_init__(self):
        self.values = as_float_matrix(self.values, "embeddings")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ArgumentError(f"embedding matrix must be at least 1x1, got {self.values.shape}")
        if self.centered:
            worst = float(np.max(np.abs(self.values.mean(axis=0))))
            if worst > CENTERED_COLMEAN_TOL:
                raise ArgumentError(
                    f"matrix flagged centered but a column mean is {worst:.3e}"
                )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def center(self) -> "EmbeddingMatrix":
        """Return a row-mean-subtracted copy."""
        shifted = self.values - self.values.mean(axis=0, keepdims=True)
        return EmbeddingMatrix(shifted, centered=True, provenance=self.provenance)


@dataclass
class ConceptBasis:
    """Orthonormal rank-k basis of a concept subspace plus the full spectrum."""

    basis: np.ndarray  # d x k, orthonormal columns
    singular_values: np.ndarray  # length min(N, d), non-increasing
    explained_variance_ratio: np.ndarray
    label: str = ""
    dim: int = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self):
        self.basis = as_float_matrix(self.basis, "basis")
        self.singular_values = np.asarray(self.singular_values, dtype=np.float64)
        self.explained_variance_ratio = np.asarray(self.explained_variance_ratio, dtype=np.float64)
        self.dim = self.basis.shape[0]
        self.rank = self.basis.shape[1]
        if self.rank < 1:
            raise ArgumentError("basis must have at least one column")
        check_orthonormal(self.basis, 1e-10, "basis")
        s = self.singular_values
        if s.ndim != 1 or np.any(np.diff(s) > 0) or np.any(s < 0):
            raise ArgumentError("singular_values must be 1-D, non-negative, non-increasing")
        evr = self.explained_variance_ratio
        if evr.shape != s.shape:
            raise ArgumentError("explained_variance_ratio must match singular_values in length")
        total = float(np.sum(s**2))
        if total > 0 and np.max(np.abs(evr - s**2 / total)) > 1e-9:
            raise ArgumentError("explained_variance_ratio inconsistent with singular_values")

    @classmethod
    def from_vectors(cls, vectors, label: str = "") -> "ConceptBasis":
        """Build a rank-k basis directly from orthonormal columns.

        For planted-direction fixtures and for bases reloaded from disk;
        the spectrum is set to the trivial one (k ones then zeros).
        """
        basis = as_float_matrix(vectors, "basis")
        k = basis.shape[1]
        s = np.zeros(basis.shape[0], dtype=np.float64)
        s[:k] = 1.0
        evr = s**2 / float(np.sum(s**2))
        return cls(basis=basis, singular_values=s, explained_variance_ratio=evr, label=label)


class SpectrumEntry(NamedTuple):
    index: int
    singular_value: float
    explained_variance_ratio: float


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # deterministic sign: largest-magnitude entry of each column is positive
    out = basis.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def identify_subspace(
    emb: EmbeddingMatrix | np.ndarray,
    rank: int = 1,
    center: bool = False,
    *,
    label: str = "",
    tie_rtol: float = 1e-9,
) -> ConceptBasis:
    """Estimate the dominant `rank` directions of the embedding rows.

    Runs an SVD of the (optionally centered) matrix and keeps the first
    `rank` embedding-space singular vectors, i.e. the dominant
    eigenvectors of emb.T @ emb. Signs are fixed so each column's
    largest-magnitude entry is positive, making the output a pure
    function of the input bytes.

    Raises ArgumentError when `rank` exceeds min(N, d) or when the
    singular values at the selected-rank boundary are tied (the chosen
    subspace would not be unique), and DegenerateSpectrumError for an
    all-zero matrix.
    """
    if not isinstance(emb, EmbeddingMatrix):
        emb = EmbeddingMatrix(emb)
    if rank < 1:
        raise ArgumentError(f"rank must be >= 1, got {rank}")
    limit = min(emb.rows, emb.dim)
    if rank > limit:
        raise ArgumentError(f"rank {rank} exceeds min(N, d) = {limit}")
    if center and not emb.centered:
        emb = emb.center()

    # right singular vectors of the N x d matrix == concept directions in R^d
    _, s, vt = np.linalg.svd(emb.values, full_matrices=False)
    if s[0] <= 0.0:
        raise DegenerateSpectrumError("zero matrix: spectrum has no dominant direction")

    if rank < len(s):
        gap = s[rank - 1] - s[rank]
        if gap <= tie_rtol * s[0]:
            tied = [rank - 1, rank]
            while tied[-1] + 1 < len(s) and s[tied[-1]] - s[tied[-1] + 1] <= tie_rtol * s[0]:
                tied.append(tied[-1] + 1)
            raise ArgumentError(
                f"singular values tied at indices {tied}: dominant {rank}-dim subspace is not unique"
            )

    basis = _fix_signs(vt[:rank].T)
    evr = s**2 / float(np.sum(s**2))
    return ConceptBasis(
        basis=basis,
        singular_values=s,
        explained_variance_ratio=evr,
        label=label,
    )


def spectrum_report(basis: ConceptBasis) -> list[SpectrumEntry]:
    """The (index, singular value, explained-variance ratio) triples, by index."""
    return [
        SpectrumEntry(i, float(sv), float(r))
        for i, (sv, r) in enumerate(zip(basis.singular_values, basis.explained_variance_ratio))
    ]


def embedding_to_store(emb: EmbeddingMatrix, label: str = "", dtype: str = "float64") -> TensorStore:
    """Embedding dump: tensor `embeddings` [N, d] plus concept label metadata."""
    store = TensorStore(metadata={
        "safer.kind": "embeddings",
        "safer.concept_label": label,
        "safer.centered": str(emb.centered).lower(),
    })
    if emb.provenance:
        store.metadata["safer.provenance"] = emb.provenance
    store.add(NamedTensor("embeddings", emb.values, dtype=dtype))
    return store


def embedding_from_store(store: TensorStore) -> tuple[EmbeddingMatrix, str]:
    """Read an embedding dump; returns the matrix and its concept label."""
    if "embeddings" not in store:
        raise IntegrityError("store has no `embeddings` tensor")
    values = store["embeddings"].as_f64()
    if values.ndim != 2:
        raise IntegrityError(f"`embeddings` must be 2-D, got shape {values.shape}")
    centered = store.metadata.get("safer.centered", "false") == "true"
    emb = EmbeddingMatrix(
        values,
        centered=centered,
        provenance=store.metadata.get("safer.provenance"),
    )
    return emb, store.metadata.get("safer.concept_label", "")


def basis_to_store(basis: ConceptBasis, centered: bool = False) -> TensorStore:
    """Basis dump: `basis` [d, k] plus the full spectrum tensors."""
    store = TensorStore(metadata={
        "safer.kind": "basis",
        "safer.concept_label": basis.label,
        "safer.rank": str(basis.rank),
        "safer.dim": str(basis.dim),
        "safer.centered": str(centered).lower(),
    })
    store.add(NamedTensor("basis", basis.basis, dtype="float64"))
    store.add(NamedTensor("singular_values", basis.singular_values, dtype="float64"))
    store.add(NamedTensor("explained_variance_ratio", basis.explained_variance_ratio, dtype="float64"))
    return store


def basis_from_store(store: TensorStore) -> ConceptBasis:
    for name in ("basis", "singular_values", "explained_variance_ratio"):
        if name not in store:
            raise IntegrityError(f"store has no `{name}` tensor")
    try:
        return ConceptBasis(
            basis=store["basis"].as_f64(),
            singular_values=store["singular_values"].as_f64(),
            explained_variance_ratio=store["explained_variance_ratio"].as_f64(),
            label=store.metadata.get("safer.concept_label", ""),
        )
    except ArgumentError as exc:
        raise IntegrityError(f"basis store violates its invariants: {exc}") from exc
