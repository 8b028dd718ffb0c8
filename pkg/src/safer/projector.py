"""Projection operators over the text-embedding space.

Removal maps embeddings onto the orthogonal complement of a concept
subspace (I - U U^T); amplification rescales the concept component
(I + lambda U U^T); composition right-multiplies removal projectors in
admission order. Composed products of non-orthogonal subspaces are
deliberately left as ordered products (they do not commute and are not
symmetric); `orthogonalized_removal_projector` offers the joint-basis
alternative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import json

from ._validation import as_float_matrix, as_float_vector, check_orthonormal
from .errors import ArgumentError, IntegrityError
from .store import NamedTensor, TensorStore
from .subspace import ConceptBasis, EmbeddingMatrix

MODE_REMOVE = "remove"
MODE_AMPLIFY = "amplify"
MODE_COMPOSED = "composed"

IDEMPOTENCE_TOL = 1e-9
SYMMETRY_TOL = 1e-12
ANNIHILATION_TOL = 1e-10


@dataclass
class Projector:
    """A d x d operator with a declared mode and its generating bases."""

    matrix: np.ndarray
    mode: str
    lam: float | None = None
    sources: list[str] = field(default_factory=list)
    bases: list[np.ndarray] = field(default_factory=list)
    dim: int = field(init=False)

    def __post_init__(self):
        self.matrix = as_float_matrix(self.matrix, "projector matrix")
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ArgumentError(f"projector matrix must be square, got {self.matrix.shape}")
        self.dim = self.matrix.shape[0]
        if self.mode not in (MODE_REMOVE, MODE_AMPLIFY, MODE_COMPOSED):
            raise ArgumentError(f"unknown projector mode {self.mode!r}")
        self.bases = [as_float_matrix(b, "basis") for b in self.bases]

    def check_invariants(self) -> None:
        """Re-verify the mode contract against the stored bases."""
        if self.mode == MODE_REMOVE:
            sym = float(np.max(np.abs(self.matrix - self.matrix.T)))
            if sym > SYMMETRY_TOL:
                raise ArgumentError(f"remove-mode projector not symmetric (max asym {sym:.3e})")
            idem = float(np.max(np.abs(self.matrix @ self.matrix - self.matrix)))
            if idem > IDEMPOTENCE_TOL:
                raise ArgumentError(f"remove-mode projector not idempotent (max dev {idem:.3e})")
            if self.bases:
                rebuilt = _removal_matrix(np.hstack(self.bases))
                _require_close(self.matrix, rebuilt, "remove")
        elif self.mode == MODE_AMPLIFY:
            if self.lam is None or len(self.bases) != 1:
                raise ArgumentError("amplify-mode projector needs lambda and exactly one basis")
            u = self.bases[0]
            rebuilt = np.eye(self.dim) + self.lam * (u @ u.T)
            _require_close(self.matrix, rebuilt, "amplify")
        else:
            if not self.bases:
                raise ArgumentError("composed-mode projector carries no bases")
            rebuilt = np.eye(self.dim)
            for u in self.bases:
                rebuilt = rebuilt @ _removal_matrix(u)
            _require_close(self.matrix, rebuilt, "composed")


def _require_close(actual, expected, mode, tol=1e-9):
    dev = float(np.max(np.abs(actual - expected)))
    if dev > tol:
        raise ArgumentError(f"{mode}-mode matrix does not match its bases (max dev {dev:.3e})")


def _removal_matrix(u: np.ndarray) -> np.ndarray:
    return np.eye(u.shape[0]) - u @ u.T


def _basis_array(basis: ConceptBasis | np.ndarray) -> np.ndarray:
    arr = basis.basis if isinstance(basis, ConceptBasis) else as_float_matrix(basis, "basis")
    check_orthonormal(arr, 1e-10, "basis")
    return arr


def _basis_label(basis) -> str:
    return basis.label if isinstance(basis, ConceptBasis) else ""


def removal_projector(basis: ConceptBasis | np.ndarray) -> Projector:
    """I - U U^T: annihilates the concept component of any embedding."""
    u = _basis_array(basis)
    return Projector(
        matrix=_removal_matrix(u),
        mode=MODE_REMOVE,
        sources=[_basis_label(basis)],
        bases=[u],
    )


def amplify_projector(
    basis: ConceptBasis | np.ndarray,
    lam: float = 1.0,
    *,
    allow_negative: bool = False,
) -> Projector:
    """I + lambda U U^T: scales the concept component by 1 + lambda."""
    u = _basis_array(basis)
    if not np.isfinite(lam):
        raise ArgumentError("lambda must be finite")
    if lam < 0 and not allow_negative:
        raise ArgumentError("negative lambda partially removes the concept; pass allow_negative to permit it")
    return Projector(
        matrix=np.eye(u.shape[0]) + float(lam) * (u @ u.T),
        mode=MODE_AMPLIFY,
        lam=float(lam),
        sources=[_basis_label(basis)],
        bases=[u],
    )


def compose(projectors: list[Projector]) -> Projector:
    """Left-to-right product of removal projectors, in list order.

    Amplify-mode inputs are rejected: a composed product is only
    re-verifiable from its bases when every factor is a removal.
    """
    if not projectors:
        raise ArgumentError("compose needs at least one projector")
    dim = projectors[0].dim
    for p in projectors:
        if p.dim != dim:
            raise ArgumentError(f"dimension mismatch in composition: {p.dim} != {dim}")
        if p.mode == MODE_AMPLIFY:
            raise ArgumentError("cannot compose amplify-mode projectors")
    if len(projectors) == 1:
        p = projectors[0]
        return Projector(matrix=p.matrix.copy(), mode=p.mode, lam=p.lam,
                         sources=list(p.sources), bases=[b.copy() for b in p.bases])
    matrix = projectors[0].matrix
    for p in projectors[1:]:
        matrix = matrix @ p.matrix
    sources = [s for p in projectors for s in p.sources]
    bases = [b for p in projectors for b in p.bases]
    return Projector(matrix=matrix, mode=MODE_COMPOSED, sources=sources, bases=bases)


def orthogonalized_removal_projector(bases: list) -> Projector:
    """Gram-Schmidt all bases into one joint subspace, then remove it.

    Order-independent, symmetric, idempotent alternative to the ordered
    product for non-orthogonal concept subspaces.
    """
    if not bases:
        raise ArgumentError("need at least one basis")
    arrays = [_basis_array(b) for b in bases]
    dim = arrays[0].shape[0]
    for a in arrays:
        if a.shape[0] != dim:
            raise ArgumentError("bases must share the embedding dimension")
    stacked = np.hstack(arrays)
    q, r = np.linalg.qr(stacked)
    keep = np.abs(np.diag(r)) > 1e-10
    joint = q[:, keep]
    return Projector(
        matrix=_removal_matrix(joint),
        mode=MODE_REMOVE,
        sources=[_basis_label(b) for b in bases],
        bases=[joint],
    )


def apply(proj: Projector, emb):
    """Apply P to a single vector, to the rows of a matrix, or to an EmbeddingMatrix."""
    if isinstance(emb, EmbeddingMatrix):
        projected = apply(proj, emb.values)
        return EmbeddingMatrix(projected, centered=False, provenance=emb.provenance)
    arr = np.asarray(emb, dtype=np.float64)
    if arr.ndim == 1:
        vec = as_float_vector(arr, "embedding")
        if vec.shape[0] != proj.dim:
            raise ArgumentError(f"vector length {vec.shape[0]} != projector dim {proj.dim}")
        return proj.matrix @ vec
    mat = as_float_matrix(arr, "embeddings")
    if mat.shape[1] != proj.dim:
        raise ArgumentError(f"row length {mat.shape[1]} != projector dim {proj.dim}")
    return mat @ proj.matrix.T


def projector_to_store(proj: Projector) -> TensorStore:
    """Serialize as `projection` [d,d] plus `basis.<i>` [d,k_i] tensors."""
    store = TensorStore(metadata={
        "safer.kind": "projector",
        "safer.mode": proj.mode,
        "safer.lambda": "" if proj.lam is None else repr(proj.lam),
        "safer.sources": json.dumps(proj.sources),
        "safer.dim": str(proj.dim),
    })
    store.add(NamedTensor("projection", proj.matrix, dtype="float64"))
    for i, basis in enumerate(proj.bases):
        store.add(NamedTensor(f"basis.{i}", basis, dtype="float64"))
    return store


def projector_from_store(store: TensorStore) -> Projector:
    """Rebuild a projector from a store and re-verify its mode invariants."""
    if "projection" not in store:
        raise IntegrityError("store has no `projection` tensor")
    mode = store.metadata.get("safer.mode", "")
    raw_lam = store.metadata.get("safer.lambda", "")
    try:
        sources = json.loads(store.metadata.get("safer.sources", "[]"))
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"safer.sources metadata is not valid JSON: {exc}") from exc
    bases = []
    i = 0
    while f"basis.{i}" in store:
        bases.append(store[f"basis.{i}"].as_f64())
        i += 1
    try:
        proj = Projector(
            matrix=store["projection"].as_f64(),
            mode=mode,
            lam=float(raw_lam) if raw_lam else None,
            sources=sources,
            bases=bases,
        )
        proj.check_invariants()
    except ArgumentError as exc:
        raise IntegrityError(f"projector store violates its mode contract: {exc}") from exc
    return proj
