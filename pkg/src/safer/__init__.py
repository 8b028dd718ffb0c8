"""Concept erasure and amplification for text-to-image diffusion models.

Identify a concept subspace from prompt embeddings (SVD), build
orthogonal-complement or amplification projectors, progressively expand
the erased subspace across reference concepts, and merge the final
operator into the cross-attention weights of a serialized checkpoint.
"""

from .errors import (
    AmbiguousOrientationError,
    ArgumentError,
    DataError,
    DegenerateSpectrumError,
    FormatError,
    IntegrityError,
    SaferError,
    SelectorError,
    VerificationError,
)
from .expansion import (
    AdmissionRecord,
    ExpansionConfig,
    FeatureVector,
    expand,
    features_from_store,
    features_to_store,
    similarity,
)
from .metrics import FeatureSet, accuracy_summary, style_similarity
from .patcher import LayerSelector, PatchReport, patch_checkpoint, verify_patch
from .projector import (
    Projector,
    amplify_projector,
    apply,
    compose,
    orthogonalized_removal_projector,
    projector_from_store,
    projector_to_store,
    removal_projector,
)
from .store import NamedTensor, TensorStore, load_store, save_store
from .subspace import (
    ConceptBasis,
    EmbeddingMatrix,
    basis_from_store,
    basis_to_store,
    embedding_from_store,
    embedding_to_store,
    identify_subspace,
    spectrum_report,
)
from .synth import SyntheticSpec, empirical_covariance_check, generate

__version__ = "0.1.0"


def __getattr__(name):
    # ConceptEraser pulls in scikit-learn; load it on first use so the CLI
    # does not pay the import cost
    if name == "ConceptEraser":
        from .estimator import ConceptEraser

        return ConceptEraser
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "AdmissionRecord",
    "AmbiguousOrientationError",
    "ArgumentError",
    "ConceptBasis",
    "ConceptEraser",
    "DataError",
    "DegenerateSpectrumError",
    "EmbeddingMatrix",
    "ExpansionConfig",
    "FeatureSet",
    "FeatureVector",
    "FormatError",
    "IntegrityError",
    "LayerSelector",
    "NamedTensor",
    "PatchReport",
    "Projector",
    "SaferError",
    "SelectorError",
    "SyntheticSpec",
    "TensorStore",
    "VerificationError",
    "accuracy_summary",
    "amplify_projector",
    "apply",
    "basis_from_store",
    "basis_to_store",
    "compose",
    "embedding_from_store",
    "embedding_to_store",
    "empirical_covariance_check",
    "expand",
    "features_from_store",
    "features_to_store",
    "generate",
    "identify_subspace",
    "load_store",
    "orthogonalized_removal_projector",
    "patch_checkpoint",
    "projector_from_store",
    "projector_to_store",
    "removal_projector",
    "save_store",
    "similarity",
    "spectrum_report",
    "style_similarity",
    "verify_patch",
]
