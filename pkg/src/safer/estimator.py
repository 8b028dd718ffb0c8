"""Scikit-learn estimator facade over subspace identification and projection.

Lets the identify -> project pipeline drop into sklearn Pipelines and
grid searches: ``fit`` estimates the concept subspace from an [N, d]
embedding matrix, ``transform`` projects rows onto the complement
(mode "remove") or rescales the concept component (mode "amplify").
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import as_float_matrix
from .errors import ArgumentError
from .projector import amplify_projector, apply, removal_projector
from .subspace import identify_subspace


class ConceptEraser(BaseEstimator, TransformerMixin):
    """Erase (or amplify) the dominant shared direction of embedding rows.

    Parameters
    ----------
    rank : int, default=1
        Number of leading singular vectors spanning the concept subspace.
    center : bool, default=False
        Subtract the row mean before the SVD.
    mode : {"remove", "amplify"}, default="remove"
        Whether `transform` projects the concept out or scales it up.
    strength : float, default=1.0
        Amplification coefficient (the concept component is scaled by
        1 + strength). Ignored in remove mode.
    label : str, default=""
        Concept name recorded on the fitted basis.

    Attributes
    ----------
    basis_ : ndarray of shape (d, rank)
        Orthonormal concept directions.
    components_ : ndarray of shape (rank, d)
        `basis_` transposed, following the sklearn layout.
    singular_values_ : ndarray
        Full singular spectrum of the fitted matrix.
    explained_variance_ratio_ : ndarray
        Squared singular values normalized to sum to 1.
    projector_ : Projector
        The fitted d x d operator used by `transform`.
    """

    def __init__(self, rank=1, center=False, mode="remove", strength=1.0, label=""):
        self.rank = rank
        self.center = center
        self.mode = mode
        self.strength = strength
        self.label = label

    def fit(self, X, y=None):
        if self.mode not in ("remove", "amplify"):
            raise ArgumentError(f"mode must be 'remove' or 'amplify', got {self.mode!r}")
        X = as_float_matrix(X, "X")
        concept = identify_subspace(X, rank=self.rank, center=self.center, label=self.label)
        self.basis_ = concept.basis
        self.components_ = concept.basis.T
        self.singular_values_ = concept.singular_values
        self.explained_variance_ratio_ = concept.explained_variance_ratio
        self.concept_basis_ = concept
        if self.mode == "remove":
            self.projector_ = removal_projector(concept)
        else:
            self.projector_ = amplify_projector(concept, self.strength)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        if not hasattr(self, "projector_"):
            raise NotFittedError("ConceptEraser must be fitted before transform")
        X = as_float_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ArgumentError(
                f"X has {X.shape[1]} features but the eraser was fitted with {self.n_features_in_}"
            )
        return apply(self.projector_, X)

    def concept_alignment(self, X) -> np.ndarray:
        """Norm of each row's component inside the fitted concept subspace."""
        if not hasattr(self, "projector_"):
            raise NotFittedError("ConceptEraser must be fitted first")
        X = as_float_matrix(X, "X")
        return np.linalg.norm(X @ self.basis_, axis=1)
