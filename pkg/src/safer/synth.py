"""Synthetic embedding generator with known ground truth.

Rows follow the signal-plus-noise model

    e_i = alpha_i * v_c + o_i + k_i

with alpha_i ~ N(0, sigma_alpha^2), o_i and k_i i.i.d. zero-mean
Gaussian per coordinate, and v_c a planted unit direction. The planted
direction makes every downstream estimate checkable without a real
text encoder.

Randomness comes from numpy's PCG64 (a named, portable generator);
draw order is fixed: v_c, then alpha, then o, then k. Fixtures meant
for other languages should be shared as dumped files, not RNG streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_vector
from .errors import ArgumentError, VerificationError
from .subspace import EmbeddingMatrix

RNG_NAME = "numpy-pcg64"


@dataclass
class SyntheticSpec:
    """Parameters of the generative model."""

    d: int = 64
    N: int = 128
    sigma_alpha: float = 1.0
    object_scale: float = 0.1
    noise_scale: float = 0.1
    seed: int = 0
    v_c: np.ndarray | None = None

    def __post_init__(self):
        if self.d < 2:
            raise ArgumentError(f"d must be >= 2, got {self.d}")
        if self.N < 1:
            raise ArgumentError(f"N must be >= 1, got {self.N}")
        for name in ("sigma_alpha", "object_scale", "noise_scale"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be >= 0")
        if self.v_c is not None:
            v = as_float_vector(self.v_c, "v_c")
            if v.shape[0] != self.d:
                raise ArgumentError(f"v_c has length {v.shape[0]}, expected d={self.d}")
            if abs(np.linalg.norm(v) - 1.0) > 1e-9:
                raise ArgumentError("supplied v_c must be a unit vector")
            self.v_c = v

    def metadata(self) -> dict[str, str]:
        """Spec parameters as container metadata, `safer.*`-namespaced."""
        return {
            "safer.synth.d": str(self.d),
            "safer.synth.N": str(self.N),
            "safer.synth.sigma_alpha": repr(float(self.sigma_alpha)),
            "safer.synth.object_scale": repr(float(self.object_scale)),
            "safer.synth.noise_scale": repr(float(self.noise_scale)),
            "safer.synth.seed": str(self.seed),
            "safer.synth.explicit_v_c": str(self.v_c is not None).lower(),
            "safer.synth.rng": RNG_NAME,
        }


def _resolve_v_c(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.v_c is not None:
        return spec.v_c
    v = rng.standard_normal(spec.d)
    return v / np.linalg.norm(v)


def _draw_rows(spec: SyntheticSpec, rng: np.random.Generator, v_c: np.ndarray):
    alpha = rng.normal(0.0, spec.sigma_alpha, size=spec.N)
    obj = rng.normal(0.0, spec.object_scale, size=(spec.N, spec.d))
    noise = rng.normal(0.0, spec.noise_scale, size=(spec.N, spec.d))
    rows = alpha[:, None] * v_c[None, :] + obj + noise
    return rows, alpha


def generate(spec: SyntheticSpec):
    """Draw one embedding matrix.

    Returns (EmbeddingMatrix, v_c, alpha); v_c and alpha are the ground
    truth for oracle checks downstream.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    v_c = _resolve_v_c(spec, rng)
    rows, alpha = _draw_rows(spec, rng, v_c)
    emb = EmbeddingMatrix(values=rows, centered=False, provenance=f"synth(seed={spec.seed})")
    return emb, v_c, alpha


@dataclass
class CovarianceReport:
    """Summary of the averaged Gram matrix over repeated draws."""

    trials: int
    alignment: float  # |cos| between dominant eigenvector and v_c
    top_eigenvalue: float
    expected_top_eigenvalue: float
    eigenvalue_spread: float  # max/min eigenvalue ratio
    eigenvalues: np.ndarray = field(repr=False)


def empirical_covariance_check(
    spec: SyntheticSpec,
    trials: int,
    *,
    alignment_min: float = 0.99,
    eigenvalue_rtol: float = 0.2,
    check: bool = True,
) -> CovarianceReport:
    """Average emb.T @ emb / N over `trials` independent draws.

    The expected Gram matrix is sigma_alpha^2 * v_c v_c^T plus an
    isotropic (object_scale^2 + noise_scale^2) * I term, so the
    dominant eigenvector should align with v_c and the top eigenvalue
    should sit near sigma_alpha^2 + object_scale^2 + noise_scale^2.
    Those two assertions are enforced when `check` is set and the spec
    actually plants a direction (sigma_alpha > 0); with sigma_alpha == 0
    there is nothing to align with and the report is returned as-is.
    """
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")

    base = np.random.Generator(np.random.PCG64(spec.seed))
    v_c = _resolve_v_c(spec, base)
    children = np.random.SeedSequence(spec.seed).spawn(trials)

    gram = np.zeros((spec.d, spec.d))
    for child in children:
        rows, _ = _draw_rows(spec, np.random.Generator(np.random.PCG64(child)), v_c)
        gram += rows.T @ rows / spec.N
    gram /= trials

    eigvals, eigvecs = np.linalg.eigh(gram)
    top = eigvecs[:, -1]
    alignment = float(abs(top @ v_c))
    expected_top = spec.sigma_alpha**2 + spec.object_scale**2 + spec.noise_scale**2
    smallest = float(eigvals[0])
    spread = float(eigvals[-1] / smallest) if smallest > 0 else float("inf")

    report = CovarianceReport(
        trials=trials,
        alignment=alignment,
        top_eigenvalue=float(eigvals[-1]),
        expected_top_eigenvalue=expected_top,
        eigenvalue_spread=spread,
        eigenvalues=eigvals,
    )

    if check and spec.sigma_alpha > 0:
        if report.alignment < alignment_min:
            raise VerificationError(
                f"dominant eigenvector misaligned with v_c: |cos|={report.alignment:.4f} < {alignment_min}"
            )
        if abs(report.top_eigenvalue - expected_top) > eigenvalue_rtol * expected_top:
            raise VerificationError(
                f"top eigenvalue {report.top_eigenvalue:.4f} is outside "
                f"{eigenvalue_rtol:.0%} of expected {expected_top:.4f}"
            )
    return report
