"""Principal-component front-end for the spectral axis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ShapeError


class InsufficientDataError(ValueError):
    """Fewer fitting samples than requested components."""


@dataclass
class PcaModel:
    mean: np.ndarray  # (bands,)
    basis: np.ndarray  # (bands, n_components), orthonormal columns
    explained_variance: np.ndarray  # (n_components,), nonincreasing

    @property
    def bands(self) -> int:
        return self.basis.shape[0]

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]


def pca_fit(pixels: np.ndarray, n_components: int) -> PcaModel:
    """Eigendecomposition of the mean-centered covariance of (M, bands) rows.

    Columns are ordered by descending eigenvalue; each basis vector's
    largest-magnitude entry is made positive so the fit is sign-stable.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2:
        raise ShapeError(f"pca_fit: expected (M, bands), got {pixels.shape}")
    m, bands = pixels.shape
    if m <= n_components:
        raise InsufficientDataError(
            f"pca_fit: need more than {n_components} samples, got {m}"
        )
    if n_components > bands:
        raise ShapeError(
            f"pca_fit: n_components {n_components} exceeds bands {bands}"
        )
    mean = pixels.mean(axis=0)
    centered = pixels - mean
    cov = centered.T @ centered / m
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1][:n_components]
    basis = eigvec[:, order]
    variance = np.maximum(eigval[order], 0.0)
    # Sign convention: flip each column so its largest-|entry| is positive.
    peaks = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[peaks, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    basis = basis * signs
    return PcaModel(mean=mean, basis=basis, explained_variance=variance)


def pca_apply(model: PcaModel, cube: np.ndarray) -> np.ndarray:
    """Project (..., bands) onto the fitted components: (cube - mean) @ basis."""
    cube = np.asarray(cube)
    if cube.shape[-1] != model.bands:
        raise ShapeError(
            f"pca_apply: cube has {cube.shape[-1]} bands, model expects {model.bands}"
        )
    return (cube - model.mean) @ model.basis
