"""Kernels, Gram matrices, bandwidth selection, and spectrum normalization.

Shrinkage filters in this package act on the normalized Gram matrix
K / n, whose nonzero spectrum coincides with that of the empirical
covariance operator and therefore lies inside [0, kappa^2]. That keeps the
Gram-side coefficient formula in exact agreement with the operator-side
estimate (see ``theory.verify_operator_equivalence``) and makes the fixed
step size eta = 1/kappa^2 valid for gradient-type filters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .data import Dataset, as_rows
from .errors import DegenerateBandwidthError, InputError
from .linalg import EigenDecomposition, SymMatrix, sym_eigendecompose

DIAGONAL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class GaussianRBF:
    """k(x, y) = exp(-||x - y||^2 / (2 sigma^2)); k(x, x) = 1, so kappa^2 = 1."""

    bandwidth_sq: float
    kappa_sq: float = 1.0

    def __post_init__(self):
        if not self.bandwidth_sq > 0:
            raise InputError("bandwidth_sq must be positive")
        if not self.kappa_sq > 0:
            raise InputError("kappa_sq must be positive")


@dataclass(frozen=True)
class Linear:
    """k(x, y) = <x, y>; kappa_sq must upper-bound max ||x||^2 over the data."""

    kappa_sq: float

    def __post_init__(self):
        if not self.kappa_sq > 0:
            raise InputError("kappa_sq must be positive")


KernelSpec = GaussianRBF | Linear


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate the kernel on a single pair of points."""
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if xv.shape != yv.shape:
        raise InputError(f"dimension mismatch: {xv.shape} vs {yv.shape}")
    if isinstance(spec, GaussianRBF):
        diff = xv - yv
        return float(np.exp(-(diff @ diff) / (2.0 * spec.bandwidth_sq)))
    return float(xv @ yv)


def cross_kernel(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Kernel matrix between two row sets, shape (len(X), len(Y))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if isinstance(spec, GaussianRBF):
        return np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * spec.bandwidth_sq))
    return X @ Y.T


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Raw n x n kernel matrix K with K_ij = k(x_i, x_j)."""

    raw: SymMatrix
    spec: KernelSpec

    def __post_init__(self):
        diag = np.diagonal(self.raw.values)
        if np.any(diag > self.spec.kappa_sq + DIAGONAL_TOLERANCE):
            raise InputError(
                "kernel diagonal exceeds the declared bound kappa_sq: "
                f"max k(x,x) = {diag.max():.6g} > {self.spec.kappa_sq:.6g}"
            )

    @property
    def n(self) -> int:
        return self.raw.dim


@dataclass(eq=False)
class NormalizedGram:
    """K/n together with its (lazily computed, cached) eigendecomposition."""

    matrix: SymMatrix
    kappa_sq: float
    _spectrum: EigenDecomposition | None = dataclasses.field(
        default=None, init=False, repr=False
    )

    @property
    def n(self) -> int:
        return self.matrix.dim

    @property
    def spectrum(self) -> EigenDecomposition:
        if self._spectrum is None:
            self._spectrum = sym_eigendecompose(self.matrix)
        return self._spectrum


def gram_matrix(points: Dataset | np.ndarray, spec: KernelSpec) -> GramMatrix:
    """Pairwise kernel matrix over a dataset."""
    rows = as_rows(points)
    if rows.shape[0] < 1:
        raise InputError("cannot build a Gram matrix from an empty dataset")
    return GramMatrix(raw=SymMatrix(cross_kernel(spec, rows, rows)), spec=spec)


def normalize_gram(gram: GramMatrix) -> NormalizedGram:
    """Scale K to K/n so the spectrum lives in [0, kappa^2]."""
    return NormalizedGram(
        matrix=SymMatrix(gram.raw.values / gram.n),
        kappa_sq=gram.spec.kappa_sq,
    )


def median_heuristic_bandwidth(points: Dataset | np.ndarray) -> float:
    """Lower median of pairwise squared distances over i < j pairs.

    Diagonal (zero) distances are excluded so duplicated points do not bias
    the bandwidth downward. Raises if the median itself degenerates to zero.
    """
    rows = as_rows(points)
    if rows.shape[0] < 2:
        raise InputError("median heuristic needs at least two points")
    sq = pdist(rows, "sqeuclidean")
    k = sq.shape[0]
    lower_mid = (k - 1) // 2
    value = float(np.partition(sq, lower_mid)[lower_mid])
    if value <= 0.0:
        raise DegenerateBandwidthError(
            "median pairwise squared distance is zero (too many coincident points)"
        )
    return value


def linear_spec_for(points: Dataset | np.ndarray) -> Linear:
    """Linear kernel spec with kappa_sq = max ||x||^2 over the dataset."""
    rows = as_rows(points)
    norm_sq = float(np.max(np.einsum("ij,ij->i", rows, rows)))
    if norm_sq <= 0.0:
        norm_sq = 1.0  # all-zero data: any positive bound is valid
    return Linear(kappa_sq=norm_sq)
