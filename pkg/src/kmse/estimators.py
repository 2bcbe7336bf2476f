"""Weight vectors for every kernel mean estimator.

An estimate is Sum_i beta_i k(x_i, .). The empirical estimator uses the
uniform vector 1_n = [1/n, ..., 1/n]; shrinkage estimators produce

    beta = g(Kbar) Kbar 1_n,      Kbar = K / n,

either through the spectral closed form (the canonical path) or through the
iterative updates the filters correspond to. Iterative and spectral paths
agree to machine precision and are tested against each other. The shrinkage
target is the zero function throughout, i.e. all iterations start at
beta = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, as_rows
from .errors import ConfigurationError, InputError
from .filters import (
    FilterSpec,
    Landweber,
    NuMethod,
    IteratedTikhonov,
    SKMSE,
    TSVD,
    Tikhonov,
    nu_method_coefficients,
    retention_values,
)
from .kernels import KernelSpec, NormalizedGram, cross_kernel
from .linalg import spd_factor

STEP_SIZE_SLACK = 1e-12
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Length-n coefficients defining an estimate Sum_i beta_i k(x_i, .)."""

    weights: np.ndarray
    estimator_id: str
    shrinkage: FilterSpec | None = None

    def __post_init__(self):
        arr = np.asarray(self.weights, dtype=float)
        if arr.ndim != 1:
            raise InputError("weights must be a 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise InputError("weights contain non-finite entries")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def _filter_id(spec: FilterSpec) -> str:
    return {
        Tikhonov: "tikhonov",
        Landweber: "landweber",
        NuMethod: "nu",
        IteratedTikhonov: "itik",
        TSVD: "tsvd",
        SKMSE: "skmse",
    }[type(spec)]


def empirical_kme_weights(n: int) -> WeightVector:
    """Uniform weights 1/n of the empirical kernel mean."""
    if n < 1:
        raise InputError("n must be at least 1")
    return WeightVector(np.full(n, 1.0 / n), "kme", None)


def skmse_weights(n: int, lam: float) -> WeightVector:
    """Uniform shrinkage toward zero: constant weights 1 / (n (1 + lambda))."""
    if n < 1:
        raise InputError("n must be at least 1")
    if lam < 0:
        raise InputError("lambda must be non-negative")
    return WeightVector(np.full(n, 1.0 / (n * (1.0 + lam))), "skmse", SKMSE(lam))


def _validate_step(spec: FilterSpec, kappa_sq: float) -> None:
    if isinstance(spec, Landweber) and spec.eta * kappa_sq > 1.0 + STEP_SIZE_SLACK:
        raise ConfigurationError(
            f"Landweber step size {spec.eta} exceeds 1/kappa^2 = {1.0 / kappa_sq}"
        )
    if isinstance(spec, NuMethod) and spec.eta_bar * kappa_sq > 1.0 + STEP_SIZE_SLACK:
        raise ConfigurationError(
            f"accelerated step scale {spec.eta_bar} exceeds 1/kappa^2 = {1.0 / kappa_sq}"
        )


def spectral_weights(kbar: NormalizedGram, spec: FilterSpec) -> WeightVector:
    """Canonical spectral path: beta = U diag(g(gamma) gamma) U^T 1_n.

    Eigenvalues are clamped at zero before the filter is applied; retention
    factors are evaluated in closed form so near-null components stay finite.
    """
    _validate_step(spec, kbar.kappa_sq)
    eig = kbar.spectrum
    gammas = np.clip(eig.eigenvalues, 0.0, None)
    kept = retention_values(spec, gammas)
    ones = np.full(kbar.n, 1.0 / kbar.n)
    beta = eig.eigenvectors @ (kept * (eig.eigenvectors.T @ ones))
    return WeightVector(beta, _filter_id(spec), spec)


def _target(kbar_values: np.ndarray) -> np.ndarray:
    # Kbar 1_n with 1_n = [1/n, ..., 1/n]
    return kbar_values.mean(axis=1)


def _guard(beta: np.ndarray, n: int) -> None:
    if np.linalg.norm(beta) > DIVERGENCE_FACTOR / np.sqrt(n):
        raise ConfigurationError(
            "iteration diverged (weights exceeded guard); step size too large"
        )


def landweber_path(
    kbar_values: np.ndarray, t_max: int, eta: float
) -> np.ndarray:
    """Gradient-descent iterates beta^1..beta^t_max, shape (t_max, n)."""
    n = kbar_values.shape[0]
    target = _target(kbar_values)
    beta = np.zeros(n)
    path = np.empty((t_max, n))
    for step in range(t_max):
        beta = beta + eta * (target - kbar_values @ beta)
        _guard(beta, n)
        path[step] = beta
    return path


def nu_method_path(
    kbar_values: np.ndarray, t_max: int, nu: float, eta_bar: float
) -> np.ndarray:
    """Accelerated two-term iterates beta^1..beta^t_max, shape (t_max, n)."""
    n = kbar_values.shape[0]
    target = _target(kbar_values)
    prev = np.zeros(n)
    _, kappa1 = nu_method_coefficients(1, nu, eta_bar)
    curr = kappa1 * target
    path = np.empty((t_max, n))
    path[0] = curr
    for t in range(2, t_max + 1):
        omega, kappa = nu_method_coefficients(t, nu, eta_bar)
        nxt = curr + omega * (curr - prev) + kappa * (target - kbar_values @ curr)
        _guard(nxt, n)
        prev, curr = curr, nxt
        path[t - 1] = curr
    return path


def landweber_weights(
    kbar: NormalizedGram, t: int, eta: float | None = None
) -> WeightVector:
    """Run t gradient steps from beta = 0; eta defaults to 1/kappa^2."""
    if t < 1:
        raise InputError("iteration count must be at least 1")
    step = 1.0 / kbar.kappa_sq if eta is None else eta
    spec = Landweber(iters=t, eta=step)
    _validate_step(spec, kbar.kappa_sq)
    path = landweber_path(kbar.matrix.values, t, step)
    return WeightVector(path[-1], "landweber", spec)


def nu_method_weights(kbar: NormalizedGram, t: int, nu: float = 1.0) -> WeightVector:
    """Accelerated gradient iteration; the step is scaled by 1/kappa^2."""
    if t < 1:
        raise InputError("iteration count must be at least 1")
    eta_bar = 1.0 / kbar.kappa_sq
    path = nu_method_path(kbar.matrix.values, t, nu, eta_bar)
    return WeightVector(path[-1], "nu", NuMethod(iters=t, nu=nu, eta_bar=eta_bar))


def iterated_tikhonov_weights(kbar: NormalizedGram, t: int, lam: float) -> WeightVector:
    """Solve (Kbar + lam I) beta_s = Kbar 1_n + lam beta_{s-1} from beta_0 = 0."""
    if t < 1:
        raise InputError("iteration count must be at least 1")
    if not lam > 0:
        raise InputError("lambda must be positive")
    values = kbar.matrix.values
    target = _target(values)
    factor = spd_factor(values + lam * np.eye(kbar.n))
    beta = np.zeros(kbar.n)
    for _ in range(t):
        beta = factor.solve(target + lam * beta)
    return WeightVector(beta, "itik", IteratedTikhonov(iters=t, lam=lam))


def tsvd_weights(kbar: NormalizedGram, threshold: float) -> WeightVector:
    """Keep spectral components with gamma >= threshold, invert them exactly."""
    return spectral_weights(kbar, TSVD(threshold))


def evaluate_estimate(
    points: Dataset | np.ndarray,
    beta: WeightVector | np.ndarray,
    spec: KernelSpec,
    query: np.ndarray,
) -> float:
    """Evaluate Sum_i beta_i k(x_i, query)."""
    rows = as_rows(points)
    weights = beta.weights if isinstance(beta, WeightVector) else np.asarray(beta, float)
    if weights.shape[0] != rows.shape[0]:
        raise InputError(
            f"{weights.shape[0]} weights for {rows.shape[0]} points"
        )
    q = np.asarray(query, dtype=float).reshape(1, -1)
    if q.shape[1] != rows.shape[1]:
        raise InputError(f"query dimension {q.shape[1]} != data dimension {rows.shape[1]}")
    return float(cross_kernel(spec, rows, q)[:, 0] @ weights)
