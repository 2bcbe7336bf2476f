"""Scalar filter functions, residuals, and admissibility diagnostics.

A filter family g_lam approximates the inverse gamma -> 1/gamma on the
spectral domain [0, kappa^2] as lam -> 0. The product gamma * g_lam(gamma)
is the retention factor of a spectral component and

    r_lam(gamma) = 1 - gamma * g_lam(gamma)

is the shrinkage applied to it (r = 0: component kept exactly, r = 1:
component fully shrunk to the target). Implemented families:

* ``Tikhonov``            g(gamma) = 1 / (gamma + lam)
* ``Landweber``           g(gamma) = eta * sum_{i=0}^{t-1} (1 - eta*gamma)^i,
                          i.e. (1 - (1 - eta*gamma)^t) / gamma, with g(0) = eta*t
* ``NuMethod``            g = p_t(gamma), the degree-(t-1) polynomial of the
                          accelerated two-term gradient recursion
* ``IteratedTikhonov``    g(gamma) = ((gamma+lam)^t - lam^t) / (gamma * (gamma+lam)^t)
* ``TSVD``                g(gamma) = 1/gamma if gamma >= lam else 0
* ``SKMSE``               g(gamma) = 1 / ((1+lam) * gamma) for gamma > 0, the
                          uniform shrinkage mu_hat / (1+lam) in filter form

Retention factors are evaluated through dedicated closed forms rather than
as a literal product g * gamma, so they stay finite and accurate down to
gamma = 0 (where every residual equals 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

#: Default shrinkage-parameter grid for model selection: logarithmic over
#: [1e-6, 1e2], 30 points.
LAMBDA_GRID_MIN = 1e-6
LAMBDA_GRID_MAX = 1e2
LAMBDA_GRID_POINTS = 30


def default_lambda_grid(num: int = LAMBDA_GRID_POINTS) -> np.ndarray:
    return np.geomspace(LAMBDA_GRID_MIN, LAMBDA_GRID_MAX, num)


@dataclass(frozen=True)
class Tikhonov:
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise InputError("Tikhonov lambda must be positive")


@dataclass(frozen=True)
class Landweber:
    iters: int
    eta: float

    def __post_init__(self):
        if not (isinstance(self.iters, int) and self.iters >= 1):
            raise InputError("Landweber iteration count must be a positive integer")
        if not self.eta > 0:
            raise InputError("Landweber step size must be positive")


@dataclass(frozen=True)
class NuMethod:
    """Accelerated gradient filter; ``eta_bar`` scales the step to the
    spectrum bound (set it to 1/kappa^2)."""

    iters: int
    nu: float = 1.0
    eta_bar: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.iters, int) and self.iters >= 1):
            raise InputError("NuMethod iteration count must be a positive integer")
        if not self.nu > 0:
            raise InputError("nu must be positive")
        if not self.eta_bar > 0:
            raise InputError("eta_bar must be positive")


@dataclass(frozen=True)
class IteratedTikhonov:
    iters: int
    lam: float

    def __post_init__(self):
        if not (isinstance(self.iters, int) and self.iters >= 1):
            raise InputError("IteratedTikhonov iteration count must be a positive integer")
        if not self.lam > 0:
            raise InputError("IteratedTikhonov lambda must be positive")


@dataclass(frozen=True)
class TSVD:
    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise InputError("TSVD threshold must be positive")


@dataclass(frozen=True)
class SKMSE:
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise InputError("SKMSE lambda must be non-negative")


FilterSpec = Tikhonov | Landweber | NuMethod | IteratedTikhonov | TSVD | SKMSE


def qualification(spec: FilterSpec) -> float:
    """The largest smoothness order the filter can exploit (metadata only)."""
    if isinstance(spec, Tikhonov):
        return 1.0
    if isinstance(spec, IteratedTikhonov):
        return float(spec.iters)
    if isinstance(spec, (Landweber, TSVD)):
        return math.inf
    if isinstance(spec, NuMethod):
        return spec.nu
    return 1.0  # SKMSE: uniform-shrinkage analogue of Tikhonov


def effective_shrinkage(spec: FilterSpec) -> float:
    """Shrinkage parameter on a common lambda scale.

    Iteration counts convert via lam ~ 1/(eta t) for plain gradient steps
    and lam ~ 1/(eta t^2) for the accelerated method.
    """
    if isinstance(spec, (Tikhonov, IteratedTikhonov, SKMSE)):
        return spec.lam
    if isinstance(spec, TSVD):
        return spec.threshold
    if isinstance(spec, Landweber):
        return 1.0 / (spec.eta * spec.iters)
    return 1.0 / (spec.eta_bar * spec.iters**2)


def nu_method_coefficients(t: int, nu: float, eta_bar: float) -> tuple[float, float]:
    """(omega_t, kappa_t) of the accelerated two-term recursion at step t >= 1."""
    if t == 1:
        return 0.0, (4.0 * nu + 2.0) / (4.0 * nu + 1.0) * eta_bar
    omega = ((t - 1.0) * (2.0 * t - 3.0) * (2.0 * t + 2.0 * nu - 1.0)) / (
        (t + 2.0 * nu - 1.0) * (2.0 * t + 4.0 * nu - 1.0) * (2.0 * t + 2.0 * nu - 3.0)
    )
    kappa = (
        4.0
        * (2.0 * t + 2.0 * nu - 1.0)
        * (t + nu - 1.0)
        / ((t + 2.0 * nu - 1.0) * (2.0 * t + 4.0 * nu - 1.0))
        * eta_bar
    )
    return omega, kappa


def nu_filter_path(gammas: np.ndarray, t_max: int, nu: float, eta_bar: float) -> np.ndarray:
    """Values p_t(gamma) for t = 1..t_max, shape (t_max, len(gammas)).

    Runs the same recursion as the coefficient iteration, applied to the
    filter polynomials: p_t = p_{t-1} + omega_t (p_{t-1} - p_{t-2})
    + kappa_t (1 - gamma p_{t-1}), from p_0 = 0.
    """
    g = np.asarray(gammas, dtype=float)
    prev = np.zeros_like(g)
    _, kappa1 = nu_method_coefficients(1, nu, eta_bar)
    curr = np.full_like(g, kappa1)
    out = np.empty((t_max, g.shape[0]))
    out[0] = curr
    for t in range(2, t_max + 1):
        omega, kappa = nu_method_coefficients(t, nu, eta_bar)
        nxt = curr + omega * (curr - prev) + kappa * (1.0 - g * curr)
        prev, curr = curr, nxt
        out[t - 1] = curr
    return out


def _check_gammas(gammas: np.ndarray) -> np.ndarray:
    g = np.asarray(gammas, dtype=float)
    if np.any(g < 0):
        raise InputError("filter functions are defined on gamma >= 0")
    return g


def retention_values(spec: FilterSpec, gammas: np.ndarray) -> np.ndarray:
    """gamma * g(gamma), evaluated in closed form (finite at gamma = 0)."""
    g = _check_gammas(gammas)
    if isinstance(spec, Tikhonov):
        return g / (g + spec.lam)
    if isinstance(spec, Landweber):
        return 1.0 - (1.0 - spec.eta * g) ** spec.iters
    if isinstance(spec, IteratedTikhonov):
        return 1.0 - (spec.lam / (g + spec.lam)) ** spec.iters
    if isinstance(spec, TSVD):
        return np.where(g >= spec.threshold, 1.0, 0.0)
    if isinstance(spec, SKMSE):
        return np.where(g > 0, 1.0 / (1.0 + spec.lam), 0.0)
    return g * nu_filter_path(g, spec.iters, spec.nu, spec.eta_bar)[-1]


def filter_values(spec: FilterSpec, gammas: np.ndarray) -> np.ndarray:
    """g(gamma) on an array of eigenvalues."""
    g = _check_gammas(gammas)
    if isinstance(spec, Tikhonov):
        return 1.0 / (g + spec.lam)
    if isinstance(spec, Landweber):
        positive = g > 0
        out = np.full_like(g, spec.eta * spec.iters)
        gp = g[positive]
        out[positive] = (1.0 - (1.0 - spec.eta * gp) ** spec.iters) / gp
        return out
    if isinstance(spec, IteratedTikhonov):
        positive = g > 0
        out = np.full_like(g, spec.iters / spec.lam)
        gp = g[positive]
        out[positive] = (1.0 - (spec.lam / (gp + spec.lam)) ** spec.iters) / gp
        return out
    if isinstance(spec, TSVD):
        out = np.zeros_like(g)
        kept = g >= spec.threshold
        out[kept] = 1.0 / g[kept]
        return out
    if isinstance(spec, SKMSE):
        out = np.zeros_like(g)
        positive = g > 0
        out[positive] = 1.0 / ((1.0 + spec.lam) * g[positive])
        return out
    return nu_filter_path(g, spec.iters, spec.nu, spec.eta_bar)[-1]


def scalar_filter(spec: FilterSpec, gamma: float) -> float:
    """g(gamma) at a single point."""
    return float(filter_values(spec, np.asarray([gamma], dtype=float))[0])


def residual(spec: FilterSpec, gamma: float) -> float:
    """r(gamma) = 1 - gamma * g(gamma); equals 1 at gamma = 0 for every filter."""
    return float(1.0 - retention_values(spec, np.asarray([gamma], dtype=float))[0])


@dataclass(frozen=True)
class AdmissibilityReport:
    """Numeric estimates of the admissibility constants of a filter family.

    ``sup_gamma_g`` estimates B = sup |gamma g(gamma)|, ``sup_residual``
    estimates C = sup |r(gamma)|, and each entry of ``residual_eta_bounds``
    is (eta, sup |r(gamma)| gamma^eta / lam^eta), an estimate of D at that
    smoothness order.
    """

    sup_gamma_g: float
    sup_residual: float
    residual_eta_bounds: list[tuple[float, float]]
    grid_size: int


def check_admissibility(
    spec: FilterSpec,
    grid_size: int,
    eta_list: list[float],
    kappa_sq: float = 1.0,
) -> AdmissibilityReport:
    """Evaluate the three admissibility suprema on a uniform grid.

    The grid covers [0, kappa^2] and always includes the point
    gamma = effective lambda, where TSVD-style residuals switch.
    """
    if grid_size < 100:
        raise InputError("grid_size must be at least 100")
    lam = effective_shrinkage(spec)
    grid = np.linspace(0.0, kappa_sq, grid_size)
    if 0.0 <= lam <= kappa_sq:
        grid = np.append(grid, lam)
    kept = retention_values(spec, grid)
    res = 1.0 - kept
    bounds = []
    for eta in eta_list:
        bounds.append((float(eta), float(np.max(np.abs(res) * grid**eta) / lam**eta)))
    return AdmissibilityReport(
        sup_gamma_g=float(np.max(np.abs(kept))),
        sup_residual=float(np.max(np.abs(res))),
        residual_eta_bounds=bounds,
        grid_size=grid_size,
    )
