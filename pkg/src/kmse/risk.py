"""Closed-form loss against Gaussian mixtures and the replication harness.

For the Gaussian RBF kernel k(x, y) = exp(-||x - y||^2 / (2 sigma^2)) and a
mixture P = sum_j pi_j N(theta_j, Sigma_j) (noise already folded into the
components), the squared RKHS distance between an estimate
sum_i beta_i k(x_i, .) and the mean element of P expands into

    L(beta) = beta^T K beta - 2 sum_i beta_i z_i + ||mu_P||^2,

with the two Gaussian integrals

    z_i        = sum_j pi_j (sigma^2)^{d/2} det(Sigma_j + sigma^2 I)^{-1/2}
                 exp(-(x_i - theta_j)^T (Sigma_j + sigma^2 I)^{-1} (x_i - theta_j) / 2)
    ||mu_P||^2 = sum_{j,l} pi_j pi_l (sigma^2)^{d/2} det(Sigma_j + Sigma_l + sigma^2 I)^{-1/2}
                 exp(-Delta^T (Sigma_j + Sigma_l + sigma^2 I)^{-1} Delta / 2)

(both via the Gaussian convolution identity; validated against Monte-Carlo
oracles in the test suite before any benchmark relies on them). Determinants
and quadratic forms are computed through eigendecompositions so
rank-deficient covariances are handled symmetrically.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import as_rows
from .errors import InputError, KmseError, ReplicationError
from .estimators import (
    WeightVector,
    empirical_kme_weights,
    iterated_tikhonov_weights,
    landweber_path,
    nu_method_path,
    skmse_weights,
    spectral_weights,
)
from .filters import (
    IteratedTikhonov,
    Landweber,
    NuMethod,
    SKMSE,
    TSVD,
    Tikhonov,
    default_lambda_grid,
)
from .kernels import (
    GaussianRBF,
    GramMatrix,
    KernelSpec,
    NormalizedGram,
    gram_matrix,
    median_heuristic_bandwidth,
    normalize_gram,
)
from .selection import (
    gcv_select_tsvd,
    loocv_select_iterations,
    loocv_select_lambda,
)
from .synthetic import (
    MixtureParams,
    RngStream,
    draw_mixture_params,
    effective_components,
    sample_mixture,
)

ESTIMATOR_NAMES = ("kme", "skmse", "tikhonov", "landweber", "nu", "itik", "tsvd")


def _component_terms(theta: np.ndarray, sigma: np.ndarray, sigma_sq: float):
    """Eigendecomposition pieces for one Gaussian integral."""
    sym = (sigma + sigma.T) / 2.0
    evals, evecs = np.linalg.eigh(sym)
    if evals[0] < -1e-8 * max(1.0, abs(evals[-1])):
        raise InputError("component covariance is not positive semidefinite")
    evals = np.clip(evals, 0.0, None)
    denom = evals + sigma_sq
    log_pref = 0.5 * float(np.sum(np.log(sigma_sq / denom)))
    return evecs, denom, log_pref


def component_mean_inners(
    X: np.ndarray, theta: np.ndarray, sigma: np.ndarray, sigma_sq: float
) -> np.ndarray:
    """E_{y ~ N(theta, Sigma)} k(x_i, y) for every row x_i, vectorized."""
    if not sigma_sq > 0:
        raise InputError("sigma_sq must be positive")
    evecs, denom, log_pref = _component_terms(theta, np.asarray(sigma, float), sigma_sq)
    Y = (np.atleast_2d(X) - theta) @ evecs
    quad = (Y**2 / denom).sum(axis=1)
    return np.exp(log_pref - 0.5 * quad)


def kernel_mean_inner(
    x: np.ndarray, theta: np.ndarray, sigma: np.ndarray, sigma_sq: float
) -> float:
    """Closed form of int k(x, y) N(y; theta, Sigma) dy; always in (0, 1]."""
    return float(
        component_mean_inners(
            np.asarray(x, float).reshape(1, -1), np.asarray(theta, float), sigma, sigma_sq
        )[0]
    )


def mixture_mean_inners(
    X: np.ndarray, params: MixtureParams, sigma_sq: float
) -> np.ndarray:
    """z_i = <k(x_i, .), mu_P> for every row, mixing over components."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(X.shape[0])
    for pi_j, theta, sigma in zip(params.weights, params.means, params.covariances):
        out += pi_j * component_mean_inners(X, theta, sigma, sigma_sq)
    return out


def mixture_mean_sq_norm(params: MixtureParams, sigma_sq: float) -> float:
    """||mu_P||^2 for a Gaussian mixture under the RBF kernel (noise folded)."""
    if params.noise_var != 0:
        raise InputError("fold the noise into the components first (effective_components)")
    if not sigma_sq > 0:
        raise InputError("sigma_sq must be positive")
    k = params.k
    total = 0.0
    for j in range(k):
        for l in range(j, k):
            evecs, denom, log_pref = _component_terms(
                np.zeros(params.d),
                params.covariances[j] + params.covariances[l],
                sigma_sq,
            )
            delta = (params.means[j] - params.means[l]) @ evecs
            quad = float((delta**2 / denom).sum())
            term = params.weights[j] * params.weights[l] * np.exp(log_pref - 0.5 * quad)
            total += term if j == l else 2.0 * term
    return float(total)


def loss(
    beta: WeightVector | np.ndarray,
    X,
    params: MixtureParams,
    spec: KernelSpec,
) -> float:
    """Squared RKHS distance between the weighted estimate and the mean of P."""
    if not isinstance(spec, GaussianRBF):
        raise InputError("the analytic loss requires the Gaussian RBF kernel")
    if params.noise_var != 0:
        raise InputError("fold the noise into the components first (effective_components)")
    rows = as_rows(X)
    w = beta.weights if isinstance(beta, WeightVector) else np.asarray(beta, float)
    if w.shape[0] != rows.shape[0]:
        raise InputError(f"{w.shape[0]} weights for {rows.shape[0]} points")
    K = gram_matrix(rows, spec).raw.values
    z = mixture_mean_inners(rows, params, spec.bandwidth_sq)
    return float(w @ K @ w - 2.0 * (w @ z) + mixture_mean_sq_norm(params, spec.bandwidth_sq))


# ---------------------------------------------------------------------------
# Replication harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """One estimator plus how its shrinkage parameter is chosen.

    ``selection``: "none" (use the fixed parameters below), "loocv", "gcv",
    "oracle" (grid-minimize the true analytic loss; only available inside the
    synthetic harness), or "default" (loocv for lambda/iteration methods, gcv
    for tsvd, none for kme).
    """

    name: str
    selection: str = "default"
    lam: float = 0.1
    iters: int = 10
    nu: float = 1.0
    itik_iters: int = 3
    threshold: float = 0.1
    t_max: int = 50
    lambda_grid: tuple[float, ...] = field(
        default_factory=lambda: tuple(default_lambda_grid())
    )

    def __post_init__(self):
        if self.name not in ESTIMATOR_NAMES:
            raise InputError(f"unknown estimator {self.name!r}")
        if self.selection not in ("none", "loocv", "gcv", "oracle", "default"):
            raise InputError(f"unknown selection method {self.selection!r}")

    def resolved_selection(self) -> str:
        if self.selection != "default":
            return self.selection
        if self.name == "kme":
            return "none"
        if self.name == "tsvd":
            return "gcv"
        return "loocv"


@dataclass(frozen=True, eq=False)
class RiskReport:
    """Monte-Carlo risk of one estimator, with a config echo."""

    estimator_id: str
    mean_loss: float
    stderr: float
    replications: int
    config: dict


def improvement_percent(risk_base: float, risk_est: float) -> float:
    """100 (R - R_lambda) / R: positive when the estimator beats the baseline."""
    return 100.0 * (risk_base - risk_est) / risk_base


def fit_weights(
    config: EstimatorConfig,
    X: np.ndarray,
    kspec: KernelSpec,
    kbar: NormalizedGram,
    oracle_loss=None,
) -> WeightVector:
    """Fit one estimator on a sample, running its parameter selection."""
    n = kbar.n
    name = config.name
    selection = config.resolved_selection()
    if name == "kme":
        return empirical_kme_weights(n)
    if selection == "oracle":
        if oracle_loss is None:
            raise InputError("oracle selection needs a loss callback")
        return _fit_oracle(config, kbar, oracle_loss)
    if name == "skmse":
        if selection == "none":
            return skmse_weights(n, config.lam)
        chosen = loocv_select_lambda(
            X, kspec, config.lambda_grid, family="skmse"
        ).chosen
        return skmse_weights(n, chosen.lam)
    if name == "tikhonov":
        if selection == "none":
            return spectral_weights(kbar, Tikhonov(config.lam))
        chosen = loocv_select_lambda(
            X, kspec, config.lambda_grid, family="tikhonov"
        ).chosen
        return spectral_weights(kbar, chosen)
    if name == "itik":
        if selection == "none":
            return iterated_tikhonov_weights(kbar, config.itik_iters, config.lam)
        chosen = loocv_select_lambda(
            X, kspec, config.lambda_grid, family="itik", itik_iters=config.itik_iters
        ).chosen
        return iterated_tikhonov_weights(kbar, chosen.iters, chosen.lam)
    if name == "landweber":
        if selection == "none":
            t = config.iters
        else:
            t = loocv_select_iterations(X, kspec, "landweber", config.t_max).chosen.iters
        path = landweber_path(kbar.matrix.values, t, 1.0 / kbar.kappa_sq)
        return WeightVector(path[-1], "landweber", Landweber(t, 1.0 / kbar.kappa_sq))
    if name == "nu":
        if selection == "none":
            t = config.iters
        else:
            t = loocv_select_iterations(
                X, kspec, "nu", config.t_max, nu=config.nu
            ).chosen.iters
        eta_bar = 1.0 / kbar.kappa_sq
        path = nu_method_path(kbar.matrix.values, t, config.nu, eta_bar)
        return WeightVector(path[-1], "nu", NuMethod(t, config.nu, eta_bar))
    # tsvd
    if selection == "none":
        return spectral_weights(kbar, TSVD(config.threshold))
    return spectral_weights(kbar, gcv_select_tsvd(kbar).chosen)


def _fit_oracle(config, kbar: NormalizedGram, oracle_loss) -> WeightVector:
    """Grid-minimize the true loss over the estimator's parameter family."""
    name = config.name
    candidates: list[WeightVector] = []
    if name in ("skmse", "tikhonov", "itik"):
        for lam in config.lambda_grid:
            if name == "skmse":
                candidates.append(skmse_weights(kbar.n, float(lam)))
            elif name == "tikhonov":
                candidates.append(spectral_weights(kbar, Tikhonov(float(lam))))
            else:
                candidates.append(
                    iterated_tikhonov_weights(kbar, config.itik_iters, float(lam))
                )
    elif name in ("landweber", "nu"):
        eta_bar = 1.0 / kbar.kappa_sq
        if name == "landweber":
            path = landweber_path(kbar.matrix.values, config.t_max, eta_bar)
            specs = [Landweber(t + 1, eta_bar) for t in range(config.t_max)]
        else:
            path = nu_method_path(kbar.matrix.values, config.t_max, config.nu, eta_bar)
            specs = [NuMethod(t + 1, config.nu, eta_bar) for t in range(config.t_max)]
        candidates = [
            WeightVector(row, name, spec) for row, spec in zip(path, specs)
        ]
    elif name == "tsvd":
        gammas = np.clip(kbar.spectrum.eigenvalues, 0.0, None)
        thresholds = [float(g) for g in gammas if g > 0]
        candidates = [
            spectral_weights(kbar, TSVD(thr)) for thr in dict.fromkeys(thresholds)
        ]
    else:
        raise InputError(f"oracle selection is not defined for {name!r}")
    losses = [oracle_loss(c.weights) for c in candidates]
    return candidates[int(np.argmin(losses))]


def _worker_count() -> int:
    raw = os.environ.get("KMSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def replication_losses(
    config: EstimatorConfig,
    n: int,
    d: int,
    m: int,
    seed: int,
    redraw_params: bool = False,
    bandwidth: float | None = None,
) -> np.ndarray:
    """True analytic loss of the fitted estimator for replications 1..m.

    Replication r draws its sample from stream (seed, r); mixture parameters
    come from stream (seed, 0) once, or are redrawn per replication when
    ``redraw_params`` is set. Results are independent of execution order.
    """
    if m < 1:
        raise InputError("need at least one replication")
    base_params = None
    if not redraw_params:
        base_params = draw_mixture_params(d, RngStream(seed, 0))

    def one(r: int) -> float:
        gen = RngStream(seed, r).generator()
        params = draw_mixture_params(d, gen) if redraw_params else base_params
        X = sample_mixture(params, n, gen).rows
        sigma_sq = bandwidth if bandwidth is not None else median_heuristic_bandwidth(X)
        kspec = GaussianRBF(sigma_sq)
        gram = gram_matrix(X, kspec)
        kbar = normalize_gram(gram)
        folded = effective_components(params)
        K = gram.raw.values
        z = mixture_mean_inners(X, folded, sigma_sq)
        msn = mixture_mean_sq_norm(folded, sigma_sq)

        def loss_of(w: np.ndarray) -> float:
            return float(w @ K @ w - 2.0 * (w @ z) + msn)

        wv = fit_weights(
            config,
            X,
            kspec,
            kbar,
            oracle_loss=loss_of if config.resolved_selection() == "oracle" else None,
        )
        return loss_of(wv.weights)

    def one_guarded(r: int) -> float:
        try:
            return one(r)
        except KmseError as exc:
            raise ReplicationError(r, exc) from exc

    workers = _worker_count()
    if workers == 1:
        return np.asarray([one_guarded(r) for r in range(1, m + 1)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.asarray(list(pool.map(one_guarded, range(1, m + 1))))


def risk_estimate(
    config: EstimatorConfig,
    n: int,
    d: int,
    m: int,
    seed: int,
    redraw_params: bool = False,
    bandwidth: float | None = None,
) -> RiskReport:
    """Approximate the estimator's risk by averaging over m replications."""
    if m < 2:
        raise InputError("risk estimation needs at least two replications")
    losses = replication_losses(
        config, n, d, m, seed, redraw_params=redraw_params, bandwidth=bandwidth
    )
    echo = {
        "estimator": config.name,
        "selection": config.resolved_selection(),
        "n": n,
        "d": d,
        "m": m,
        "seed": seed,
        "kernel": "rbf",
        "bandwidth": "median" if bandwidth is None else bandwidth,
        "redraw_params": redraw_params,
    }
    return RiskReport(
        estimator_id=config.name,
        mean_loss=float(losses.mean()),
        stderr=float(losses.std(ddof=1) / np.sqrt(m)),
        replications=m,
        config=echo,
    )
