import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from sklearn.gaussian_process.kernels import ConstantKernel, Kernel, Matern, WhiteKernel

from gebo_package.errors import CholeskyFailure, DegenerateTargets, TooFewPoints

logger = logging.getLogger(__name__)

DEFAULT_KAPPA = 2.0
DEFAULT_RESTARTS = 3
DEFAULT_ACQ_STARTS = 10
DEFAULT_PERTURBED_STARTS = 2

SIGNAL_BOUNDS = (1e-4, 1e4)
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
NOISE_BOUNDS = (1e-8, 1.0)
JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)
BOX_FALLBACK = 1e-3
FALLBACK_THETA = {"signal_variance": 1.0, "lengthscale": 1.0, "noise_variance": 1e-6}


def build_kernel(signal_variance: float, lengthscale: float, noise_variance: float) -> Kernel:
    """sigma^2 * Matern52(l) + sigma_n^2 * I, with log-space hyperparameter bounds."""
    return ConstantKernel(signal_variance, constant_value_bounds=SIGNAL_BOUNDS) * Matern(
        length_scale=lengthscale, length_scale_bounds=LENGTHSCALE_BOUNDS, nu=2.5
    ) + WhiteKernel(noise_level=noise_variance, noise_level_bounds=NOISE_BOUNDS)


def theta_dict(kernel: Kernel) -> Dict[str, float]:
    signal, lengthscale, noise = np.exp(kernel.theta)
    return {"signal_variance": float(signal), "lengthscale": float(lengthscale), "noise_variance": float(noise)}


def matern_kernel(z1: np.ndarray, z2: np.ndarray, theta: Dict[str, float]) -> np.ndarray:
    """
    Matern 5/2 covariance between two sets of latent points (no noise term).

    Args:
        z1 (np.ndarray): (N, M) or (M,) points.
        z2 (np.ndarray): (P, M) or (M,) points.
        theta (Dict[str, float]): signal_variance and lengthscale.

    Returns:
        np.ndarray: (N, P) covariance matrix.
    """
    a = np.atleast_2d(np.asarray(z1, dtype=float))
    b = np.atleast_2d(np.asarray(z2, dtype=float))
    kernel = ConstantKernel(theta["signal_variance"]) * Matern(length_scale=theta["lengthscale"], nu=2.5)
    return kernel(a, b)


@dataclass
class GpState:
    Z: np.ndarray
    y: np.ndarray
    y_mean: float
    y_std: float
    kernel: Kernel
    L: np.ndarray
    alpha: np.ndarray
    log_marginal_likelihood: float

    @property
    def theta(self) -> Dict[str, float]:
        return theta_dict(self.kernel)


@dataclass
class LatentBox:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def bounds(self) -> List[Tuple[float, float]]:
        return list(zip(self.lo.tolist(), self.hi.tolist()))

    def contains(self, z: np.ndarray) -> bool:
        return bool(np.all(z >= self.lo) and np.all(z <= self.hi))


def standardize(y: np.ndarray) -> Tuple[np.ndarray, float, float]:
    """
    Zero-mean unit-variance targets.

    Raises:
        DegenerateTargets: All targets are equal (the returned scale would be 0).
    """
    mean = float(np.mean(y))
    std = float(np.std(y))
    if std == 0.0:
        raise DegenerateTargets("all targets are equal")
    return (y - mean) / std, mean, std


def _cholesky_with_jitter(K: np.ndarray) -> np.ndarray:
    for jitter in JITTER_LADDER:
        try:
            L = cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            continue
        if jitter > 0:
            logger.debug("Cholesky needed jitter %.0e", jitter)
        return L
    raise CholeskyFailure(f"covariance not positive definite after jitter {JITTER_LADDER[-1]:.0e}")


def log_marginal_likelihood(
    log_theta: np.ndarray, Z: np.ndarray, y: np.ndarray, kernel: Kernel
) -> Tuple[float, np.ndarray]:
    """
    Log marginal likelihood and its gradient with respect to the log-hyperparameters.
    """
    k = kernel.clone_with_theta(log_theta)
    K, K_gradient = k(Z, eval_gradient=True)
    L = _cholesky_with_jitter(K)
    alpha = cho_solve((L, True), y)

    lml = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y) * math.log(2 * math.pi)

    inner = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(len(y)))
    gradient = 0.5 * np.einsum("ij,jik->k", inner, K_gradient)
    return float(lml), gradient


def condition(
    Z: np.ndarray, y_std: np.ndarray, kernel: Kernel, y_mean: float = 0.0, y_scale: float = 1.0
) -> GpState:
    """Conditions a GP with fixed hyperparameters on standardized targets."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y_std = np.asarray(y_std, dtype=float).ravel()
    K = kernel(Z)
    L = _cholesky_with_jitter(K)
    alpha = cho_solve((L, True), y_std)
    lml = -0.5 * y_std @ alpha - np.log(np.diag(L)).sum() - 0.5 * len(y_std) * math.log(2 * math.pi)
    return GpState(Z=Z, y=y_std, y_mean=y_mean, y_std=y_scale, kernel=kernel, L=L, alpha=alpha,
                   log_marginal_likelihood=float(lml))


def fit(
    Z: np.ndarray,
    y: np.ndarray,
    restarts: int = DEFAULT_RESTARTS,
    rng: Optional[np.random.Generator] = None,
    previous_theta: Optional[Dict[str, float]] = None,
) -> GpState:
    """
    Fits the GP hyperparameters by multi-start L-BFGS-B on the log marginal likelihood.

    Starts are the previous hyperparameters (defaults when absent) followed by
    `restarts` uniform draws in the log-space bounds; the best optimum wins, earliest start on ties.

    Args:
        Z (np.ndarray): (N, M) latent inputs, N >= 2.
        y (np.ndarray): (N,) raw targets, standardized internally.
        restarts (int): Number of random starts.
        rng (np.random.Generator): Stream for the random starts.
        previous_theta (Dict[str, float]): Warm-start hyperparameters.

    Returns:
        GpState: Conditioned posterior.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if Z.shape[0] < 2:
        raise TooFewPoints("GP fitting needs at least two observations")
    rng = rng or np.random.default_rng(0)

    try:
        y_std, y_mean, y_scale = standardize(y)
    except DegenerateTargets:
        logger.warning("Constant targets, using fallback GP hyperparameters")
        kernel = build_kernel(**FALLBACK_THETA)
        return condition(Z, y - float(np.mean(y)), kernel, float(np.mean(y)), 1.0)

    template = build_kernel(**(previous_theta or FALLBACK_THETA))
    log_bounds = template.bounds

    # previous (or default) hyperparameters first, then random starts
    starts = [template.theta]
    starts += [rng.uniform(log_bounds[:, 0], log_bounds[:, 1]) for _ in range(restarts)]

    def objective(log_theta):
        try:
            lml, grad = log_marginal_likelihood(log_theta, Z, y_std, template)
        except CholeskyFailure:
            return 1e25, np.zeros_like(log_theta)
        return -lml, -grad

    best_theta, best_value = None, np.inf
    for start in starts:
        start_value, _ = objective(start)
        result = minimize(objective, start, jac=True, method="L-BFGS-B", bounds=log_bounds)
        candidate, value = (result.x, result.fun) if result.fun <= start_value else (start, start_value)
        if value < best_value:
            best_theta, best_value = candidate, value

    kernel = template.clone_with_theta(best_theta)
    return condition(Z, y_std, kernel, y_mean, y_scale)


def _signal_and_lengthscale(kernel: Kernel) -> Tuple[float, float]:
    theta = theta_dict(kernel)
    return theta["signal_variance"], theta["lengthscale"]


def predict(state: GpState, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior mean and (noise-free) variance in standardized target units.
    """
    zs = np.atleast_2d(np.asarray(z, dtype=float))
    signal, lengthscale = _signal_and_lengthscale(state.kernel)
    k_star = matern_kernel(zs, state.Z, {"signal_variance": signal, "lengthscale": lengthscale})
    mean = k_star @ state.alpha
    v = solve_triangular(state.L, k_star.T, lower=True)
    variance = np.maximum(signal - np.sum(v ** 2, axis=0), 0.0)
    return mean, variance


def _ucb_and_gradient(state: GpState, z: np.ndarray, kappa: float) -> Tuple[float, np.ndarray]:
    signal, lengthscale = _signal_and_lengthscale(state.kernel)
    diff = z[None, :] - state.Z
    r = np.sqrt(np.sum(diff ** 2, axis=1))
    scaled = math.sqrt(5.0) * r / lengthscale
    k = signal * (1.0 + scaled + scaled ** 2 / 3.0) * np.exp(-scaled)
    # dk/dz for Matern 5/2
    dk = -(signal * 5.0 / (3.0 * lengthscale ** 2) * (1.0 + scaled) * np.exp(-scaled))[:, None] * diff

    mean = float(k @ state.alpha)
    d_mean = dk.T @ state.alpha

    solved = cho_solve((state.L, True), k)
    variance = max(signal - float(k @ solved), 0.0)
    d_variance = -2.0 * dk.T @ solved

    std = math.sqrt(variance)
    if std > 1e-12:
        return mean + kappa * std, d_mean + kappa * d_variance / (2.0 * std)
    return mean + kappa * std, d_mean


def latent_box(Z: np.ndarray) -> LatentBox:
    """
    Per-dimension [min - sigma, max + sigma] with the population standard deviation;
    zero-width dimensions are widened by 1e-3 on each side.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] < 2:
        raise TooFewPoints("the latent box needs at least two points")
    sigma = np.std(Z, axis=0)
    lo = Z.min(axis=0) - sigma
    hi = Z.max(axis=0) + sigma
    flat = hi - lo <= 0
    lo[flat] -= BOX_FALLBACK
    hi[flat] += BOX_FALLBACK
    return LatentBox(lo=lo, hi=hi)


def ucb(mean, variance, kappa: float = DEFAULT_KAPPA):
    return mean + kappa * np.sqrt(variance)


def optimize_acquisition(
    state: GpState,
    box: LatentBox,
    kappa: float = DEFAULT_KAPPA,
    rng: Optional[np.random.Generator] = None,
    n_starts: int = DEFAULT_ACQ_STARTS,
    n_perturbed: int = DEFAULT_PERTURBED_STARTS,
) -> np.ndarray:
    """
    Maximizes UCB inside the latent box by multi-start L-BFGS-B.

    Starts are uniform draws in the box plus Gaussian perturbations of the
    incumbent latent point; the best result wins, earliest start on ties.

    Returns:
        np.ndarray: The selected latent point z*.
    """
    rng = rng or np.random.default_rng(0)
    width = box.hi - box.lo
    incumbent = state.Z[int(np.argmax(state.y))]

    starts = [rng.uniform(box.lo, box.hi) for _ in range(max(n_starts - n_perturbed, 0))]
    starts += [np.clip(incumbent + rng.normal(0.0, 0.1, size=width.shape) * width, box.lo, box.hi)
               for _ in range(n_perturbed)]

    def objective(z):
        value, grad = _ucb_and_gradient(state, z, kappa)
        return -value, -grad

    best_z, best_value = None, np.inf
    for start in starts:
        start_value, _ = objective(start)
        result = minimize(objective, start, jac=True, method="L-BFGS-B", bounds=box.bounds)
        z, value = (np.clip(result.x, box.lo, box.hi), result.fun)
        if start_value < value:
            z, value = start, start_value
        if value < best_value:
            best_z, best_value = z, value
    return best_z
