"""Featurized Bayesian linear regression and a dense exact-GP reference.

With features Z (N x D), unit-variance weight prior and noise variance
sigma^2, the weight posterior is Gaussian with

    S_w = (I_D + Z^T Z / sigma^2)^{-1},
    m_w = S_w Z^T y / sigma^2,

and all solves go through the Cholesky factor of A = I_D + Z^T Z / sigma^2,
so fitting costs O(N D^2 + D^3) and never forms an N x N matrix.  The log
marginal likelihood of y ~ N(0, sigma^2 I + Z Z^T) is evaluated in the
D-dimensional form via the Woodbury and matrix-determinant identities.

The exact GP (squared-exponential kernel, dense Cholesky) is the small-N
reference the featurized model is compared against.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .features import FeatureMap, feature_map_from_doc, feature_map_to_doc, featurize

EXACT_GP_MAX_POINTS = 10_000


class NumericalError(RuntimeError):
    """Raised when a factorization fails beyond the jitter retry."""


@dataclass
class PredictiveDistribution:
    """Observation-level Gaussian predictions (variance includes the noise)."""

    mean: np.ndarray
    variance: np.ndarray


@dataclass
class BlrPosterior:
    """Gaussian weight posterior, held through the Cholesky factor of A."""

    mean: np.ndarray  # (D,) posterior weight mean
    chol: np.ndarray  # (D, D) lower factor of A = I + Z^T Z / sigma^2
    noise_variance: float

    @property
    def num_features(self) -> int:
        return self.mean.shape[0]

    @property
    def covariance(self) -> np.ndarray:
        """S_w, materialized on demand."""
        return cho_solve((self.chol, True), np.eye(self.num_features))


def _chol_with_jitter(A: np.ndarray) -> np.ndarray:
    """Cholesky with one jittered retry; A >= I analytically, so a failure
    signals accumulated round-off only."""
    try:
        return cholesky(A, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.trace(A) / A.shape[0]
    try:
        return cholesky(A + jitter * np.eye(A.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(A)
        raise NumericalError(
            f"Cholesky failed even with jitter {jitter:.2e} (cond(A) = {cond:.2e})"
        ) from exc


def blr_fit(Z: np.ndarray, y: np.ndarray, noise_variance: float) -> BlrPosterior:
    """Fit the weight posterior from features Z and targets y."""
    if noise_variance <= 0.0:
        raise ValueError(f"noise variance must be positive, got {noise_variance}")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if Z.shape[0] != y.shape[0]:
        raise ValueError(f"Z has {Z.shape[0]} rows but y has {y.shape[0]} entries")
    D = Z.shape[1]
    A = np.eye(D) + (Z.T @ Z) / noise_variance
    L = _chol_with_jitter(A)
    mean = cho_solve((L, True), Z.T @ y) / noise_variance
    return BlrPosterior(mean=mean, chol=L, noise_variance=noise_variance)


def blr_predict(post: BlrPosterior, Z_star: np.ndarray) -> PredictiveDistribution:
    """Predictive moments at feature rows Z_star (observation level)."""
    Z_star = np.atleast_2d(np.asarray(Z_star, dtype=float))
    if Z_star.shape[1] != post.num_features:
        raise ValueError(
            f"feature count {Z_star.shape[1]} != posterior dimension {post.num_features}"
        )
    mean = Z_star @ post.mean
    # z^T S_w z = |L^{-1} z|^2 row by row, without forming S_w
    half = solve_triangular(post.chol, Z_star.T, lower=True)
    variance = np.sum(half * half, axis=0) + post.noise_variance
    return PredictiveDistribution(mean=mean, variance=variance)


def blr_log_marginal(Z: np.ndarray, y: np.ndarray, noise_variance: float) -> float:
    """log N(y | 0, sigma^2 I + Z Z^T), evaluated in D-dimensional form."""
    if noise_variance <= 0.0:
        raise ValueError(f"noise variance must be positive, got {noise_variance}")
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n = y.shape[0]
    A = np.eye(Z.shape[1]) + (Z.T @ Z) / noise_variance
    L = _chol_with_jitter(A)
    zy = Z.T @ y
    quad = (y @ y - (zy @ cho_solve((L, True), zy)) / noise_variance) / noise_variance
    logdet = 2.0 * float(np.sum(np.log(np.diag(L)))) + n * math.log(noise_variance)
    return -0.5 * (quad + logdet + n * math.log(2.0 * math.pi))


def blr_log_marginal_noise_gradient(Z: np.ndarray, y: np.ndarray, noise_variance: float) -> float:
    """Analytic d(log marginal)/d(log sigma^2), for gradient sanity checks.

    With Sigma = sigma^2 I + Z Z^T the derivative in sigma^2 is
    (|Sigma^{-1} y|^2 - tr(Sigma^{-1})) / 2, evaluated here through the
    D-dimensional factor.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, D = Z.shape
    A = np.eye(D) + (Z.T @ Z) / noise_variance
    L = _chol_with_jitter(A)
    m_w = cho_solve((L, True), Z.T @ y) / noise_variance
    resid = (y - Z @ m_w) / noise_variance  # = Sigma^{-1} y
    Linv = solve_triangular(L, np.eye(D), lower=True)
    trace_Ainv = float(np.sum(Linv * Linv))
    trace_Sinv = (n - D + trace_Ainv) / noise_variance
    return 0.5 * noise_variance * (float(resid @ resid) - trace_Sinv)


@dataclass
class ExactGpModel:
    X: np.ndarray
    alpha: np.ndarray  # (K + sigma^2 I)^{-1} y
    chol: np.ndarray  # lower factor of K + sigma^2 I
    lengthscale: float
    kernel_variance: float
    noise_variance: float


def _se_gram(X: np.ndarray, Y: np.ndarray, lengthscale: float, variance: float) -> np.ndarray:
    d2 = cdist(X, Y, "sqeuclidean")
    return variance * np.exp(-0.5 * d2 / lengthscale**2)


def exact_gp_fit(
    X: np.ndarray,
    y: np.ndarray,
    lengthscale: float,
    kernel_variance: float,
    noise_variance: float,
) -> ExactGpModel:
    """Dense Cholesky GP regression with the squared-exponential kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] > EXACT_GP_MAX_POINTS:
        raise ValueError(
            f"exact GP is limited to {EXACT_GP_MAX_POINTS} points "
            f"(got {X.shape[0]}); use the featurized model instead"
        )
    if min(lengthscale, kernel_variance, noise_variance) <= 0.0:
        raise ValueError("lengthscale, kernel variance and noise variance must be positive")
    K = _se_gram(X, X, lengthscale, kernel_variance)
    K[np.diag_indices_from(K)] += noise_variance
    L = _chol_with_jitter(K)
    alpha = cho_solve((L, True), y)
    return ExactGpModel(X, alpha, L, lengthscale, kernel_variance, noise_variance)


def exact_gp_predict(model: ExactGpModel, X_star: np.ndarray) -> PredictiveDistribution:
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    if X_star.shape[1] != model.X.shape[1]:
        raise ValueError(
            f"inputs have dimension {X_star.shape[1]}, model expects {model.X.shape[1]}"
        )
    K_star = _se_gram(X_star, model.X, model.lengthscale, model.kernel_variance)
    mean = K_star @ model.alpha
    half = solve_triangular(model.chol, K_star.T, lower=True)
    latent = model.kernel_variance - np.sum(half * half, axis=0)
    variance = np.maximum(latent, 0.0) + model.noise_variance
    return PredictiveDistribution(mean=mean, variance=variance)


def exact_gp_log_marginal(model: ExactGpModel, y: np.ndarray) -> float:
    y = np.asarray(y, dtype=float).ravel()
    n = y.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(model.chol))))
    return -0.5 * (float(y @ model.alpha) + logdet + n * math.log(2.0 * math.pi))


@dataclass
class NormalizationStats:
    """Train-split moments used to standardize inputs and outputs."""

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    def transform_x(self, X: np.ndarray) -> np.ndarray:
        return (X - self.x_mean) / self.x_std

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        return (y - self.y_mean) / self.y_std

    def inverse_mean(self, mean: np.ndarray) -> np.ndarray:
        return mean * self.y_std + self.y_mean

    def inverse_variance(self, variance: np.ndarray) -> np.ndarray:
        return variance * self.y_std**2

    @staticmethod
    def identity(dim: int) -> "NormalizationStats":
        return NormalizationStats(np.zeros(dim), np.ones(dim), 0.0, 1.0)

    def to_doc(self) -> dict:
        return {
            "x_mean": [float(v) for v in self.x_mean],
            "x_std": [float(v) for v in self.x_std],
            "y_mean": float(self.y_mean),
            "y_std": float(self.y_std),
        }

    @staticmethod
    def from_doc(doc: dict) -> "NormalizationStats":
        return NormalizationStats(
            np.asarray(doc["x_mean"], dtype=float),
            np.asarray(doc["x_std"], dtype=float),
            float(doc["y_mean"]),
            float(doc["y_std"]),
        )


def _encode_matrix(M: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(M, dtype="<f8").tobytes()).decode("ascii")


def _decode_matrix(text: str, shape: tuple[int, ...]) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").reshape(shape).copy()


@dataclass
class FittedFeatureModel:
    """A feature map plus its weight posterior, ready to predict raw inputs."""

    fmap: FeatureMap
    posterior: BlrPosterior
    gamma: float  # global output scale applied to the feature columns
    norm: NormalizationStats
    log_marginal: float = field(default=math.nan)

    def predict(self, X: np.ndarray, n_workers: int = 1) -> PredictiveDistribution:
        Z = self.gamma * featurize(self.fmap, self.norm.transform_x(np.atleast_2d(X)), n_workers)
        pred = blr_predict(self.posterior, Z)
        return PredictiveDistribution(
            self.norm.inverse_mean(pred.mean), self.norm.inverse_variance(pred.variance)
        )

    def to_doc(self) -> dict:
        return {
            "version": 1,
            "kind": "feature_model",
            "feature_map": feature_map_to_doc(self.fmap),
            "weight_mean": [float(v) for v in self.posterior.mean],
            "chol_factor_b64": _encode_matrix(self.posterior.chol),
            "noise_variance": float(self.posterior.noise_variance),
            "gamma": float(self.gamma),
            "norm_stats": self.norm.to_doc(),
            "log_marginal": float(self.log_marginal),
        }

    @staticmethod
    def from_doc(doc: dict) -> "FittedFeatureModel":
        fmap = feature_map_from_doc(doc["feature_map"])
        d = len(doc["weight_mean"])
        post = BlrPosterior(
            mean=np.asarray(doc["weight_mean"], dtype=float),
            chol=_decode_matrix(doc["chol_factor_b64"], (d, d)),
            noise_variance=float(doc["noise_variance"]),
        )
        return FittedFeatureModel(
            fmap=fmap,
            posterior=post,
            gamma=float(doc["gamma"]),
            norm=NormalizationStats.from_doc(doc["norm_stats"]),
            log_marginal=float(doc["log_marginal"]),
        )


def fit_feature_model(
    fmap: FeatureMap,
    X: np.ndarray,
    y: np.ndarray,
    noise_variance: float,
    gamma: float = 1.0,
    norm: NormalizationStats | None = None,
    n_workers: int = 1,
) -> FittedFeatureModel:
    """Featurize standardized inputs and fit the weight posterior."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if norm is None:
        norm = NormalizationStats.identity(X.shape[1])
    Z = gamma * featurize(fmap, norm.transform_x(X), n_workers)
    y_n = norm.transform_y(y)
    post = blr_fit(Z, y_n, noise_variance)
    lml = blr_log_marginal(Z, y_n, noise_variance)
    return FittedFeatureModel(fmap, post, gamma, norm, lml)
