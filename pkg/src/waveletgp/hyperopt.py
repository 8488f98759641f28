"""Marginal-likelihood maximization with common random numbers.

The base uniforms behind a feature map are frozen once per optimization;
every objective evaluation re-transforms the same draws under the candidate
distribution parameters.  That makes the objective a smooth deterministic
function of the hyperparameters (no resampling jumps), so a derivative-free
simplex search is enough for the handful of parameters involved.

The scale-range ordering s_min < s_max is enforced structurally by
searching over (log s_min, log of the width of the log-range) instead of
the pair itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from . import rng
from .features import (
    FourierFeatureMap,
    SamplingDistribution,
    WaveletFeatureMap,
    base_draws,
    featurize,
    fourier_base_normals,
    fourier_base_phases,
    shift_box_for,
    wavelet_map_from_draws,
)
from .model import blr_fit, blr_log_marginal
from .wavelets import MotherWavelet

SIMPLEX_COLLAPSE_TOL = 1e-8


@dataclass(frozen=True)
class HyperParams:
    """Log-scale hyperparameters; fields irrelevant to a method stay None."""

    log_noise: float
    log_s_min: float | None = None
    log_s_max: float | None = None
    log_gamma: float = 0.0
    log_lengthscale: float | None = None

    def __post_init__(self):
        if self.log_s_min is not None and self.log_s_max is not None:
            if not self.log_s_min < self.log_s_max:
                raise ValueError("need log_s_min < log_s_max")

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise)

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)

    @property
    def s_min(self) -> float:
        return math.exp(self.log_s_min)

    @property
    def s_max(self) -> float:
        return math.exp(self.log_s_max)

    @property
    def lengthscale(self) -> float:
        return math.exp(self.log_lengthscale)


@dataclass
class OptResult:
    best: HyperParams
    best_objective: float
    trace: list[tuple[int, float]]  # (evaluation index, best objective so far)
    evaluations: int
    budget_exhausted: bool
    restarted: bool


@dataclass(frozen=True)
class FrozenWaveletDraws:
    """Base uniforms for a wavelet map, fixed for a whole optimization."""

    wavelet: MotherWavelet
    base_u: np.ndarray
    base_v: np.ndarray
    seed: int

    @staticmethod
    def sample(wavelet: MotherWavelet, num_features: int, seed: int) -> "FrozenWaveletDraws":
        u, v = base_draws(wavelet.dim, num_features, seed)
        return FrozenWaveletDraws(wavelet, u, v, seed)

    def map_for(self, params: HyperParams, X: np.ndarray) -> WaveletFeatureMap:
        lower, upper = shift_box_for(X, self.wavelet, params.s_max)
        dist = SamplingDistribution(params.s_min, params.s_max, lower, upper)
        return wavelet_map_from_draws(self.wavelet, dist, self.base_u, self.base_v, self.seed)


@dataclass(frozen=True)
class FrozenFourierDraws:
    """Standard-normal frequencies and phases, fixed for a whole optimization."""

    normals: np.ndarray
    phases: np.ndarray
    seed: int

    @staticmethod
    def sample(dim: int, num_features: int, seed: int) -> "FrozenFourierDraws":
        return FrozenFourierDraws(
            fourier_base_normals(dim, num_features, seed),
            fourier_base_phases(num_features, seed),
            seed,
        )

    def map_for(self, params: HyperParams) -> FourierFeatureMap:
        ell = params.lengthscale
        return FourierFeatureMap(self.normals / ell, self.phases, ell, self.seed)


def objective(
    params: HyperParams,
    draws: FrozenWaveletDraws | FrozenFourierDraws,
    X: np.ndarray,
    y: np.ndarray,
    ridge: float = 0.0,
) -> float:
    """Featurized log marginal likelihood at ``params`` under frozen draws.

    ``ridge`` > 0 subtracts ridge * |m_w|^2, a weight-decay surrogate on the
    MAP weights; off by default since the unit-variance prior already
    regularizes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if isinstance(draws, FrozenWaveletDraws):
        fmap = draws.map_for(params, X)
    else:
        fmap = draws.map_for(params)
    Z = params.gamma * featurize(fmap, X)
    value = blr_log_marginal(Z, y, params.noise_variance)
    if ridge > 0.0:
        m_w = blr_fit(Z, y, params.noise_variance).mean
        value -= ridge * float(m_w @ m_w)
    return value


@dataclass
class SimplexResult:
    x: np.ndarray
    value: float
    trace: list[tuple[int, float]]
    evaluations: int
    budget_exhausted: bool
    restarted: bool


def maximize_simplex(fn, x0: np.ndarray, budget: int, seed: int) -> SimplexResult:
    """Nelder-Mead maximization that reports the best point ever evaluated.

    Runs once more from a perturbed start if the first simplex collapses
    (vertex spread below 1e-8) with budget remaining.
    """
    if budget < 10:
        raise ValueError(f"budget must be at least 10, got {budget}")
    x0 = np.asarray(x0, dtype=float)
    state = {"best_x": None, "best_f": -math.inf, "count": 0}
    trace: list[tuple[int, float]] = []

    def wrapped(x):
        value = fn(np.asarray(x, dtype=float))
        if value > state["best_f"]:
            state["best_f"] = value
            state["best_x"] = np.array(x, dtype=float)
        trace.append((state["count"], state["best_f"]))
        state["count"] += 1
        return -value

    def run(start, maxfev):
        return minimize(
            wrapped,
            start,
            method="Nelder-Mead",
            options={"maxfev": maxfev, "xatol": 1e-8, "fatol": 1e-10},
        )

    res = run(x0, budget)
    vertices = res.final_simplex[0]
    spread = float(np.max(np.abs(vertices - vertices[0])))
    restarted = False
    remaining = budget - state["count"]
    if spread < SIMPLEX_COLLAPSE_TOL and remaining >= 10:
        restarted = True
        jolt = rng.uniform_block(seed, rng.STREAM_OPT, 1, x0.shape[0])[0] - 0.5
        run(x0 + 0.5 * jolt * (np.abs(x0) + 1.0), remaining)

    return SimplexResult(
        x=state["best_x"],
        value=state["best_f"],
        trace=trace,
        evaluations=state["count"],
        budget_exhausted=state["count"] >= budget,
        restarted=restarted,
    )


def _encode(params: HyperParams, method: str) -> np.ndarray:
    if method == "rwf":
        width = params.log_s_max - params.log_s_min
        return np.array([params.log_noise, params.log_s_min, math.log(width), params.log_gamma])
    if method == "rff":
        return np.array([params.log_noise, params.log_lengthscale, params.log_gamma])
    if method == "exact":
        return np.array([params.log_noise, params.log_lengthscale, params.log_gamma])
    raise ValueError(f"unknown method {method!r}")


def _decode(vec: np.ndarray, method: str) -> HyperParams:
    if method == "rwf":
        log_noise, log_s_min, log_width, log_gamma = vec
        return HyperParams(
            log_noise=float(log_noise),
            log_s_min=float(log_s_min),
            log_s_max=float(log_s_min + math.exp(log_width)),
            log_gamma=float(log_gamma),
        )
    log_noise, log_ell, log_gamma = vec
    return HyperParams(
        log_noise=float(log_noise),
        log_lengthscale=float(log_ell),
        log_gamma=float(log_gamma),
    )


def optimize(
    X: np.ndarray,
    y: np.ndarray,
    init: HyperParams,
    budget: int,
    seed: int,
    *,
    method: str = "rwf",
    wavelet: MotherWavelet | None = None,
    num_features: int | None = None,
    ridge: float = 0.0,
) -> OptResult:
    """Maximize the featurized marginal likelihood over hyperparameters.

    For the feature methods ("rwf", "rff"), the base draws are sampled once
    from ``seed`` and held fixed across all evaluations.  "exact" optimizes
    the dense GP marginal likelihood (gamma plays the amplitude role,
    kernel variance = gamma^2).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()

    if method == "rwf":
        if wavelet is None or num_features is None:
            raise ValueError("rwf optimization needs a wavelet and a feature count")
        draws = FrozenWaveletDraws.sample(wavelet, num_features, seed)
        fn = lambda vec: objective(_decode(vec, method), draws, X, y, ridge)
    elif method == "rff":
        if num_features is None:
            raise ValueError("rff optimization needs a feature count")
        draws = FrozenFourierDraws.sample(X.shape[1], num_features, seed)
        fn = lambda vec: objective(_decode(vec, method), draws, X, y, ridge)
    elif method == "exact":
        from .model import exact_gp_fit, exact_gp_log_marginal

        def fn(vec):
            p = _decode(vec, method)
            model = exact_gp_fit(X, y, p.lengthscale, p.gamma**2, p.noise_variance)
            return exact_gp_log_marginal(model, y)

    else:
        raise ValueError(f"unknown method {method!r}")

    res = maximize_simplex(fn, _encode(init, method), budget, seed)
    return OptResult(
        best=_decode(res.x, method),
        best_objective=res.value,
        trace=res.trace,
        evaluations=res.evaluations,
        budget_exhausted=res.budget_exhausted,
        restarted=res.restarted,
    )


def default_init(method: str, X: np.ndarray, y: np.ndarray) -> HyperParams:
    """A data-scaled starting point: mid-range scales, 1% noise, unit gamma."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    extent = float(np.max(X.max(axis=0) - X.min(axis=0)))
    if extent <= 0.0:
        extent = 1.0
    log_noise = math.log(max(0.01 * float(np.var(y)), 1e-8))
    if method == "rwf":
        return HyperParams(
            log_noise=log_noise,
            log_s_min=math.log(extent / 50.0),
            log_s_max=math.log(extent / 2.0),
        )
    return HyperParams(log_noise=log_noise, log_lengthscale=math.log(extent / 8.0))
