"""Dataset synthesis, regression metrics, and the benchmark runner.

The synthetic task is a multi-step function on [-1, 1]: alternating jumps
at equally spaced change points, heights rescaled so the noiseless signal
has unit variance over the training inputs, plus Gaussian noise.  Stationary
feature maps oversmooth it; localized wavelet atoms should not.

All metrics are reported in the original target units: the pipeline
standardizes from training statistics, fits, predicts, then inverts the
transform before scoring.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm as normal_dist

from . import rng
from .features import sample_rff, sample_rwf, shift_box_for, SamplingDistribution
from .hyperopt import HyperParams, default_init, optimize
from .model import (
    FittedFeatureModel,
    NormalizationStats,
    PredictiveDistribution,
    exact_gp_fit,
    exact_gp_predict,
    fit_feature_model,
)
from .wavelets import MEXICAN_HAT, mother_wavelet

METHODS = ("rwf", "rff", "exact")


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    norm: NormalizationStats | None = None

    def __post_init__(self):
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite entries")
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test rows overlap")

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.y[self.train_idx]

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.y[self.test_idx]


@dataclass
class MetricsBundle:
    method: str
    rmse: float
    crps: float
    nll: float
    fit_seconds: float
    predict_seconds: float
    num_features: int
    n_train: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rmse": self.rmse,
            "crps": self.crps,
            "nll": self.nll,
            "fit_seconds": self.fit_seconds,
            "predict_seconds": self.predict_seconds,
            "num_features": self.num_features,
            "n_train": self.n_train,
            "seed": self.seed,
        }


def multistep_signal(x: np.ndarray, n_steps: int, heights: np.ndarray) -> np.ndarray:
    """Sum of steps at equally spaced change points in (-1, 1)."""
    changes = -1.0 + 2.0 * np.arange(1, n_steps + 1) / (n_steps + 1)
    out = np.zeros_like(x)
    for c, h in zip(changes, heights):
        out += h * (x >= c)
    return out


def gen_multistep(
    n_train: int = 4200,
    n_test: int = 1800,
    n_steps: int = 5,
    noise_sd: float = 0.05,
    seed: int = 0,
    unit_signal_variance: bool = True,
) -> Dataset:
    """Non-stationary multi-step regression task on [-1, 1].

    Step heights alternate +-1 and are rescaled so the noiseless signal has
    unit sample variance over the training inputs (skipped when
    ``unit_signal_variance`` is off).
    """
    if n_steps < 1:
        raise ValueError(f"need at least one step, got {n_steps}")
    n = n_train + n_test
    u = rng.uniform_block(seed, rng.STREAM_DATA, n, 1)[:, 0]
    x = -1.0 + 2.0 * u
    heights = np.array([1.0 if k % 2 == 0 else -1.0 for k in range(n_steps)])
    signal = multistep_signal(x, n_steps, heights)
    if unit_signal_variance:
        sd = float(np.std(signal[:n_train]))
        if sd > 0.0:
            heights = heights / sd
            signal = multistep_signal(x, n_steps, heights)
    noise_u = rng.uniform_block(seed, rng.STREAM_NOISE, n, 2)
    noise = rng.box_muller(noise_u[:, 0], noise_u[:, 1])[0]
    y = signal + noise_sd * noise
    return Dataset(
        X=x[:, None],
        y=y,
        train_idx=np.arange(n_train),
        test_idx=np.arange(n_train, n),
    )


def load_csv(path: str, test_fraction: float = 0.1, split_seed: int = 0) -> Dataset:
    """Load a header-row CSV with columns x1..xd,y and split train/test.

    The split is a seeded permutation; the last ceil(fraction * N) rows go
    to test.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file, expected a header row")
        width = len(header)
        if width < 2:
            raise ValueError(f"{path}: need at least one input column and one target")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ValueError(f"{path}: row {line_no} has {len(row)} cells, expected {width}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                bad = next(i for i, cell in enumerate(row) if not _parses(cell))
                raise ValueError(
                    f"{path}: row {line_no}, column {header[bad]!r}: cannot parse {row[bad]!r}"
                ) from exc
            if not all(math.isfinite(v) for v in values):
                bad = next(i for i, v in enumerate(values) if not math.isfinite(v))
                raise ValueError(f"{path}: row {line_no}, column {header[bad]!r}: non-finite value")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    n = data.shape[0]
    n_test = int(math.ceil(test_fraction * n)) if test_fraction > 0 else 0
    perm = np.random.default_rng(split_seed).permutation(n)
    return Dataset(
        X=data[:, :-1],
        y=data[:, -1],
        train_idx=np.sort(perm[: n - n_test]),
        test_idx=np.sort(perm[n - n_test:]),
    )


def _parses(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def normalize(ds: Dataset) -> Dataset:
    """Attach z-score statistics computed from the training rows only."""
    x_mean = ds.X_train.mean(axis=0)
    x_std = ds.X_train.std(axis=0)
    if np.any(x_std == 0.0):
        warnings.warn("constant input column: clamping its std to 1")
        x_std = np.where(x_std == 0.0, 1.0, x_std)
    y_std = float(ds.y_train.std())
    if y_std == 0.0:
        warnings.warn("constant targets: clamping output std to 1")
        y_std = 1.0
    norm = NormalizationStats(x_mean, x_std, float(ds.y_train.mean()), y_std)
    return Dataset(ds.X, ds.y, ds.train_idx, ds.test_idx, norm)


def rmse(mean: np.ndarray, y: np.ndarray) -> float:
    mean = np.asarray(mean, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if mean.shape != y.shape:
        raise ValueError("prediction/target length mismatch")
    return float(np.sqrt(np.mean((y - mean) ** 2)))


def nll(pred: PredictiveDistribution, y: np.ndarray) -> float:
    """Average negative log density of y under the Gaussian predictions."""
    y = np.asarray(y, dtype=float).ravel()
    var = np.asarray(pred.variance, dtype=float).ravel()
    if np.any(var <= 0.0):
        raise ValueError("predictive variances must be positive")
    return float(np.mean(0.5 * np.log(2.0 * math.pi * var) + (y - pred.mean) ** 2 / (2.0 * var)))


def crps(pred: PredictiveDistribution, y: np.ndarray) -> float:
    """Average continuous ranked probability score, Gaussian closed form."""
    y = np.asarray(y, dtype=float).ravel()
    var = np.asarray(pred.variance, dtype=float).ravel()
    if np.any(var <= 0.0):
        raise ValueError("predictive variances must be positive")
    sd = np.sqrt(var)
    z = (y - pred.mean) / sd
    per_point = sd * (z * (2.0 * normal_dist.cdf(z) - 1.0) + 2.0 * normal_dist.pdf(z) - 1.0 / math.sqrt(math.pi))
    return float(np.mean(per_point))


def fit_method(
    method: str,
    ds: Dataset,
    num_features: int,
    seed: int,
    budget: int = 80,
    init: HyperParams | None = None,
    family: str = MEXICAN_HAT,
    omega0=None,
    ridge: float = 0.0,
):
    """Standardize, tune hyperparameters, and fit one method.

    Returns (model, opt_result); the model predicts in original units.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    ds = normalize(ds) if ds.norm is None else ds
    norm = ds.norm
    Xn = norm.transform_x(ds.X_train)
    yn = norm.transform_y(ds.y_train)

    if method == "exact":
        if init is None:
            init = default_init("rff", Xn, yn)
        opt = optimize(Xn, yn, init, budget, seed, method="exact")
        p = opt.best
        model = exact_gp_fit(Xn, yn, p.lengthscale, p.gamma**2, p.noise_variance)
        return _ExactWrapper(model, norm), opt

    if method == "rwf":
        wavelet = mother_wavelet(family, ds.X.shape[1], omega0)
        if init is None:
            init = default_init("rwf", Xn, yn)
        opt = optimize(
            Xn, yn, init, budget, seed,
            method="rwf", wavelet=wavelet, num_features=num_features, ridge=ridge,
        )
        p = opt.best
        lower, upper = shift_box_for(Xn, wavelet, p.s_max)
        dist = SamplingDistribution(p.s_min, p.s_max, lower, upper)
        fmap = sample_rwf(wavelet, dist, num_features, seed)
    else:
        if init is None:
            init = default_init("rff", Xn, yn)
        opt = optimize(
            Xn, yn, init, budget, seed, method="rff", num_features=num_features, ridge=ridge,
        )
        p = opt.best
        fmap = sample_rff(p.lengthscale, ds.X.shape[1], num_features, seed)

    model = fit_feature_model(fmap, ds.X_train, ds.y_train, p.noise_variance, p.gamma, norm)
    return model, opt


@dataclass
class _ExactWrapper:
    """Exact GP with the same raw-unit predict interface as feature models."""

    model: object
    norm: NormalizationStats

    def predict(self, X: np.ndarray, n_workers: int = 1) -> PredictiveDistribution:
        pred = exact_gp_predict(self.model, self.norm.transform_x(np.atleast_2d(X)))
        return PredictiveDistribution(
            self.norm.inverse_mean(pred.mean), self.norm.inverse_variance(pred.variance)
        )


def evaluate(model, ds: Dataset, method: str, num_features: int, seed: int,
             fit_seconds: float) -> MetricsBundle:
    t0 = time.perf_counter()
    pred = model.predict(ds.X_test)
    predict_seconds = time.perf_counter() - t0
    return MetricsBundle(
        method=method,
        rmse=rmse(pred.mean, ds.y_test),
        crps=crps(pred, ds.y_test),
        nll=nll(pred, ds.y_test),
        fit_seconds=fit_seconds,
        predict_seconds=predict_seconds,
        num_features=num_features,
        n_train=int(ds.train_idx.size),
        seed=seed,
    )


def _dataset_from_config(cfg: dict, seed: int) -> Dataset:
    kind = cfg.get("kind", "multistep")
    if kind == "multistep":
        return gen_multistep(
            n_train=int(cfg.get("n_train", 4200)),
            n_test=int(cfg.get("n_test", 1800)),
            n_steps=int(cfg.get("n_steps", 5)),
            noise_sd=float(cfg.get("noise_sd", 0.05)),
            seed=seed,
        )
    if kind == "csv":
        return load_csv(
            cfg["path"],
            test_fraction=float(cfg.get("test_fraction", 0.1)),
            split_seed=seed,
        )
    raise ValueError(f"unknown dataset kind {kind!r}")


def run_benchmark(config: dict) -> tuple[list[MetricsBundle], dict]:
    """Run every configured method over the repeats; returns rows + aggregate."""
    methods = config.get("methods", ["rwf", "rff"])
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    repeats = int(config.get("repeats", 5))
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    num_features = int(config.get("num_features", config.get("D", 200)))
    master_seed = int(config.get("seed", 0))
    budget = int(config.get("optimizer", {}).get("budget", 80))
    data_cfg = config.get("dataset", {})
    family = config.get("family", MEXICAN_HAT)
    ridge = float(config.get("ridge", 0.0))

    rows: list[MetricsBundle] = []
    for r in range(repeats):
        seed = master_seed + r
        ds = normalize(_dataset_from_config(data_cfg, seed))
        for method in methods:
            t0 = time.perf_counter()
            model, _ = fit_method(
                method, ds, num_features, seed, budget, family=family, ridge=ridge
            )
            fit_seconds = time.perf_counter() - t0
            rows.append(evaluate(model, ds, method, num_features, seed, fit_seconds))
    return rows, aggregate(rows)


def aggregate(rows: list[MetricsBundle]) -> dict:
    """Per-method mean and std of each metric, recomputable from the rows."""
    out: dict = {}
    for method in sorted({r.method for r in rows}):
        sub = [r for r in rows if r.method == method]
        out[method] = {
            metric: {
                "mean": float(np.mean([getattr(r, metric) for r in sub])),
                "std": float(np.std([getattr(r, metric) for r in sub])),
            }
            for metric in ("rmse", "crps", "nll", "fit_seconds")
        }
    return out


def run_sweep(config: dict) -> tuple[list[MetricsBundle], dict]:
    """Benchmark across a list of feature counts; one aggregate per (method, D)."""
    counts = config.get("feature_counts", config.get("D_list", [25, 50, 100, 200, 400]))
    rows: list[MetricsBundle] = []
    per_d: dict = {}
    for D in counts:
        sub_cfg = dict(config)
        sub_cfg["num_features"] = int(D)
        sub_rows, agg = run_benchmark(sub_cfg)
        rows.extend(sub_rows)
        per_d[str(D)] = agg
    return rows, per_d


def _timed_fit(X: np.ndarray, y: np.ndarray, num_features: int, seed: int,
               params: HyperParams, family: str, repeats: int = 3) -> float:
    """Median wall-clock of featurize+fit at fixed hyperparameters."""
    wavelet = mother_wavelet(family, X.shape[1])
    lower, upper = shift_box_for(X, wavelet, params.s_max)
    dist = SamplingDistribution(params.s_min, params.s_max, lower, upper)
    fmap = sample_rwf(wavelet, dist, num_features, seed)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit_feature_model(fmap, X, y, params.noise_variance)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _timing_params() -> HyperParams:
    return HyperParams(log_noise=math.log(0.01), log_s_min=math.log(0.05), log_s_max=math.log(0.5))


def timing_scaling(n_list, num_features: int = 256, seed: int = 0) -> list[dict]:
    """Median fit seconds against training size at a fixed feature count."""
    out = []
    params = _timing_params()
    for n in n_list:
        ds = gen_multistep(n_train=int(n), n_test=10, seed=seed)
        t = _timed_fit(ds.X_train, ds.y_train, num_features, seed, params, MEXICAN_HAT)
        out.append({"n_train": int(n), "num_features": num_features, "fit_seconds": t})
    slope = float(np.polyfit([r["n_train"] for r in out], [r["fit_seconds"] for r in out], 1)[0])
    for r in out:
        r["seconds_per_point"] = slope
    return out


def timing_scaling_features(d_list, n_train: int = 8000, seed: int = 0) -> list[dict]:
    """Median fit seconds against feature count at a fixed training size."""
    ds = gen_multistep(n_train=int(n_train), n_test=10, seed=seed)
    params = _timing_params()
    return [
        {
            "n_train": int(n_train),
            "num_features": int(D),
            "fit_seconds": _timed_fit(ds.X_train, ds.y_train, int(D), seed, params, MEXICAN_HAT),
        }
        for D in d_list
    ]
