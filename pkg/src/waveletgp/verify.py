"""Executable checks for the theoretical guarantees of wavelet features.

Every guarantee becomes a deterministic pass/fail numerical check backed by
the quadrature oracle: unbiasedness of the Monte Carlo kernel, the
variance bound, positive definiteness, the uniform-convergence rate in the
feature count, the stationarity dichotomy driven by the shift domain, and
moment cancellation at small scales.  Each check emits a CheckReport whose
verdict is recomputable from its statistic and threshold.

Negative controls (a deliberately biased sampler, a corrupted kernel)
exist so the suite can demonstrate its own power: they must fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .features import SamplingDistribution, WaveletFeatureMap, featurize, sample_rwf, wavelet_map_from_draws, base_draws
from .kernels import DEFAULT_SPEC, QuadratureSpec, gram, min_eigenvalue, quadrature_convergence, wavelet_kernel
from .wavelets import HAAR, MEXICAN_HAT, MotherWavelet, constants, effective_radius, mother_wavelet

ORACLE_RTOL = 1e-6


@dataclass
class CheckReport:
    name: str
    passed: bool
    statistic: float
    threshold: float
    direction: str  # "leq" or "geq": how statistic compares to threshold
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "statistic": float(self.statistic),
            "threshold": float(self.threshold),
            "direction": self.direction,
            "details": self.details,
        }


def _report(name: str, statistic: float, threshold: float, direction: str, details: dict) -> CheckReport:
    if direction == "leq":
        passed = statistic <= threshold
    elif direction == "geq":
        passed = statistic >= threshold
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return CheckReport(name, passed, float(statistic), float(threshold), direction, details)


def _map_seed(seed: int, index: int) -> int:
    return seed + 1_000_003 * index


def _unique_points(pairs) -> tuple[np.ndarray, list[tuple[int, int]]]:
    points: list[tuple[float, ...]] = []
    lookup: dict[tuple[float, ...], int] = {}
    index_pairs = []
    for x, y in pairs:
        ids = []
        for p in (np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(y, dtype=float))):
            key = tuple(p.tolist())
            if key not in lookup:
                lookup[key] = len(points)
                points.append(key)
            ids.append(lookup[key])
        index_pairs.append(tuple(ids))
    return np.asarray(points, dtype=float), index_pairs


def _pair_estimates(
    w: MotherWavelet,
    dist: SamplingDistribution,
    pairs,
    num_features: int,
    resamples: int,
    seed: int,
    biased: bool = False,
) -> np.ndarray:
    """Matrix (resamples, n_pairs) of Monte Carlo kernel estimates."""
    points, index_pairs = _unique_points(pairs)
    out = np.empty((resamples, len(index_pairs)))
    for r in range(resamples):
        fmap = sample_rwf(w, dist, num_features, _map_seed(seed, r))
        if biased:
            # wrong scale density: uniform in s instead of log-uniform
            scales = dist.s_min + fmap.base_u * (dist.s_max - dist.s_min)
            fmap = WaveletFeatureMap(
                w, dist, scales, fmap.shifts, fmap.base_u, fmap.base_v, fmap.seed
            )
        Z = featurize(fmap, points)
        K = Z @ Z.T
        out[r] = [K[i, j] for i, j in index_pairs]
    return out


def _oracle_values(w, dist, pairs, spec) -> np.ndarray:
    return np.array([wavelet_kernel(w, dist, x, y, spec) for x, y in pairs])


def check_unbiasedness(
    w: MotherWavelet,
    dist: SamplingDistribution,
    pairs,
    num_features: int = 64,
    resamples: int = 200,
    seed: int = 0,
    spec: QuadratureSpec = DEFAULT_SPEC,
    biased: bool = False,
) -> CheckReport:
    """Monte Carlo means must sit within 4 standard errors of the oracle."""
    conv = quadrature_convergence(w, dist, list(pairs), spec)
    estimates = _pair_estimates(w, dist, pairs, num_features, resamples, seed, biased)
    oracle = _oracle_values(w, dist, pairs, spec)
    mean = estimates.mean(axis=0)
    se = estimates.std(axis=0, ddof=1) / math.sqrt(resamples)
    ratio = np.abs(mean - oracle) / (4.0 * se + 1e-9)
    statistic = float(np.max(ratio))
    details = {
        "num_features": num_features,
        "resamples": resamples,
        "seed": seed,
        "oracle_convergence": conv,
        "pair_z": [float(v) for v in ratio],
    }
    report = _report("unbiasedness", statistic, 1.0, "leq", details)
    if conv > ORACLE_RTOL:
        report.passed = False
        report.details["oracle_trusted"] = False
    return report


def check_variance_bound(
    w: MotherWavelet,
    dist: SamplingDistribution,
    pairs,
    num_features: int = 64,
    resamples: int = 200,
    seed: int = 0,
) -> CheckReport:
    """Empirical variance across maps must respect B^2/D with sampling slack."""
    estimates = _pair_estimates(w, dist, pairs, num_features, resamples, seed)
    variances = estimates.var(axis=0, ddof=1)
    bound = constants(w, dist.s_min).bound ** 2 / num_features
    allowed = bound * (1.0 + 5.0 / math.sqrt(resamples))
    statistic = float(np.max(variances) / allowed)
    details = {
        "num_features": num_features,
        "resamples": resamples,
        "seed": seed,
        "variance_bound": bound,
        "pair_variances": [float(v) for v in variances],
    }
    return _report("variance_bound", statistic, 1.0, "leq", details)


def check_positive_definite(
    w: MotherWavelet,
    dist: SamplingDistribution,
    n_points: int = 20,
    n_sets: int = 50,
    seed: int = 0,
    spec: QuadratureSpec = DEFAULT_SPEC,
    num_features: int = 256,
    corrupt: bool = False,
) -> CheckReport:
    """Oracle Grams must have min eigenvalue >= -1e-8 of the max; the
    explicit feature Gram Z Z^T must be PSD by construction."""
    rng_pts = np.random.default_rng(seed)
    worst = math.inf
    worst_feature = math.inf
    for idx in range(n_sets):
        X = rng_pts.uniform(-1.0, 1.0, size=(n_points, w.dim))

        def kernel(x, y):
            value = wavelet_kernel(w, dist, x, y, spec)
            if corrupt and np.array_equal(x, y):
                value -= 0.5 * abs(value) + 0.05
            return value

        G = gram(kernel, X)
        eigs_max = float(np.max(np.linalg.eigvalsh(G)))
        ratio = min_eigenvalue(G) / max(eigs_max, 1e-300)
        worst = min(worst, ratio)

        Z = featurize(sample_rwf(w, dist, num_features, _map_seed(seed, idx)), X)
        Gf = Z @ Z.T
        fmax = float(np.max(np.linalg.eigvalsh(Gf)))
        worst_feature = min(worst_feature, min_eigenvalue(Gf) / max(fmax, 1e-300))
    details = {
        "n_points": n_points,
        "n_sets": n_sets,
        "seed": seed,
        "worst_oracle_ratio": worst,
        "worst_feature_ratio": worst_feature,
        "feature_gram_psd": worst_feature >= -1e-10,
    }
    report = _report("positive_definite", worst, -1e-8, "geq", details)
    if worst_feature < -1e-10:
        report.passed = False
    return report


def empirical_uniform_error(
    w: MotherWavelet,
    dist: SamplingDistribution,
    grid: np.ndarray,
    feature_counts=(16, 32, 64, 128, 256),
    resamples: int = 50,
    seed: int = 0,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> CheckReport:
    """Sup error over a grid must shrink like D^{-1/2} (log-log slope)."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    oracle = gram(lambda a, b: wavelet_kernel(w, dist, a, b, spec), grid)
    mean_sup = []
    for D in feature_counts:
        sups = np.empty(resamples)
        for r in range(resamples):
            Z = featurize(sample_rwf(w, dist, D, _map_seed(seed, r)), grid)
            sups[r] = float(np.max(np.abs(Z @ Z.T - oracle)))
        mean_sup.append(float(sups.mean()))
    slope = float(np.polyfit(np.log(np.asarray(feature_counts, dtype=float)), np.log(mean_sup), 1)[0])
    details = {
        "feature_counts": list(feature_counts),
        "mean_sup_error": mean_sup,
        "resamples": resamples,
        "seed": seed,
        "grid_size": int(grid.shape[0]),
        "slope": slope,
    }
    return _report("convergence_rate", abs(slope + 0.5), 0.2, "leq", details)


def sample_complexity(
    bound: float, dim: int, diameter: float, map_lipschitz: float, eps: float, delta: float
) -> int:
    """Feature count sufficient for uniform error eps with confidence 1-delta.

    D >= (8 B^2 / eps^2) (2 d log(4 diam L_z / eps) + log(2 / delta)),
    with the log clamped at zero where its argument drops below 1 so the
    result stays positive and conservative.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    log_cover = max(math.log(4.0 * diameter * map_lipschitz / eps), 0.0)
    value = (8.0 * bound**2 / eps**2) * (2.0 * dim * log_cover + math.log(2.0 / delta))
    return int(math.ceil(value))


def check_stationarity(
    w: MotherWavelet,
    scale_range: tuple[float, float] = (0.5, 2.0),
    tight_box: tuple[float, float] = (-1.0, 1.0),
    large_box: tuple[float, float] = (-50.0, 50.0),
    probes=((0.7, 0.9), (0.5, 0.8), (-0.9, -0.55), (0.0, 0.3)),
    shift: float = 0.5,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> list[CheckReport]:
    """Two reports: shift-invariance on a large box, its failure on a tight one.

    A shift domain big enough that every atom reaching the probes lies
    interior makes the kernel translation invariant; a domain clipped at the
    data boundary must break it.
    """
    s_min, s_max = scale_range

    def max_shift_diff(box):
        dist = SamplingDistribution(s_min, s_max, np.array([box[0]]), np.array([box[1]]))
        worst = 0.0
        for x, y in probes:
            base = wavelet_kernel(w, dist, np.array([x]), np.array([y]), spec)
            moved = wavelet_kernel(w, dist, np.array([x + shift]), np.array([y + shift]), spec)
            worst = max(worst, abs(moved - base))
        return worst

    large_stat = max_shift_diff(large_box)
    tight_stat = max_shift_diff(tight_box)
    shared = {"scale_range": list(scale_range), "shift": shift, "probes": [list(p) for p in probes]}
    return [
        _report("stationarity_large_box", large_stat, 1e-6, "leq",
                {**shared, "box": list(large_box)}),
        _report("stationarity_tight_box", tight_stat, 1e-3, "geq",
                {**shared, "box": list(tight_box)}),
    ]


def _quadratic_density(coeffs: tuple[float, float, float]):
    a, b, c = coeffs

    def density(t: np.ndarray) -> np.ndarray:
        return a + b * t + c * t * t

    return density


def scale_slice(w: MotherWavelet, s: float, x0: float, density, n_nodes: int = 200) -> float:
    """Shift integral of psi_{s,t}(x0)^2 density(t) dt at a single scale."""
    lo, hi = (x0 - s, x0) if w.family == HAAR else (
        x0 - effective_radius(w) * s,
        x0 + effective_radius(w) * s,
    )
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    t = lo + 0.5 * (hi - lo) * (nodes + 1.0)
    wt = 0.5 * (hi - lo) * weights
    if w.family == HAAR:
        vals = np.full_like(t, 1.0 / s)  # psi^2 is 1/s on the support
    else:
        u = (x0 - t) / s
        from .wavelets import eval_mother

        vals = eval_mother(w, u[:, None]) ** 2 / s
    return float(wt @ (vals * density(t)))


def check_moment_cancellation(
    wavelet_families=(HAAR, MEXICAN_HAT),
    scales=(0.1, 0.05, 0.025),
    density_coeffs: tuple[float, float, float] = (0.5, 0.3, 0.2),
    x0: float = 0.3,
) -> CheckReport:
    """Higher vanishing moments must give a steeper small-scale decay.

    The single-scale kernel slice converges to density(x0) as s -> 0; the
    deviation decays at an order set by the first non-vanishing moment of
    psi^2 weighted against the density's Taylor terms.  The fitted orders
    for the one-moment and two-moment families must differ by >= 0.5.
    """
    density = _quadratic_density(density_coeffs)
    leading = density(np.array([x0]))[0]
    slopes = {}
    deviations = {}
    for family in wavelet_families:
        w = mother_wavelet(family, 1)
        devs = [abs(scale_slice(w, s, x0, density) - leading) for s in scales]
        slope = float(np.polyfit(np.log(scales), np.log(devs), 1)[0])
        slopes[family] = slope
        deviations[family] = [float(v) for v in devs]
    ordered = [slopes[f] for f in wavelet_families]
    separation = float(ordered[-1] - ordered[0])
    details = {
        "scales": list(scales),
        "density_coeffs": list(density_coeffs),
        "x0": x0,
        "slopes": slopes,
        "deviations": deviations,
    }
    return _report("moment_cancellation", separation, 0.5, "geq", details)


DEFAULT_CHECKS = (
    "unbiasedness",
    "variance_bound",
    "positive_definite",
    "convergence_rate",
    "stationarity_large_box",
    "stationarity_tight_box",
    "moment_cancellation",
)


def _default_probe_pairs(seed: int, n_pairs: int = 10, dim: int = 1):
    rng_pts = np.random.default_rng(seed + 17)
    return [
        (rng_pts.uniform(-1, 1, size=dim), rng_pts.uniform(-1, 1, size=dim))
        for _ in range(n_pairs)
    ]


def run_default_suite(seed: int = 42, only=None) -> list[CheckReport]:
    """The full verification suite on default desk-scale parameters."""
    w = mother_wavelet(MEXICAN_HAT, 1)
    dist = SamplingDistribution(0.2, 2.0, np.array([-3.0]), np.array([3.0]))
    pairs = _default_probe_pairs(seed)
    grid = np.linspace(-1.0, 1.0, 12)[:, None]

    reports: list[CheckReport] = []

    def wanted(name: str) -> bool:
        return only is None or name in only

    if wanted("unbiasedness"):
        reports.append(check_unbiasedness(w, dist, pairs, 64, 200, seed))
    if wanted("variance_bound"):
        reports.append(check_variance_bound(w, dist, pairs, 64, 200, seed))
    if wanted("positive_definite"):
        reports.append(check_positive_definite(w, dist, 20, 50, seed))
    if wanted("convergence_rate"):
        reports.append(empirical_uniform_error(w, dist, grid, (16, 32, 64, 128, 256), 50, seed))
    if wanted("stationarity_large_box") or wanted("stationarity_tight_box"):
        stationarity = check_stationarity(w)
        reports.extend(r for r in stationarity if wanted(r.name))
    if wanted("moment_cancellation"):
        reports.append(check_moment_cancellation())
    return reports


def run_negative_controls(seed: int = 42) -> list[CheckReport]:
    """Controls that must fail; a passing control means the suite lost power."""
    w = mother_wavelet(MEXICAN_HAT, 1)
    dist = SamplingDistribution(0.2, 2.0, np.array([-3.0]), np.array([3.0]))
    pairs = _default_probe_pairs(seed)
    biased = check_unbiasedness(w, dist, pairs, 64, 200, seed, biased=True)
    biased.name = "control_biased_sampler"
    corrupted = check_positive_definite(w, dist, 20, 10, seed, corrupt=True)
    corrupted.name = "control_corrupted_kernel"
    return [biased, corrupted]
