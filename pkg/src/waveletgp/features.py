"""Random feature maps: sampled wavelet atoms and the Fourier baseline.

A wavelet feature map holds D atoms with scales drawn log-uniformly from
[s_min, s_max] and shifts drawn uniformly from a box.  The base uniforms
behind each draw are counter-based (see :mod:`waveletgp.rng`) and kept on
the map, so re-transforming them under different distribution parameters
is smooth -- the common-random-numbers trick the hyperparameter search
relies on.

The Fourier map is the classical single-cosine construction for the
squared-exponential kernel: frequencies N(0, 1/lengthscale^2 I) via
Box-Muller, phases uniform on [0, 2 pi).

Both maps produce N x D feature matrices whose rows are z(x)^T with the
1/sqrt(D) (wavelet) or sqrt(2/D) (Fourier) scaling, so that
z(x) . z(y) estimates the corresponding kernel.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .wavelets import (
    HAAR,
    MEXICAN_HAT,
    MORLET,
    MotherWavelet,
    effective_radius,
    mother_wavelet,
)

SERIALIZATION_VERSION = 1


@dataclass(frozen=True)
class SamplingDistribution:
    """Factorized atom-parameter density: log-uniform scales x uniform shifts."""

    s_min: float
    s_max: float
    shift_lower: np.ndarray  # (d,)
    shift_upper: np.ndarray  # (d,)

    def __post_init__(self):
        if self.s_min <= 0.0:
            raise ValueError(f"s_min must be positive, got {self.s_min}")
        if self.s_max <= self.s_min:
            raise ValueError(f"need s_min < s_max, got [{self.s_min}, {self.s_max}]")
        lower = np.atleast_1d(np.asarray(self.shift_lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.shift_upper, dtype=float))
        if lower.shape != upper.shape:
            raise ValueError("shift box bounds must have matching shapes")
        if not np.all(lower < upper):
            raise ValueError("shift box must have lower < upper componentwise")
        object.__setattr__(self, "shift_lower", lower)
        object.__setattr__(self, "shift_upper", upper)

    @property
    def dim(self) -> int:
        return self.shift_lower.shape[0]

    @property
    def shift_volume(self) -> float:
        return float(np.prod(self.shift_upper - self.shift_lower))


def shift_box_for(X: np.ndarray, wavelet: MotherWavelet, s_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Default shift box: the data bounding box padded by s_max * radius.

    Atoms centered anywhere inside this box can still reach data at the
    boundary; outside it they are identically (or effectively) zero on the
    data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    pad = s_max * effective_radius(wavelet)
    return X.min(axis=0) - pad, X.max(axis=0) + pad


@dataclass(frozen=True)
class WaveletFeatureMap:
    wavelet: MotherWavelet
    dist: SamplingDistribution
    scales: np.ndarray  # (D,)
    shifts: np.ndarray  # (D, d)
    base_u: np.ndarray  # (D,)   uniform variates behind the scales
    base_v: np.ndarray  # (D, d) uniform variates behind the shifts
    seed: int

    @property
    def kind(self) -> str:
        return "rwf"

    @property
    def num_features(self) -> int:
        return self.scales.shape[0]

    @property
    def dim(self) -> int:
        return self.wavelet.dim


@dataclass(frozen=True)
class FourierFeatureMap:
    freqs: np.ndarray  # (D, d)
    phases: np.ndarray  # (D,)
    lengthscale: float
    seed: int

    @property
    def kind(self) -> str:
        return "rff"

    @property
    def num_features(self) -> int:
        return self.freqs.shape[0]

    @property
    def dim(self) -> int:
        return self.freqs.shape[1]


FeatureMap = WaveletFeatureMap | FourierFeatureMap


def base_draws(dim: int, num_features: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Base uniforms (u, v) for a wavelet map: u (D,) scales, v (D, d) shifts."""
    block = rng.uniform_block(seed, rng.STREAM_WAVELET, num_features, 1 + dim)
    return block[:, 0], block[:, 1:]


def transform_draws(
    dist: SamplingDistribution, base_u: np.ndarray, base_v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Map base uniforms through the distribution: log-uniform s, uniform t."""
    log_lo, log_hi = math.log(dist.s_min), math.log(dist.s_max)
    scales = np.exp(log_lo + base_u * (log_hi - log_lo))
    shifts = dist.shift_lower + base_v * (dist.shift_upper - dist.shift_lower)
    return scales, shifts


def wavelet_map_from_draws(
    wavelet: MotherWavelet,
    dist: SamplingDistribution,
    base_u: np.ndarray,
    base_v: np.ndarray,
    seed: int,
) -> WaveletFeatureMap:
    scales, shifts = transform_draws(dist, base_u, base_v)
    return WaveletFeatureMap(wavelet, dist, scales, shifts, base_u, base_v, seed)


def sample_rwf(
    wavelet: MotherWavelet, dist: SamplingDistribution, num_features: int, seed: int
) -> WaveletFeatureMap:
    """Draw D atom parameters (s_i, t_i) i.i.d. from the distribution."""
    if num_features < 1:
        raise ValueError(f"need at least one feature, got {num_features}")
    if dist.dim != wavelet.dim:
        raise ValueError(
            f"distribution dimension {dist.dim} != wavelet dimension {wavelet.dim}"
        )
    u, v = base_draws(wavelet.dim, num_features, seed)
    return wavelet_map_from_draws(wavelet, dist, u, v, seed)


def sample_rff(lengthscale: float, dim: int, num_features: int, seed: int) -> FourierFeatureMap:
    """Draw D Fourier features for the squared-exponential kernel."""
    if lengthscale <= 0.0:
        raise ValueError(f"lengthscale must be positive, got {lengthscale}")
    if num_features < 1:
        raise ValueError(f"need at least one feature, got {num_features}")
    normals = fourier_base_normals(dim, num_features, seed)
    phases = fourier_base_phases(num_features, seed)
    return FourierFeatureMap(normals / lengthscale, phases, lengthscale, seed)


def fourier_base_normals(dim: int, num_features: int, seed: int) -> np.ndarray:
    """Standard-normal frequency draws before the 1/lengthscale scaling."""
    return rng.standard_normal_block(seed, rng.STREAM_FOURIER, num_features, dim)


def fourier_base_phases(num_features: int, seed: int) -> np.ndarray:
    block = rng.uniform_block(seed + 1, rng.STREAM_FOURIER, num_features, 1)
    return 2.0 * np.pi * block[:, 0]


def _wavelet_rows(fmap: WaveletFeatureMap, X: np.ndarray) -> np.ndarray:
    """Feature rows for a block of inputs; elementwise per (row, atom) entry."""
    w = fmap.wavelet
    d = w.dim
    s = fmap.scales[None, :]  # (1, D)
    if w.family == HAAR:
        a = (X[:, 0][:, None] - fmap.shifts[:, 0][None, :]) / s
        vals = np.where(
            (a >= 0.0) & (a < 0.5),
            w.norm,
            np.where((a >= 0.5) & (a < 1.0), -w.norm, 0.0),
        )
    else:
        r2 = np.zeros((X.shape[0], fmap.num_features))
        for j in range(d):
            diff = (X[:, j][:, None] - fmap.shifts[:, j][None, :]) / s
            r2 += diff * diff
        if w.family == MEXICAN_HAT:
            vals = w.norm * (d - r2) * np.exp(-0.5 * r2)
        else:
            w0 = np.asarray(w.omega0)
            kappa = math.exp(-0.5 * float(w0 @ w0))
            phase = np.zeros((X.shape[0], fmap.num_features))
            for j in range(d):
                phase += (X[:, j][:, None] - fmap.shifts[:, j][None, :]) / s * w0[j]
            vals = w.norm * np.exp(-0.5 * r2) * (np.cos(phase) - kappa)
    scale = s ** (-d / 2.0) / math.sqrt(fmap.num_features)
    return vals * scale


def _fourier_rows(fmap: FourierFeatureMap, X: np.ndarray) -> np.ndarray:
    proj = np.zeros((X.shape[0], fmap.num_features))
    for j in range(fmap.dim):
        proj += X[:, j][:, None] * fmap.freqs[:, j][None, :]
    return math.sqrt(2.0 / fmap.num_features) * np.cos(proj + fmap.phases[None, :])


def featurize(fmap: FeatureMap, X: np.ndarray, n_workers: int = 1) -> np.ndarray:
    """Feature matrix Z with rows z(x_n)^T.

    Each entry depends on exactly one input row and one feature, so the
    result is bit-identical however the rows are partitioned; ``n_workers``
    > 1 splits the rows across a thread pool.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fmap.dim:
        raise ValueError(f"inputs have dimension {X.shape[1]}, map expects {fmap.dim}")
    rows = _wavelet_rows if fmap.kind == "rwf" else _fourier_rows
    if n_workers <= 1 or X.shape[0] < 2 * n_workers:
        return rows(fmap, X)
    blocks = np.array_split(np.arange(X.shape[0]), n_workers)
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        parts = list(pool.map(lambda idx: rows(fmap, X[idx]), blocks))
    return np.vstack(parts)


def approx_kernel(fmap: FeatureMap, x, y) -> float:
    """Monte Carlo kernel estimate z(x) . z(y); exactly symmetric in (x, y)."""
    zx = featurize(fmap, np.atleast_2d(np.asarray(x, dtype=float)))[0]
    zy = featurize(fmap, np.atleast_2d(np.asarray(y, dtype=float)))[0]
    return float(zx @ zy)


def feature_map_to_doc(fmap: FeatureMap) -> dict:
    """Versioned JSON document; base draws are regenerated from the seed."""
    if fmap.kind == "rwf":
        w = fmap.wavelet
        return {
            "version": SERIALIZATION_VERSION,
            "kind": "rwf",
            "seed": int(fmap.seed),
            "num_features": int(fmap.num_features),
            "family": w.family,
            "dim": int(w.dim),
            "omega0": None if w.omega0 is None else [float(v) for v in w.omega0],
            "s_min": float(fmap.dist.s_min),
            "s_max": float(fmap.dist.s_max),
            "shift_lower": [float(v) for v in fmap.dist.shift_lower],
            "shift_upper": [float(v) for v in fmap.dist.shift_upper],
        }
    return {
        "version": SERIALIZATION_VERSION,
        "kind": "rff",
        "seed": int(fmap.seed),
        "num_features": int(fmap.num_features),
        "dim": int(fmap.dim),
        "lengthscale": float(fmap.lengthscale),
    }


def feature_map_from_doc(doc: dict) -> FeatureMap:
    if doc.get("version") != SERIALIZATION_VERSION:
        raise ValueError(f"unsupported feature map version {doc.get('version')!r}")
    if doc["kind"] == "rwf":
        w = mother_wavelet(doc["family"], doc["dim"], doc.get("omega0"))
        dist = SamplingDistribution(
            doc["s_min"],
            doc["s_max"],
            np.asarray(doc["shift_lower"], dtype=float),
            np.asarray(doc["shift_upper"], dtype=float),
        )
        return sample_rwf(w, dist, doc["num_features"], doc["seed"])
    if doc["kind"] == "rff":
        return sample_rff(doc["lengthscale"], doc["dim"], doc["num_features"], doc["seed"])
    raise ValueError(f"unknown feature map kind {doc['kind']!r}")
