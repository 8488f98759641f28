"""Ground-truth kernels: the wavelet kernel by quadrature, and closed forms.

The wavelet kernel is the scale-and-shift integral

    k(x, y) = int int psi_{s,t}(x) psi_{s,t}(y) p_s(s) p_t(t) dt ds

with log-uniform p_s on [s_min, s_max] and uniform p_t on the shift box.
Substituting u = log s turns the log-uniform density into a constant and
removes the 1/s singularity, after which tensor Gauss-Legendre applies.
The shift integral is truncated to the union of the two atoms' effective
supports intersected with the shift box; for the compactly supported haar
family the shift integral is assembled exactly from the piecewise-constant
pieces and the scale axis is split into panels at the scales where the
piece structure changes.

This oracle exists to validate theory at desk scale (d <= 2), not to serve
predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigvalsh

from .features import SamplingDistribution
from .wavelets import HAAR, MotherWavelet, effective_radius, eval_mother


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts for the scale axis and each shift axis."""

    n_scale: int = 48
    n_shift: int = 64

    def __post_init__(self):
        if self.n_scale < 8 or self.n_shift < 8:
            raise ValueError("quadrature node counts must be at least 8")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(2 * self.n_scale, 2 * self.n_shift)


DEFAULT_SPEC = QuadratureSpec()


@lru_cache(maxsize=64)
def _gl_reference(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _gl_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    ref_x, ref_w = _gl_reference(n)
    half = 0.5 * (b - a)
    return a + half * (ref_x + 1.0), half * ref_w


def _haar_shift_integral(s: float, x: float, y: float, lo: float, hi: float) -> float:
    """Exact integral over t in [lo, hi] of psi_{s,t}(x) psi_{s,t}(y), d = 1."""
    cuts = {lo, hi}
    for p in (x, y):
        for off in (0.0, 0.5 * s, s):
            c = p - off
            if lo < c < hi:
                cuts.add(c)
    grid = sorted(cuts)

    def sign(point: float, t: float) -> float:
        a = (point - t) / s
        if 0.0 <= a < 0.5:
            return 1.0
        if 0.5 <= a < 1.0:
            return -1.0
        return 0.0

    total = 0.0
    for left, right in zip(grid[:-1], grid[1:]):
        mid = 0.5 * (left + right)
        total += (right - left) * sign(x, mid) * sign(y, mid)
    return total / s


def _haar_scale_panels(dist: SamplingDistribution, x: float, y: float) -> list[tuple[float, float]]:
    """Split [s_min, s_max] where the piecewise structure of the t-integral changes."""
    lo, hi = float(dist.shift_lower[0]), float(dist.shift_upper[0])
    candidates = {abs(x - y), 2.0 * abs(x - y)}
    for p in (x, y):
        for edge in (lo, hi):
            candidates.update({p - edge, 2.0 * (p - edge)})
    cuts = sorted(c for c in candidates if dist.s_min < c < dist.s_max)
    edges = [dist.s_min, *cuts, dist.s_max]
    return list(zip(edges[:-1], edges[1:]))


def wavelet_kernel(
    w: MotherWavelet,
    dist: SamplingDistribution,
    x,
    y,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Deterministic quadrature value of the wavelet kernel at (x, y)."""
    if w.dim > 2:
        raise ValueError("the quadrature oracle supports d <= 2 only")
    if dist.dim != w.dim:
        raise ValueError(f"distribution dimension {dist.dim} != wavelet dimension {w.dim}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (w.dim,) or y.shape != (w.dim,):
        raise ValueError(f"points must have shape ({w.dim},)")

    log_range = math.log(dist.s_max / dist.s_min)
    density = 1.0 / (log_range * dist.shift_volume)

    if w.family == HAAR:
        total = 0.0
        px, py = float(x[0]), float(y[0])
        lo, hi = float(dist.shift_lower[0]), float(dist.shift_upper[0])
        for s_a, s_b in _haar_scale_panels(dist, px, py):
            u_nodes, u_weights = _gl_nodes(math.log(s_a), math.log(s_b), spec.n_scale)
            for u, wu in zip(u_nodes, u_weights):
                total += wu * _haar_shift_integral(math.exp(u), px, py, lo, hi)
        return total * density

    radius = effective_radius(w)
    lower = np.minimum(x, y)
    upper = np.maximum(x, y)
    u_nodes, u_weights = _gl_nodes(math.log(dist.s_min), math.log(dist.s_max), spec.n_scale)
    s = np.exp(u_nodes)  # (ns,)
    # per-scale truncated shift box, one interval per axis
    t_lo = np.maximum(lower[None, :] - radius * s[:, None], dist.shift_lower)  # (ns, d)
    t_hi = np.minimum(upper[None, :] + radius * s[:, None], dist.shift_upper)
    valid = np.all(t_hi > t_lo, axis=1)
    if not np.any(valid):
        return 0.0
    ref_x, ref_w = _gl_reference(spec.n_shift)
    half = 0.5 * (t_hi - t_lo)  # (ns, d)
    # nodes[a]: (ns, nt) shift nodes along axis a; weights likewise
    nodes = [t_lo[:, a, None] + half[:, a, None] * (ref_x + 1.0) for a in range(w.dim)]
    weights = [half[:, a, None] * ref_w for a in range(w.dim)]
    if w.dim == 1:
        t = nodes[0][..., None]  # (ns, nt, 1)
        wt = weights[0]
    else:
        t = np.stack(
            [
                np.broadcast_to(nodes[0][:, :, None], nodes[0].shape + (spec.n_shift,)),
                np.broadcast_to(nodes[1][:, None, :], nodes[1].shape[:1] + (spec.n_shift, spec.n_shift)),
            ],
            axis=-1,
        )  # (ns, nt, nt, 2)
        wt = weights[0][:, :, None] * weights[1][:, None, :]
    s_bc = s.reshape((-1,) + (1,) * (t.ndim - 2) + (1,))
    vals = eval_mother(w, (x - t) / s_bc) * eval_mother(w, (y - t) / s_bc)
    shift_int = np.sum(wt * vals, axis=tuple(range(1, t.ndim - 1)))
    shift_int[~valid] = 0.0
    return float((u_weights * s ** (-w.dim)) @ shift_int) * density


def quadrature_convergence(
    w: MotherWavelet,
    dist: SamplingDistribution,
    pairs: list[tuple[np.ndarray, np.ndarray]],
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """Max relative change when both node counts double, over a probe set."""
    worst = 0.0
    for x, y in pairs:
        coarse = wavelet_kernel(w, dist, x, y, spec)
        fine = wavelet_kernel(w, dist, x, y, spec.doubled())
        worst = max(worst, abs(coarse - fine) / max(abs(fine), 1e-12))
    return worst


def rbf_kernel(lengthscale: float, variance: float, x, y) -> float:
    """Squared-exponential kernel value sigma^2 exp(-|x-y|^2 / (2 l^2))."""
    if lengthscale <= 0.0:
        raise ValueError(f"lengthscale must be positive, got {lengthscale}")
    if variance <= 0.0:
        raise ValueError(f"variance must be positive, got {variance}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d2 = float(np.sum((x - y) ** 2))
    return variance * math.exp(-0.5 * d2 / lengthscale**2)


def gram(kernel, X: np.ndarray) -> np.ndarray:
    """Pairwise kernel matrix, symmetric by filling the upper triangle."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    G = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            G[i, j] = kernel(X[i], X[j])
            G[j, i] = G[i, j]
    return G


def min_eigenvalue(G: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {G.shape}")
    asym = float(np.max(np.abs(G - G.T)))
    if asym > 1e-9:
        raise ValueError(f"matrix is not symmetric (asymmetry {asym:.2e})")
    return float(eigvalsh(G, subset_by_index=[0, 0])[0])
