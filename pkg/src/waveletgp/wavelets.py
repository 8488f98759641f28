"""Mother wavelet families, scaled-translated atoms, and their bound constants.

A mother wavelet here is a zero-mean, unit-L2-norm function psi on R^d.
Atoms are generated by isotropic scaling and translation,

    psi_{s,t}(x) = s^{-d/2} psi((x - t) / s),

which preserves the L2 norm.  Three families are provided:

* ``mexican_hat``: the negative Laplacian of a Gaussian,
  psi(u) = C_d (d - |u|^2) exp(-|u|^2 / 2).  The (d - |u|^2) polynomial
  (rather than (1 - |u|^2)) is what keeps the mean exactly zero in every
  dimension; for d = 1 the two coincide.
* ``morlet``: a cosine wave under a Gaussian window with a constant
  correction that restores the zero mean,
  psi(u) = C (cos(w0.u) - exp(-|w0|^2/2)) exp(-|u|^2/2).
* ``haar``: the classical step wavelet on [0, 1), one-dimensional only,
  +1 on [0, 1/2) and -1 on [1/2, 1).

Every family is normalized so that the L2 norm is exactly 1; the
normalization constants are closed-form and cross-checked by quadrature in
the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

MEXICAN_HAT = "mexican_hat"
MORLET = "morlet"
HAAR = "haar"
FAMILIES = (MEXICAN_HAT, MORLET, HAAR)

# |psi| below this fraction of the sup norm counts as zero when truncating
# integration domains for the non-compact families.
EFFECTIVE_SUPPORT_TOL = 1e-8

DEFAULT_MORLET_FREQUENCY = 5.0


class UnsupportedFamilyError(ValueError):
    """Raised when an operation is undefined for the requested family."""


@dataclass(frozen=True)
class MotherWavelet:
    """A mother wavelet with its dimension and unit-norm scaling baked in."""

    family: str
    dim: int
    omega0: tuple[float, ...] | None  # Morlet center frequency, None otherwise
    norm: float  # multiplier giving unit L2 norm


@dataclass(frozen=True)
class TheoryConstants:
    """The constant package driving every concentration and localization bound.

    ``bound`` is the feature sup bound sup |psi_{s,t}| over s >= s_min,
    ``atom_lipschitz`` the atom Lipschitz constant at s >= s_min, and
    ``map_lipschitz`` the feature-map Lipschitz constant (bounded by the
    atom constant).  ``radius`` is the support radius for compact families
    and the effective radius otherwise; ``moments`` counts vanishing
    moments.
    """

    sup_norm: float  # M_psi = sup |psi|
    grad_sup_norm: float  # G_psi = sup |grad psi| (inf for haar)
    radius: float
    moments: int
    bound: float  # B = M_psi * s_min^(-d/2)
    atom_lipschitz: float  # L_psi = G_psi * s_min^(-d/2-1)
    map_lipschitz: float  # L_z <= L_psi


def mother_wavelet(family: str, dim: int = 1, omega0=None) -> MotherWavelet:
    """Construct a unit-L2-norm mother wavelet.

    Parameters
    ----------
    family : one of "mexican_hat", "morlet", "haar".
    dim : input dimension d (haar supports d = 1 only).
    omega0 : Morlet center frequency; scalar or length-d vector.  Defaults
        to 5 along the first coordinate axis.  Ignored for other families.
    """
    if family not in FAMILIES:
        raise UnsupportedFamilyError(
            f"unknown wavelet family {family!r}; expected one of {FAMILIES}"
        )
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")

    if family == HAAR:
        if dim != 1:
            raise UnsupportedFamilyError("haar wavelet is one-dimensional only")
        return MotherWavelet(HAAR, 1, None, 1.0)

    if family == MEXICAN_HAT:
        norm = 2.0 / math.sqrt(dim * (dim + 2) * math.pi ** (dim / 2.0))
        return MotherWavelet(MEXICAN_HAT, dim, None, norm)

    # Morlet
    if omega0 is None:
        w0 = np.zeros(dim)
        w0[0] = DEFAULT_MORLET_FREQUENCY
    else:
        w0 = np.atleast_1d(np.asarray(omega0, dtype=float))
        if w0.shape != (dim,):
            raise ValueError(f"omega0 must have shape ({dim},), got {w0.shape}")
    w2 = float(w0 @ w0)
    if w2 <= 0.0:
        raise ValueError("morlet center frequency must be nonzero")
    # integral of psi^2 / C^2 = pi^(d/2) (1/2 + 3/2 e^{-w2} - 2 e^{-3 w2/4})
    bracket = 0.5 + 1.5 * math.exp(-w2) - 2.0 * math.exp(-0.75 * w2)
    norm = 1.0 / math.sqrt(math.pi ** (dim / 2.0) * bracket)
    return MotherWavelet(MORLET, dim, tuple(float(v) for v in w0), norm)


def _as_points(u, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    if u.shape[-1] != dim:
        raise ValueError(f"points must have last axis {dim}, got shape {u.shape}")
    return u


def eval_mother(w: MotherWavelet, u) -> np.ndarray | float:
    """Evaluate psi(u); ``u`` has shape (..., d), the result shape (...)."""
    u = _as_points(u, w.dim)
    r2 = np.sum(u * u, axis=-1)
    if w.family == MEXICAN_HAT:
        out = w.norm * (w.dim - r2) * np.exp(-0.5 * r2)
    elif w.family == MORLET:
        w0 = np.asarray(w.omega0)
        kappa = math.exp(-0.5 * float(w0 @ w0))
        out = w.norm * np.exp(-0.5 * r2) * (np.cos(u @ w0) - kappa)
    else:  # haar, d = 1
        x = u[..., 0]
        out = np.where(
            (x >= 0.0) & (x < 0.5),
            w.norm,
            np.where((x >= 0.5) & (x < 1.0), -w.norm, 0.0),
        )
    return out if out.ndim else float(out)


def eval_atom(w: MotherWavelet, s: float, t, x) -> np.ndarray | float:
    """Evaluate the atom s^{-d/2} psi((x - t)/s) at points x of shape (..., d)."""
    if s <= 0.0:
        raise ValueError(f"scale must be positive, got {s}")
    t = _as_points(t, w.dim)
    x = _as_points(x, w.dim)
    return s ** (-w.dim / 2.0) * eval_mother(w, (x - t) / s)


def mother_gradient(w: MotherWavelet, u) -> np.ndarray:
    """Gradient of psi at points u of shape (..., d); result shape (..., d)."""
    if w.family == HAAR:
        raise UnsupportedFamilyError("haar wavelet is not differentiable")
    u = _as_points(u, w.dim)
    r2 = np.sum(u * u, axis=-1, keepdims=True)
    if w.family == MEXICAN_HAT:
        return -w.norm * u * (2.0 + w.dim - r2) * np.exp(-0.5 * r2)
    w0 = np.asarray(w.omega0)
    kappa = math.exp(-0.5 * float(w0 @ w0))
    phase = (u @ w0)[..., None]
    return (
        w.norm
        * np.exp(-0.5 * r2)
        * (-u * (np.cos(phase) - kappa) - np.sin(phase) * w0)
    )


def atom_gradient(w: MotherWavelet, s: float, t, x) -> np.ndarray:
    """Gradient of eval_atom with respect to x: s^{-d/2-1} grad psi((x-t)/s)."""
    if s <= 0.0:
        raise ValueError(f"scale must be positive, got {s}")
    t = _as_points(t, w.dim)
    x = _as_points(x, w.dim)
    return s ** (-w.dim / 2.0 - 1.0) * mother_gradient(w, (x - t) / s)


def sup_norm(w: MotherWavelet) -> float:
    """M_psi: the sup norm of the mother wavelet."""
    if w.family == HAAR:
        return w.norm
    if w.family == MEXICAN_HAT:
        # radial profile C |d - r^2| e^{-r^2/2} peaks at the origin
        # (d >= 2 e^{-(d+2)/2} for every d >= 1).
        return w.norm * w.dim
    return _morlet_profile_max(w)[0]


def grad_sup_norm(w: MotherWavelet) -> float:
    """G_psi: the sup norm of the gradient (infinite for haar)."""
    if w.family == HAAR:
        return math.inf
    if w.family == MEXICAN_HAT:
        # |grad psi| = C r |2 + d - r^2| e^{-r^2/2}; its critical radii solve
        # r^4 - (d+5) r^2 + (d+2) = 0.
        d = w.dim
        disc = math.sqrt((d + 5.0) ** 2 - 4.0 * (d + 2.0))
        best = 0.0
        for r2 in ((d + 5.0 - disc) / 2.0, (d + 5.0 + disc) / 2.0):
            r = math.sqrt(r2)
            best = max(best, r * abs(2.0 + d - r2) * math.exp(-0.5 * r2))
        return w.norm * best
    return _morlet_profile_max(w)[1]


def _morlet_profile_max(w: MotherWavelet, step: float = 1e-3) -> tuple[float, float]:
    """Dense-grid maxima (M_psi, G_psi) for the Morlet family.

    The Gaussian factor is rotation invariant, so with w0 aligned to the
    first axis psi factorizes as C exp(-rho^2/2) g(x1) with
    g(x1) = exp(-x1^2/2) (cos(|w0| x1) - kappa) and rho the transverse
    radius.  |psi| peaks at rho = 0, and for each x1 the transverse maximum
    of |grad psi|^2 = C^2 e^{-rho^2}(g'(x1)^2 + rho^2 g(x1)^2) has the
    closed form max(a, b e^{a/b - 1}) with a = g'^2, b = g^2.
    """
    w0 = np.asarray(w.omega0)
    omega = math.sqrt(float(w0 @ w0))
    kappa = math.exp(-0.5 * omega * omega)
    # envelope e^{-x^2/2}(1 + kappa) bounds |g|; solve for the radius where
    # it falls below the support tolerance relative to g(0) <= 1.
    r_max = math.sqrt(2.0 * math.log((1.0 + kappa) / EFFECTIVE_SUPPORT_TOL)) + 1.0
    x = np.arange(0.0, r_max, step)  # g is even: the positive axis suffices
    expf = np.exp(-0.5 * x * x)
    c = np.cos(omega * x)
    sn = np.sin(omega * x)
    g = expf * (c - kappa)
    gp = expf * (-x * (c - kappa) - omega * sn)
    m_psi = w.norm * float(np.max(np.abs(g)))
    a = gp * gp
    if w.dim == 1:
        g_psi = w.norm * math.sqrt(float(np.max(a)))
    else:
        b = g * g
        transverse = a.copy()
        off_axis = b > a  # a/b < 1 there, so the exponent stays bounded
        transverse[off_axis] = b[off_axis] * np.exp(a[off_axis] / b[off_axis] - 1.0)
        g_psi = w.norm * math.sqrt(float(np.max(transverse)))
    return m_psi, g_psi


def effective_radius(w: MotherWavelet) -> float:
    """Radius beyond which |psi| stays below EFFECTIVE_SUPPORT_TOL * sup|psi|.

    Exact (0.5, by the center-of-support convention) for haar; for the
    decaying families it is solved on the tail of the radial envelope.
    """
    if w.family == HAAR:
        return 0.5
    m = sup_norm(w)
    threshold = EFFECTIVE_SUPPORT_TOL * m
    if w.family == MORLET:
        w0 = np.asarray(w.omega0)
        kappa = math.exp(-0.5 * float(w0 @ w0))
        return math.sqrt(2.0 * math.log(w.norm * (1.0 + kappa) / threshold))
    # mexican hat: envelope C (r^2 - d) e^{-r^2/2} decreases beyond
    # r = sqrt(d + 2); bisect on the tail.
    def env(r: float) -> float:
        return w.norm * (r * r - w.dim) * math.exp(-0.5 * r * r)

    lo = math.sqrt(w.dim + 2.0)
    hi = 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if env(mid) > threshold:
            lo = mid
        else:
            hi = mid
    return hi


def vanishing_moments(w: MotherWavelet) -> int:
    """Number of vanishing moments M: integral of u^k psi vanishes for k < M."""
    if w.family == HAAR:
        return 1
    # both smooth families are even, killing k = 1; their second moment is
    # nonzero (tiny but nonzero for morlet).
    return 2


def constants(w: MotherWavelet, s_min: float) -> TheoryConstants:
    """Assemble the bound package for scales s >= s_min."""
    if s_min <= 0.0:
        raise ValueError(f"s_min must be positive, got {s_min}")
    m_psi = sup_norm(w)
    g_psi = grad_sup_norm(w)
    d = w.dim
    bound = m_psi * s_min ** (-d / 2.0)
    lips = g_psi * s_min ** (-d / 2.0 - 1.0)
    return TheoryConstants(
        sup_norm=m_psi,
        grad_sup_norm=g_psi,
        radius=effective_radius(w),
        moments=vanishing_moments(w),
        bound=bound,
        atom_lipschitz=lips,
        map_lipschitz=lips,
    )


def moment_integral(w: MotherWavelet, k: int) -> float:
    """Numerically integrate u^k psi(u) du over the truncation domain (d = 1)."""
    if w.dim != 1:
        raise ValueError("moment checks run in one dimension")
    if k < 0:
        raise ValueError(f"moment order must be non-negative, got {k}")
    if w.family == HAAR:
        val, _ = quad(lambda x: x**k * eval_mother(w, np.array([x])), 0.0, 1.0,
                      points=[0.5], limit=200)
        return val
    r = effective_radius(w)
    val, _ = quad(lambda x: x**k * eval_mother(w, np.array([x])), -r, r, limit=400)
    return val


def shift_interval(w: MotherWavelet, s: float, point: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis interval of shifts t for which psi_{s,t}(point) is nonzero.

    Used to truncate shift integrals.  For the centered families this is
    point +- effective_radius * s on each axis; the haar atom lives on
    [t, t + s), so its shift interval is (point - s, point].
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if w.family == HAAR:
        return point - s, point
    r = effective_radius(w) * s
    return point - r, point + r
