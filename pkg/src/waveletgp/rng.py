"""Counter-based uniform variates for reproducible feature sampling.

All randomness in the library flows through Philox, a counter-based
generator.  A block of base uniforms is keyed by ``(seed, stream)`` and
filled row-major, so row ``i`` of a block depends only on the seed, the
stream tag, the row index, and the row width -- never on how many rows
were requested or in what order they are consumed.  That is what makes
frozen base draws (common random numbers) and order-independent parallel
sampling reproducible.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep draws for unrelated purposes statistically independent
# even under identical seeds.
STREAM_WAVELET = 1
STREAM_FOURIER = 2
STREAM_DATA = 3
STREAM_NOISE = 4
STREAM_OPT = 5


def _generator(seed: int, stream: int) -> np.random.Generator:
    key = np.array([np.uint64(seed % (1 << 64)), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_block(seed: int, stream: int, rows: int, cols: int) -> np.ndarray:
    """Return a ``rows x cols`` block of uniforms on [0, 1).

    Row ``i`` is a pure function of ``(seed, stream, i, cols)``: requesting
    more rows later extends the block without changing earlier rows.
    """
    if rows < 0 or cols <= 0:
        raise ValueError(f"invalid block shape ({rows}, {cols})")
    return _generator(seed, stream).random((rows, cols), dtype=np.float64)


def box_muller(u1: np.ndarray, u2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Transform uniform pairs on [0,1) into independent standard normals."""
    # 1 - u1 lies in (0, 1], keeping the log finite.
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    return radius * np.cos(angle), radius * np.sin(angle)


def standard_normal_block(seed: int, stream: int, rows: int, cols: int) -> np.ndarray:
    """Return a ``rows x cols`` block of standard normals.

    Built by Box-Muller on counter-based uniforms; row ``i`` depends only on
    ``(seed, stream, i, cols)``.
    """
    pairs = (cols + 1) // 2
    u = uniform_block(seed, stream, rows, 2 * pairs)
    z1, z2 = box_muller(u[:, :pairs], u[:, pairs:])
    out = np.empty((rows, 2 * pairs))
    out[:, 0::2] = z1
    out[:, 1::2] = z2
    return out[:, :cols]
