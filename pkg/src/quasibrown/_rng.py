"""Counter-based random streams.

Every stream is a Philox4x64-10 generator keyed by the pair
``(seed, stream_id)``.  Monte Carlo ensembles use ``stream_id = path index``
so that path ``i`` draws the same numbers no matter how the ensemble is
partitioned or scheduled.  Sub-experiments that share a root seed are kept
apart by a purpose tag stored in the top 16 bits of ``stream_id``.

Normal variates come from the Marsaglia polar method applied to the
stream's uniform doubles.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_PURPOSE_SHIFT = 48

# purpose tags
PURPOSE_COEFFICIENTS = 0
PURPOSE_OU_EXACT = 1
PURPOSE_GIBBS = 2
PURPOSE_SYSTEMS = 3
PURPOSE_LANCZOS = 4


def stream_key(seed: int, stream: int = 0, purpose: int = 0) -> np.ndarray:
    if seed < 0 or stream < 0 or purpose < 0:
        raise ValueError("seed, stream and purpose must be non-negative")
    if stream >= 1 << _PURPOSE_SHIFT or purpose >= 1 << 16:
        raise ValueError("stream id out of range")
    word = (int(purpose) << _PURPOSE_SHIFT) | int(stream)
    return np.array([int(seed) & _MASK64, word], dtype=np.uint64)


def make_stream(seed: int, stream: int = 0, purpose: int = 0) -> np.random.Generator:
    """Generator for stream ``stream`` of root ``seed``."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, stream, purpose)))


def polar_normal(gen: np.random.Generator, size: int) -> np.ndarray:
    """``size`` standard normals by the Marsaglia polar method."""
    size = int(size)
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        # acceptance rate pi/4, two variates per accepted pair
        n_pairs = int(need * 0.65) + 16
        uv = 2.0 * gen.random((n_pairs, 2)) - 1.0
        s = uv[:, 0] ** 2 + uv[:, 1] ** 2
        ok = (s > 0.0) & (s < 1.0)
        uv, s = uv[ok], s[ok]
        factor = np.sqrt(-2.0 * np.log(s) / s)
        z = (uv * factor[:, None]).ravel()
        take = min(need, z.size)
        out[filled:filled + take] = z[:take]
        filled += take
    return out


def normal_matrix(seed: int, n_rows: int, n_cols: int, purpose: int = 0,
                  first_stream: int = 0) -> np.ndarray:
    """Row ``i`` holds ``n_cols`` normals from stream ``first_stream + i``."""
    out = np.empty((n_rows, n_cols))
    for i in range(n_rows):
        out[i] = polar_normal(make_stream(seed, first_stream + i, purpose), n_cols)
    return out
