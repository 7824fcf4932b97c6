"""Counter-based random streams for reproducible parallel Monte Carlo.

Each sample owns a disjoint counter segment of a Philox bit stream keyed by
(master seed, role).  Sample i reads from counter block i * blocks(n), so the
numbers attached to a sample never depend on chunking or worker count.
Normals come from the inverse CDF applied to 53-bit uniforms: exactly one
raw word per normal, which keeps counter arithmetic exact.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = ["Role", "normal_block", "PathStream"]

_MASK64 = (1 << 64) - 1
_U53 = 2.0**-53


class Role:
    """Stream namespaces so distinct uses of one master seed never collide."""

    WEIGHTED = 1
    DIRECT = 2
    STATIONARY = 3
    LONG_RUN = 4
    COVARIANCE = 5
    SOBOLEV = 6
    ISOMETRY = 7
    SWEEP = 8
    DENSITY = 9
    GENERIC = 10
    MU_SAMPLES = 11


def _key(seed: int, role: int, n_per_sample: int) -> np.ndarray:
    # fold the per-sample width into the key so that runs with different
    # layouts draw unrelated streams even at equal (seed, role, index)
    k1 = ((role & 0xFFFFFFFF) << 32) | (n_per_sample & 0xFFFFFFFF)
    return np.array([seed & _MASK64, k1 & _MASK64], dtype=np.uint64)


def normal_block(
    seed: int, role: int, n_per_sample: int, start: int, count: int
) -> np.ndarray:
    """Standard normals for samples [start, start+count), shape (count, n).

    Bit-identical regardless of how the index range is split across calls.
    """
    if n_per_sample <= 0 or count < 0 or start < 0:
        raise ValueError("need n_per_sample > 0, start >= 0, count >= 0")
    if count == 0:
        return np.empty((0, n_per_sample))
    blocks = (n_per_sample + 3) // 4
    bg = np.random.Philox(key=_key(seed, role, n_per_sample), counter=start * blocks)
    raw = bg.random_raw(count * blocks * 4)
    raw = raw.reshape(count, blocks * 4)[:, :n_per_sample]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return ndtri(u)


class PathStream:
    """Random source handle for single-sample operations.

    Wraps one sample's counter segment; ``normals(n)`` always returns the
    same numbers for the same (seed, role, index, n).
    """

    def __init__(self, seed: int, index: int = 0, role: int = Role.GENERIC):
        self.seed = int(seed)
        self.index = int(index)
        self.role = int(role)

    def normals(self, n: int) -> np.ndarray:
        return normal_block(self.seed, self.role, n, self.index, 1)[0]
