"""Per-path random streams.

Every path draws from its own Philox generator keyed by ``(seed, path_index)``,
so a path's normals never depend on which other paths were simulated or in
what order.  ``stream`` selects a disjoint region of the counter space for
auxiliary draws on the same path (e.g. Brownian-bridge refinement).
"""
from __future__ import annotations

import numpy as np

_U64 = 2 ** 64


def path_generator(seed: int, path_index: int, stream: int = 0) -> np.random.Generator:
    if not (0 <= seed < _U64 and 0 <= path_index < _U64 and 0 <= stream < _U64):
        raise ValueError("seed, path_index and stream must fit in 64 bits")
    bitgen = np.random.Philox(key=[seed, path_index], counter=[0, 0, 0, stream])
    return np.random.Generator(bitgen)


def standard_normals(seed: int, path_indices, n: int, stream: int = 0) -> np.ndarray:
    """First ``n`` standard normals of each listed path, shape ``(len(path_indices), n)``."""
    idx = np.asarray(path_indices, dtype=np.int64)
    out = np.empty((idx.size, n))
    for row, i in enumerate(idx):
        out[row] = path_generator(seed, int(i), stream).standard_normal(n)
    return out


def brownian_increments(seed: int, path_indices, n_steps: int, dt: float) -> np.ndarray:
    """Brownian increments ``Normal(0, dt)`` for each listed path."""
    return np.sqrt(dt) * standard_normals(seed, path_indices, n_steps)
