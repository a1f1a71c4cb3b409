"""
Seeded Wiener paths on uniform grids with exact dyadic (Brownian-bridge)
refinement.

Random numbers come from a counter-based stream: the Philox4x64 bit
generator keyed on (seed, level) and read from counter 0. The normal draw
for grid cell j of process k is a pure function of (seed, level, j*m + k):

    raw  = 64-bit word number j*m + k of the Philox(key=seed + level * 2**64) stream
    u    = ((raw >> 11) + 0.5) * 2**-53          # in the open interval (0, 1)
    xi   = ndtri(u)                               # inverse standard-normal CDF

so regenerating, refining and running ensembles in any order is reproducible.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import ndtri

from src.domain.entities import WienerPath
from src.domain.errors import ConfigError

log = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64
_MANTISSA_SCALE = 2.0 ** -53


def _stream_key(seed: int, level: int) -> int:
    if not 0 <= seed < SEED_LIMIT:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not 0 <= level < SEED_LIMIT:
        raise ConfigError(f"refinement level out of range: {level}")
    return seed + (level << 64)


def standard_normals(seed: int, level: int, rows: int, m: int) -> np.ndarray:
    """(rows, m) standard normal draws; entry (j, k) uses stream position j*m + k."""
    count = rows * m
    if count == 0:
        return np.zeros((rows, m))
    generator = np.random.Philox(key=_stream_key(seed, level))
    raw = generator.random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _MANTISSA_SCALE
    return ndtri(u).reshape(rows, m)


def generate_path(seed: int, m: int, N: int, h: float) -> WienerPath:
    if N < 1:
        raise ConfigError(f"a path needs N >= 1 steps, got {N}")
    if not h > 0.0:
        raise ConfigError(f"step size must be positive, got {h}")
    if m < 0:
        raise ConfigError(f"process count must be >= 0, got {m}")

    steps = np.sqrt(h) * standard_normals(seed, 0, N, m)
    values = np.vstack([np.zeros((1, m)), np.cumsum(steps, axis=0)])
    log.debug("Generated path | seed=%d | m=%d | N=%d | h=%g", seed, m, N, h)
    return WienerPath(m=m, N=N, h=h, values=values, seed=seed, level=0)


def increments(path: WienerPath) -> np.ndarray:
    """Row j is W(t_{j+1}) - W(t_j)."""
    return np.diff(path.values, axis=0)


def refine(path: WienerPath) -> WienerPath:
    """
    Halve the grid. Even nodes are copied from the parent; each new odd node is
    the bridge midpoint 0.5*(W_j + W_{j+1}) + eta*sqrt(h/4), eta drawn from the
    (seed, level + 1) stream at position j*m + k.
    """
    level = path.level + 1
    eta = standard_normals(path.seed, level, path.N, path.m)

    values = np.empty((2 * path.N + 1, path.m))
    values[0::2] = path.values
    values[1::2] = 0.5 * (path.values[:-1] + path.values[1:]) + eta * np.sqrt(path.h / 4.0)
    return WienerPath(m=path.m, N=2 * path.N, h=path.h / 2.0, values=values, seed=path.seed, level=level)


def refine_to(path: WienerPath, levels: int) -> WienerPath:
    for _ in range(levels):
        path = refine(path)
    return path


def downsample(path: WienerPath, levels: int) -> np.ndarray:
    """Values of path on the grid 2**levels times coarser."""
    return path.values[:: 2 ** levels]


def deterministic_path(N: int, h: float) -> WienerPath:
    """An m = 0 path; integrators read it as all-zero increments."""
    return WienerPath(m=0, N=N, h=h, values=np.zeros((N + 1, 0)), seed=0, level=0)


def path_rows(path: WienerPath) -> tuple[list[str], list[list[float]]]:
    """CSV header t, W1..Wm and one row per grid node."""
    header = ["t"] + [f"W{k + 1}" for k in range(path.m)]
    rows = [[t, *w] for t, w in zip(path.times.tolist(), path.values.tolist())]
    return header, rows
