"""Deterministic randomness, time grids, Wiener sampling, and shared numerics.

Everything downstream builds on three contracts fixed here:

- uniform time grids whose node times are computed the same way everywhere,
- counter-based random substreams addressed by (seed, index), so that any
  path in any ensemble can be regenerated in isolation and results do not
  depend on worker count or scheduling order,
- a small set of scalar numeric helpers (Gaussian tail, adaptive quadrature,
  quarter-Holder seminorm) with explicit failure signalling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc, ndtri

__all__ = [
    "NumericFailure",
    "TimeGrid",
    "RandomStream",
    "WienerPath",
    "make_grid",
    "derive_stream",
    "sample_wiener",
    "substream_normals",
    "gaussian_tail",
    "gaussian_tail_inverse",
    "integrate",
    "holder_quarter_norm",
    "path_block_size",
    "block_spans",
    "map_blocks",
]

_MASK64 = (1 << 64) - 1
_SQRT2 = math.sqrt(2.0)


class NumericFailure(RuntimeError):
    """An iterative numeric routine failed to reach its tolerance."""


# ---------------------------------------------------------------------------
# time grids


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with `steps` intervals, steps + 1 nodes."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def times(self) -> np.ndarray:
        # node k sits at k * horizon / steps exactly; never accumulate dt
        return np.arange(self.steps + 1) * self.horizon / self.steps


def make_grid(horizon: float, steps: int) -> TimeGrid:
    return TimeGrid(float(horizon), int(steps))


# ---------------------------------------------------------------------------
# random substreams


@dataclass(frozen=True)
class RandomStream:
    """Counter-based substream fully determined by (seed, index).

    Distinct indices under one seed give statistically independent streams;
    the 128-bit Philox key is (index << 64) | (seed mod 2^64), so seed and
    index never collide in the key space.
    """

    seed: int
    index: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"stream index must be >= 0, got {self.index}")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this substream."""
        key = (self.index << 64) | (self.seed & _MASK64)
        return np.random.Generator(np.random.Philox(key=key))


def derive_stream(seed: int, index: int = 0) -> RandomStream:
    return RandomStream(int(seed), int(index))


def substream_normals(seed: int, first_index: int, count: int, draws: int) -> np.ndarray:
    """Standard normals for `count` adjacent substreams, shape (draws, count).

    Column i holds the first `draws` outputs of substream first_index + i, so
    a block decomposition of an ensemble reproduces exactly the numbers each
    path would see if simulated alone.
    """
    out = np.empty((count, draws))
    for i in range(count):
        gen = derive_stream(seed, first_index + i).generator()
        out[i] = gen.standard_normal(draws)
    return np.ascontiguousarray(out.T)


# ---------------------------------------------------------------------------
# Wiener paths


@dataclass(frozen=True, eq=False)
class WienerPath:
    """Discrete Wiener path on a grid; values has shape (steps + 1, dims)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"values must have shape (steps + 1, dims), got {self.values.shape}"
            )

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def scalar(self) -> np.ndarray:
        """The path as a flat array; only defined for one-dimensional paths."""
        if self.dims != 1:
            raise ValueError(f"scalar view needs a 1-d path, got dims={self.dims}")
        return self.values[:, 0]


def sample_wiener(grid: TimeGrid, stream: RandomStream, dims: int = 1) -> WienerPath:
    """Draw a Wiener path: increments are N(0, dt) per component, w(0) = 0."""
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    z = stream.generator().standard_normal((grid.steps, dims))
    values = np.empty((grid.steps + 1, dims))
    values[0] = 0.0
    np.cumsum(z * math.sqrt(grid.dt), axis=0, out=values[1:])
    return WienerPath(grid, values)


# ---------------------------------------------------------------------------
# scalar numerics


def gaussian_tail(z):
    """Upper tail P{N(0,1) > z}; accurate into the far tail via erfc."""
    return 0.5 * erfc(np.asarray(z, dtype=float) / _SQRT2)


def gaussian_tail_inverse(p):
    """Inverse of gaussian_tail on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise ValueError("tail probability must lie strictly inside (0, 1)")
    return -ndtri(p)


def integrate(f, a: float, b: float, rel_tol: float = 1e-10) -> float:
    """Adaptive quadrature of f over [a, b] to relative tolerance rel_tol.

    Raises NumericFailure when the quadrature reports non-convergence instead
    of returning a silently degraded value.
    """
    if rel_tol <= 0.0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    if not a <= b:
        raise ValueError(f"integration bounds out of order: [{a}, {b}]")
    if a == b:
        return 0.0
    result = quad(f, a, b, epsabs=1e-14, epsrel=rel_tol, limit=200, full_output=1)
    if len(result) > 3:
        raise NumericFailure(f"quadrature on [{a}, {b}] did not converge: {result[3]}")
    return float(result[0])


def holder_quarter_norm(path: WienerPath, window_end: float | None = None) -> float:
    """Discrete Holder-1/4 seminorm sup |x(t) - x(s)| / (t - s)^{1/4}.

    The sup runs over all ordered node pairs with t <= window_end (defaults
    to the full horizon); multi-component paths use the Euclidean norm of the
    increment.
    """
    grid = path.grid
    if window_end is None:
        window_end = grid.horizon
    if window_end > grid.horizon * (1.0 + 1e-12):
        raise ValueError("window_end exceeds the grid horizon")
    n_nodes = int(np.searchsorted(grid.times(), window_end * (1.0 + 1e-12), side="right"))
    if n_nodes < 2:
        raise ValueError("window contains no increments")
    vals = path.values[:n_nodes]
    dt = grid.dt
    best = 0.0
    for lag in range(1, n_nodes):
        diff = vals[lag:] - vals[:-lag]
        sup = math.sqrt(float(np.max(np.einsum("ij,ij->i", diff, diff))))
        best = max(best, sup / (lag * dt) ** 0.25)
    return best


# ---------------------------------------------------------------------------
# deterministic block decomposition for ensembles


def path_block_size(steps: int) -> int:
    """Paths per block, a function of the step count only.

    Ensembles are reduced block by block in index order, so the block layout
    must not depend on worker count or available memory; it is chosen to keep
    a (steps, block) increment matrix around 2^25 doubles.
    """
    raw = (1 << 25) // max(1, int(steps))
    if raw < 1:
        return 128
    pow2 = 1 << (raw.bit_length() - 1)
    return int(min(1024, max(128, pow2)))


def block_spans(total: int, block: int) -> list[tuple[int, int]]:
    """Contiguous [start, stop) spans covering range(total)."""
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    if block < 1:
        raise ValueError(f"block must be >= 1, got {block}")
    return [(s, min(s + block, total)) for s in range(0, total, block)]


def map_blocks(fn, total: int, block: int, workers: int = 1) -> list:
    """Apply fn(start, stop) over fixed blocks, results in block order.

    The span layout and the order of the returned list depend only on
    (total, block); workers > 1 parallelises the calls without changing
    either, so reductions over the result are bit-stable across worker
    counts.
    """
    spans = block_spans(total, block)
    if workers <= 1 or len(spans) == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(lambda span: fn(*span), spans))
