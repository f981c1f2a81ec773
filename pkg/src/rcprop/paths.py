"""Seeded Brownian trajectories on uniform proper-time grids.

Random numbers come from numpy's counter-based Philox4x64 generator.  A
stream is keyed by ``(seed, stream_id)``; the 256-bit counter's two high
words select a substream, so every path of every sample is a pure function
of ``(seed, stream_id, substream)`` and never depends on which worker drew
it.  Gaussian variates use ``Generator.standard_normal`` (numpy's ziggurat);
that choice is part of the reproducibility contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

_MASK64 = (1 << 64) - 1
_MAX_DEPTH = 2


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * dt`` on ``[0, tau]``."""

    tau: float
    n_steps: int

    @property
    def dt(self) -> float:
        return self.tau / self.n_steps

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def scaled(self, c: float) -> "TimeGrid":
        """Same number of steps on ``[0, c * tau]``."""
        return make_grid(c * self.tau, self.n_steps)


def make_grid(tau: float, n_steps: int) -> TimeGrid:
    if not np.isfinite(tau) or tau <= 0:
        raise InvalidArgumentError(f"tau must be positive and finite, got {tau!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be a positive integer, got {n_steps!r}")
    return TimeGrid(float(tau), int(n_steps))


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 64-bit seed for a labelled sub-run (e.g. tau node, pair)."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, *[int(k) for k in keys]])
    return int(ss.generate_state(1, np.uint64)[0])


class RngStream:
    """Philox stream keyed by ``(seed, stream_id)``.

    ``path`` is the substream address: ``()`` for the root, ``(k,)`` for the
    k-th child and so on (at most two levels).  Each address owns a disjoint
    2**128-long block of the counter space.
    """

    def __init__(self, seed: int, stream_id: int = 0, path: tuple = ()):
        if len(path) > _MAX_DEPTH:
            raise InvalidArgumentError("substreams nest at most two levels deep")
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.path = tuple(int(p) for p in path)
        high = [p + 1 for p in self.path] + [0] * (_MAX_DEPTH - len(self.path))
        self._bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
            counter=np.array([0, 0, high[1], high[0]], dtype=np.uint64),
        )
        self._gen = np.random.Generator(self._bitgen)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"

    @property
    def counter(self) -> int:
        """Current low 128 bits of the Philox counter (position in the stream)."""
        c = self._bitgen.state["state"]["counter"]
        return int(c[0]) | (int(c[1]) << 64)

    def substream(self, k: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (k,))

    def substreams(self, n: int) -> list:
        return [self.substream(k) for k in range(n)]

    def standard_normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)


@dataclass(frozen=True, eq=False)
class BrownianPath:
    grid: TimeGrid
    increments: np.ndarray
    values: np.ndarray

    @classmethod
    def from_increments(cls, grid: TimeGrid, increments) -> "BrownianPath":
        inc = np.asarray(increments, dtype=float)
        if inc.shape != (grid.n_steps,):
            raise InvalidArgumentError(
                f"expected {grid.n_steps} increments, got shape {inc.shape}"
            )
        values = np.empty(grid.n_steps + 1)
        values[0] = 0.0
        np.cumsum(inc, out=values[1:])
        inc.setflags(write=False)
        values.setflags(write=False)
        return cls(grid, inc, values)

    @property
    def endpoint(self) -> float:
        return float(self.values[-1])


def sample_path(grid: TimeGrid, stream: RngStream) -> BrownianPath:
    """Draw a path with N(0, dt) increments from ``stream`` (advancing it)."""
    z = stream.standard_normal(grid.n_steps)
    return BrownianPath.from_increments(grid, z * np.sqrt(grid.dt))


def sample_pair(grid: TimeGrid, stream: RngStream) -> tuple:
    """Two independent paths drawn from substreams 0 and 1 of ``stream``."""
    a, b = stream.substreams(2)
    return sample_path(grid, a), sample_path(grid, b)


def pair_block(grid: TimeGrid, seed: int, start: int, count: int):
    """Increments of path A and values of path B for a run of stream ids.

    Row ``m`` is bit-identical to ``sample_pair(grid, RngStream(seed, start + m))``.
    Returns ``(dA, B)`` with shapes ``(count, n)`` and ``(count, n + 1)``.
    """
    n = grid.n_steps
    sd = np.sqrt(grid.dt)
    dA = np.empty((count, n))
    B = np.zeros((count, n + 1))
    for m in range(count):
        root = RngStream(seed, start + m)
        dA[m] = root.substream(0).standard_normal(n) * sd
        np.cumsum(root.substream(1).standard_normal(n) * sd, out=B[m, 1:])
    return dA, B


def endpoint_block(grid: TimeGrid, seed: int, start: int, count: int) -> np.ndarray:
    """``values[-1]`` of ``sample_path(grid, RngStream(seed, start + m))``."""
    n = grid.n_steps
    sd = np.sqrt(grid.dt)
    out = np.empty(count)
    for m in range(count):
        z = RngStream(seed, start + m).standard_normal(n) * sd
        out[m] = np.cumsum(z)[-1]
    return out
