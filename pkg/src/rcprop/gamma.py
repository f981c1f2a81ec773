"""Discretized double Ito integral of the covariance along a Brownian pair.

For increments ``dA`` of path A and values ``B`` of path B on the same grid,

    Gamma = 2 * sum_{i>=1} dA[i] * sum_{j<i} dA[j] * G(B[i] - B[j])

(0-based, ``B[i] = B(t_i)``), i.e. both times are read at the left end of
their increment.  The cost is O(N**2) per sample: G couples both indices so
the inner sum cannot be prefix-cached except for constant G.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate, special

from .covariance import CovForm, CovarianceSpec
from .errors import InvalidArgumentError, NumericalError
from .paths import BrownianPath, TimeGrid, pair_block

BLOCK = 256

_CONST, _RSQRT, _POW, _POW_EPS = 0, 1, 2, 3

_FASTMATH = {"reassoc", "contract", "arcp", "nsz"}


@numba.njit(nogil=True, fastmath=_FASTMATH, cache=True)
def _gamma_rows(dA, B, mode, gamma, eps2, amp, out_val, out_hits):
    M, N = dA.shape
    for m in range(M):
        tot = 0.0
        hits = 0
        if mode == _CONST:
            s = 0.0
            for i in range(N):
                tot += dA[m, i] * s
                s += dA[m, i]
            tot *= amp
        else:
            for i in range(1, N):
                bi = B[m, i]
                s = 0.0
                for j in range(i):
                    x = bi - B[m, j]
                    if mode == _POW_EPS:
                        s += dA[m, j] * math.exp(-gamma * math.log(x * x + eps2))
                    elif x == 0.0:
                        hits += 1
                    elif mode == _RSQRT:
                        s += dA[m, j] / math.sqrt(abs(x))
                    else:
                        s += dA[m, j] * math.exp(-gamma * math.log(x * x))
                tot += dA[m, i] * s
            tot *= amp
        out_val[m] = 2.0 * tot
        out_hits[m] = hits


def _mode(spec: CovarianceSpec) -> int:
    if spec.form is not CovForm.POWER:
        raise InvalidArgumentError("Gamma sampling uses the power-law covariance only")
    if spec.gamma == 0.0:
        return _CONST
    if spec.epsilon > 0.0:
        return _POW_EPS
    return _RSQRT if spec.gamma == 0.25 else _POW


def gamma_rows(dA: np.ndarray, B: np.ndarray, spec: CovarianceSpec):
    """Vectorized estimator over rows; returns ``(values, n_singular_hits)``."""
    dA = np.ascontiguousarray(dA, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    if dA.ndim != 2 or B.shape[0] != dA.shape[0] or B.shape[1] < dA.shape[1]:
        raise InvalidArgumentError(f"incompatible shapes {dA.shape} and {B.shape}")
    vals = np.empty(dA.shape[0])
    hits = np.empty(dA.shape[0], dtype=np.int64)
    _gamma_rows(dA, B, _mode(spec), float(spec.gamma), float(spec.epsilon) ** 2,
                float(spec.amplitude), vals, hits)
    return vals, hits


@dataclass(frozen=True)
class GammaSample:
    value: float
    n_singular_hits: int = 0


def gamma_estimate(path_a: BrownianPath, path_b: BrownianPath, spec: CovarianceSpec) -> GammaSample:
    if path_a.grid != path_b.grid:
        raise InvalidArgumentError("paths must share one time grid")
    if np.isnan(path_a.increments).any() or np.isnan(path_b.values).any():
        raise InvalidArgumentError("NaN in input paths")
    vals, hits = gamma_rows(path_a.increments[None, :], path_b.values[None, :], spec)
    if not np.isfinite(vals[0]):
        raise NumericalError("non-finite Gamma estimate", module="gamma")
    return GammaSample(float(vals[0]), int(hits[0]))


@dataclass(eq=False)
class GammaEnsemble:
    """Samples stored column-wise; ``ensemble[i]`` gives a GammaSample."""

    values: np.ndarray
    hits: np.ndarray
    grid: TimeGrid
    spec: CovarianceSpec | None
    seed: int | None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != self.hits.shape or self.values.ndim != 1:
            raise InvalidArgumentError("values and hits must be equal-length vectors")
        if self.M < 2:
            raise InvalidArgumentError("an ensemble needs at least 2 samples")

    @property
    def M(self) -> int:
        return int(self.values.shape[0])

    @property
    def tau(self) -> float:
        return self.grid.tau

    def __len__(self):
        return self.M

    def __getitem__(self, i) -> GammaSample:
        return GammaSample(float(self.values[i]), int(self.hits[i]))

    @classmethod
    def constant(cls, grid: TimeGrid, value: float, M: int) -> "GammaEnsemble":
        """Degenerate ensemble, e.g. ``Gamma == tau`` for the deterministic kernel."""
        return cls(np.full(M, float(value)), np.zeros(M, dtype=np.int64), grid, None, None,
                   {"constant": float(value)})

    def to_records(self) -> np.ndarray:
        rec = np.empty(self.M, dtype=ENSEMBLE_DTYPE)
        rec["index"] = np.arange(self.M)
        rec["value"] = self.values
        rec["n_singular_hits"] = self.hits
        return rec


# flat little-endian layout of the binary ensemble dump
ENSEMBLE_DTYPE = np.dtype([("index", "<i8"), ("value", "<f8"), ("n_singular_hits", "<i8")])


def _resolve_threads(threads: int) -> int:
    if not threads:
        return os.cpu_count() or 1
    return int(threads)


def gamma_ensemble(grid: TimeGrid, spec: CovarianceSpec, M: int, seed: int,
                   threads: int = 1, block: int = BLOCK) -> GammaEnsemble:
    """M samples; sample i uses ``sample_pair`` on ``RngStream(seed, i)``.

    Work is split into fixed index blocks so the result does not depend on
    ``threads`` (0 means one per CPU).
    """
    if int(M) != M or M < 2:
        raise InvalidArgumentError(f"M must be an integer >= 2, got {M!r}")
    M = int(M)
    values = np.empty(M)
    hits = np.empty(M, dtype=np.int64)
    mode = _mode(spec)
    args = (mode, float(spec.gamma), float(spec.epsilon) ** 2, float(spec.amplitude))

    def run(start):
        stop = min(start + block, M)
        dA, B = pair_block(grid, seed, start, stop - start)
        _gamma_rows(dA, B, *args, values[start:stop], hits[start:stop])

    starts = range(0, M, block)
    n_workers = _resolve_threads(threads)
    if n_workers == 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(run, starts))

    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericalError(f"non-finite Gamma at sample {bad[0]}", module="gamma", index=int(bad[0]))
    return GammaEnsemble(values, hits, grid, spec, int(seed))


def _abs_moment_normal(p: float) -> float:
    """E|Z|**p for standard normal Z (p > -1)."""
    return 2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)


def exact_second_moment(grid: TimeGrid, spec: CovarianceSpec) -> float:
    """E[Gamma_hat**2] of the discrete estimator.

    By independence of the increments the cross terms vanish and

        E[Gamma_hat**2] = 4 dt**2 sum_{k=1}^{N-1} (N - k) E[G(X_k)**2],

    with ``X_k ~ N(0, k dt)``.  Returns ``inf`` when ``E[G**2]`` diverges,
    which happens for ``epsilon = 0`` and ``gamma >= 1/4``.
    """
    n, dt = grid.n_steps, grid.dt
    k = np.arange(1, n)
    if spec.gamma == 0.0:
        eg2 = np.full(k.shape, spec.amplitude**2)
    elif spec.epsilon == 0.0:
        if 4 * spec.gamma >= 1.0:
            return math.inf
        eg2 = spec.amplitude**2 * (k * dt) ** (-2 * spec.gamma) * _abs_moment_normal(-4 * spec.gamma)
    else:
        def eg2_at(var):
            f = lambda z: (var * z * z + spec.epsilon**2) ** (-2 * spec.gamma) * np.exp(-z * z / 2)
            val, _ = integrate.quad(f, 0.0, np.inf, epsrel=1e-12)
            return spec.amplitude**2 * 2 * val / math.sqrt(2 * math.pi)
        eg2 = np.array([eg2_at(kk * dt) for kk in k])
    return float(4 * dt * dt * np.sum((n - k) * eg2))
