"""Moments of Gamma ensembles, power-law fits and self-similarity tests."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import FitError, InvalidArgumentError, NumericalError
from .gamma import GammaEnsemble
from .paths import TimeGrid, endpoint_block

# stream_id reserved for bootstrap resampling, far from any sample index
BOOT_STREAM = 0xB007_5EED_0000_0000
CI_LEVEL = 0.95


@dataclass(frozen=True)
class MomentEstimate:
    r: int
    mean: float
    std_error: float
    bootstrap_ci: tuple
    M: int

    @property
    def sign(self) -> int:
        return int(np.sign(self.mean))

    def within_ci(self, value: float) -> bool:
        lo, hi = self.bootstrap_ci
        return lo <= value <= hi

    def z_score(self, value: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if value == self.mean else math.inf
        return (self.mean - value) / self.std_error


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    slope_stderr: float
    r2: float
    points: list
    excluded: list = field(default_factory=list)
    chi2: float = 0.0


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    m1: int
    m2: int
    exponent: float


def _boot_generator(seed: int) -> np.random.Generator:
    key = np.array([int(seed) & (2**64 - 1), BOOT_STREAM], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def bootstrap_means(x: np.ndarray, n_boot: int, seed: int, chunk: int = 16) -> np.ndarray:
    """Means of ``n_boot`` with-replacement resamples of ``x`` (deterministic)."""
    rng = _boot_generator(seed)
    m = x.shape[0]
    out = np.empty(n_boot)
    for start in range(0, n_boot, chunk):
        k = min(chunk, n_boot - start)
        idx = rng.integers(0, m, size=(k, m))
        out[start:start + k] = x[idx].mean(axis=1)
    return out


def moment_from_values(values, r: int, n_boot: int = 1000, seed: int = 0) -> MomentEstimate:
    if int(r) != r or r < 1:
        raise InvalidArgumentError(f"moment order r must be a positive integer, got {r!r}")
    if n_boot < 1:
        raise InvalidArgumentError("n_boot must be positive")
    values = np.asarray(values, dtype=float)
    m = values.shape[0]
    if m < 2:
        raise InvalidArgumentError("need at least two samples")
    with np.errstate(over="ignore", invalid="ignore"):
        powers = values ** int(r)
    if not np.all(np.isfinite(powers)):
        worst = float(np.max(np.abs(values)))
        raise NumericalError(f"overflow in Gamma**{r} (max |Gamma| = {worst:.3g})", module="scaling")
    mean = float(powers.mean())
    std_error = float(powers.std(ddof=1) / math.sqrt(m))
    boot = bootstrap_means(powers, n_boot, seed)
    alpha = (1.0 - CI_LEVEL) / 2
    lo, hi = np.quantile(boot, [alpha, 1.0 - alpha])
    lo, hi = min(float(lo), mean), max(float(hi), mean)
    return MomentEstimate(int(r), mean, std_error, (lo, hi), m)


def estimate_moment(ensemble: GammaEnsemble, r: int, n_boot: int = 1000, seed: int = 0) -> MomentEstimate:
    """Plug-in estimate of ``E[Gamma**r]`` with a percentile-bootstrap CI."""
    return moment_from_values(ensemble.values, r, n_boot, seed)


def loglog_fit(x, y, yerr=None) -> ScalingFit:
    """Weighted least squares of ``log|y|`` on ``log x``.

    Weights are ``(|y| / yerr)**2``, the inverse variance of ``log|y|``; with
    no (or any zero) errors the fit is unweighted.  ``slope_stderr`` comes
    from the weighted normal equations without residual rescaling.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    lx, ly = np.log(x), np.log(y)
    if yerr is None or np.any(np.asarray(yerr) <= 0):
        w = np.ones_like(lx)
    else:
        w = (y / np.asarray(yerr, dtype=float)) ** 2
    if np.unique(lx).size < 3:
        raise FitError("a scaling fit needs at least 3 distinct abscissae")
    X = np.column_stack([np.ones_like(lx), lx])
    A = X.T @ (w[:, None] * X)
    cov = np.linalg.inv(A)
    intercept, slope = cov @ (X.T @ (w * ly))
    resid = ly - (intercept + slope * lx)
    ybar = np.sum(w * ly) / np.sum(w)
    ss_tot = np.sum(w * (ly - ybar) ** 2)
    chi2 = float(np.sum(w * resid**2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        slope_stderr=float(math.sqrt(cov[1, 1])),
        r2=float(min(max(r2, 0.0), 1.0)),
        points=[(float(a), float(b), float(c)) for a, b, c in zip(lx, ly, w)],
        chi2=chi2,
    )


def fit_scaling(moments) -> ScalingFit:
    """Fit ``log|E[Gamma**r]|`` against ``log tau``; slope estimates r(1 - gamma).

    ``moments`` is a sequence of ``(tau, MomentEstimate)``.  Points whose mean
    is zero or whose CI straddles zero carry no usable sign and are dropped
    with a warning.
    """
    moments = list(moments)
    if len({m.r for _, m in moments}) > 1:
        raise InvalidArgumentError("all moments in a fit must share the order r")
    kept, excluded = [], []
    for tau, m in moments:
        lo, hi = m.bootstrap_ci
        if m.mean == 0.0 or (lo <= 0.0 <= hi and lo != hi):
            excluded.append(float(tau))
            warnings.warn(f"moment at tau={tau} is compatible with zero; excluded from fit")
        else:
            kept.append((tau, m))
    if len(kept) < 3:
        raise FitError(f"only {len(kept)} usable points after exclusions")
    fit = loglog_fit([t for t, _ in kept], [m.mean for _, m in kept],
                     [m.std_error for _, m in kept])
    return ScalingFit(fit.slope, fit.intercept, fit.slope_stderr, fit.r2, fit.points,
                      excluded, fit.chi2)


def ks_scaling_test(ens1: GammaEnsemble, ens2: GammaEnsemble, c: float, gamma: float,
                    exponent: float | None = None) -> KsResult:
    """Two-sample KS between ``c**exponent * Gamma(tau)`` and ``Gamma(c tau)``.

    ``exponent`` defaults to ``1 - gamma``, the exact self-similarity exponent
    of the unregularized power law; passing another value is a power check.
    """
    for e in (ens1, ens2):
        if e.spec is None or not e.spec.is_scale_free:
            raise InvalidArgumentError("KS scaling test needs power-law ensembles with epsilon = 0")
        if e.spec.gamma != gamma:
            raise InvalidArgumentError(f"ensemble gamma {e.spec.gamma} != requested gamma {gamma}")
    if ens1.grid.n_steps != ens2.grid.n_steps:
        raise InvalidArgumentError("ensembles must share n_steps")
    if ens1.spec.amplitude != ens2.spec.amplitude:
        raise InvalidArgumentError("ensembles must share the covariance amplitude")
    if c <= 0 or not math.isclose(ens2.tau, c * ens1.tau, rel_tol=1e-12):
        raise InvalidArgumentError(f"second ensemble must sit at c*tau = {c * ens1.tau}")
    if exponent is None:
        exponent = 1.0 - gamma
    scaled = c**exponent * ens1.values
    res = stats.ks_2samp(scaled, ens2.values, method="asymp")
    return KsResult(float(res.statistic), float(res.pvalue), ens1.M, ens2.M, float(exponent))


def even_moment_reference(r: int, tau: float) -> float:
    """``E[b(tau)**(2r)] = (2r - 1)!! * tau**r``."""
    return float(np.prod(np.arange(2 * r - 1, 0, -2))) * tau**r


def even_moment_check(grid: TimeGrid, r: int, M: int, seed: int, n_boot: int = 1000) -> MomentEstimate:
    """Moment ``E[b(tau)**(2r)]`` of the even (Brownian) coordinates."""
    if int(r) != r or r < 1:
        raise InvalidArgumentError(f"moment order r must be a positive integer, got {r!r}")
    ends = endpoint_block(grid, seed, 0, int(M))
    return moment_from_values(ends, 2 * int(r), n_boot, seed)
