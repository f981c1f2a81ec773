"""Monte Carlo kernel with the even coordinates integrated out, and its
proper-time integral (the averaged causal Green's function).

For one (odd, even) pair with displacement ``delta`` in the odd coordinate
and metric sign ``sigma`` the per-sample factor is

    phi = (2 pi |sigma Gamma|)**-1/2 * exp(-i pi/4 sign(sigma Gamma))
          * exp(i sigma delta**2 / (2 Gamma)),

i.e. ``(2 pi i sigma Gamma)**-1/2`` on the principal branch.  With
``Gamma == tau`` this is exactly the free Schroedinger kernel, which fixes
the branch.  Deterministic coordinates at zero displacement each contribute
``(2 pi i tau)**-1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceSpec
from .errors import InvalidArgumentError, NumericalError, SingularSampleError
from .gamma import GammaEnsemble, gamma_ensemble
from .paths import derive_seed, make_grid
from .scaling import ScalingFit, loglog_fit

NOISY_NODE_REL = 0.3
DEFAULT_FLOOR = 1e-4


@dataclass(frozen=True)
class SignatureSpec:
    """Metric signs of the odd coordinates plus bookkeeping of free factors.

    ``even_pointwise`` evaluates at zero even displacement instead of
    integrating the even coordinates out; each even partner then contributes
    a free factor at zero displacement (its correlation with Gamma is
    neglected).  Together with ``n_det`` extra deterministic coordinates this
    realizes mixed configurations such as d = 3.
    """

    n_pairs: int
    signs: tuple
    n_det: int = 0
    even_pointwise: bool = False

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        object.__setattr__(self, "signs", signs)
        if self.n_pairs < 1:
            raise InvalidArgumentError("n_pairs must be >= 1")
        if len(signs) != self.n_pairs or any(s not in (1, -1) for s in signs):
            raise InvalidArgumentError(f"signs must be {self.n_pairs} entries of +1/-1, got {signs}")
        if self.n_det < 0:
            raise InvalidArgumentError("n_det must be >= 0")

    @classmethod
    def uniform(cls, n_pairs: int, sign: int = 1, **kw) -> "SignatureSpec":
        return cls(n_pairs, (sign,) * n_pairs, **kw)

    @property
    def n_free(self) -> int:
        return self.n_det + (self.n_pairs if self.even_pointwise else 0)


@dataclass(frozen=True)
class KernelEstimate:
    value: complex
    std_error_re: float
    std_error_im: float
    n_truncated: int
    delta_floor: float
    M: int
    tau: float = math.nan

    @property
    def std_error(self) -> float:
        return math.hypot(self.std_error_re, self.std_error_im)


@dataclass
class GreenEstimate:
    value: complex
    std_error: float
    tau_grid: tuple
    regulator_eps: float
    per_tau: list
    delta_floor: float
    n_truncated: int = 0
    n_samples: int = 0
    warnings: list = field(default_factory=list)

    @property
    def truncated_fraction(self) -> float:
        return self.n_truncated / self.n_samples if self.n_samples else 0.0


def pair_factor(gam, delta: float, sigma: int) -> np.ndarray:
    gam = np.asarray(gam, dtype=float)
    sg = sigma * gam
    with np.errstate(divide="ignore"):
        amp = (2.0 * math.pi * np.abs(sg)) ** -0.5
        phase = -0.25 * math.pi * np.sign(sg) + delta * delta / (2.0 * sg)
    return amp * np.exp(1j * phase)


def free_factor(tau: float, n_free: int) -> complex:
    """``(2 pi i tau)**(-n_free/2)``, principal branch."""
    if n_free == 0:
        return 1.0 + 0.0j
    one = (2.0 * math.pi * tau) ** -0.5 * complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
    return one**n_free


def reduced_kernel(deltas_odd, sig: SignatureSpec, tau: float, ensembles,
                   delta_floor: float) -> KernelEstimate:
    """Mean over joint samples of the product of pair factors.

    Joint sample m takes the m-th entry of every (independent) ensemble.
    Samples with any ``|Gamma_k| < delta_floor`` are dropped and counted.
    """
    deltas = np.atleast_1d(np.asarray(deltas_odd, dtype=float))
    if deltas.shape != (sig.n_pairs,) or len(ensembles) != sig.n_pairs:
        raise InvalidArgumentError("need one displacement and one ensemble per pair")
    if len({e.M for e in ensembles}) != 1:
        raise InvalidArgumentError("ensembles must have equal sizes")
    if any(not math.isclose(e.tau, tau, rel_tol=1e-12) for e in ensembles):
        raise InvalidArgumentError(f"ensembles must be sampled at tau = {tau}")
    if delta_floor < 0:
        raise InvalidArgumentError("delta_floor must be >= 0")
    gam = np.vstack([e.values for e in ensembles])
    if delta_floor == 0.0:
        if np.any(gam == 0.0):
            raise SingularSampleError("Gamma sample is exactly zero and delta_floor = 0")
        keep = np.ones(gam.shape[1], dtype=bool)
    else:
        keep = np.all(np.abs(gam) >= delta_floor, axis=0)
    n_keep = int(keep.sum())
    if n_keep < 2:
        raise NumericalError("fewer than two samples survive the |Gamma| floor", module="propagator")
    prod = np.ones(n_keep, dtype=complex)
    for k in range(sig.n_pairs):
        prod *= pair_factor(gam[k, keep], deltas[k], sig.signs[k])
    prod *= free_factor(tau, sig.n_free)
    se_re = float(prod.real.std(ddof=1) / math.sqrt(n_keep))
    se_im = float(prod.imag.std(ddof=1) / math.sqrt(n_keep))
    return KernelEstimate(complex(prod.mean()), se_re, se_im, gam.shape[1] - n_keep,
                          float(delta_floor), n_keep, float(tau))


def tau_nodes(tau_min: float, tau_max: float, n_tau: int):
    """Log-uniform nodes and trapezoid weights for ``int dtau``."""
    if not (0 < tau_min < tau_max) or n_tau < 2:
        raise InvalidArgumentError("need 0 < tau_min < tau_max and n_tau >= 2")
    taus = np.geomspace(tau_min, tau_max, n_tau)
    h = math.log(tau_max / tau_min) / (n_tau - 1)
    w = np.full(n_tau, h)
    w[0] = w[-1] = h / 2
    return taus, w * taus


def node_seed(seed: int, q: int, k: int) -> int:
    """Ensemble seed for node q, pair k."""
    return derive_seed(seed, q, k)


def build_nodes(taus, n_pairs: int, cov: CovarianceSpec, N: int, M: int, seed: int,
                threads: int = 1, deterministic: bool = False, rescale: bool = False):
    """Gamma ensembles per node and pair: ``nodes[q][k]``.

    ``deterministic`` replaces every ensemble by ``Gamma == tau``.
    ``rescale`` is the fast mode: one ensemble per pair at tau = 1 mapped to
    each node by ``Gamma -> tau**(1 - gamma) Gamma`` (exact in law only for
    the unregularized power law).
    """
    nodes = []
    if deterministic:
        for tau in taus:
            grid = make_grid(tau, N)
            nodes.append([GammaEnsemble.constant(grid, tau, 2) for _ in range(n_pairs)])
        return nodes
    if rescale:
        if not cov.is_scale_free:
            raise InvalidArgumentError("rescaled nodes need epsilon = 0")
        base = [gamma_ensemble(make_grid(1.0, N), cov, M, node_seed(seed, 0, k), threads)
                for k in range(n_pairs)]
        for tau in taus:
            grid = make_grid(tau, N)
            f = tau ** (1.0 - cov.gamma)
            nodes.append([GammaEnsemble(b.values * f, b.hits, grid, cov, b.seed, {"rescaled": True})
                          for b in base])
        return nodes
    for q, tau in enumerate(taus):
        grid = make_grid(tau, N)
        nodes.append([gamma_ensemble(grid, cov, M, node_seed(seed, q, k), threads)
                      for k in range(n_pairs)])
    return nodes


def check_bracket(deltas_odd, gamma: float, tau_min: float, tau_max: float, regulator_eps: float):
    d2 = float(np.sum(np.square(deltas_odd)))
    if regulator_eps <= 0 or tau_max * regulator_eps < 5:
        raise InvalidArgumentError(
            f"tau_max * regulator_eps = {tau_max * regulator_eps:.3g} must be >= 5")
    if d2 == 0.0:
        raise InvalidArgumentError("zero odd displacement: the tau grid cannot bracket it")
    scale = d2 ** (1.0 / (1.0 - gamma))
    if tau_min > scale / 10:
        raise InvalidArgumentError(
            f"tau_min = {tau_min:.3g} exceeds stationary scale / 10 = {scale / 10:.3g}")
    if tau_max < 5 * scale:
        raise InvalidArgumentError(
            f"tau_max = {tau_max:.3g} is below 5 x stationary scale = {5 * scale:.3g}")


def green_from_nodes(deltas_odd, sig: SignatureSpec, taus, weights, nodes, gamma: float,
                     regulator_eps: float, delta_floor: float = DEFAULT_FLOOR,
                     check: bool = True) -> GreenEstimate:
    """``i * sum_q w_q exp(-eps tau_q) K(tau_q)`` from prepared node ensembles.

    ``delta_floor`` is relative: the |Gamma| floor at a node is
    ``delta_floor * tau**(1 - gamma)``.
    """
    taus = np.asarray(taus, dtype=float)
    if check:
        check_bracket(deltas_odd, gamma, taus[0], taus[-1], regulator_eps)
    value = 0.0j
    var = 0.0
    per_tau, notes = [], []
    n_trunc = n_tot = 0
    for tau, w, ens in zip(taus, weights, nodes):
        k = reduced_kernel(deltas_odd, sig, tau, ens, delta_floor * tau ** (1.0 - gamma))
        per_tau.append(k)
        if k.std_error > NOISY_NODE_REL * abs(k.value):
            notes.append(f"noisy node tau={tau:.4g}: rel. error {k.std_error / abs(k.value):.2f}")
        c = w * math.exp(-regulator_eps * tau)
        value += c * k.value
        var += (c * k.std_error) ** 2
        n_trunc += k.n_truncated
        n_tot += k.n_truncated + k.M
    return GreenEstimate(1j * value, math.sqrt(var), (float(taus[0]), float(taus[-1]), len(taus)),
                         float(regulator_eps), per_tau, float(delta_floor), n_trunc, n_tot, notes)


def green_reduced(deltas_odd, sig: SignatureSpec, gamma: float, grid_spec, N: int, M: int,
                  regulator_eps: float, delta_floor: float = DEFAULT_FLOOR, seed: int = 0,
                  cov: CovarianceSpec | None = None, threads: int = 1,
                  deterministic: bool = False, rescale: bool = False) -> GreenEstimate:
    """Proper-time integral of the reduced kernel on a log-uniform tau grid."""
    cov = cov or CovarianceSpec(gamma)
    if cov.gamma != gamma:
        raise InvalidArgumentError("cov.gamma differs from gamma")
    tau_min, tau_max, n_tau = grid_spec
    check_bracket(deltas_odd, gamma, tau_min, tau_max, regulator_eps)
    taus, weights = tau_nodes(tau_min, tau_max, int(n_tau))
    nodes = build_nodes(taus, sig.n_pairs, cov, N, M, seed, threads, deterministic, rescale)
    return green_from_nodes(deltas_odd, sig, taus, weights, nodes, gamma, regulator_eps,
                            delta_floor, check=False)


@dataclass
class ScanResult:
    fit: ScalingFit
    deltas: list
    greens: list
    reference: GreenEstimate | None = None
    floor_shift: list = field(default_factory=list)

    @property
    def exponent(self) -> float:
        return self.fit.slope

    @property
    def truncated_fraction(self) -> float:
        n = sum(g.n_samples for g in self.greens)
        return sum(g.n_truncated for g in self.greens) / n if n else 0.0


def exponent_scan(direction, delta_list, sig: SignatureSpec, gamma: float, grid_spec, N: int,
                  M: int, regulator_eps: float, delta_floor: float = DEFAULT_FLOOR, seed: int = 0,
                  cov: CovarianceSpec | None = None, threads: int = 1,
                  deterministic: bool = False, rescale: bool = False,
                  subtract_reference: bool = False, floor_check: bool = True,
                  kernel_fn=None) -> ScanResult:
    """Fit ``|G(s * direction)|`` against the squared odd distance.

    One set of node ensembles serves every displacement.  With
    ``subtract_reference`` the zero-displacement value (same nodes) is
    subtracted first, isolating the non-analytic part when the predicted
    exponent is positive.  ``kernel_fn(deltas, tau) -> complex`` replaces the
    Monte Carlo kernel entirely (used to test the quadrature plumbing).
    """
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    s = np.asarray(delta_list, dtype=float)
    d2 = s**2 * float(np.sum(direction**2))
    if len(s) < 4 or d2.max() / d2.min() < 10:
        raise InvalidArgumentError("need >= 4 displacements spanning >= one decade in delta**2")
    tau_min, tau_max, n_tau = grid_spec
    taus, weights = tau_nodes(tau_min, tau_max, int(n_tau))
    for si in s:
        check_bracket(si * direction, gamma, tau_min, tau_max, regulator_eps)

    if kernel_fn is not None:
        def green(dv, floor=None):
            vals = np.array([kernel_fn(dv, t) for t in taus])
            value = 1j * np.sum(weights * np.exp(-regulator_eps * taus) * vals)
            return GreenEstimate(complex(value), 0.0, (tau_min, tau_max, n_tau),
                                 regulator_eps, [], 0.0)
    else:
        cov = cov or CovarianceSpec(gamma)
        nodes = build_nodes(taus, sig.n_pairs, cov, N, M, seed, threads, deterministic, rescale)

        def green(dv, floor=delta_floor):
            return green_from_nodes(dv, sig, taus, weights, nodes, gamma, regulator_eps,
                                    floor, check=False)

    greens = [green(si * direction) for si in s]
    reference = green(0.0 * direction) if subtract_reference else None
    ys = np.array([g.value for g in greens])
    errs = np.array([g.std_error for g in greens])
    if reference is not None:
        ys = ys - reference.value
        errs = np.hypot(errs, reference.std_error)
    fit = loglog_fit(d2, np.abs(ys), errs if np.all(errs > 0) else None)

    shifts = []
    if floor_check and kernel_fn is None and not deterministic:
        for si, g in zip(s, greens):
            half = green(si * direction, delta_floor / 2)
            shifts.append(abs(half.value - g.value) / g.std_error)
    return ScanResult(fit, [float(x) for x in s], greens, reference, shifts)
