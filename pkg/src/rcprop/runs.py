"""One function per CLI subcommand: config in, tables and summary out."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .covariance import CovarianceSpec
from .errors import FitError
from .exponents import Kind, exponent_table, predict
from .gamma import GammaEnsemble, exact_second_moment, gamma_ensemble
from .paths import derive_seed, make_grid
from .propagator import (
    SignatureSpec,
    build_nodes,
    exponent_scan,
    reduced_kernel,
)
from .scaling import estimate_moment, fit_scaling, ks_scaling_test


@dataclass
class Table:
    stem: str
    kind: str
    header: tuple
    rows: list


@dataclass
class RunOutput:
    summary: dict
    tables: list = field(default_factory=list)
    ensemble: GammaEnsemble | None = None


def cov_spec(cfg: RunConfig) -> CovarianceSpec:
    return CovarianceSpec(cfg.gamma, cfg.epsilon, cfg.cov_form, cfg.nu_max, cfg.amplitude)


def signature(cfg: RunConfig) -> SignatureSpec:
    return SignatureSpec(cfg.n_pairs, cfg.signature, cfg.n_det, cfg.even_mode == "pointwise")


def odd_deltas(cfg: RunConfig) -> np.ndarray:
    d = np.asarray(cfg.delta, dtype=float)
    return np.full(cfg.n_pairs, d[0]) if d.size == 1 else d


def _moment_dict(m) -> dict:
    lo, hi = m.bootstrap_ci
    z = m.mean / m.std_error if m.std_error > 0 else 0.0
    return {"r": m.r, "mean": m.mean, "std_error": m.std_error, "ci_lo": lo, "ci_hi": hi,
            "M": m.M, "z_vs_zero": z}


_MOMENT_HEADER = ("r", "mean", "std_error", "ci_lo", "ci_hi", "M")


def _moment_row(m, *prefix):
    return (*prefix, m.r, m.mean, m.std_error, *m.bootstrap_ci, m.M)


def run_gamma_moments(cfg: RunConfig) -> RunOutput:
    grid = make_grid(cfg.tau, cfg.n_steps)
    cov = cov_spec(cfg)
    ens = gamma_ensemble(grid, cov, cfg.n_samples, cfg.seed, cfg.threads)
    orders = sorted(set(cfg.orders) | {2 * r for r in cfg.orders})
    moments = [estimate_moment(ens, r, cfg.n_boot, cfg.seed) for r in orders]
    ref2 = exact_second_moment(grid, cov)
    m2 = estimate_moment(ens, 2, cfg.n_boot, cfg.seed) if 2 not in orders else moments[orders.index(2)]
    summary = {
        "tau": cfg.tau,
        "n_steps": cfg.n_steps,
        "M": ens.M,
        "moments": [_moment_dict(m) for m in moments],
        "n_singular_hits": int(ens.hits.sum()),
        "exact_second_moment": ref2,
        "second_moment_z": (m2.mean - ref2) / m2.std_error if math.isfinite(ref2) else None,
    }
    table = Table("moments", "moments", _MOMENT_HEADER, [_moment_row(m) for m in moments])
    return RunOutput(summary, [table], ens)


def run_scaling(cfg: RunConfig) -> RunOutput:
    cov = cov_spec(cfg)
    lo, hi, n = cfg.tau_grid
    taus = np.geomspace(lo, hi, int(n))
    per_r = {r: [] for r in cfg.orders}
    rows = []
    for q, tau in enumerate(taus):
        s = derive_seed(cfg.seed, q)
        ens = gamma_ensemble(make_grid(float(tau), cfg.n_steps), cov, cfg.n_samples, s, cfg.threads)
        for r in cfg.orders:
            m = estimate_moment(ens, r, cfg.n_boot, s)
            per_r[r].append((float(tau), m))
            rows.append(_moment_row(m, float(tau)))
    fits = []
    for r, moments in per_r.items():
        entry = {"r": r, "expected_slope": r * (1.0 - cfg.gamma)}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fit = fit_scaling(moments)
            entry.update(slope=fit.slope, slope_stderr=fit.slope_stderr, intercept=fit.intercept,
                         r2=fit.r2, chi2=fit.chi2, excluded_taus=fit.excluded)
        except FitError as exc:
            entry.update(slope=None, error=str(exc))
        fits.append(entry)
    table = Table("scaling", "scaling", ("tau",) + _MOMENT_HEADER, rows)
    return RunOutput({"taus": taus, "n_steps": cfg.n_steps, "fits": fits}, [table])


def run_ks_scale(cfg: RunConfig) -> RunOutput:
    cov = cov_spec(cfg)
    c = cfg.ks_c
    g1 = make_grid(cfg.tau, cfg.n_steps)
    e1 = gamma_ensemble(g1, cov, cfg.n_samples, derive_seed(cfg.seed, 0), cfg.threads)
    e2 = gamma_ensemble(g1.scaled(c), cov, cfg.n_samples, derive_seed(cfg.seed, 1), cfg.threads)
    tests = [("self_similar", ks_scaling_test(e1, e2, c, cfg.gamma))]
    if cfg.ks_exponent is not None:
        tests.append(("control", ks_scaling_test(e1, e2, c, cfg.gamma, cfg.ks_exponent)))
    rows = [(name, k.exponent, k.statistic, k.p_value, k.m1, k.m2) for name, k in tests]
    summary = {"c": c, "tau": cfg.tau, "tests": [
        {"name": name, "exponent": k.exponent, "statistic": k.statistic, "p_value": k.p_value,
         "m1": k.m1, "m2": k.m2} for name, k in tests]}
    table = Table("ks", "ks", ("test", "exponent", "statistic", "p_value", "m1", "m2"), rows)
    return RunOutput(summary, [table])


def run_kernel(cfg: RunConfig) -> RunOutput:
    sig = signature(cfg)
    deltas = odd_deltas(cfg)
    nodes = build_nodes([cfg.tau], sig.n_pairs, cov_spec(cfg), cfg.n_steps, cfg.n_samples,
                        cfg.seed, cfg.threads, cfg.deterministic)
    floor = cfg.delta_floor * cfg.tau ** (1.0 - cfg.gamma)
    k = reduced_kernel(deltas, sig, cfg.tau, nodes[0], floor)
    header = ("tau", *[f"delta_{i + 1}" for i in range(sig.n_pairs)],
              "re_value", "im_value", "std_error", "n_truncated", "M")
    row = (cfg.tau, *deltas, k.value.real, k.value.imag, k.std_error, k.n_truncated, k.M)
    summary = {"tau": cfg.tau, "deltas": deltas, "value": k.value, "std_error": k.std_error,
               "std_error_re": k.std_error_re, "std_error_im": k.std_error_im,
               "n_truncated": k.n_truncated, "delta_floor": floor, "M": k.M}
    return RunOutput(summary, [Table("kernel", "kernel", header, [row])])


def predicted_kind(sig: SignatureSpec):
    if not sig.even_pointwise:
        return Kind.INTEGRATED if sig.n_det == 0 else None
    if sig.n_det == 0:
        return Kind.ODD_HYPERPLANE
    if sig.n_pairs == 1 and sig.n_det == 1:
        return Kind.D3_LONGITUDINAL
    return None


def run_green_scan(cfg: RunConfig) -> RunOutput:
    sig = signature(cfg)
    lo, hi, n = cfg.delta_scan
    delta_list = np.geomspace(lo, hi, int(n))
    tmin, tmax, ntau = cfg.tau_grid
    scan = exponent_scan(odd_deltas(cfg), delta_list, sig, cfg.gamma, (tmin, tmax, int(ntau)),
                         cfg.n_steps, cfg.n_samples, cfg.regulator_eps, cfg.delta_floor,
                         cfg.seed, cov_spec(cfg), cfg.threads, cfg.deterministic, cfg.rescale,
                         cfg.subtract_reference)
    rows = [(d, tmin, tmax, g.value.real, g.value.imag, g.std_error, g.n_truncated)
            for d, g in zip(scan.deltas, scan.greens)]
    kind = predicted_kind(sig)
    pred = predict(kind, sig.n_pairs, cfg.gamma).exponent_on_square if kind else None
    fit = scan.fit
    summary = {
        "fit": {"exponent_on_square": fit.slope, "stderr": fit.slope_stderr, "r2": fit.r2,
                "chi2": fit.chi2, "intercept": fit.intercept},
        "predicted": {"kind": kind.value if kind else None, "exponent_on_square": pred},
        "deviation": fit.slope - pred if pred is not None else None,
        "truncated_fraction": scan.truncated_fraction,
        "floor_halving_shift_sigma": scan.floor_shift,
        "floor_halving_shift_max": max(scan.floor_shift) if scan.floor_shift else None,
        "noisy_nodes": sum(len(g.warnings) for g in scan.greens),
        "reference": scan.reference.value if scan.reference else None,
        "tau_grid": {"tau_min": tmin, "tau_max": tmax, "n_tau": int(ntau)},
    }
    header = ("delta", "tau_min", "tau_max", "re_value", "im_value", "std_error", "n_truncated")
    return RunOutput(summary, [Table("green_scan", "green_scan", header, rows)])


def run_exponents(cfg: RunConfig) -> RunOutput:
    preds = exponent_table(cfg.ns, [cfg.gamma])
    rows = [(p.kind.value, p.n, p.gamma, p.exponent_on_square, p.exponent_on_abs) for p in preds]
    header = ("kind", "n", "gamma", "exponent_on_square", "exponent_on_abs")
    summary = {"exponents": [dict(zip(header, r)) for r in rows]}
    return RunOutput(summary, [Table("exponents", "exponents", header, rows)])


RUNNERS = {
    "gamma-moments": run_gamma_moments,
    "scaling": run_scaling,
    "ks-scale": run_ks_scale,
    "kernel": run_kernel,
    "green-scan": run_green_scan,
    "exponents": run_exponents,
}
