import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import free_green_euclidean, free_kernel
from rcprop.covariance import CovarianceSpec
from rcprop.errors import InvalidArgumentError, NumericalError, SingularSampleError
from rcprop.gamma import GammaEnsemble, gamma_ensemble
from rcprop.paths import derive_seed, make_grid
from rcprop.propagator import (
    SignatureSpec,
    check_bracket,
    exponent_scan,
    green_reduced,
    reduced_kernel,
    tau_nodes,
)

ONE = SignatureSpec(1, (1,))
EUCL = SignatureSpec(1, (-1,))


def _const(tau, n_pairs=1):
    return [GammaEnsemble.constant(make_grid(tau, 4), tau, 2) for _ in range(n_pairs)]


@pytest.mark.parametrize("sig", [1, -1])
@pytest.mark.parametrize("delta,tau", [(0.0, 1.0), (0.7, 0.3), (2.5, 4.0), (1e-3, 1e-2)])
def test_deterministic_free_kernel(sig, delta, tau):
    k = reduced_kernel([delta], SignatureSpec(1, (sig,)), tau, _const(tau), 0.0)
    ref = free_kernel(delta, tau, sig)
    assert abs(k.value - ref) <= 1e-12 * abs(ref)
    assert k.n_truncated == 0


def test_free_factors():
    tau = 0.8
    k = reduced_kernel([0.4], SignatureSpec(1, (1,), n_det=1), tau, _const(tau), 0.0)
    ref = free_kernel(0.4, tau) * free_kernel(0.0, tau)
    assert abs(k.value - ref) <= 1e-12 * abs(ref)
    k = reduced_kernel([0.4], SignatureSpec(1, (1,), n_det=1, even_pointwise=True), tau, _const(tau), 0.0)
    ref = free_kernel(0.4, tau) * free_kernel(0.0, tau) ** 2
    assert abs(k.value - ref) <= 1e-12 * abs(ref)


def test_signature_spec_validation():
    with pytest.raises(InvalidArgumentError):
        SignatureSpec(2, (1,))
    with pytest.raises(InvalidArgumentError):
        SignatureSpec(1, (0,))
    with pytest.raises(InvalidArgumentError):
        SignatureSpec(0, ())
    assert SignatureSpec.uniform(3, -1).signs == (-1, -1, -1)


@pytest.fixture(scope="module")
def ens_pair():
    spec = CovarianceSpec(0.25)
    g = make_grid(1.0, 64)
    return [gamma_ensemble(g, spec, 20_000, derive_seed(3, k)) for k in range(2)]


def test_kernel_error_positive_and_guards(ens_pair):
    k = reduced_kernel([0.5], ONE, 1.0, ens_pair[:1], 1e-4)
    assert k.std_error > 0 and k.M + k.n_truncated == 20_000
    with pytest.raises(InvalidArgumentError):
        reduced_kernel([0.5], ONE, 1.0, ens_pair, 1e-4)
    with pytest.raises(InvalidArgumentError):
        reduced_kernel([0.5], ONE, 2.0, ens_pair[:1], 1e-4)
    short = GammaEnsemble(ens_pair[1].values[:100], ens_pair[1].hits[:100], ens_pair[1].grid, None, None)
    with pytest.raises(InvalidArgumentError):
        reduced_kernel([0.5, 0.5], SignatureSpec(2, (1, 1)), 1.0, [ens_pair[0], short], 1e-4)
    with pytest.raises(NumericalError):
        reduced_kernel([0.5], ONE, 1.0, ens_pair[:1], 1e6)


def test_singular_sample_with_zero_floor():
    g = make_grid(1.0, 4)
    e = GammaEnsemble(np.array([0.5, 0.0, -0.2]), np.zeros(3, dtype=np.int64), g, None, None)
    with pytest.raises(SingularSampleError):
        reduced_kernel([0.1], ONE, 1.0, [e], 0.0)
    assert reduced_kernel([0.1], ONE, 1.0, [e], 1e-9).n_truncated == 1


def test_zero_displacement_negative_moment(ens_pair):
    e = ens_pair[0]
    prev = None
    for f in (1e-2, 1e-3, 1e-4, 1e-5):
        k = reduced_kernel([0.0], ONE, 1.0, [e], f)
        g = e.values[np.abs(e.values) >= f]
        direct = np.mean([cmath.sqrt(2j * math.pi * x) ** -1 for x in g])
        assert abs(k.value - direct) <= 1e-12 * abs(direct)
        if prev is not None and f <= 1e-3:
            assert abs(k.value - prev.value) < 3 * k.std_error
        prev = k


def test_signature_flip_conjugates(ens_pair):
    e = ens_pair[:1]
    kp = reduced_kernel([0.0], ONE, 1.0, e, 1e-4)
    km = reduced_kernel([0.0], EUCL, 1.0, e, 1e-4)
    assert km.value == pytest.approx(kp.value.conjugate(), rel=1e-14)
    kp = reduced_kernel([0.6], ONE, 1.0, e, 1e-4)
    km = reduced_kernel([0.6], EUCL, 1.0, e, 1e-4)
    assert km.value == pytest.approx(kp.value.conjugate(), rel=1e-14)


@settings(max_examples=50)
@given(st.floats(-50, 50).filter(lambda v: abs(v) > 1e-6), st.floats(0, 5))
def test_pair_factor_flip_modulus(gam, delta):
    from rcprop.propagator import pair_factor
    a, b = pair_factor(gam, delta, 1), pair_factor(gam, delta, -1)
    assert abs(a) == pytest.approx(abs(b), rel=1e-14)
    assert b == pytest.approx(np.conj(a), rel=1e-12)


def test_factorization(ens_pair):
    d = [0.4, 0.9]
    k12 = reduced_kernel(d, SignatureSpec(2, (1, -1)), 1.0, ens_pair, 1e-4)
    k1 = reduced_kernel(d[:1], ONE, 1.0, ens_pair[:1], 1e-4)
    k2 = reduced_kernel(d[1:], EUCL, 1.0, ens_pair[1:], 1e-4)
    prod = k1.value * k2.value
    err = math.sqrt(k12.std_error**2 + (abs(k1.value) * k2.std_error) ** 2
                    + (abs(k2.value) * k1.std_error) ** 2)
    assert abs(k12.value - prod) < 3 * err


@pytest.mark.slow
def test_scaling_consistency_ratio():
    gamma = 0.25
    spec = CovarianceSpec(gamma)
    tau2 = 2 ** (2 / (1 - gamma))
    e1 = gamma_ensemble(make_grid(1.0, 64), spec, 50_000, derive_seed(90, 1))
    e2 = gamma_ensemble(make_grid(tau2, 64), spec, 50_000, derive_seed(90, 2))
    k1 = reduced_kernel([1.0], ONE, 1.0, [e1], 1e-4)
    k2 = reduced_kernel([2.0], ONE, tau2, [e2], 1e-4 * tau2 ** (1 - gamma))
    ratio = abs(k2.value) / abs(k1.value)
    err = ratio * math.hypot(k1.std_error / abs(k1.value), k2.std_error / abs(k2.value))
    assert abs(ratio - 0.5) < 3 * err


def test_tau_nodes_integrate_exactly():
    taus, w = tau_nodes(1e-3, 1e3, 400)
    assert taus[0] == pytest.approx(1e-3) and taus[-1] == pytest.approx(1e3)
    # int t**-1/2 exp(-1/t - t) dt = sqrt(pi) exp(-2)
    val = np.sum(w * taus**-0.5 * np.exp(-1 / taus - taus))
    assert val == pytest.approx(math.sqrt(math.pi) * math.exp(-2), rel=1e-8)


def test_deterministic_green_matches_closed_form():
    eps = 0.1
    g = green_reduced([1.0], EUCL, 0.0, (1e-4, 200.0, 4000), 1, 2, eps, deterministic=True)
    ref = free_green_euclidean(1.0, eps)
    assert abs(g.value - ref) <= 0.01 * abs(ref)


def test_bracket_violations():
    with pytest.raises(InvalidArgumentError, match="regulator"):
        check_bracket([1.0], 0.25, 1e-4, 100.0, 0.01)
    with pytest.raises(InvalidArgumentError, match="tau_min"):
        check_bracket([1.0], 0.25, 0.5, 1000.0, 0.01)
    with pytest.raises(InvalidArgumentError, match="tau_max"):
        check_bracket([10.0], 0.0, 1e-3, 100.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        check_bracket([0.0], 0.25, 1e-3, 1000.0, 0.01)
    with pytest.raises(InvalidArgumentError):
        green_reduced([1.0], ONE, 0.25, (0.5, 1000.0, 8), 8, 10, 0.01)


def test_noisy_node_warning():
    g = green_reduced([1.0], ONE, 0.25, (1e-3, 1000.0, 6), 16, 20, 0.01, seed=2)
    assert g.warnings and all("noisy node" in w for w in g.warnings)
    assert len(g.per_tau) == 6


def test_exponent_scan_injected_kernel():
    gamma, p = 0.25, 2.0
    kf = lambda d, t: t**-p * math.exp(-float(np.sum(d**2)) / t ** (1 - gamma))
    res = exponent_scan([1.0], np.geomspace(0.1, 1.0, 5), ONE, gamma, (1e-6, 1e9, 3000), 8, 10,
                        1e-8, kernel_fn=kf)
    assert abs(res.exponent - (1 - p) / (1 - gamma)) < 1e-6


def test_classical_n1_integrated_exponent():
    res = exponent_scan([1.0], np.geomspace(0.05, 0.5, 6), ONE, 0.0, (1e-5, 2000.0, 3000), 1, 2,
                        0.01, deterministic=True, subtract_reference=True)
    assert abs(res.exponent - 0.5) < 0.1


def test_classical_n3_integrated_exponent():
    sig = SignatureSpec.uniform(3)
    res = exponent_scan([1.0, 1.0, 1.0], np.geomspace(0.1, 0.5, 5), sig, 0.0,
                        (1e-4, 2000.0, 20000), 1, 2, 0.01, deterministic=True)
    assert abs(res.exponent - (-1.5 + 1.0)) < 0.1


def test_scan_guards():
    with pytest.raises(InvalidArgumentError):
        exponent_scan([1.0], [0.5, 0.6, 0.7, 0.8], ONE, 0.0, (1e-5, 2000.0, 100), 1, 2, 0.01,
                      deterministic=True)
    with pytest.raises(InvalidArgumentError):
        exponent_scan([1.0], [0.1, 1.0], ONE, 0.0, (1e-5, 2000.0, 100), 1, 2, 0.01,
                      deterministic=True)


def test_scan_reproducible_across_threads():
    kw = dict(direction=[1.0], delta_list=np.geomspace(0.2, 1.0, 4), sig=ONE, gamma=0.25,
              grid_spec=(1e-3, 600.0, 6), N=16, M=300, regulator_eps=0.01, seed=5)
    a = exponent_scan(threads=1, **kw)
    b = exponent_scan(threads=3, **kw)
    assert [g.value for g in a.greens] == [g.value for g in b.greens]
    assert a.fit.slope == b.fit.slope
