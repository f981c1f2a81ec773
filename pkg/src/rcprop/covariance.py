"""Covariance G of the random coefficient fields.

Production runs use the regularized power law

    G(x) = amplitude * (x**2 + epsilon**2) ** (-gamma)

and the spectral representation

    G(x) = c * 2 * int_0^nu_max nu**(gamma/2 - 1) cos(nu x**4) dnu

is kept as an independent cross-check.  The constant ``c`` is fixed so that
the spectral form tends to ``amplitude * |x|**(-2 gamma)`` as ``nu_max``
grows; only ratios and slopes of the spectral form are physically
meaningful.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import InvalidArgumentError, QuadratureError, SingularArgumentError

GAMMA_MAX = 0.5
QUAD_RTOL = 1e-6


class CovForm(str, enum.Enum):
    POWER = "power"
    SPECTRAL = "spectral"


@dataclass(frozen=True)
class CovarianceSpec:
    gamma: float
    epsilon: float = 0.0
    form: CovForm = CovForm.POWER
    nu_max: float = 1e6
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "form", CovForm(self.form))
        if not (0.0 <= self.gamma < GAMMA_MAX):
            raise InvalidArgumentError(
                f"gamma must lie in [0, {GAMMA_MAX}) for the stochastic integral to exist, "
                f"got {self.gamma!r}"
            )
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise InvalidArgumentError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        if not (self.amplitude > 0.0 and math.isfinite(self.amplitude)):
            raise InvalidArgumentError(f"amplitude must be positive, got {self.amplitude!r}")
        if not self.nu_max > 0.0:
            raise InvalidArgumentError(f"nu_max must be positive, got {self.nu_max!r}")

    @property
    def is_scale_free(self) -> bool:
        """Exact homogeneity holds (power law without regulator)."""
        return self.form is CovForm.POWER and self.epsilon == 0.0


def g_power(x, spec: CovarianceSpec):
    """Regularized power-law covariance; accepts scalars or arrays."""
    if spec.form is not CovForm.POWER:
        raise InvalidArgumentError("g_power needs a power-law CovarianceSpec")
    x = np.asarray(x, dtype=float)
    if spec.gamma == 0.0:
        out = np.full(x.shape, spec.amplitude)
        return float(out) if out.ndim == 0 else out
    r2 = x * x + spec.epsilon**2
    if np.any(r2 == 0.0):
        raise SingularArgumentError("G(0) is infinite for epsilon = 0 and gamma > 0")
    out = spec.amplitude * r2 ** (-spec.gamma)
    return float(out) if out.ndim == 0 else out


def _spectral_norm(gamma: float) -> float:
    a = gamma / 2
    return 1.0 / (2.0 * special.gamma(a) * math.cos(math.pi * a / 2))


def g_spectral(x: float, spec: CovarianceSpec, n_quad: int = 200, phase_sign: int = 1) -> float:
    """Spectral covariance by adaptive quadrature.

    The integrable ``nu -> 0`` endpoint is removed by ``nu = u**(1/a)`` with
    ``a = gamma/2`` on the first oscillation; the remainder uses QAWF (cosine
    weight on a half line).  ``phase_sign = -1`` evaluates with
    ``cos(-nu x**4)``, which must agree because cos is even.  ``n_quad``
    bounds the number of subintervals (cycles for the half-line parts).
    """
    if spec.form is not CovForm.SPECTRAL:
        raise InvalidArgumentError("g_spectral needs a spectral CovarianceSpec")
    if not (0.0 < spec.gamma < GAMMA_MAX):
        raise InvalidArgumentError("spectral form requires 0 < gamma < 0.5")
    if x == 0.0:
        raise SingularArgumentError("spectral covariance diverges at x = 0")
    if not math.isfinite(spec.nu_max):
        raise InvalidArgumentError("spectral form needs a finite nu_max")
    a = spec.gamma / 2
    y = phase_sign * float(x) ** 4
    nu1 = min(spec.nu_max, 1.0 / abs(y))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            head, head_err = integrate.quad(
                lambda u: math.cos(u ** (1.0 / a) * y), 0.0, nu1**a,
                epsabs=0.0, epsrel=QUAD_RTOL / 10, limit=n_quad,
            )
            head, head_err = head / a, head_err / a
            tail, tail_err = 0.0, 0.0
            if spec.nu_max > nu1:
                # QAWF on [nu1, inf) minus QAWF on [nu_max, inf); a direct QAWO
                # over ~nu_max*y radians loses everything to roundoff.
                scale = nu1 ** (a - 1.0) / abs(y)
                tol = QUAD_RTOL / 100 * scale
                f = lambda nu: nu ** (a - 1.0)
                t1, e1 = integrate.quad(f, nu1, np.inf, weight="cos", wvar=y,
                                        epsabs=tol, limlst=n_quad)
                t2, e2 = integrate.quad(f, spec.nu_max, np.inf, weight="cos", wvar=y,
                                        epsabs=tol, limlst=n_quad)
                tail, tail_err = t1 - t2, e1 + e2
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"spectral quadrature did not converge: {exc}") from exc
    total = head + tail
    err = head_err + tail_err
    if not err <= QUAD_RTOL * abs(total):
        raise QuadratureError(
            f"spectral quadrature error {err:.3g} exceeds target for x={x}", estimate=err
        )
    return spec.amplitude * 2.0 * total * _spectral_norm(spec.gamma)
