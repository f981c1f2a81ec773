"""Closed-form short-distance exponents of the averaged Green's function.

Every exponent is the power of the *squared* distance, ``G ~ (dx**2)**p``;
``on_abs`` converts to the power of ``|dx|``.  ``n`` is the number of
(odd, even) coordinate pairs, ``d = 2n``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .covariance import GAMMA_MAX
from .errors import InvalidArgumentError


class Kind(str, enum.Enum):
    INTEGRATED = "Integrated"          # even coordinates integrated out
    ODD_HYPERPLANE = "OddHyperplane"   # approach along (x-y)_e = 0
    EVEN_HYPERPLANE = "EvenHyperplane" # approach along (x-y)_o = 0
    PERTURBATIVE_H = "PerturbativeH"   # first order in the metric perturbation
    D3_LONGITUDINAL = "D3Longitudinal" # d = 3, x2 - y2 = x3 - y3 = 0
    D3_TRANSVERSE = "D3Transverse"     # d = 3, x1 = y1


@dataclass(frozen=True)
class ExponentPrediction:
    kind: Kind
    n: int
    gamma: float
    exponent_on_square: float

    @property
    def exponent_on_abs(self) -> float:
        return 2.0 * self.exponent_on_square


def predicted_exponent(kind, n: int, gamma: float) -> float:
    kind = Kind(kind)
    if not (0.0 <= gamma < GAMMA_MAX):
        raise InvalidArgumentError(f"gamma must lie in [0, {GAMMA_MAX}), got {gamma!r}")
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    g = 1.0 - gamma
    if kind is Kind.INTEGRATED:
        return -n / 2 + 1 / g
    if kind is Kind.ODD_HYPERPLANE:
        return -n / 2 + (1 - n / 2) / g
    if kind is Kind.EVEN_HYPERPLANE:
        return -n / 2 + 1 - n / 2 * g
    if kind is Kind.PERTURBATIVE_H:
        return -n + 1 + 0.5 * (2 - n) * gamma / g
    if kind is Kind.D3_LONGITUDINAL:
        return -0.5
    return (gamma - 1) / 2


def predict(kind, n: int, gamma: float) -> ExponentPrediction:
    return ExponentPrediction(Kind(kind), int(n), float(gamma), predicted_exponent(kind, n, gamma))


def exponent_table(ns, gammas) -> list:
    """Every pair-based kind for each ``(n, gamma)``, then the d = 3 kinds (n = 1)."""
    d3 = (Kind.D3_LONGITUDINAL, Kind.D3_TRANSVERSE)
    rows = []
    for gamma in gammas:
        rows += [predict(k, n, gamma) for n in ns for k in Kind if k not in d3]
        rows += [predict(k, 1, gamma) for k in d3]
    return rows
