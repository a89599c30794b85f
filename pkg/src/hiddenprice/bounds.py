"""Upper bounds on what any pricing rule can guarantee."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import distributions as D
from .distributions import HatDist
from .numerics import DEFAULT_TOL, Tolerances, adaptive_simpson, find_root_monotone, maximize_unimodal


@dataclass
class UpperBoundReport:
    bound: float
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"bound": self.bound, "witness": self.witness}


def uniform_upper() -> UpperBoundReport:
    """No rule beats 7/8 on uniform distributions.

    Averaging the two tight instances U[0.6, 1] and U[1, 1] with weight 1.4
    in total caps the expected payment at 1 + integral of (5v - 3.5)^+ over
    [0.6, 1], which equals 1.225.
    """
    # triangle with base 1 - 0.7 and height 5 * 0.3
    area = Fraction(5, 2) * Fraction(3, 10) ** 2
    exact = (1 + area) / Fraction(14, 10)
    quad = adaptive_simpson(lambda v: max(5 * v - 3.5, 0.0), 0.6, 1.0, 1e-13)
    return UpperBoundReport(
        float(exact),
        {"integral": float(area), "integral_quadrature": quad, "total": float(1 + area),
         "exact": str(exact)},
    )


def _g(c: float) -> float:
    if c == 0:
        return 1.0
    return (c + 1.0) / (c * (c + 1.0) * math.log1p(1.0 / c) + 1.0)


def gamma_alpha_upper(alpha: float, tol: Tolerances = DEFAULT_TOL) -> UpperBoundReport:
    """min over c >= alpha/(2-alpha) of (c+1) / (c(c+1) ln((c+1)/c) + 1)."""
    alpha = D.check_alpha(alpha)
    c_lo = alpha / (2.0 - alpha)
    hi = c_lo + 1.0
    while _g(2.0 * hi) < _g(hi):
        hi *= 2.0
    c_star, neg = maximize_unimodal(lambda c: -_g(c), c_lo, 2.0 * hi, xtol=1e-12)
    h = 1e-7
    slope_at_edge = (_g(c_lo + h) - _g(c_lo)) / h
    boundary = slope_at_edge >= 0
    if boundary:
        c_star = c_lo
    return UpperBoundReport(
        _g(c_star),
        {"c_star": c_star, "c_min": c_lo, "at_boundary": boundary},
    )


def concave_upper(
    alpha: float = 1.0, lam: float = 1.0, b: float = 1.7, tol: Tolerances = DEFAULT_TOL,
    bracket: tuple = (0.0, 1.0),
) -> UpperBoundReport:
    """Largest Gamma for which sampling the shifted distribution can still be priced
    at its mean without dropping below Gamma * OPT.

    A concave rule charges at least Gamma times the sample's mean on average,
    and that price must stay below UB(F, Gamma). The left side grows and the
    right side shrinks in Gamma, so their crossing is the bound.
    """
    dist = HatDist(alpha, lam, b)
    m = D.mean(dist)
    if math.isinf(m):
        return UpperBoundReport(0.0, {"divergent_mean": True,
                                      "reason": "mean of the maximal family is infinite"})

    def gap(gamma):
        return D.critical_interval(dist, gamma, tol).ub - gamma * m

    lo, hi = bracket
    root = find_root_monotone(gap, lo, hi, 0.0, tol)
    return UpperBoundReport(root, {"lambda": lam, "b": b, "mean": m, "ub_at_bound": root * m,
                                   "divergent_mean": False})


def upper_bound_curve(alpha_grid: Sequence[float]) -> list:
    """Rows (alpha, bound, c_star) of gamma_alpha_upper along a grid."""
    rows = []
    for a in alpha_grid:
        rep = gamma_alpha_upper(a)
        rows.append((float(a), rep.bound, rep.witness["c_star"]))
    return rows
