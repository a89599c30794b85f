"""Hidden pricing mechanisms driven by a concealed sample.

The seller draws s from the buyer's distribution and commits to charge
``payment(rule, s, report)``. The buyer accepts iff her value is at least
the expected payment, so each mechanism acts like a posted price equal to
that expectation. Rules with a report are proper: the buyer's expected
payment is minimized by reporting the statistic the rule elicits.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import distributions as D
from .distributions import CheckDist, HatDist, UniformDist
from .errors import DivergentPayment, DomainError, PropernessError
from .hiddenlp import CertReport, PiecewiseRule, expect_rule_check, expect_rule_hat
from .numerics import maximize_unimodal


@dataclass(frozen=True)
class MeanRule:
    omega: float


@dataclass(frozen=True)
class LNormRule:
    omega: float
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class CVaRRule:
    omega: float
    q: float

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise DomainError(f"q must lie in (0, 1], got {self.q}")


@dataclass(frozen=True)
class TableRule:
    """A certified step rule for unit rate, applied at rate ``lam_scale``.

    The rule is evaluated on the rescaled sample ``lam_scale * s`` and the
    result converted back to value units, ``rule(lam_scale * s) / lam_scale``;
    with ``rule`` None the payment is ``linear_c * s``. Both agree with the
    unit-rate construction at ``lam_scale = 1`` and keep prices homogeneous.
    """

    rule: Optional[PiecewiseRule]
    lam_scale: float
    linear_c: Optional[float] = None

    def __post_init__(self):
        if self.rule is None and self.linear_c is None:
            raise DomainError("a table rule needs a step rule or a linear coefficient")


@dataclass(frozen=True)
class UniformRule:
    """Charge ``discount * s``; on U[a, b] the expected price is
    ``threshold_coeff * (a + b)``."""

    discount: Fraction = Fraction(7, 8)
    threshold_coeff: Fraction = Fraction(7, 16)


ScoringRule = Union[MeanRule, LNormRule, CVaRRule, TableRule, UniformRule]


def has_report(rule: ScoringRule) -> bool:
    return isinstance(rule, (LNormRule, CVaRRule))


def payment(rule: ScoringRule, s, report: Optional[float] = None):
    """Amount charged for sample ``s`` (scalar or array) given the report."""
    if isinstance(rule, MeanRule):
        return rule.omega * s
    if isinstance(rule, UniformRule):
        return float(rule.discount) * s
    if isinstance(rule, LNormRule):
        if report is None or not report > 0:
            raise DomainError("the norm rule needs a positive report")
        x, eta = float(report), rule.eta
        return rule.omega * ((eta - 1.0) * x + np.power(s, eta) / x ** (eta - 1.0)) / eta
    if isinstance(rule, CVaRRule):
        if report is None:
            raise DomainError("the CVaR rule needs a report")
        x = float(report)
        return rule.omega * (x + np.maximum(np.asarray(s) - x, 0.0) / rule.q)
    if isinstance(rule, TableRule):
        s_arr = np.asarray(s, dtype=float)
        if rule.rule is None:
            out = rule.linear_c * s_arr
        else:
            out = rule.rule(rule.lam_scale * s_arr) / rule.lam_scale
        return float(out) if np.ndim(s) == 0 else out
    raise DomainError(f"unknown rule {rule!r}")


@functools.lru_cache(maxsize=256)
def _moment(dist, eta: float) -> float:
    # distributions are frozen dataclasses, so a report search reuses one moment
    return D.lnorm(dist, eta) ** eta


def _expected_payment(rule: ScoringRule, dist, x: Optional[float]) -> float:
    if isinstance(rule, (MeanRule, UniformRule)):
        w = rule.omega if isinstance(rule, MeanRule) else float(rule.discount)
        return w * D.mean(dist)
    if isinstance(rule, LNormRule):
        eta = rule.eta
        moment = _moment(dist, eta)
        return rule.omega * ((eta - 1.0) * x + moment / x ** (eta - 1.0)) / eta
    if isinstance(rule, CVaRRule):
        return rule.omega * (x + dist.tail_integral(x) / rule.q)
    if isinstance(rule, TableRule):
        mu = rule.lam_scale
        if rule.rule is None:
            return rule.linear_c * D.mean(dist)
        if isinstance(dist, HatDist) and D.is_exp_branch(dist.alpha):
            if dist.lam != mu:
                raise DomainError("table rule scale must match the shifted exponential's rate")
            return expect_rule_hat(rule.rule, mu * dist.b) / mu
        if isinstance(dist, CheckDist) and D.is_exp_branch(dist.alpha):
            return expect_rule_check(rule.rule, dist.lam / mu, mu * dist.a) / mu
        raise DomainError("table rules are evaluated on alpha = 1 boundary distributions")
    raise DomainError(f"unknown rule {rule!r}")


@dataclass(frozen=True)
class BestReport:
    x: Optional[float]
    expected_payment: float
    statistic: Optional[float] = None


def _bracket_convex(phi, lo: float) -> float:
    """Upper end of a bracket for the minimizer of a convex function on [lo, inf)."""
    hi = max(2.0 * lo, 1.0)
    while phi(2.0 * hi) < phi(hi):
        hi *= 2.0
        if hi > 1e15:
            raise DivergentPayment("expected payment decreases without bound in the report")
    return 2.0 * hi


def best_report(rule: ScoringRule, dist, rel_tol: float = 1e-5) -> BestReport:
    """Report minimizing the expected payment, found by golden search.

    For the norm and CVaR rules the minimizer must coincide with the
    statistic they elicit (the norm, resp. VaR_q) and the minimal payment
    with omega times the norm (resp. CVaR_q); a mismatch beyond ``rel_tol``
    raises PropernessError.
    """
    if not has_report(rule):
        return BestReport(None, _expected_payment(rule, dist, None))

    if isinstance(rule, LNormRule):
        stat = D.lnorm(dist, rule.eta)
        if math.isinf(stat):
            raise DivergentPayment(f"E[s^{rule.eta}] is infinite")
        target_x, target_pay = stat, rule.omega * stat
        lo = 1e-12 * max(D.mean(dist), 1e-300)
    else:
        target_x = D.var_q(dist, rule.q)
        target_pay = rule.omega * D.cvar_q(dist, rule.q)
        if math.isinf(target_pay):
            raise DivergentPayment("CVaR is infinite")
        lo = 0.0

    def phi(x):
        return _expected_payment(rule, dist, x)

    hi = _bracket_convex(phi, max(lo, 1e-300))
    x, neg = maximize_unimodal(lambda x: -phi(x), lo, hi, xtol=1e-13 * hi)
    pay = -neg
    scale = max(abs(target_x), 1e-300)
    if abs(x - target_x) > rel_tol * scale + 1e-12 or abs(pay - target_pay) > rel_tol * abs(target_pay):
        raise PropernessError(
            f"minimizing report {x} / payment {pay} differ from the elicited "
            f"{target_x} / {target_pay}"
        )
    return BestReport(x, pay, target_x)


# ---------------------------------------------------------------------------
# simulation


@dataclass
class SimReport:
    n: int
    seed: int
    report: Optional[float]
    expected_price: float
    price_mc: float
    price_ci: float
    acceptance_prob: float
    acceptance_mc: float
    acceptance_ci: float
    revenue: float
    revenue_mc: float
    revenue_ci: float
    opt: float
    ratio_vs_opt: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _moments(chunks):
    """Mean and standard error from batch sums of x and x^2."""
    n = sum(c[0] for c in chunks)
    s1 = math.fsum(c[1] for c in chunks)
    s2 = math.fsum(c[2] for c in chunks)
    m = s1 / n
    var = max(s2 / n - m * m, 0.0) * n / max(n - 1, 1)
    return m, math.sqrt(var / n)


def simulate_mechanism(
    rule: ScoringRule,
    dist,
    v_dist=None,
    n: int = 1_000_000,
    seed: int = 0,
    batch: int = 200_000,
) -> SimReport:
    """Analytic price, acceptance and revenue, each cross-checked by Monte Carlo.

    Samples come from independent counter-based streams: stream 0 for the
    hidden sample, stream 1 for the buyer's value. Intervals are 3 sigma.
    """
    v_dist = dist if v_dist is None else v_dist
    br = best_report(rule, dist)
    price = br.expected_payment
    if math.isinf(price) or math.isnan(price):
        raise DivergentPayment("the expected payment is infinite")
    accept = v_dist.survival_ge(price)
    rev = price * accept
    _, opt = D.opt_price(v_dist)

    rng_s = D.rng_for(seed, 0)
    rng_v = D.rng_for(seed, 1)
    pay_chunks, acc_chunks, rev_chunks = [], [], []
    done = 0
    while done < n:
        m = min(batch, n - done)
        s = dist.quantile_np(1.0 - rng_s.random(m))
        v = v_dist.quantile_np(1.0 - rng_v.random(m))
        pay = np.asarray(payment(rule, s, br.x), dtype=float)
        acc = (v >= price).astype(float)
        r = pay * acc
        for store, x in ((pay_chunks, pay), (acc_chunks, acc), (rev_chunks, r)):
            store.append((m, float(x.sum()), float((x * x).sum())))
        done += m
    price_mc, price_se = _moments(pay_chunks)
    acc_mc, acc_se = _moments(acc_chunks)
    rev_mc, rev_se = _moments(rev_chunks)
    return SimReport(
        n=n, seed=seed, report=br.x,
        expected_price=price, price_mc=price_mc, price_ci=3 * price_se,
        acceptance_prob=accept, acceptance_mc=acc_mc, acceptance_ci=3 * acc_se,
        revenue=rev, revenue_mc=rev_mc, revenue_ci=3 * rev_se,
        opt=opt, ratio_vs_opt=rev / opt,
    )


def table_rule_for(cert: CertReport, dist: HatDist) -> TableRule:
    """The certified rule for an exponential shifted by ``dist.b``: the step
    rule of the smallest grid shift above lam*b, or the linear rule past the grid."""
    if not (isinstance(dist, HatDist) and D.is_exp_branch(dist.alpha)):
        raise DomainError("certified rules apply to alpha = 1 shifted exponentials")
    shift = dist.lam * dist.b
    if shift > cert.grid.b_max:
        return TableRule(None, dist.lam, cert.linear.c)
    rule = cert.rule_for_shift(shift)
    if rule is None:
        raise DomainError(f"no certified rule for shift {shift}")
    return TableRule(rule, dist.lam)


# ---------------------------------------------------------------------------
# the uniform mechanism


def uniform_mechanism_ratio(a, b):
    """Ratio of the 7/8-discounted mean price on U[a, b] to the optimal revenue.

    Exact for Fraction inputs.
    """
    if not 0 <= a <= b or b <= 0:
        raise DomainError(f"need 0 <= a <= b and b > 0, got a={a}, b={b}")
    p = Fraction(7, 16) * (a + b)
    if b == a:
        accept = 1 if p <= a else 0
    else:
        accept = min(max((b - p) / (b - a), 0), 1)
    rev = p * accept
    opt = a if 2 * a >= b else b * b / (4 * (b - a))
    return rev / opt


def uniform_worst(step: float = 1e-4, tol: float = 1e-6) -> tuple:
    """Minimum ratio over U[a, 1], a in [0, 1], and the near-minimizing a values.

    Every local minimum of the grid scan is refined by golden search; those
    within ``tol`` of the global minimum form the argmin set.
    """
    n = int(round(1.0 / step))
    a = np.arange(n + 1) / n
    r = np.array([float(uniform_mechanism_ratio(float(x), 1.0)) for x in a])
    local = [i for i in range(n + 1)
             if (i == 0 or r[i] <= r[i - 1]) and (i == n or r[i] <= r[i + 1])]
    refined = []
    for i in local:
        lo, hi = a[max(i - 1, 0)], a[min(i + 1, n)]
        x, neg = maximize_unimodal(lambda t: -float(uniform_mechanism_ratio(t, 1.0)), float(lo),
                                   float(hi), xtol=1e-12)
        cand = [(float(r[i]), float(a[i])), (-neg, x)]
        refined.append(min(cand))
    best = min(v for v, _ in refined)
    argmin = sorted(x for v, x in refined if v <= best + tol)
    return best, argmin
