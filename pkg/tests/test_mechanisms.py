import math
from fractions import Fraction

import numpy as np
import pytest

from hiddenprice import distributions as D
from hiddenprice import mechanisms as M
from hiddenprice import reduction as R
from hiddenprice.distributions import CheckDist, HatDist, UniformDist
from hiddenprice.errors import DivergentPayment, DomainError

from conftest import GAMMA_COARSE


def random_boundary(rng):
    alpha = float(rng.choice([0.5, 0.8, 1.0]))
    if rng.uniform() < 0.5:
        return CheckDist(alpha, rng.uniform(0.0, 1.0 / alpha), rng.uniform(0.5, 4.0))
    return HatDist(alpha, rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0))


# --- payments ----------------------------------------------------------------


def test_payment_examples():
    assert M.payment(M.CVaRRule(1.0, 0.5), 2.0, 1.0) == pytest.approx(3.0)
    for x in (0.3, 1.0, 4.0):
        assert M.payment(M.LNormRule(1.0, 2.0), x, x) == pytest.approx(x)
    assert M.payment(M.MeanRule(7 / 8), 1.6) == pytest.approx(1.4)
    assert M.payment(M.UniformRule(), 1.6) == pytest.approx(1.4)


def test_payment_is_vectorized():
    s = np.array([0.5, 1.0, 3.0])
    out = M.payment(M.CVaRRule(0.9, 0.4), s, 1.0)
    assert out == pytest.approx([0.9 * 1.0, 0.9 * 1.0, 0.9 * (1.0 + 2.0 / 0.4)])


def test_norm_rule_needs_positive_report():
    with pytest.raises(DomainError):
        M.payment(M.LNormRule(1.0, 2.0), 1.0, 0.0)
    with pytest.raises(DomainError):
        M.LNormRule(1.0, -1.0)
    with pytest.raises(DomainError):
        M.CVaRRule(1.0, 0.0)


def test_table_rule_scales_the_sample(coarse_cert):
    rule = coarse_cert.rule_for_shift(2.0)
    tr = M.TableRule(rule, 1.5)
    assert M.payment(tr, 2.0) == pytest.approx(rule(3.0) / 1.5)
    assert M.payment(M.TableRule(rule, 1.0), 2.0) == rule(2.0)
    lin = M.TableRule(None, 2.0, linear_c=0.85)
    assert M.payment(lin, 3.0) == pytest.approx(0.85 * 3.0)


def test_table_rule_prices_are_homogeneous(coarse_cert):
    # the same normalized instance at two rates: prices scale by 1/rate
    base = HatDist(1, 1.0, 3.0)
    fast = HatDist(1, 2.5, 3.0 / 2.5)
    p1 = M.best_report(M.table_rule_for(coarse_cert, base), base).expected_payment
    p2 = M.best_report(M.table_rule_for(coarse_cert, fast), fast).expected_payment
    assert p2 == pytest.approx(p1 / 2.5, rel=1e-12)


# --- best reports and properness ---------------------------------------------


@pytest.mark.parametrize("q", [0.2, 0.5, 0.92])
@pytest.mark.parametrize("b", [1.0, 2.5])
def test_cvar_best_report_on_shifted_exponential(q, b):
    br = M.best_report(M.CVaRRule(1.0, q), HatDist(1, 1, b))
    assert br.x == pytest.approx(b - math.log(q), rel=1e-6)
    assert br.expected_payment == pytest.approx(b + 1 - math.log(q), rel=1e-9)


def test_norm_best_report_on_point_mass():
    br = M.best_report(M.LNormRule(1.0, 2.0), D.point_mass(1.7))
    assert br.x == pytest.approx(1.7, rel=1e-6)
    assert br.expected_payment == pytest.approx(1.7, rel=1e-9)


def test_mean_rule_has_no_report():
    d = HatDist(1, 2, 1)
    br = M.best_report(M.MeanRule(0.823), d)
    assert br.x is None
    assert br.expected_payment == pytest.approx(0.823 * 1.5)


def test_properness_on_random_distributions():
    rng = np.random.default_rng(31)
    for _ in range(50):
        dist = random_boundary(rng)
        for rule in (M.CVaRRule(rng.uniform(0.7, 1.0), rng.uniform(0.3, 1.0)),
                     M.LNormRule(rng.uniform(0.7, 1.0), rng.uniform(1.0, 2.5))):
            if isinstance(rule, M.LNormRule) and math.isinf(D.lnorm(dist, rule.eta)):
                continue
            br = M.best_report(rule, dist)
            for dx in rng.normal(0.0, 0.3, 100):
                x = br.x * math.exp(dx)
                assert br.expected_payment <= M._expected_payment(rule, dist, x) + 1e-12


def test_expected_payment_matches_integral_of_payment():
    from hiddenprice.numerics import integrate
    dist, rule, x = HatDist(0.6, 1.2, 1.5), M.LNormRule(0.9, 1.7), 2.3
    # E[g(s)] = g(0) + integral of g'(v) P[s >= v]
    g = lambda v: M.payment(rule, v, x)
    dg = lambda v: 0.9 * v ** 0.7 / x ** 0.7
    oracle = g(0.0) + integrate(lambda v: dg(v) * dist.survival_ge(v), 0.0, math.inf, 1e-12)
    assert M._expected_payment(rule, dist, x) == pytest.approx(oracle, rel=1e-8)


def test_divergent_payment():
    with pytest.raises(DivergentPayment):
        M.simulate_mechanism(M.MeanRule(0.9), HatDist(0.0, 1.0, 2.0), n=10)
    with pytest.raises(DivergentPayment):
        M.best_report(M.LNormRule(0.9, 2.0), HatDist(0.3, 1.0, 2.0))


# --- simulation --------------------------------------------------------------


def test_mean_rule_on_worst_witness():
    cert = R.worst_ratio_normalized(R.StatisticPolicy(R.Mean(), 0.823))
    rep = M.simulate_mechanism(M.MeanRule(0.823), cert.witness(), n=10**6, seed=1)
    assert rep.ratio_vs_opt == pytest.approx(0.771, abs=3e-3)
    assert abs(rep.price_mc - rep.expected_price) <= rep.price_ci


def test_mean_rule_on_point_mass():
    rep = M.simulate_mechanism(M.MeanRule(1.0), D.point_mass(2.0), n=1000)
    assert rep.expected_price == 2.0 and rep.acceptance_prob == 1.0 and rep.ratio_vs_opt == 1.0
    assert rep.price_mc == 2.0 and rep.price_ci == 0.0


GOLDEN = [
    (M.MeanRule(0.823), CheckDist(1, 0.4294, 1.0)),
    (M.MeanRule(0.9), HatDist(0.5, 1.5, 2.0)),
    (M.CVaRRule(0.787, 0.92), HatDist(1, 2.0, 1.0)),
    (M.CVaRRule(0.8, 0.5), CheckDist(0.7, 0.9, 1.3)),
    (M.LNormRule(0.805, 1.37), HatDist(1, 1.0, 1.0)),
    (M.LNormRule(0.9, 2.0), CheckDist(1, 0.6, 2.0)),
    (M.UniformRule(), UniformDist(0.6, 1.0)),
]


@pytest.mark.parametrize("rule, dist", GOLDEN)
def test_analytic_price_within_monte_carlo_interval(rule, dist):
    rep = M.simulate_mechanism(rule, dist, n=10**6, seed=20)
    assert abs(rep.price_mc - rep.expected_price) <= rep.price_ci
    assert abs(rep.acceptance_mc - rep.acceptance_prob) <= rep.acceptance_ci + 1e-12
    assert rep.revenue == rep.expected_price * rep.acceptance_prob
    assert rep.ratio_vs_opt == pytest.approx(rep.revenue / rep.opt)


def test_simulation_is_reproducible_and_batch_independent():
    rule, dist = M.CVaRRule(0.8, 0.5), HatDist(1, 1.0, 1.0)
    a = M.simulate_mechanism(rule, dist, n=50_000, seed=4, batch=50_000)
    b = M.simulate_mechanism(rule, dist, n=50_000, seed=4, batch=7_000)
    assert a.price_mc == pytest.approx(b.price_mc, rel=1e-12)
    assert a.to_dict() == M.simulate_mechanism(rule, dist, n=50_000, seed=4, batch=50_000).to_dict()


def test_separate_value_distribution():
    rep = M.simulate_mechanism(M.MeanRule(0.8), HatDist(1, 1, 1), v_dist=UniformDist(0, 4), n=10**5)
    assert rep.acceptance_prob == pytest.approx((4 - 1.6) / 4)


def test_certified_rules_on_shifted_exponentials(coarse_cert):
    rng = np.random.default_rng(77)
    ratios = []
    for k in range(50):
        lam = float(rng.uniform(0.3, 3.0))
        shift = float(rng.uniform(1.0, 9.9)) if k < 45 else float(rng.uniform(10.5, 30.0))
        dist = HatDist(1, lam, shift / lam)
        tr = M.table_rule_for(coarse_cert, dist)
        rep = M.simulate_mechanism(tr, dist, n=20_000, seed=k)
        assert abs(rep.price_mc - rep.expected_price) <= rep.price_ci
        ratios.append(rep.ratio_vs_opt)
    assert min(ratios) >= GAMMA_COARSE - 0.01


# --- uniform mechanism -------------------------------------------------------


def test_uniform_ratio_examples():
    assert M.uniform_mechanism_ratio(Fraction(3, 5), Fraction(1)) == Fraction(7, 8)
    assert M.uniform_mechanism_ratio(Fraction(1), Fraction(1)) == Fraction(7, 8)
    r = M.uniform_mechanism_ratio(Fraction(0), Fraction(1))
    assert r == Fraction(63, 64)
    # oracle: revenue (7/16)(9/16) against the grid optimum of p (1 - p)
    p = np.linspace(0, 1, 100001)
    assert float(r) == pytest.approx((7 / 16) * (9 / 16) / np.max(p * (1 - p)), abs=1e-9)


def test_uniform_worst_case():
    ratio, argmin = M.uniform_worst()
    assert ratio == pytest.approx(0.875, abs=1e-6)
    assert any(abs(a - 0.6) < 1e-3 for a in argmin)
    assert any(abs(a - 1.0) < 1e-3 for a in argmin)


def test_uniform_ratio_is_scale_free():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = sorted(rng.uniform(0, 5, 2))
        beta = rng.uniform(0.1, 10)
        assert float(M.uniform_mechanism_ratio(a, b)) == pytest.approx(
            float(M.uniform_mechanism_ratio(beta * a, beta * b)), rel=1e-12)
        assert float(M.uniform_mechanism_ratio(a, b)) >= 0.875 - 1e-12
