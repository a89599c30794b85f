import math

import numpy as np
import pytest

from hiddenprice import distributions as D
from hiddenprice import hiddenlp as H
from hiddenprice.distributions import CheckDist, HatDist
from hiddenprice.errors import DomainError
from hiddenprice.numerics import integrate

from conftest import GAMMA_COARSE, V_COARSE

E = math.e
SMALL = H.GridSpec(delta_a=0.5, delta_lambda=0.1, delta_b=0.5, a_max=8.0, b_max=4.0)


def random_rule(rng, grid=SMALL):
    steps = rng.exponential(0.3, grid.A.size) * (rng.uniform(size=grid.A.size) < 0.6)
    return H.PiecewiseRule(grid, tuple(np.cumsum(steps)))


def staircase(grid):
    return H.PiecewiseRule(grid, tuple(grid.A))


# --- grids and rules ---------------------------------------------------------


def test_grid_points():
    g = H.COARSE
    assert g.A[0] == 1.0 and g.A[-1] == 20.0 and g.A.size == 191
    assert g.L.size == 51 and g.B.size == 91
    assert g.B[10] == 2.0
    with pytest.raises(DomainError):
        H.GridSpec(a_max=5.0, b_max=10.0)
    with pytest.raises(DomainError):
        H.GridSpec(delta_a=0.0)


def test_fine_profile_constants():
    g = H.PROFILES["fine"]
    assert (g.delta_a, g.delta_lambda, g.delta_b) == (0.01, 0.001, 0.001)
    assert g.a_max == 20.0 and g.b_max == 10.0


def test_rule_must_be_nondecreasing():
    with pytest.raises(DomainError):
        H.PiecewiseRule(SMALL, tuple(np.linspace(2, 1, SMALL.A.size)))


def test_rule_evaluation_and_tail():
    rule = staircase(SMALL)
    assert rule(1.0) == 1.0
    assert rule(1.2) == 1.5  # next grid point at or above s
    assert rule(9.0) == pytest.approx(8.0 + E * 1.0)


# --- expectations of step rules ----------------------------------------------


def test_check_point_mass_picks_next_grid_value():
    rule = random_rule(np.random.default_rng(1))
    A, v = SMALL.A, rule.values
    for i in range(1, A.size):
        a = 0.5 * (A[i - 1] + A[i])
        assert H.expect_rule_check(rule, 0.0, a) == pytest.approx(v[i], abs=1e-14)
        assert H.expect_rule_check(rule, 0.0, A[i]) == pytest.approx(v[i], abs=1e-14)


def test_constant_rule_expectations():
    c = 2.3
    rule = H.PiecewiseRule(SMALL, (c,) * SMALL.A.size)
    for lam, a in ((0.0, 1.0), (0.4, 3.3), (1.0, 8.0)):
        assert H.expect_rule_check(rule, lam, a) == pytest.approx(c, abs=1e-14)
    for b in (1.0, 2.2, 4.0):
        tail = integrate(lambda s: E * (s - 8.0) * math.exp(-(s - b)), 8.0, math.inf, 1e-13)
        assert H.expect_rule_hat(rule, b) == pytest.approx(c + tail, abs=1e-10)
        assert H.expect_rule_hat(rule, b) == pytest.approx(c + E * math.exp(b - 8.0), abs=1e-14)


def test_staircase_against_monte_carlo():
    g = H.GridSpec(delta_a=0.1, a_max=20.0, b_max=10.0)
    rule = staircase(g)
    dist = CheckDist(1, 0.3, 4.0)
    s = D.sample(dist, rng_seed=2, n=10**6)
    h = rule(s)
    exact = H.expect_rule_check(rule, 0.3, 4.0)
    assert abs(h.mean() - exact) <= 3 * h.std() / math.sqrt(h.size)


def test_staircase_under_shifted_exponential():
    g = H.GridSpec(delta_a=0.01, a_max=20.0, b_max=10.0)
    v = H.expect_rule_hat(staircase(g), 1.0)
    assert abs(v - 2.0) <= g.delta_a
    assert v >= 2.0  # the staircase rounds up


def test_hat_expectation_against_quadrature():
    rng = np.random.default_rng(8)
    rule = random_rule(rng)
    for b in (1.0, 1.7, 3.5):
        f = lambda s: rule(s) * math.exp(-(s - b))
        pts = [b] + [a for a in SMALL.A if a > b]
        oracle = sum(integrate(f, lo, hi, 1e-12) for lo, hi in zip(pts, pts[1:]))
        oracle += integrate(f, pts[-1], math.inf, 1e-12)
        assert H.expect_rule_hat(rule, b) == pytest.approx(oracle, abs=1e-8)


def test_check_is_constant_inside_a_grid_cell():
    rng = np.random.default_rng(12)
    A = SMALL.A
    for _ in range(200):
        rule = random_rule(rng)
        i = int(rng.integers(1, A.size))
        a = float(rng.uniform(A[i - 1], A[i]))
        lam = float(rng.uniform(0, 1))
        if a <= A[i - 1]:
            continue
        assert H.expect_rule_check(rule, lam, a) == H.expect_rule_check(rule, lam, A[i])


def test_check_is_nonincreasing_in_rate():
    rng = np.random.default_rng(13)
    lams = np.linspace(0.0, 1.0, 21)
    for _ in range(200):
        rule = random_rule(rng)
        a = float(rng.uniform(1.0, SMALL.a_max))
        vals = [H.expect_rule_check(rule, lam, a) for lam in lams]
        assert np.all(np.diff(vals) <= 1e-12)


def test_hat_is_nondecreasing_in_shift():
    rng = np.random.default_rng(14)
    bs = np.linspace(1.0, SMALL.b_max, 31)
    for _ in range(200):
        rule = random_rule(rng)
        vals = [H.expect_rule_hat(rule, b) for b in bs]
        assert np.all(np.diff(vals) >= -1e-12)


# --- lower-bound table -------------------------------------------------------


def test_lb_table_rows():
    t = H.lb_table(SMALL, 0.8)
    assert np.allclose(t.values[0], 0.8 * SMALL.A, atol=1e-12)
    assert np.all(np.diff(t.values, axis=1) >= -1e-12)
    # entries beyond lam * a = 1 repeat the value at a = 1/lam
    k = int(np.argmin(np.abs(SMALL.L - 0.5)))
    cap = D.critical_interval(CheckDist(1, 0.5, 2.0), 0.8).lb
    assert t.values[k, SMALL.A > 2.0] == pytest.approx(cap, abs=1e-10)


def test_lb_matches_bisection_example():
    v = H._lb_vectorized(np.array([1.0]), np.array([0.47525]), 0.8)[0]
    assert v == pytest.approx(0.32821, abs=1e-5)
    fine = D.critical_interval(CheckDist(1, 1.0, 0.47525), 0.8).lb
    assert v == pytest.approx(fine, abs=1e-9)  # both within the root tolerance


def test_lb_table_against_scalar_bisection():
    t = H.lb_table(SMALL, 0.7)
    for k in (1, 4, 9):
        for i in (0, 5, 14):
            lam, a = SMALL.L[k], min(SMALL.A[i], 1 / SMALL.L[k])
            ref = D.critical_interval(CheckDist(1, lam, a), 0.7).lb
            assert t.at(k, i) == pytest.approx(ref, abs=1e-9)


# --- feasibility programs ----------------------------------------------------


@pytest.mark.parametrize("j", [1, 45, 90])
def test_low_ratio_is_feasible(j):
    r = H.feasibility_lp(0.5, j)
    assert r.feasible and r.slack > 0
    assert not r.diagnostics


def test_high_ratio_is_infeasible():
    r = H.feasibility_lp(0.99, 1)
    assert not r.feasible and r.rule is None


def test_returned_rule_meets_every_row():
    gamma = 0.74
    system = H.build_check_system(H.COARSE, gamma)
    r = H.feasibility_lp(gamma, 20, H.COARSE, system)
    assert r.feasible
    v = np.asarray(r.rule.values)
    assert np.all(np.diff(v) >= 0)
    assert np.all(system.G @ r.rule.increments >= system.rhs - 1e-9)
    # the rows reproduce expectations of the rule itself
    for (i, k), row in list(zip(system.labels, system.G))[1:40:7]:
        assert row @ r.rule.increments == pytest.approx(
            H.expect_rule_check(r.rule, H.COARSE.L[k], H.COARSE.A[i]), abs=1e-12)
    assert r.min_expectation == pytest.approx(H.expect_rule_hat(r.rule, r.b), abs=1e-9)


def test_pivot_rules_agree():
    a = H.feasibility_lp(0.76, 6, pivot_rule="bland")
    b = H.feasibility_lp(0.76, 6, pivot_rule="dantzig")
    assert a.min_expectation == pytest.approx(b.min_expectation, abs=1e-9)


def test_linear_branch_constant():
    lin = H.c_of_gamma(0.8)
    assert lin.c == pytest.approx(0.86766, abs=5e-4)
    assert lin.a_star == pytest.approx(0.47525, abs=1e-4)
    assert lin.lb_star == pytest.approx(0.32821, abs=1e-4)
    # oracle: a dense scan of LB / (1 - e^{-a})
    a = np.linspace(1e-3, 1.0, 2000)
    lb = H._lb_vectorized(np.ones_like(a), a, 0.8)
    assert lin.c >= float(np.max(lb / (1 - np.exp(-a)))) - 1e-12


def test_coarse_certificate(coarse_cert):
    assert coarse_cert.feasible
    assert 0.75 <= coarse_cert.gamma <= 0.796
    assert coarse_cert.linear_ok and coarse_cert.linear_margin > 0
    assert len(coarse_cert.records) == H.COARSE.B.size - 1
    assert all(not r.diagnostics for r in coarse_cert.records)
    assert set(coarse_cert.to_dict()) >= {"gamma", "grid", "feasible", "records", "linear_branch"}


def test_coarse_certificate_is_tight():
    rep = H.verify_gamma(GAMMA_COARSE + 2e-4, stop_on_failure=True)
    assert not rep.feasible and rep.first_failure is not None


def test_verify_requires_small_gamma():
    with pytest.raises(DomainError):
        H.verify_gamma(0.81)


# --- dual bound --------------------------------------------------------------


def test_dual_bound_regression():
    w = H.dual_lp_bound(0.796, 1.95)
    assert w.value == pytest.approx(V_COARSE, abs=1e-9)
    assert w.ub == pytest.approx(D.critical_interval(HatDist(1, 1, 1.95), 0.796).ub, abs=1e-9)


def test_dual_witness_is_feasible():
    g = H.COARSE
    w = H.dual_lp_bound(0.796, 1.95)
    K = np.array([k[2] for k in w.K])
    assert np.all(K >= 0) and K.sum() == pytest.approx(1.0, abs=1e-9)
    for s in g.A:
        mix = sum(wt * (math.exp(-lam * s) if s < a else 0.0) for lam, a, wt in w.K)
        assert mix <= min(1.0, math.exp(-(s + g.delta_a - 1.95))) + 1e-9
    lbs = [D.critical_interval(CheckDist(1, lam, a), 0.796).lb for lam, a, _ in w.K]
    assert float(K @ np.array(lbs)) == pytest.approx(w.value, abs=1e-8)


@pytest.mark.parametrize("b", [1.5, 1.95, 3.0])
def test_dual_beats_point_mass(b):
    g, gamma = H.COARSE, 0.75
    a = max(x for x in g.A if x <= b + 1e-12)
    assert H.dual_lp_bound(gamma, b).value >= gamma * a - 1e-12


def test_dual_grows_under_refinement():
    coarse = H.dual_lp_bound(0.796, 1.95, H.COARSE).value
    sub = H.dual_lp_bound(0.796, 1.95, H.GridSpec(delta_a=0.2, delta_lambda=0.04)).value
    assert sub <= coarse + 1e-12
    assert H.dual_lp_bound(0.796, 1.95, a_cap=4.0).value <= coarse + 1e-12


@pytest.mark.parametrize("gamma, j", [(0.7, 3), (0.76, 6), (0.77, 6), (0.796, 10), (0.8, 25)])
def test_weak_duality_sandwich(gamma, j):
    g = H.COARSE
    prim = H.feasibility_lp(gamma, j, pivot_rule="dantzig")
    dual = H.dual_lp_bound(gamma, float(g.B[j]))
    assert dual.value <= prim.min_expectation + 1e-6


def test_weak_duality_on_coarse_certificate(coarse_cert):
    for rec in coarse_cert.records[::9]:
        dual = H.dual_lp_bound(coarse_cert.gamma, rec.b)
        assert dual.value <= rec.min_expectation + 1e-6
