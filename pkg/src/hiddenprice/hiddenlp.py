"""Discretized certificates for hidden pricing rules on MHR distributions.

A hidden rule charges h(s) for a concealed sample s. Restricting h to
nondecreasing step functions on a value grid (with a linear tail of slope
e past the last grid point) turns the question "does some rule reach ratio
Gamma" into a family of finite LPs, one per grid shift b of the maximal
distribution. A dual program bounds the best achievable expectation from
the other side.

Everything here is fixed to alpha = 1. Expectations are exact sums over
the steps, never quadrature.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import CheckDist, HatDist, critical_interval
from .errors import DomainError
from .numerics import DEFAULT_TOL, DenseLP, Tolerances, lp_solve, maximize_unimodal

E = math.e


# ---------------------------------------------------------------------------
# grids and rules


def _points(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


@dataclass(frozen=True)
class GridSpec:
    delta_a: float = 0.1
    delta_lambda: float = 0.02
    delta_b: float = 0.1
    a_min: float = 1.0
    a_max: float = 20.0
    lambda_min: float = 0.0
    lambda_max: float = 1.0
    b_min: float = 1.0
    b_max: float = 10.0

    def __post_init__(self):
        if min(self.delta_a, self.delta_lambda, self.delta_b) <= 0:
            raise DomainError("grid steps must be positive")
        if self.b_max > self.a_max:
            raise DomainError("b_max must not exceed a_max")
        if not (0 < self.a_min < self.a_max and self.lambda_min <= self.lambda_max
                and self.b_min <= self.b_max):
            raise DomainError("grid ranges are inconsistent")

    @property
    def A(self) -> np.ndarray:
        return _points(self.a_min, self.a_max, self.delta_a)

    @property
    def L(self) -> np.ndarray:
        return _points(self.lambda_min, self.lambda_max, self.delta_lambda)

    @property
    def B(self) -> np.ndarray:
        return _points(self.b_min, self.b_max, self.delta_b)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


COARSE = GridSpec()
FINE = GridSpec(delta_a=0.01, delta_lambda=0.001, delta_b=0.001)
PROFILES = {"coarse": COARSE, "fine": FINE}


@dataclass(frozen=True)
class PiecewiseRule:
    """Nondecreasing step function on the grid points with a linear tail.

    h(s) = values[0] for s <= A[0], values[i] for A[i-1] < s <= A[i], and
    values[-1] + tail_slope * (s - A[-1]) beyond the last point.
    """

    grid: GridSpec
    values: tuple
    tail_slope: float = E

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) != self.grid.A.size:
            raise DomainError(f"need {self.grid.A.size} values, got {len(vals)}")
        if any(b < a - 1e-12 for a, b in zip(vals, vals[1:])):
            raise DomainError("rule values must be nondecreasing")

    @property
    def points(self) -> np.ndarray:
        return self.grid.A

    @property
    def increments(self) -> np.ndarray:
        v = np.asarray(self.values)
        return np.concatenate([[v[0]], np.diff(v)])

    def __call__(self, s):
        A = self.points
        v = np.asarray(self.values)
        s_arr = np.asarray(s, dtype=float)
        idx = np.searchsorted(A, s_arr, side="left")
        inside = np.minimum(idx, A.size - 1)
        out = v[inside] + self.tail_slope * np.maximum(s_arr - A[-1], 0.0)
        return float(out) if np.ndim(s) == 0 else out

    def to_csv_rows(self) -> list:
        return [("grid_point", "value")] + [(float(a), v) for a, v in zip(self.points, self.values)]


def _step_survival_check(A: np.ndarray, lam: float, a: float) -> np.ndarray:
    """P[X > A[j-1]] for j = 1..n under the truncated exponential with atom at a."""
    s = A[:-1]
    return np.where(s < a, np.exp(-lam * s), 0.0)


def _step_survival_hat(A: np.ndarray, b: float) -> np.ndarray:
    s = A[:-1]
    return np.minimum(1.0, np.exp(-(s - b)))


def expect_rule_check(rule: PiecewiseRule, lam: float, a: float) -> float:
    """E[h(X)] for X with P[X > v] = e^(-lam v) below a and an atom at a."""
    A = rule.points
    d = rule.increments
    total = d[0] + float(d[1:] @ _step_survival_check(A, lam, a))
    top = A[-1]
    if a > top:
        tail = (a - top) if lam == 0 else (math.exp(-lam * top) - math.exp(-lam * a)) / lam
        total += rule.tail_slope * tail
    return total


def expect_rule_hat(rule: PiecewiseRule, b: float) -> float:
    """E[h(X)] for X = b + Exp(1)."""
    A = rule.points
    d = rule.increments
    top = A[-1]
    if b > top:
        raise DomainError("shift beyond the last grid point")
    return d[0] + float(d[1:] @ _step_survival_hat(A, b)) + rule.tail_slope * math.exp(b - top)


# ---------------------------------------------------------------------------
# lower-bound tables


def _lb_vectorized(lam: np.ndarray, a: np.ndarray, gamma: float, iters: int = 80) -> np.ndarray:
    """Smallest price earning gamma * OPT on the truncated exponential, by bisection."""
    lam = np.asarray(lam, dtype=float)
    a = np.asarray(a, dtype=float)
    p_star = np.where(lam * a <= 1.0, a, 1.0 / np.where(lam > 0, lam, 1.0))
    target = gamma * p_star * np.exp(-lam * p_star)
    lo = np.zeros_like(p_star)
    hi = p_star.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = mid * np.exp(-lam * mid) < target
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class LBTable:
    """LB of the truncated exponential at (L[k], min(A[i], 1/L[k]))."""

    grid: GridSpec
    gamma: float
    values: np.ndarray

    def at(self, k: int, i: int) -> float:
        return float(self.values[k, i])


def lb_table(grid: GridSpec, gamma: float) -> LBTable:
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    A, L = grid.A, grid.L
    lam = np.repeat(L[:, None], A.size, axis=1)
    with np.errstate(divide="ignore"):
        cap = np.where(L > 0, 1.0 / np.where(L > 0, L, 1.0), np.inf)
    a = np.minimum(A[None, :], cap[:, None])
    values = _lb_vectorized(lam, a, gamma)
    values.setflags(write=False)
    return LBTable(grid, gamma, values)


# ---------------------------------------------------------------------------
# feasibility LP


@dataclass(frozen=True)
class CheckSystem:
    """Rows E_{check(L[k], A[i])}[h] >= LB in the increment variables of h."""

    grid: GridSpec
    gamma: float
    G: np.ndarray
    rhs: np.ndarray
    labels: tuple

    @property
    def shape(self):
        return self.G.shape


def build_check_system(grid: GridSpec, gamma: float, table: Optional[LBTable] = None) -> CheckSystem:
    """Constraint rows for the lower-bound conditions.

    Row (i, k), for i >= 1 and k >= 1, asks the expectation under
    check(L[k], A[i]) to reach the table entry at (L[k-1], A[i]); it is
    kept only when L[k-1] * A[i-1] <= 1. An extra row asks the point mass
    at A[0] to be priced at least gamma * A[0].
    """
    table = table or lb_table(grid, gamma)
    A, L = grid.A, grid.L
    n = A.size
    rows, rhs, labels = [], [], []
    first = np.zeros(n)
    first[0] = 1.0
    rows.append(first)
    rhs.append(gamma * A[0])
    labels.append((0, 0))
    for i in range(1, n):
        for k in range(1, L.size):
            if L[k - 1] * A[i - 1] > 1.0 + 1e-12:
                break
            row = np.empty(n)
            row[0] = 1.0
            row[1:] = _step_survival_check(A, L[k], A[i])
            rows.append(row)
            rhs.append(table.at(k - 1, i))
            labels.append((i, k))
    return CheckSystem(grid, gamma, np.array(rows), np.array(rhs), tuple(labels))


@dataclass
class FeasibilityResult:
    j: int
    b: float
    b_prev: float
    gamma: float
    min_expectation: float
    ub: float
    feasible: bool
    rule: Optional[PiecewiseRule]
    max_violation: float
    iterations: int
    diagnostics: list = field(default_factory=list)

    @property
    def slack(self) -> float:
        return self.ub - self.min_expectation

    def to_dict(self) -> dict:
        return {
            "j": self.j, "b": self.b, "b_prev": self.b_prev, "gamma": self.gamma,
            "min_expectation": self.min_expectation, "ub": self.ub, "slack": self.slack,
            "feasible": self.feasible, "max_violation": self.max_violation,
            "iterations": self.iterations, "diagnostics": list(self.diagnostics),
        }


def hat_upper_bound(b: float, gamma: float) -> float:
    return critical_interval(HatDist(1.0, 1.0, b), gamma).ub


def feasibility_lp(
    gamma: float,
    j: int,
    grid: GridSpec = COARSE,
    system: Optional[CheckSystem] = None,
    tol: Tolerances = DEFAULT_TOL,
    pivot_rule: str = "bland",
) -> FeasibilityResult:
    """Cheapest rule, measured under the Exp(1) shifted to B[j], meeting all
    lower-bound rows; feasible when that cost is within UB at B[j-1].

    The covering LP ``min c.d, G d >= LB, d >= 0`` over the increments d of
    h is solved through its packing dual ``max LB.y, G^T y <= c, y >= 0``,
    which has a feasible slack basis and far fewer rows. The increments are
    recovered as the dual's shadow prices and rechecked against G.
    """
    B = grid.B
    if not 1 <= j < B.size:
        raise DomainError(f"j must lie in 1..{B.size - 1}, got {j}")
    if system is None or system.gamma != gamma or system.grid != grid:
        system = build_check_system(grid, gamma)
    A = grid.A
    b, b_prev = float(B[j]), float(B[j - 1])
    cost = np.concatenate([[1.0], _step_survival_hat(A, b)])
    tail = E * math.exp(b - A[-1])
    lp = DenseLP(system.rhs, system.G.T, cost, ["<="] * cost.size, sense="maximize")
    sol = lp_solve(lp, tol, pivot_rule=pivot_rule)
    ub = hat_upper_bound(b_prev, gamma)
    diagnostics = list(sol.diagnostics)
    if not sol.optimal or sol.dual is None:
        diagnostics.append(f"LP status {sol.status}")
        return FeasibilityResult(j, b, b_prev, gamma, math.nan, ub, False, None, math.nan,
                                 sol.iterations, diagnostics)
    d = np.maximum(sol.dual, 0.0)
    resid = system.G @ d - system.rhs
    viol = float(max(0.0, -resid.min()))
    scale = max(1.0, float(np.abs(system.rhs).max()))
    if viol > tol.lp_feas * scale * 10:
        diagnostics.append(f"recovered rule violates a lower-bound row by {viol:.3e}")
    primal_value = float(cost @ d)
    if abs(primal_value - sol.value) > 1e-7 * scale:
        diagnostics.append(
            f"duality gap {primal_value - sol.value:.3e} between recovered rule and LP value"
        )
    min_exp = primal_value + tail
    values = np.cumsum(d)
    rule = PiecewiseRule(grid, tuple(values))
    feasible = min_exp <= ub + tol.lp_feas
    return FeasibilityResult(j, b, b_prev, gamma, min_exp, ub, feasible,
                             rule if feasible else None, viol, sol.iterations, diagnostics)


# ---------------------------------------------------------------------------
# the large-shift branch


@dataclass(frozen=True)
class LinearBranch:
    c: float
    a_star: float
    lb_star: float


def c_of_gamma(gamma: float, tol: Tolerances = DEFAULT_TOL) -> LinearBranch:
    """max over a in (0, 1] of LB(check(1, a), gamma) / (1 - e^-a).

    A linear rule s -> c * lam * s with this c prices every truncated
    exponential at least at its lower bound.
    """

    def ratio(a):
        lb = critical_interval(CheckDist(1.0, 1.0, a), gamma, tol).lb
        return lb / -math.expm1(-a)

    grid = np.linspace(1e-3, 1.0, 1000)
    vals = np.array([ratio(a) for a in grid])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    a_star, c = maximize_unimodal(ratio, float(lo), float(hi), xtol=1e-10)
    if vals[i] > c:
        a_star, c = float(grid[i]), float(vals[i])
    lb_star = critical_interval(CheckDist(1.0, 1.0, a_star), gamma, tol).lb
    return LinearBranch(c, a_star, lb_star)


# ---------------------------------------------------------------------------
# sweep over shifts


@dataclass
class CertReport:
    gamma: float
    grid: GridSpec
    feasible: bool
    records: list
    first_failure: Optional[int]
    linear: LinearBranch
    linear_ok: bool
    linear_margin: float
    runtime: float

    def rules(self) -> dict:
        return {r.j: r.rule for r in self.records if r.rule is not None}

    def rule_for_shift(self, shift: float) -> Optional[PiecewiseRule]:
        """Rule certified for Exp(1) shifted by ``shift`` (smallest grid b >= shift)."""
        B = self.grid.B
        j = max(1, int(np.searchsorted(B, shift - 1e-12, side="left")))
        if j >= B.size:
            return None
        rec = self.records[j - 1]
        return rec.rule

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "grid": self.grid.to_dict(),
            "feasible": self.feasible,
            "first_failure": self.first_failure,
            "linear_branch": {"c": self.linear.c, "a_star": self.linear.a_star,
                              "lb_star": self.linear.lb_star, "ok": self.linear_ok,
                              "margin": self.linear_margin},
            "runtime_s": self.runtime,
            "records": [r.to_dict() for r in self.records],
        }


def _solve_j(args):
    gamma, j, grid, system, tol, pivot_rule = args
    return feasibility_lp(gamma, j, grid, system, tol, pivot_rule)


def verify_gamma(
    gamma: float,
    grid: GridSpec = COARSE,
    tol: Tolerances = DEFAULT_TOL,
    jobs: int = 1,
    pivot_rule: str = "bland",
    stop_on_failure: bool = False,
) -> CertReport:
    """Check every shift on the b-grid and the linear rule beyond b_max."""
    if gamma > 0.8:
        raise DomainError("the certificate argument needs gamma <= 0.8")
    t0 = time.perf_counter()
    system = build_check_system(grid, gamma)
    js = range(1, grid.B.size)
    tasks = [(gamma, j, grid, system, tol, pivot_rule) for j in js]
    records = []
    if jobs > 1 and not stop_on_failure:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_solve_j, tasks))
    else:
        for t in tasks:
            rec = _solve_j(t)
            records.append(rec)
            if stop_on_failure and not rec.feasible:
                break
    first_failure = next((r.j for r in records if not r.feasible), None)
    linear = c_of_gamma(gamma, tol)
    margin = grid.b_max - linear.c * (grid.b_max + 1.0)
    linear_ok = linear.c < 0.9 and margin > 0
    feasible = first_failure is None and linear_ok and len(records) == len(tasks)
    return CertReport(gamma, grid, feasible, records, first_failure, linear, linear_ok,
                      margin, time.perf_counter() - t0)


def max_certified_gamma(
    grid: GridSpec = COARSE,
    lo: float = 0.5,
    hi: float = 0.8,
    tol_gamma: float = 1e-4,
    jobs: int = 1,
) -> float:
    """Largest gamma (to ``tol_gamma``) that verify_gamma certifies, by bisection."""
    if not verify_gamma(lo, grid, jobs=jobs).feasible:
        raise DomainError(f"gamma={lo} is not certified on this grid")
    if verify_gamma(hi, grid, jobs=jobs, stop_on_failure=jobs <= 1).feasible:
        return hi
    while hi - lo > tol_gamma:
        mid = 0.5 * (lo + hi)
        if verify_gamma(mid, grid, jobs=jobs, stop_on_failure=jobs <= 1).feasible:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# dual bound


@dataclass
class DualWitness:
    K: list
    value: float
    b: float
    gamma: float
    ub: float
    upper_bound_violated: bool
    grid: GridSpec
    a_cap: float
    status: str = "optimal"

    def to_dict(self) -> dict:
        return {
            "value": self.value, "b": self.b, "gamma": self.gamma, "ub": self.ub,
            "upper_bound_violated": self.upper_bound_violated, "a_cap": self.a_cap,
            "status": self.status, "grid": self.grid.to_dict(),
            "K": [{"lambda": lam, "a": a, "weight": w} for lam, a, w in self.K],
        }


def dual_lp_bound(
    gamma: float,
    b: float,
    grid: GridSpec = COARSE,
    a_cap: float = 8.0,
    tol: Tolerances = DEFAULT_TOL,
) -> DualWitness:
    """Mixture of truncated exponentials whose averaged lower bound any rule
    must pay under Exp(1) shifted to b.

    Maximize sum K * LB over grid pairs with lam * a <= 1 and a <= a_cap,
    subject to the mixture's tail lying below the shifted exponential's
    tail moved right by one grid step, and sum K = 1.
    """
    if not grid.b_min <= b <= grid.b_max:
        raise DomainError(f"b must lie in [{grid.b_min}, {grid.b_max}], got {b}")
    A, L = grid.A, grid.L
    As = A[A <= a_cap + 1e-12]
    pairs = [(float(lam), float(a)) for a in As for lam in L if lam * a <= 1.0 + 1e-12]
    lam_v = np.array([p[0] for p in pairs])
    a_v = np.array([p[1] for p in pairs])
    lbs = _lb_vectorized(lam_v, a_v, gamma)
    # P[X > s] for every support point s of the value grid
    S = np.where(A[:, None] < a_v[None, :], np.exp(-lam_v[None, :] * A[:, None]), 0.0)
    rhs = np.minimum(1.0, np.exp(-(A + grid.delta_a - b)))
    keep = np.any(S > 0, axis=1)
    M = np.vstack([S[keep], np.ones(len(pairs))])
    rhs_all = np.concatenate([rhs[keep], [1.0]])
    senses = ["<="] * int(keep.sum()) + ["="]
    sol = lp_solve(DenseLP(lbs, M, rhs_all, senses, sense="maximize"), tol, pivot_rule="bland")
    ub = hat_upper_bound(b, gamma)
    if not sol.optimal:
        return DualWitness([], math.nan, b, gamma, ub, False, grid, a_cap, sol.status)
    K = [(lam, a, float(w)) for (lam, a), w in zip(pairs, sol.primal) if w > 1e-12]
    return DualWitness(K, sol.value, b, gamma, ub, sol.value > ub, grid, a_cap)
