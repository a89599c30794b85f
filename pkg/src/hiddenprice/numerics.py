"""Numerical kernel: bracketing root finder, golden-section search, incomplete
gamma functions, adaptive Simpson quadrature and a dense simplex solver.

Infinite values are carried as IEEE ``math.inf``; every routine here treats
``inf`` as a legitimate extended-real input or output where documented.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BracketError, DomainError

INF = math.inf
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Tolerances:
    root_abs: float = 1e-10
    quad_abs: float = 1e-10
    lp_feas: float = 1e-9
    opt_rel: float = 1e-6

    def __post_init__(self):
        for name in ("root_abs", "quad_abs", "lp_feas", "opt_rel"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"tolerance {name} must be positive, got {value!r}")


DEFAULT_TOL = Tolerances()


# ---------------------------------------------------------------------------
# root finding and one-dimensional maximization


def find_root_monotone(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float = 0.0,
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    """Bisection for ``f(x) = target`` on a bracket where ``f`` is monotone.

    Works for increasing and decreasing ``f``. Endpoint roots are returned
    exactly; otherwise the midpoint of the final bracket (width at most
    ``tol.root_abs``) is returned.
    """
    if not lo <= hi:
        raise BracketError(f"empty bracket [{lo}, {hi}]")
    flo = f(lo) - target
    if flo == 0:
        return lo
    fhi = f(hi) - target
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(
            f"f(lo)-target={flo:.3g} and f(hi)-target={fhi:.3g} have the same sign"
        )
    lo_sign = flo > 0
    while hi - lo > tol.root_abs:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid) - target
        if fm == 0:
            return mid
        if (fm > 0) == lo_sign:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def maximize_unimodal(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerances = DEFAULT_TOL,
    xtol: Optional[float] = None,
) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal function.

    The search stops once the bracket is narrower than ``xtol`` (default
    ``tol.opt_rel * (hi - lo)``). The best point seen, endpoints included,
    is returned, so monotone functions resolve to the correct endpoint.
    """
    if hi < lo:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    if xtol is None:
        xtol = tol.opt_rel * (hi - lo)
    xtol = max(xtol, 4 * np.finfo(float).eps * max(abs(lo), abs(hi), 1e-300))

    best_x, best_f = lo, f(lo)
    fh = f(hi)
    if fh > best_f:
        best_x, best_f = hi, fh

    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


# ---------------------------------------------------------------------------
# incomplete gamma functions

_GAMMA_EPS = 1e-16
_GAMMA_MAXIT = 10_000
_FPMIN = 1e-300


def _check_gamma_args(shape: float, x: float):
    if not shape > 0:
        raise DomainError(f"shape must be positive, got {shape!r}")
    if x < 0 or math.isnan(x):
        raise DomainError(f"x must be nonnegative, got {x!r}")


def _series_sum(s: float, x: float) -> float:
    """Sum in gamma_lower(s, x) = e^-x x^s * sum."""
    ap = s
    term = 1.0 / s
    total = term
    for _ in range(_GAMMA_MAXIT):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return total
    raise RuntimeError("incomplete gamma series did not converge")


def _cont_frac(s: float, x: float) -> float:
    """Continued fraction in gamma_upper(s, x) = e^-x x^s * cf (modified Lentz)."""
    b = x + 1.0 - s
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAXIT):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return h
    raise RuntimeError("incomplete gamma continued fraction did not converge")


def gamma_lower(shape: float, x: float) -> float:
    """Unregularized lower incomplete gamma: integral of t^(shape-1) e^-t on [0, x]."""
    _check_gamma_args(shape, x)
    if x == 0:
        return 0.0
    if math.isinf(x):
        return math.gamma(shape)
    if x < shape + 1.0:
        return math.exp(-x + shape * math.log(x)) * _series_sum(shape, x)
    return math.gamma(shape) - math.exp(-x + shape * math.log(x)) * _cont_frac(shape, x)


def gamma_upper(shape: float, x: float) -> float:
    """Unregularized upper incomplete gamma: integral of t^(shape-1) e^-t on [x, inf)."""
    _check_gamma_args(shape, x)
    if x == 0:
        return math.gamma(shape)
    if math.isinf(x):
        return 0.0
    if x < shape + 1.0:
        return math.gamma(shape) - math.exp(-x + shape * math.log(x)) * _series_sum(shape, x)
    return math.exp(-x + shape * math.log(x)) * _cont_frac(shape, x)


def gamma_upper_scaled(shape: float, x: float) -> float:
    """``e^x * x^(-shape) * gamma_upper(shape, x)`` without overflow for large x."""
    _check_gamma_args(shape, x)
    if x == 0:
        raise DomainError("scaled upper gamma is undefined at x=0")
    if math.isinf(x):
        return 0.0
    if x < shape + 1.0:
        return math.exp(x - shape * math.log(x) + math.lgamma(shape)) - _series_sum(shape, x)
    return _cont_frac(shape, x)


# ---------------------------------------------------------------------------
# quadrature


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 50,
    min_depth: int = 4,
) -> float:
    """Adaptive Simpson rule with Richardson correction.

    A minimum subdivision depth guards against accidental early acceptance
    on integrands that happen to match Simpson's rule on the coarse panel.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth, min_depth)
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    total = 0.0
    # explicit stack keeps the evaluation order deterministic and avoids recursion limits
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        a0, b0, fa0, fm0, fb0, s0, eps, depth = stack.pop()
        m0 = 0.5 * (a0 + b0)
        lm = 0.5 * (a0 + m0)
        rm = 0.5 * (m0 + b0)
        flm, frm = f(lm), f(rm)
        left = (m0 - a0) / 6.0 * (fa0 + 4 * flm + fm0)
        right = (b0 - m0) / 6.0 * (fm0 + 4 * frm + fb0)
        delta = left + right - s0
        if depth >= max_depth or (depth >= min_depth and abs(delta) <= 15 * eps):
            total += left + right + delta / 15.0
        else:
            stack.append((m0, b0, fm0, frm, fb0, right, eps / 2, depth + 1))
            stack.append((a0, m0, fa0, flm, fm0, left, eps / 2, depth + 1))
    return total


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
) -> float:
    """Integral of ``f`` on [a, b]; ``b`` may be ``inf``.

    Infinite ranges are mapped onto [0, 1) by v = a + t/(1-t). The
    integrand must decay fast enough that the mapped integrand vanishes at
    t = 1.
    """
    if math.isinf(b):

        def g(t):
            if t >= 1.0:
                return 0.0
            w = 1.0 - t
            return f(a + t / w) / (w * w)

        return adaptive_simpson(g, 0.0, 1.0, tol)
    return adaptive_simpson(f, a, b, tol)


# ---------------------------------------------------------------------------
# linear programming

_ROW_SENSES = {"<=": "<=", "≤": "<=", "le": "<=", "=": "=", "==": "=", "eq": "=",
               ">=": ">=", "≥": ">=", "ge": ">="}


@dataclass
class DenseLP:
    """A linear program ``opt c.x  s.t.  A x (<=,=,>=) rhs,  lo <= x <= hi``."""

    objective: Sequence[float]
    constraint_matrix: Sequence[Sequence[float]]
    rhs: Sequence[float]
    row_sense: Sequence[str]
    sense: str = "minimize"
    var_lower_bounds: Optional[Sequence[float]] = None
    var_upper_bounds: Optional[Sequence[Optional[float]]] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        A = np.asarray(self.constraint_matrix, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        self.constraint_matrix = A
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] != n:
            raise DomainError(f"constraint matrix must have {n} columns, got shape {A.shape}")
        if A.shape[0] != self.rhs.size:
            raise DomainError("row count of the constraint matrix differs from rhs length")
        try:
            self.row_sense = [_ROW_SENSES[s] for s in self.row_sense]
        except KeyError as exc:
            raise DomainError(f"unknown row sense {exc.args[0]!r}") from None
        if len(self.row_sense) != A.shape[0]:
            raise DomainError("row_sense length differs from the row count")
        if self.sense not in ("minimize", "maximize"):
            raise DomainError(f"sense must be 'minimize' or 'maximize', got {self.sense!r}")
        lo = np.zeros(n) if self.var_lower_bounds is None else self.var_lower_bounds
        self.var_lower_bounds = np.asarray(lo, dtype=float)
        hi = [None] * n if self.var_upper_bounds is None else self.var_upper_bounds
        self.var_upper_bounds = np.array(
            [INF if u is None else float(u) for u in hi], dtype=float
        )
        if self.var_lower_bounds.size != n or self.var_upper_bounds.size != n:
            raise DomainError("bound vectors must match the number of variables")

    @property
    def shape(self) -> tuple[int, int]:
        return self.constraint_matrix.shape


@dataclass
class LPSolution:
    status: str
    value: float
    primal: np.ndarray
    dual: Optional[np.ndarray] = None
    iterations: int = 0
    max_violation: float = 0.0
    diagnostics: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    """Dense simplex tableau for ``min c.x, A x = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A, b, basis, pivot_rule, piv_tol, rc_tol):
        m, n = A.shape
        self.m, self.n = m, n
        self.tab = np.zeros((m + 1, n + 1))
        self.tab[:m, :n] = A
        self.tab[:m, n] = b
        self.basis = list(basis)
        self.pivot_rule = pivot_rule
        self.piv_tol = piv_tol
        self.rc_tol = rc_tol
        self.iterations = 0

    def set_cost(self, c):
        cb = c[self.basis]
        self.tab[self.m, : self.n] = c - cb @ self.tab[: self.m, : self.n]
        self.tab[self.m, self.n] = -cb @ self.tab[: self.m, self.n]

    def pivot(self, r, j):
        tab = self.tab
        tab[r] /= tab[r, j]
        col = tab[:, j].copy()
        col[r] = 0.0
        tab -= np.outer(col, tab[r])
        self.basis[r] = j
        self.iterations += 1

    def _entering(self, allowed, bland):
        rc = self.tab[self.m, : self.n]
        cand = np.flatnonzero((rc < -self.rc_tol) & allowed)
        if cand.size == 0:
            return None
        if bland:
            return int(cand[0])
        return int(cand[np.argmin(rc[cand])])

    def _leaving(self, j):
        col = self.tab[: self.m, j]
        rows = np.flatnonzero(col > self.piv_tol)
        if rows.size == 0:
            return None
        ratios = self.tab[rows, self.n] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        basis = np.asarray(self.basis)
        return int(ties[np.argmin(basis[ties])])

    def run(self, allowed, max_iter):
        """Iterate to optimality. Returns 'optimal', 'unbounded' or 'iteration_limit'."""
        bland = self.pivot_rule == "bland"
        # Dantzig pricing falls back to Bland after a run of degenerate pivots
        degenerate = 0
        start = self.iterations
        while self.iterations - start < max_iter:
            use_bland = bland or degenerate > 50
            j = self._entering(allowed, use_bland)
            if j is None:
                return "optimal"
            r = self._leaving(j)
            if r is None:
                return "unbounded"
            if self.tab[r, self.n] <= 1e-12:
                degenerate += 1
            else:
                degenerate = 0
            self.pivot(r, j)
        return "iteration_limit"


def lp_solve(
    p: DenseLP,
    tol: Tolerances = DEFAULT_TOL,
    pivot_rule: str = "bland",
    max_iter: int = 200_000,
) -> LPSolution:
    """Two-phase dense simplex.

    ``pivot_rule`` is ``"bland"`` (smallest-index entering and leaving
    variables, guaranteed termination) or ``"dantzig"`` (most negative
    reduced cost, switching to Bland after 50 consecutive degenerate
    pivots). The returned ``dual`` holds one shadow price per constraint
    row, i.e. the derivative of the optimal value with respect to that
    row's right-hand side.
    """
    if pivot_rule not in ("bland", "dantzig"):
        raise DomainError(f"unknown pivot rule {pivot_rule!r}")
    A0 = p.constraint_matrix
    m0, n = A0.shape
    lo, hi = p.var_lower_bounds, p.var_upper_bounds
    sign = 1.0 if p.sense == "minimize" else -1.0
    c0 = sign * p.objective

    # substitute x = offset + T y with y >= 0
    cols, offset, extra_rows = [], np.zeros(n), []
    for j in range(n):
        if math.isfinite(lo[j]):
            offset[j] = lo[j]
            cols.append((j, 1.0))
            if math.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif math.isfinite(hi[j]):
            offset[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    T = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        T[j, k] = s
    if np.any(hi < lo):
        return LPSolution("infeasible", math.nan, np.full(n, math.nan),
                          diagnostics=["a variable has upper bound below lower bound"])

    A = A0 @ T
    b = p.rhs - A0 @ offset
    senses = list(p.row_sense)
    if extra_rows:
        E = np.zeros((len(extra_rows), ny))
        for r, (k, u) in enumerate(extra_rows):
            E[r, k] = 1.0
        A = np.vstack([A, E])
        b = np.concatenate([b, [u for _, u in extra_rows]])
        senses += ["<="] * len(extra_rows)
    m = A.shape[0]
    cy = T.T @ c0

    flip = np.where(b < 0, -1.0, 1.0)
    A = A * flip[:, None]
    b = b * flip
    senses = [
        s if f > 0 else {"<=": ">=", ">=": "<=", "=": "="}[s] for s, f in zip(senses, flip)
    ]

    n_slack = sum(s != "=" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    N = ny + n_slack + n_art
    S = np.zeros((m, N))
    S[:, :ny] = A
    basis = [0] * m
    k_slack, k_art = ny, ny + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            S[i, k_slack] = 1.0
            basis[i] = k_slack
            k_slack += 1
        elif s == ">=":
            S[i, k_slack] = -1.0
            k_slack += 1
            S[i, k_art] = 1.0
            basis[i] = k_art
            art_cols.append(k_art)
            k_art += 1
        else:
            S[i, k_art] = 1.0
            basis[i] = k_art
            art_cols.append(k_art)
            k_art += 1

    scale = max(1.0, float(np.abs(S).max(initial=0.0)))
    tab = _Tableau(S, b, basis, pivot_rule, piv_tol=1e-9 * scale, rc_tol=1e-10 * scale)
    c_full = np.zeros(N)
    c_full[:ny] = cy
    is_art = np.zeros(N, dtype=bool)
    is_art[art_cols] = True
    diagnostics = []

    if art_cols:
        tab.set_cost(is_art.astype(float))
        status = tab.run(np.ones(N, dtype=bool), max_iter)
        if status == "iteration_limit":
            return LPSolution("iteration_limit", math.nan, np.full(n, math.nan),
                              iterations=tab.iterations, diagnostics=["phase 1 iteration limit"])
        infeas = -tab.tab[m, N]
        if infeas > tol.lp_feas * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LPSolution("infeasible", math.nan, np.full(n, math.nan),
                              iterations=tab.iterations,
                              diagnostics=[f"phase 1 residual {infeas:.3e}"])
        # drive remaining artificial variables out of the basis
        keep_rows = []
        for r in range(m):
            if is_art[tab.basis[r]]:
                row = tab.tab[r, :N].copy()
                row[is_art] = 0.0
                cand = np.flatnonzero(np.abs(row) > tab.piv_tol)
                if cand.size:
                    tab.pivot(r, int(cand[0]))
                    keep_rows.append(r)
                else:
                    diagnostics.append(f"redundant constraint row {r} dropped")
            else:
                keep_rows.append(r)
        if len(keep_rows) < m:
            tab.tab = np.vstack([tab.tab[keep_rows], tab.tab[m:]])
            tab.basis = [tab.basis[r] for r in keep_rows]
            tab.m = len(keep_rows)
    else:
        keep_rows = list(range(m))

    tab.set_cost(c_full)
    status = tab.run(~is_art, max_iter)
    if status != "optimal":
        value = -INF * sign if status == "unbounded" else math.nan
        return LPSolution(status, value, np.full(n, math.nan), iterations=tab.iterations,
                          diagnostics=diagnostics)

    # recompute the basic solution and duals from the original data
    rows = np.asarray(keep_rows)
    B = S[np.ix_(rows, tab.basis)]
    try:
        xb = np.linalg.solve(B, b[rows])
        y_std = np.linalg.solve(B.T, c_full[tab.basis])
    except np.linalg.LinAlgError:
        xb = tab.tab[: tab.m, N].copy()
        y_std = np.zeros(len(rows))
        diagnostics.append("singular final basis; duals unavailable")
    xfull = np.zeros(N)
    xfull[tab.basis] = np.maximum(xb, 0.0)
    x = offset + T @ xfull[:ny]

    dual_std = np.zeros(m)
    dual_std[rows] = y_std
    dual = sign * flip[:m0] * dual_std[:m0]

    resid = A0 @ x - p.rhs
    viol = 0.0
    for i, s in enumerate(p.row_sense):
        if s == "<=":
            viol = max(viol, resid[i])
        elif s == ">=":
            viol = max(viol, -resid[i])
        else:
            viol = max(viol, abs(resid[i]))
    viol = max(viol, float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0)))
    if viol > tol.lp_feas:
        msg = f"primal violation {viol:.3e} exceeds lp_feas"
        diagnostics.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    value = float(p.objective @ x)
    return LPSolution("optimal", value, x, dual=dual, iterations=tab.iterations,
                      max_violation=viol, diagnostics=diagnostics)
