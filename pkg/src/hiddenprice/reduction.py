"""Worst-case ratios of monotone pricing policies.

A policy prices every distribution at ``omega * Psi(F)`` for a monotone,
homogeneous statistic ``Psi``. Over alpha-regular distributions the worst
case is attained on the two boundary families (``CheckDist`` with
``alpha*lam*a <= 1`` and ``HatDist`` with ``lam*b >= 1``), and scale
invariance reduces each family to a single parameter. This module
searches those families, optimizes the discount ``omega`` and provides
the shrink/expand constructions that justify the reduction, so they can
be property tested on general distributions.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import distributions as D
from .distributions import CheckDist, GeneralRegular, HatDist, pareto_survival
from .errors import DivergentStatistic, DomainError, TangentUndefined
from .numerics import DEFAULT_TOL, INF, Tolerances, gamma_lower, gamma_upper_scaled, maximize_unimodal

# ---------------------------------------------------------------------------
# statistics and policies


@dataclass(frozen=True)
class Mean:
    def value(self, dist) -> float:
        return D.mean(dist)

    @property
    def label(self) -> str:
        return "mean"


@dataclass(frozen=True)
class LNorm:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")

    def value(self, dist) -> float:
        return D.lnorm(dist, self.eta)

    @property
    def label(self) -> str:
        return f"lnorm({self.eta:g})"


@dataclass(frozen=True)
class CVaR:
    q: float

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise DomainError(f"q must lie in (0, 1], got {self.q}")

    def value(self, dist) -> float:
        return D.cvar_q(dist, self.q)

    @property
    def label(self) -> str:
        return f"cvar({self.q:g})"


@dataclass(frozen=True)
class VaR:
    q: float

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise DomainError(f"q must lie in (0, 1], got {self.q}")

    def value(self, dist) -> float:
        return D.var_q(dist, self.q)

    @property
    def label(self) -> str:
        return f"var({self.q:g})"


Statistic = Union[Mean, LNorm, CVaR, VaR]


def parse_statistic(name: str, eta: Optional[float] = None, q: Optional[float] = None) -> Statistic:
    name = name.lower()
    if name == "mean":
        return Mean()
    if name == "lnorm":
        if eta is None:
            raise DomainError("lnorm needs eta")
        return LNorm(float(eta))
    if name in ("cvar", "var"):
        if q is None:
            raise DomainError(f"{name} needs q")
        return CVaR(float(q)) if name == "cvar" else VaR(float(q))
    raise DomainError(f"unknown statistic {name!r}")


def statistic_to_dict(stat: Statistic) -> dict:
    out = {"name": stat.label.split("(")[0]}
    if isinstance(stat, LNorm):
        out["eta"] = stat.eta
    elif isinstance(stat, (CVaR, VaR)):
        out["q"] = stat.q
    return out


@dataclass(frozen=True)
class StatisticPolicy:
    statistic: Statistic
    omega: float

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise DomainError(f"discount must lie in (0, 1], got {self.omega}")

    def price(self, dist) -> float:
        return self.omega * self.statistic.value(dist)


def policy_ratio(policy: StatisticPolicy, dist) -> float:
    """Revenue of the policy's price divided by the optimal revenue."""
    p = policy.price(dist)
    if math.isinf(p):
        raise DivergentStatistic(f"{policy.statistic.label} is infinite for {dist}")
    _, opt = D.opt_price(dist)
    return D.revenue(dist, p) / opt


# ---------------------------------------------------------------------------
# search configuration and certificates


@dataclass(frozen=True)
class SearchConfig:
    t_step: float = 1e-3
    hat_lambda_max: float = 1e3
    refine_points: int = 3
    omega_lo: float = 0.5
    omega_hi: float = 1.0
    omega_step: float = 1e-3
    n_lambda: int = 200
    n_loc: int = 40
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        if not 0 < self.t_step < 0.5:
            raise DomainError("t_step must lie in (0, 0.5)")
        if not self.hat_lambda_max > 1:
            raise DomainError("hat_lambda_max must exceed 1")
        if not 0 < self.omega_lo < self.omega_hi <= 1:
            raise DomainError("need 0 < omega_lo < omega_hi <= 1")


DEFAULT_SEARCH = SearchConfig()


@dataclass
class RatioCertificate:
    gamma: float
    worst_family: str
    worst_params: tuple
    omega: float
    statistic: str
    alpha: float
    search_meta: dict = field(default_factory=dict)

    def witness(self):
        lam, loc = self.worst_params
        if self.worst_family == "check":
            return CheckDist(self.alpha, lam, loc)
        return HatDist(self.alpha, lam, loc)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "worst_family": self.worst_family,
            "worst_params": {"lambda": self.worst_params[0], "loc": self.worst_params[1]},
            "omega": self.omega,
            "statistic": self.statistic,
            "alpha": self.alpha,
            "search_meta": self.search_meta,
        }


# ---------------------------------------------------------------------------
# one-dimensional families


@dataclass
class _Branch:
    """A one-parameter slice of a boundary family.

    ``lam_of_t`` maps a coordinate t in [t_lo, t_hi] to the family
    parameter; ``aux`` precomputes whatever the ratio needs that does not
    depend on omega (usually the statistic); ``ratio`` is vectorized in lam.
    ``dist_of`` rebuilds the witness distribution for a parameter.
    """

    family: str
    t_lo: float
    t_hi: float
    lam_of_t: Callable
    aux: Callable
    ratio: Callable
    dist_of: Callable


def _check_lambda_map(alpha: float):
    if alpha > 0:
        top = 1.0 / alpha
        return (lambda t: top * np.asarray(t, dtype=float)), 0.0, 1.0
    return (lambda t: np.asarray(t, dtype=float) / (1.0 - np.asarray(t, dtype=float))), 0.0, None


def _family_values(fn, lam):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    return np.array([fn(float(x)) for x in lam])


def _generic_branches(statistic: Statistic, alpha: float, cfg: SearchConfig) -> list:
    """Check family with a = 1 and Hat family with b = 1, any statistic and alpha."""
    c_map, c_lo, c_hi = _check_lambda_map(alpha)
    if c_hi is None:
        c_hi = 1.0 - 1.0 / cfg.hat_lambda_max

    def check_dist(lam):
        return CheckDist(alpha, lam, 1.0)

    def hat_dist(lam):
        return HatDist(alpha, lam, 1.0)

    def check_aux(lam):
        return _family_values(lambda x: statistic.value(check_dist(x)), lam)

    def hat_aux(lam):
        vals = _family_values(lambda x: statistic.value(hat_dist(x)), lam)
        if np.any(np.isinf(vals)):
            raise DivergentStatistic(
                f"{statistic.label} diverges on the maximal family at alpha={alpha}"
            )
        return vals

    def check_ratio(omega, lam, psi):
        p = omega * psi
        surv = np.where(p <= 1.0, D.pareto_survival_np(alpha, lam * p), 0.0)
        return p * surv / D.pareto_survival_np(alpha, lam)

    def hat_ratio(omega, lam, psi):
        p = omega * psi
        surv = np.minimum(1.0, D.pareto_survival_np(alpha, lam * np.maximum(p - 1.0, 0.0)))
        return p * surv

    return [
        _Branch("check", c_lo, c_hi, c_map, check_aux, check_ratio, check_dist),
        _Branch(
            "hat", 0.0, 1.0 - 1.0 / cfg.hat_lambda_max,
            lambda t: 1.0 / (1.0 - np.asarray(t, dtype=float)),
            hat_aux, hat_ratio, hat_dist,
        ),
    ]


# ---------------------------------------------------------------------------
# closed-form constraint programs (alpha = 1)


def _mean_check(omega, lam, psi=None):
    lam = np.asarray(lam, dtype=float)
    m = _mean_check_psi(lam) if psi is None else psi
    return omega * m * np.exp(-omega * lam * m + lam)


def _mean_check_psi(lam):
    lam = np.asarray(lam, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        # -expm1(-lam)/lam keeps full accuracy as lam -> 0, where it tends to 1
        return np.where(lam > 0, -np.expm1(-lam) / np.where(lam > 0, lam, 1.0), 1.0)


def _hat_ratio_from_psi(omega, lam, psi):
    return omega * psi * np.minimum(np.exp(-lam * (omega * psi - 1.0)), 1.0)


def _lnorm_check_psi(eta, lam):
    def one(x):
        if x == 0:
            return 1.0
        return (x ** (-eta) * gamma_lower(eta + 1.0, x) + math.exp(-x)) ** (1.0 / eta)

    return _family_values(one, lam)


def _lnorm_hat_psi(eta, lam):
    return _family_values(lambda x: (x * gamma_upper_scaled(eta + 1.0, x)) ** (1.0 / eta), lam)


def _cvar_check_ratio(q, omega, lam):
    lam = np.asarray(lam, dtype=float)
    lq = math.log(q)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = -np.log(-q * (lam + lq - 1.0)) / lam
        opt = q * (1.0 - lam - lq) * a
        return omega * np.exp(-lam * omega) / opt


def _cvar_hat_ratio(q, omega, lam):
    lam = np.asarray(lam, dtype=float)
    lq = math.log(q)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        num = omega * np.minimum(1.0, q * np.exp(-lam * (omega - 1.0 + 1.0 / lam)))
        den = 1.0 - (1.0 - lq) / lam
        out = num / den
    return np.where(den > 0, out, INF)


def constraint_value(statistic: Statistic, omega: float, lam, family: str, alpha: float = 1.0):
    """Closed-form ratio of ``omega * Psi`` on one normalized family member.

    Mean and LNorm use the families with a = 1 (``check``, lam in [0, 1])
    and b = 1 (``hat``, lam >= 1). CVaR normalizes CVaR_q = 1 instead and
    has three pieces: ``point`` (the point mass, ratio omega), ``check``
    with lam in (-ln q, 1 - ln q) and ``hat`` with lam >= 1 - ln q.
    Accepts scalar or array ``lam``.
    """
    if not D.is_exp_branch(alpha):
        raise DomainError("closed-form constraints are available for alpha = 1 only")
    scalar = np.ndim(lam) == 0
    lam_a = np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(lam_a < 0):
        raise DomainError("lambda must be nonnegative")
    if isinstance(statistic, (Mean, LNorm)):
        if isinstance(statistic, LNorm) and statistic.eta == 1.0:
            statistic = Mean()
        if family == "check":
            if np.any(lam_a > 1.0 + 1e-12):
                raise DomainError("check constraints need lam in [0, 1]")
            if isinstance(statistic, Mean):
                out = _mean_check(omega, lam_a)
            else:
                out = _mean_check(omega, lam_a, _lnorm_check_psi(statistic.eta, lam_a))
        elif family == "hat":
            if np.any(lam_a < 1.0 - 1e-12):
                raise DomainError("hat constraints need lam >= 1")
            if isinstance(statistic, Mean):
                psi = 1.0 + 1.0 / lam_a
            else:
                psi = _lnorm_hat_psi(statistic.eta, lam_a)
            out = _hat_ratio_from_psi(omega, lam_a, psi)
        else:
            raise DomainError(f"unknown family {family!r} for {statistic.label}")
    elif isinstance(statistic, CVaR):
        q = statistic.q
        lq = math.log(q)
        if family == "point":
            out = np.full(lam_a.shape, float(omega))
        elif family == "check":
            if np.any(lam_a <= -lq) or np.any(lam_a >= 1.0 - lq):
                raise DomainError("CVaR check constraints need lam in (-ln q, 1 - ln q)")
            out = _cvar_check_ratio(q, omega, lam_a)
        elif family == "hat":
            if np.any(lam_a < 1.0 - lq - 1e-12):
                raise DomainError("CVaR hat constraints need lam >= 1 - ln q")
            out = _cvar_hat_ratio(q, omega, lam_a)
        else:
            raise DomainError(f"unknown family {family!r} for {statistic.label}")
    else:
        raise DomainError(f"no closed-form constraints for {statistic.label}")
    return float(out[0]) if scalar else out


def _closed_form_branches(statistic: Statistic, cfg: SearchConfig) -> Optional[list]:
    if isinstance(statistic, LNorm) and statistic.eta == 1.0:
        statistic = Mean()
    if isinstance(statistic, CVaR) and statistic.q == 1.0:
        statistic = Mean()
    hat_t_hi = 1.0 - 1.0 / cfg.hat_lambda_max

    def hat_lam(t):
        return 1.0 / (1.0 - np.asarray(t, dtype=float))

    def identity(t):
        return np.asarray(t, dtype=float)

    if isinstance(statistic, Mean):
        return [
            _Branch("check", 0.0, 1.0, identity, _mean_check_psi,
                    lambda w, lam, psi: _mean_check(w, lam, psi),
                    lambda lam: CheckDist(1.0, lam, 1.0)),
            _Branch("hat", 0.0, hat_t_hi, hat_lam, lambda lam: 1.0 + 1.0 / np.asarray(lam),
                    _hat_ratio_from_psi, lambda lam: HatDist(1.0, lam, 1.0)),
        ]
    if isinstance(statistic, LNorm):
        eta = statistic.eta
        return [
            _Branch("check", 0.0, 1.0, identity, lambda lam: _lnorm_check_psi(eta, lam),
                    lambda w, lam, psi: _mean_check(w, lam, psi),
                    lambda lam: CheckDist(1.0, lam, 1.0)),
            _Branch("hat", 0.0, hat_t_hi, hat_lam, lambda lam: _lnorm_hat_psi(eta, lam),
                    _hat_ratio_from_psi, lambda lam: HatDist(1.0, lam, 1.0)),
        ]
    if isinstance(statistic, CVaR):
        q = statistic.q
        lq = -math.log(q)
        edge = 1e-9

        def check_dist(lam):
            a = -math.log(-q * (lam - lq - 1.0)) / lam
            return CheckDist(1.0, lam, a)

        def hat_dist(lam):
            return HatDist(1.0, lam, 1.0 - (1.0 + lq) / lam)

        hat_lo = 1.0 + lq
        return [
            _Branch("check", 0.0, 0.0, identity, lambda lam: np.zeros(np.shape(lam)),
                    lambda w, lam, aux: np.full(np.shape(lam), float(w)),
                    lambda lam: CheckDist(1.0, 0.0, 1.0)),
            _Branch("check", edge, 1.0 - edge, lambda t: lq + np.asarray(t, dtype=float),
                    lambda lam: np.zeros(np.shape(lam)),
                    lambda w, lam, aux: _cvar_check_ratio(q, w, lam), check_dist),
            _Branch("hat", 0.0, 1.0 - hat_lo / cfg.hat_lambda_max,
                    lambda t: hat_lo / (1.0 - np.asarray(t, dtype=float)),
                    lambda lam: np.zeros(np.shape(lam)),
                    lambda w, lam, aux: _cvar_hat_ratio(q, w, lam), hat_dist),
        ]
    return None


# ---------------------------------------------------------------------------
# inner minimization


@dataclass
class _Grid:
    branch: _Branch
    t: np.ndarray
    lam: np.ndarray
    aux: np.ndarray


def _make_grids(branches: Sequence[_Branch], cfg: SearchConfig) -> list:
    grids = []
    for br in branches:
        if br.t_hi <= br.t_lo:
            t = np.array([br.t_lo])
        else:
            n = max(2, int(round((br.t_hi - br.t_lo) / cfg.t_step)) + 1)
            t = np.linspace(br.t_lo, br.t_hi, n)
        lam = br.lam_of_t(t)
        grids.append(_Grid(br, t, lam, np.asarray(br.aux(lam), dtype=float)))
    return grids


def _grid_min(grids, omega):
    best = (INF, None, None)
    for gi, g in enumerate(grids):
        r = g.branch.ratio(omega, g.lam, g.aux)
        r = np.where(np.isnan(r), INF, r)
        i = int(np.argmin(r))
        if r[i] < best[0]:
            best = (float(r[i]), gi, i)
    return best


def _refined_min(grids, omega, cfg: SearchConfig):
    """Grid minimum over all branches, refined by golden search around the
    best few grid points of every branch. Returns (gamma, branch, lam)."""
    best = (INF, None, None)
    k = cfg.refine_points
    for g in grids:
        br = g.branch
        r = br.ratio(omega, g.lam, g.aux)
        r = np.where(np.isnan(r), INF, r)
        order = np.argsort(r, kind="stable")[:k]
        for i in order:
            i = int(i)
            cand = (float(r[i]), br, float(g.lam[i]))
            if g.t.size > 1:
                lo = g.t[max(i - 1, 0)]
                hi = g.t[min(i + 1, g.t.size - 1)]

                def neg(t, br=br):
                    lam = br.lam_of_t(np.array([t]))
                    val = br.ratio(omega, lam, br.aux(lam))[0]
                    return -INF if math.isnan(val) else -val

                t_best, f_best = maximize_unimodal(neg, float(lo), float(hi), xtol=1e-11)
                if -f_best < cand[0]:
                    cand = (-f_best, br, float(br.lam_of_t(np.array([t_best]))[0]))
            if cand[0] < best[0]:
                best = cand
    return best


def _certificate(policy: StatisticPolicy, alpha, gamma, branch, lam, meta) -> RatioCertificate:
    dist = branch.dist_of(lam)
    loc = dist.a if isinstance(dist, CheckDist) else dist.b
    return RatioCertificate(
        gamma=gamma,
        worst_family=branch.family,
        worst_params=(float(dist.lam), float(loc)),
        omega=policy.omega,
        statistic=policy.statistic.label,
        alpha=alpha,
        search_meta=meta,
    )


def _reject_divergent(statistic: Statistic, alpha: float):
    probe = HatDist(alpha, 2.0, 1.0)
    if math.isinf(statistic.value(probe)):
        raise DivergentStatistic(
            f"{statistic.label} is infinite on the maximal family at alpha={alpha}; "
            "no positive ratio is achievable"
        )


def worst_ratio_normalized(
    policy: StatisticPolicy, alpha: float = 1.0, cfg: SearchConfig = DEFAULT_SEARCH
) -> RatioCertificate:
    """Worst ratio over the Check family with a = 1 and the Hat family with b = 1."""
    alpha = D.check_alpha(alpha)
    _reject_divergent(policy.statistic, alpha)
    grids = _make_grids(_generic_branches(policy.statistic, alpha, cfg), cfg)
    gamma, br, lam = _refined_min(grids, policy.omega, cfg)
    meta = {
        "method": "normalized",
        "t_step": cfg.t_step,
        "hat_lambda_max": cfg.hat_lambda_max,
        "refine_points": cfg.refine_points,
    }
    cert = _certificate(policy, alpha, gamma, br, lam, meta)
    # report the ratio of the witness itself so the certificate is self-consistent
    cert.gamma = policy_ratio(policy, cert.witness())
    return cert


def worst_ratio_two_param(
    policy: StatisticPolicy, alpha: float = 1.0, cfg: SearchConfig = DEFAULT_SEARCH
) -> RatioCertificate:
    """Worst ratio over a two-dimensional (lam, location) grid of both families.

    Locations and scales are both gridded geometrically, so scale
    invariance is not assumed; the best cells are refined along lam.
    """
    alpha = D.check_alpha(alpha)
    stat = policy.statistic
    _reject_divergent(stat, alpha)
    locs = np.geomspace(0.25, 4.0, cfg.n_loc)
    lams = np.concatenate([[0.0], np.geomspace(1e-3, cfg.hat_lambda_max, cfg.n_lambda)])

    cells = []
    for loc in locs:
        # Check family: lam * a * alpha <= 1
        lam_top = INF if alpha == 0 else 1.0 / (alpha * loc)
        for lam in lams:
            if lam <= lam_top:
                d = CheckDist(alpha, float(lam), float(loc))
                cells.append((policy_ratio(policy, d), "check", float(lam), float(loc), 0.0, lam_top))
        # Hat family: lam * b >= 1
        lam_bot = 1.0 / loc
        for lam in lams:
            if lam >= lam_bot:
                d = HatDist(alpha, float(lam), float(loc))
                cells.append((policy_ratio(policy, d), "hat", float(lam), float(loc), lam_bot,
                              cfg.hat_lambda_max))
    cells.sort(key=lambda c: c[0])

    best = cells[0][:4]
    for r, fam, lam, loc, lam_min, lam_max in cells[: cfg.refine_points]:
        pos = np.searchsorted(lams, lam)
        lo = lams[max(pos - 1, 0)]
        hi = lams[min(pos + 1, lams.size - 1)]
        lo, hi = max(lo, lam_min), min(hi, lam_max)
        if hi <= lo:
            continue
        make = (lambda x, loc=loc: CheckDist(alpha, x, loc)) if fam == "check" else (
            lambda x, loc=loc: HatDist(alpha, x, loc))
        x, f = maximize_unimodal(lambda x: -policy_ratio(policy, make(x)), float(lo), float(hi),
                                 xtol=1e-12 * max(hi, 1.0))
        if -f < best[0]:
            best = (-f, fam, x, loc)
    gamma, fam, lam, loc = best
    return RatioCertificate(
        gamma=gamma,
        worst_family=fam,
        worst_params=(lam, loc),
        omega=policy.omega,
        statistic=stat.label,
        alpha=alpha,
        search_meta={
            "method": "two_param",
            "n_lambda": cfg.n_lambda,
            "n_loc": cfg.n_loc,
            "refine_points": cfg.refine_points,
        },
    )


# ---------------------------------------------------------------------------
# discount optimization


@dataclass
class DiscountResult:
    omega: float
    gamma: float
    statistic: str
    alpha: float
    worst_family: str
    worst_lambda: float
    worst_loc: float

    def as_tuple(self) -> tuple:
        return self.omega, self.gamma

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _branches_for(statistic: Statistic, alpha: float, cfg: SearchConfig) -> list:
    if D.is_exp_branch(alpha):
        closed = _closed_form_branches(statistic, cfg)
        if closed is not None:
            return closed
    _reject_divergent(statistic, alpha)
    return _generic_branches(statistic, alpha, cfg)


def optimize_discount(
    statistic: Statistic, alpha: float = 1.0, cfg: SearchConfig = DEFAULT_SEARCH
) -> DiscountResult:
    """Discount omega maximizing the worst-case ratio of ``omega * Psi``.

    The outer search scans omega on a grid against the unrefined inner
    minimum, then runs golden search on the refined inner minimum in the
    neighbouring grid cells.
    """
    alpha = D.check_alpha(alpha)
    grids = _make_grids(_branches_for(statistic, alpha, cfg), cfg)
    n = int(round((cfg.omega_hi - cfg.omega_lo) / cfg.omega_step)) + 1
    omegas = np.linspace(cfg.omega_lo, cfg.omega_hi, n)
    coarse = np.array([_grid_min(grids, w)[0] for w in omegas])
    i = int(np.argmax(coarse))
    lo = omegas[max(i - 1, 0)]
    hi = omegas[min(i + 1, n - 1)]

    def inner(w):
        return _refined_min(grids, w, cfg)[0]

    w_best, _ = maximize_unimodal(inner, float(lo), float(hi), xtol=1e-9)
    gamma, br, lam = _refined_min(grids, w_best, cfg)
    dist = br.dist_of(lam)
    loc = dist.a if isinstance(dist, CheckDist) else dist.b
    return DiscountResult(
        omega=float(w_best),
        gamma=float(gamma),
        statistic=statistic.label,
        alpha=alpha,
        worst_family=br.family,
        worst_lambda=float(dist.lam),
        worst_loc=float(loc),
    )


@dataclass
class SweepTable:
    kind: str
    rows: list
    argmax: float

    def best_row(self) -> DiscountResult:
        return max(self.rows, key=lambda r: r[1].gamma)[1]

    def to_csv_rows(self) -> list:
        out = [("param", "omega", "gamma", "worst_family", "worst_lambda", "worst_loc")]
        for param, res in self.rows:
            out.append((param, res.omega, res.gamma, res.worst_family, res.worst_lambda,
                        res.worst_loc))
        return out


def _sweep_one(args):
    kind, param, alpha, cfg = args
    stat = LNorm(param) if kind == "lnorm" else CVaR(param)
    return optimize_discount(stat, alpha, cfg)


def sweep_parameter(
    kind: str,
    grid: Sequence[float],
    alpha: float = 1.0,
    cfg: SearchConfig = DEFAULT_SEARCH,
    jobs: int = 1,
) -> SweepTable:
    """Optimal (omega, gamma) along a parameter grid of LNorm (eta) or CVaR (q)."""
    if kind not in ("lnorm", "cvar"):
        raise DomainError(f"sweep kind must be 'lnorm' or 'cvar', got {kind!r}")
    grid = [float(x) for x in grid]
    for x in grid:
        if kind == "lnorm" and not 1.0 <= x <= 3.0:
            raise DomainError(f"eta grid must lie in [1, 3], got {x}")
        if kind == "cvar" and not 0.3 < x <= 1.0:
            raise DomainError(f"q grid must lie in (0.3, 1], got {x}")
    tasks = [(kind, x, alpha, cfg) for x in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    rows = list(zip(grid, results))
    best = max(range(len(rows)), key=lambda k: rows[k][1].gamma)
    return SweepTable(kind, rows, rows[best][0])


# ---------------------------------------------------------------------------
# shrink and expand constructions


def shrink_to_check(F: GeneralRegular) -> CheckDist:
    """Smallest alpha-regular distribution agreeing with F at its optimal price.

    With v0 the optimal price of F, the result is the truncated generalized
    Pareto through (v0, S(v0)) with its atom at v0. It is dominated by F
    and has the same optimal revenue.
    """
    v0 = F.opt_price()
    psi0 = D.pareto_survival_inv(F.alpha, F.survival_ge(v0))
    return CheckDist(F.alpha, psi0 / v0, v0)


def expand_to_hat(F: GeneralRegular, v0: float) -> HatDist:
    """Largest boundary distribution touching F at a price v0 >= p*(F).

    The tangent to psi at v0 (right slope at knots) gives a shifted
    generalized Pareto that dominates F. If its optimal price lies above
    its shift, the mass below that optimal price is moved up to it, which
    lands exactly on the maximal family.
    """
    p_star = F.opt_price()
    if v0 < p_star * (1 - 1e-12):
        raise DomainError(f"v0={v0} lies below the optimal price {p_star}")
    if F.cap is not None and v0 >= F.cap:
        raise TangentUndefined(f"no finite tangent at or beyond the cap {F.cap}")
    lam = F.right_slope(v0)
    if lam <= 0:
        raise TangentUndefined(f"psi is flat to the right of v0={v0}")
    b = v0 - F.psi(v0) / lam
    b = max(b, 0.0)
    alpha = F.alpha
    if lam * b >= 1.0 or alpha == 0.0:
        return HatDist(alpha, lam, b)
    c = 1.0 - alpha
    v1 = (1.0 - c * lam * b) / (alpha * lam)
    q1 = pareto_survival(alpha, lam * (v1 - b))
    return HatDist(alpha, lam * q1 ** c, v1)


def dominates(upper, lower, grid: Sequence[float], slack: float = 1e-12) -> bool:
    """First-order dominance check on a grid of values."""
    return all(upper.survival_ge(v) >= lower.survival_ge(v) - slack for v in grid)
