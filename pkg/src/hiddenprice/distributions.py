"""Alpha-regular valuation distributions.

Every distribution exposes the same small set of primitives:

* ``survival_ge(v)``: P[X >= v], atoms included (this is what a posted
  price sees, since a buyer with value exactly ``v`` accepts);
* ``survival_gt(v)``: P[X > v], the right-continuous accessor;
* ``quantile(q)``: the largest ``x`` with P[X >= x] >= q, i.e. VaR_q;
* ``tail_integral(x)``: integral of P[X > v] over [x, inf).

Module level functions (``revenue``, ``opt_price``, ``mean``, ``lnorm``,
``var_q``, ``cvar_q``, ``critical_interval``, ``sample``) are built on top
of them, so new distribution types only need the primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .numerics import (
    DEFAULT_TOL,
    INF,
    Tolerances,
    adaptive_simpson,
    find_root_monotone,
    gamma_lower,
    gamma_upper_scaled,
)

EXP_BRANCH_EPS = 1e-9


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def is_exp_branch(alpha: float) -> bool:
    """True when alpha is close enough to 1 to use the exponential limit."""
    return 1.0 - alpha < EXP_BRANCH_EPS


# ---------------------------------------------------------------------------
# generalized Pareto survival


def pareto_survival(alpha: float, v: float) -> float:
    """(1 + (1-alpha) v)^(-1/(1-alpha)), or e^-v in the alpha = 1 limit."""
    if v < 0:
        raise DomainError(f"pareto_survival needs v >= 0, got {v}")
    if math.isinf(v):
        return 0.0
    c = 1.0 - alpha
    if c < EXP_BRANCH_EPS:
        return math.exp(-v)
    return math.exp(-math.log1p(c * v) / c)


def pareto_survival_inv(alpha: float, q: float) -> float:
    """Inverse of ``pareto_survival`` for q in (0, 1]."""
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    c = 1.0 - alpha
    if c < EXP_BRANCH_EPS:
        return -math.log(q)
    return math.expm1(-c * math.log(q)) / c


def pareto_survival_np(alpha: float, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    c = 1.0 - alpha
    if c < EXP_BRANCH_EPS:
        return np.exp(-v)
    with np.errstate(over="ignore"):
        return np.exp(-np.log1p(c * v) / c)


def pareto_survival_inv_np(alpha: float, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    c = 1.0 - alpha
    with np.errstate(divide="ignore"):
        if c < EXP_BRANCH_EPS:
            return -np.log(q)
        return np.expm1(-c * np.log(q)) / c


def pareto_integral(alpha: float, u0: float, u1: float) -> float:
    """Integral of ``pareto_survival(alpha, u)`` over [u0, u1]; ``u1`` may be inf."""
    if u1 <= u0:
        return 0.0
    c = 1.0 - alpha
    if c < EXP_BRANCH_EPS:
        return math.exp(-u0) - (0.0 if math.isinf(u1) else math.exp(-u1))
    if alpha == 0.0:
        return INF if math.isinf(u1) else math.log1p(u1) - math.log1p(u0)
    # (E(u0)^alpha - E(u1)^alpha) / alpha, through expm1 to stay accurate for tiny alpha
    e0 = math.expm1(-alpha * math.log1p(c * u0) / c)
    e1 = -1.0 if math.isinf(u1) else math.expm1(-alpha * math.log1p(c * u1) / c)
    return (e0 - e1) / alpha


# ---------------------------------------------------------------------------
# distribution types


def _fmt(x: float):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


@dataclass(frozen=True)
class CheckDist:
    """Scaled generalized Pareto truncated at ``a`` with an atom there.

    P[X >= v] = E(lam v) for v <= a and 0 above. ``lam = 0`` is the point
    mass at ``a``. Membership in the minimal boundary family needs
    ``alpha * lam * a <= 1`` (see ``in_family``), which is not enforced.
    """

    alpha: float
    lam: float
    a: float

    kind = "check"

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not self.lam >= 0 or math.isinf(self.lam):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam}")
        if not 0 < self.a < INF:
            raise DomainError(f"a must be positive and finite, got {self.a}")

    @property
    def in_family(self) -> bool:
        return self.alpha * self.lam * self.a <= 1.0 + 1e-12

    @property
    def support_max(self) -> float:
        return self.a

    def survival_ge(self, v: float) -> float:
        if v <= 0:
            return 1.0
        if v > self.a:
            return 0.0
        return pareto_survival(self.alpha, self.lam * v)

    def survival_gt(self, v: float) -> float:
        if v < 0:
            return 1.0
        if v >= self.a:
            return 0.0
        return pareto_survival(self.alpha, self.lam * v)

    def opt_price(self) -> float:
        if self.alpha * self.lam * self.a <= 1.0:
            return self.a
        return 1.0 / (self.alpha * self.lam)

    def quantile(self, q: float) -> float:
        if self.lam == 0:
            return self.a
        return min(self.a, pareto_survival_inv(self.alpha, q) / self.lam)

    def quantile_np(self, q: np.ndarray) -> np.ndarray:
        if self.lam == 0:
            return np.full(np.shape(q), self.a)
        return np.minimum(self.a, pareto_survival_inv_np(self.alpha, q) / self.lam)

    def tail_integral(self, x: float) -> float:
        x = max(x, 0.0)
        if x >= self.a:
            return 0.0
        if self.lam == 0:
            return self.a - x
        return pareto_integral(self.alpha, self.lam * x, self.lam * self.a) / self.lam

    def lnorm_closed(self, eta: float) -> Optional[float]:
        if not is_exp_branch(self.alpha):
            return None
        mu = self.lam * self.a
        if mu == 0:
            return self.a
        inner = mu ** (-eta) * gamma_lower(eta + 1.0, mu) + math.exp(-mu)
        return self.a * inner ** (1.0 / eta)

    def quantile_kinks(self) -> list:
        """Levels q at which the quantile function is not smooth."""
        return [self.survival_ge(self.a)]

    def scaled(self, beta: float) -> "CheckDist":
        return CheckDist(self.alpha, self.lam / beta, self.a * beta)

    def params(self) -> dict:
        return {"lambda": self.lam, "a": self.a}


@dataclass(frozen=True)
class HatDist:
    """Generalized Pareto shifted to start at ``b``.

    P[X >= v] = 1 for v <= b and E(lam (v - b)) above. Membership in the
    maximal boundary family needs ``lam * b >= 1`` (see ``in_family``).
    """

    alpha: float
    lam: float
    b: float

    kind = "hat"

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not 0 < self.lam < INF:
            raise DomainError(f"lambda must be positive and finite, got {self.lam}")
        if not 0 <= self.b < INF:
            raise DomainError(f"b must be finite and >= 0, got {self.b}")

    @property
    def in_family(self) -> bool:
        return self.lam * self.b >= 1.0 - 1e-12

    @property
    def support_max(self) -> float:
        return INF

    def survival_ge(self, v: float) -> float:
        if v <= self.b:
            return 1.0
        return pareto_survival(self.alpha, self.lam * (v - self.b))

    survival_gt = survival_ge

    def opt_price(self) -> float:
        lb = self.lam * self.b
        if lb >= 1.0:
            return self.b
        if self.alpha == 0.0:
            raise DomainError("revenue of this distribution increases without attaining its supremum")
        return (1.0 - (1.0 - self.alpha) * lb) / (self.alpha * self.lam)

    def quantile(self, q: float) -> float:
        return self.b + pareto_survival_inv(self.alpha, q) / self.lam

    def quantile_np(self, q: np.ndarray) -> np.ndarray:
        return self.b + pareto_survival_inv_np(self.alpha, q) / self.lam

    def log_quantile_at_depth(self, y: float) -> float:
        """log quantile(e^-y), finite even where the quantile overflows."""
        c = 1.0 - self.alpha
        if c < EXP_BRANCH_EPS:
            return math.log(self.b + y / self.lam) if self.b + y > 0 else -INF
        if y == 0.0:
            return math.log(self.b) if self.b > 0 else -INF
        # log(expm1(c y)) without forming e^(c y)
        tail = c * y + math.log(-math.expm1(-c * y)) - math.log(c * self.lam)
        return float(np.logaddexp(math.log(self.b), tail)) if self.b > 0 else tail

    def tail_integral(self, x: float) -> float:
        x = max(x, 0.0)
        head = max(self.b - x, 0.0)
        return head + pareto_integral(self.alpha, self.lam * max(x - self.b, 0.0), INF) / self.lam

    def moment_diverges(self, eta: float) -> bool:
        c = 1.0 - self.alpha
        return c >= EXP_BRANCH_EPS and eta * c >= 1.0

    def lnorm_closed(self, eta: float) -> Optional[float]:
        if not is_exp_branch(self.alpha):
            return None
        mu = self.lam * self.b
        if mu == 0:
            return math.gamma(eta + 1.0) ** (1.0 / eta) / self.lam
        inner = mu * gamma_upper_scaled(eta + 1.0, mu)
        return self.b * inner ** (1.0 / eta)

    def quantile_kinks(self) -> list:
        return []

    def scaled(self, beta: float) -> "HatDist":
        return HatDist(self.alpha, self.lam / beta, self.b * beta)

    def params(self) -> dict:
        return {"lambda": self.lam, "b": self.b}


@dataclass(frozen=True)
class UniformDist:
    """Uniform distribution on [a, b] (MHR, so alpha = 1)."""

    a: float
    b: float

    kind = "uniform"
    alpha = 1.0

    def __post_init__(self):
        if not (0 <= self.a <= self.b < INF):
            raise DomainError(f"need 0 <= a <= b < inf, got a={self.a}, b={self.b}")

    @property
    def support_max(self) -> float:
        return self.b

    def survival_ge(self, v: float) -> float:
        if v <= self.a:
            return 1.0
        if v > self.b:
            return 0.0
        return (self.b - v) / (self.b - self.a)

    def survival_gt(self, v: float) -> float:
        if v < self.a:
            return 1.0
        if v >= self.b:
            return 0.0
        return (self.b - v) / (self.b - self.a)

    def opt_price(self) -> float:
        return self.a if 2 * self.a >= self.b else self.b / 2

    def quantile(self, q: float) -> float:
        return self.b - q * (self.b - self.a)

    def quantile_np(self, q: np.ndarray) -> np.ndarray:
        return self.b - np.asarray(q, dtype=float) * (self.b - self.a)

    def tail_integral(self, x: float) -> float:
        x = max(x, 0.0)
        w = self.b - self.a
        if x <= self.a:
            return (self.a - x) + w / 2
        if x >= self.b:
            return 0.0
        return (self.b - x) ** 2 / (2 * w)

    def lnorm_closed(self, eta: float) -> Optional[float]:
        if self.a == self.b:
            return self.a
        m = (self.b ** (eta + 1) - self.a ** (eta + 1)) / ((eta + 1) * (self.b - self.a))
        return m ** (1.0 / eta)

    def quantile_kinks(self) -> list:
        return []

    def scaled(self, beta: float) -> "UniformDist":
        return UniformDist(self.a * beta, self.b * beta)

    def params(self) -> dict:
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class GeneralRegular:
    """Alpha-regular distribution with survival E(psi(v)) for a convex
    piecewise-linear psi through the origin.

    ``breakpoints`` lists (v_i, psi_i) with v_0 = 0, psi_0 = 0 and strictly
    increasing v_i; the last slope continues to infinity. Slopes must be
    nonnegative and nondecreasing, which is exactly the convexity test for
    alpha-regularity. An optional ``cap`` truncates the support, putting
    the remaining mass E(psi(cap)) as an atom at ``cap``.
    """

    alpha: float
    breakpoints: tuple
    cap: Optional[float] = None

    kind = "general"

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        pts = tuple((float(v), float(p)) for v, p in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        if len(pts) < 2:
            raise DomainError("need at least two breakpoints")
        if pts[0] != (0.0, 0.0):
            raise DomainError("psi must start at (0, 0)")
        vs = np.array([p[0] for p in pts])
        ps = np.array([p[1] for p in pts])
        if np.any(np.diff(vs) <= 0):
            raise DomainError("breakpoint abscissae must increase strictly")
        slopes = np.diff(ps) / np.diff(vs)
        if np.any(slopes < 0):
            raise DomainError("psi slopes must be nonnegative")
        if np.any(np.diff(slopes) < -1e-12 * np.maximum(1.0, np.abs(slopes[1:]))):
            raise DomainError("psi must be convex (nondecreasing slopes)")
        if self.cap is not None:
            if not 0 < self.cap < INF:
                raise DomainError(f"cap must be positive and finite, got {self.cap}")
        elif slopes[-1] <= 0:
            raise DomainError("an uncapped distribution needs a positive final slope")
        object.__setattr__(self, "_v", vs)
        object.__setattr__(self, "_psi", ps)
        object.__setattr__(self, "_slopes", slopes)

    @classmethod
    def from_slopes(cls, alpha, knots: Sequence[float], slopes: Sequence[float], cap=None):
        """Build from interior knots and the slope on each piece."""
        if len(slopes) != len(knots) + 1:
            raise DomainError("need one more slope than knots")
        pts = [(0.0, 0.0)]
        edges = list(knots) + [(knots[-1] if knots else 0.0) + 1.0]
        v0, p0 = 0.0, 0.0
        for v1, s in zip(edges, slopes):
            p0 += s * (v1 - v0)
            v0 = v1
            pts.append((v0, p0))
        return cls(alpha, tuple(pts), cap)

    @property
    def support_max(self) -> float:
        return INF if self.cap is None else self.cap

    def _segment(self, v: float) -> int:
        i = int(np.searchsorted(self._v, v, side="right")) - 1
        return min(max(i, 0), self._slopes.size - 1)

    def psi(self, v: float) -> float:
        i = self._segment(v)
        return float(self._psi[i] + self._slopes[i] * (v - self._v[i]))

    def right_slope(self, v: float) -> float:
        return float(self._slopes[self._segment(v)])

    def survival_ge(self, v: float) -> float:
        if v <= 0:
            return 1.0
        if self.cap is not None and v > self.cap:
            return 0.0
        return pareto_survival(self.alpha, self.psi(v))

    def survival_gt(self, v: float) -> float:
        if v < 0:
            return 1.0
        if self.cap is not None and v >= self.cap:
            return 0.0
        return pareto_survival(self.alpha, self.psi(v))

    def _psi_inv_np(self, u: np.ndarray) -> np.ndarray:
        """Largest v with psi(v) <= u."""
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(self._psi, u, side="right") - 1
        idx = np.clip(idx, 0, self._slopes.size - 1)
        # flat pieces can only be the leading ones; step past them
        slope = self._slopes[idx]
        flat = slope <= 0
        if np.any(flat):
            idx = np.where(flat, idx + 1, idx)
            idx = np.clip(idx, 0, self._slopes.size - 1)
            slope = self._slopes[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self._v[idx] + (u - self._psi[idx]) / slope
        return np.where(np.isinf(u), INF, v)

    def quantile(self, q: float) -> float:
        return float(self.quantile_np(np.array([q]))[0])

    def quantile_np(self, q: np.ndarray) -> np.ndarray:
        v = self._psi_inv_np(pareto_survival_inv_np(self.alpha, q))
        if self.cap is not None:
            v = np.minimum(v, self.cap)
        return v

    def opt_price(self) -> float:
        """Exact maximizer of v E(psi(v)).

        The sign of the revenue derivative is 1 + (1-alpha) psi(v) - psi'(v) v,
        which is affine and decreasing on each piece and jumps down at the
        knots, so the first sign change locates the optimum.
        """
        c = 1.0 - self.alpha
        n = self._slopes.size
        end = INF if self.cap is None else self.cap
        for i in range(n):
            v0 = float(self._v[i])
            if v0 >= end:
                return end
            s = float(self._slopes[i])
            p0 = float(self._psi[i])
            if 1.0 + c * p0 - s * v0 <= 0:
                return v0
            v1 = float(self._v[i + 1]) if i + 1 < n else INF
            v1 = min(v1, end)
            if self.alpha * s > 0:
                vstar = (1.0 + c * p0 - c * s * v0) / (self.alpha * s)
                if vstar < v1:
                    return vstar
            if math.isinf(v1):
                raise DomainError("revenue increases without attaining its supremum")
        return end

    def tail_integral(self, x: float) -> float:
        x = max(x, 0.0)
        end = INF if self.cap is None else self.cap
        if x >= end:
            return 0.0
        total = 0.0
        n = self._slopes.size
        for i in range(self._segment(x), n):
            lo = max(x, float(self._v[i]))
            hi = float(self._v[i + 1]) if i + 1 < n else INF
            hi = min(hi, end)
            if hi <= lo:
                continue
            s = float(self._slopes[i])
            if s == 0:
                total += pareto_survival(self.alpha, self.psi(lo)) * (hi - lo)
            else:
                u1 = INF if math.isinf(hi) else self.psi(hi)
                total += pareto_integral(self.alpha, self.psi(lo), u1) / s
            if hi >= end:
                break
        return total

    def moment_diverges(self, eta: float) -> bool:
        c = 1.0 - self.alpha
        return self.cap is None and c >= EXP_BRANCH_EPS and eta * c >= 1.0

    def lnorm_closed(self, eta: float) -> Optional[float]:
        return None

    def quantile_kinks(self) -> list:
        ks = [pareto_survival(self.alpha, float(p)) for p in self._psi[1:]]
        if self.cap is not None:
            ks.append(self.survival_ge(self.cap))
        return ks

    def scaled(self, beta: float) -> "GeneralRegular":
        pts = tuple((v * beta, p) for v, p in self.breakpoints)
        cap = None if self.cap is None else self.cap * beta
        return GeneralRegular(self.alpha, pts, cap)

    def params(self) -> dict:
        return {"breakpoints": [list(p) for p in self.breakpoints], "cap": self.cap}


Distribution = Union[CheckDist, HatDist, UniformDist, GeneralRegular]


def point_mass(a: float, alpha: float = 1.0) -> CheckDist:
    return CheckDist(alpha, 0.0, a)


# ---------------------------------------------------------------------------
# serialization


def dist_to_dict(dist: Distribution) -> dict:
    out = {"kind": dist.kind, "alpha": dist.alpha}
    out.update(dist.params())
    return out


def dist_from_dict(d: dict) -> Distribution:
    try:
        kind = d["kind"]
        if kind == "check":
            return CheckDist(float(d.get("alpha", 1.0)), float(d["lambda"]), float(d["a"]))
        if kind == "hat":
            return HatDist(float(d.get("alpha", 1.0)), float(d["lambda"]), float(d["b"]))
        if kind == "uniform":
            return UniformDist(float(d["a"]), float(d["b"]))
        if kind == "general":
            cap = d.get("cap")
            return GeneralRegular(
                float(d.get("alpha", 1.0)),
                tuple(tuple(p) for p in d["breakpoints"]),
                None if cap is None else float(cap),
            )
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed distribution record: {exc}") from None
    raise DomainError(f"unknown distribution kind {d.get('kind')!r}")


# ---------------------------------------------------------------------------
# revenue, statistics and critical intervals


@dataclass(frozen=True)
class CriticalInterval:
    lb: float
    ub: float
    gamma: float

    def to_dict(self) -> dict:
        return {"lb": self.lb, "ub": _fmt(self.ub), "gamma": self.gamma}


def survival_at_or_above(dist: Distribution, v: float) -> float:
    return dist.survival_ge(v)


def revenue(dist: Distribution, p: float) -> float:
    if p <= 0:
        return 0.0
    return p * dist.survival_ge(p)


def opt_price(dist: Distribution) -> tuple[float, float]:
    """Optimal posted price and the revenue it earns."""
    if isinstance(dist, UniformDist) and 2 * dist.a < dist.b:
        return dist.b / 2, dist.b ** 2 / (4 * (dist.b - dist.a))
    p = dist.opt_price()
    return p, revenue(dist, p)


def mean(dist: Distribution) -> float:
    return dist.tail_integral(0.0)


def var_q(dist: Distribution, q: float) -> float:
    if not 0.0 < q <= 1.0:
        raise DomainError(f"q must lie in (0, 1], got {q}")
    return dist.quantile(q)


def cvar_q(dist: Distribution, q: float) -> float:
    """Mean of the upper q-tail: VaR_q + (1/q) * integral of P[X > v] above VaR_q."""
    x = var_q(dist, q)
    return x + dist.tail_integral(x) / q


def moment_by_quantiles(dist: Distribution, eta: float, tol: float = 1e-12) -> float:
    """E[X^eta] as the integral of quantile(u)^eta over u in (0, 1].

    The substitution u = e^-y turns power-law tails into exponential decay
    in y, so the integrand is smooth and the range can be truncated.
    """
    if getattr(dist, "moment_diverges", lambda e: False)(eta):
        return INF
    c = 1.0 - dist.alpha
    decay = 1.0 if c < EXP_BRANCH_EPS else 1.0 - eta * c
    decay = min(decay, 1.0)
    y_end = 60.0 / decay + 10.0 * math.log1p(eta)
    cuts = {0.0, y_end}
    for q in dist.quantile_kinks():
        if 0 < q < 1:
            cuts.add(-math.log(q))
    atom_level = None
    if math.isfinite(dist.support_max):
        atom_level = dist.survival_ge(dist.support_max)
        if atom_level > 0:
            y_end = min(y_end, -math.log(atom_level))
    cuts = sorted(y for y in cuts if y <= y_end)
    if cuts[-1] < y_end:
        cuts.append(y_end)
    # sub-panels of moderate width keep Simpson's error estimate honest
    pts = []
    for y0, y1 in zip(cuts, cuts[1:]):
        k = max(1, int(math.ceil((y1 - y0) / 4.0)))
        pts.extend(y0 + (y1 - y0) * i / k for i in range(k))
    pts.append(cuts[-1])

    log_q = getattr(dist, "log_quantile_at_depth", None)

    def f(y):
        if log_q is None:
            return dist.quantile(math.exp(-y)) ** eta * math.exp(-y)
        lq = log_q(y)
        return 0.0 if lq == -INF else math.exp(eta * lq - y)

    total = math.fsum(adaptive_simpson(f, y0, y1, tol) for y0, y1 in zip(pts, pts[1:]))
    if atom_level is not None and atom_level > 0:
        total += dist.support_max ** eta * atom_level
    return total


def lnorm(dist: Distribution, eta: float) -> float:
    """(E[X^eta])^(1/eta); values of eta in (0, 1) give the quasi-norm."""
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    if eta == 1.0:
        return mean(dist)
    if getattr(dist, "moment_diverges", lambda e: False)(eta):
        return INF
    closed = dist.lnorm_closed(eta)
    if closed is not None:
        return closed
    if isinstance(dist, HatDist) and dist.alpha == 0.0:
        return INF
    m = moment_by_quantiles(dist, eta)
    return m ** (1.0 / eta)


def critical_interval(
    dist: Distribution, gamma: float, tol: Tolerances = DEFAULT_TOL
) -> CriticalInterval:
    """Prices whose revenue is at least gamma * OPT form [lb, ub]."""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma must lie in [0, 1], got {gamma}")
    p_star, opt = opt_price(dist)
    if gamma == 1.0:
        return CriticalInterval(p_star, p_star, gamma)
    target = gamma * opt

    def rev(p):
        return revenue(dist, p)

    lb = 0.0 if gamma == 0.0 else find_root_monotone(rev, 0.0, p_star, target, tol)

    top = dist.support_max
    if math.isfinite(top) and rev(top) >= target:
        return CriticalInterval(lb, top, gamma)
    if gamma == 0.0:
        return CriticalInterval(lb, top, gamma)
    hi = 2.0 * p_star if p_star > 0 else 1.0
    if math.isfinite(top):
        hi = min(hi, top)
    while rev(hi) >= target:
        if hi > 1e12 * max(p_star, 1e-300):
            return CriticalInterval(lb, INF, gamma)
        hi = min(2.0 * hi, top)
    ub = find_root_monotone(rev, p_star, hi, target, tol)
    return CriticalInterval(lb, ub, gamma)


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


def sample(dist: Distribution, rng_seed: int, n: int, stream: int = 0) -> np.ndarray:
    """Inverse-transform samples, deterministic in (rng_seed, stream)."""
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    u = rng_for(rng_seed, stream).random(n)
    # 1 - u lies in (0, 1], the domain of the quantile maps
    return dist.quantile_np(1.0 - u)
