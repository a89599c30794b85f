"""Robust posted pricing with a concealed sample from the buyer's distribution."""

from .bounds import concave_upper, gamma_alpha_upper, uniform_upper
from .distributions import (
    CheckDist,
    CriticalInterval,
    GeneralRegular,
    HatDist,
    UniformDist,
    critical_interval,
    cvar_q,
    lnorm,
    mean,
    opt_price,
    revenue,
    survival_at_or_above,
    var_q,
)
from .errors import (
    BracketError,
    DivergentMean,
    DivergentPayment,
    DivergentStatistic,
    DomainError,
    HiddenPriceError,
    PropernessError,
    TangentUndefined,
)
from .hiddenlp import COARSE, GridSpec, dual_lp_bound, feasibility_lp, verify_gamma
from .mechanisms import (
    CVaRRule,
    LNormRule,
    MeanRule,
    TableRule,
    UniformRule,
    best_report,
    payment,
    simulate_mechanism,
)
from .numerics import Tolerances
from .reduction import CVaR, LNorm, Mean, StatisticPolicy, VaR, optimize_discount, sweep_parameter

__version__ = "0.1.0"
