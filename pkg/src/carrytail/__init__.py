"""Tail dependence analytics for currency carry-trade baskets."""

from .copulas import (
    CopulaSpec,
    Family,
    MixtureSpec,
    adk_coefficients,
    copula_cdf,
    copula_log_density,
    generator,
    generator_deriv,
    inverse_generator,
    kendall_tau,
    mixture_log_density,
    polylog_neg_int,
    sample,
)
from .estimation import (
    Model,
    PseudoSample,
    WindowFit,
    compare_models,
    optimize,
    stage1_fit,
    stage2_fit,
)
from .marginals import (
    KsResult,
    LggdParams,
    ProfileTransformedParams,
    fit_lggd,
    fit_lognormal,
    ks_test,
    lggd_cdf,
    lggd_log_pdf,
    lggd_quantile,
)
from .panel import (
    ExclusionRule,
    LogReturnWindow,
    QuotePanel,
    apply_exclusions,
    carry_signal,
    extract_window,
    forward_fill,
    load_panel,
)
from .portfolio import (
    AdjustedReturns,
    BasketSnapshot,
    CarryReturns,
    adjust_returns,
    build_baskets,
    carry_returns,
    rolling_fit,
)
from .taildep import (
    TailDependenceSeries,
    TailSide,
    TdQuery,
    td_empirical,
    td_mixture,
    td_series,
    td_single,
)

__version__ = "0.1.0"
