"""Multivariate tail dependence coefficients for Archimedean copulas.

The generalized coefficient conditions the first h coordinates' joint
exceedance on the last d-h coordinates exceeding the same extreme
threshold. Closed-form limits per family:

  lower:  Clayton (d/(d-h))^(-1/rho); outer-power Clayton
          (d/(d-h))^(-1/(rho*beta)); Gumbel and Frank 0.
  upper:  Gumbel T_d(1/rho) / T_{d-h}(1/rho) where
          T_n(a) = -sum_{i=1..n} C(n,i) (-1)^i i^a (the alternating
          binomial limit of the exceedance ratio; bivariate case
          2 - 2^(1/rho)); outer-power Clayton the same with a = 1/beta;
          Clayton and Frank 0.

Mixture coefficients are the weight-linear combination of the component
coefficients. An empirical conditional-exceedance estimator doubles as the
Monte Carlo oracle for the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .copulas import CopulaSpec, Family, MixtureSpec


class TailSide(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class TdQuery:
    """Coordinate split: first h coordinates conditioned on the last d-h."""

    d: int
    h: int
    side: TailSide

    def __post_init__(self):
        object.__setattr__(self, "side", TailSide(self.side))
        if not (1 <= self.h < self.d):
            raise ValueError(f"need 1 <= h < d, got h={self.h}, d={self.d}")


@dataclass(frozen=True)
class TailDependenceSeries:
    dates: tuple
    basket_side: str
    upper: tuple
    lower: tuple

    def __post_init__(self):
        if not (len(self.dates) == len(self.upper) == len(self.lower)):
            raise ValueError("dates/upper/lower must have equal lengths")
        for v in list(self.upper) + list(self.lower):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"tail dependence value outside [0,1]: {v}")


def _alt_binom_power(n: int, a: float) -> float:
    """T_n(a) = -sum_{i=1}^n C(n,i) (-1)^i i^a, positive for a in (0,1)."""
    return -math.fsum(
        math.comb(n, i) * (-1) ** i * i ** a for i in range(1, n + 1)
    )


def td_single(spec: CopulaSpec, q: TdQuery) -> float:
    """Closed-form tail dependence coefficient for one family."""
    d, h = q.d, q.h
    ratio = d / (d - h)
    if q.side is TailSide.LOWER:
        if spec.family is Family.CLAYTON:
            return ratio ** (-1.0 / spec.rho)
        if spec.family is Family.OP_CLAYTON:
            return ratio ** (-1.0 / (spec.rho * spec.beta))
        return 0.0
    # upper
    if spec.family is Family.GUMBEL:
        alpha = 1.0 / spec.rho
        if alpha == 1.0:
            return 0.0
        return _alt_binom_power(d, alpha) / _alt_binom_power(d - h, alpha)
    if spec.family is Family.OP_CLAYTON:
        alpha = 1.0 / spec.beta
        if alpha == 1.0:
            return 0.0
        return _alt_binom_power(d, alpha) / _alt_binom_power(d - h, alpha)
    return 0.0


def td_mixture(mix: MixtureSpec, q: TdQuery) -> float:
    """Weight-linear combination of component coefficients."""
    return float(sum(w * td_single(spec, q) for spec, w in mix.components))


def td_empirical(samples: np.ndarray, q: TdQuery, threshold: float) -> float:
    """Conditional exceedance frequency at a finite threshold.

    Upper side: fraction of rows with all d coordinates above the threshold
    among rows whose last d-h coordinates all exceed it (threshold near 1).
    Lower side mirrors with coordinates below a threshold near 0. Returns 0
    when the conditioning event never occurs.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != q.d:
        raise ValueError(f"samples must be n x {q.d}, got shape {x.shape}")
    if x.shape[0] < 10_000:
        raise ValueError("empirical tail dependence needs at least 10^4 samples")
    if q.side is TailSide.UPPER:
        if not (0.9 < threshold < 1.0):
            raise ValueError(f"upper threshold must lie in (0.9, 1), got {threshold}")
        exceed = x > threshold
    else:
        if not (0.0 < threshold < 0.1):
            raise ValueError(f"lower threshold must lie in (0, 0.1), got {threshold}")
        exceed = x < threshold
    cond = np.all(exceed[:, q.h :], axis=1)
    denom = int(np.count_nonzero(cond))
    if denom == 0:
        return 0.0
    num = int(np.count_nonzero(cond & np.all(exceed[:, : q.h], axis=1)))
    return num / denom


def td_series(fits, q_upper: TdQuery | None = None, q_lower: TdQuery | None = None,
              basket_side: str = "") -> TailDependenceSeries:
    """Per-date tail dependence of fitted window mixtures.

    The dimension follows each window's basket size; the conditioned count h
    (default 1) and sides come from the query templates when given.
    """
    h_upper = q_upper.h if q_upper is not None else 1
    h_lower = q_lower.h if q_lower is not None else 1
    fits = sorted(fits, key=lambda f: f.end_date)
    dates, upper, lower = [], [], []
    for fit in fits:
        d = len(fit.basket)
        dates.append(fit.end_date)
        upper.append(td_mixture(fit.mixture, TdQuery(d, h_upper, TailSide.UPPER)))
        lower.append(td_mixture(fit.mixture, TdQuery(d, h_lower, TailSide.LOWER)))
    return TailDependenceSeries(
        dates=tuple(dates), basket_side=basket_side, upper=tuple(upper), lower=tuple(lower)
    )
