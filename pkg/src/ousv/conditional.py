"""Path-frozen (conditional) Black-Scholes value and averaged variance.

Conditionally on the volatility path, log S_T is Gaussian, so the inner
expectation of the call payoff is a Black-Scholes expression evaluated at
the volatility averaged from now to maturity,

    sigma_bar^2 = (1/T) * integral_0^T sigma(Y_s)^2 ds.

``conditional_call_value`` returns that inner expectation UNDISCOUNTED;
pricers apply the single exp(-r*T) discount.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .ou import OUParams, OUPath
from .vols import VolSpec, vol_eval

__all__ = ["MarketParams", "OptionSpec", "AvgVol", "ModelParams",
           "DegenerateVolatilityError", "std_normal_cdf", "bs_d1_d2",
           "conditional_call_value", "avg_var_forward"]


class DegenerateVolatilityError(ValueError):
    """Raised where a formula requires sigma_bar > 0."""


@dataclass(frozen=True)
class MarketParams:
    """Spot, risk-free rate and objective-measure drift.

    The drift enters only the measure-change diagnostics; pricing is done
    under the risk-neutral measure where it cancels.
    """
    spot: float
    rate: float
    drift: float = 0.0

    def __post_init__(self):
        if not self.spot > 0:
            raise ValueError(f"spot must be positive, got {self.spot}")


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    maturity: float

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")


@dataclass(frozen=True)
class AvgVol:
    """Volatility averaged from time 0 to maturity."""
    sigma_bar: float

    def __post_init__(self):
        if self.sigma_bar < 0:
            raise ValueError("sigma_bar must be nonnegative")


@dataclass(frozen=True)
class ModelParams:
    """Market, OU driver and volatility function of one model instance."""
    market: MarketParams
    ou: OUParams
    vol: VolSpec


def std_normal_cdf(x):
    """Standard normal distribution function, |error| <= 1e-12 for all x."""
    return ndtr(x)


def bs_d1_d2(S: float, K: float, r: float, T: float, sigma_bar):
    """The pair (d1, d2) with d2 = d1 - sigma_bar*sqrt(T).

    Vectorized over sigma_bar; every entry must be positive.
    """
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    if np.any(sigma_bar <= 0):
        raise DegenerateVolatilityError(
            "sigma_bar must be positive; use the deterministic-payoff branch at 0")
    if S <= 0 or K <= 0 or T <= 0:
        raise ValueError("S, K, T must be positive")
    svt = sigma_bar * np.sqrt(T)
    d1 = (np.log(S) + r * T - np.log(K)) / svt + 0.5 * svt
    return d1, d1 - svt


def conditional_call_value(S: float, K: float, r: float, T: float, sigma_bar):
    """Undiscounted inner call value S*e^{rT}*Phi(d1) - K*Phi(d2).

    sigma_bar = 0 is handled by continuity as the deterministic payoff
    max(S*e^{rT} - K, 0). Vectorized over sigma_bar.
    """
    sigma_bar = np.asarray(sigma_bar, dtype=float)
    scalar = sigma_bar.ndim == 0
    sigma_bar = np.atleast_1d(sigma_bar)
    if np.any(sigma_bar < 0):
        raise ValueError("sigma_bar must be nonnegative")
    forward = S * np.exp(r * T)
    out = np.empty(sigma_bar.shape)
    zero = sigma_bar == 0
    out[zero] = max(forward - K, 0.0)
    if (~zero).any():
        d1, d2 = bs_d1_d2(S, K, r, T, sigma_bar[~zero])
        out[~zero] = forward * ndtr(d1) - K * ndtr(d2)
    return float(out[0]) if scalar else out


def avg_var_forward(path: OUPath, v: VolSpec) -> float:
    """sigma_bar_0^2: trapezoid rule for (1/T) * integral of sigma(Y_s)^2 over the path."""
    times = path.grid.times
    sig_sq = vol_eval(v, path.values) ** 2
    return float(np.trapezoid(sig_sq, times) / times[-1])
