"""Monte Carlo pricers and martingale-measure diagnostics.

Two estimators of the same time-0 price:

  * terminal: simulate log S_T along exact OU volatility paths
    (left-point discretization of the stochastic integral, which is exact
    in law for the grid's filtration) and average the discounted payoff;
  * mixing: average the conditional (path-frozen) call value over the
    averaged volatility of the same paths. Conditioning integrates out the
    payoff noise, so its standard error is strictly smaller at equal paths.

Both run on the common counter-based streams: with equal seeds they share
volatility paths, which sharpens cross-method comparisons.

Diagnostics verify the measure construction numerically: the discounted
price is a martingale under the pricing measure, and the Girsanov density
L_T simulated under the objective measure has unit mean (with the Novikov
exponent bound reported from the volatility floor).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from scipy.special import ndtri

from .avgvar import _avg_var_kernel, _vol_scalar
from .conditional import ModelParams, OptionSpec, conditional_call_value
from .ou import TimeGrid, transition_coefficients
from .rng import uniform_stream, block_offset
from .vols import family_code, vol_bounds, vol_eval

__all__ = ["PriceResult", "MeasureSpec", "MethodNotApplicableError",
           "mc_price_terminal", "mc_price_mixing",
           "martingale_check", "density_check",
           "CheckpointStat", "MartingaleReport", "DensityReport"]

PATH_CHUNK = 16384


class MethodNotApplicableError(ValueError):
    """Method preconditions (on the measure spec) are not met."""


@dataclass(frozen=True)
class PriceResult:
    """A price with its uncertainty and reproducibility metadata."""
    price: float
    stderr: float
    method: str
    n_paths: int
    seed: int
    config_digest: str = ""
    quad_tol: float = 0.0

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.price < 0:
            if self.price < -1e-8:
                raise ValueError(f"negative price {self.price}")
            object.__setattr__(self, "price", 0.0)


@dataclass(frozen=True)
class MeasureSpec:
    """Market price of volatility risk (constant) and driver correlation.

    nu = 0 and rho = 0 is the minimal martingale measure, the only spec
    under which the pricing methods are valid; other values are accepted
    by simulation-only code paths, flagged experimental.
    """
    rho: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [-1, 1]")

    @property
    def is_mmm(self) -> bool:
        return self.rho == 0.0 and self.nu == 0.0


@njit(parallel=True, cache=True)
def _lns_kernel(zy, zb, dt, decay, sd, y0, fam, q0, q1, q2, q3,
                cp_steps, out):  # pragma: no cover
    """Martingale part of log S at checkpoint step counts.

    out[p, k] = sum_{i < cp_steps[k]} (sig_i * sqrt(dt_i) * zb_i - sig_i^2 dt_i / 2)
    with sig_i the volatility at the left grid point of step i.
    """
    n_paths = zy.shape[0]
    n_cp = len(cp_steps)
    for p in prange(n_paths):
        y = y0
        acc = 0.0
        k = 0
        while k < n_cp and cp_steps[k] == 0:
            out[p, k] = 0.0
            k += 1
        for i in range(zy.shape[1]):
            s = _vol_scalar(fam, q0, q1, q2, q3, y)
            acc += s * math.sqrt(dt[i]) * zb[p, i] - 0.5 * s * s * dt[i]
            y = y * decay[i] + sd[i] * zy[p, i]
            while k < n_cp and cp_steps[k] == i + 1:
                out[p, k] = acc
                k += 1


@njit(parallel=True, cache=True)
def _girsanov_kernel(zy, zb, dt, decay, sd, y0, fam, q0, q1, q2, q3,
                     kernel_scale, out):  # pragma: no cover
    """log L_T with Girsanov kernel gamma_i = kernel_scale / sig_i (left point)."""
    n_paths = zy.shape[0]
    for p in prange(n_paths):
        y = y0
        acc = 0.0
        for i in range(zy.shape[1]):
            s = _vol_scalar(fam, q0, q1, q2, q3, y)
            g = kernel_scale / s
            acc += g * math.sqrt(dt[i]) * zb[p, i] - 0.5 * g * g * dt[i]
            y = y * decay[i] + sd[i] * zy[p, i]
        out[p] = acc


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    if n > 1 and np.any(values != values[0]):
        stderr = float(values.std(ddof=1) / math.sqrt(n))
    else:
        # a degenerate sample has exactly zero standard error; np.std would
        # report the rounding noise of its two-pass mean instead
        stderr = 0.0
    return float(values.mean()), stderr


def _martingale_exponents(model: ModelParams, T: float, n_paths: int, grid_n: int,
                          seed: int, checkpoints_steps, antithetic: bool) -> np.ndarray:
    """Martingale exponents of log S at checkpoint steps, legs stacked first.

    exp of a column times spot * e^{r t} is the price at that checkpoint;
    keeping the exponent raw lets the t = 0 identity hold exactly.
    """
    grid = TimeGrid.uniform(T, grid_n)
    dt = np.diff(grid.times)
    decay, sd = transition_coefficients(model.ou, grid)
    fam, q0, q1, q2, q3 = family_code(model.vol)
    cp = np.asarray(checkpoints_steps, dtype=np.int64)
    off_b = block_offset(grid_n)
    legs = []
    for sign in ((1.0, -1.0) if antithetic else (1.0,)):
        acc = np.empty((n_paths, len(cp)))
        for lo in range(0, n_paths, PATH_CHUNK):
            hi = min(lo + PATH_CHUNK, n_paths)
            zy = sign * ndtri(uniform_stream(seed, lo, hi - lo, grid_n))
            zb = sign * ndtri(uniform_stream(seed, lo, hi - lo, grid_n, offset=off_b))
            _lns_kernel(zy, zb, dt, decay, sd, model.ou.y0, fam, q0, q1, q2, q3,
                        cp, acc[lo:hi])
        legs.append(acc)
    return np.stack(legs, axis=0)


def _terminal_lns_experimental(model: ModelParams, measure: MeasureSpec, T: float,
                               n_paths: int, grid_n: int, seed: int) -> np.ndarray:
    """Euler simulation of the risk-neutral dynamics with rho or nu nonzero.

    The volatility driver is no longer an OU process under the pricing
    measure (its drift depends on sigma), so exact transitions are not
    available; steps are doubled to damp the Euler bias.
    """
    steps = 2 * grid_n
    dt = T / steps
    sqdt = math.sqrt(dt)
    rho, nu = measure.rho, measure.nu
    mkt, ou, vol = model.market, model.ou, model.vol
    rho_c = math.sqrt(1.0 - rho * rho)
    off = block_offset(steps)
    out = np.empty(n_paths)
    for lo in range(0, n_paths, PATH_CHUNK):
        hi = min(lo + PATH_CHUNK, n_paths)
        zb = ndtri(uniform_stream(seed, lo, hi - lo, steps))
        zz = ndtri(uniform_stream(seed, lo, hi - lo, steps, offset=off))
        y = np.full(hi - lo, ou.y0)
        lns = np.full(hi - lo, math.log(mkt.spot))
        for i in range(steps):
            sig = vol_eval(vol, y)
            lns += (mkt.rate - 0.5 * sig ** 2) * dt + sig * sqdt * zb[:, i]
            dw = rho * zb[:, i] + rho_c * zz[:, i]
            drift = -ou.alpha * y - ou.k_vol * (
                rho * (mkt.drift - mkt.rate) / sig + nu * rho_c)
            y = y + drift * dt + ou.k_vol * sqdt * dw
        out[lo:hi] = lns
    return out


def mc_price_terminal(model: ModelParams, option: OptionSpec,
                      measure: MeasureSpec = MeasureSpec(), *,
                      n_paths: int = 100_000, grid_n: int = 512, seed: int = 0,
                      antithetic: bool = False,
                      config_digest: str = "") -> PriceResult:
    """Discounted terminal-payoff estimate of the call price.

    Under the minimal martingale measure the volatility path is exact; with
    rho or nu nonzero the estimate switches to the experimental Euler
    scheme and is tagged accordingly (an expectation under that measure,
    not a price backed by the pricing theory).
    """
    T, K = option.maturity, option.strike
    disc = math.exp(-model.market.rate * T)
    if measure.is_mmm:
        acc = _martingale_exponents(model, T, n_paths, grid_n, seed, [grid_n],
                                    antithetic)[:, :, 0]
        forward = model.market.spot * math.exp(model.market.rate * T)
        payoff = np.maximum(forward * np.exp(acc) - K, 0.0).mean(axis=0)
        method = "mc-terminal"
    else:
        lns = _terminal_lns_experimental(model, measure, T, n_paths, grid_n, seed)
        payoff = np.maximum(np.exp(lns) - K, 0.0)
        method = "mc-terminal-experimental"
    mean, stderr = _mean_stderr(payoff)
    return PriceResult(price=disc * mean, stderr=disc * stderr, method=method,
                       n_paths=n_paths, seed=seed, config_digest=config_digest)


def mc_price_mixing(model: ModelParams, option: OptionSpec,
                    measure: MeasureSpec = MeasureSpec(), *,
                    n_paths: int = 100_000, grid_n: int = 512, seed: int = 0,
                    antithetic: bool = False, samples=None,
                    config_digest: str = "") -> PriceResult:
    """Conditional (mixing) estimate: average the inner call value over paths.

    Requires the minimal martingale measure; with correlated drivers the
    conditioning argument breaks down and MethodNotApplicableError is
    raised. Pass a prebuilt averaged-variance sample set to reuse paths.
    """
    if not measure.is_mmm:
        raise MethodNotApplicableError(
            "mixing requires rho = 0 and nu = 0 (independent drivers under the MMM)")
    mkt = model.market
    T, K = option.maturity, option.strike
    disc = math.exp(-mkt.rate * T)
    if samples is not None:
        values = np.asarray(samples.values, dtype=float)
        n_paths, seed = samples.n_paths, samples.seed
        inner = conditional_call_value(mkt.spot, K, mkt.rate, T, np.sqrt(values))
    else:
        legs = []
        for sign in ((1.0, -1.0) if antithetic else (1.0,)):
            var = _avg_var_values(model, T, n_paths, grid_n, seed, sign)
            legs.append(conditional_call_value(mkt.spot, K, mkt.rate, T, np.sqrt(var)))
        inner = np.mean(legs, axis=0)
    mean, stderr = _mean_stderr(inner)
    return PriceResult(price=disc * mean, stderr=disc * stderr, method="mc-mixing",
                       n_paths=n_paths, seed=seed, config_digest=config_digest)


def _avg_var_values(model: ModelParams, T: float, n_paths: int, grid_n: int,
                    seed: int, sign: float = 1.0) -> np.ndarray:
    grid = TimeGrid.uniform(T, grid_n)
    dt = np.diff(grid.times)
    decay, sd = transition_coefficients(model.ou, grid)
    fam, q0, q1, q2, q3 = family_code(model.vol)
    out = np.empty(n_paths)
    for lo in range(0, n_paths, PATH_CHUNK):
        hi = min(lo + PATH_CHUNK, n_paths)
        z = sign * ndtri(uniform_stream(seed, lo, hi - lo, grid_n))
        _avg_var_kernel(z, dt, decay, sd, model.ou.y0, fam, q0, q1, q2, q3,
                        out[lo:hi])
    return out / T


# ---------------------------------------------------------------------------
# measure diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckpointStat:
    t: float
    mean: float
    stderr: float
    z: float
    passed: bool


@dataclass(frozen=True)
class MartingaleReport:
    """Sample means of the discounted price at checkpoints, against the spot.

    ``emm_bound`` is the analytic upper bound C^2 * T * sup_t E[X_t^2]
    <= C^2 * T * S^2 * exp(C^2 T) on the expected integrated squared
    volatility-times-price; finiteness (automatic for the bounded shipped
    families) is the checkable sufficient condition for the discounted
    price to be a true martingale rather than a local one.
    """
    spot: float
    checkpoints: tuple
    emm_bound: float
    n_paths: int
    seed: int

    @property
    def passed(self) -> bool:
        return math.isfinite(self.emm_bound) and all(c.passed for c in self.checkpoints)


@dataclass(frozen=True)
class DensityReport:
    """Unit-mean check of the Girsanov density plus the Novikov exponent bound."""
    novikov_bound: float
    mean: float
    stderr: float
    z: float
    n_paths: int
    seed: int

    @property
    def passed(self) -> bool:
        return math.isfinite(self.novikov_bound) and abs(self.mean - 1.0) <= 3.0 * self.stderr


def martingale_check(model: ModelParams, option: OptionSpec, *,
                     n_paths: int = 100_000, grid_n: int = 512, seed: int = 0,
                     t_checkpoints=None) -> MartingaleReport:
    """Verify E[e^{-rt} S_t] = S at each checkpoint (3-standard-error bands).

    Checkpoints are times in [0, maturity], snapped to grid points; the
    default is (T/4, T/2, T).
    """
    T = option.maturity
    if t_checkpoints is None:
        t_checkpoints = (T / 4, T / 2, T)
    steps = sorted({int(round(t / T * grid_n)) for t in t_checkpoints})
    if any(s < 0 or s > grid_n for s in steps):
        raise ValueError("checkpoints must lie in [0, maturity]")
    acc = _martingale_exponents(model, T, n_paths, grid_n, seed, steps, False)[0]
    times = np.array(steps) * (T / grid_n)
    spot = model.market.spot
    stats = []
    for j, t in enumerate(times):
        # e^{-rt} S_t = spot * exp(martingale exponent): the rate cancels exactly
        mean, stderr = _mean_stderr(spot * np.exp(acc[:, j]))
        z = (mean - spot) / stderr if stderr > 0 else 0.0
        stats.append(CheckpointStat(t=float(t), mean=mean, stderr=stderr, z=z,
                                    passed=abs(mean - spot) <= 3.0 * stderr))
    _, c_high = vol_bounds(model.vol)
    emm_bound = c_high ** 2 * T * spot ** 2 * math.exp(c_high ** 2 * T)
    return MartingaleReport(spot=spot, checkpoints=tuple(stats),
                            emm_bound=emm_bound, n_paths=n_paths, seed=seed)


def density_check(model: ModelParams, T: float, *,
                  n_paths: int = 100_000, grid_n: int = 512,
                  seed: int = 0) -> DensityReport:
    """Novikov bound and sample mean of L_T under the objective measure.

    With a constant Girsanov kernel bounded by |r - mu| / c the Novikov
    exponent is at most T (r - mu)^2 / (2 c^2), finite for every shipped
    volatility family; the simulated density must average 1 within 3
    standard errors.
    """
    mkt, ou, vol = model.market, model.ou, model.vol
    c_low, _ = vol_bounds(vol)
    novikov = 0.5 * T * (mkt.rate - mkt.drift) ** 2 / c_low ** 2
    grid = TimeGrid.uniform(T, grid_n)
    dt = np.diff(grid.times)
    decay, sd = transition_coefficients(ou, grid)
    fam, q0, q1, q2, q3 = family_code(vol)
    off_b = block_offset(grid_n)
    lnl = np.empty(n_paths)
    for lo in range(0, n_paths, PATH_CHUNK):
        hi = min(lo + PATH_CHUNK, n_paths)
        zy = ndtri(uniform_stream(seed, lo, hi - lo, grid_n))
        zb = ndtri(uniform_stream(seed, lo, hi - lo, grid_n, offset=off_b))
        _girsanov_kernel(zy, zb, dt, decay, sd, ou.y0, fam, q0, q1, q2, q3,
                         mkt.rate - mkt.drift, lnl[lo:hi])
    density = np.exp(lnl)
    mean, stderr = _mean_stderr(density)
    z = (mean - 1.0) / stderr if stderr > 0 else 0.0
    return DensityReport(novikov_bound=novikov, mean=mean, stderr=stderr, z=z,
                         n_paths=n_paths, seed=seed)
