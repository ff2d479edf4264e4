"""Ornstein-Uhlenbeck volatility driver: closed-form moments and exact simulation.

The process dY = -alpha*Y dt + k dW is Gaussian with

    E[Y_t]   = y0 * exp(-alpha*t)
    Var[Y_t] = k^2/(2*alpha) * (1 - exp(-2*alpha*t))

and a Gaussian transition law, so paths are sampled exactly on any grid:
the marginal law of (Y_{t_0}, ..., Y_{t_N}) carries no discretization bias.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import normal_stream

__all__ = ["OUParams", "TimeGrid", "OUPath",
           "ou_mean", "ou_variance", "ou_covariance",
           "simulate_ou", "simulate_ou_batch"]


@dataclass(frozen=True)
class OUParams:
    """Mean-reversion rate, diffusion coefficient and initial value of Y."""
    alpha: float
    k_vol: float
    y0: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.k_vol < 0:
            raise ValueError(f"k_vol must be nonnegative, got {self.k_vol}")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing time points with times[0] == 0."""
    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("grid needs at least 2 time points")
        if t[0] != 0.0:
            raise ValueError("grid must start at exactly 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon: float, n_steps: int = 512) -> "TimeGrid":
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        return cls(np.linspace(0.0, horizon, n_steps + 1))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)


@dataclass(frozen=True, eq=False)
class OUPath:
    """One sampled trajectory of Y on a grid."""
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.times.shape:
            raise ValueError("values and grid must have equal length")
        object.__setattr__(self, "values", v)


def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    return t


def ou_mean(p: OUParams, t):
    """E[Y_t] = y0 * exp(-alpha*t)."""
    t = _check_time(t)
    return p.y0 * np.exp(-p.alpha * t)


def ou_variance(p: OUParams, t):
    """Var[Y_t] = k^2/(2*alpha) * (1 - exp(-2*alpha*t))."""
    t = _check_time(t)
    return p.k_vol ** 2 / (2.0 * p.alpha) * (-np.expm1(-2.0 * p.alpha * t))


def ou_covariance(p: OUParams, s, t):
    """Cov(Y_s, Y_t) = k^2/(2*alpha) * exp(-alpha*(s+t)) * (exp(2*alpha*min(s,t)) - 1)."""
    s = _check_time(s)
    t = _check_time(t)
    return (p.k_vol ** 2 / (2.0 * p.alpha)
            * np.exp(-p.alpha * (s + t))
            * np.expm1(2.0 * p.alpha * np.minimum(s, t)))


def transition_coefficients(p: OUParams, grid: TimeGrid):
    """Per-step decay factors and innovation standard deviations.

    Y_{i+1} = Y_i * decay_i + sd_i * Z_i with Z_i iid standard normal is the
    exact transition over step i.
    """
    dt = np.diff(grid.times)
    decay = np.exp(-p.alpha * dt)
    sd = np.sqrt(p.k_vol ** 2 / (2.0 * p.alpha) * (-np.expm1(-2.0 * p.alpha * dt)))
    return decay, sd


def simulate_ou_batch(p: OUParams, grid: TimeGrid, seed: int,
                      n_paths: int, path_lo: int = 0) -> np.ndarray:
    """Exact-transition sampling of n_paths trajectories, shape (n_paths, len(grid)).

    Row i is the path with stream index path_lo + i; the result is a pure
    function of (p, grid, seed, path index).
    """
    decay, sd = transition_coefficients(p, grid)
    z = normal_stream(seed, path_lo, n_paths, grid.n_steps)
    y = np.empty((n_paths, len(grid)))
    y[:, 0] = p.y0
    for i in range(grid.n_steps):
        y[:, i + 1] = y[:, i] * decay[i] + sd[i] * z[:, i]
    return y


def simulate_ou(p: OUParams, grid: TimeGrid, seed: int, path_index: int = 0) -> OUPath:
    """Sample one exact OU trajectory, deterministic given (p, grid, seed, path_index)."""
    values = simulate_ou_batch(p, grid, seed, 1, path_lo=path_index)[0]
    return OUPath(grid, values)
