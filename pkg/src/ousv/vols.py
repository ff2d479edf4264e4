"""Volatility function catalog.

Three parametric families, all measurable, bounded away from zero and
bounded above. The bounds (c, C) = vol_bounds(v) satisfy
c <= sigma(y) <= C for every real y; they feed the Novikov bound, the
moment-expansion trust radius, and the support of the averaged variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtr

__all__ = ["Constant", "ExpClamped", "SigmoidAffine", "VolSpec",
           "vol_eval", "vol_bounds"]


@dataclass(frozen=True)
class Constant:
    """sigma(y) = sigma0."""
    sigma0: float

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")


@dataclass(frozen=True)
class ExpClamped:
    """sigma(y) = clamp(a * exp(b*y), lo, hi)."""
    a: float
    b: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if not self.lo > 0:
            raise ValueError(f"lo must be positive, got {self.lo}")
        if not self.hi > self.lo:
            raise ValueError(f"hi must exceed lo, got lo={self.lo} hi={self.hi}")


@dataclass(frozen=True)
class SigmoidAffine:
    """sigma(y) = lo + (hi - lo) / (1 + exp(-y))."""
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo > 0:
            raise ValueError(f"lo must be positive, got {self.lo}")
        if not self.hi > self.lo:
            raise ValueError(f"hi must exceed lo, got lo={self.lo} hi={self.hi}")


VolSpec = Union[Constant, ExpClamped, SigmoidAffine]


def vol_eval(v: VolSpec, y):
    """Evaluate sigma(y); vectorized over y."""
    y = np.asarray(y, dtype=float)
    if isinstance(v, Constant):
        return np.full(y.shape, v.sigma0) if y.shape else v.sigma0
    if isinstance(v, ExpClamped):
        return np.clip(v.a * np.exp(v.b * y), v.lo, v.hi)
    if isinstance(v, SigmoidAffine):
        return v.lo + (v.hi - v.lo) / (1.0 + np.exp(-y))
    raise TypeError(f"not a VolSpec: {v!r}")


def vol_bounds(v: VolSpec) -> tuple[float, float]:
    """(c, C) with 0 < c <= sigma(y) <= C for all y."""
    if isinstance(v, Constant):
        return v.sigma0, v.sigma0
    if isinstance(v, (ExpClamped, SigmoidAffine)):
        return v.lo, v.hi
    raise TypeError(f"not a VolSpec: {v!r}")


# --- internals used by the moment quadrature and the numba kernels ---

# family codes for the fused path kernels; params packed as 4 floats
_FAMILY_CONSTANT = 0
_FAMILY_EXPCLAMPED = 1
_FAMILY_SIGMOID = 2


def family_code(v: VolSpec) -> tuple[int, float, float, float, float]:
    if isinstance(v, Constant):
        return _FAMILY_CONSTANT, v.sigma0, 0.0, 0.0, 0.0
    if isinstance(v, ExpClamped):
        return _FAMILY_EXPCLAMPED, v.a, v.b, v.lo, v.hi
    if isinstance(v, SigmoidAffine):
        return _FAMILY_SIGMOID, 0.0, 0.0, v.lo, v.hi
    raise TypeError(f"not a VolSpec: {v!r}")


def kink_points(v: VolSpec) -> tuple[float, ...]:
    """y-locations where sigma is not smooth (the clamp corners)."""
    if isinstance(v, ExpClamped) and v.b != 0.0:
        yl = math.log(v.lo / v.a) / v.b
        yh = math.log(v.hi / v.a) / v.b
        return (min(yl, yh), max(yl, yh))
    return ()


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(64)


def mean_sq(v: VolSpec, mu, sd):
    """E[sigma(Y)^2] for Y ~ N(mu, sd^2); vectorized over mu/sd.

    Constant and ExpClamped have closed forms (the latter via the truncated
    lognormal); SigmoidAffine is smooth, so 64-node Gauss-Hermite is exact
    to machine precision for practical parameters.
    """
    mu = np.asarray(mu, dtype=float)
    sd = np.asarray(sd, dtype=float)
    mu, sd = np.broadcast_arrays(mu, sd)
    if isinstance(v, Constant):
        return np.full(mu.shape, v.sigma0 ** 2)
    out = np.empty(mu.shape)
    degenerate = sd <= 0
    if degenerate.any():
        out[degenerate] = vol_eval(v, mu[degenerate]) ** 2
    live = ~degenerate
    if not live.any():
        return out
    m, s = mu[live], sd[live]
    if isinstance(v, ExpClamped):
        if v.b == 0.0:
            out[live] = float(np.clip(v.a, v.lo, v.hi)) ** 2
            return out
        yl, yh = kink_points(v)
        zl = (yl - m) / s
        zh = (yh - m) / s
        c = 2.0 * v.b
        mid = (v.a ** 2 * np.exp(c * m + 0.5 * c ** 2 * s ** 2)
               * (ndtr(zh - c * s) - ndtr(zl - c * s)))
        lo_sq, hi_sq = (v.lo ** 2, v.hi ** 2) if v.b > 0 else (v.hi ** 2, v.lo ** 2)
        out[live] = lo_sq * ndtr(zl) + hi_sq * (1.0 - ndtr(zh)) + mid
        return out
    # smooth family: Gauss-Hermite against the standard normal weight
    nodes = m[..., None] + np.sqrt(2.0) * s[..., None] * _GH_NODES
    vals = vol_eval(v, nodes) ** 2
    out[live] = (vals * _GH_WEIGHTS).sum(axis=-1) / np.sqrt(np.pi)
    return out
