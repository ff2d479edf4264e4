"""Exact call-price formulas: case split on the sign of ln(S/K) + rT.

The time-0 price is assembled from probabilities Q(sigma_bar_0 < sigma_i(s))
integrated against the standard normal weight, where sigma_1..sigma_4 are
the root functions of the quadratics linking the averaged volatility to the
d1/d2 arguments. The moneyness term m = ln(S/K) + rT selects the case and
sets the integration boundary kappa = sqrt(2|m|).

Both the simplified formulas (``exact_price``) and the pre-simplification
forms retaining the probability terms that vanish because sigma_bar_0 >= 0
(``exact_price_fullform``) are implemented; agreement of the two is a
consistency check on the simplification.

Probabilities come from a pluggable CDF provider: the empirical CDF of a
sample set, or Fourier inversion of its characteristic function. Providers
declare point masses (degenerate sample sets); the outer quadrature splits
its panels at the induced discontinuities, so a constant-volatility
distribution prices to machine accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .avgvar import AvgVarSamples, AccuracyError, GilPelaezInverter, char_fn_mc
from .mc import PriceResult, _mean_stderr
from .conditional import conditional_call_value

__all__ = ["CaseConstants", "QuadSpec", "EmpiricalCdf", "InversionCdf",
           "sigma_roots_12", "sigma_roots_34", "exact_price", "exact_price_fullform"]

SQRT2PI = math.sqrt(2.0 * math.pi)

# providers declare atoms only for genuinely degenerate sample sets
ATOM_LIMIT = 64
MATERIAL_ATOM_MASS = 1e-3


@dataclass(frozen=True)
class CaseConstants:
    """Moneyness term m = ln(S/K) + rT and the case boundary kappa = sqrt(2|m|)."""
    m: float
    kappa: float

    @classmethod
    def from_market(cls, S: float, K: float, r: float, T: float) -> "CaseConstants":
        m = math.log(S / K) + r * T
        return cls(m, math.sqrt(2.0 * abs(m)))

    @property
    def is_case_one(self) -> bool:
        # m == 0 belongs to case one (the non-strict inequality)
        return self.m >= 0.0


def sigma_roots_12(s: float, S: float, K: float, r: float, T: float) -> Optional[tuple]:
    """Roots of T*sigma^2/2 - s*sigma*sqrt(T) + m = 0, or None if complex."""
    m = math.log(S / K) + r * T
    disc = s * s - 2.0 * m
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    return ((s - root) / math.sqrt(T), (s + root) / math.sqrt(T))


def sigma_roots_34(s: float, S: float, K: float, r: float, T: float) -> Optional[tuple]:
    """Roots of T*sigma^2/2 + s*sigma*sqrt(T) - m = 0, or None if complex."""
    m = math.log(S / K) + r * T
    disc = s * s + 2.0 * m
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    return ((-s - root) / math.sqrt(T), (-s + root) / math.sqrt(T))


# ---------------------------------------------------------------------------
# CDF providers
# ---------------------------------------------------------------------------

def _atoms_from_samples(samples: AvgVarSamples) -> np.ndarray:
    uniq, counts = np.unique(samples.values, return_counts=True)
    if len(uniq) <= ATOM_LIMIT:
        return np.sqrt(uniq[uniq > 0])
    mass = counts.max() / len(samples)
    if mass > MATERIAL_ATOM_MASS:
        raise AccuracyError(
            f"sample set carries an undeclared atom of mass {mass:.2e}; "
            "the case-split quadrature cannot bound its error")
    return np.empty(0)


class EmpiricalCdf:
    """Q(sigma_bar_0 < x) from the empirical law of an averaged-variance sample set."""

    kind = "empirical"

    def __init__(self, samples: AvgVarSamples):
        self.samples = samples
        self._sorted = np.sort(samples.values)
        self.atoms_sigma = _atoms_from_samples(samples)

    def cdf_sigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0
        out[pos] = np.searchsorted(self._sorted, x[pos] ** 2, side="left") \
            / len(self.samples)
        return out


class InversionCdf:
    """Q(sigma_bar_0 < x) by Gil-Pelaez inversion of the sample characteristic function.

    Outside the known support [c^2, C^2] of the averaged variance the CDF
    is pinned to 0/1; the truncated Fourier integral is only valid inside.
    """

    kind = "inversion"

    def __init__(self, samples: AvgVarSamples, u_max: Optional[float] = None,
                 residual_tol: float = 0.05):
        self.samples = samples
        self.atoms_sigma = _atoms_from_samples(samples)
        self._inv = GilPelaezInverter(lambda u: char_fn_mc(samples, u),
                                      samples.var_lower, samples.var_upper,
                                      u_max=u_max)
        if self._inv.residual_estimate > residual_tol:
            raise AccuracyError(
                f"inversion residual {self._inv.residual_estimate:.3g} exceeds "
                f"tolerance {residual_tol:.3g}")
        self.residual_estimate = self._inv.residual_estimate

    def cdf_sigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        var = np.where(x > 0, x, 0.0) ** 2
        out[var >= self.samples.var_upper] = 1.0
        mid = (x > 0) & (var > self.samples.var_lower) & (var < self.samples.var_upper)
        if mid.any():
            out[mid] = self._inv.cdf(var[mid])
        return out


# ---------------------------------------------------------------------------
# case-split integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadSpec:
    """Gauss-Legendre resolution and truncation of the outer integrals.

    The standard normal weight leaves less than 1e-14 of its mass beyond
    |s| = 8, which bounds the truncation error of the unit-bounded
    integrands.
    """
    n_nodes: int = 128
    s_max: float = 8.0


def _segment_nodes(a: float, b: float, jumps: np.ndarray, n: int,
                   sqrt_sub_at: Optional[str]):
    """Quadrature nodes/weights on [a, b] for integrands with possible jumps.

    Panels split at interior jump locations; a square-root substitution
    regularizes the root-function branch point when it sits at an endpoint.
    """
    pts = np.concatenate(([a], np.sort(jumps[(jumps > a) & (jumps < b)]), [b]))
    xg, wg = np.polynomial.legendre.leggauss(n)
    nodes, weights = [], []
    for i in range(len(pts) - 1):
        lo, hi = pts[i], pts[i + 1]
        if sqrt_sub_at == "a" and i == 0:
            half = 0.5 * math.sqrt(hi - lo)
            t = half * xg + half
            nodes.append(lo + t ** 2)
            weights.append(half * wg * 2.0 * t)
        elif sqrt_sub_at == "b" and i == len(pts) - 2:
            half = 0.5 * math.sqrt(hi - lo)
            t = half * xg + half
            nodes.append(hi - t ** 2)
            weights.append(half * wg * 2.0 * t)
        else:
            nodes.append(0.5 * (hi - lo) * xg + 0.5 * (hi + lo))
            weights.append(0.5 * (hi - lo) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def _gauss_integral(f, a: float, b: float, jumps: np.ndarray, quad: QuadSpec,
                    sqrt_sub_at: Optional[str] = None) -> float:
    """integral over [a, b] of f(s) * exp(-s^2/2) ds."""
    if b <= a:
        return 0.0
    s, w = _segment_nodes(a, b, jumps, quad.n_nodes, sqrt_sub_at)
    return float(np.sum(f(s) * np.exp(-0.5 * s * s) * w))


class _RootFns:
    """Vectorized sigma_1..sigma_4 with clipped discriminants for endpoint roundoff."""

    def __init__(self, m: float, T: float):
        self.m = m
        self.sqrt_T = math.sqrt(T)

    def one_two(self, s):
        root = np.sqrt(np.maximum(s * s - 2.0 * self.m, 0.0))
        return (s - root) / self.sqrt_T, (s + root) / self.sqrt_T

    def three_four(self, s):
        root = np.sqrt(np.maximum(s * s + 2.0 * self.m, 0.0))
        return (-s - root) / self.sqrt_T, (-s + root) / self.sqrt_T


def _price_result(S, K, r, T, bracket_s, bracket_k, cdf, quad, method, config_digest):
    price = math.exp(-r * T) * (S * math.exp(r * T) * bracket_s - K * bracket_k)
    samples = getattr(cdf, "samples", None)
    if samples is not None and len(samples) > 1:
        # statistical uncertainty inherited from the provider's sample set
        # (the price is, up to quadrature, a mean over that set)
        inner = conditional_call_value(S, K, r, T, np.sqrt(samples.values))
        stderr = math.exp(-r * T) * _mean_stderr(inner)[1]
        n_paths, seed = samples.n_paths, samples.seed
    else:
        stderr, n_paths, seed = 0.0, 0, 0
    quad_tol = getattr(cdf, "residual_estimate", 0.0) + 10.0 * quad.n_nodes * 1e-16
    return PriceResult(price=price, stderr=stderr, method=method, n_paths=n_paths,
                       seed=seed, config_digest=config_digest, quad_tol=quad_tol)


def _atom_jumps(cdf, m: float, T: float):
    """s-locations where the integrands can jump: root-function level crossings
    of provider atoms, split per quadratic family."""
    atoms = np.asarray(getattr(cdf, "atoms_sigma", ()), dtype=float)
    atoms = atoms[atoms > 0]
    if len(atoms) == 0:
        empty = np.empty(0)
        return empty, empty
    st = math.sqrt(T)
    d1 = (m + 0.5 * atoms ** 2 * T) / (atoms * st)
    d2 = (m - 0.5 * atoms ** 2 * T) / (atoms * st)
    return d1, d2


def exact_price(S: float, K: float, r: float, T: float, cdf,
                quad: QuadSpec = QuadSpec(), *,
                config_digest: str = "") -> PriceResult:
    """Time-0 call price from the simplified case-split formulas."""
    cc = CaseConstants.from_market(S, K, r, T)
    roots = _RootFns(cc.m, T)
    F = cdf.cdf_sigma
    jumps_12, jumps_34 = _atom_jumps(cdf, cc.m, T)
    s8 = quad.s_max

    if cc.is_case_one:
        kap = cc.kappa
        ia = _gauss_integral(
            lambda s: F(roots.one_two(s)[0]) + 1.0 - F(roots.one_two(s)[1]),
            kap, s8, jumps_12, quad, sqrt_sub_at="a")
        bracket_s = ndtr(kap) + ia / SQRT2PI
        ib_pos = _gauss_integral(lambda s: F(roots.three_four(s)[1]),
                                 0.0, s8, jumps_34, quad)
        ib_neg = _gauss_integral(lambda s: 1.0 - F(roots.three_four(s)[1]),
                                 -s8, 0.0, jumps_34, quad)
        bracket_k = 0.5 + (ib_pos - ib_neg) / SQRT2PI
        method = f"exact-{cdf.kind}"
    else:
        lam = cc.kappa
        ia_pos = _gauss_integral(lambda s: 1.0 - F(roots.one_two(s)[1]),
                                 0.0, s8, jumps_12, quad)
        ia_neg = _gauss_integral(lambda s: F(roots.one_two(s)[1]),
                                 -s8, 0.0, jumps_12, quad)
        bracket_s = 0.5 + (ia_pos - ia_neg) / SQRT2PI
        ib = _gauss_integral(
            lambda s: F(roots.three_four(s)[0]) + 1.0 - F(roots.three_four(s)[1]),
            -s8, -lam, jumps_34, quad, sqrt_sub_at="b")
        bracket_k = ndtr(-lam) - ib / SQRT2PI
        method = f"exact-{cdf.kind}"
    return _price_result(S, K, r, T, bracket_s, bracket_k, cdf, quad,
                         method, config_digest)


def exact_price_fullform(S: float, K: float, r: float, T: float, cdf,
                         quad: QuadSpec = QuadSpec(), *,
                         config_digest: str = "") -> PriceResult:
    """Time-0 call price from the unsimplified case formulas.

    Keeps every probability term, including the ones that are identically
    zero because sigma_bar_0 >= 0; exists as a consistency check on the
    simplification and must agree with ``exact_price`` to quadrature
    accuracy.
    """
    cc = CaseConstants.from_market(S, K, r, T)
    roots = _RootFns(cc.m, T)
    F = cdf.cdf_sigma
    jumps_12, jumps_34 = _atom_jumps(cdf, cc.m, T)
    s8 = quad.s_max

    def f12_sum(s):
        lo, hi = roots.one_two(s)
        return F(lo) + 1.0 - F(hi)

    def f12_dif(s):
        lo, hi = roots.one_two(s)
        return F(hi) - F(lo)

    def f34_dif(s):
        lo, hi = roots.three_four(s)
        return F(hi) - F(lo)

    def f34_sum(s):
        lo, hi = roots.three_four(s)
        return F(lo) + 1.0 - F(hi)

    if cc.is_case_one:
        kap = cc.kappa
        ia1 = _gauss_integral(f12_sum, kap, s8, jumps_12, quad, sqrt_sub_at="a")
        ia2 = _gauss_integral(f12_dif, -s8, -kap, jumps_12, quad, sqrt_sub_at="b")
        bracket_s = ndtr(kap) + (ia1 - ia2) / SQRT2PI
        ib1 = _gauss_integral(f34_dif, 0.0, s8, jumps_34, quad)
        ib2 = _gauss_integral(f34_sum, -s8, 0.0, jumps_34, quad)
        bracket_k = 0.5 + (ib1 - ib2) / SQRT2PI
    else:
        lam = cc.kappa
        ia1 = _gauss_integral(f12_sum, 0.0, s8, jumps_12, quad)
        ia2 = _gauss_integral(f12_dif, -s8, 0.0, jumps_12, quad)
        bracket_s = 0.5 + (ia1 - ia2) / SQRT2PI
        ib1 = _gauss_integral(f34_dif, lam, s8, jumps_34, quad, sqrt_sub_at="a")
        ib2 = _gauss_integral(f34_sum, -s8, -lam, jumps_34, quad, sqrt_sub_at="b")
        bracket_k = ndtr(-lam) + (ib1 - ib2) / SQRT2PI
    return _price_result(S, K, r, T, bracket_s, bracket_k, cdf, quad,
                         "exact-fullform", config_digest)
