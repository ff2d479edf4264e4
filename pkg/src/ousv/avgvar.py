"""The law of the averaged variance sigma_bar_0^2.

Four interchangeable views, used to feed probabilities Q(sigma_bar_0 < x)
into the pricers and into cross-checks of each other:

  * Monte Carlo samples over exact OU paths (``sample_avg_var``),
  * the empirical CDF of those samples (``empirical_cdf``),
  * the characteristic function, either averaged over samples
    (``char_fn_mc``) or truncated from raw moments (``char_fn_moments``),
  * CDF recovery by Fourier inversion (``cdf_from_charfn``), realized in
    Gil-Pelaez single-integral form, with the mollified double-integral
    form available behind the ``eps`` flag as a convergence diagnostic.

Raw moments m_j come from Gaussian quadrature (j <= 2) or sample moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numba import njit, prange
from scipy.special import ndtri

from .ou import OUParams, TimeGrid, ou_mean, ou_variance, ou_covariance, \
    transition_coefficients
from .rng import uniform_stream
from .vols import VolSpec, vol_bounds, family_code, kink_points, mean_sq

__all__ = ["AvgVarSamples", "MomentVector", "MomentEstimate", "CharFnExpansion",
           "AccuracyError", "TrustRadiusError",
           "sample_avg_var", "empirical_cdf", "char_fn_mc",
           "moment_m", "char_fn_moments", "cdf_from_charfn", "GilPelaezInverter"]

PATH_CHUNK = 16384


class AccuracyError(RuntimeError):
    """A quadrature's estimated residual exceeds its tolerance."""


class TrustRadiusError(ValueError):
    """Moment-expansion evaluation requested outside its trust radius."""


@njit(inline="always", cache=True)
def _vol_scalar(fam, q0, q1, q2, q3, y):  # pragma: no cover
    if fam == 0:
        return q0
    if fam == 1:
        s = q0 * math.exp(q1 * y)
        if s < q2:
            return q2
        if s > q3:
            return q3
        return s
    return q2 + (q3 - q2) / (1.0 + math.exp(-y))


@njit(parallel=True, cache=True)
def _avg_var_kernel(z, dt, decay, sd, y0, fam, q0, q1, q2, q3, out):  # pragma: no cover
    n_paths, n_steps = z.shape
    for p in prange(n_paths):
        y = y0
        s = _vol_scalar(fam, q0, q1, q2, q3, y)
        s_prev = s * s
        acc = 0.0
        for i in range(n_steps):
            y = y * decay[i] + sd[i] * z[p, i]
            s = _vol_scalar(fam, q0, q1, q2, q3, y)
            s_cur = s * s
            acc += 0.5 * (s_prev + s_cur) * dt[i]
            s_prev = s_cur
        out[p] = acc


@dataclass(frozen=True, eq=False)
class AvgVarSamples:
    """Monte Carlo draws of sigma_bar_0^2 with their generation metadata."""
    values: np.ndarray
    seed: int
    n_paths: int
    grid_n: int
    var_lower: float
    var_upper: float

    def __len__(self) -> int:
        return len(self.values)


def sample_avg_var(p: OUParams, v: VolSpec, T: float, n_paths: int,
                   grid_n: int, seed: int) -> AvgVarSamples:
    """Draw n_paths independent samples of the averaged variance.

    Each sample is the trapezoid average of sigma(Y)^2 over one exact OU
    path on the uniform grid; sample i uses path stream i, so the result
    is deterministic given (p, v, T, n_paths, grid_n, seed) regardless of
    chunking.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    grid = TimeGrid.uniform(T, grid_n)
    dt = np.diff(grid.times)
    decay, sd = transition_coefficients(p, grid)
    fam, q0, q1, q2, q3 = family_code(v)
    out = np.empty(n_paths)
    for lo in range(0, n_paths, PATH_CHUNK):
        hi = min(lo + PATH_CHUNK, n_paths)
        z = ndtri(uniform_stream(seed, lo, hi - lo, grid_n))
        _avg_var_kernel(z, dt, decay, sd, p.y0, fam, q0, q1, q2, q3, out[lo:hi])
    out /= T
    c, C = vol_bounds(v)
    return AvgVarSamples(out, seed, n_paths, grid_n, c * c, C * C)


def empirical_cdf(s: AvgVarSamples, x) -> np.ndarray:
    """Fraction of samples strictly below x; vectorized over x."""
    if len(s) == 0:
        raise ValueError("empty sample set")
    srt = np.sort(s.values)
    return np.searchsorted(srt, np.asarray(x, dtype=float), side="left") / len(s)


def char_fn_mc(s: AvgVarSamples, u):
    """phi(u) = (1/n) * sum_j exp(i*u*x_j); vectorized over u."""
    if len(s) == 0:
        raise ValueError("empty sample set")
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    out = np.zeros(u.shape, dtype=complex)
    for lo in range(0, len(s), 4096):
        out += np.exp(1j * np.outer(u, s.values[lo:lo + 4096])).sum(axis=1)
    out /= len(s)
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

_GL64 = np.polynomial.legendre.leggauss(64)
_GL32 = np.polynomial.legendre.leggauss(32)


def _gl_on(a, b, rule):
    x, w = rule
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    mode: str


def _moment1_quad(p: OUParams, v: VolSpec, T: float) -> float:
    t, w = _gl_on(0.0, T, _GL64)
    e = mean_sq(v, ou_mean(p, t), np.sqrt(ou_variance(p, t)))
    return float((e * w).sum() / T)


def _pair_mean_sq(p: OUParams, v: VolSpec, t1: np.ndarray, t2: float) -> np.ndarray:
    """E[sigma^2(Y_{t1}) * sigma^2(Y_{t2})] vectorized over t1 (all < t2).

    Conditioning on Y_{t1} reduces the inner expectation to the 1-D
    closed form / Gauss-Hermite of ``mean_sq``; the outer y-integral is
    Gauss-Legendre split at the volatility's kink points, which keeps the
    integrand piecewise smooth (plain Gauss-Hermite loses digits at the
    clamp corners).
    """
    from .vols import vol_eval
    mu1 = ou_mean(p, t1)
    mu2 = float(ou_mean(p, t2))
    v1 = ou_variance(p, t1)
    v2 = float(ou_variance(p, t2))
    cv = ou_covariance(p, t1, t2)
    sd1 = np.sqrt(v1)
    cond_var = np.maximum(v2 - cv ** 2 / v1, 0.0)
    cond_sd = np.sqrt(cond_var)
    lo_edge = mu1 - 10.0 * sd1
    hi_edge = mu1 + 10.0 * sd1
    cuts = kink_points(v)
    edges = [lo_edge] + [np.clip(np.full_like(lo_edge, k), lo_edge, hi_edge)
                         for k in cuts] + [hi_edge]
    yg, yw = _GL64
    total = np.zeros(t1.shape)
    for a, b in zip(edges[:-1], edges[1:]):
        width = b - a
        ys = a[:, None] + 0.5 * width[:, None] * (yg[None, :] + 1.0)
        wy = 0.5 * width[:, None] * yw[None, :]
        dens = np.exp(-0.5 * ((ys - mu1[:, None]) / sd1[:, None]) ** 2) \
            / (sd1[:, None] * np.sqrt(2.0 * np.pi))
        cond_mean = mu2 + (cv / v1)[:, None] * (ys - mu1[:, None])
        g = mean_sq(v, cond_mean, np.broadcast_to(cond_sd[:, None], ys.shape))
        total += (vol_eval(v, ys) ** 2 * g * dens * wy).sum(axis=1)
    return total


def _moment2_quad(p: OUParams, v: VolSpec, T: float) -> float:
    # double integral over {0 < t1 < t2 < T}, doubled by symmetry
    x2, w2 = _gl_on(0.0, T, _GL32)
    acc = 0.0
    for t2, wt2 in zip(x2, w2):
        t1, w1 = _gl_on(0.0, t2, _GL32)
        acc += float((_pair_mean_sq(p, v, t1, t2) * w1).sum()) * wt2
    return 2.0 * acc / T ** 2


def moment_m(j: int, p: OUParams, v: VolSpec, T: float, *, mode: str = "quadrature",
             n_paths: int = 100_000, grid_n: int = 512, seed: int = 0,
             samples: Optional[AvgVarSamples] = None) -> MomentEstimate:
    """j-th raw moment of sigma_bar_0^2.

    Quadrature mode serves j in {1, 2}: Gauss-Legendre in time against the
    exact Gaussian marginals (j=1) or pair laws (j=2) of the OU process.
    Higher orders use Monte Carlo sample moments (pass mode="mc"; reuse
    ``samples`` to avoid regeneration), reported with a standard error.
    """
    if j < 1:
        raise ValueError("moment order must be >= 1")
    if p.k_vol == 0.0:
        # deterministic path: sigma_bar^2 is a point, every moment a power
        t, w = _gl_on(0.0, T, _GL64)
        m1 = float((mean_sq(v, ou_mean(p, t), np.zeros_like(t)) * w).sum() / T)
        if mode == "quadrature":
            return MomentEstimate(m1 ** j if j > 1 else m1, 0.0, "quadrature")
    if mode == "quadrature":
        if j == 1:
            return MomentEstimate(_moment1_quad(p, v, T), 0.0, "quadrature")
        if j == 2:
            return MomentEstimate(_moment2_quad(p, v, T), 0.0, "quadrature")
        raise ValueError("quadrature mode serves j in {1, 2}; use mode='mc'")
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if samples is None:
        samples = sample_avg_var(p, v, T, n_paths, grid_n, seed)
    powers = samples.values ** j
    value = float(powers.mean())
    stderr = float(powers.std(ddof=1) / np.sqrt(len(samples)))
    return MomentEstimate(value, stderr, "mc")


@dataclass(frozen=True)
class MomentVector:
    """Raw moments (m_1, ..., m_J) of sigma_bar_0^2 plus the bound sup sigma^2."""
    m: tuple
    var_upper: float

    def __post_init__(self):
        m = tuple(float(x) for x in self.m)
        object.__setattr__(self, "m", m)
        if any(x <= 0 for x in m):
            raise ValueError("raw moments of a positive variable must be positive")
        if len(m) >= 2 and m[1] < m[0] ** 2 * (1 - 1e-9):
            raise ValueError("moment vector violates m2 >= m1^2")
        for j, x in enumerate(m, start=1):
            if x > self.var_upper ** j * (1 + 1e-9):
                raise ValueError(f"m_{j} exceeds its bound C^(2j)")

    @property
    def order(self) -> int:
        return len(self.m)

    @classmethod
    def from_samples(cls, s: AvgVarSamples, order: int) -> "MomentVector":
        vals = s.values
        return cls(tuple(float(np.mean(vals ** j)) for j in range(1, order + 1)),
                   s.var_upper)

    def trust_radius(self, remainder_tol: float = 1e-6) -> float:
        """Largest |u| with remainder bound |u|^(J+1) C^(2(J+1)) / (J+1)! below tol."""
        J = self.order
        return (remainder_tol * math.factorial(J + 1)) ** (1.0 / (J + 1)) / self.var_upper


@dataclass(frozen=True)
class CharFnExpansion:
    value: complex
    remainder_bound: float


def char_fn_moments(mv: MomentVector, u: float,
                    remainder_tol: float = 1e-6) -> CharFnExpansion:
    """Truncated Taylor expansion phi(u) ~ 1 + sum_j (iu)^j m_j / j!.

    Valid only inside the trust radius, where the reported remainder bound
    is below ``remainder_tol``.
    """
    radius = mv.trust_radius(remainder_tol)
    if abs(u) > radius:
        raise TrustRadiusError(
            f"|u|={abs(u):.4g} outside trust radius {radius:.4g} for order {mv.order}")
    value = 1.0 + sum((1j * u) ** j / math.factorial(j) * mj
                      for j, mj in enumerate(mv.m, start=1))
    J = mv.order
    rem = abs(u) ** (J + 1) * mv.var_upper ** (J + 1) / math.factorial(J + 1)
    return CharFnExpansion(complex(value), float(rem))


# ---------------------------------------------------------------------------
# Fourier inversion
# ---------------------------------------------------------------------------

class GilPelaezInverter:
    """Precomputed Gil-Pelaez CDF of a law on [var_lower, var_upper].

    F(x) = 1/2 - (1/pi) * int_0^U Im(e^{-iux} phi(u)) / u du, evaluated by
    composite Gauss-Legendre with one panel per oscillation period of the
    integrand over the support. phi is evaluated once on the node grid, so
    repeated CDF queries are cheap.
    """

    def __init__(self, phi: Callable, var_lower: float, var_upper: float,
                 u_max: Optional[float] = None, nodes_per_panel: int = 16):
        spread = max(var_upper - var_lower, 0.0)
        # Degenerate/narrow supports would send the default truncation to
        # infinity and the panel width past the probe oscillation scale;
        # floor the scale at a tenth of the upper bound.
        scale = max(spread, 0.1 * var_upper, 1e-6)
        self.u_max = float(u_max) if u_max is not None else 200.0 / (spread + 1e-6)
        self.u_max = min(self.u_max, 200.0 / scale)
        panel = 2.0 * np.pi / scale
        n_panels = max(8, int(np.ceil(self.u_max / panel)))
        edges = np.linspace(0.0, self.u_max, n_panels + 1)
        xg, wg = np.polynomial.legendre.leggauss(nodes_per_panel)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        self.u = (half[:, None] * xg[None, :] + mid[:, None]).ravel()
        self.w = (half[:, None] * wg[None, :]).ravel()
        self.phi_u = np.asarray(phi(self.u), dtype=complex)
        tail_env = float(np.abs(self.phi_u[-nodes_per_panel:]).max())
        self.residual_estimate = tail_env * panel / (np.pi * self.u_max)

    def cdf(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.shape)
        for lo in range(0, len(x), 256):
            xs = x[lo:lo + 256, None]
            integrand = (np.exp(-1j * xs * self.u[None, :]) * self.phi_u[None, :]).imag \
                / self.u[None, :]
            out[lo:lo + 256] = 0.5 - integrand @ self.w / np.pi
        return np.clip(out, 0.0, 1.0)


def _mollified_cdf(phi: Callable, x: float, eps: float,
                   var_lower: float, var_upper: float) -> float:
    """Mollified double-integral CDF: integral over y <= x of the smoothed density

        f_eps(y) = (1/pi) * int_0^inf Re(e^{-iyu} phi(u)) exp(-eps^2 u^2 / 2) du.

    As eps -> 0 this recovers the Gil-Pelaez value wherever the CDF is
    continuous. Diagnostic use only: cost grows like 1/eps^2.
    """
    y_lo = var_lower - 8.0 * eps
    u_hi = 8.0 / eps
    rate = max(var_upper - y_lo, abs(x - y_lo), 1e-3)
    xg, wg = np.polynomial.legendre.leggauss(16)

    def panels(a, b, width):
        n = max(8, int(np.ceil((b - a) / width)))
        edges = np.linspace(a, b, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        return (half[:, None] * xg[None, :] + mid[:, None]).ravel(), \
               (half[:, None] * wg[None, :]).ravel()

    u, wu = panels(0.0, u_hi, 2.0 * np.pi / rate)
    phi_u = np.asarray(phi(u), dtype=complex)
    damp = np.exp(-0.5 * (eps * u) ** 2) * wu
    y, wy = panels(y_lo, x, eps / 2.0)
    osc = np.exp(-1j * np.outer(y, u))
    f_eps = (osc * phi_u[None, :]).real @ damp / np.pi
    return float(f_eps @ wy)


def cdf_from_charfn(phi: Callable, x, var_lower: float, var_upper: float, *,
                    u_max: Optional[float] = None, residual_tol: float = 0.05,
                    eps: Optional[float] = None,
                    inverter: Optional[GilPelaezInverter] = None):
    """CDF of the law behind characteristic function ``phi`` at x.

    phi must satisfy phi(0) = 1 and |phi| <= 1 and belong to a law supported
    on [var_lower, var_upper]. The default route is the Gil-Pelaez integral;
    pass ``eps`` for the mollified double-integral diagnostic. Raises
    AccuracyError when the estimated truncation residual exceeds
    ``residual_tol``. Pass a prebuilt ``inverter`` to amortize the phi grid.
    """
    if eps is not None:
        return _mollified_cdf(phi, float(x), eps, var_lower, var_upper)
    inv = inverter if inverter is not None else GilPelaezInverter(
        phi, var_lower, var_upper, u_max=u_max)
    if inv.residual_estimate > residual_tol:
        raise AccuracyError(
            f"inversion truncation residual {inv.residual_estimate:.3g} "
            f"exceeds tolerance {residual_tol:.3g}")
    out = inv.cdf(x)
    return float(out[0]) if np.ndim(x) == 0 else out
