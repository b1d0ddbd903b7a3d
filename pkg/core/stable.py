"""Symmetric stable laws and the special functions shared by the walk models.

The density and CDF are obtained by Fourier inversion of exp(-t|k|^alpha)
with QUADPACK's oscillatory rules; alpha in {1, 2} also have closed forms
(Cauchy and Gauss) that serve as oracles.
"""

import logging
import math
import threading
from dataclasses import dataclass
from functools import lru_cache, partial
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from config import DEFAULTS
from .errors import ParameterError, QuadratureError

logger = logging.getLogger("fracwalk")

ArrayLike = Union[float, np.ndarray]

# Above this k the generalized binomial coefficient switches to log-gamma.
_PRODUCT_MAX_K = 64
# Right edge of the interpolated CDF table in units of t^(1/alpha).
_CDF_TABLE_SPAN = 1e4
# QUADPACK is not re-entrant across threads in older scipy releases
_QUAD_LOCK = threading.RLock()


def _scalar_or_array(values: np.ndarray) -> ArrayLike:
    values = np.asarray(values)
    return float(values) if values.ndim == 0 else values


def check_alpha(alpha: float, allow_two: bool = True) -> float:
    alpha = float(alpha)
    upper_ok = alpha <= 2.0 if allow_two else alpha < 2.0
    if not (alpha > 0.0 and upper_ok):
        interval = "(0, 2]" if allow_two else "(0, 2)"
        raise ParameterError(f"alpha must lie in {interval}, got {alpha}")
    return alpha


@dataclass(frozen=True)
class StableParams:
    """Target law g_alpha(x, t; theta) restricted to the symmetric case."""

    alpha: float
    t: float
    theta: float = 0.0

    def __post_init__(self):
        check_alpha(self.alpha)
        if not (self.t > 0.0 and math.isfinite(self.t)):
            raise ParameterError(f"t must be positive and finite, got {self.t}")
        if self.theta != 0.0:
            raise ParameterError(f"only the symmetric law theta=0 is supported, got theta={self.theta}")

    @property
    def scale(self) -> float:
        """Self-similarity length t^(1/alpha)."""
        return self.t ** (1.0 / self.alpha)


@dataclass(frozen=True)
class QuadratureConfig:
    """Fourier inversion settings.

    kappa_max=None lets each evaluation pick the cutoff from abs_tol; panels is
    the subinterval budget of the adaptive rule.
    """

    kappa_max: Optional[float] = None
    panels: int = DEFAULTS["quad_limit"]
    abs_tol: float = DEFAULTS["quad_abs_tol"]

    def __post_init__(self):
        if self.kappa_max is not None and not self.kappa_max > 0.0:
            raise ParameterError(f"kappa_max must be positive, got {self.kappa_max}")
        if int(self.panels) < 16:
            raise ParameterError(f"panels must be at least 16, got {self.panels}")
        if not self.abs_tol > 0.0:
            raise ParameterError(f"abs_tol must be positive, got {self.abs_tol}")


def integrate_checked(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    abs_tol: float,
    rel_tol: float = 1e-10,
    limit: int = DEFAULTS["quad_limit"],
    **kwargs,
) -> float:
    """scipy.integrate.quad that raises QuadratureError instead of warning.

    QUADPACK flags round-off as failure even when the error estimate is fine,
    so only failures with an estimate well above the target are raised.
    """
    with _QUAD_LOCK:
        out = integrate.quad(
            func, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=int(limit), full_output=1, **kwargs
        )
    value, abserr = float(out[0]), float(out[1])
    if len(out) > 3:
        target = max(abs_tol, rel_tol * abs(value))
        if not abserr <= 100.0 * target:
            raise QuadratureError(
                f"quadrature on [{a:.6g}, {b:.6g}] did not converge: {out[3]} (error estimate {abserr:.3g})"
            )
        logger.debug(f"quad on [{a:.6g}, {b:.6g}] flagged but accepted (error estimate {abserr:.3g})")
    return value


# ---------------------------------------------------------------------------
# Special functions and model constants


def binom_alpha(alpha: float, k: int) -> float:
    """Generalized binomial coefficient C(alpha, k)."""
    if k < 0:
        raise ParameterError(f"k must be nonnegative, got {k}")
    k = int(k)
    alpha = float(alpha)
    if alpha.is_integer() and alpha >= 0.0 and k > alpha:
        return 0.0
    if k <= _PRODUCT_MAX_K:
        coeff = 1.0
        for j in range(k):
            coeff *= (alpha - j) / (j + 1)
        return coeff
    # C(a, k) = (-1)^k Gamma(k - a) / (Gamma(-a) Gamma(k + 1)), a not a nonnegative integer
    log_mag = special.gammaln(k - alpha) - special.gammaln(-alpha) - special.gammaln(k + 1.0)
    sign = (-1.0) ** k * special.gammasgn(k - alpha) * special.gammasgn(-alpha)
    return float(sign * math.exp(log_mag))


def binom_series(alpha: float, kmax: int) -> np.ndarray:
    """C(alpha, k) for k = 0..kmax via the running product (exact zeros for integer alpha)."""
    if kmax < 0:
        raise ParameterError(f"kmax must be nonnegative, got {kmax}")
    j = np.arange(kmax, dtype=float)
    out = np.empty(kmax + 1)
    out[0] = 1.0
    out[1:] = np.cumprod((alpha - j) / (j + 1.0))
    return out


def b_coeff(alpha: float) -> float:
    """b(alpha) = Gamma(alpha+1) sin(alpha pi/2) / pi; exactly zero at alpha=2."""
    alpha = check_alpha(alpha)
    if alpha == 2.0:
        return 0.0
    return math.gamma(alpha + 1.0) * math.sin(alpha * math.pi / 2.0) / math.pi


def c_coeff(alpha: float) -> float:
    """c(alpha) = 2 cos(alpha pi/2) / (1 - alpha), with c(1)=pi and c(2)=1."""
    alpha = check_alpha(alpha)
    if alpha == 1.0:
        return math.pi
    if alpha == 2.0:
        return 1.0
    return 2.0 * math.cos(alpha * math.pi / 2.0) / (1.0 - alpha)


def riemann_zeta(s: float) -> float:
    if not s > 1.0:
        raise ParameterError(f"zeta(s) requires s > 1, got {s}")
    return float(special.zeta(s, 1.0))


def zeta_tail(s: float, k: int) -> float:
    """sum_{j > k} j^(-s), the Hurwitz zeta value zeta(s, k+1)."""
    if not s > 1.0:
        raise ParameterError(f"zeta tail requires s > 1, got {s}")
    return float(special.zeta(s, k + 1.0))


def stable_tail_constant(alpha: float) -> float:
    """Constant of g_alpha(x, 1) ~ b(alpha) |x|^-(alpha+1) for |x| -> inf."""
    return b_coeff(alpha)


# ---------------------------------------------------------------------------
# Characteristic function, density, CDF


def char_fn(params: StableParams, kappa: ArrayLike) -> ArrayLike:
    kappa = np.asarray(kappa, dtype=float)
    return _scalar_or_array(np.exp(-params.t * np.abs(kappa) ** params.alpha))


def cauchy_density(x: ArrayLike, t: float) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(t / (np.pi * (x * x + t * t)))


def cauchy_cdf(x: ArrayLike, t: float) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(0.5 + np.arctan(x / t) / np.pi)


def gauss_density(x: ArrayLike, t: float) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(np.exp(-x * x / (4.0 * t)) / (2.0 * np.sqrt(np.pi * t)))


def gauss_cdf(x: ArrayLike, t: float) -> ArrayLike:
    x = np.asarray(x, dtype=float)
    return _scalar_or_array(special.ndtr(x / np.sqrt(2.0 * t)))


def _kappa_cutoff(alpha: float, t: float, ax: float, q: QuadratureConfig) -> float:
    # exp(-t K^alpha) < abs_tol, and the oscillatory tail 2 exp(-t K^alpha) / (pi |x|) too
    if q.kappa_max is not None:
        return q.kappa_max
    log_target = math.log(1.0 / q.abs_tol)
    if ax > 0.0:
        log_target = max(log_target, math.log(2.0 / (math.pi * q.abs_tol * ax)))
    return (log_target / t) ** (1.0 / alpha)


def _density_at(alpha: float, t: float, x: float, q: QuadratureConfig) -> float:
    ax = abs(x)
    if ax == 0.0:
        return math.gamma(1.0 + 1.0 / alpha) / (math.pi * t ** (1.0 / alpha))
    kmax = _kappa_cutoff(alpha, t, ax, q)
    value = integrate_checked(
        lambda k: math.exp(-t * k**alpha),
        0.0,
        kmax,
        abs_tol=q.abs_tol,
        limit=q.panels,
        weight="cos",
        wvar=ax,
    )
    return max(0.0, value / math.pi)


def _cdf_at(alpha: float, t: float, x: float, q: QuadratureConfig) -> float:
    if x == 0.0:
        return 0.5
    ax = abs(x)
    kmax = _kappa_cutoff(alpha, t, ax, q)
    split = min(kmax, math.pi / ax)

    def head_integrand(k: float) -> float:
        sin_over_k = ax if k == 0.0 else math.sin(k * ax) / k
        return sin_over_k * math.exp(-t * k**alpha)

    total = integrate_checked(head_integrand, 0.0, split, abs_tol=q.abs_tol, limit=q.panels)
    if kmax > split:
        total += integrate_checked(
            lambda k: math.exp(-t * k**alpha) / k,
            split,
            kmax,
            abs_tol=q.abs_tol,
            limit=q.panels,
            weight="sin",
            wvar=ax,
        )
    upper = min(1.0, max(0.5, 0.5 + total / math.pi))
    return upper if x > 0.0 else 1.0 - upper


def stable_density(params: StableParams, x: ArrayLike, q: Optional[QuadratureConfig] = None) -> ArrayLike:
    """g_alpha(x, t; 0) by the cosine form (1/pi) int_0^inf cos(kx) exp(-t k^alpha) dk."""
    q = q or QuadratureConfig()
    xs = np.asarray(x, dtype=float)
    vals = np.array([_density_at(params.alpha, params.t, v, q) for v in xs.ravel()], dtype=float)
    return _scalar_or_array(vals.reshape(xs.shape))


def stable_cdf(params: StableParams, x: ArrayLike, q: Optional[QuadratureConfig] = None) -> ArrayLike:
    """G_alpha(x, t; 0) = 1/2 + (1/pi) int_0^inf sin(kx)/k exp(-t k^alpha) dk."""
    q = q or QuadratureConfig()
    xs = np.asarray(x, dtype=float)
    vals = np.array([_cdf_at(params.alpha, params.t, v, q) for v in xs.ravel()], dtype=float)
    return _scalar_or_array(vals.reshape(xs.shape))


class InterpolatedCdf:
    """Monotone interpolant of G_alpha on an asinh-spaced grid.

    Beyond x_max the single tail constant is used:
    1 - G(x) ~ b(alpha) t |x|^-alpha / alpha.
    """

    def __init__(self, params: StableParams, q: QuadratureConfig, n_points: int):
        self.alpha = params.alpha
        self.t = params.t
        self.scale = params.scale
        self.x_max = _CDF_TABLE_SPAN * self.scale
        u = np.linspace(0.0, np.arcsinh(_CDF_TABLE_SPAN), int(n_points))
        grid = self.scale * np.sinh(u)
        values = np.array([_cdf_at(self.alpha, self.t, v, q) for v in grid])
        # quadrature noise must not break monotonicity
        values = np.maximum.accumulate(values)
        self._interp = PchipInterpolator(u, values)
        self.tail_coeff = stable_tail_constant(self.alpha) * self.t / self.alpha
        logger.debug(f"CDF table built | alpha={self.alpha}, t={self.t}, points={n_points}")

    def __call__(self, x: ArrayLike) -> ArrayLike:
        xs = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xs).ravel()
        ax = np.abs(flat)
        upper = np.empty_like(ax)
        inside = ax <= self.x_max
        upper[inside] = self._interp(np.arcsinh(ax[inside] / self.scale))
        upper[~inside] = 1.0 - self.tail_coeff * ax[~inside] ** (-self.alpha)
        upper = np.clip(upper, 0.5, 1.0)
        out = np.where(flat >= 0.0, upper, 1.0 - upper)
        return _scalar_or_array(out.reshape(xs.shape))


@lru_cache(maxsize=16)
def _interpolated_cdf(alpha: float, t: float, q: QuadratureConfig, n_points: int) -> InterpolatedCdf:
    return InterpolatedCdf(StableParams(alpha, t), q, n_points)


def target_cdf(
    params: StableParams, size_hint: int = 0, q: Optional[QuadratureConfig] = None
) -> Callable[[ArrayLike], ArrayLike]:
    """Vectorized G_alpha(., t): closed form for alpha in {1, 2}, an interpolated
    table when more than ks_cache_threshold points are expected, direct quadrature otherwise."""
    q = q or QuadratureConfig()
    if params.alpha == 1.0:
        return partial(cauchy_cdf, t=params.t)
    if params.alpha == 2.0:
        return partial(gauss_cdf, t=params.t)
    if size_hint > DEFAULTS["ks_cache_threshold"]:
        return _interpolated_cdf(params.alpha, params.t, q, DEFAULTS["cdf_cache_points"])
    return partial(stable_cdf, params, q=q)


def target_density(params: StableParams, q: Optional[QuadratureConfig] = None) -> Callable[[ArrayLike], ArrayLike]:
    if params.alpha == 1.0:
        return partial(cauchy_density, t=params.t)
    if params.alpha == 2.0:
        return partial(gauss_density, t=params.t)
    return partial(stable_density, params, q=q or QuadratureConfig())


def cell_masses(params: StableParams, edges: np.ndarray, q: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Integrals of g_alpha over consecutive cells [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    cdf = target_cdf(params, size_hint=edges.size, q=q)
    return np.clip(np.diff(np.atleast_1d(cdf(edges))), 0.0, None)
