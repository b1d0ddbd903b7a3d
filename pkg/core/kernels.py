"""Lattice transition kernels and their generating functions.

Three walks live on the lattice x_j = j h: Grunwald-Letnikov (gl), Gillis-Weiss
(gw) and globally binomial (binom). A kernel stores p_k for |k| <= K and the
neglected mass beyond K separately; simulations lump that tail into p_0.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from config import DEFAULTS
from . import stable
from .errors import FracwalkError, ParameterError, SingularAlphaError

logger = logging.getLogger("fracwalk")

_BOUND_SLACK = 1e-12
_IMAG_TOL = 1e-12
# complex entries per block when summing the series on many phases
_SERIES_BLOCK = 2_000_000


class ModelTag(str, Enum):
    GRUNWALD_LETNIKOV = "gl"
    GILLIS_WEISS = "gw"
    GLOBALLY_BINOMIAL = "binom"
    CHECHKIN_GONCHAR = "cg"


class ScalingForm(str, Enum):
    POWER_LAW = "power"  # tau = mu h^alpha
    LOG_CORRECTED = "log"  # tau = lambda h^2 log(1/h)


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Symmetric jump law p_k, |k| <= radius, stored as p_{-K}, ..., p_K."""

    model: ModelTag
    alpha: float
    coeff: float
    coeff_name: str
    radius: int
    probs: np.ndarray
    tail_mass: float
    bound: float
    lam: Optional[float] = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.radius, self.radius + 1)

    @property
    def p0(self) -> float:
        return float(self.probs[self.radius])

    def p(self, k: int) -> float:
        return float(self.probs[k + self.radius]) if abs(k) <= self.radius else 0.0

    @property
    def lumped_probs(self) -> np.ndarray:
        """Probabilities with the tail mass moved onto k = 0."""
        out = self.probs.copy()
        out[self.radius] += self.tail_mass
        return out

    @cached_property
    def inversion_table(self) -> Tuple[np.ndarray, np.ndarray]:
        """Offsets in the order 0, +1, -1, +2, -2, ... and their cumulative probabilities."""
        ks = np.arange(1, self.radius + 1)
        order = np.empty(2 * self.radius + 1, dtype=np.int64)
        order[0] = 0
        order[1::2] = ks
        order[2::2] = -ks
        weights = self.lumped_probs[order + self.radius]
        cdf = np.cumsum(weights)
        last = int(np.flatnonzero(weights > 0.0)[-1])
        cdf[last:] = 1.0
        cdf.setflags(write=False)
        return order, cdf

    @cached_property
    def fingerprint(self) -> str:
        meta = json.dumps(
            {"model": self.model.value, "alpha": self.alpha, "coeff": self.coeff, "coeff_name": self.coeff_name},
            sort_keys=True,
        )
        digest = hashlib.sha256(meta.encode("utf-8"))
        digest.update(np.ascontiguousarray(self.probs, dtype="<f8").tobytes())
        return digest.hexdigest()[:16]

    def as_dict(self) -> dict:
        return {
            "model": self.model.value,
            "alpha": self.alpha,
            "coeff_name": self.coeff_name,
            "coeff": self.coeff,
            "lambda": self.lam,
            "bound": self.bound,
            "radius": self.radius,
            "p0": self.p0,
            "tail_mass": self.tail_mass,
            "fingerprint": self.fingerprint,
        }


@dataclass(frozen=True)
class ScalingLaw:
    model: ModelTag
    alpha: float
    coeff: float
    form: ScalingForm = ScalingForm.POWER_LAW

    def __post_init__(self):
        if self.form is ScalingForm.LOG_CORRECTED and not (
            self.model is ModelTag.GILLIS_WEISS and self.alpha == 2.0
        ):
            raise ParameterError("the log-corrected scaling applies only to the Gillis-Weiss walk at alpha=2")
        if not self.coeff > 0.0:
            raise ParameterError(f"scaling coefficient must be positive, got {self.coeff}")


# ---------------------------------------------------------------------------
# Admissibility


def admissible_bound(model, alpha: float, coeff_name: str = "mu") -> float:
    """Largest coefficient for which every p_k is nonnegative."""
    model = ModelTag(model)
    alpha = stable.check_alpha(alpha)
    if coeff_name not in ("mu", "lambda"):
        raise ParameterError(f"unknown coefficient name {coeff_name!r}")
    if model is ModelTag.GRUNWALD_LETNIKOV:
        if coeff_name != "mu":
            raise ParameterError("the Grunwald-Letnikov walk is parameterized by mu only")
        if alpha == 1.0:
            raise SingularAlphaError("alpha=1 is singular for the Grunwald-Letnikov walk")
        cos_a = math.cos(alpha * math.pi / 2.0)
        return cos_a if alpha < 1.0 else abs(cos_a) / alpha
    if model is ModelTag.GILLIS_WEISS:
        lam_bound = 1.0 / (2.0 * stable.riemann_zeta(alpha + 1.0))
        if coeff_name == "lambda":
            return lam_bound
        if alpha == 2.0:
            raise ParameterError("the mu-form of the Gillis-Weiss walk is undefined at alpha=2 (b(2)=0)")
        return lam_bound / stable.b_coeff(alpha)
    if model is ModelTag.GLOBALLY_BINOMIAL:
        return 0.5 if coeff_name == "lambda" else stable.c_coeff(alpha) / 2.0
    raise ParameterError("the Chechkin-Gonchar walk has no lattice kernel")


def _check_coeff(name: str, value: float, bound: float, context: str) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be positive, got {value}", bound=bound)
    if value > bound * (1.0 + _BOUND_SLACK):
        raise ParameterError(
            f"{name}={value:.12g} exceeds the admissibility bound {bound:.12g} ({context})", bound=bound
        )
    return value


def _check_radius(radius: int) -> int:
    if int(radius) != radius or radius < 1:
        raise ParameterError(f"radius must be a positive integer, got {radius}")
    return int(radius)


def _pick_radius(tails: np.ndarray, tol: float, label: str) -> int:
    """Smallest K with tails[K-1] < tol, or len(tails) when the target is out of reach."""
    hits = np.flatnonzero(tails < tol)
    if hits.size:
        return int(hits[0]) + 1
    logger.warning(
        f"{label}: tail target {tol:.1e} not reached within radius {tails.size}; "
        f"achieved tail {tails[-1]:.3e}"
    )
    return int(tails.size)


def _assemble(
    model: ModelTag,
    alpha: float,
    coeff: float,
    coeff_name: str,
    bound: float,
    p0: float,
    half_fn: Callable[[int], np.ndarray],
    radius: Optional[int],
    tail_tol: float,
    max_radius: Optional[int],
    lam: Optional[float] = None,
    tail_fn: Optional[Callable[[int], float]] = None,
) -> TransitionKernel:
    p0 = max(0.0, p0)
    if radius is None:
        kmax = int(max_radius or DEFAULTS["max_radius"])
        half = half_fn(kmax)
        tails = 1.0 - (p0 + 2.0 * np.cumsum(half))
        radius = _pick_radius(tails, tail_tol, f"{model.value} kernel alpha={alpha}")
        half = half[:radius]
    else:
        radius = _check_radius(radius)
        half = half_fn(radius)
    probs = np.concatenate((half[::-1], [p0], half))
    if tail_fn is not None:
        tail = tail_fn(radius)
    else:
        tail = 1.0 - math.fsum(probs)
    kernel = TransitionKernel(
        model=model,
        alpha=alpha,
        coeff=coeff,
        coeff_name=coeff_name,
        radius=radius,
        probs=probs,
        tail_mass=max(0.0, tail),
        bound=bound,
        lam=lam,
    )
    logger.debug(f"kernel built | {kernel.as_dict()}")
    return kernel


def _alternating(k: np.ndarray) -> np.ndarray:
    """(-1)^k for integer arrays."""
    return np.where(k % 2 == 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# Constructors


def gl_kernel(
    alpha: float,
    mu: float,
    radius: Optional[int] = None,
    tail_tol: float = DEFAULTS["lattice_tail_tol"],
    max_radius: Optional[int] = None,
) -> TransitionKernel:
    """Grunwald-Letnikov walk; case (a) for alpha < 1, case (b) for 1 < alpha <= 2."""
    alpha = stable.check_alpha(alpha)
    bound = admissible_bound(ModelTag.GRUNWALD_LETNIKOV, alpha)
    mu = _check_coeff("mu", mu, bound, f"Grunwald-Letnikov, alpha={alpha}")
    cos_a = math.cos(alpha * math.pi / 2.0)
    scale = mu / (2.0 * cos_a)

    if alpha < 1.0:
        p0 = 1.0 - mu / cos_a

        def half_fn(kmax: int) -> np.ndarray:
            k = np.arange(1, kmax + 1)
            return -_alternating(k) * scale * stable.binom_series(alpha, kmax)[1:]

    else:
        p0 = 1.0 + mu * alpha / cos_a

        def half_fn(kmax: int) -> np.ndarray:
            c = stable.binom_series(alpha, kmax + 1)
            k = np.arange(1, kmax + 1)
            half = _alternating(k) * scale * c[k + 1]
            half[0] = -scale * (1.0 + c[2])
            return half

    return _assemble(
        ModelTag.GRUNWALD_LETNIKOV, alpha, mu, "mu", bound, p0, half_fn, radius, tail_tol, max_radius
    )


def _gw_from_lambda(
    alpha: float,
    lam: float,
    coeff: float,
    coeff_name: str,
    bound: float,
    radius: Optional[int],
    tail_tol: float,
    max_radius: Optional[int],
) -> TransitionKernel:
    s = alpha + 1.0
    p0 = 1.0 - 2.0 * lam * stable.riemann_zeta(s)

    def half_fn(kmax: int) -> np.ndarray:
        return lam * np.arange(1, kmax + 1, dtype=float) ** (-s)

    def tail_fn(k: int) -> float:
        return 2.0 * lam * stable.zeta_tail(s, k)

    if radius is None:
        kmax = int(max_radius or DEFAULTS["max_radius"])
        tails = 2.0 * lam * special.zeta(s, np.arange(2, kmax + 2, dtype=float))
        radius = _pick_radius(tails, tail_tol, f"gw kernel alpha={alpha}")

    return _assemble(
        ModelTag.GILLIS_WEISS,
        alpha,
        coeff,
        coeff_name,
        bound,
        p0,
        half_fn,
        radius,
        tail_tol,
        max_radius,
        lam=lam,
        tail_fn=tail_fn,
    )


def gw_kernel(
    alpha: float,
    lam: float,
    radius: Optional[int] = None,
    tail_tol: float = DEFAULTS["gw_tail_tol"],
    max_radius: Optional[int] = None,
) -> TransitionKernel:
    """Gillis-Weiss walk, p_k = lambda |k|^-(alpha+1)."""
    alpha = stable.check_alpha(alpha)
    bound = admissible_bound(ModelTag.GILLIS_WEISS, alpha, "lambda")
    lam = _check_coeff("lambda", lam, bound, f"Gillis-Weiss, 1/(2 zeta({alpha + 1.0:g}))")
    return _gw_from_lambda(alpha, lam, lam, "lambda", bound, radius, tail_tol, max_radius)


def gw_kernel_mu(
    alpha: float,
    mu: float,
    radius: Optional[int] = None,
    tail_tol: float = DEFAULTS["gw_tail_tol"],
    max_radius: Optional[int] = None,
) -> TransitionKernel:
    """Gillis-Weiss walk parameterized by mu = lambda / b(alpha); alpha < 2 only."""
    alpha = stable.check_alpha(alpha)
    bound = admissible_bound(ModelTag.GILLIS_WEISS, alpha, "mu")
    mu = _check_coeff("mu", mu, bound, f"Gillis-Weiss mu-form, alpha={alpha}")
    lam = mu * stable.b_coeff(alpha)
    return _gw_from_lambda(alpha, lam, mu, "mu", bound, radius, tail_tol, max_radius)


def _binom_from_lambda(
    alpha: float,
    lam: float,
    coeff: float,
    coeff_name: str,
    bound: float,
    radius: Optional[int],
    tail_tol: float,
    max_radius: Optional[int],
) -> TransitionKernel:
    p0 = 1.0 - 2.0 * lam

    def half_fn(kmax: int) -> np.ndarray:
        k = np.arange(1, kmax + 1)
        if alpha == 1.0:
            return lam / (k * (k + 1.0))
        if alpha == 2.0:
            half = np.zeros(kmax)
            half[0] = lam
            return half
        c = stable.binom_series(alpha, kmax + 1)
        return -_alternating(k) * (lam / (alpha - 1.0)) * c[k + 1]

    return _assemble(
        ModelTag.GLOBALLY_BINOMIAL, alpha, coeff, coeff_name, bound, p0, half_fn, radius, tail_tol, max_radius, lam=lam
    )


def binom_kernel(
    alpha: float,
    mu: float,
    radius: Optional[int] = None,
    tail_tol: float = DEFAULTS["lattice_tail_tol"],
    max_radius: Optional[int] = None,
) -> TransitionKernel:
    """Globally binomial walk with mu = c(alpha) lambda."""
    alpha = stable.check_alpha(alpha)
    bound = admissible_bound(ModelTag.GLOBALLY_BINOMIAL, alpha, "mu")
    mu = _check_coeff("mu", mu, bound, f"globally binomial, alpha={alpha}")
    lam = mu / stable.c_coeff(alpha)
    return _binom_from_lambda(alpha, lam, mu, "mu", bound, radius, tail_tol, max_radius)


def binom_kernel_lambda(
    alpha: float,
    lam: float,
    radius: Optional[int] = None,
    tail_tol: float = DEFAULTS["lattice_tail_tol"],
    max_radius: Optional[int] = None,
) -> TransitionKernel:
    alpha = stable.check_alpha(alpha)
    bound = admissible_bound(ModelTag.GLOBALLY_BINOMIAL, alpha, "lambda")
    lam = _check_coeff("lambda", lam, bound, "globally binomial, lambda <= 1/2")
    return _binom_from_lambda(alpha, lam, lam, "lambda", bound, radius, tail_tol, max_radius)


def build_kernel(
    model,
    alpha: float,
    mu: Optional[float] = None,
    lam: Optional[float] = None,
    radius: Optional[int] = None,
    max_radius: Optional[int] = None,
) -> TransitionKernel:
    """Dispatch on model and on which coefficient was given."""
    model = ModelTag(model)
    if (mu is None) == (lam is None):
        raise ParameterError("give exactly one of mu and lambda")
    if model is ModelTag.GRUNWALD_LETNIKOV:
        if lam is not None:
            raise ParameterError("the Grunwald-Letnikov walk is parameterized by mu only")
        return gl_kernel(alpha, mu, radius, max_radius=max_radius)
    if model is ModelTag.GILLIS_WEISS:
        if lam is not None:
            return gw_kernel(alpha, lam, radius, max_radius=max_radius)
        return gw_kernel_mu(alpha, mu, radius, max_radius=max_radius)
    if model is ModelTag.GLOBALLY_BINOMIAL:
        if lam is not None:
            return binom_kernel_lambda(alpha, lam, radius, max_radius=max_radius)
        return binom_kernel(alpha, mu, radius, max_radius=max_radius)
    raise ParameterError("the Chechkin-Gonchar walk has no lattice kernel")


# ---------------------------------------------------------------------------
# Scaling


def scaling_law_for(model, alpha: float, coeff: float, coeff_name: str = "mu") -> ScalingLaw:
    """Time step law of a lattice walk given its coefficient."""
    model = ModelTag(model)
    alpha = stable.check_alpha(alpha)
    if model is ModelTag.GILLIS_WEISS and coeff_name == "lambda":
        if alpha == 2.0:
            return ScalingLaw(model, alpha, coeff, ScalingForm.LOG_CORRECTED)
        return ScalingLaw(model, alpha, coeff / stable.b_coeff(alpha))
    if model is ModelTag.GLOBALLY_BINOMIAL and coeff_name == "lambda":
        return ScalingLaw(model, alpha, stable.c_coeff(alpha) * coeff)
    if coeff_name != "mu":
        raise ParameterError(f"{model.value} walk does not take {coeff_name}")
    if model is ModelTag.GILLIS_WEISS and alpha == 2.0:
        raise ParameterError("the mu-form of the Gillis-Weiss walk is undefined at alpha=2 (b(2)=0)")
    return ScalingLaw(model, alpha, coeff)


def scaling_law(kernel: TransitionKernel) -> ScalingLaw:
    return scaling_law_for(kernel.model, kernel.alpha, kernel.coeff, kernel.coeff_name)


def scaling_tau(law: ScalingLaw, h: float) -> float:
    if not h > 0.0:
        raise ParameterError(f"h must be positive, got {h}")
    if law.form is ScalingForm.LOG_CORRECTED:
        if not h < 1.0:
            raise ParameterError(f"the log-corrected scaling needs 0 < h < 1, got h={h}")
        return law.coeff * h * h * math.log(1.0 / h)
    return law.coeff * h**law.alpha


def time_steps(law: ScalingLaw, h: float, t: float) -> Tuple[int, float, float]:
    """(n, tau, t_n) with n = round(t / tau) and the realized time t_n = n tau."""
    if not t > 0.0:
        raise ParameterError(f"t must be positive, got {t}")
    tau = scaling_tau(law, h)
    n = int(round(t / tau))
    if n < 1:
        raise ParameterError(f"t={t:g} is shorter than half a time step (tau={tau:.6g} at h={h:g})")
    return n, tau, n * tau


# ---------------------------------------------------------------------------
# Generating functions


def _real_part(values: np.ndarray, label: str) -> np.ndarray:
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if residue > _IMAG_TOL:
        raise FracwalkError(f"{label} generating function has imaginary residue {residue:.3e}")
    return values.real


def _series_values(kernel: TransitionKernel, nu: np.ndarray) -> np.ndarray:
    probs = kernel.lumped_probs
    k = kernel.offsets.astype(float)
    out = np.empty(nu.size, dtype=complex)
    block = max(1, _SERIES_BLOCK // k.size)
    for start in range(0, nu.size, block):
        chunk = nu[start : start + block]
        out[start : start + block] = np.exp(1j * np.outer(chunk, k)) @ probs
    return _real_part(out, "series")


def gw_gamma_integral(alpha: float, nu: float, rel_tol: float = 1e-10) -> float:
    """sum_{k>=1} k^-(alpha+1) (1 - cos k nu) from its integral representation.

    With q = exp(-u), Gamma(alpha+1) times the sum equals
    int_0^inf u^alpha q (1+q) (1 - cos nu) / ((1-q) |1 - q e^{i nu}|^2) du.
    The Gillis-Weiss walk has 1 - p(e^{i nu}) = 2 lambda times this sum.
    """
    nu = abs(float(nu))
    if nu == 0.0:
        return 0.0
    two_s2 = 2.0 * math.sin(nu / 2.0) ** 2  # 1 - cos(nu)

    def core(u: float) -> float:
        q = math.exp(-u)
        one_minus_q = -math.expm1(-u)
        return q * (1.0 + q) * two_s2 / (one_minus_q**2 + 2.0 * q * two_s2)

    def near_zero(u: float) -> float:
        # u * integrand / u^alpha, finite at u = 0
        ratio = 1.0 if u == 0.0 else u / -math.expm1(-u)
        return ratio * core(u)

    def body(u: float) -> float:
        return u**alpha * core(u) / -math.expm1(-u)

    edges = [0.0, nu]
    edge = 10.0 * nu
    while edge < 1.0:
        edges.append(edge)
        edge *= 10.0
    if edges[-1] < 1.0:
        edges.append(1.0)

    total = stable.integrate_checked(
        near_zero, 0.0, nu, abs_tol=0.0, rel_tol=rel_tol, weight="alg", wvar=(alpha - 1.0, 0.0)
    )
    for a, b in zip(edges[1:-1], edges[2:]):
        total += stable.integrate_checked(body, a, b, abs_tol=0.0, rel_tol=rel_tol)
    total += stable.integrate_checked(body, edges[-1], np.inf, abs_tol=0.0, rel_tol=rel_tol)
    return total / math.gamma(alpha + 1.0)


def _exact_values(kernel: TransitionKernel, nu: np.ndarray) -> np.ndarray:
    alpha = kernel.alpha
    if kernel.model is ModelTag.GILLIS_WEISS:
        return np.array([1.0 - 2.0 * kernel.lam * gw_gamma_integral(alpha, v) for v in nu])

    z = np.exp(1j * nu)
    zc = np.conj(z)
    # 1 - e^{i nu} without cancellation
    w = 2.0 * np.sin(nu / 2.0) ** 2 - 1j * np.sin(nu)
    wc = np.conj(w)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kernel.model is ModelTag.GRUNWALD_LETNIKOV:
            scale = kernel.coeff / (2.0 * math.cos(alpha * math.pi / 2.0))
            if alpha < 1.0:
                vals = 1.0 - scale * (w**alpha + wc**alpha)
            else:
                vals = 1.0 - scale * (zc * w**alpha + z * wc**alpha)
        else:
            lam = kernel.lam
            if alpha == 2.0:
                vals = (1.0 - 4.0 * lam * np.sin(nu / 2.0) ** 2).astype(complex)
            elif alpha == 1.0:
                vals = 1.0 + lam * ((zc - 1.0) * np.log(w) + (z - 1.0) * np.log(wc))
            else:
                bracket = zc * (w**alpha - 1.0 + alpha * z) + z * (wc**alpha - 1.0 + alpha * zc)
                vals = 1.0 - 2.0 * lam + lam / (alpha - 1.0) * bracket
    vals = np.where(nu == 0.0, 1.0 + 0.0j, vals)
    return _real_part(vals, "closed-form")


def gen_fn(kernel: TransitionKernel, phase, method: str = "series"):
    """p(e^{i phase}) = sum_k p_k e^{i k phase}, real by symmetry.

    method="series" sums |k| <= K with the tail lumped into p_0; method="exact"
    uses the closed forms (integral representation for Gillis-Weiss).
    """
    nu = np.asarray(phase, dtype=float)
    if np.any(np.abs(nu) > math.pi * (1.0 + 1e-12)):
        raise ParameterError("phase must lie in [-pi, pi]")
    flat = nu.ravel()
    if method == "series":
        vals = _series_values(kernel, flat)
    elif method == "exact":
        vals = _exact_values(kernel, flat)
    else:
        raise ParameterError(f"unknown generating function method {method!r}")
    vals = np.where(flat == 0.0, 1.0, vals)
    return stable._scalar_or_array(vals.reshape(nu.shape))


def wrap_phase(phase):
    """Map angles onto [-pi, pi)."""
    return np.remainder(np.asarray(phase, dtype=float) + math.pi, 2.0 * math.pi) - math.pi


def walk_char_fn(kernel: TransitionKernel, h: float, n: int, kappa, method: str = "series"):
    """Characteristic function (p(e^{i kappa h}))^n of the walk after n steps."""
    if n < 0:
        raise ParameterError(f"n must be nonnegative, got {n}")
    if not h > 0.0:
        raise ParameterError(f"h must be positive, got {h}")
    kappa = np.asarray(kappa, dtype=float)
    if n == 0:
        return stable._scalar_or_array(np.ones_like(kappa))
    vals = np.asarray(gen_fn(kernel, wrap_phase(kappa * h), method)) ** int(n)
    return stable._scalar_or_array(vals)
