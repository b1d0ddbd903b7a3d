"""Convergence checks: characteristic-function error tables, KS distance of
Monte Carlo samples, lattice error norms and the small-nu asymptotics of the
Gillis-Weiss walk.

Fitted decay rates are empirical observations; no rates are claimed.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import DEFAULTS
from . import kernels as kernels_mod
from . import montecarlo
from . import stable
from .errors import FracwalkError, ParameterError
from .kernels import ModelTag, ScalingForm, ScalingLaw
from .lattice import LatticeState
from .montecarlo import CGVariant, SampleSet

logger = logging.getLogger("fracwalk")

_FIT_LEVELS = 3


@dataclass
class ConvergenceReport:
    """|y(kappa, t_n; h) - exp(-t_n |kappa|^alpha)| on a kappa x h grid."""

    model: ModelTag
    alpha: float
    t: float
    coeff: float
    coeff_name: str
    scaling: str
    kappa_grid: np.ndarray
    h_sequence: np.ndarray
    errors: np.ndarray
    observed_rates: np.ndarray
    steps: np.ndarray
    realized_t: np.ndarray
    truncation_bound: np.ndarray
    failures: Dict[Tuple[int, int], str] = field(default_factory=dict)

    def max_errors(self) -> np.ndarray:
        """Max over kappa for every h (NaN cells ignored)."""
        with np.errstate(invalid="ignore"):
            return np.nanmax(np.where(np.isnan(self.errors), -np.inf, self.errors), axis=0)

    def is_decreasing(self) -> bool:
        worst = self.max_errors()
        return bool(np.all(np.diff(worst) < 0.0))

    def passed(self, tol: float) -> bool:
        worst = self.max_errors()
        return not self.failures and bool(worst[-1] <= tol)

    def as_dict(self) -> dict:
        return {
            "model": self.model.value,
            "alpha": self.alpha,
            "t": self.t,
            "coeff_name": self.coeff_name,
            "coeff": self.coeff,
            "scaling": self.scaling,
            "kappa_grid": self.kappa_grid.tolist(),
            "h_sequence": self.h_sequence.tolist(),
            "steps": self.steps.tolist(),
            "realized_t": self.realized_t.tolist(),
            "truncation_bound": self.truncation_bound.tolist(),
            "max_errors": self.max_errors().tolist(),
            "observed_rates": [None if np.isnan(r) else float(r) for r in self.observed_rates],
            "rates_note": "empirical least-squares slopes over the last refinement levels",
            "failures": {f"{i},{j}": msg for (i, j), msg in self.failures.items()},
        }


def fit_rate(h_sequence: Sequence[float], errors: Sequence[float], levels: int = _FIT_LEVELS) -> float:
    """Slope of log(error) against log(h) over the last ``levels`` usable points."""
    h = np.asarray(h_sequence, dtype=float)
    e = np.asarray(errors, dtype=float)
    usable = np.isfinite(e) & (e > 0.0)
    h, e = h[usable][-levels:], e[usable][-levels:]
    if h.size < 2:
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def cf_convergence(
    model,
    alpha: float,
    coeff: Optional[float],
    kappa_grid: Sequence[float],
    h_sequence: Sequence[float],
    t: float,
    coeff_name: str = "mu",
    variant: Optional[CGVariant] = None,
    scaling: str = "default",
    method: str = "exact",
    workers: Optional[int] = None,
) -> ConvergenceReport:
    """Error table of the walk characteristic function against exp(-t_n |kappa|^alpha).

    ``scaling="naive"`` replaces the log-corrected Gillis-Weiss law at alpha=2
    by tau = lambda h^2, which converges to the wrong limit. Parameter problems
    that depend on h (n < 1, h >= 1 for the log law) are recorded per cell.
    """
    model = ModelTag(model)
    kappa = np.asarray(kappa_grid, dtype=float)
    hs = np.asarray(h_sequence, dtype=float)
    if kappa.ndim != 1 or hs.ndim != 1 or kappa.size == 0 or hs.size == 0:
        raise ParameterError("kappa grid and h sequence must be nonempty 1-D sequences")
    if np.any(np.diff(hs) >= 0.0):
        raise ParameterError("h sequence must be strictly decreasing")
    if scaling not in ("default", "naive"):
        raise ParameterError(f"unknown scaling {scaling!r}")

    kernel, spec = None, None
    if model is ModelTag.CHECHKIN_GONCHAR:
        spec = montecarlo.cg_density_spec(variant or CGVariant.SHIFTED_POWER, alpha)
        law = montecarlo.cg_scaling_law(spec)
        coeff, coeff_name = spec.b, "b"
    else:
        mu = coeff if coeff_name == "mu" else None
        lam = coeff if coeff_name == "lambda" else None
        kernel = kernels_mod.build_kernel(model, alpha, mu=mu, lam=lam)
        law = kernels_mod.scaling_law(kernel)
    if scaling == "naive":
        if law.form is not ScalingForm.LOG_CORRECTED:
            raise ParameterError("the naive control scaling only applies to the Gillis-Weiss walk at alpha=2")
        law = ScalingLaw(model, law.alpha, law.coeff, ScalingForm.POWER_LAW)

    errors = np.full((kappa.size, hs.size), np.nan)
    steps = np.zeros(hs.size, dtype=np.int64)
    realized = np.full(hs.size, np.nan)
    failures: Dict[Tuple[int, int], str] = {}
    for j, h in enumerate(hs):
        try:
            n, _, t_n = kernels_mod.time_steps(law, float(h), t)
        except ParameterError as exc:
            for i in range(kappa.size):
                failures[(i, j)] = str(exc)
            continue
        steps[j], realized[j] = n, t_n

    target = {j: stable.StableParams(law.alpha, realized[j]) for j in range(hs.size) if steps[j] > 0}

    def cell(ij: Tuple[int, int]) -> Tuple[Tuple[int, int], Optional[float], Optional[str]]:
        i, j = ij
        try:
            if kernel is not None:
                walk = kernels_mod.walk_char_fn(kernel, float(hs[j]), int(steps[j]), kappa[i], method=method)
            else:
                walk = float(montecarlo.cg_char_fn(spec, kappa[i] * hs[j])) ** int(steps[j])
            return ij, abs(walk - stable.char_fn(target[j], kappa[i])), None
        except FracwalkError as exc:
            return ij, None, str(exc)

    cells = [(i, j) for j in range(hs.size) if steps[j] > 0 for i in range(kappa.size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for (i, j), err, msg in pool.map(cell, cells):
            if msg is None:
                errors[i, j] = err
            else:
                failures[(i, j)] = msg
    for (i, j), msg in failures.items():
        logger.debug(f"cf_convergence cell kappa={kappa[i]}, h={hs[j]} failed: {msg}")

    tail = kernel.tail_mass if kernel is not None else 0.0
    report = ConvergenceReport(
        model=model,
        alpha=law.alpha,
        t=t,
        coeff=float(coeff),
        coeff_name=coeff_name,
        scaling=f"{law.form.value}{' (naive control)' if scaling == 'naive' else ''}",
        kappa_grid=kappa,
        h_sequence=hs,
        errors=errors,
        observed_rates=np.array([fit_rate(hs, row) for row in errors]),
        steps=steps,
        realized_t=realized,
        truncation_bound=steps * tail,
        failures=failures,
    )
    logger.info(
        f"cf_convergence | model={model.value}, alpha={law.alpha}, scaling={report.scaling}, "
        f"max errors={np.array2string(report.max_errors(), precision=3)}"
    )
    return report


def ks_statistic(samples: SampleSet, target: stable.StableParams, q: Optional[stable.QuadratureConfig] = None) -> float:
    """D_N = sup_x |F_N(x) - G_alpha(x, t)| with both one-sided gaps at the sample points."""
    positions = np.asarray(samples.positions, dtype=float)
    if positions.size == 0:
        raise ParameterError("no samples")
    if not math.isclose(target.t, samples.realized_t, rel_tol=1e-12, abs_tol=1e-15):
        raise ParameterError(
            f"target t={target.t!r} differs from the realized time t_n={samples.realized_t!r} of the samples"
        )
    cdf = stable.target_cdf(target, size_hint=positions.size, q=q)
    return float(stats.kstest(positions, cdf).statistic)


def lattice_error(
    state: LatticeState, target: stable.StableParams, q: Optional[stable.QuadratureConfig] = None
) -> Tuple[float, float]:
    """(l1, linf): l1 against exact cell integrals, linf of y_j/h against g_alpha(x_j)."""
    if not state.t > 0.0:
        raise ParameterError("lattice state is at t=0")
    if not math.isclose(target.t, state.t, rel_tol=1e-12, abs_tol=1e-15):
        raise ParameterError(f"target t={target.t!r} differs from the lattice time t_n={state.t!r}")
    x = state.positions
    edges = np.append(x - 0.5 * state.h, x[-1] + 0.5 * state.h)
    cells = stable.cell_masses(target, edges, q=q)
    dens = np.atleast_1d(stable.target_density(target, q=q)(x))
    l1 = math.fsum(np.abs(state.values - cells))
    linf = float(np.max(np.abs(state.values / state.h - dens)))
    return l1, linf


def rho_integral(alpha: float, nu: float, abs_tol: float = DEFAULTS["quad_abs_tol"]) -> float:
    """rho(nu) = int_0^inf w^(alpha-1) exp(-nu w) / (w^2 + 1) dw.

    [0, 1] uses the algebraic endpoint weight; [1, inf) is mapped by w = e^y
    to int_0^Y exp(-(2-alpha) y - nu e^y) / (1 + e^-2y) dy with Y cut where the
    integrand is negligible.
    """
    alpha = stable.check_alpha(alpha)
    nu = float(nu)
    if nu < 0.0:
        raise ParameterError(f"nu must be nonnegative, got {nu}")
    if nu == 0.0 and alpha == 2.0:
        raise ParameterError("rho diverges for nu=0 at alpha=2")
    head = stable.integrate_checked(
        lambda w: math.exp(-nu * w) / (w * w + 1.0), 0.0, 1.0, abs_tol=abs_tol, weight="alg", wvar=(alpha - 1.0, 0.0)
    )
    cut = math.inf
    if nu > 0.0:
        cut = max(1.0, math.log(50.0 / nu))
    if alpha < 2.0:
        cut = min(cut, 28.0 / (2.0 - alpha))

    def body(y: float) -> float:
        return math.exp(-(2.0 - alpha) * y - nu * math.exp(y)) / (1.0 + math.exp(-2.0 * y))

    extra = {}
    if nu > 0.0 and 0.0 < math.log(1.0 / nu) < cut:
        extra["points"] = [math.log(1.0 / nu)]
    tail = stable.integrate_checked(body, 0.0, cut, abs_tol=abs_tol, **extra)
    return head + tail


def rho_limit(alpha: float) -> float:
    """pi / (2 sin(alpha pi / 2)), the nu -> 0 value of rho for alpha < 2."""
    alpha = stable.check_alpha(alpha, allow_two=False)
    return math.pi / (2.0 * math.sin(alpha * math.pi / 2.0))


def q_integral(beta: float, abs_tol: float = 1e-10) -> float:
    """q(beta) = int_0^inf x^beta / (x^2 + 1) dx for -1 < beta < 1."""
    if not -1.0 < beta < 1.0:
        raise ParameterError(f"q(beta) needs -1 < beta < 1, got {beta}")
    # x -> 1/x folds [1, inf) onto [0, 1] with exponent -beta
    weight = lambda s: 1.0 / (1.0 + s * s)  # noqa: E731
    lower = stable.integrate_checked(weight, 0.0, 1.0, abs_tol=abs_tol, weight="alg", wvar=(beta, 0.0))
    upper = stable.integrate_checked(weight, 0.0, 1.0, abs_tol=abs_tol, weight="alg", wvar=(-beta, 0.0))
    return lower + upper


def gw_small_nu_ratio(alpha: float, nu: float, lam: Optional[float] = None) -> float:
    """[1 - p(e^{i nu})] over its small-nu asymptote for the Gillis-Weiss walk.

    The asymptote is lambda pi nu^alpha / (Gamma(alpha+1) sin(alpha pi/2)) for
    alpha < 2 and lambda nu^2 log(1/nu) at alpha = 2. ``lam`` defaults to half
    the admissibility bound.
    """
    alpha = stable.check_alpha(alpha)
    if not 0.0 < nu < 1.0:
        raise ParameterError(f"nu must lie in (0, 1), got {nu}")
    if lam is None:
        lam = 0.5 * kernels_mod.admissible_bound("gw", alpha, "lambda")
    # the closed form does not depend on the truncation radius
    kernel = kernels_mod.gw_kernel(alpha, lam, radius=1)
    deficit = 1.0 - kernels_mod.gen_fn(kernel, nu, method="exact")
    if alpha == 2.0:
        return deficit / (kernel.lam * nu * nu * math.log(1.0 / nu))
    return deficit / (kernel.lam * nu**alpha / stable.b_coeff(alpha))


@dataclass
class AppendixRow:
    alpha: float
    nu: float
    rho: float
    rho_ratio: float
    gw_ratio: float


@dataclass
class AppendixReport:
    rows: List[AppendixRow]

    def for_alpha(self, alpha: float) -> List[AppendixRow]:
        return [r for r in self.rows if r.alpha == alpha]

    def as_table(self) -> np.ndarray:
        return np.array([[r.alpha, r.nu, r.rho, r.rho_ratio, r.gw_ratio] for r in self.rows], dtype=float)


def appendix_limits_check(alpha_grid: Sequence[float], nu_sequence: Sequence[float]) -> AppendixReport:
    """rho(nu) against its limit (alpha < 2) or log(1/nu) (alpha = 2), and the
    Gillis-Weiss generating function against its small-nu asymptote."""
    nus = [float(v) for v in nu_sequence]
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise ParameterError("nu sequence must be decreasing")
    rows = []
    for alpha in alpha_grid:
        alpha = stable.check_alpha(alpha)
        for nu in nus:
            rho = rho_integral(alpha, nu)
            if alpha == 2.0:
                rho_ratio = rho / math.log(1.0 / nu)
            else:
                rho_ratio = rho / rho_limit(alpha)
            rows.append(AppendixRow(alpha, nu, rho, rho_ratio, gw_small_nu_ratio(alpha, nu)))
            logger.debug(f"appendix | alpha={alpha}, nu={nu:.1e}, rho ratio={rho_ratio:.6f}")
    return AppendixReport(rows)
