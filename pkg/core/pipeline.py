from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from config import DEFAULTS
from . import diagnostics
from . import io_utils
from . import kernels as kernels_mod
from . import lattice as lattice_mod
from . import montecarlo
from . import stable
from . import stats
from .errors import ParameterError, ToleranceError


LOG_DIR = Path(os.environ.get("FRACWALK_LOG_DIR") or Path(__file__).resolve().parent.parent / "log")
LOG_DIR.mkdir(parents=True, exist_ok=True)
logger = logging.getLogger("fracwalk")
if not logger.handlers:
    logger.setLevel(logging.INFO)
    fh = logging.FileHandler(LOG_DIR / "app.log", encoding="utf-8")
    fmt = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")
    fh.setFormatter(fmt)
    logger.addHandler(fh)


def _out_dir(output_dir: Optional[str], command: str) -> Path:
    return Path(output_dir) if output_dir else Path("outputs") / command


def _coeffs(coeff: Optional[float], coeff_name: str):
    if coeff_name not in ("mu", "lambda"):
        raise ParameterError(f"unknown coefficient name {coeff_name!r}")
    return (coeff, None) if coeff_name == "mu" else (None, coeff)


@dataclass
class KernelResult:
    kernel: kernels_mod.TransitionKernel
    output_dir: Path
    output_paths: List[Path] = field(default_factory=list)


def run_kernel(
    model: str,
    alpha: float,
    mu: Optional[float] = None,
    lam: Optional[float] = None,
    radius: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> KernelResult:
    """Build a transition kernel and export p_k and its metadata."""
    logger.info(f"Building kernel | model={model}, alpha={alpha}, mu={mu}, lambda={lam}, radius={radius}")
    kernel = kernels_mod.build_kernel(model, alpha, mu=mu, lam=lam, radius=radius)
    law = kernels_mod.scaling_law(kernel)
    meta = kernel.as_dict()
    meta["scaling"] = {"form": law.form.value, "coeff": law.coeff}
    meta["sum_check"] = float(np.sum(kernel.probs) + kernel.tail_mass)

    out_dir = _out_dir(output_dir, "kernel")
    logger.info(f"Saving outputs to {out_dir}")
    try:
        paths = [
            io_utils.save_csv(np.column_stack((kernel.offsets, kernel.probs)), "k,p_k", out_dir / "kernel.csv"),
            io_utils.save_json(meta, out_dir / "kernel.json"),
        ]
        params = {"model": kernel.model.value, "alpha": alpha, "mu": mu, "lambda": lam, "radius": radius}
        paths.append(io_utils.write_manifest(out_dir, "kernel", params, paths))
    except Exception as exc:
        logger.exception(f"Failed saving outputs: {exc}")
        raise
    return KernelResult(kernel=kernel, output_dir=out_dir, output_paths=paths)


@dataclass
class EvolveResult:
    state: lattice_mod.LatticeState
    kernel: kernels_mod.TransitionKernel
    l1: Optional[float]
    linf: Optional[float]
    output_dir: Path
    output_paths: List[Path] = field(default_factory=list)


def run_evolve(
    model: str,
    alpha: float,
    coeff: float,
    h: float,
    coeff_name: str = "mu",
    t: Optional[float] = None,
    steps: Optional[int] = None,
    half_width: Optional[int] = None,
    start: str = "delta",
    t0: float = 0.0,
    compare: bool = False,
    radius: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> EvolveResult:
    """
    Evolve the redistribution scheme from a delta or stable initial profile.

    Args:
        t: Target time; the step count is n = round(t / tau). Mutually exclusive with steps.
        steps: Explicit number of steps.
        half_width: Window half-width in cells; default covers the target law.
        start: "delta" (walker at 0) or "stable" (exact cells of g_alpha(., t0)).
        compare: Compute l1/linf errors against g_alpha at the realized time.
    """
    if (t is None) == (steps is None):
        raise ParameterError("give exactly one of t and steps")
    if start not in ("delta", "stable"):
        raise ParameterError(f"unknown start {start!r}")
    if start == "stable" and not t0 > 0.0:
        raise ParameterError("a stable initial profile needs t0 > 0")
    if not h > 0.0:
        raise ParameterError(f"h must be positive, got {h}")
    mu, lam = _coeffs(coeff, coeff_name)
    kernel = kernels_mod.build_kernel(model, alpha, mu=mu, lam=lam, radius=radius)
    law = kernels_mod.scaling_law(kernel)
    if steps is not None:
        if int(steps) != steps or steps < 1:
            raise ParameterError(f"steps must be a positive integer, got {steps}")
        n, tau = int(steps), kernels_mod.scaling_tau(law, h)
    else:
        n, tau, _ = kernels_mod.time_steps(law, h, t)
    t_end = (t0 if start == "stable" else 0.0) + n * tau
    if half_width is None:
        window = lattice_mod.default_window(law.alpha, t_end, h, kernel.radius)
    else:
        window = lattice_mod.symmetric_window(half_width)

    logger.info(
        f"Evolving lattice | model={kernel.model.value}, alpha={alpha}, h={h}, tau={tau:.6g}, n={n}, "
        f"window=[{window[0]}, {window[1]}]"
    )
    if start == "delta":
        state = lattice_mod.init_delta(h, tau, window)
    else:
        state = lattice_mod.stable_initial_state(stable.StableParams(law.alpha, t0), h, tau, window)
    state = lattice_mod.evolve(state, kernel, n)
    logger.info(f"Evolution done | t_n={state.t:.12g}, mass={state.mass:.15g}, boundary loss={state.boundary_loss:.3e}")

    l1 = linf = None
    if compare:
        l1, linf = diagnostics.lattice_error(state, stable.StableParams(law.alpha, state.t))
        logger.info(f"Lattice error | l1={l1:.6e}, linf={linf:.6e}")

    summary = {
        "kernel": kernel.as_dict(),
        "h": h,
        "tau": tau,
        "n": n,
        "t0": state.t0,
        "realized_t": state.t,
        "window": list(state.window),
        "mass": state.mass,
        "initial_mass": state.initial_mass,
        "boundary_loss": state.boundary_loss,
        "l1": l1,
        "linf": linf,
    }
    out_dir = _out_dir(output_dir, "evolve")
    logger.info(f"Saving outputs to {out_dir}")
    try:
        x, dens = lattice_mod.lattice_profile(state)
        table = np.column_stack((state.indices, x, state.values, dens))
        paths = [
            io_utils.save_csv(table, "j,x,y,density", out_dir / "lattice.csv"),
            io_utils.save_json(summary, out_dir / "evolve.json"),
        ]
        params = {
            "model": kernel.model.value,
            "alpha": alpha,
            coeff_name: coeff,
            "h": h,
            "t": t,
            "steps": steps,
            "half_width": half_width,
            "start": start,
            "t0": t0,
            "radius": radius,
        }
        paths.append(io_utils.write_manifest(out_dir, "evolve", params, paths, realized_tn=state.t))
    except Exception as exc:
        logger.exception(f"Failed saving outputs: {exc}")
        raise
    return EvolveResult(state=state, kernel=kernel, l1=l1, linf=linf, output_dir=out_dir, output_paths=paths)


@dataclass
class SampleResult:
    samples: montecarlo.SampleSet
    statistics: dict
    ks: Optional[float]
    output_dir: Path
    output_paths: List[Path] = field(default_factory=list)


def run_sample(
    model: str,
    alpha: float,
    coeff: Optional[float],
    h: float,
    t: float,
    num_samples: int,
    seed: int,
    coeff_name: str = "mu",
    variant: Optional[str] = None,
    radius: Optional[int] = None,
    ks: bool = False,
    binary: bool = False,
    workers: Optional[int] = None,
    progress: bool = False,
    output_dir: Optional[str] = None,
) -> SampleResult:
    """Simulate independent walkers and export their terminal positions."""
    config = montecarlo.WalkConfig(
        model=model,
        alpha=alpha,
        coeff=coeff,
        h=h,
        t=t,
        num_samples=num_samples,
        seed=seed,
        coeff_name=coeff_name,
        variant=variant,
        radius=radius,
    )
    samples = montecarlo.run_walks(
        config,
        workers=workers,
        block_size=DEFAULTS["mc_block_size"],
        step_chunk=DEFAULTS["mc_step_chunk"],
        progress=progress,
    )
    summary = stats.compute_sample_statistics(samples.positions, realized_t=samples.realized_t)
    ks_value = None
    if ks:
        ks_value = diagnostics.ks_statistic(samples, stable.StableParams(config.law.alpha, samples.realized_t))
        logger.info(f"KS distance D_N={ks_value:.6e} (N={num_samples})")

    out_dir = _out_dir(output_dir, "sample")
    logger.info(f"Saving outputs to {out_dir}")
    try:
        if binary:
            paths = [io_utils.save_binary(samples.positions, out_dir / "samples.f64")]
        else:
            paths = [io_utils.save_csv(samples.positions, "x", out_dir / "samples.csv")]
        meta = {"config": config.as_dict(), "rng_streams": samples.rng_streams, "statistics": summary, "ks": ks_value}
        paths.append(io_utils.save_json(meta, out_dir / "sample.json"))
        stats.save_statistics_summary(summary, out_dir / "statistics.txt")
        paths.append(out_dir / "statistics.txt")
        paths.append(
            io_utils.write_manifest(
                out_dir, "sample", config.as_dict(), paths, seed=seed, realized_tn=samples.realized_t
            )
        )
    except Exception as exc:
        logger.exception(f"Failed saving outputs: {exc}")
        raise
    return SampleResult(samples=samples, statistics=summary, ks=ks_value, output_dir=out_dir, output_paths=paths)


@dataclass
class DensityResult:
    x: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    output_dir: Path
    output_paths: List[Path] = field(default_factory=list)


def run_density(
    alpha: float,
    t: float,
    x: Sequence[float],
    output_dir: Optional[str] = None,
) -> DensityResult:
    """Evaluate g_alpha(x, t) and G_alpha(x, t) on the given points."""
    params = stable.StableParams(alpha, t)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if xs.size == 0 or not np.all(np.isfinite(xs)):
        raise ParameterError("density needs finite evaluation points")
    dens = np.atleast_1d(stable.target_density(params)(xs))
    cdf = np.atleast_1d(stable.target_cdf(params, size_hint=xs.size)(xs))
    logger.info(f"Density evaluated | alpha={alpha}, t={t}, points={xs.size}")

    out_dir = _out_dir(output_dir, "density")
    try:
        paths = [io_utils.save_csv(np.column_stack((xs, dens, cdf)), "x,density,cdf", out_dir / "density.csv")]
        paths.append(io_utils.write_manifest(out_dir, "density", {"alpha": alpha, "t": t, "x": xs}, paths))
    except Exception as exc:
        logger.exception(f"Failed saving outputs: {exc}")
        raise
    return DensityResult(x=xs, density=dens, cdf=cdf, output_dir=out_dir, output_paths=paths)


@dataclass
class ConvergeResult:
    report: diagnostics.ConvergenceReport
    passed: bool
    output_dir: Path
    output_paths: List[Path] = field(default_factory=list)


def run_converge(
    model: str,
    alpha: float,
    coeff: Optional[float],
    kappa_grid: Sequence[float],
    h_sequence: Sequence[float],
    t: float,
    coeff_name: str = "mu",
    variant: Optional[str] = None,
    scaling: str = "default",
    tol: Optional[float] = None,
    workers: Optional[int] = None,
    strict: bool = False,
    output_dir: Optional[str] = None,
) -> ConvergeResult:
    """
    Characteristic-function error table over kappa x h.

    The run passes when every cell was computed and the max-over-kappa error
    decreases at each refinement; with ``tol`` its last value must also be
    at most ``tol``.
    With ``strict`` a failed check raises ToleranceError after the artifacts
    are written.
    """
    if tol is not None and not tol > 0.0:
        raise ParameterError(f"tol must be positive, got {tol}")
    report = diagnostics.cf_convergence(
        model,
        alpha,
        coeff,
        kappa_grid,
        h_sequence,
        t,
        coeff_name=coeff_name,
        variant=montecarlo.CGVariant(variant) if variant else None,
        scaling=scaling,
        workers=workers,
    )
    passed = report.is_decreasing() and not report.failures
    if tol is not None:
        passed = passed and report.passed(tol)
    meta = report.as_dict()
    meta.update({"tol": tol, "passed": passed})

    out_dir = _out_dir(output_dir, "converge")
    logger.info(f"Saving outputs to {out_dir}")
    try:
        header = "kappa," + ",".join(f"h={h:.17g}" for h in report.h_sequence)
        table = np.column_stack((report.kappa_grid, report.errors))
        paths = [
            io_utils.save_csv(table, header, out_dir / "converge_errors.csv"),
            io_utils.save_json(meta, out_dir / "converge.json"),
        ]
        params = {
            "model": report.model.value,
            "alpha": alpha,
            "coeff_name": report.coeff_name,
            "coeff": report.coeff,
            "variant": variant,
            "scaling": scaling,
            "kappa_grid": report.kappa_grid,
            "h_sequence": report.h_sequence,
            "t": t,
            "tol": tol,
        }
        paths.append(io_utils.write_manifest(out_dir, "converge", params, paths, realized_tn=float(report.realized_t[-1])))
    except Exception as exc:
        logger.exception(f"Failed saving outputs: {exc}")
        raise
    if not passed:
        logger.warning(f"Convergence check failed | max errors={report.max_errors().tolist()}, tol={tol}")
        if strict:
            raise ToleranceError(
                f"convergence check failed: max errors {report.max_errors().tolist()} against tol {tol}"
            )
    return ConvergeResult(report=report, passed=passed, output_dir=out_dir, output_paths=paths)


@dataclass
class AppendixResult:
    report: diagnostics.AppendixReport
    q_checks: List[dict]
    output_dir: Path
    output_paths: List[Path] = field(default_factory=list)


def run_appendix(
    alpha_grid: Sequence[float],
    nu_sequence: Sequence[float],
    beta_grid: Sequence[float] = (-0.5, 0.0, 0.5),
    output_dir: Optional[str] = None,
) -> AppendixResult:
    """Small-nu limits of rho and of the Gillis-Weiss generating function, plus q(beta)."""
    report = diagnostics.appendix_limits_check(alpha_grid, nu_sequence)
    q_checks = []
    for beta in beta_grid:
        value = diagnostics.q_integral(beta)
        closed = np.pi / (2.0 * np.cos(beta * np.pi / 2.0))
        q_checks.append({"beta": float(beta), "q": value, "closed_form": float(closed), "abs_error": abs(value - closed)})
    logger.info(f"Appendix checks done | rows={len(report.rows)}, q checks={len(q_checks)}")

    out_dir = _out_dir(output_dir, "appendix")
    try:
        paths = [
            io_utils.save_csv(report.as_table(), "alpha,nu,rho,rho_ratio,gw_ratio", out_dir / "appendix.csv"),
            io_utils.save_json({"q_checks": q_checks}, out_dir / "appendix.json"),
        ]
        params = {"alpha_grid": list(alpha_grid), "nu_sequence": list(nu_sequence), "beta_grid": list(beta_grid)}
        paths.append(io_utils.write_manifest(out_dir, "appendix", params, paths))
    except Exception as exc:
        logger.exception(f"Failed saving outputs: {exc}")
        raise
    return AppendixResult(report=report, q_checks=q_checks, output_dir=out_dir, output_paths=paths)
