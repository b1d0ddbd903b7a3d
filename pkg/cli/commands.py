"""
fracwalk command line: kernel, evolve, sample, density, converge, appendix.

Exit codes: 0 success, 2 invalid parameters, 3 failed convergence check,
4 I/O error, 1 any other library error.
"""

import argparse
import logging
import os
import sys
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from config import DEFAULTS
from core import io_utils
from core import kernels as kernels_mod
from core import pipeline
from core.errors import FracwalkError, OutputError, ParameterError, ToleranceError

logger = logging.getLogger("fracwalk")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARAMETER = 2
EXIT_TOLERANCE = 3
EXIT_OUTPUT = 4

LATTICE_MODELS = ["gl", "gw", "binom"]
WALK_MODELS = LATTICE_MODELS + ["cg", "exact-cauchy"]
VARIANTS = ["power-ratio", "shifted-power", "exact-cauchy"]


def parse_number(text: str) -> float:
    """Decimal or exact rational ("1/64")."""
    text = str(text).strip()
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def parse_number_list(text: str) -> List[float]:
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty list")
    return [parse_number(p) for p in parts]


def parse_int(text: str) -> int:
    value = parse_number(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(value)


def _add_coeff(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--mu", type=parse_number, default=None, help="Scaling coefficient mu (tau = mu h^alpha).")
    group.add_argument("--lambda", dest="lam", type=parse_number, default=None, help="Jump coefficient lambda.")


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=None, help="Output directory (default outputs/<command>).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracwalk", description="Random-walk approximations to symmetric space-fractional diffusion."
    )
    parser.add_argument("--config", default=None, help="JSON file of flag values; explicit flags override it.")
    parser.add_argument("--threads", type=parse_int, default=None, help="Worker thread cap (env FRACWALK_THREADS).")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log DEBUG records.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("kernel", help="Build a transition kernel and export p_k.")
    p.add_argument("--model", choices=LATTICE_MODELS, default=None)
    p.add_argument("--alpha", type=parse_number, default=None)
    _add_coeff(p)
    p.add_argument("--radius", type=parse_int, default=None, help="Truncation radius K (default from the tail target).")
    _add_out(p)

    p = sub.add_parser("evolve", help="Evolve the redistribution scheme on a lattice window.")
    p.add_argument("--model", choices=LATTICE_MODELS, default=None)
    p.add_argument("--alpha", type=parse_number, default=None)
    _add_coeff(p)
    p.add_argument("--h", type=parse_number, default=DEFAULTS["h"])
    when = p.add_mutually_exclusive_group()
    when.add_argument("--t", type=parse_number, default=None, help=f"Target time (default {DEFAULTS['t']}).")
    when.add_argument("--steps", type=parse_int, default=None, help="Number of steps instead of a target time.")
    p.add_argument("--window", type=parse_int, default=None, help="Window half-width in cells.")
    p.add_argument("--start", choices=["delta", "stable"], default="delta")
    p.add_argument("--t0", type=parse_number, default=0.0, help="Time of the stable initial profile.")
    p.add_argument("--compare", action="store_true", help="Report l1/linf errors against the stable density.")
    p.add_argument("--radius", type=parse_int, default=None)
    _add_out(p)

    p = sub.add_parser("sample", help="Simulate walkers and export terminal positions.")
    p.add_argument("--model", choices=WALK_MODELS, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None, help="Chechkin-Gonchar jump law.")
    p.add_argument("--alpha", type=parse_number, default=None)
    _add_coeff(p)
    p.add_argument("--h", type=parse_number, default=DEFAULTS["h"])
    p.add_argument("--t", type=parse_number, default=DEFAULTS["t"])
    p.add_argument("--samples", type=parse_int, default=DEFAULTS["samples"])
    p.add_argument("--seed", type=parse_int, default=DEFAULTS["seed"])
    p.add_argument("--radius", type=parse_int, default=None)
    p.add_argument("--ks", action="store_true", help="Report the KS distance to the stable law.")
    p.add_argument("--binary", action="store_true", help="Write little-endian float64 instead of CSV.")
    p.add_argument("--progress", action="store_true", help="Show a progress bar over sample blocks.")
    _add_out(p)

    p = sub.add_parser("density", help="Evaluate the stable density and CDF.")
    p.add_argument("--alpha", type=parse_number, default=None)
    p.add_argument("--t", type=parse_number, default=DEFAULTS["t"])
    p.add_argument("--x", type=parse_number_list, default=None, help="Comma-separated evaluation points.")
    _add_out(p)

    p = sub.add_parser("converge", help="Characteristic-function convergence table.")
    p.add_argument("--model", choices=WALK_MODELS, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--alpha", type=parse_number, default=None)
    _add_coeff(p)
    p.add_argument("--t", type=parse_number, default=DEFAULTS["t"])
    p.add_argument("--h-seq", type=parse_number_list, default=None, help="Decreasing h values, e.g. 1/8,1/16.")
    p.add_argument("--kappa-grid", type=parse_number_list, default=None)
    p.add_argument("--scaling", choices=["default", "naive"], default="default")
    p.add_argument("--tol", type=parse_number, default=None, help="Bound on the last max error (default: monotonicity only).")
    _add_out(p)

    p = sub.add_parser("appendix", help="Small-nu limits of rho and the Gillis-Weiss generating function.")
    p.add_argument("--alpha-grid", type=parse_number_list, default="0.5,1,1.5,2")
    p.add_argument("--nu-seq", type=parse_number_list, default="1e-2,1e-3,1e-4")
    p.add_argument("--beta-grid", type=parse_number_list, default="-0.5,0,0.5")
    _add_out(p)
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def _config_defaults(sub: argparse.ArgumentParser, config: Dict[str, object]) -> Dict[str, object]:
    """File values as parser defaults; strings go through the flag's type like typed input."""
    known = {a.dest: a for a in sub._actions}
    aliases = {"lambda": "lam"}
    defaults = {}
    for key, value in config.items():
        dest = aliases.get(key, key)
        if dest not in known or dest == "help":
            raise ParameterError(f"unknown config key {key!r} for this command")
        if isinstance(value, bool) or value is None:
            defaults[dest] = value
        elif isinstance(value, (list, tuple)):
            defaults[dest] = ",".join(str(v) for v in value)
        else:
            defaults[dest] = str(value)
    return defaults


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = io_utils.load_config(args.config)
        threads = config.pop("threads", None)
        if getattr(args, "mu", None) is not None or getattr(args, "lam", None) is not None:
            for key in ("mu", "lambda", "lam"):
                config.pop(key, None)
        sub = _subparser(parser, args.command)
        sub.set_defaults(**_config_defaults(sub, config))
        args = parser.parse_args(argv)
        if args.threads is None and threads is not None:
            args.threads = int(threads)
    return args


def resolve_threads(value: Optional[int]) -> Optional[int]:
    if value is None:
        env = os.environ.get("FRACWALK_THREADS")
        if env:
            try:
                value = parse_int(env)
            except argparse.ArgumentTypeError as exc:
                raise ParameterError(f"FRACWALK_THREADS: {exc}") from exc
        else:
            value = DEFAULTS["threads"]
    if value is not None and value < 1:
        raise ParameterError(f"threads must be positive, got {value}")
    return value


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ParameterError(f"{args.command}: missing required flag(s) {flags}")


def _coeff(args: argparse.Namespace, model: Optional[str] = None, alpha: Optional[float] = None):
    """(coeff, name) from --mu/--lambda; without either, half the admissibility bound of a lattice model."""
    if args.mu is not None and args.lam is not None:
        raise ParameterError("give either --mu or --lambda, not both")
    if args.lam is not None:
        return args.lam, "lambda"
    if args.mu is None and model in LATTICE_MODELS and alpha is not None:
        name = "lambda" if model == "gw" else "mu"
        coeff = 0.5 * kernels_mod.admissible_bound(model, alpha, name)
        logger.info(f"{args.command}: no coefficient given, using {name}={coeff:.12g} (half the admissibility bound)")
        return coeff, name
    return args.mu, "mu"


def _walk_model(args: argparse.Namespace):
    """Map the exact-cauchy alias onto the Chechkin-Gonchar walk with alpha=1."""
    if args.model == "exact-cauchy":
        if args.alpha not in (None, 1.0):
            raise ParameterError("the exact Cauchy walk has alpha=1")
        return "cg", 1.0, "exact-cauchy"
    if args.model == "cg":
        return "cg", args.alpha, args.variant or "shifted-power"
    if args.variant is not None:
        raise ParameterError("--variant applies to the Chechkin-Gonchar walk only")
    return args.model, args.alpha, None


def cmd_kernel(args: argparse.Namespace, threads: Optional[int]) -> int:
    _require(args, "model", "alpha")
    if args.mu is None and args.lam is None:
        raise ParameterError("kernel: one of --mu and --lambda is required")
    result = pipeline.run_kernel(args.model, args.alpha, mu=args.mu, lam=args.lam, radius=args.radius, output_dir=args.out)
    k = result.kernel
    print(f"kernel {k.model.value} alpha={k.alpha} {k.coeff_name}={k.coeff:.12g} K={k.radius} p0={k.p0:.12g}")
    print(f"tail mass {k.tail_mass:.3e}, bound {k.bound:.12g} -> {result.output_dir}")
    return EXIT_OK


def cmd_evolve(args: argparse.Namespace, threads: Optional[int]) -> int:
    _require(args, "model", "alpha")
    coeff, coeff_name = _coeff(args, args.model, args.alpha)
    t = args.t if args.t is not None or args.steps is not None else DEFAULTS["t"]
    result = pipeline.run_evolve(
        args.model,
        args.alpha,
        coeff,
        args.h,
        coeff_name=coeff_name,
        t=t,
        steps=args.steps,
        half_width=args.window,
        start=args.start,
        t0=args.t0,
        compare=args.compare,
        radius=args.radius,
        output_dir=args.out,
    )
    state = result.state
    print(f"n={state.n} t_n={state.t:.12g} mass={state.mass:.15g} boundary loss={state.boundary_loss:.3e}")
    if result.l1 is not None:
        print(f"l1={result.l1:.6e} linf={result.linf:.6e}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, threads: Optional[int]) -> int:
    _require(args, "model")
    model, alpha, variant = _walk_model(args)
    if alpha is None:
        raise ParameterError("sample: missing required flag(s) --alpha")
    coeff, coeff_name = _coeff(args, model, alpha)
    result = pipeline.run_sample(
        model,
        alpha,
        coeff,
        args.h,
        args.t,
        args.samples,
        args.seed,
        coeff_name=coeff_name,
        variant=variant,
        radius=args.radius,
        ks=args.ks,
        binary=args.binary,
        workers=threads,
        progress=args.progress,
        output_dir=args.out,
    )
    st = result.statistics
    print(f"N={st['count']} n={result.samples.config.n} t_n={result.samples.realized_t:.12g} var={st['variance']:.6g}")
    if result.ks is not None:
        print(f"KS D_N={result.ks:.6e}")
    return EXIT_OK


def cmd_density(args: argparse.Namespace, threads: Optional[int]) -> int:
    _require(args, "alpha", "x")
    result = pipeline.run_density(args.alpha, args.t, args.x, output_dir=args.out)
    for x, g, G in zip(result.x, result.density, result.cdf):
        print(f"{x:.10g} {g:.10g} {G:.10g}")
    return EXIT_OK


def cmd_converge(args: argparse.Namespace, threads: Optional[int]) -> int:
    _require(args, "model", "h_seq", "kappa_grid")
    model, alpha, variant = _walk_model(args)
    if alpha is None:
        raise ParameterError("converge: missing required flag(s) --alpha")
    coeff, coeff_name = _coeff(args, model, alpha)
    try:
        result = pipeline.run_converge(
            model,
            alpha,
            coeff,
            args.kappa_grid,
            args.h_seq,
            args.t,
            coeff_name=coeff_name,
            variant=variant,
            scaling=args.scaling,
            tol=args.tol,
            workers=threads,
            strict=True,
            output_dir=args.out,
        )
    except ToleranceError:
        print(f"convergence check FAILED -> {args.out or 'outputs/converge'}")
        raise
    worst = ", ".join(f"{e:.3e}" for e in result.report.max_errors())
    print(f"max errors per h: {worst} (passed)")
    return EXIT_OK


def cmd_appendix(args: argparse.Namespace, threads: Optional[int]) -> int:
    result = pipeline.run_appendix(args.alpha_grid, args.nu_seq, beta_grid=args.beta_grid, output_dir=args.out)
    for row in result.report.rows:
        print(f"alpha={row.alpha:g} nu={row.nu:.1e} rho={row.rho:.10g} ratio={row.rho_ratio:.6f} gw={row.gw_ratio:.6f}")
    return EXIT_OK


COMMANDS = {
    "kernel": cmd_kernel,
    "evolve": cmd_evolve,
    "sample": cmd_sample,
    "density": cmd_density,
    "converge": cmd_converge,
    "appendix": cmd_appendix,
}


def _console_handler(verbose: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(logging.DEBUG if verbose else logging.WARNING)
    handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    return handler


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    handler = _console_handler(args.verbose)
    logger.addHandler(handler)
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    try:
        threads = resolve_threads(args.threads)
        return COMMANDS[args.command](args, threads)
    except ParameterError as exc:
        bound = f" (bound {exc.bound:.12g})" if exc.bound is not None else ""
        print(f"error: {exc}{bound}", file=sys.stderr)
        return EXIT_PARAMETER
    except ToleranceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except FracwalkError as exc:
        logger.exception(f"{args.command} failed: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    finally:
        logger.removeHandler(handler)
