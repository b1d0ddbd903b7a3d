"""Monte Carlo simulation of the four walks.

Lattice walks draw integer jumps from their kernel by inversion; the
Chechkin-Gonchar walk draws continuous jumps Y = W^{-1}(U) from an explicitly
invertible jump law. Samples are generated in fixed-size blocks, each with its
own PCG64 stream spawned from the run seed, so the output does not depend on
the number of worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import tqdm

from config import DEFAULTS
from . import kernels as kernels_mod
from . import stable
from .errors import ParameterError
from .kernels import ModelTag, ScalingLaw, TransitionKernel

logger = logging.getLogger("fracwalk")

GENERATOR_NAME = "numpy.random.PCG64"
_OPEN_UNIT_BITS = 52


class CGVariant(str, Enum):
    POWER_RATIO = "power-ratio"
    SHIFTED_POWER = "shifted-power"
    EXACT_CAUCHY = "exact-cauchy"


@dataclass(frozen=True)
class CGDensitySpec:
    """Jump density w with w(x) |x|^(alpha+1) = b + eps(|x|), |eps| <= K, and
    |eps(x)| <= E |x|^-gamma for |x| >= 1."""

    variant: CGVariant
    alpha: float
    b: float
    gamma: float
    k_bound: float
    e_bound: float


def cg_density_spec(variant, alpha: float) -> CGDensitySpec:
    variant = CGVariant(variant)
    if variant is CGVariant.EXACT_CAUCHY:
        if float(alpha) != 1.0:
            raise ParameterError(f"the exact Cauchy walk requires alpha=1, got {alpha}")
        c = 1.0 / math.pi
        return CGDensitySpec(variant, 1.0, b=c, gamma=2.0, k_bound=c, e_bound=c)
    alpha = stable.check_alpha(alpha, allow_two=False)
    if variant is CGVariant.POWER_RATIO:
        return CGDensitySpec(variant, alpha, b=alpha / 2.0, gamma=alpha, k_bound=alpha / 2.0, e_bound=alpha)
    return CGDensitySpec(
        variant, alpha, b=alpha / 2.0, gamma=1.0, k_bound=alpha / 2.0, e_bound=alpha * (alpha + 1.0) / 2.0
    )


def cg_density(spec: CGDensitySpec, x):
    ax = np.abs(np.asarray(x, dtype=float))
    a = spec.alpha
    with np.errstate(divide="ignore"):
        if spec.variant is CGVariant.POWER_RATIO:
            out = a * ax ** (a - 1.0) / (2.0 * (1.0 + ax**a) ** 2)
        elif spec.variant is CGVariant.SHIFTED_POWER:
            out = 0.5 * a * (1.0 + ax) ** (-(a + 1.0))
        else:
            out = 1.0 / (math.pi * (1.0 + ax * ax))
    return stable._scalar_or_array(out)


def cg_cdf(spec: CGDensitySpec, x):
    """W(x); symmetric, W(-x) = 1 - W(x)."""
    xs = np.asarray(x, dtype=float)
    if spec.variant is CGVariant.EXACT_CAUCHY:
        return stable._scalar_or_array(0.5 + np.arctan(xs) / math.pi)
    ax = np.abs(xs)
    if spec.variant is CGVariant.POWER_RATIO:
        lower = 0.5 / (1.0 + ax**spec.alpha)
    else:
        lower = 0.5 * (1.0 + ax) ** (-spec.alpha)
    return stable._scalar_or_array(np.where(xs >= 0.0, 1.0 - lower, lower))


def cg_inverse_cdf(spec: CGDensitySpec, y):
    """Closed-form solution of W(x) = y for y in (0, 1)."""
    ys = np.asarray(y, dtype=float)
    if np.any((ys <= 0.0) | (ys >= 1.0)) or not np.all(np.isfinite(ys)):
        raise ParameterError("inverse CDF needs 0 < y < 1")
    if spec.variant is CGVariant.EXACT_CAUCHY:
        return stable._scalar_or_array(np.tan(math.pi * (ys - 0.5)))
    m = np.minimum(ys, 1.0 - ys)
    if spec.variant is CGVariant.POWER_RATIO:
        mag = ((1.0 - 2.0 * m) / (2.0 * m)) ** (1.0 / spec.alpha)
    else:
        mag = (2.0 * m) ** (-1.0 / spec.alpha) - 1.0
    return stable._scalar_or_array(np.sign(ys - 0.5) * mag)


def cg_char_fn(spec: CGDensitySpec, nu, abs_tol: float = 1e-12) -> np.ndarray:
    """Characteristic function of one jump, 2 int_0^inf cos(nu x) w(x) dx."""
    nus = np.atleast_1d(np.asarray(nu, dtype=float))
    out = np.empty(nus.size)
    for i, v in enumerate(np.abs(nus.ravel())):
        if spec.variant is CGVariant.EXACT_CAUCHY:
            out[i] = math.exp(-v)
            continue
        if v == 0.0:
            out[i] = 1.0
            continue
        # on [0, 1]: int cos(nu x) w = int w - int 2 sin^2(nu x / 2) w, the second integrand is regular at 0
        head = (2.0 * float(cg_cdf(spec, 1.0)) - 1.0) - 2.0 * stable.integrate_checked(
            lambda x: 2.0 * math.sin(v * x / 2.0) ** 2 * float(cg_density(spec, x)), 0.0, 1.0, abs_tol=abs_tol
        )
        tail = 2.0 * stable.integrate_checked(
            lambda x: float(cg_density(spec, x)), 1.0, np.inf, abs_tol=abs_tol, weight="cos", wvar=v
        )
        out[i] = head + tail
    return stable._scalar_or_array(out.reshape(np.shape(nu)))


def cg_scaling_law(spec: CGDensitySpec) -> ScalingLaw:
    """tau = mu h^alpha with mu = b pi / (Gamma(alpha+1) sin(alpha pi/2))."""
    return ScalingLaw(ModelTag.CHECHKIN_GONCHAR, spec.alpha, spec.b / stable.b_coeff(spec.alpha))


def sample_step_discrete(kernel: TransitionKernel, u):
    """Jump offset(s) for uniform variate(s) u in [0, 1) by inversion."""
    order, cdf = kernel.inversion_table
    us = np.asarray(u, dtype=float)
    if np.any((us < 0.0) | (us >= 1.0)):
        raise ParameterError("uniform variates must lie in [0, 1)")
    idx = np.minimum(np.searchsorted(cdf, us, side="right"), order.size - 1)
    out = order[idx]
    return int(out) if out.ndim == 0 else out


def sample_cauchy_exact(u):
    us = np.asarray(u, dtype=float)
    if np.any((us <= 0.0) | (us >= 1.0)):
        raise ParameterError("the exact Cauchy sampler needs 0 < u < 1")
    return stable._scalar_or_array(np.tan(math.pi * (us - 0.5)))


def open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform variates on the open interval (0, 1)."""
    return (rng.integers(0, 2**_OPEN_UNIT_BITS, size=shape, dtype=np.int64) + 0.5) * 2.0**-_OPEN_UNIT_BITS


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass(frozen=True)
class WalkConfig:
    """One Monte Carlo experiment; n, tau and the realized t_n are derived."""

    model: ModelTag
    alpha: float
    coeff: Optional[float]
    h: float
    t: float
    num_samples: int
    seed: int
    coeff_name: str = "mu"
    variant: Optional[CGVariant] = None
    radius: Optional[int] = None
    law: ScalingLaw = field(init=False)
    n: int = field(init=False)
    tau: float = field(init=False)
    realized_t: float = field(init=False)

    def __post_init__(self):
        model = ModelTag(self.model)
        object.__setattr__(self, "model", model)
        if int(self.num_samples) != self.num_samples or self.num_samples < 1:
            raise ParameterError(f"num_samples must be a positive integer, got {self.num_samples}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if model is ModelTag.CHECHKIN_GONCHAR:
            variant = CGVariant(self.variant or CGVariant.SHIFTED_POWER)
            object.__setattr__(self, "variant", variant)
            spec = cg_density_spec(variant, self.alpha)
            object.__setattr__(self, "coeff", spec.b)
            object.__setattr__(self, "coeff_name", "b")
            law = cg_scaling_law(spec)
        else:
            if self.coeff is None:
                raise ParameterError(f"the {model.value} walk needs a coefficient")
            law = kernels_mod.scaling_law_for(model, self.alpha, self.coeff, self.coeff_name)
        n, tau, realized = kernels_mod.time_steps(law, self.h, self.t)
        object.__setattr__(self, "law", law)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "realized_t", realized)

    def build_kernel(self) -> TransitionKernel:
        mu = self.coeff if self.coeff_name == "mu" else None
        lam = self.coeff if self.coeff_name == "lambda" else None
        return kernels_mod.build_kernel(self.model, self.alpha, mu=mu, lam=lam, radius=self.radius)

    def as_dict(self) -> dict:
        return {
            "model": self.model.value,
            "variant": self.variant.value if self.variant else None,
            "alpha": self.alpha,
            "coeff_name": self.coeff_name,
            "coeff": self.coeff,
            "h": self.h,
            "t": self.t,
            "n": self.n,
            "tau": self.tau,
            "realized_t": self.realized_t,
            "scaling": self.law.form.value,
            "num_samples": self.num_samples,
            "seed": self.seed,
        }


@dataclass
class SampleSet:
    config: WalkConfig
    positions: np.ndarray
    rng_streams: dict

    @property
    def realized_t(self) -> float:
        return self.config.realized_t


def _block_positions(
    config: WalkConfig,
    kernel: Optional[TransitionKernel],
    spec: Optional[CGDensitySpec],
    block: int,
    size: int,
    step_chunk: int,
) -> np.ndarray:
    rng = block_generator(config.seed, block)
    remaining = config.n
    if kernel is not None:
        acc = np.zeros(size, dtype=np.int64)
        while remaining:
            m = min(step_chunk, remaining)
            acc += sample_step_discrete(kernel, open_uniform(rng, (m, size))).sum(axis=0)
            remaining -= m
        return config.h * acc.astype(float)
    acc = np.zeros(size)
    while remaining:
        m = min(step_chunk, remaining)
        acc += np.asarray(cg_inverse_cdf(spec, open_uniform(rng, (m, size)))).sum(axis=0)
        remaining -= m
    return config.h * acc


def run_walks(
    config: WalkConfig,
    workers: Optional[int] = None,
    block_size: int = DEFAULTS["mc_block_size"],
    step_chunk: int = DEFAULTS["mc_step_chunk"],
    progress: bool = False,
) -> SampleSet:
    """Terminal positions S_n = h sum_m Y_m of independent walkers."""
    if workers is not None and workers < 1:
        raise ParameterError(f"workers must be positive, got {workers}")
    kernel, spec = None, None
    if config.model is ModelTag.CHECHKIN_GONCHAR:
        spec = cg_density_spec(config.variant, config.alpha)
    else:
        kernel = config.build_kernel()
    sizes: List[Tuple[int, int]] = []
    for block, start in enumerate(range(0, config.num_samples, block_size)):
        sizes.append((block, min(block_size, config.num_samples - start)))
    logger.info(
        f"Sampling {config.num_samples} walkers | model={config.model.value}, alpha={config.alpha}, "
        f"n={config.n}, blocks={len(sizes)}, workers={workers or 'auto'}"
    )

    def task(item: Tuple[int, int]) -> np.ndarray:
        return _block_positions(config, kernel, spec, item[0], item[1], step_chunk)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(tqdm.tqdm(pool.map(task, sizes), total=len(sizes), disable=not progress, desc="blocks"))
    positions = np.concatenate(parts)
    streams = {
        "generator": GENERATOR_NAME,
        "seed": config.seed,
        "spawn_keys": [[block] for block, _ in sizes],
        "block_size": block_size,
        "step_chunk": step_chunk,
        "uniform": f"open ({_OPEN_UNIT_BITS}-bit)",
    }
    if kernel is not None:
        streams["kernel_fingerprint"] = kernel.fingerprint
    return SampleSet(config=config, positions=positions, rng_streams=streams)
