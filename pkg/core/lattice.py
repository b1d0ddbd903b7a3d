"""Redistribution scheme y_j(t_{n+1}) = sum_k p_k y_{j-k}(t_n) on a finite window.

Mass convolved past the window edges is absorbed and tallied in
``boundary_loss``; nothing is reflected or wrapped.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from config import DEFAULTS
from . import stable
from .errors import ParameterError
from .kernels import TransitionKernel

logger = logging.getLogger("fracwalk")

Window = Tuple[int, int]


@dataclass(frozen=True, eq=False)
class LatticeState:
    """Cell masses y_j for j_min <= j <= j_max at time t0 + n tau."""

    h: float
    tau: float
    n: int
    j_min: int
    j_max: int
    values: np.ndarray
    boundary_loss: float = 0.0
    t0: float = 0.0
    initial_mass: float = 1.0

    def __post_init__(self):
        if not (self.h > 0.0 and self.tau > 0.0):
            raise ParameterError(f"h and tau must be positive, got h={self.h}, tau={self.tau}")
        if self.j_max < self.j_min:
            raise ParameterError(f"empty window [{self.j_min}, {self.j_max}]")
        values = np.array(self.values, dtype=float)
        if values.shape != (self.j_max - self.j_min + 1,):
            raise ParameterError("values do not match the window size")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def window(self) -> Window:
        return self.j_min, self.j_max

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    @property
    def positions(self) -> np.ndarray:
        return self.indices * self.h

    @property
    def t(self) -> float:
        """Realized time t0 + n tau."""
        return self.t0 + self.n * self.tau

    @property
    def mass(self) -> float:
        return math.fsum(self.values)

    def value_at(self, j: int) -> float:
        if self.j_min <= j <= self.j_max:
            return float(self.values[j - self.j_min])
        return 0.0


def _check_window(window: Window) -> Window:
    j_min, j_max = int(window[0]), int(window[1])
    if j_max < j_min:
        raise ParameterError(f"empty window [{j_min}, {j_max}]")
    return j_min, j_max


def symmetric_window(half_width: int) -> Window:
    half_width = int(half_width)
    if half_width < 0:
        raise ParameterError(f"half width must be nonnegative, got {half_width}")
    return -half_width, half_width


def init_delta(h: float, tau: float, window: Window) -> LatticeState:
    """Walker at x_0 = 0: y_0 = 1."""
    j_min, j_max = _check_window(window)
    if not j_min <= 0 <= j_max:
        raise ParameterError(f"window [{j_min}, {j_max}] does not contain the origin")
    values = np.zeros(j_max - j_min + 1)
    values[-j_min] = 1.0
    return LatticeState(h=h, tau=tau, n=0, j_min=j_min, j_max=j_max, values=values)


def init_from_density(
    h: float,
    tau: float,
    window: Window,
    f: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    cdf: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    t0: float = 0.0,
) -> LatticeState:
    """Cell masses of an initial density.

    With ``f`` the midpoint rule y_j = h f(x_j) is used; with ``cdf`` the cells
    are exact, y_j = F(x_j + h/2) - F(x_j - h/2).
    """
    if (f is None) == (cdf is None):
        raise ParameterError("give exactly one of f and cdf")
    j_min, j_max = _check_window(window)
    x = np.arange(j_min, j_max + 1) * h
    if f is not None:
        dens = np.asarray(f(x), dtype=float)
        if np.any(dens < 0.0) or not np.all(np.isfinite(dens)):
            raise ParameterError("initial density must be finite and nonnegative")
        values = h * dens
    else:
        edges = np.arange(j_min, j_max + 2) * h - 0.5 * h
        values = np.clip(np.diff(np.asarray(cdf(edges), dtype=float)), 0.0, None)
    state = LatticeState(
        h=h, tau=tau, n=0, j_min=j_min, j_max=j_max, values=values, t0=t0, initial_mass=math.fsum(values)
    )
    logger.debug(f"lattice initialized from density | window=[{j_min}, {j_max}], mass={state.initial_mass:.12g}")
    return state


def stable_initial_state(params: stable.StableParams, h: float, tau: float, window: Window) -> LatticeState:
    """Exact cells of g_alpha(., t0) as initial data at time t0 = params.t."""
    return init_from_density(h, tau, window, cdf=stable.target_cdf(params, size_hint=window[1] - window[0]), t0=params.t)


def evolve(state: LatticeState, kernel: TransitionKernel, steps: int) -> LatticeState:
    """Apply the redistribution scheme ``steps`` times.

    The kernel tail is lumped into p_0. Terms are added as p_k (y_{j-k} + y_{j+k})
    so symmetric data stay bit-for-bit symmetric. Jumps longer than the window
    cannot land inside it, so only |k| < window size is visited; the mass that
    leaves per step is the drop in window mass.
    """
    if steps < 0:
        raise ParameterError(f"steps must be nonnegative, got {steps}")
    if steps == 0:
        return state
    K = kernel.radius
    probs = kernel.lumped_probs
    size = state.values.size
    reach = min(K, size - 1)
    ext = np.zeros(size + 2 * reach)
    ext[reach : reach + size] = state.values
    active = [k for k in range(1, reach + 1) if probs[K + k] != 0.0]
    loss = state.boundary_loss
    mass = math.fsum(state.values)
    for _ in range(steps):
        out = probs[K] * ext[reach : reach + size]
        for k in active:
            out += probs[K + k] * (ext[reach - k : reach - k + size] + ext[reach + k : reach + k + size])
        new_mass = math.fsum(out)
        loss += mass - new_mass
        mass = new_mass
        ext[reach : reach + size] = out
    values = ext[reach : reach + size].copy()
    return replace(state, n=state.n + steps, values=values, boundary_loss=loss)


def lattice_profile(state: LatticeState) -> Tuple[np.ndarray, np.ndarray]:
    """Grid positions x_j and density estimates y_j / h."""
    return state.positions, state.values / state.h


def default_window(
    alpha: float,
    t: float,
    h: float,
    radius: int,
    loss_tol: float = DEFAULTS["window_loss_tol"],
    max_half_width: int = DEFAULTS["max_half_width"],
) -> Window:
    """Symmetric window holding all but ~loss_tol of g_alpha(., t), plus one kernel radius."""
    if alpha == 2.0:
        reach = 2.0 * math.sqrt(t) * float(special.erfcinv(loss_tol))
    else:
        reach = (2.0 * stable.b_coeff(alpha) * t / (alpha * loss_tol)) ** (1.0 / alpha)
    half_width = math.ceil(reach / h) + int(radius)
    if half_width > max_half_width:
        logger.warning(
            f"window half-width {half_width} capped at {max_half_width}; boundary loss may exceed {loss_tol:.1e}"
        )
        half_width = max_half_width
    return symmetric_window(half_width)
