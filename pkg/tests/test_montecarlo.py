import math

import numpy as np
import pytest
from scipy import integrate

from core import diagnostics, kernels, montecarlo
from core.errors import ParameterError
from core.montecarlo import CGVariant, WalkConfig
from core.stable import StableParams


@pytest.mark.parametrize("variant,alpha", [("power-ratio", 0.7), ("shifted-power", 1.5), ("exact-cauchy", 1.0)])
def test_inverse_cdf_solves_cdf(variant, alpha):
    spec = montecarlo.cg_density_spec(variant, alpha)
    x = np.array([-40.0, -1.3, -0.2, 0.05, 0.9, 7.0])
    np.testing.assert_allclose(montecarlo.cg_inverse_cdf(spec, montecarlo.cg_cdf(spec, x)), x, rtol=1e-9)
    assert montecarlo.cg_inverse_cdf(spec, 0.5) == 0.0
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(ParameterError):
            montecarlo.cg_inverse_cdf(spec, bad)


def test_density_spec_constants_and_tail():
    spec = montecarlo.cg_density_spec("shifted-power", 0.5)
    assert (spec.b, spec.gamma, spec.k_bound) == (0.25, 1.0, 0.25)
    assert spec.e_bound == pytest.approx(0.375)
    for x in (10.0, 1e3, 1e6):
        eps = montecarlo.cg_density(spec, x) * x**1.5 - spec.b
        assert abs(eps) <= spec.k_bound
        assert abs(eps) <= spec.e_bound * x**-spec.gamma
    ratio = montecarlo.cg_density_spec("power-ratio", 1.2)
    assert ratio.b == pytest.approx(0.6) and ratio.gamma == pytest.approx(1.2)
    with pytest.raises(ParameterError):
        montecarlo.cg_density_spec("exact-cauchy", 1.5)
    with pytest.raises(ParameterError):
        montecarlo.cg_density_spec("shifted-power", 2.0)


def test_cdf_is_a_distribution():
    spec = montecarlo.cg_density_spec("power-ratio", 0.8)
    assert montecarlo.cg_cdf(spec, 0.0) == 0.5
    assert montecarlo.cg_cdf(spec, 1e12) == pytest.approx(1.0, abs=1e-9)
    x = np.linspace(-5.0, 5.0, 101)
    assert np.all(np.diff(montecarlo.cg_cdf(spec, x)) > 0.0)


def test_jump_char_fn():
    cauchy = montecarlo.cg_density_spec("exact-cauchy", 1.0)
    assert montecarlo.cg_char_fn(cauchy, 0.7) == pytest.approx(math.exp(-0.7), rel=1e-15)
    spec = montecarlo.cg_density_spec("shifted-power", 0.5)
    assert montecarlo.cg_char_fn(spec, 0.0) == 1.0
    vals = montecarlo.cg_char_fn(spec, np.array([-0.3, 0.3]))
    assert vals[0] == pytest.approx(vals[1], abs=1e-12)
    # small-nu behaviour 1 - w(nu) ~ mu |nu|^alpha
    nu = 1e-3
    mu = montecarlo.cg_scaling_law(spec).coeff
    assert (1.0 - montecarlo.cg_char_fn(spec, nu)) / (mu * nu**0.5) == pytest.approx(1.0, abs=0.1)


def test_cg_scaling_law():
    spec = montecarlo.cg_density_spec("exact-cauchy", 1.0)
    assert montecarlo.cg_scaling_law(spec).coeff == pytest.approx(1.0, rel=1e-15)


def test_sample_step_discrete_inversion():
    k = kernels.gl_kernel(2.0, 0.25)
    u = np.array([0.0, 0.49, 0.5, 0.74, 0.75, 0.999999])
    np.testing.assert_array_equal(montecarlo.sample_step_discrete(k, u), [0, 0, 1, 1, -1, -1])
    assert montecarlo.sample_step_discrete(k, 0.1) == 0
    with pytest.raises(ParameterError):
        montecarlo.sample_step_discrete(k, 1.0)


def test_sample_cauchy_exact():
    assert montecarlo.sample_cauchy_exact(0.5) == 0.0
    assert montecarlo.sample_cauchy_exact(0.75) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        montecarlo.sample_cauchy_exact(0.0)


def test_open_uniform_stays_inside():
    u = montecarlo.open_uniform(montecarlo.block_generator(3, 0), 100_000)
    assert u.min() > 0.0 and u.max() < 1.0


def test_walk_config_derives_steps():
    cfg = WalkConfig(model="gl", alpha=2.0, coeff=0.5, h=0.1, t=1.0, num_samples=10, seed=1)
    assert cfg.n == 200
    assert cfg.tau == pytest.approx(0.005)
    cg = WalkConfig(model="cg", alpha=1.0, coeff=None, h=0.05, t=1.0, num_samples=10, seed=1, variant="exact-cauchy")
    assert cg.variant is CGVariant.EXACT_CAUCHY
    assert cg.coeff_name == "b" and cg.n == 20
    with pytest.raises(ParameterError):
        WalkConfig(model="gl", alpha=2.0, coeff=0.5, h=0.1, t=1.0, num_samples=0, seed=1)
    with pytest.raises(ParameterError):
        WalkConfig(model="gl", alpha=2.0, coeff=0.5, h=0.1, t=1.0, num_samples=10, seed=-1)
    with pytest.raises(ParameterError):
        WalkConfig(model="binom", alpha=1.5, coeff=None, h=0.1, t=1.0, num_samples=10, seed=1)


def test_run_walks_is_deterministic_across_workers():
    cfg = WalkConfig(model="gw", alpha=1.5, coeff=0.2, coeff_name="lambda", h=0.1, t=0.5, num_samples=9000, seed=11)
    one = montecarlo.run_walks(cfg, workers=1)
    four = montecarlo.run_walks(cfg, workers=4)
    np.testing.assert_array_equal(one.positions, four.positions)
    assert one.positions.size == 9000
    assert one.rng_streams["spawn_keys"] == [[0], [1], [2]]
    other = montecarlo.run_walks(WalkConfig(model="gw", alpha=1.5, coeff=0.2, coeff_name="lambda", h=0.1, t=0.5,
                                            num_samples=9000, seed=12))
    assert not np.array_equal(one.positions, other.positions)


def test_lattice_walk_positions_are_on_the_grid():
    cfg = WalkConfig(model="binom", alpha=1.5, coeff=0.3, h=0.25, t=1.0, num_samples=500, seed=5)
    pos = montecarlo.run_walks(cfg).positions
    np.testing.assert_allclose(pos / 0.25, np.round(pos / 0.25), atol=1e-9)


@pytest.mark.slow
def test_gauss_walk_variance():
    cfg = WalkConfig(model="gl", alpha=2.0, coeff=0.5, h=0.1, t=1.0, num_samples=100_000, seed=2024)
    samples = montecarlo.run_walks(cfg)
    var = np.var(samples.positions, ddof=1)
    assert 2.0 * samples.realized_t * 0.95 <= var <= 2.0 * samples.realized_t * 1.05


@pytest.mark.slow
def test_exact_cauchy_ks():
    n_samples = 100_000
    passes = 0
    for seed in (1, 2, 3):
        cfg = WalkConfig(model="cg", alpha=1.0, coeff=None, h=0.05, t=1.0, num_samples=n_samples, seed=seed,
                         variant="exact-cauchy")
        samples = montecarlo.run_walks(cfg)
        d = diagnostics.ks_statistic(samples, StableParams(1.0, samples.realized_t))
        passes += d <= 1.95 / math.sqrt(n_samples)
    assert passes >= 2


@pytest.mark.slow
@pytest.mark.parametrize("alpha,h", [(0.5, 1e-4), (1.0, 0.02)])
def test_shifted_power_ks(alpha, h):
    cfg = WalkConfig(model="cg", alpha=alpha, coeff=None, h=h, t=1.0, num_samples=100_000, seed=7,
                     variant="shifted-power")
    samples = montecarlo.run_walks(cfg)
    d = diagnostics.ks_statistic(samples, StableParams(alpha, samples.realized_t))
    assert d < 0.01


@pytest.mark.slow
def test_shifted_power_ks_improves_with_refinement():
    def distance(h):
        cfg = WalkConfig(model="cg", alpha=1.5, coeff=None, h=h, t=1.0, num_samples=20_000, seed=8,
                         variant="shifted-power")
        samples = montecarlo.run_walks(cfg)
        return diagnostics.ks_statistic(samples, StableParams(1.5, samples.realized_t))

    assert distance(0.0025) < distance(0.04)


CG_DENSITIES = [("power-ratio", 0.7), ("power-ratio", 1.5), ("shifted-power", 0.5), ("shifted-power", 1.5)]


@pytest.mark.parametrize("variant,alpha", CG_DENSITIES)
def test_cg_density_is_normalized(variant, alpha):
    spec = montecarlo.cg_density_spec(variant, alpha)
    half = sum(
        integrate.quad(lambda x: montecarlo.cg_density(spec, x), a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        for a, b in ((0.0, 1.0), (1.0, np.inf))
    )
    assert 2.0 * half == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("variant,alpha", CG_DENSITIES)
def test_cg_density_is_cdf_derivative(variant, alpha):
    spec = montecarlo.cg_density_spec(variant, alpha)
    x = np.concatenate((-np.linspace(0.05, 10.0, 100), np.linspace(0.05, 10.0, 100)))
    step = 1e-5
    slope = (montecarlo.cg_cdf(spec, x + step) - montecarlo.cg_cdf(spec, x - step)) / (2.0 * step)
    np.testing.assert_allclose(slope, montecarlo.cg_density(spec, x), atol=1e-6)


@pytest.mark.parametrize("variant,alpha", CG_DENSITIES)
def test_cg_density_tail_condition(variant, alpha):
    spec = montecarlo.cg_density_spec(variant, alpha)
    x = np.geomspace(1.0, 1e4, 400)
    eps = np.abs(montecarlo.cg_density(spec, x) * x ** (alpha + 1.0) - spec.b)
    assert np.all(eps <= spec.k_bound)
    assert np.all(eps <= spec.e_bound * x**-spec.gamma)


@pytest.mark.parametrize("variant,alpha", [("power-ratio", 0.7), ("shifted-power", 1.5), ("exact-cauchy", 1.0)])
def test_cdf_undoes_inverse_cdf(variant, alpha):
    spec = montecarlo.cg_density_spec(variant, alpha)
    y = np.concatenate(([1e-9, 1e-6], np.linspace(0.001, 0.999, 999), [1.0 - 1e-6]))
    np.testing.assert_allclose(montecarlo.cg_cdf(spec, montecarlo.cg_inverse_cdf(spec, y)), y, rtol=0.0, atol=1e-12)


def test_discrete_steps_follow_the_kernel():
    k = kernels.gl_kernel(1.5, 0.3, radius=20)
    n_draws = 10**6
    steps = montecarlo.sample_step_discrete(k, np.random.default_rng(17).random(n_draws))
    probs = k.lumped_probs
    for offset in range(-3, 4):
        p = probs[k.radius + offset]
        freq = np.count_nonzero(steps == offset) / n_draws
        assert abs(freq - p) <= 5.0 * math.sqrt(p * (1.0 - p) / n_draws)
    assert np.abs(steps).max() <= 20


@pytest.mark.parametrize(
    "model,alpha,coeff,coeff_name,variant,h",
    [
        ("gl", 1.5, 0.3, "mu", None, 0.1),
        ("gw", 1.5, 0.2, "lambda", None, 0.1),
        ("binom", 1.5, 0.3, "mu", None, 0.25),
        ("cg", 1.5, None, "mu", "shifted-power", 0.1),
        ("cg", 1.0, None, "mu", "exact-cauchy", 0.05),
    ],
)
def test_walk_positions_are_centred(model, alpha, coeff, coeff_name, variant, h):
    cfg = WalkConfig(model=model, alpha=alpha, coeff=coeff, coeff_name=coeff_name, h=h, t=1.0,
                     num_samples=20_000, seed=31, variant=variant)
    pos = montecarlo.run_walks(cfg).positions
    assert abs(pos.mean()) <= 5.0 * pos.std() / math.sqrt(pos.size)
