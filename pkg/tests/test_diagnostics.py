import math

import numpy as np
import pytest

from core import diagnostics, kernels, lattice, montecarlo
from core.errors import ParameterError
from core.montecarlo import SampleSet, WalkConfig
from core.stable import StableParams

KAPPA = (0.5, 1.0, 2.0)
H_SEQ = tuple(1.0 / 2**m for m in range(3, 8))

STRICT_CELLS = (
    [("gl", a) for a in (0.3, 0.5, 1.5, 1.9, 2.0)]
    + [("gw", a) for a in (0.3, 0.5, 1.0, 1.5)]
    + [("binom", a) for a in (0.3, 0.5, 1.0, 2.0)]
)
MONOTONE_CELLS = [("gw", 1.9), ("gw", 2.0), ("binom", 1.5), ("binom", 1.9)]


def _convergence(model, alpha, **kwargs):
    name = "lambda" if model == "gw" else "mu"
    coeff = 0.25 * kernels.admissible_bound(model, alpha, name)
    return diagnostics.cf_convergence(model, alpha, coeff, KAPPA, H_SEQ, 1.0, coeff_name=name, **kwargs)


def test_fit_rate():
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    assert diagnostics.fit_rate(h, 3.0 * h**2) == pytest.approx(2.0, abs=1e-12)
    assert math.isnan(diagnostics.fit_rate(h, [np.nan, np.nan, np.nan, 1e-3]))


def test_kappa_zero_has_no_error():
    report = diagnostics.cf_convergence("gl", 1.5, 0.1, [0.0, 1.0], [0.25, 0.125], 1.0)
    np.testing.assert_array_equal(report.errors[0], [0.0, 0.0])
    assert report.steps.tolist() == [80, 226]
    assert report.truncation_bound.shape == (2,)
    assert report.as_dict()["h_sequence"] == [0.25, 0.125]


def test_cf_convergence_rejects_bad_grids():
    with pytest.raises(ParameterError):
        diagnostics.cf_convergence("gl", 1.5, 0.1, KAPPA, [0.1, 0.2], 1.0)
    with pytest.raises(ParameterError):
        diagnostics.cf_convergence("gl", 1.5, 0.1, [], H_SEQ, 1.0)
    with pytest.raises(ParameterError):
        diagnostics.cf_convergence("gl", 1.5, 0.1, KAPPA, H_SEQ, 1.0, scaling="naive")


def test_too_coarse_h_is_recorded_per_cell():
    report = diagnostics.cf_convergence("gw", 2.0, 0.1, [1.0], [2.0, 0.5], 1.0, coeff_name="lambda")
    assert (0, 0) in report.failures
    assert not report.passed(1.0)
    assert np.isnan(report.errors[0, 0]) and np.isfinite(report.errors[0, 1])


def test_exact_cauchy_characteristic_function_is_exact():
    report = diagnostics.cf_convergence("cg", 1.0, None, KAPPA, H_SEQ, 1.0, variant="exact-cauchy")
    assert report.coeff_name == "b"
    assert np.nanmax(report.errors) < 1e-12


@pytest.mark.slow
@pytest.mark.parametrize("model,alpha", STRICT_CELLS)
def test_cf_converges_below_tolerance(model, alpha):
    report = _convergence(model, alpha)
    assert not report.failures
    assert report.is_decreasing()
    assert report.passed(0.02)


@pytest.mark.slow
@pytest.mark.parametrize("model,alpha", MONOTONE_CELLS)
def test_cf_errors_decrease(model, alpha):
    report = _convergence(model, alpha)
    assert not report.failures
    assert report.is_decreasing()


@pytest.mark.slow
def test_naive_gauss_scaling_misses_the_limit():
    report = _convergence("gw", 2.0, scaling="naive")
    assert "naive" in report.scaling
    assert report.max_errors()[-1] > 0.01


def _sample_set(positions, t=1.0):
    cfg = WalkConfig(model="gl", alpha=2.0, coeff=0.5, h=0.1, t=t, num_samples=len(positions), seed=0)
    return SampleSet(config=cfg, positions=np.asarray(positions, dtype=float), rng_streams={})


def test_ks_statistic_checks_time_and_ignores_order():
    rng = np.random.default_rng(4)
    samples = _sample_set(rng.normal(scale=math.sqrt(2.0), size=2000))
    target = StableParams(2.0, samples.realized_t)
    d = diagnostics.ks_statistic(samples, target)
    assert 0.0 < d < 0.05
    shuffled = _sample_set(samples.positions[::-1])
    assert diagnostics.ks_statistic(shuffled, target) == d
    with pytest.raises(ParameterError):
        diagnostics.ks_statistic(samples, StableParams(2.0, 1.1))


def test_lattice_error_checks_time():
    k = kernels.gl_kernel(2.0, 0.25)
    start = lattice.init_delta(0.1, 0.0025, lattice.symmetric_window(100))
    with pytest.raises(ParameterError):
        diagnostics.lattice_error(start, StableParams(2.0, 1.0))
    state = lattice.evolve(start, k, 400)
    with pytest.raises(ParameterError):
        diagnostics.lattice_error(state, StableParams(2.0, 2.0))
    l1, linf = diagnostics.lattice_error(state, StableParams(2.0, state.t))
    assert 0.0 < l1 < 0.05 and linf > 0.0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_rho_approaches_its_limit(alpha):
    assert diagnostics.rho_integral(alpha, 1e-4) / diagnostics.rho_limit(alpha) == pytest.approx(1.0, abs=0.02)
    assert diagnostics.rho_integral(alpha, 1e-2) < diagnostics.rho_integral(alpha, 1e-3)


def test_rho_special_values():
    assert diagnostics.rho_integral(1.0, 0.0) == pytest.approx(math.pi / 2.0, abs=1e-7)
    assert diagnostics.rho_limit(1.0) == pytest.approx(math.pi / 2.0)
    ratio = diagnostics.rho_integral(2.0, 1e-4) / math.log(1e4)
    assert 0.85 <= ratio <= 1.05
    with pytest.raises(ParameterError):
        diagnostics.rho_integral(2.0, 0.0)
    with pytest.raises(ParameterError):
        diagnostics.rho_integral(1.0, -1.0)
    with pytest.raises(ParameterError):
        diagnostics.rho_limit(2.0)


@pytest.mark.parametrize("beta", [-0.5, 0.0, 0.3, 0.5])
def test_q_integral_closed_form(beta):
    assert diagnostics.q_integral(beta) == pytest.approx(math.pi / (2.0 * math.cos(beta * math.pi / 2.0)), rel=1e-9)


def test_q_integral_domain():
    with pytest.raises(ParameterError):
        diagnostics.q_integral(1.0)


@pytest.mark.parametrize("alpha,nu", [(0.5, 1e-3), (1.0, 1e-3), (1.5, 1e-3), (1.5, 1e-6)])
def test_gw_small_nu_asymptote(alpha, nu):
    assert diagnostics.gw_small_nu_ratio(alpha, nu) == pytest.approx(1.0, abs=0.05)


def test_gw_small_nu_asymptote_at_two_is_logarithmic():
    coarse = diagnostics.gw_small_nu_ratio(2.0, 1e-3)
    fine = diagnostics.gw_small_nu_ratio(2.0, 1e-6)
    assert 1.0 < fine < coarse
    assert fine < 1.2
    with pytest.raises(ParameterError):
        diagnostics.gw_small_nu_ratio(1.5, 1.0)


def test_appendix_report():
    report = diagnostics.appendix_limits_check([0.5, 2.0], [1e-2, 1e-3])
    assert len(report.rows) == 4
    assert [r.nu for r in report.for_alpha(2.0)] == [1e-2, 1e-3]
    assert report.as_table().shape == (4, 5)
    with pytest.raises(ParameterError):
        diagnostics.appendix_limits_check([1.0], [1e-3, 1e-2])


def test_cg_walk_char_fn_enters_the_table():
    report = diagnostics.cf_convergence("cg", 1.5, None, [1.0], [0.25, 0.125], 1.0, variant="shifted-power")
    law = montecarlo.cg_scaling_law(montecarlo.cg_density_spec("shifted-power", 1.5))
    assert report.coeff == pytest.approx(0.75)
    assert report.steps[0] == kernels.time_steps(law, 0.25, 1.0)[0]
    assert np.all(np.isfinite(report.errors))


def test_ks_statistic_degenerate_samples():
    t = _sample_set([0.0]).realized_t
    target = StableParams(2.0, t)
    assert diagnostics.ks_statistic(_sample_set([0.0]), target) == pytest.approx(0.5, abs=1e-15)
    assert diagnostics.ks_statistic(_sample_set(np.zeros(50)), target) == pytest.approx(0.5, abs=1e-15)


def test_gw_small_nu_ratio_does_not_depend_on_lambda():
    bound = kernels.admissible_bound("gw", 1.5, "lambda")
    small = diagnostics.gw_small_nu_ratio(1.5, 1e-3, lam=0.1 * bound)
    large = diagnostics.gw_small_nu_ratio(1.5, 1e-3, lam=bound)
    assert small == pytest.approx(large, rel=1e-9)
    direct = 2.0 * kernels.gw_gamma_integral(1.5, 1e-3) * math.gamma(2.5) * math.sin(0.75 * math.pi) / math.pi
    assert small == pytest.approx(direct / 1e-3**1.5, rel=1e-9)
    with pytest.raises(ParameterError):
        diagnostics.gw_small_nu_ratio(1.5, 1e-3, lam=1.01 * bound)
