import json
import math

import numpy as np
import pytest

from core import io_utils, pipeline
from core.errors import ParameterError, SingularAlphaError, ToleranceError


def _manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


def test_run_kernel_writes_table_and_manifest(out_dir):
    result = pipeline.run_kernel("gl", 2.0, mu=0.25, output_dir=str(out_dir))
    lines = (out_dir / "kernel.csv").read_text().splitlines()
    assert lines == ["k,p_k", "-1,0.25", "0,0.5", "1,0.25"]
    meta = json.loads((out_dir / "kernel.json").read_text())
    assert meta["model"] == "gl" and meta["scaling"]["form"] == "power"
    assert meta["sum_check"] == pytest.approx(1.0, abs=1e-15)
    manifest = _manifest(out_dir)
    assert manifest["command"] == "kernel"
    assert manifest["output_paths"] == ["kernel.csv", "kernel.json"]
    assert manifest["tool_version"] == "0.1.0"
    assert result.kernel.radius == 1


def test_invalid_kernel_writes_nothing(out_dir):
    with pytest.raises(SingularAlphaError):
        pipeline.run_kernel("gl", 1.0, mu=0.1, output_dir=str(out_dir))
    with pytest.raises(ParameterError):
        pipeline.run_kernel("gw", 0.8, lam=0.9, output_dir=str(out_dir))
    assert not out_dir.exists()


def test_run_evolve_against_gauss(out_dir):
    result = pipeline.run_evolve("gl", 2.0, 0.25, 0.1, t=1.0, compare=True, output_dir=str(out_dir))
    assert result.state.n == 400
    assert result.l1 < 0.01
    header = (out_dir / "lattice.csv").read_text().splitlines()[0]
    assert header == "j,x,y,density"
    summary = json.loads((out_dir / "evolve.json").read_text())
    assert summary["realized_t"] == pytest.approx(1.0)
    assert _manifest(out_dir)["realized_tn"] == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        pipeline.run_evolve("gl", 2.0, 0.25, 0.1, t=1.0, steps=10, output_dir=str(out_dir))
    with pytest.raises(ParameterError):
        pipeline.run_evolve("gl", 2.0, 0.25, 0.1, steps=10, start="stable", output_dir=str(out_dir))


def test_run_evolve_from_stable_profile(out_dir):
    result = pipeline.run_evolve(
        "binom", 1.5, 0.3, 0.1, steps=20, start="stable", t0=0.5, half_width=400, output_dir=str(out_dir)
    )
    assert result.state.t0 == 0.5
    assert result.state.t > 0.5
    assert result.state.initial_mass == pytest.approx(1.0, abs=1e-3)


def test_run_sample_is_reproducible(tmp_path):
    kwargs = dict(model="binom", alpha=1.5, coeff=0.3, h=0.2, t=1.0, num_samples=5000, seed=42)
    first = pipeline.run_sample(**kwargs, workers=1, output_dir=str(tmp_path / "a"))
    second = pipeline.run_sample(**kwargs, workers=4, output_dir=str(tmp_path / "b"))
    for name in ("samples.csv", "sample.json", "statistics.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    np.testing.assert_array_equal(first.samples.positions, second.samples.positions)
    manifest = _manifest(tmp_path / "a")
    assert manifest["seed"] == 42
    assert manifest["realized_tn"] == pytest.approx(first.samples.realized_t)
    assert first.statistics["count"] == 5000


def test_run_sample_binary_and_ks(out_dir):
    result = pipeline.run_sample(
        "cg", 1.0, None, 0.05, 1.0, 4000, 3, variant="exact-cauchy", ks=True, binary=True, output_dir=str(out_dir)
    )
    raw = np.fromfile(out_dir / "samples.f64", dtype="<f8")
    np.testing.assert_array_equal(raw, result.samples.positions)
    assert 0.0 < result.ks < 0.05
    meta = json.loads((out_dir / "sample.json").read_text())
    assert meta["config"]["variant"] == "exact-cauchy"
    assert meta["rng_streams"]["generator"] == "numpy.random.PCG64"


def test_run_density_cauchy_peak(out_dir):
    result = pipeline.run_density(1.0, 1.0, [0.0, 1.0], output_dir=str(out_dir))
    assert result.density[0] == pytest.approx(1.0 / math.pi, rel=1e-12)
    assert result.cdf[0] == 0.5
    assert result.cdf[1] == pytest.approx(0.75)
    assert (out_dir / "density.csv").read_text().startswith("x,density,cdf\n")
    with pytest.raises(ParameterError):
        pipeline.run_density(1.0, 1.0, [], output_dir=str(out_dir / "empty"))


def test_run_converge_strict_failure_keeps_artifacts(out_dir):
    kwargs = dict(kappa_grid=[1.0], h_sequence=[0.25, 0.125], t=1.0, output_dir=str(out_dir))
    loose = pipeline.run_converge("gl", 1.5, 0.1, tol=1e-12, **kwargs)
    assert not loose.passed
    with pytest.raises(ToleranceError):
        pipeline.run_converge("gl", 1.5, 0.1, tol=1e-12, strict=True, **kwargs)
    assert (out_dir / "converge_errors.csv").read_text().startswith("kappa,h=0.25,h=0.125\n")
    meta = json.loads((out_dir / "converge.json").read_text())
    assert meta["passed"] is False
    with pytest.raises(ParameterError):
        pipeline.run_converge("gl", 1.5, 0.1, tol=0.0, **kwargs)


def test_run_appendix(out_dir):
    result = pipeline.run_appendix([1.0], [1e-2, 1e-3], beta_grid=(0.0, 0.5), output_dir=str(out_dir))
    assert len(result.report.rows) == 2
    assert all(c["abs_error"] < 1e-9 for c in result.q_checks)
    table = np.loadtxt(out_dir / "appendix.csv", delimiter=",", skiprows=1)
    assert table.shape == (2, 5)


def test_save_csv_keeps_full_precision(out_dir):
    values = np.array([[1.0 / 3.0, -2.5e-300], [math.pi, 7.0]])
    path = io_utils.save_csv(values, "a,b", out_dir / "table.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    np.testing.assert_array_equal(np.loadtxt(path, delimiter=",", skiprows=1), values)
    assert io_utils.save_csv(np.arange(3), "j", out_dir / "ints.csv").read_text() == "j\n0\n1\n2\n"
    assert sorted(p.name for p in out_dir.iterdir()) == ["ints.csv", "table.csv"]


def test_run_converge_without_tol_checks_monotonicity(out_dir):
    result = pipeline.run_converge("gl", 1.5, 0.1, [1.0], [0.25, 0.125], 1.0, output_dir=str(out_dir))
    assert result.passed
    assert json.loads((out_dir / "converge.json").read_text())["tol"] is None
