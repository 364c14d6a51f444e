import pytest

from app.errors import AnalysisError
from app.services.suites import SUITES, run_suite, stationarity_suite


@pytest.mark.parametrize("name", ["poisson", "chaos", "kernel", "antisym"])
def test_fast_suites_pass(name):
    result = run_suite(name, grid="small", seed=0)
    assert result.reports
    failed = [r.name for r in result.reports if not r.passed]
    assert failed == []


def test_unknown_names():
    with pytest.raises(AnalysisError) as exc:
        run_suite("nope")
    assert exc.value.code == "unknown_suite"
    with pytest.raises(AnalysisError) as exc:
        run_suite("kernel", grid="huge")
    assert exc.value.code == "unknown_grid"


def test_registered_suites():
    assert set(SUITES) == {
        "poisson", "antisym", "chaos", "kernel", "stationarity",
        "qv", "bg-scaling", "burgers", "ito", "time-average",
    }


@pytest.mark.slow
@pytest.mark.parametrize("name", ["stationarity", "qv"])
def test_statistical_suites_pass(name):
    result = run_suite(name, grid="small", seed=0, threads=2)
    assert [r.name for r in result.reports if not r.passed] == []


@pytest.mark.slow
def test_halved_noise_fails_stationarity():
    result = stationarity_suite("small", 0, 2, noise_variance_factor=0.5)
    assert not result.passed
    failed = {r.name for r in result.reports if not r.passed}
    assert "ou_stationarity_second" in failed


@pytest.mark.slow
def test_bg_scaling_suite_passes_on_small_grid():
    result = run_suite("bg-scaling", grid="small", seed=0, threads=2)
    names = {f.name for f in result.fits}
    assert names == {"bg_A_lag_exponent", "bg_B_M_exponent"}
    assert [r.name for r in result.reports if not r.passed] == []
