from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.config import (
    KNOWN_KEYS,
    ExperimentConfig,
    format_experiment_config,
    get_db_url,
    get_out_dir,
    get_threads,
    load_experiment_config,
    parse_experiment_config,
)
from app.errors import ConfigError
from app.validators import parse_bool, parse_coefficients, parse_time

BASIC = """
# квадратичный поток
name = burgers
N = 32
F = 0, 0, 1
T = 0.25t
dt = 1/4096t
seed = 7
ensemble = 3
"""


class TestValidators:
    def test_time_needs_suffix(self):
        assert parse_time("1/1024t", min_value=0.0, max_value=1.0, error_message="x") == pytest.approx(1 / 1024)
        with pytest.raises(ValueError):
            parse_time("0.25", min_value=0.0, max_value=1.0, error_message="x")

    def test_coefficients(self):
        assert parse_coefficients("[0, -3; 0 1]", error_message="x") == [0.0, -3.0, 0.0, 1.0]
        with pytest.raises(ValueError):
            parse_coefficients(" ", error_message="x")
        with pytest.raises(ValueError):
            parse_coefficients("0, a", error_message="x")

    def test_bool(self):
        assert parse_bool("Yes", error_message="x") is True
        assert parse_bool("off", error_message="x") is False
        with pytest.raises(ValueError):
            parse_bool("maybe", error_message="x")


class TestExperimentConfig:
    def test_parse_basic(self):
        cfg = parse_experiment_config(BASIC)
        assert cfg.name == "burgers"
        assert cfg.N == 32
        assert cfg.F == (0.0, 0.0, 1.0)
        assert cfg.T == pytest.approx(0.25)
        assert cfg.dt == pytest.approx(1 / 4096)
        assert cfg.seed == 7
        assert cfg.ensemble == 3
        assert cfg.record_drift is True

    def test_auto_dt(self):
        cfg = parse_experiment_config("N = 4\nF = 0,0,1\nT = 1t\ndt = auto\n")
        assert cfg.dt is None
        assert cfg.name == "experiment"

    def test_all_problems_reported_at_once(self):
        with pytest.raises(ConfigError) as exc:
            parse_experiment_config("N = 0\nT = 1\nfoo = 1\nbroken line\n")
        problems = exc.value.problems
        assert exc.value.code == "invalid_config"
        assert any("foo" in p for p in problems)
        assert any("'F'" in p for p in problems)
        assert any(p.startswith("N:") for p in problems)
        assert any(p.startswith("T:") for p in problems)
        assert any("строка 4" in p for p in problems)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_experiment_config(BASIC + "N = 16\n")
        assert any("повторяется" in p for p in exc.value.problems)

    def test_seed_range(self):
        text = "N = 4\nF = 0,0,1\nT = 1t\nseed = 18446744073709551615\n"
        assert parse_experiment_config(text).seed == 2**64 - 1
        with pytest.raises(ConfigError):
            parse_experiment_config(text.replace("615", "616"))

    def test_load_uses_file_stem(self, tmp_path):
        path = tmp_path / "ou_check.cfg"
        path.write_text("N = 4\nF = 0\nT = 0.5t\n", encoding="utf-8")
        assert load_experiment_config(path).name == "ou_check"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "nope.cfg")

    def test_format_round_trip(self):
        cfg = parse_experiment_config(BASIC + "galilean = true\nlag = 0.125t\nM = 8\nell = -2\n")
        assert parse_experiment_config(format_experiment_config(cfg)) == cfg

    def test_echo_lists_exactly_the_known_keys(self):
        echo = parse_experiment_config(BASIC).echo()
        assert set(echo) == KNOWN_KEYS
        assert echo["F"] == [0.0, 0.0, 1.0]


@settings(max_examples=40, deadline=None)
@given(
    N=st.integers(1, 1024),
    T=st.floats(1e-6, 1e3, allow_nan=False),
    F=st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=6),
    seed=st.integers(0, 2**64 - 1),
    galilean=st.booleans(),
)
def test_format_parse_round_trip(N, T, F, seed, galilean):
    cfg = ExperimentConfig(name="prop", N=N, F=tuple(F), T=T, seed=seed, galilean=galilean)
    assert parse_experiment_config(format_experiment_config(cfg)) == cfg


class TestEnvironment:
    def test_threads(self, monkeypatch):
        assert get_threads(3) == 3
        assert get_threads(0) == 1
        monkeypatch.setenv("WASB_THREADS", "4")
        assert get_threads() == 4
        monkeypatch.setenv("WASB_THREADS", "many")
        assert get_threads() == 1

    def test_out_dir(self, monkeypatch):
        assert get_out_dir() == Path("out")
        monkeypatch.setenv("WASB_OUT_DIR", "/tmp/wasb")
        assert get_out_dir() == Path("/tmp/wasb")
        assert get_out_dir("runs") == Path("runs")

    def test_db_url(self, monkeypatch, tmp_path):
        assert str(get_db_url(tmp_path)).endswith("runs.db")
        monkeypatch.setenv("WASB_DB_URL", "sqlite://")
        assert get_db_url(tmp_path) == "sqlite://"
