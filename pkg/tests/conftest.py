import os

import numpy as np
import pytest

# .env разработчика не должен влиять на тесты
os.environ.setdefault("PYTHON_DOTENV_DISABLED", "1")

from app.services.gaussian_field import NoiseSeed  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return NoiseSeed(20240611, 0).generator()


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    for key in ("WASB_THREADS", "WASB_OUT_DIR", "WASB_DB_URL", "WASB_ENV"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)
