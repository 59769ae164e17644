# tests/conftest.py
import numpy as np
import pytest

from app.core.config import settings
from app.services import conductivities
from app.services.grid import build_grid, define_regions
from app.services.kernel import build_weights, make_params


@pytest.fixture(autouse=True)
def lab_settings(monkeypatch):
    """Без кэша весов и с однопоточной сборкой; тесты кэша включают его сами."""
    monkeypatch.setattr(settings, "WEIGHTS_CACHE_DIR", "")
    monkeypatch.setattr(settings, "DETERMINISTIC", False)
    monkeypatch.setattr(settings, "THREADS", 1)
    return settings


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spec_1d():
    return build_grid(1, 1.0, 32)


@pytest.fixture
def layout_1d(spec_1d):
    return define_regions(spec_1d, (-0.5, 0.5), (0.6, 0.9), (-0.9, -0.6))


@pytest.fixture
def weights_1d(spec_1d):
    return build_weights(spec_1d, make_params(spec_1d, 0.4))


@pytest.fixture
def spec_2d():
    return build_grid(2, 1.0, 12)


@pytest.fixture
def layout_2d(spec_2d):
    return define_regions(
        spec_2d,
        (-0.5, 0.5, -0.5, 0.5),
        (0.6, 0.95, -0.5, 0.5),
        (-0.95, -0.6, -0.5, 0.5),
    )


@pytest.fixture
def weights_2d(spec_2d):
    return build_weights(spec_2d, make_params(spec_2d, 0.6))


@pytest.fixture
def random_cond_1d(spec_1d, rng):
    return conductivities.random_field(spec_1d, rng, 0.5, 2.0)


@pytest.fixture
def random_cond_2d(spec_2d, rng):
    return conductivities.random_field(spec_2d, rng, 0.5, 2.0)
