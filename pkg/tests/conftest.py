import logging

import numpy as np
import pytest

from core.grid import Field
from core.models import State
from tests.factories import GridFactory, ParamsFactory, StepControlFactory, make_state


# Фикстуры
@pytest.fixture
def grid():
    """Сетка из 64 узлов на [0, 2π)"""
    return GridFactory()


@pytest.fixture
def params():
    """gamma = 1.5, B₀ = 1"""
    return ParamsFactory()


@pytest.fixture
def control():
    return StepControlFactory()


@pytest.fixture
def constant_state(grid):
    """Постоянное состояние rho = 1, B = 0"""
    return State(Field.constant(grid, 1.0), Field.constant(grid, 0.0))


@pytest.fixture
def perturbed_state(grid):
    return make_state(grid)


@pytest.fixture
def bbar_state(grid):
    """Малое возмущение около (1, 0.5)"""
    return make_state(grid, b_mean=0.5)


@pytest.fixture(autouse=True)
def setup_logging():
    """Настройка логирования для тестов"""
    logging.getLogger('django').setLevel(logging.ERROR)
    logging.getLogger('core').setLevel(logging.ERROR)
    logging.getLogger('runs').setLevel(logging.ERROR)
    logging.getLogger('audit').setLevel(logging.ERROR)


@pytest.fixture(autouse=True)
def output_dir(settings, tmp_path):
    """Результаты команд пишутся во временный каталог"""
    settings.MRELAX_OUTPUT_DIR = tmp_path / 'output'
    settings.MRELAX_WORKERS = 1
    return settings.MRELAX_OUTPUT_DIR


# Хелперы для тестов
class TestHelpers:
    @staticmethod
    def rel_error(actual, expected):
        expected = np.asarray(expected, dtype=float)
        scale = np.maximum(np.abs(expected), np.finfo(float).tiny)
        return float(np.max(np.abs(np.asarray(actual, dtype=float) - expected) / scale))

    @staticmethod
    def assert_close(actual, expected, rtol):
        error = TestHelpers.rel_error(actual, expected)
        assert error <= rtol, f"relative error {error:.3e} exceeds {rtol:.1e}"

    @staticmethod
    def assert_non_decreasing(values, rtol=0.0):
        for prev, cur in zip(values[:-1], values[1:]):
            assert cur >= prev - rtol * abs(prev), f"{cur!r} after {prev!r}"


# Регистрируем хелперы
@pytest.fixture
def helpers():
    return TestHelpers
