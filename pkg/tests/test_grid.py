import math

import numpy as np
import pytest

from core.exceptions import ConfigError, NonFiniteStateError
from core.grid import Field, dealias, deriv, l2_norm, make_grid, mean, sobolev_seminorm


class TestGrid:
    """Тесты сетки и ее проверки"""

    def test_spacing_and_nodes(self, grid):
        """Шаг и узлы x_j = j·dx"""
        assert grid.dx == pytest.approx(2.0 * math.pi / 64)
        assert grid.x[0] == 0.0
        assert grid.x[-1] == pytest.approx(63 * grid.dx)

    @pytest.mark.parametrize('n, message', [
        (63, 'n must be even'),
        (8, 'n must be at least 16'),
    ])
    def test_invalid_n(self, n, message):
        """Нечетное или слишком малое n"""
        with pytest.raises(ConfigError, match=message):
            make_grid(n)

    def test_invalid_length(self):
        """Длина должна быть положительной"""
        with pytest.raises(ConfigError, match='length must be positive'):
            make_grid(32, 0.0)

    def test_nodes_read_only(self, grid):
        with pytest.raises(ValueError):
            grid.x[0] = 1.0


class TestField:
    """Тесты полей на сетке"""

    def test_shape_mismatch(self, grid):
        with pytest.raises(ConfigError):
            Field(grid, np.zeros(grid.n + 2))

    def test_non_finite_rejected(self, grid):
        """NaN в поле не принимается молча"""
        values = np.ones(grid.n)
        values[5] = np.nan
        with pytest.raises(NonFiniteStateError):
            Field(grid, values)

    def test_values_copied(self, grid):
        source = np.ones(grid.n)
        field = Field(grid, source)
        source[0] = 7.0
        assert field.values[0] == 1.0
        assert not field.values.flags.writeable


class TestSpectralCalculus:
    """Тесты спектральных производных и норм"""

    def test_first_derivative(self, grid):
        """∂ₓ sin 3x = 3 cos 3x"""
        f = Field.from_function(grid, lambda x: np.sin(3 * x))
        assert np.max(np.abs(deriv(f, 1).values - 3 * np.cos(3 * grid.x))) < 1e-12

    def test_fourth_derivative(self, grid):
        """∂ₓ⁴ cos 2x = 16 cos 2x"""
        f = Field.from_function(grid, lambda x: np.cos(2 * x))
        assert np.max(np.abs(deriv(f, 4).values - 16 * np.cos(2 * grid.x))) < 1e-10

    def test_nyquist_odd_orders(self, grid):
        """Мода Найквиста обнуляется для нечетных порядков и сохраняется для четных"""
        f = Field.from_function(grid, lambda x: np.cos(grid.n // 2 * x))
        assert np.max(np.abs(deriv(f, 1).values)) < 1e-12
        assert np.max(np.abs(deriv(f, 3).values)) < 1e-9
        expected = -(grid.n // 2) ** 2 * f.values
        assert np.max(np.abs(deriv(f, 2).values - expected)) < 1e-9

    def test_derivative_of_constant(self, grid):
        f = Field.constant(grid, 2.5)
        for order in (1, 2):
            assert np.max(np.abs(deriv(f, order).values)) < 1e-10

    def test_unsupported_order(self, grid):
        f = Field.constant(grid, 1.0)
        with pytest.raises(ValueError):
            deriv(f, 5)

    def test_mean_exact(self, grid):
        """Среднее постоянная + косинус"""
        f = Field.from_function(grid, lambda x: 1.5 + 0.3 * np.cos(x))
        assert mean(f) == pytest.approx(1.5, abs=1e-14)

    def test_seminorm_of_sine(self, grid, helpers):
        """‖∂ₓˢ sin 2x‖ = 2ˢ √π"""
        f = Field.from_function(grid, lambda x: np.sin(2 * x))
        for s in (0, 1, 2):
            helpers.assert_close(sobolev_seminorm(f, s), 2 ** s * math.sqrt(math.pi), 1e-13)

    def test_seminorm_matches_quadrature(self, grid, helpers):
        """Равенство Парсеваля: спектральная норма равна сеточной квадратуре"""
        f = Field.from_function(grid, lambda x: np.exp(np.sin(x)))
        by_grid = math.sqrt(grid.dx * float(f.values @ f.values))
        helpers.assert_close(l2_norm(f), by_grid, 1e-13)

    def test_seminorm_ignores_mean(self, grid):
        f = Field.constant(grid, 3.0)
        assert sobolev_seminorm(f, 1) < 1e-13
        assert l2_norm(f) == pytest.approx(3.0 * math.sqrt(2.0 * math.pi))

    def test_scaled_length(self, helpers):
        """На отрезке длины 4π волновые числа вдвое меньше"""
        grid = make_grid(64, 4.0 * math.pi)
        f = Field.from_function(grid, lambda x: np.sin(x))
        assert np.max(np.abs(deriv(f, 1).values - np.cos(grid.x))) < 1e-12


class TestDealias:
    """Тесты фильтра 2/3"""

    def test_filter_cuts_upper_third(self):
        grid = make_grid(48, dealias=True)
        low = Field.from_function(grid, lambda x: np.cos(10 * x))
        high = Field.from_function(grid, lambda x: np.cos(20 * x))
        assert np.max(np.abs(dealias(low).values - low.values)) < 1e-13
        assert np.max(np.abs(dealias(high).values)) < 1e-13

    def test_filter_disabled(self, grid):
        f = Field.from_function(grid, lambda x: np.cos(30 * x))
        assert np.array_equal(dealias(f).values, f.values)
