import math

import pytest

from backscatter_game._optimize import golden_section_max, newton_bisect


@pytest.mark.parametrize("peak", [0.0, 0.123, 0.5, 0.999, 1.0])
def test_golden_section_finds_peak(peak):
    x, fx = golden_section_max(lambda t: -(t - peak) ** 2, 0.0, 1.0, 1e-9)
    assert abs(x - peak) < 1e-8
    assert fx == pytest.approx(0.0, abs=1e-16)


def test_golden_section_monotone_goes_to_edge():
    x, _ = golden_section_max(lambda t: t, 0.0, 2.0, 1e-9)
    assert x == pytest.approx(2.0, abs=2e-9)


def test_newton_bisect_root():
    root = newton_bisect(lambda x: math.cos(x) - x, lambda x: -math.sin(x) - 1, 0.0, 1.0)
    assert root == pytest.approx(0.7390851332151607, abs=1e-12)


def test_newton_bisect_survives_flat_derivative():
    # derivative is zero at 0, forcing the bisection fallback on the first step
    root = newton_bisect(lambda x: 0.5 - x**3, lambda x: -3 * x**2, 0.0, 2.0)
    assert root == pytest.approx(0.5 ** (1 / 3), abs=1e-9)


def test_newton_bisect_requires_bracket():
    with pytest.raises(ValueError):
        newton_bisect(lambda x: x + 1, lambda x: 1.0, 0.0, 1.0)
