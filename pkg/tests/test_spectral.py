"""
Tests for the spectral helpers
"""
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core import spectral
from core.errors import GridSizeError


def grid(n, period):
    return np.arange(n) * (period / n)


@pytest.mark.parametrize("period", [1.0, 2.0, 2.5])
def test_derivative_of_sine(period):
    """First and second derivatives of a single mode"""
    x = grid(32, period)
    kappa = 2.0 * np.pi * 3 / period
    values = np.sin(kappa * x)
    assert np.allclose(spectral.derivative(values, period, 1), kappa * np.cos(kappa * x),
                       atol=1e-10 * kappa)
    assert np.allclose(spectral.derivative(values, period, 2), -kappa ** 2 * values,
                       atol=1e-10 * kappa ** 2)


def test_derivative_order_zero_copies():
    values = np.random.default_rng(1).normal(size=16)
    result = spectral.derivative(values, 1.0, 0)
    assert np.array_equal(result, values)
    result[0] = 99.0
    assert values[0] != 99.0


def test_odd_derivative_drops_nyquist():
    """The Nyquist mode (-1)^j has no real odd derivative"""
    values = (-1.0) ** np.arange(16)
    assert np.max(np.abs(spectral.derivative(values, 1.0, 1))) < 1e-12
    assert np.max(np.abs(spectral.derivative(values, 1.0, 3))) < 1e-9


def test_antiderivative_inverts_derivative():
    x = grid(64, 1.0)
    values = np.cos(2.0 * np.pi * x) + 0.5 * np.sin(6.0 * np.pi * x)
    primitive = spectral.antiderivative(values, 1.0)
    assert abs(np.mean(primitive)) < 1e-14
    assert np.allclose(spectral.derivative(primitive, 1.0, 1), values, atol=1e-12)


def test_antiderivative_discards_mean():
    x = grid(32, 1.0)
    primitive = spectral.antiderivative(3.0 + np.cos(2.0 * np.pi * x), 1.0)
    assert np.allclose(primitive, np.sin(2.0 * np.pi * x) / (2.0 * np.pi), atol=1e-13)


def test_interpolate_band_limited():
    """The interpolant reproduces samples and the band-limited function off-grid"""
    period = 2.0
    x = grid(32, period)

    def f(y):
        return 1.0 + np.sin(np.pi * y) - 0.3 * np.cos(3.0 * np.pi * y)

    values = f(x)
    assert np.allclose(spectral.interpolate(values, period, x), values, atol=1e-13)
    points = np.array([-3.7, 0.123, 1.999, 5.5])
    assert np.allclose(spectral.interpolate(values, period, points), f(points), atol=1e-12)
    derivative = np.pi * np.cos(np.pi * points) + 0.9 * np.pi * np.sin(3.0 * np.pi * points)
    assert np.allclose(spectral.interpolate(values, period, points, 1), derivative, atol=1e-11)


def test_interpolate_keeps_shape():
    values = np.sin(2.0 * np.pi * grid(16, 1.0))
    points = np.linspace(0.0, 1.0, 6).reshape(2, 3)
    assert spectral.interpolate(values, 1.0, points).shape == (2, 3)


def test_interpolate_odd_derivative_drops_nyquist():
    rng = np.random.default_rng(4)
    values = rng.normal(size=16)
    x = grid(16, 1.0)
    for order in (1, 2, 3):
        assert np.allclose(spectral.interpolate(values, 1.0, x, order),
                           spectral.derivative(values, 1.0, order),
                           atol=1e-9 * np.max(np.abs(spectral.derivative(values, 1.0, order))))
    nyquist = (-1.0) ** np.arange(16)
    points = np.array([0.01, 0.37, 0.5 / 16, 0.9])
    assert np.max(np.abs(spectral.interpolate(nyquist, 1.0, points, 1))) < 1e-12
    assert np.allclose(spectral.interpolate(nyquist, 1.0, points), np.cos(16.0 * np.pi * points),
                       atol=1e-12)


@pytest.mark.parametrize("n,valid", [(16, True), (64, True), (1024, True),
                                     (8, False), (48, False), (0, False), (-16, False)])
def test_require_power_of_two(n, valid):
    if valid:
        assert spectral.require_power_of_two(n) == n
    else:
        with pytest.raises(GridSizeError, match="grid size"):
            spectral.require_power_of_two(n)


def test_is_power_of_two_rejects_floats():
    assert spectral.is_power_of_two(32)
    assert not spectral.is_power_of_two(32.0)


def test_denoise_removes_round_off_tail():
    x = grid(64, 1.0)
    clean = np.sin(2.0 * np.pi * x)
    noisy = clean + 1e-16 * np.cos(2.0 * np.pi * 20 * x)
    assert np.allclose(spectral.denoise(noisy), clean, atol=1e-15)
    kept = clean + 1e-3 * np.cos(2.0 * np.pi * 20 * x)
    assert np.allclose(spectral.denoise(kept), kept, atol=1e-14)
