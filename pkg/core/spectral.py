"""
Spectral helpers for periodic samples on uniform grids

Derivatives, antiderivatives and off-grid trigonometric interpolation of
real samples f(x_j), x_j = j*period/n. All transforms go through scipy.fft.
"""
import logging
from typing import Union

import numpy as np
from scipy import fft as sp_fft

from core.errors import GridSizeError

LOGGER = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, list, float]


def is_power_of_two(n: int) -> bool:
    """Check whether n is a positive power of two"""
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


def require_power_of_two(n: int, minimum: int = 16, name: str = "M") -> int:
    """
    Validate a grid size

    Args:
        n: Grid size to check
        minimum: Smallest admissible size
        name: Name used in the error message

    Returns:
        n as a plain int
    """
    if not is_power_of_two(n) or n < minimum:
        raise GridSizeError(
            f"grid size: {name}={n} must be a power of two >= {minimum}", name=name, value=n)
    return int(n)


def angular_wavenumbers(n: int, period: float) -> np.ndarray:
    """Non-negative angular wavenumbers matching scipy.fft.rfft output"""
    return 2.0 * np.pi * np.arange(n // 2 + 1) / period


def derivative(values: np.ndarray, period: float, order: int = 1) -> np.ndarray:
    """
    Spectral derivative of periodic samples

    Odd orders drop the Nyquist mode so that the result stays real.

    Args:
        values: Samples on the uniform grid
        period: Period length
        order: Derivative order (>= 0)

    Returns:
        Samples of the derivative
    """
    values = np.asarray(values, dtype=float)
    if order == 0:
        return values.copy()
    n = values.size
    coefficients = sp_fft.rfft(values)
    multiplier = (1j * angular_wavenumbers(n, period)) ** order
    if order % 2 == 1 and n % 2 == 0:
        multiplier[-1] = 0.0
    return sp_fft.irfft(coefficients * multiplier, n=n)


def antiderivative(values: np.ndarray, period: float) -> np.ndarray:
    """Zero-mean periodic antiderivative; the mean of values is discarded"""
    values = np.asarray(values, dtype=float)
    n = values.size
    coefficients = sp_fft.rfft(values)
    kappa = angular_wavenumbers(n, period)
    result = np.zeros_like(coefficients)
    result[1:] = coefficients[1:] / (1j * kappa[1:])
    if n % 2 == 0:
        result[-1] = 0.0
    return sp_fft.irfft(result, n=n)


def interpolate(values: np.ndarray, period: float, points: ArrayLike,
                order: int = 0) -> np.ndarray:
    """
    Evaluate the trigonometric interpolant (or one of its derivatives) off-grid

    The Nyquist mode is treated as a cosine so the interpolant is real and
    passes through every sample. Odd derivatives drop it, matching derivative().

    Args:
        values: Samples on the uniform grid
        period: Period length
        points: Arbitrary evaluation points (any real values)
        order: Derivative order of the interpolant to evaluate

    Returns:
        Array with the shape of points
    """
    values = np.asarray(values, dtype=float)
    points = np.asarray(points, dtype=float)
    n = values.size
    coefficients = sp_fft.rfft(values) / n
    weights = np.full(coefficients.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 0.0 if order % 2 == 1 else 1.0
    kappa = angular_wavenumbers(n, period)
    coefficients = coefficients * weights * (1j * kappa) ** order
    phase = np.exp(1j * np.multiply.outer(points.ravel(), kappa))
    result = np.real(phase @ coefficients)
    return result.reshape(points.shape)


def denoise(values: np.ndarray, threshold: float = 1e-13) -> np.ndarray:
    """
    Zero the Fourier modes whose magnitude is below threshold times the largest one

    Keeps round-off in the tail of the spectrum from being amplified by
    high-order derivatives of smooth data.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    coefficients = sp_fft.rfft(values)
    magnitudes = np.abs(coefficients)
    coefficients[magnitudes < threshold * np.max(magnitudes)] = 0.0
    return sp_fft.irfft(coefficients, n=n)
