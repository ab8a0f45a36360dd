"""
Periodic Hilbert transform and singular quadrature rules

The L-periodic Hilbert transform is (Hu)(x) = (1/L) PV int_0^L u(x-s) cot(pi*s/L) ds.
It is available two ways: as the Fourier multiplier -i*sgn(k), and as an
adaptive quadrature of the kernel definition that pairs s with -s so the
cotangent singularity cancels. The grid rules below approximate principal-value
cotangent integrals over step-location functions, and log-singular double
integrals with the kernel ln|sin(pi*(x-y)/L)|.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import fft as sp_fft
from scipy import integrate

from core import spectral
from core.errors import QuadratureError
from core.geometry import PhiField

LOGGER = logging.getLogger(__name__)

LOG_SIN_MEAN = -np.log(2.0)


@dataclass(frozen=True)
class PeriodicSamples:
    """Samples of an L-periodic function at x_j = j*L/M"""

    L: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        spectral.require_power_of_two(values.size, minimum=2, name="M")
        if not np.all(np.isfinite(values)):
            raise QuadratureError("quadrature failure: non-finite samples")

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.M) * (self.L / self.M)


def hilbert_multiplier(n: int) -> np.ndarray:
    """-i*sgn(k) on the rfft modes, zero for the mean and the Nyquist mode"""
    multiplier = np.full(n // 2 + 1, -1j)
    multiplier[0] = 0.0
    if n % 2 == 0:
        multiplier[-1] = 0.0
    return multiplier


def hilbert_spectral(u: PeriodicSamples) -> PeriodicSamples:
    """Periodic Hilbert transform by its Fourier multiplier"""
    coefficients = sp_fft.rfft(u.values) * hilbert_multiplier(u.M)
    return PeriodicSamples(u.L, sp_fft.irfft(coefficients, n=u.M))


def hilbert_pv_direct(u: Callable[[float], float], x: float, L: float,
                      tol: float = 1e-10) -> float:
    """
    Hilbert transform at one point by adaptive quadrature of the PV integral

    The contributions of s and L-s are paired, leaving the smooth integrand
    (u(x-s) - u(x+s)) * cot(pi*s/L) on (0, L/2).

    Args:
        u: Smooth L-periodic function
        x: Evaluation point
        L: Period
        tol: Absolute error target

    Returns:
        (Hu)(x)
    """
    scale = np.pi / L

    def paired(s: float) -> float:
        if s <= 0.0:
            return 0.0
        return (u(x - s) - u(x + s)) * np.cos(scale * s) / np.sin(scale * s)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, error = integrate.quad(paired, 0.0, 0.5 * L, epsabs=0.1 * tol * L,
                                          epsrel=0.0, limit=200)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature failure: {exc}", x=x) from exc
    if not np.isfinite(value) or error > tol * L:
        raise QuadratureError(f"quadrature failure: error estimate {error:.3e}", x=x)
    return value / L


def hilbert_pv_direct_samples(u: Callable[[float], float], points: np.ndarray, L: float,
                              tol: float = 1e-10) -> np.ndarray:
    return np.array([hilbert_pv_direct(u, float(x), L, tol) for x in np.asarray(points)])


def cot_pair_sums(x: np.ndarray, L: float) -> np.ndarray:
    """
    S_i = sum_{j != i} (pi/L) * cot(pi*(x_j - x_i)/L)

    This closes the periodic image sum sum_k 1/(x_j - x_i + k*L) exactly.
    Differences are wrapped into (-L/2, L/2] and summed in sorted order, so
    rows with the same set of differences give bitwise equal sums.
    """
    x = np.asarray(x, dtype=float)
    differences = x[np.newaxis, :] - x[:, np.newaxis]
    differences = differences - L * np.ceil(differences / L - 0.5)
    differences = np.sort(differences, axis=1)
    theta = (np.pi / L) * differences
    sines = np.sin(theta)
    if np.count_nonzero(np.abs(sines) <= np.finfo(float).tiny) > x.size:
        raise QuadratureError("collision in quadrature: coincident nodes")
    diagonal = differences == 0.0
    sines[diagonal] = 1.0
    cotangents = np.cos(theta) / sines
    cotangents[diagonal] = 0.0
    return (np.pi / L) * np.sum(cotangents, axis=1)


def pv_cot_grid_sums(phi_nodes: np.ndarray, phi_alpha: np.ndarray, phi_alpha_alpha: np.ndarray,
                     L: float, corrected: bool = True) -> np.ndarray:
    """
    Corrected grid sums for PV int_0^1 (pi/L) cot(pi*(phi(alpha_i) - phi(alpha))/L) d alpha

    phi_nodes are phi at the N equispaced lattice heights; the derivative arrays
    are taken at the same nodes.
    """
    N = phi_nodes.size
    a = 1.0 / N
    sums = -a * cot_pair_sums(phi_nodes, L)
    if corrected:
        sums = sums + 0.5 * a * phi_alpha_alpha / phi_alpha ** 2
    return sums


def pv_cot_grid_corrected(phi: PhiField, i: Union[int, np.ndarray, None], N: int,
                          corrected: bool = True) -> Union[float, np.ndarray]:
    """
    Grid approximation of the principal-value cotangent integral at alpha_i = (N-i)/N

    Args:
        phi: Admissible step-location function
        i: 1-based node index, an array of indices, or None for all nodes
        N: Number of lattice nodes
        corrected: Include the (a/2) phi_aa/phi_a^2 term; without it the rule is first order

    Returns:
        The corrected sum at the requested node(s)
    """
    alpha = (N - np.arange(1, N + 1)) / N
    if phi.K % N == 0:
        index = (N - np.arange(1, N + 1)) * (phi.K // N)
        nodes = phi.values[index]
        phi_alpha = phi.derivative(1)[index]
        phi_alpha_alpha = phi.derivative(2)[index]
    else:
        nodes = phi.evaluate(alpha)
        phi_alpha = phi.evaluate(alpha, 1)
        phi_alpha_alpha = phi.evaluate(alpha, 2)
    sums = pv_cot_grid_sums(nodes, phi_alpha, phi_alpha_alpha, phi.L, corrected)
    if i is None:
        return sums
    if np.isscalar(i):
        return float(sums[int(i) - 1])
    return sums[np.asarray(i, dtype=int) - 1]


def log_sin_double_integral(f: PeriodicSamples, g: PeriodicSamples) -> float:
    """
    (1/L) int int ln|sin(pi*(x-y)/L)| f(x) g(y) dx dy by singularity subtraction

    The inner integral is written as int K(x_i - y) (g(y) - g(x_i)) dy - L*ln2*g(x_i);
    the subtracted integrand vanishes on the diagonal and is summed with the
    trapezoid rule.
    """
    if f.M != g.M or not np.isclose(f.L, g.L, rtol=0.0, atol=1e-15 * max(1.0, f.L)):
        raise QuadratureError(f"grid mismatch: M={f.M}/{g.M}, L={f.L}/{g.L}")
    L = f.L
    M = f.M
    step = L / M
    offsets = np.arange(M) * step
    theta = (np.pi / L) * (offsets[np.newaxis, :] - offsets[:, np.newaxis])
    sines = np.abs(np.sin(theta))
    np.fill_diagonal(sines, 1.0)
    kernel = np.log(sines)
    gv = g.values
    inner = step * (kernel @ gv - gv * np.sum(kernel, axis=1)) + L * LOG_SIN_MEAN * gv
    return float(step * np.dot(f.values, inner) / L)
