"""
State representations of a periodic vicinal surface

A surface of period L is described four equivalent ways: the total height
h(x) = -x/L + p(x), the step-location function phi(alpha) = -L*alpha + q(alpha)
(the inverse of h), the step density rho = -h_x and the potential u with
u_xx + 1/L = rho. A discrete train of N steps is sampled from phi at the
lattice heights alpha_i = (N-i)/N.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import fft as sp_fft

from core import spectral
from core.errors import (InversionError, MonotonicityLostError, ProfileError,
                         SamplingError, StepCollisionError, ConfigError)

LOGGER = logging.getLogger(__name__)

BISECTION_WIDTH = 1e-13
INVERSION_TOLERANCE = 1e-10
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class DomainParams:
    """Period length and, for discrete trains, the number of steps per period"""

    L: float = 1.0
    N: Optional[int] = None

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise ConfigError(f"invalid config: period L={self.L} must be positive", key="domain.L")
        if self.N is not None and (int(self.N) != self.N or self.N < 2):
            raise ConfigError(f"invalid config: N={self.N} must be an integer >= 2", key="ode.N")

    @property
    def a(self) -> float:
        """Step height a = 1/N"""
        if self.N is None:
            raise ConfigError("step height requested for a domain without N", key="ode.N")
        return 1.0 / self.N

    def with_steps(self, N: int) -> "DomainParams":
        return DomainParams(L=self.L, N=N)


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class HeightProfile:
    """Test-profile family h0(x) = -x/L + A/(2*pi*k) * sin(2*pi*k*x/L)"""

    A: float = 0.2
    k: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"invalid config: mode k={self.k} must be a positive integer",
                              key="profile.k")
        if not np.isfinite(self.A) or abs(self.A) >= 1.0:
            raise ProfileError(f"profile not monotone: |A|={abs(self.A)} must be < 1")


@dataclass(frozen=True)
class StepTrain:
    """One period of strictly increasing step positions at time t"""

    params: DomainParams
    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = _frozen(self.x)
        object.__setattr__(self, "x", x)
        if self.params.N is None:
            object.__setattr__(self, "params", self.params.with_steps(x.size))
        elif self.params.N != x.size:
            raise ConfigError(f"train has {x.size} positions but N={self.params.N}", key="ode.N")
        if not np.all(np.isfinite(x)):
            raise StepCollisionError("step collision: non-finite step position", time=self.t)
        spacings = self.spacings
        if np.any(spacings <= 0.0):
            index = int(np.argmin(spacings))
            raise StepCollisionError(
                f"step collision: terrace {index} has width {spacings[index]:.3e}", time=self.t)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def a(self) -> float:
        return self.params.a

    @property
    def L(self) -> float:
        return self.params.L

    @property
    def spacings(self) -> np.ndarray:
        """Terrace widths x_{i+1} - x_i with x_{N+1} = x_1 + L"""
        return np.diff(np.append(self.x, self.x[0] + self.params.L))

    @property
    def min_spacing(self) -> float:
        return float(np.min(self.spacings))

    def moved(self, x: np.ndarray, t: float) -> "StepTrain":
        return StepTrain(self.params, x, t)


@dataclass(frozen=True)
class HeightField:
    """
    h(x) = -x/L + p(x) sampled at x_j = j*L/M

    beta is the configured bound on h_x; the admissibility check is
    h_x <= beta/2 at every node.
    """

    params: DomainParams
    p: np.ndarray
    t: float = 0.0
    beta: Optional[float] = None

    def __post_init__(self):
        p = _frozen(self.p)
        object.__setattr__(self, "p", p)
        spectral.require_power_of_two(p.size, minimum=16, name="M")

    @property
    def M(self) -> int:
        return self.p.size

    @property
    def L(self) -> float:
        return self.params.L

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.M) * (self.L / self.M)

    @property
    def values(self) -> np.ndarray:
        return -self.nodes / self.L + self.p

    def derivative(self, order: int = 1) -> np.ndarray:
        """Spectral x-derivative of h at the nodes"""
        result = spectral.derivative(self.p, self.L, order)
        if order == 1:
            result = result - 1.0 / self.L
        return result

    @property
    def h_x(self) -> np.ndarray:
        return self.derivative(1)

    @property
    def h_xx(self) -> np.ndarray:
        return self.derivative(2)

    def evaluate(self, x, order: int = 0) -> np.ndarray:
        """h or one of its derivatives at arbitrary points"""
        x = np.asarray(x, dtype=float)
        result = spectral.interpolate(self.p, self.L, x, order)
        if order == 0:
            result = result - x / self.L
        elif order == 1:
            result = result - 1.0 / self.L
        return result

    def is_admissible(self) -> bool:
        h_x = self.h_x
        if self.beta is None:
            return bool(np.all(h_x < 0.0))
        return bool(np.all(h_x <= 0.5 * self.beta))

    def check_admissible(self) -> "HeightField":
        if not self.is_admissible():
            bound = 0.0 if self.beta is None else 0.5 * self.beta
            raise MonotonicityLostError(
                f"monotonicity lost: max h_x = {np.max(self.h_x):.6g} exceeds {bound:.6g}",
                time=self.t)
        return self

    def with_periodic_part(self, p: np.ndarray, t: float) -> "HeightField":
        return HeightField(self.params, p, t, self.beta)


@dataclass(frozen=True)
class PhiField:
    """
    phi(alpha) = -L*alpha + q(alpha) sampled at alpha_j = j/K

    beta2 bounds phi_alpha; the admissibility check is phi_alpha <= beta2/2.
    """

    params: DomainParams
    q: np.ndarray
    t: float = 0.0
    beta2: Optional[float] = None

    def __post_init__(self):
        q = _frozen(self.q)
        object.__setattr__(self, "q", q)
        spectral.require_power_of_two(q.size, minimum=16, name="K")

    @property
    def K(self) -> int:
        return self.q.size

    @property
    def L(self) -> float:
        return self.params.L

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.K) / self.K

    @property
    def values(self) -> np.ndarray:
        return -self.L * self.nodes + self.q

    def derivative(self, order: int = 1) -> np.ndarray:
        """Spectral alpha-derivative of phi at the nodes"""
        result = spectral.derivative(self.q, 1.0, order)
        if order == 1:
            result = result - self.L
        return result

    @property
    def phi_alpha(self) -> np.ndarray:
        return self.derivative(1)

    def evaluate(self, alpha, order: int = 0) -> np.ndarray:
        """phi or one of its derivatives at arbitrary alpha"""
        alpha = np.asarray(alpha, dtype=float)
        result = spectral.interpolate(self.q, 1.0, alpha, order)
        if order == 0:
            result = result - self.L * alpha
        elif order == 1:
            result = result - self.L
        return result

    def is_admissible(self) -> bool:
        phi_alpha = self.phi_alpha
        if self.beta2 is None:
            return bool(np.all(phi_alpha < 0.0))
        return bool(np.all(phi_alpha <= 0.5 * self.beta2))

    def check_admissible(self) -> "PhiField":
        if not self.is_admissible():
            bound = 0.0 if self.beta2 is None else 0.5 * self.beta2
            raise MonotonicityLostError(
                f"monotonicity lost: max phi_alpha = {np.max(self.phi_alpha):.6g} exceeds {bound:.6g}",
                time=self.t)
        return self

    def with_periodic_part(self, q: np.ndarray, t: float) -> "PhiField":
        return PhiField(self.params, q, t, self.beta2)


def build_height_field(profile: HeightProfile, L: float, M: int) -> HeightField:
    """
    Sample the test profile on an M-point grid

    Args:
        profile: Amplitude and mode of the sinusoidal perturbation
        L: Period length
        M: Grid size (power of two >= 16)

    Returns:
        Admissible HeightField with beta = -(1-|A|)/L
    """
    if not isinstance(profile, HeightProfile):
        profile = HeightProfile(**dict(profile))
    params = DomainParams(L=L)
    spectral.require_power_of_two(M, minimum=16, name="M")
    x = np.arange(M) * (L / M)
    p = profile.A / (2.0 * np.pi * profile.k) * np.sin(2.0 * np.pi * profile.k * x / L)
    beta = -(1.0 - abs(profile.A)) / L
    field_ = HeightField(params, p, 0.0, beta)
    LOGGER.debug("Built height field A=%s k=%s L=%s M=%s", profile.A, profile.k, L, M)
    return field_.check_admissible()


def _invert_decreasing(evaluate: Callable[[np.ndarray], np.ndarray],
                       evaluate_slope: Callable[[np.ndarray], np.ndarray],
                       targets: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Vectorised bisection for a decreasing function, then one Newton polish"""
    lower = lower.copy()
    upper = upper.copy()
    if np.any(evaluate(lower) < targets) or np.any(evaluate(upper) > targets):
        raise InversionError("inversion failed: root not bracketed")
    for _ in range(MAX_BISECTIONS):
        if np.max(upper - lower) <= BISECTION_WIDTH:
            break
        middle = 0.5 * (lower + upper)
        above = evaluate(middle) > targets
        lower = np.where(above, middle, lower)
        upper = np.where(above, upper, middle)
    roots = 0.5 * (lower + upper)
    slope = evaluate_slope(roots)
    roots = roots - (evaluate(roots) - targets) / slope
    residual = np.max(np.abs(evaluate(roots) - targets))
    if not np.isfinite(residual) or residual > INVERSION_TOLERANCE:
        raise InversionError(f"inversion failed: residual {residual:.3e}")
    return roots


def _sup_bound(values: np.ndarray) -> float:
    """Upper bound of the trigonometric interpolant of values"""
    coefficients = np.abs(sp_fft.rfft(values)) / values.size
    return float(coefficients[0] + 2.0 * np.sum(coefficients[1:])) + 1e-12


def height_to_phi(h: HeightField, K: int) -> PhiField:
    """
    Invert h for the step-location function on a K-point alpha grid

    Args:
        h: Strictly decreasing height field
        K: Grid size of the result (power of two >= 16)

    Returns:
        Admissible PhiField with beta2 the maximum of phi_alpha
    """
    spectral.require_power_of_two(K, minimum=16, name="K")
    if np.any(h.h_x >= 0.0):
        raise InversionError("inverse undefined: h is not strictly decreasing")
    L = h.L
    alpha = np.arange(K) / K
    bound = _sup_bound(h.p)
    x = _invert_decreasing(lambda y: h.evaluate(y), lambda y: h.evaluate(y, 1),
                           alpha, -L * (alpha + bound), L * (bound - alpha))
    q = x + L * alpha
    phi = PhiField(h.params, q, h.t)
    beta2 = float(np.max(phi.phi_alpha))
    if beta2 >= 0.0:
        raise InversionError("inverse undefined: phi is not strictly decreasing")
    return PhiField(h.params, q, h.t, beta2)


def phi_to_height(phi: PhiField, M: int) -> HeightField:
    """Invert phi for the height field on an M-point x grid"""
    spectral.require_power_of_two(M, minimum=16, name="M")
    if np.any(phi.phi_alpha >= 0.0):
        raise InversionError("inverse undefined: phi is not strictly decreasing")
    L = phi.L
    x = np.arange(M) * (L / M)
    bound = _sup_bound(phi.q)
    alpha = _invert_decreasing(lambda s: phi.evaluate(s), lambda s: phi.evaluate(s, 1),
                               x, (-x - bound) / L, (bound - x) / L)
    p = alpha + x / L
    h = HeightField(phi.params, p, phi.t)
    beta = float(np.max(h.h_x))
    if beta >= 0.0:
        raise InversionError("inverse undefined: h is not strictly decreasing")
    return HeightField(phi.params, p, phi.t, beta)


def height_to_density(h: HeightField) -> np.ndarray:
    """Step density rho = -h_x at the nodes"""
    h.check_admissible()
    return -h.h_x


def height_to_u(h: HeightField) -> np.ndarray:
    """
    Zero-mean periodic u with u_x = -h - x/L + k0

    k0 is the mean of p, so u_xx + 1/L = -h_x.
    """
    h.check_admissible()
    u_x = -(h.p - np.mean(h.p))
    return spectral.antiderivative(u_x, h.L)


def sample_step_train(phi: PhiField, N: int) -> StepTrain:
    """
    Sample the discrete train x_i = phi((N-i)/N), i = 1..N

    Raw positions are kept; no shift into [0, L).
    """
    params = DomainParams(L=phi.L, N=N)
    alpha = (N - np.arange(1, N + 1)) / N
    if phi.K % N == 0:
        stride = phi.K // N
        x = phi.values[(N - np.arange(1, N + 1)) * stride]
    else:
        x = phi.evaluate(alpha)
    gaps = np.diff(np.append(x, x[0] + phi.L))
    if np.any(gaps <= 0.0) or not np.all(np.isfinite(x)):
        raise SamplingError(f"sampling produced collision for N={N}")
    return StepTrain(params, x, phi.t)


class StepHeightProfile:
    """Piecewise-constant height of a step train, h_N(x) = (N-i)/N on [x_i, x_{i+1})"""

    def __init__(self, train: StepTrain):
        self.train = train
        self._x = np.asarray(train.x)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        L = self.train.L
        N = self.train.N
        shifts = np.floor((x - self._x[0]) / L)
        reduced = x - shifts * L
        index = np.searchsorted(self._x, reduced, side="right")
        return (N - index) / N - shifts


def step_train_to_height_profile(train: StepTrain) -> StepHeightProfile:
    """Height profile h_N of a train, extended by h_N(x+L) = h_N(x) - 1"""
    return StepHeightProfile(train)
