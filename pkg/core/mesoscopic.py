"""
Discrete step-flow model

For a periodic train x_1 < ... < x_N with step height a = 1/N and terraces
l_i = x_{i+1} - x_i, the chemical potential is

    f_i = -(2a/L) sum_{j != i} (pi/L) cot(pi(x_j - x_i)/L)
          + c [1/l_i - 1/l_{i-1}] + a^2 [1/l_i^3 - 1/l_{i-1}^3]

and the steps move by

    dx_i/dt = (1/a) [(f_{i+1} - f_i)/l_i - (f_i - f_{i-1})/l_{i-1}].

The dynamics is the gradient flow of the discrete energy E^N, with
f = (1/a) grad E^N and dE^N/dt = -sum (f_{i+1} - f_i)^2 / l_i.
"""
import logging
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from core.errors import ConfigError, StepCollisionError
from core.geometry import StepTrain
from core.hilbert_quadrature import cot_pair_sums
from core.integrators import (EnergyRecord, IntegratorOptions, StepperProblem, Trajectory,
                              run_integrator)

LOGGER = logging.getLogger(__name__)

FD_STEP = 1e-7
BAND = 2


class PotentialVariant(str, Enum):
    """Coefficient of the nearest-neighbour inverse-spacing term"""

    STANDARD = "standard"
    # 1 - a/L; on a domain of length 2 this is the 1 - a/2 kept by CORRECTED_LITERAL
    CORRECTED = "corrected"
    CORRECTED_LITERAL = "corrected_literal"

    @classmethod
    def parse(cls, value) -> "PotentialVariant":
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(variant.value for variant in cls)
            raise ConfigError(f"invalid config: variant '{value}' (expected one of {names})",
                              key="ode.variant") from None

    def coefficient(self, a: float, L: float) -> float:
        """1 for the standard potential, 1 - a/L when corrected, 1 - a/2 for the literal form"""
        if self is PotentialVariant.CORRECTED:
            return 1.0 - a / L
        if self is PotentialVariant.CORRECTED_LITERAL:
            return 1.0 - a / 2.0
        return 1.0


def _spacings(x: np.ndarray, L: float) -> np.ndarray:
    return np.diff(np.append(x, x[0] + L))


def _local_potential(spacings: np.ndarray, a: float, coefficient: float) -> np.ndarray:
    left = np.roll(spacings, 1)
    return (coefficient * (1.0 / spacings - 1.0 / left)
            + a * a * (1.0 / spacings ** 3 - 1.0 / left ** 3))


def _potential(x: np.ndarray, L: float, a: float, coefficient: float) -> np.ndarray:
    spacings = _spacings(x, L)
    return -(2.0 * a / L) * cot_pair_sums(x, L) + _local_potential(spacings, a, coefficient)


def _mobility(f: np.ndarray, spacings: np.ndarray, a: float) -> np.ndarray:
    """(1/a) second difference of f weighted by the inverse terrace widths"""
    flux = (np.roll(f, -1) - f) / spacings
    return (flux - np.roll(flux, 1)) / a


def _rhs(x: np.ndarray, L: float, a: float, coefficient: float) -> np.ndarray:
    return _mobility(_potential(x, L, a, coefficient), _spacings(x, L), a)


def _local_rhs(x: np.ndarray, L: float, a: float, coefficient: float) -> np.ndarray:
    spacings = _spacings(x, L)
    return _mobility(_local_potential(spacings, a, coefficient), spacings, a)


def _energy(x: np.ndarray, L: float, a: float, coefficient: float) -> float:
    theta = (np.pi / L) * (x[np.newaxis, :] - x[:, np.newaxis])
    sines = np.abs(np.sin(theta))
    np.fill_diagonal(sines, 1.0)
    pair = a * a * (1.0 / L) * float(np.sum(np.log(sines)))
    spacings = _spacings(x, L)
    terraces = a * float(np.sum(-coefficient * np.log(spacings / a) + 0.5 * a * a / spacings ** 2))
    return pair + terraces


def _dissipation(x: np.ndarray, L: float, a: float, coefficient: float) -> float:
    f = _potential(x, L, a, coefficient)
    return float(np.sum((np.roll(f, -1) - f) ** 2 / _spacings(x, L)))


def chemical_potential(train: StepTrain, variant: PotentialVariant = PotentialVariant.STANDARD
                       ) -> np.ndarray:
    """
    Chemical potential f_i of every step

    Args:
        train: Valid step train
        variant: Potential variant

    Returns:
        Length-N array f
    """
    variant = PotentialVariant.parse(variant)
    return _potential(np.asarray(train.x), train.L, train.a, variant.coefficient(train.a, train.L))


def ode_rhs(train: StepTrain, variant: PotentialVariant = PotentialVariant.STANDARD) -> np.ndarray:
    """Step velocities dx_i/dt"""
    variant = PotentialVariant.parse(variant)
    return _rhs(np.asarray(train.x), train.L, train.a, variant.coefficient(train.a, train.L))


def discrete_energy(train: StepTrain, variant: PotentialVariant = PotentialVariant.STANDARD
                    ) -> float:
    """
    Discrete energy E^N

    The terrace sum runs over the N terraces of one period; the logarithmic
    terrace term carries the variant coefficient so that f = (1/a) grad E^N.
    """
    variant = PotentialVariant.parse(variant)
    return _energy(np.asarray(train.x), train.L, train.a, variant.coefficient(train.a, train.L))


def dissipation_rate(train: StepTrain, variant: PotentialVariant = PotentialVariant.STANDARD
                     ) -> float:
    """D = sum (f_{i+1} - f_i)^2 / l_i, the rate of energy decrease"""
    variant = PotentialVariant.parse(variant)
    return _dissipation(np.asarray(train.x), train.L, train.a, variant.coefficient(train.a, train.L))


def ode_jacobian(train: StepTrain, variant: PotentialVariant = PotentialVariant.STANDARD
                 ) -> np.ndarray:
    """
    Dense Jacobian of ode_rhs by central differences

    The probing step is 1e-7*a*L.

    Returns:
        N x N array J with J[i, j] = d(dx_i/dt)/dx_j
    """
    variant = PotentialVariant.parse(variant)
    x = np.asarray(train.x, dtype=float)
    L, a = train.L, train.a
    coefficient = variant.coefficient(a, L)
    step = FD_STEP * a * L
    if 2.0 * step >= train.min_spacing:
        raise StepCollisionError("step collision: spacing below the probing step", time=train.t)
    jacobian = np.empty((x.size, x.size))
    for j in range(x.size):
        shift = np.zeros_like(x)
        shift[j] = step
        jacobian[:, j] = (_rhs(x + shift, L, a, coefficient)
                          - _rhs(x - shift, L, a, coefficient)) / (2.0 * step)
    return jacobian


def _color_count(N: int) -> int:
    """Smallest divisor of N that separates same-colour columns by more than the band"""
    for count in range(2 * BAND + 1, N + 1):
        if N % count == 0:
            return count
    return N


def local_jacobian(x: np.ndarray, L: float, a: float, coefficient: float) -> sparse.csc_matrix:
    """
    Periodic banded Jacobian of the nearest-neighbour part of the rhs

    Columns are probed in colour groups; column j only reaches rows j-2..j+2.
    """
    N = x.size
    step = FD_STEP * a * L
    colors = _color_count(N)
    offsets = np.arange(-BAND, BAND + 1)
    rows, cols, data = [], [], []
    for color in range(colors):
        columns = np.arange(color, N, colors)
        shift = np.zeros(N)
        shift[columns] = step
        difference = (_local_rhs(x + shift, L, a, coefficient)
                      - _local_rhs(x - shift, L, a, coefficient)) / (2.0 * step)
        for column in columns:
            touched = np.unique((column + offsets) % N)
            rows.extend(touched)
            cols.extend([column] * touched.size)
            data.extend(difference[touched])
    return sparse.csc_matrix((data, (rows, cols)), shape=(N, N))


class DiscreteSystem:
    """The step-flow ODE packaged for the shared integrators"""

    def __init__(self, train: StepTrain, variant: PotentialVariant, options: IntegratorOptions):
        self.params = train.params
        self.L = train.L
        self.a = train.a
        self.variant = PotentialVariant.parse(variant)
        self.coefficient = self.variant.coefficient(self.a, self.L)
        self.options = options
        self.threshold = options.collision_eps * self.a * self.L

    def rhs(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return _rhs(x, self.L, self.a, self.coefficient)

    def prepare(self, x: np.ndarray, gamma_dt: float) -> Callable[[np.ndarray], np.ndarray]:
        W = local_jacobian(x, self.L, self.a, self.coefficient)
        matrix = (sparse.identity(x.size, format="csc") - gamma_dt * W).tocsc()
        return sparse_linalg.splu(matrix).solve

    def stiffness(self, x: np.ndarray) -> float:
        W = local_jacobian(x, self.L, self.a, self.coefficient)
        return float(np.max(np.abs(W).sum(axis=1)))

    def validate(self, x: np.ndarray, t: float):
        spacings = _spacings(x, self.L)
        smallest = float(np.min(spacings))
        if not np.isfinite(smallest) or smallest < self.threshold:
            raise StepCollisionError(
                f"step collision: spacing {smallest:.3e} below {self.threshold:.3e} at t={t:.6e}",
                time=t)

    def energy(self, x: np.ndarray) -> float:
        return _energy(x, self.L, self.a, self.coefficient)

    def dissipation(self, x: np.ndarray) -> float:
        return _dissipation(x, self.L, self.a, self.coefficient)


class _Recorder:
    """Snapshots and energy series for an ODE run"""

    def __init__(self, system: DiscreteSystem, trajectory: Trajectory, train: StepTrain):
        self.system = system
        self.trajectory = trajectory
        self.train = train
        self.count = 0
        self.previous: Optional[np.ndarray] = None
        self.previous_time = 0.0
        self.previous_energy = 0.0
        self.record(train.t, np.asarray(train.x), force=True)

    def record(self, t: float, x: np.ndarray, force: bool = False):
        self.count += 1
        if not force and self.count % self.system.options.record_every != 0:
            return
        self.trajectory.times.append(t)
        self.trajectory.states.append(self.train.moved(x, t))
        if self.system.options.record_energy:
            energy = self.system.energy(x)
            dissipation = self.system.dissipation(x)
            residual = 0.0
            if self.previous is not None and t > self.previous_time:
                midpoint = 0.5 * (self.previous + x)
                residual = ((energy - self.previous_energy) / (t - self.previous_time)
                            + self.system.dissipation(midpoint))
            self.trajectory.energy_series.append(EnergyRecord(t, energy, dissipation, residual))
            self.previous_energy = energy
        self.previous = np.array(x)
        self.previous_time = t

    def finish(self, t: float, x: np.ndarray):
        if not self.trajectory.times or self.trajectory.times[-1] < t:
            self.record(t, x, force=True)


def integrate_ode(train: StepTrain, T: float, options: Optional[IntegratorOptions] = None,
                  variant: PotentialVariant = PotentialVariant.STANDARD,
                  progress_callback: Optional[Callable[[str, int], None]] = None) -> Trajectory:
    """
    Integrate the step-flow ODE from train.t to train.t + T

    Args:
        train: Valid initial train
        T: Length of the time interval
        options: Integrator options (defaults to IntegratorOptions())
        variant: Potential variant
        progress_callback: Optional callback(message, percentage)

    Returns:
        Trajectory of StepTrain snapshots with the energy series

    Raises:
        StepCollisionError: A spacing fell below collision_eps*a*L
        IntegratorError: Step-size underflow
    """
    options = options or IntegratorOptions()
    system = DiscreteSystem(train, variant, options)
    system.validate(np.asarray(train.x), train.t)
    trajectory = Trajectory()
    recorder = _Recorder(system, trajectory, train)
    t0 = train.t

    problem = StepperProblem(
        rhs=system.rhs,
        prepare=system.prepare,
        validate=lambda x, t: system.validate(x, t0 + t),
        on_accept=lambda t, x: recorder.record(t0 + t, x),
        stiffness=system.stiffness,
    )
    LOGGER.info("ODE run: N=%d, variant=%s, T=%.3e, method=%s", train.N, system.variant.value,
                T, options.method)
    final = run_integrator(problem, np.asarray(train.x), T, options, trajectory,
                           progress_callback, label=f"ode N={train.N}")
    recorder.finish(t0 + T, final)
    return trajectory
