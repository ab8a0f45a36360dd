"""
Continuum limit of the step-flow model

The height h solves h_t = mu_xx with chemical potential

    mu = -(2*pi/L) H(h_x) + h_xx/h_x + 3*h_x*h_xx,

and the step-location function phi solves phi_t = -(mu_alpha/phi_alpha)_alpha with

    mu = (2*pi/L^2) PV int_0^1 cot(pi*(phi(alpha) - phi(beta))/L) d beta
         - phi_aa/phi_a^2 - 3*phi_aa/phi_a^4.

Both are integrated by the pseudo-spectral method of lines with the W-method
of core.integrators; W is Fourier-diagonal (exact Hilbert part plus a frozen
fourth-order coefficient).
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy import fft as sp_fft

from core import spectral
from core.errors import ConfigError, MonotonicityLostError
from core.geometry import (HeightField, PhiField, height_to_density, height_to_phi,
                           height_to_u)
from core.hilbert_quadrature import (PeriodicSamples, hilbert_multiplier,
                                     log_sin_double_integral, pv_cot_grid_sums)
from core.integrators import (EnergyRecord, IntegratorOptions, StepperProblem, Trajectory,
                              run_integrator)

LOGGER = logging.getLogger(__name__)

LOG_TWO = np.log(2.0)


def default_pde_options() -> IntegratorOptions:
    return IntegratorOptions(rtol=1e-8, atol=1e-10, dt_max=1e-4)


@dataclass(frozen=True)
class EnergyBundle:
    """
    Energies of one surface in every formulation

    cross_residuals holds |E_h - (E_h_bar - W)|, |E_h - E_phi|, |E_h - E_rho| and |E_h - E_u|.
    """

    E_h: float
    E_h_bar: float
    W: float
    E_rho: float
    E_u: float
    E_phi: float
    cross_residuals: Dict[str, float] = field(default_factory=dict)


def _hilbert(values: np.ndarray) -> np.ndarray:
    n = values.size
    return sp_fft.irfft(sp_fft.rfft(values) * hilbert_multiplier(n), n=n)


def _mu_height(p: np.ndarray, L: float) -> np.ndarray:
    p_x = spectral.derivative(p, L, 1)
    h_x = p_x - 1.0 / L
    h_xx = spectral.derivative(p, L, 2)
    return -(2.0 * np.pi / L) * _hilbert(p_x) + h_xx / h_x + 3.0 * h_x * h_xx


def _height_rhs(p: np.ndarray, L: float) -> np.ndarray:
    return spectral.derivative(_mu_height(p, L), L, 2)


def _phi_parts(q: np.ndarray, L: float):
    K = q.size
    phi = -L * np.arange(K) / K + q
    phi_alpha = spectral.derivative(q, 1.0, 1) - L
    phi_alpha_alpha = spectral.derivative(q, 1.0, 2)
    return phi, phi_alpha, phi_alpha_alpha


def _mu_phi(q: np.ndarray, L: float) -> np.ndarray:
    phi, phi_alpha, phi_alpha_alpha = _phi_parts(q, L)
    principal_value = pv_cot_grid_sums(phi, phi_alpha, phi_alpha_alpha, L)
    return ((2.0 / L) * principal_value - phi_alpha_alpha / phi_alpha ** 2
            - 3.0 * phi_alpha_alpha / phi_alpha ** 4)


def _phi_rhs(q: np.ndarray, L: float) -> np.ndarray:
    phi_alpha = spectral.derivative(q, 1.0, 1) - L
    mu_alpha = spectral.derivative(_mu_phi(q, L), 1.0, 1)
    return -spectral.derivative(mu_alpha / phi_alpha, 1.0, 1)


def _require_decreasing(derivative: np.ndarray, name: str, t: float):
    if np.any(derivative >= 0.0):
        raise MonotonicityLostError(
            f"monotonicity lost: max {name} = {np.max(derivative):.6g} is not negative", time=t)


def mu_of_height(h: HeightField) -> np.ndarray:
    """Chemical potential of a height field at its nodes"""
    _require_decreasing(h.h_x, "h_x", h.t)
    return _mu_height(h.p, h.L)


def height_rhs(h: HeightField) -> np.ndarray:
    """h_t = mu_xx; its mean vanishes, so the mean height is conserved"""
    _require_decreasing(h.h_x, "h_x", h.t)
    return _height_rhs(h.p, h.L)


def mu_of_phi(phi: PhiField) -> np.ndarray:
    """
    Chemical potential in the step-location formulation at the alpha nodes

    The principal-value integral is the corrected grid sum on the field's own grid.
    """
    _require_decreasing(phi.phi_alpha, "phi_alpha", phi.t)
    return _mu_phi(phi.q, phi.L)


def phi_rhs(phi: PhiField) -> np.ndarray:
    """phi_t = -(mu_alpha/phi_alpha)_alpha"""
    _require_decreasing(phi.phi_alpha, "phi_alpha", phi.t)
    return _phi_rhs(phi.q, phi.L)


def phi_dissipation_rate(phi: PhiField) -> float:
    """int_0^1 (mu_alpha)^2 / phi_alpha d alpha, which equals dE_phi/dt along the flow"""
    _require_decreasing(phi.phi_alpha, "phi_alpha", phi.t)
    mu_alpha = spectral.derivative(_mu_phi(phi.q, phi.L), 1.0, 1)
    return float(np.mean(mu_alpha ** 2 / phi.phi_alpha))


def height_dissipation_rate(h: HeightField) -> float:
    """int_0^L (mu_x)^2 dx, which equals -dE_h/dt along the flow"""
    _require_decreasing(h.h_x, "h_x", h.t)
    mu_x = spectral.derivative(_mu_height(h.p, h.L), h.L, 1)
    return float(h.L * np.mean(mu_x ** 2))


def _local_density_energy(rho: np.ndarray, L: float) -> float:
    """int Phi(rho) dx with Phi(s) = s ln s + s^3/2"""
    return float(L * np.mean(rho * np.log(rho) + 0.5 * rho ** 3))


def density_energy(rho: np.ndarray, L: float) -> float:
    """Energy written in terms of the step density"""
    samples = PeriodicSamples(L, rho)
    return log_sin_double_integral(samples, samples) + _local_density_energy(rho, L)


def height_energy(h: HeightField) -> float:
    """E_h = int (1/L) int ln|sin(pi(x-y)/L)| h_x h_y dy + rho ln rho + rho^3/2 dx"""
    h_x = h.h_x
    _require_decreasing(h_x, "h_x", h.t)
    samples = PeriodicSamples(h.L, h_x)
    return log_sin_double_integral(samples, samples) + _local_density_energy(-h_x, h.L)


def height_energy_bar(h: HeightField) -> float:
    """Energy in Hilbert-transform form, int -(pi/L) p H(h_x) - h_x ln(-h_x) - h_x^3/2 dx"""
    h_x = h.h_x
    _require_decreasing(h_x, "h_x", h.t)
    integrand = (-(np.pi / h.L) * h.p * _hilbert(h_x) - h_x * np.log(-h_x) - 0.5 * h_x ** 3)
    return float(h.L * np.mean(integrand))


def null_lagrangian(h: HeightField) -> float:
    """W = (1/L^2) int int ln|sin(pi(x-y)/L)| h_y dx dy, equal to ln(2)/L"""
    constant = PeriodicSamples(h.L, np.full(h.M, 1.0 / h.L))
    return log_sin_double_integral(constant, PeriodicSamples(h.L, h.h_x))


def phi_energy(phi: PhiField) -> float:
    """
    E_phi = (1/L) int int ln|sin(pi(phi(a) - phi(b))/L)| da db + int -ln(-phi_a) + 1/(2 phi_a^2) da

    ln|sin(pi(a - b))| is subtracted from the double-integral kernel; its
    integral is -ln 2 and the remainder is smooth with diagonal value
    ln(-phi_a/L), so the trapezoid rule applies.
    """
    phi_alpha = phi.phi_alpha
    _require_decreasing(phi_alpha, "phi_alpha", phi.t)
    K = phi.K
    values = phi.values
    alpha = phi.nodes
    sines = np.abs(np.sin((np.pi / phi.L) * (values[:, np.newaxis] - values[np.newaxis, :])))
    reference = np.abs(np.sin(np.pi * (alpha[:, np.newaxis] - alpha[np.newaxis, :])))
    np.fill_diagonal(sines, 1.0)
    np.fill_diagonal(reference, 1.0)
    remainder = np.log(sines) - np.log(reference)
    np.fill_diagonal(remainder, np.log(-phi_alpha / phi.L))
    double = (np.sum(remainder) / K ** 2 - LOG_TWO) / phi.L
    local = float(np.mean(-np.log(-phi_alpha) + 0.5 / phi_alpha ** 2))
    return float(double + local)


def u_energy(u: np.ndarray, L: float) -> float:
    """Energy written in terms of u, with rho = u_xx + 1/L"""
    rho = spectral.derivative(u, L, 2) + 1.0 / L
    return density_energy(rho, L)


def energy_bundle(h: HeightField, K: Optional[int] = None) -> EnergyBundle:
    """
    Every energy of h together with the cross-formulation residuals

    Args:
        h: Admissible height field
        K: Grid size for the phi formulation (defaults to h.M)
    """
    h.check_admissible()
    E_h = height_energy(h)
    E_h_bar = height_energy_bar(h)
    W = null_lagrangian(h)
    E_rho = density_energy(height_to_density(h), h.L)
    E_u = u_energy(height_to_u(h), h.L)
    E_phi = phi_energy(height_to_phi(h, K or h.M))
    residuals = {
        "E_h-(E_h_bar-W)": abs(E_h - (E_h_bar - W)),
        "E_h-E_phi": abs(E_h - E_phi),
        "E_h-E_rho": abs(E_h - E_rho),
        "E_h-E_u": abs(E_h - E_u),
    }
    return EnergyBundle(E_h, E_h_bar, W, E_rho, E_u, E_phi, residuals)


class _ContinuumSystem:
    """Common W-method plumbing; subclasses provide the formulation"""

    def __init__(self, state: Union[HeightField, PhiField], options: IntegratorOptions):
        self.state = state
        self.options = options
        self.L = state.L
        self.size = state.p.size if isinstance(state, HeightField) else state.q.size

    def symbol(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def prepare(self, u: np.ndarray, gamma_dt: float) -> Callable[[np.ndarray], np.ndarray]:
        denominator = 1.0 - gamma_dt * self.symbol(u)
        n = self.size

        def solve(b: np.ndarray) -> np.ndarray:
            return sp_fft.irfft(sp_fft.rfft(b) / denominator, n=n)
        return solve

    def stiffness(self, u: np.ndarray) -> float:
        return float(np.max(np.abs(self.symbol(u))))


class HeightSystem(_ContinuumSystem):

    def __init__(self, state: HeightField, options: IntegratorOptions):
        super().__init__(state, options)
        self.kappa = spectral.angular_wavenumbers(self.size, self.L)
        self.bound = 0.5 * state.beta if state.beta is not None else 0.5 * float(np.max(state.h_x))

    def rhs(self, p: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return _height_rhs(p, self.L)

    def symbol(self, p: np.ndarray) -> np.ndarray:
        h_x = spectral.derivative(p, self.L, 1) - 1.0 / self.L
        coefficient = float(np.max(np.abs(3.0 * h_x + 1.0 / h_x)))
        return (2.0 * np.pi / self.L) * self.kappa ** 3 - coefficient * self.kappa ** 4

    def validate(self, p: np.ndarray, t: float):
        h_x = spectral.derivative(p, self.L, 1) - 1.0 / self.L
        if not np.all(np.isfinite(h_x)) or np.max(h_x) > self.bound:
            raise MonotonicityLostError(
                f"monotonicity lost: max h_x = {np.max(h_x):.6g} exceeds {self.bound:.6g} at t={t:.6e}",
                time=t)

    def snapshot(self, p: np.ndarray, t: float) -> HeightField:
        return self.state.with_periodic_part(p, t)

    def energy(self, p: np.ndarray) -> float:
        return height_energy(self.snapshot(p, 0.0))

    def dissipation(self, p: np.ndarray) -> float:
        return height_dissipation_rate(self.snapshot(p, 0.0))


class PhiSystem(_ContinuumSystem):

    def __init__(self, state: PhiField, options: IntegratorOptions):
        super().__init__(state, options)
        self.omega = spectral.angular_wavenumbers(self.size, 1.0)
        self.bound = (0.5 * state.beta2 if state.beta2 is not None
                      else 0.5 * float(np.max(state.phi_alpha)))

    def rhs(self, q: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return _phi_rhs(q, self.L)

    def symbol(self, q: np.ndarray) -> np.ndarray:
        phi_alpha = spectral.derivative(q, 1.0, 1) - self.L
        coefficient = float(np.max(np.abs(1.0 / phi_alpha ** 3 + 3.0 / phi_alpha ** 5)))
        return ((2.0 * np.pi / self.L) * (self.omega / self.L) ** 3
                - coefficient * self.omega ** 4)

    def validate(self, q: np.ndarray, t: float):
        phi_alpha = spectral.derivative(q, 1.0, 1) - self.L
        if not np.all(np.isfinite(phi_alpha)) or np.max(phi_alpha) > self.bound:
            raise MonotonicityLostError(
                f"monotonicity lost: max phi_alpha = {np.max(phi_alpha):.6g} exceeds "
                f"{self.bound:.6g} at t={t:.6e}", time=t)

    def snapshot(self, q: np.ndarray, t: float) -> PhiField:
        return self.state.with_periodic_part(q, t)

    def energy(self, q: np.ndarray) -> float:
        return phi_energy(self.snapshot(q, 0.0))

    def dissipation(self, q: np.ndarray) -> float:
        return -phi_dissipation_rate(self.snapshot(q, 0.0))


class _Recorder:

    def __init__(self, system: _ContinuumSystem, trajectory: Trajectory, t0: float,
                 u0: np.ndarray):
        self.system = system
        self.trajectory = trajectory
        self.count = 0
        self.previous: Optional[np.ndarray] = None
        self.previous_time = t0
        self.previous_energy = 0.0
        self.record(t0, u0, force=True)

    def record(self, t: float, u: np.ndarray, force: bool = False):
        self.count += 1
        if not force and self.count % self.system.options.record_every != 0:
            return
        self.trajectory.times.append(t)
        self.trajectory.states.append(self.system.snapshot(np.array(u), t))
        if self.system.options.record_energy:
            energy = self.system.energy(u)
            dissipation = self.system.dissipation(u)
            residual = 0.0
            if self.previous is not None and t > self.previous_time:
                midpoint = 0.5 * (self.previous + u)
                residual = ((energy - self.previous_energy) / (t - self.previous_time)
                            + self.system.dissipation(midpoint))
            self.trajectory.energy_series.append(EnergyRecord(t, energy, dissipation, residual))
            self.previous_energy = energy
        self.previous = np.array(u)
        self.previous_time = t

    def finish(self, t: float, u: np.ndarray):
        if self.trajectory.times[-1] < t:
            self.record(t, u, force=True)


def integrate_pde(state: Union[HeightField, PhiField], T: float,
                  options: Optional[IntegratorOptions] = None,
                  progress_callback: Optional[Callable[[str, int], None]] = None) -> Trajectory:
    """
    Method-of-lines integration of the h- or phi-form equation

    Args:
        state: Admissible HeightField or PhiField
        T: Length of the time interval
        options: Integrator options (defaults to default_pde_options())
        progress_callback: Optional callback(message, percentage)

    Returns:
        Trajectory of field snapshots and energies

    Raises:
        MonotonicityLostError: h_x > beta/2 (or phi_alpha > beta2/2) at an accepted step
        IntegratorError: Step-size underflow
    """
    options = options or default_pde_options()
    if isinstance(state, HeightField):
        system = HeightSystem(state, options)
        u0 = np.array(state.p)
        label = f"h-form M={state.M}"
    elif isinstance(state, PhiField):
        system = PhiSystem(state, options)
        u0 = np.array(state.q)
        label = f"phi-form K={state.K}"
    else:
        raise ConfigError(f"invalid config: cannot integrate {type(state).__name__}",
                          key="pde.formulation")
    state.check_admissible()
    trajectory = Trajectory()
    recorder = _Recorder(system, trajectory, state.t, u0)
    t0 = state.t
    problem = StepperProblem(
        rhs=system.rhs,
        prepare=system.prepare,
        validate=lambda u, t: system.validate(u, t0 + t),
        on_accept=lambda t, u: recorder.record(t0 + t, u),
        stiffness=system.stiffness,
    )
    LOGGER.info("PDE run: %s, T=%.3e, method=%s", label, T, options.method)
    final = run_integrator(problem, u0, T, options, trajectory, progress_callback, label)
    recorder.finish(t0 + T, final)
    return trajectory
