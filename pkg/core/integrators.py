"""
Time integrators shared by the discrete and continuum solvers

Integrators are set up to solve u' = F(u) where an approximate Jacobian W is
available for the stiff part. The default is a two-stage linearly implicit
W-method of order two (any W keeps the order); its first stage is a linearly
implicit Euler step that serves as the embedded solution for step-size control.
The explicit fallback drives scipy's RK45 step by step, and the "bdf" method
drives scipy's variable-order BDF with a finite-difference Jacobian for
long runs at tight tolerances.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional

import numpy as np
from scipy import integrate

from core.errors import ConfigError, IntegratorError, StepFlowError

LOGGER = logging.getLogger(__name__)

GAMMA = 1.0 + 1.0 / math.sqrt(2.0)
MIN_STEP = 1e-15
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
METHODS = ("imex", "explicit_adaptive", "bdf")

Solver = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IntegratorOptions:
    """
    Step-size control and recording options

    Args:
        method: "imex" (linearly implicit W-method), "explicit_adaptive" (RK45) or
            "bdf" (variable-order BDF)
        rtol, atol: Tolerances of the embedded error estimate, both in (0, 1)
        dt_max: Largest step
        collision_eps: Collision threshold as a fraction of a*L (discrete runs)
        dt_initial: First trial step (default: min(dt_max, T/1000))
        record_every: Record a snapshot every this many accepted steps
        record_energy: Evaluate the energy series at recorded snapshots
    """

    method: str = "imex"
    rtol: float = 1e-8
    atol: float = 1e-10
    dt_max: float = 1e-4
    collision_eps: float = 0.05
    dt_initial: Optional[float] = None
    record_every: int = 1
    record_energy: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"invalid config: method must be one of {METHODS}", key="method")
        for key in ("rtol", "atol"):
            value = getattr(self, key)
            if not 0.0 < value < 1.0:
                raise ConfigError(f"invalid config: {key}={value} must lie in (0, 1)", key=key)
        if not self.dt_max > 0.0:
            raise ConfigError(f"invalid config: dt_max={self.dt_max} must be positive", key="dt_max")
        if not 0.0 < self.collision_eps < 0.5:
            raise ConfigError(
                f"invalid config: collision_eps={self.collision_eps} must lie in (0, 0.5)",
                key="collision_eps")
        if self.record_every < 1:
            raise ConfigError("invalid config: record_every must be >= 1", key="record_every")


@dataclass(frozen=True)
class EnergyRecord:
    """Energy, dissipation rate D = -dE/dt and the discrete identity residual at time t"""

    t: float
    energy: float
    dissipation: float
    identity_residual: float


@dataclass
class Trajectory:
    """Recorded snapshots of a run; treated as immutable once returned"""

    times: List[float] = field(default_factory=list)
    states: List[Any] = field(default_factory=list)
    energy_series: List[EnergyRecord] = field(default_factory=list)
    accepted_steps: int = 0
    rejected_steps: int = 0

    @property
    def final(self) -> Any:
        return self.states[-1]

    def energies(self) -> np.ndarray:
        return np.array([record.energy for record in self.energy_series])


@dataclass
class StepperProblem:
    """
    What the drivers need to know about a system

    Args:
        rhs: F(u)
        prepare: Given (u, gamma*dt), returns a solver for (I - gamma*dt*W(u)) k = b
        validate: Raises a StepFlowError when an accepted state leaves the valid regime
        on_accept: Called with (t, u) after each accepted step
        stiffness: Estimate of ||J|| at u, used by the explicit fallback
    """

    rhs: Callable[[np.ndarray], np.ndarray]
    prepare: Callable[[np.ndarray, float], Solver]
    validate: Callable[[np.ndarray, float], None]
    on_accept: Callable[[float, np.ndarray], None]
    stiffness: Callable[[np.ndarray], float]


def _error_norm(error: np.ndarray, u_old: np.ndarray, u_new: np.ndarray,
                rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(u_old), np.abs(u_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


def _report(progress: Optional[Callable[[str, int], None]], label: str,
            t: float, T: float, last: List[int]):
    if progress is None:
        return
    percentage = int(100 * min(1.0, t / T))
    if percentage >= last[0] + 10 or percentage == 100 and last[0] < 100:
        last[0] = percentage
        progress(f"{label}: t = {t:.3e}", percentage)


def w_method_integrate(problem: StepperProblem, u0: np.ndarray, T: float,
                       options: IntegratorOptions, trajectory: Trajectory,
                       progress: Optional[Callable[[str, int], None]] = None,
                       label: str = "integrate") -> np.ndarray:
    """
    Integrate u' = F(u) on [0, T] with the two-stage W-method

    Stage equations with G = I - gamma*dt*W:
        G k1 = F(u)
        G k2 = F(u + dt*k1) - 2*k1
        u_new = u + dt*(1.5*k1 + 0.5*k2)
    The linearly implicit Euler solution u + dt*k1 is the embedded estimate.

    Args:
        problem: System callbacks
        u0: Initial state
        T: Final time
        options: Tolerances and step limits
        trajectory: Receives step counters; on_accept records snapshots
        progress: Optional progress callback(message, percentage)
        label: Name used in log messages

    Returns:
        The state at T
    """
    u = np.array(u0, dtype=float)
    t = 0.0
    dt = options.dt_initial or min(options.dt_max, T / 1000.0)
    last = [0]
    while t < T:
        dt = min(dt, options.dt_max, T - t)
        if dt < MIN_STEP and T - t > MIN_STEP:
            raise IntegratorError(f"step-size underflow at t={t:.6e} (dt={dt:.3e})",
                                  trajectory=trajectory, time=t)
        try:
            solve = problem.prepare(u, GAMMA * dt)
            k1 = solve(problem.rhs(u))
            stage = u + dt * k1
            k2 = solve(problem.rhs(stage) - 2.0 * k1)
        except (np.linalg.LinAlgError, RuntimeError, FloatingPointError) as exc:
            raise IntegratorError(f"singular implicit solve at t={t:.6e}: {exc}",
                                  trajectory=trajectory, time=t) from exc
        u_new = u + dt * (1.5 * k1 + 0.5 * k2)
        err = _error_norm(u_new - stage, u, u_new, options.rtol, options.atol)
        if not np.isfinite(err):
            trajectory.rejected_steps += 1
            LOGGER.debug("%s: non-finite step at t=%.6e, dt=%.3e", label, t, dt)
            dt *= MIN_FACTOR
            continue
        if err <= 1.0:
            t_new = T if T - (t + dt) <= MIN_STEP else t + dt
            problem.validate(u_new, t_new)
            t = t_new
            u = u_new
            trajectory.accepted_steps += 1
            problem.on_accept(t, u)
            _report(progress, label, t, T, last)
        else:
            trajectory.rejected_steps += 1
            LOGGER.debug("%s: rejected dt=%.3e at t=%.6e (err=%.3g)", label, dt, t, err)
        factor = SAFETY / math.sqrt(max(err, 1e-10))
        dt = dt * min(MAX_FACTOR, max(MIN_FACTOR, factor))
    LOGGER.info("%s: reached T=%.3e in %d steps (%d rejected)", label, T,
                trajectory.accepted_steps, trajectory.rejected_steps)
    return u


def explicit_integrate(problem: StepperProblem, u0: np.ndarray, T: float,
                       options: IntegratorOptions, trajectory: Trajectory,
                       progress: Optional[Callable[[str, int], None]] = None,
                       label: str = "integrate") -> np.ndarray:
    """
    Integrate with scipy's RK45, one accepted step at a time

    max_step is capped by 0.5/||J|| so the explicit pair stays inside its
    stability region.
    """
    u0 = np.array(u0, dtype=float)
    stiffness = problem.stiffness(u0)
    max_step = options.dt_max if stiffness <= 0 else min(options.dt_max, 0.5 / stiffness)
    LOGGER.info("%s: explicit RK45 with max_step=%.3e", label, max_step)
    solver = integrate.RK45(lambda _t, y: problem.rhs(y), 0.0, u0, T, max_step=max_step,
                            rtol=options.rtol, atol=options.atol,
                            first_step=min(max_step, options.dt_initial or max_step))
    last = [0]
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegratorError(f"step-size underflow at t={solver.t:.6e}: {message}",
                                  trajectory=trajectory, time=solver.t)
        u = np.array(solver.y)
        problem.validate(u, solver.t)
        trajectory.accepted_steps += 1
        problem.on_accept(solver.t, u)
        _report(progress, label, solver.t, T, last)
    return np.array(solver.y)


def bdf_integrate(problem: StepperProblem, u0: np.ndarray, T: float,
                  options: IntegratorOptions, trajectory: Trajectory,
                  progress: Optional[Callable[[str, int], None]] = None,
                  label: str = "integrate") -> np.ndarray:
    """
    Integrate with scipy's variable-order BDF, one accepted step at a time

    The Jacobian is formed by finite differences of F and reused by scipy
    until its Newton iteration stalls. Orders up to five keep the step count
    low when the tolerances are far below the W-method's comfortable range.
    """
    u0 = np.array(u0, dtype=float)
    solver = integrate.BDF(lambda _t, y: problem.rhs(y), 0.0, u0, T,
                           max_step=options.dt_max, rtol=options.rtol, atol=options.atol,
                           first_step=options.dt_initial)
    LOGGER.info("%s: BDF with rtol=%.1e, atol=%.1e", label, options.rtol, options.atol)
    last = [0]
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegratorError(f"step-size underflow at t={solver.t:.6e}: {message}",
                                  trajectory=trajectory, time=solver.t)
        u = np.array(solver.y)
        problem.validate(u, solver.t)
        trajectory.accepted_steps += 1
        problem.on_accept(solver.t, u)
        _report(progress, label, solver.t, T, last)
    LOGGER.info("%s: reached T=%.3e in %d steps (%d Jacobians)", label, T,
                trajectory.accepted_steps, solver.njev)
    return np.array(solver.y)


def run_integrator(problem: StepperProblem, u0: np.ndarray, T: float,
                   options: IntegratorOptions, trajectory: Trajectory,
                   progress: Optional[Callable[[str, int], None]] = None,
                   label: str = "integrate") -> np.ndarray:
    """Dispatch on options.method; integration errors keep the partial trajectory"""
    if not T > 0.0:
        raise ConfigError(f"invalid config: final time T={T} must be positive", key="T")
    driver = {"imex": w_method_integrate, "explicit_adaptive": explicit_integrate,
              "bdf": bdf_integrate}[options.method]
    try:
        return driver(problem, u0, T, options, trajectory, progress, label)
    except StepFlowError as exc:
        if hasattr(exc, "trajectory") and getattr(exc, "trajectory") is None:
            exc.trajectory = trajectory
        LOGGER.warning("%s aborted: %s", label, exc)
        raise
