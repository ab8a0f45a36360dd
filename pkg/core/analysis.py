"""
Discrete-to-continuum analysis

Consistency residuals of the discrete operators on samples of a smooth
step-location function, convergence studies of the step ODE against the
phi-form PDE, order fitting, and linear stability probes.
"""
import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from core import spectral
from core.continuum import PhiSystem, _hilbert, _mu_height, integrate_pde
from core.errors import FitError, GridSizeError, StepFlowError, StudyError
from core.geometry import (DomainParams, HeightProfile, PhiField, StepTrain, build_height_field,
                           height_to_phi, sample_step_train, step_train_to_height_profile)
from core.hilbert_quadrature import cot_pair_sums
from core.integrators import IntegratorOptions, StepperProblem, Trajectory, run_integrator
from core.mesoscopic import (DiscreteSystem, PotentialVariant, chemical_potential,
                             dissipation_rate, integrate_ode, local_jacobian, ode_jacobian,
                             ode_rhs)

LOGGER = logging.getLogger(__name__)

EPS = np.finfo(float).eps

# Minimum fitted order per family
ORDER_THRESHOLDS = {"I1": 3.5, "I2": 3.5, "I3": 3.5, "F": 1.5}
# Ablations must stay at or below these orders
ORDER_CEILINGS = {"I1_uncorrected": 1.5}
# Accepted convergence slopes per potential variant
SLOPE_BANDS = {PotentialVariant.STANDARD: (0.7, 1.3), PotentialVariant.CORRECTED: (1.6, 2.4)}

FAMILIES = ("I1", "I1_uncorrected", "I1_L2", "I2", "I2_uncorrected", "I3", "F", "F_L2",
            "energy_identity")


@dataclass(frozen=True)
class OrderFit:
    """Least-squares fit ln err = slope * ln a + intercept"""

    slope: float
    intercept: float
    r_squared: float


@dataclass(frozen=True)
class OrderEstimate:
    """
    Measured order of a residual family

    status is "fitted", "lower_bound" (part of the sweep hit the round-off
    floor), "exact" (every residual at the floor; order is inf) or
    "degenerate" (residuals do not decrease; order is nan).
    """

    order: float
    status: str
    fit: Optional[OrderFit] = None

    def meets(self, threshold: float) -> bool:
        return not math.isnan(self.order) and self.order >= threshold


@dataclass(frozen=True)
class CorrectionFields:
    """Correction fields v1, v2, v3 and r0 at the alpha nodes of a PhiField"""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    r0: np.ndarray


@dataclass(frozen=True)
class ConsistencyRecord:
    family: str
    N: int
    a: float
    residual: float


@dataclass(frozen=True)
class ConsistencyReport:
    """Residual sup-norms per family and N, with the measured orders"""

    N_sweep: Tuple[int, ...]
    records: Tuple[ConsistencyRecord, ...]
    orders: Dict[str, OrderEstimate] = field(default_factory=dict)

    def residuals(self, family: str) -> np.ndarray:
        return np.array([record.residual for record in self.records if record.family == family])

    def failures(self) -> List[str]:
        """Families whose measured order misses its threshold or ceiling"""
        failed = [family for family, threshold in ORDER_THRESHOLDS.items()
                  if not self.orders[family].meets(threshold)]
        failed += [family for family, ceiling in ORDER_CEILINGS.items()
                   if not self.orders[family].order <= ceiling]
        return failed

    @property
    def passed(self) -> bool:
        return not self.failures()


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    a: float
    error: float


@dataclass(frozen=True)
class ConvergenceTable:
    """
    Errors of an N-sweep and the fitted slope of ln error against ln a

    slope is None when the fit is skipped (fewer than three rows, or all
    errors at round-off level).
    """

    rows: Tuple[ConvergenceRow, ...]
    variant: str
    T: float
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None

    @property
    def errors(self) -> np.ndarray:
        return np.array([row.error for row in self.rows])

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0.0))


@dataclass(frozen=True)
class StabilityResult:
    """Largest ratio ||z(t)|| / ||z(0)|| seen at the recorded times"""

    growth_factor: float
    times: Tuple[float, ...] = ()
    ratios: Tuple[float, ...] = ()


def fit_order(pairs: Iterable[Tuple[float, float]]) -> OrderFit:
    """
    Fit err ~ C a^p by least squares in log-log coordinates

    Args:
        pairs: At least three (a, err) pairs, all positive

    Returns:
        OrderFit with slope p, intercept ln C and r^2
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise FitError(f"order fit needs at least 3 pairs, got {len(pairs)}")
    a, err = (np.array(column, dtype=float) for column in zip(*pairs))
    if np.any(~np.isfinite(a)) or np.any(~np.isfinite(err)) or np.any(a <= 0) or np.any(err <= 0):
        raise FitError("order fit needs positive finite values")
    x, y = np.log(a), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    residual = np.sum((y - (slope * x + intercept)) ** 2)
    total = np.sum((y - np.mean(y)) ** 2)
    r_squared = 1.0 if total <= 1e-30 else 1.0 - residual / total
    return OrderFit(float(slope), float(intercept), float(r_squared))


def measure_order(a_values: Sequence[float], residuals: Sequence[float],
                  floor: Union[float, Sequence[float]]) -> OrderEstimate:
    """
    Order of a residual family, ignoring residuals at the round-off floor

    With every residual above the floor this is the plain fit. When the finer
    grids reach the floor, the order is reported as a lower bound: the larger
    of the slope over the remaining points and the decay needed to reach the
    floor.
    """
    a = np.asarray(a_values, dtype=float)
    r = np.asarray(residuals, dtype=float)
    floors = np.broadcast_to(np.asarray(floor, dtype=float), r.shape)
    above = np.flatnonzero(r > floors)
    if above.size == 0:
        return OrderEstimate(math.inf, "exact")
    fit = None
    slope = -math.inf
    if above.size >= 3:
        fit = fit_order(zip(a[above], r[above]))
        slope = fit.slope
    elif above.size == 2:
        i, j = above
        slope = float(np.log(r[i] / r[j]) / np.log(a[i] / a[j]))
    if above.size == r.size:
        if slope <= 0.0:
            return OrderEstimate(math.nan, "degenerate", fit)
        return OrderEstimate(slope, "fitted", fit)
    below = np.flatnonzero(r <= floors)
    last = above[np.argmin(a[above])]
    finer = below[a[below] < a[last]]
    bound = -math.inf
    if finer.size:
        nearest = finer[np.argmax(a[finer])]
        bound = float(np.log(r[last] / floors[nearest]) / np.log(a[last] / a[nearest]))
    order = max(slope, bound)
    if not order > 0.0:
        return OrderEstimate(math.nan, "degenerate", fit)
    return OrderEstimate(order, "lower_bound", fit)


def weighted_l2_diff(x: Union[StepTrain, np.ndarray], phi_nodes: np.ndarray) -> float:
    """sqrt(sum_i a (x_i - phi_i)^2) with a = 1/N"""
    positions = np.asarray(x.x if isinstance(x, StepTrain) else x, dtype=float)
    phi_nodes = np.asarray(phi_nodes, dtype=float)
    if positions.shape != phi_nodes.shape:
        raise GridSizeError(f"grid size: length mismatch {positions.size} vs {phi_nodes.size}")
    return float(np.sqrt(np.sum((positions - phi_nodes) ** 2) / positions.size))


def _smoothed(phi: PhiField) -> PhiField:
    return phi.with_periodic_part(spectral.denoise(phi.q), phi.t)


def _v1(phi_alpha: np.ndarray, phi_alpha_alpha: np.ndarray, length: float) -> np.ndarray:
    return -phi_alpha_alpha / (length * phi_alpha ** 2)


def _r0(v1: np.ndarray, phi_alpha: np.ndarray, phi_alpha_alpha: np.ndarray) -> np.ndarray:
    v1 = spectral.denoise(v1)
    v1_alpha = spectral.derivative(v1, 1.0, 1)
    v1_alpha_alpha = spectral.derivative(v1, 1.0, 2)
    return v1_alpha * phi_alpha_alpha / phi_alpha ** 2 - v1_alpha_alpha / phi_alpha


def correction_fields(phi: PhiField, length: Optional[float] = None) -> CorrectionFields:
    """
    Correction fields of the discrete operators

        v1 = -phi_aa / (L phi_a^2)
        v2 = -phi_aaaa / (12 phi_a^2) + (phi_aa / phi_a^4) (phi_a phi_aaa / 3 - phi_aa^2 / 4)
        v3 = (-5/2 phi_aa^3 - 1/4 phi_a^2 phi_aaaa + 2 phi_a phi_aa phi_aaa) / phi_a^6
        r0 = v1_a phi_aa / phi_a^2 - v1_aa / phi_a

    Args:
        phi: Admissible step-location function
        length: Length used in v1 (defaults to phi.L; 2.0 gives the alternative reading)
    """
    phi.check_admissible()
    d1, d2, d3, d4 = (phi.derivative(order) for order in (1, 2, 3, 4))
    v1 = _v1(d1, d2, phi.L if length is None else length)
    v2 = -d4 / (12.0 * d1 ** 2) + (d2 / d1 ** 4) * (d1 * d3 / 3.0 - 0.25 * d2 ** 2)
    v3 = (-2.5 * d2 ** 3 - 0.25 * d1 ** 2 * d4 + 2.0 * d1 * d2 * d3) / d1 ** 6
    return CorrectionFields(v1, v2, v3, _r0(v1, d1, d2))


def _lattice_index(K: int, N: int) -> np.ndarray:
    """Grid indices of alpha_i = (N-i)/N, i = 1..N, on a K-point grid (K divisible by N)"""
    return (N - np.arange(1, N + 1)) * (K // N)


def _floors(N: int) -> Dict[str, float]:
    quadratic = 64.0 * EPS * N ** 2
    quartic = 64.0 * EPS * N ** 4
    return {"I1": 1e-11, "I1_uncorrected": 1e-11, "I1_L2": 1e-11,
            "I2": quadratic, "I2_uncorrected": quadratic, "I3": quadratic,
            "F": quartic, "F_L2": quartic, "energy_identity": quadratic}


class _ConsistencyTargets:
    """Continuum targets evaluated at arbitrary positions, from a height grid"""

    def __init__(self, profile: HeightProfile, L: float, M: int):
        h = build_height_field(profile, L, M)
        self.h = h
        self.L = L
        self.hilbert_h_x = spectral.denoise(_hilbert(spectral.derivative(h.p, L, 1)))
        mu = spectral.denoise(_mu_height(h.p, L))
        self.h_t = spectral.denoise(spectral.derivative(mu, L, 2))

    def at(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        h_x = self.h.evaluate(x, 1)
        h_xx = self.h.evaluate(x, 2)
        return {
            "nonlocal": -(2.0 * np.pi / self.L) * spectral.interpolate(self.hilbert_h_x, self.L, x),
            "I2": h_xx / h_x,
            "I3": 3.0 * h_xx * h_x,
            "phi_t": -spectral.interpolate(self.h_t, self.L, x) / h_x,
        }


def _consistency_residuals(phi: PhiField, fields: CorrectionFields, fields_L2: CorrectionFields,
                           targets: _ConsistencyTargets, N: int) -> List[ConsistencyRecord]:
    train = sample_step_train(phi, N)
    x = np.asarray(train.x)
    a = train.a
    L = train.L
    index = _lattice_index(phi.K, N)
    spacings = train.spacings
    previous = np.roll(spacings, 1)
    I1 = -(2.0 * a / L) * cot_pair_sums(x, L)
    I2 = 1.0 / spacings - 1.0 / previous
    I3 = a ** 2 * (1.0 / spacings ** 3 - 1.0 / previous ** 3)
    F = ode_rhs(train, PotentialVariant.STANDARD)
    target = targets.at(x)
    f_bar = chemical_potential(train, PotentialVariant.STANDARD)
    energy_rate = a * np.dot(f_bar, target["phi_t"])

    def sup(values: np.ndarray) -> float:
        return float(np.max(np.abs(values)))

    residuals = {
        "I1": sup(I1 - target["nonlocal"] - fields.v1[index] * a),
        "I1_uncorrected": sup(I1 - target["nonlocal"]),
        "I1_L2": sup(I1 - target["nonlocal"] - fields_L2.v1[index] * a),
        "I2": sup(I2 - target["I2"] - fields.v2[index] * a ** 2),
        "I2_uncorrected": sup(I2 - target["I2"]),
        "I3": sup(I3 - target["I3"] - fields.v3[index] * a ** 2),
        "F": sup(F - target["phi_t"] - fields.r0[index] * a),
        "F_L2": sup(F - target["phi_t"] - fields_L2.r0[index] * a),
        "energy_identity": abs(energy_rate + dissipation_rate(train, PotentialVariant.STANDARD)),
    }
    return [ConsistencyRecord(family, N, a, residuals[family]) for family in FAMILIES]


def _run_per_N(task: Callable[[int], object], N_sweep: Sequence[int], jobs: int) -> List[object]:
    """Run task(N) for every N, concurrently when jobs > 1; failures name the N"""

    def guarded(N: int):
        try:
            return task(N)
        except StepFlowError as exc:
            raise StudyError(f"sub-run failed for N={N}: {exc}", N=N, cause=exc) from exc

    if jobs <= 1 or len(N_sweep) <= 1:
        return [guarded(N) for N in N_sweep]
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(guarded, N_sweep))


def _check_sweep(N_sweep: Sequence[int], minimum: int) -> Tuple[int, ...]:
    sweep = tuple(sorted(int(N) for N in N_sweep))
    if not sweep:
        raise GridSizeError("grid size: empty N sweep")
    for N in sweep:
        spectral.require_power_of_two(N, minimum=minimum, name="N")
    return sweep


def consistency_report(profile: HeightProfile, N_sweep: Sequence[int], L: float = 1.0,
                       M: int = 128, jobs: int = 1,
                       progress_callback: Optional[Callable[[str, int], None]] = None
                       ) -> ConsistencyReport:
    """
    Consistency residuals of the discrete operators on samples of phi

    For each N the train x_i = phi((N-i)/N) is built and the discrete
    operators are compared with their continuum targets plus the correction
    fields; the residual sup-norms are fitted for their order.

    Args:
        profile: Test profile of the height
        N_sweep: Dyadic step counts, each >= 16
        L: Period length
        M: Height grid for the continuum targets
        jobs: Concurrent per-N evaluations
        progress_callback: Optional callback(message, percentage)

    Returns:
        ConsistencyReport
    """
    sweep = _check_sweep(N_sweep, 16)
    K = max(2 * sweep[-1], 64)
    targets = _ConsistencyTargets(profile, L, M)
    phi = _smoothed(height_to_phi(targets.h, K))
    fields = correction_fields(phi)
    fields_L2 = correction_fields(phi, length=2.0)
    if progress_callback:
        progress_callback("Consistency targets ready", 10)

    records: List[ConsistencyRecord] = []
    for chunk in _run_per_N(lambda N: _consistency_residuals(phi, fields, fields_L2, targets, N),
                            sweep, jobs):
        records.extend(chunk)
    if progress_callback:
        progress_callback("Residuals computed", 90)

    orders = {}
    a_values = [1.0 / N for N in sweep]
    for family in FAMILIES:
        residuals = [record.residual for record in records if record.family == family]
        floors = [_floors(N)[family] for N in sweep]
        orders[family] = measure_order(a_values, residuals, floors)
        LOGGER.info("consistency %s: order %.3g (%s)", family, orders[family].order,
                    orders[family].status)
    return ConsistencyReport(sweep, tuple(records), orders)


def _reference_options(options: IntegratorOptions) -> IntegratorOptions:
    return replace(options, method="bdf", rtol=max(options.rtol * 1e-2, 1e-13),
                   atol=max(options.atol * 1e-2, 1e-15), dt_initial=None,
                   record_every=10 ** 9, record_energy=False)


@functools.lru_cache(maxsize=4)
def _reference_run(profile: HeightProfile, L: float, K: int, T: float,
                   options: IntegratorOptions) -> PhiField:
    """Final phi-form state on K points; shared by every variant of a sweep"""
    phi0 = height_to_phi(build_height_field(profile, L, K), K)
    return integrate_pde(phi0, T, _reference_options(options)).final


def convergence_study(profile: HeightProfile, N_sweep: Sequence[int], T: float,
                      variant: PotentialVariant = PotentialVariant.STANDARD,
                      options: Optional[IntegratorOptions] = None, L: float = 1.0,
                      K: Optional[int] = None, jobs: int = 1,
                      progress_callback: Optional[Callable[[str, int], None]] = None
                      ) -> ConvergenceTable:
    """
    Weighted l2 distance at time T between the step ODE and the sampled phi-form PDE

    The ODE starts from x(0) = phi_N(0). The reference is a single phi-form BDF
    run on K >= 4 max(N) points with tolerances two orders tighter than the
    ODE's; it is cached, so sweeps over several variants integrate it once.

    Args:
        profile: Initial height profile
        N_sweep: Step counts (powers of two, >= 4)
        T: Final time
        variant: Potential variant of the ODE
        options: ODE integrator options
        L: Period length
        K: Minimum reference grid
        jobs: Concurrent ODE runs
        progress_callback: Optional callback(message, percentage)

    Returns:
        ConvergenceTable sorted by N

    Raises:
        StudyError: A sub-run failed; names the failing N
    """
    variant = PotentialVariant.parse(variant)
    options = options or IntegratorOptions()
    sweep = _check_sweep(N_sweep, 4)
    K_ref = max(K or 0, 4 * sweep[-1], 16)
    K_ref = 1 << (K_ref - 1).bit_length()
    h0 = build_height_field(profile, L, K_ref)
    phi0 = height_to_phi(h0, K_ref)

    if progress_callback:
        progress_callback(f"Reference run on K={K_ref}", 5)
    try:
        reference = _reference_run(profile, L, K_ref, T, options)
    except StepFlowError as exc:
        raise StudyError(f"reference run failed: {exc}", N=None, cause=exc) from exc

    ode_options = replace(options, record_every=10 ** 9, record_energy=False)

    def run(N: int) -> ConvergenceRow:
        trajectory = integrate_ode(sample_step_train(phi0, N), T, ode_options, variant)
        nodes = reference.values[_lattice_index(K_ref, N)]
        error = weighted_l2_diff(trajectory.final, nodes)
        LOGGER.info("convergence N=%d: error %.6e", N, error)
        if progress_callback:
            progress_callback(f"N={N}: error {error:.3e}", 50)
        return ConvergenceRow(N, 1.0 / N, error)

    rows = tuple(_run_per_N(run, sweep, jobs))
    table = ConvergenceTable(rows, variant.value, T)
    errors = table.errors
    if len(rows) < 3 or np.max(errors) <= 1e-12:
        LOGGER.info("convergence: slope fit skipped")
        return table
    fit = fit_order((row.a, row.error) for row in rows)
    LOGGER.info("convergence %s: slope %.3f (r^2 %.4f)", variant.value, fit.slope, fit.r_squared)
    return replace(table, slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)


def height_profile_error(profile: HeightProfile, N_sweep: Sequence[int], L: float = 1.0,
                         K: Optional[int] = None, samples: int = 4096) -> ConvergenceTable:
    """
    sup |h_N - h| on a fine grid for trains sampled from phi

    The error is at most a per sample, so the fitted slope is about one.
    """
    sweep = _check_sweep(N_sweep, 4)
    K = K or max(4 * sweep[-1], 64)
    h = build_height_field(profile, L, max(K, 16))
    phi = height_to_phi(h, K)
    x = np.arange(samples) * (L / samples)
    exact = h.evaluate(x)
    rows = []
    for N in sweep:
        staircase = step_train_to_height_profile(sample_step_train(phi, N))
        rows.append(ConvergenceRow(N, 1.0 / N, float(np.max(np.abs(staircase(x) - exact)))))
    table = ConvergenceTable(tuple(rows), "sampled", 0.0)
    if len(rows) < 3:
        return table
    fit = fit_order((row.a, row.error) for row in rows)
    return replace(table, slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)


def jacobian_spectral_abscissa(train: StepTrain,
                               variant: PotentialVariant = PotentialVariant.STANDARD
                               ) -> Tuple[float, float]:
    """Largest real part of the ODE Jacobian eigenvalues, and max |J_ij| for scale"""
    jacobian = ode_jacobian(train, variant)
    eigenvalues = linalg.eigvals(jacobian)
    return float(np.max(eigenvalues.real)), float(np.max(np.abs(jacobian)))


def _weighted_norm(z: np.ndarray) -> float:
    return float(np.sqrt(np.mean(z ** 2)))


def _ratios_recorder(size: int, norm: Callable[[np.ndarray], float], initial: float,
                     times: List[float], ratios: List[float]):
    def on_accept(t: float, u: np.ndarray):
        times.append(t)
        ratios.append(norm(u[size:]) / initial)
    return on_accept


def stability_probe(base: StepTrain, z0: np.ndarray, T: float,
                    variant: PotentialVariant = PotentialVariant.STANDARD,
                    options: Optional[IntegratorOptions] = None) -> StabilityResult:
    """
    Growth of a perturbation under the ODE linearised along the base trajectory

    The state [x; z] follows x' = F(x), z' = J(x) z with J z from central
    differences of F in the direction z.

    Args:
        base: Valid base train
        z0: Initial perturbation (length N)
        T: Time horizon
        variant: Potential variant
        options: Integrator options

    Returns:
        StabilityResult; the growth factor of a zero perturbation is 1
    """
    variant = PotentialVariant.parse(variant)
    options = options or IntegratorOptions()
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (base.N,):
        raise GridSizeError(f"grid size: perturbation has {z0.size} entries, N={base.N}")
    norm = _weighted_norm
    initial = norm(z0)
    if initial == 0.0:
        return StabilityResult(1.0, (base.t,), (1.0,))

    system = DiscreteSystem(base, variant, options)
    N = base.N
    scale = 1e-5 * base.a * base.L

    def rhs(u: np.ndarray) -> np.ndarray:
        x, z = u[:N], u[N:]
        size = np.max(np.abs(z))
        if size == 0.0:
            return np.concatenate([system.rhs(x), np.zeros(N)])
        eps = scale / size
        action = (system.rhs(x + eps * z) - system.rhs(x - eps * z)) / (2.0 * eps)
        return np.concatenate([system.rhs(x), action])

    def prepare(u: np.ndarray, gamma_dt: float):
        W = local_jacobian(u[:N], base.L, base.a, system.coefficient)
        block = sparse.block_diag([W, W], format="csc")
        return sparse_linalg.splu((sparse.identity(2 * N, format="csc") - gamma_dt * block).tocsc()).solve

    times: List[float] = [base.t]
    ratios: List[float] = [1.0]
    on_accept = _ratios_recorder(N, norm, initial, times, ratios)
    problem = StepperProblem(
        rhs=rhs,
        prepare=prepare,
        validate=lambda u, t: system.validate(u[:N], base.t + t),
        on_accept=lambda t, u: on_accept(base.t + t, u),
        stiffness=lambda u: system.stiffness(u[:N]),
    )
    u0 = np.concatenate([np.asarray(base.x), z0])
    run_integrator(problem, u0, T, replace(options, record_energy=False), Trajectory(),
                   label=f"stability N={N}")
    growth = float(np.max(ratios))
    LOGGER.info("stability probe N=%d: growth factor %.6g", N, growth)
    return StabilityResult(growth, tuple(times), tuple(ratios))


def pde_stability_probe(phi: PhiField, psi0: np.ndarray, T: float,
                        options: Optional[IntegratorOptions] = None) -> StabilityResult:
    """Growth of a perturbation of the phi-form PDE linearised along the base solution"""
    options = options or IntegratorOptions(rtol=1e-8, atol=1e-10)
    phi.check_admissible()
    psi0 = np.asarray(psi0, dtype=float)
    if psi0.shape != (phi.K,):
        raise GridSizeError(f"grid size: perturbation has {psi0.size} entries, K={phi.K}")
    norm = _weighted_norm
    initial = norm(psi0)
    if initial == 0.0:
        return StabilityResult(1.0, (phi.t,), (1.0,))

    system = PhiSystem(phi, options)
    K = phi.K
    scale = 1e-6 * phi.L

    def rhs(u: np.ndarray) -> np.ndarray:
        q, psi = u[:K], u[K:]
        base = system.rhs(q)
        size = np.max(np.abs(psi))
        if size == 0.0:
            return np.concatenate([base, np.zeros(K)])
        eps = scale / size
        action = (system.rhs(q + eps * psi) - system.rhs(q - eps * psi)) / (2.0 * eps)
        return np.concatenate([base, action])

    def prepare(u: np.ndarray, gamma_dt: float):
        solve = system.prepare(u[:K], gamma_dt)
        return lambda b: np.concatenate([solve(b[:K]), solve(b[K:])])

    times: List[float] = [phi.t]
    ratios: List[float] = [1.0]
    on_accept = _ratios_recorder(K, norm, initial, times, ratios)
    problem = StepperProblem(
        rhs=rhs,
        prepare=prepare,
        validate=lambda u, t: system.validate(u[:K], phi.t + t),
        on_accept=lambda t, u: on_accept(phi.t + t, u),
        stiffness=lambda u: system.stiffness(u[:K]),
    )
    u0 = np.concatenate([np.asarray(phi.q), psi0])
    run_integrator(problem, u0, T, replace(options, record_energy=False), Trajectory(),
                   label=f"pde stability K={K}")
    growth = float(np.max(ratios))
    LOGGER.info("PDE stability probe K=%d: growth factor %.6g", K, growth)
    return StabilityResult(growth, tuple(times), tuple(ratios))


def uniform_train(N: int, L: float = 1.0) -> StepTrain:
    """Equally spaced train x_i = (i-1) L / N"""
    return StepTrain(DomainParams(L=L, N=N), np.arange(N) * (L / N))
