"""
Invariant suites run by the selftest command

Each suite checks one family of properties of the library on small,
fast configurations and returns a SuiteResult; run_suites collects them.
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core import analysis, continuum, mesoscopic
from core.errors import AcceptanceError, StepFlowError
from core.geometry import (DomainParams, HeightProfile, StepTrain, build_height_field,
                           height_to_phi, sample_step_train)
from core.hilbert_quadrature import (PeriodicSamples, hilbert_pv_direct_samples,
                                     hilbert_spectral, pv_cot_grid_corrected)
from core.integrators import IntegratorOptions
from core.mesoscopic import PotentialVariant

LOGGER = logging.getLogger(__name__)

QUADRATURE_FLOOR = 1e-9


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str
    runtime_seconds: float


@dataclass(frozen=True)
class SuiteSettings:
    """Profile and seed shared by the suites"""

    profile: HeightProfile = HeightProfile()
    L: float = 1.0
    seed: int = 0


def _random_train(rng: np.random.Generator, N: int, L: float) -> StepTrain:
    jitter = rng.uniform(-0.25, 0.25, N) * (L / N)
    return StepTrain(DomainParams(L=L, N=N), np.arange(N) * (L / N) + jitter)


def gradient_structure(settings: SuiteSettings) -> Tuple[bool, str]:
    """f = (1/a) grad E^N against central differences of the discrete energy"""
    rng = np.random.default_rng(settings.seed)
    worst = 0.0
    for N in (8, 16, 32):
        for _ in range(20):
            train = _random_train(rng, N, settings.L)
            potential = mesoscopic.chemical_potential(train)
            step = 1e-6 * train.a * train.L
            gradient = np.empty(N)
            for i in range(N):
                shift = np.zeros(N)
                shift[i] = step
                gradient[i] = (mesoscopic.discrete_energy(train.moved(train.x + shift, 0.0))
                               - mesoscopic.discrete_energy(train.moved(train.x - shift, 0.0))
                               ) / (2.0 * step)
            mismatch = np.max(np.abs(gradient / train.a - potential)) / np.max(np.abs(potential))
            worst = max(worst, float(mismatch))
    return worst <= 1e-6, f"max relative mismatch {worst:.3e}"


def uniform_steady_state(settings: SuiteSettings) -> Tuple[bool, str]:
    worst_rhs = 0.0
    worst_dissipation = 0.0
    for N in (8, 16, 32, 64, 128, 256):
        train = analysis.uniform_train(N, settings.L)
        for variant in (PotentialVariant.STANDARD, PotentialVariant.CORRECTED):
            worst_rhs = max(worst_rhs, float(np.max(np.abs(mesoscopic.ode_rhs(train, variant)))))
            worst_dissipation = max(worst_dissipation,
                                    abs(mesoscopic.dissipation_rate(train, variant)))
    passed = worst_rhs <= 1e-10 and worst_dissipation <= 1e-20
    return passed, f"max |rhs| {worst_rhs:.3e}, max D {worst_dissipation:.3e}"


def energy_dissipation(settings: SuiteSettings) -> Tuple[bool, str]:
    """E^N non-increasing along an ODE run and the discrete identity residual small"""
    phi = height_to_phi(build_height_field(settings.profile, settings.L, 128), 128)
    train = sample_step_train(phi, 32)
    trajectory = mesoscopic.integrate_ode(train, 1e-3, IntegratorOptions())
    energies = trajectory.energies()
    increases = float(np.max(np.diff(energies), initial=0.0)) / max(1.0, np.max(np.abs(energies)))
    worst = max((abs(record.identity_residual) / max(abs(record.dissipation), 1.0)
                 for record in trajectory.energy_series[1:]), default=0.0)
    passed = increases <= 1e-12 and worst <= 1e-2
    return passed, (f"{trajectory.accepted_steps} steps, largest energy increase {increases:.3e}, "
                    f"identity residual {worst:.3e}")


def quadrature_order(settings: SuiteSettings) -> Tuple[bool, str]:
    """Corrected cotangent grid sum against the adaptive principal-value oracle"""
    h = build_height_field(settings.profile, settings.L, 128)
    sweep = (32, 64, 128, 256)
    phi = height_to_phi(h, 2 * sweep[-1])
    corrected, plain = [], []
    for N in sweep:
        nodes = np.unique(np.linspace(1, N, 8).astype(int))
        x = phi.evaluate((N - nodes) / N)
        oracle = -np.pi * hilbert_pv_direct_samples(lambda y: float(h.evaluate(y, 1)), x, h.L)
        corrected.append(float(np.max(np.abs(pv_cot_grid_corrected(phi, nodes, N) - oracle))))
        plain.append(float(np.max(np.abs(
            pv_cot_grid_corrected(phi, nodes, N, corrected=False) - oracle))))
    a_values = [1.0 / N for N in sweep]
    order = analysis.measure_order(a_values, corrected, QUADRATURE_FLOOR)
    ablation = analysis.measure_order(a_values, plain, QUADRATURE_FLOOR)
    passed = order.meets(3.5) and ablation.order <= 1.5
    return passed, (f"corrected order {order.order:.3g} ({order.status}), "
                    f"uncorrected order {ablation.order:.3g}")


def consistency_orders(settings: SuiteSettings) -> Tuple[bool, str]:
    report = analysis.consistency_report(settings.profile, (32, 64, 128, 256), settings.L)
    detail = ", ".join(f"{family} {estimate.order:.3g}"
                       for family, estimate in report.orders.items())
    return report.passed, detail


def energy_identities(settings: SuiteSettings) -> Tuple[bool, str]:
    h = build_height_field(settings.profile, settings.L, 256)
    bundle = continuum.energy_bundle(h, 256)
    W_error = abs(bundle.W - np.log(2.0) / settings.L)
    residuals = bundle.cross_residuals
    passed = (W_error <= 1e-6 and residuals["E_h-(E_h_bar-W)"] <= 1e-6
              and residuals["E_h-E_phi"] <= 1e-5 and residuals["E_h-E_rho"] <= 1e-5
              and residuals["E_h-E_u"] <= 1e-5)
    detail = ", ".join(f"{key} {value:.2e}" for key, value in residuals.items())
    return passed, f"W error {W_error:.2e}, {detail}"


def hilbert_cross_check(settings: SuiteSettings) -> Tuple[bool, str]:
    rng = np.random.default_rng(settings.seed)
    L = settings.L
    M = 64
    x = np.arange(M) * (L / M)
    modes = np.arange(1, 9)
    cosines, sines = rng.normal(size=8), rng.normal(size=8)

    def u(y):
        phase = 2.0 * np.pi * np.multiply.outer(np.asarray(y, dtype=float), modes) / L
        return np.cos(phase) @ cosines + np.sin(phase) @ sines

    samples = PeriodicSamples(L, u(x) + rng.normal())
    spectral_values = hilbert_spectral(samples).values
    direct = hilbert_pv_direct_samples(lambda y: float(u(y)), x, L)
    cross = float(np.max(np.abs(spectral_values - direct)))
    constant = float(np.max(np.abs(hilbert_spectral(PeriodicSamples(L, np.full(M, 3.0))).values)))
    twice = hilbert_spectral(hilbert_spectral(samples)).values
    square = float(np.max(np.abs(twice + samples.values - np.mean(samples.values))))
    passed = cross <= 1e-8 and constant <= 1e-12 and square <= 1e-10
    return passed, f"spectral vs direct {cross:.2e}, H(const) {constant:.2e}, H^2 {square:.2e}"


def pde_invariants(settings: SuiteSettings) -> Tuple[bool, str]:
    T = 1e-3
    h0 = build_height_field(settings.profile, settings.L, 128)
    phi0 = height_to_phi(h0, 128)
    options = IntegratorOptions(rtol=1e-8, atol=1e-10, record_every=5)
    h_run = continuum.integrate_pde(h0, T, options)
    phi_run = continuum.integrate_pde(phi0, T, options)
    drift = max(abs(np.mean(h_run.final.p) - np.mean(h0.p)),
                abs(np.mean(phi_run.final.q) - np.mean(phi0.q)))
    admissible = all(state.is_admissible() for state in h_run.states)
    increases = max(float(np.max(np.diff(run.energies()), initial=0.0))
                    / max(1.0, float(np.max(np.abs(run.energies()))))
                    for run in (h_run, phi_run))
    agreement = float(np.max(np.abs(height_to_phi(h_run.final, 128).values
                                    - phi_run.final.values)))
    passed = drift <= 1e-8 and admissible and increases <= 1e-12 and agreement <= 1e-3
    return passed, (f"mean drift {drift:.2e}, admissible {admissible}, "
                    f"largest energy increase {increases:.2e}, h/phi agreement {agreement:.2e}")


def stability_probes(settings: SuiteSettings) -> Tuple[bool, str]:
    abscissa, scale = analysis.jacobian_spectral_abscissa(analysis.uniform_train(32, settings.L))
    phi = height_to_phi(build_height_field(settings.profile, settings.L, 128), 128)
    base = sample_step_train(phi, 32)
    rng = np.random.default_rng(settings.seed)
    z0 = rng.normal(size=32)
    z0 -= np.mean(z0)
    probe = analysis.stability_probe(base, 1e-3 * z0, 1e-3)
    coarse = height_to_phi(build_height_field(settings.profile, settings.L, 64), 64)
    alpha = coarse.nodes
    psi0 = 1e-3 * (np.sin(2.0 * np.pi * alpha) + np.cos(4.0 * np.pi * alpha))
    pde_result = analysis.pde_stability_probe(coarse, psi0, 1e-5)
    passed = (abscissa <= 1e-6 * scale and np.isfinite(probe.growth_factor)
              and np.isfinite(pde_result.growth_factor))
    return passed, (f"abscissa {abscissa:.3e} (scale {scale:.3e}), "
                    f"growth {probe.growth_factor:.4g}, PDE growth {pde_result.growth_factor:.4g}")


def convergence_trend(settings: SuiteSettings) -> Tuple[bool, str]:
    """Short convergence sweep: errors fall with N and both slopes sit in their bands"""
    passed, parts = True, []
    for variant, (low, high) in analysis.SLOPE_BANDS.items():
        table = analysis.convergence_study(settings.profile, (16, 32, 64), 1e-4, variant,
                                           L=settings.L)
        slope = float("nan") if table.slope is None else table.slope
        passed = passed and table.monotone and low <= slope <= high
        errors = ", ".join(f"{row.error:.3e}" for row in table.rows)
        parts.append(f"{variant.value}: slope {slope:.3f} in [{low}, {high}] ({errors})")
    return passed, "; ".join(parts)



SUITES: Dict[str, Callable[[SuiteSettings], Tuple[bool, str]]] = {
    "gradient_structure": gradient_structure,
    "uniform_steady_state": uniform_steady_state,
    "energy_dissipation": energy_dissipation,
    "quadrature_order": quadrature_order,
    "consistency_orders": consistency_orders,
    "energy_identities": energy_identities,
    "hilbert_cross_check": hilbert_cross_check,
    "pde_invariants": pde_invariants,
    "stability_probes": stability_probes,
    "convergence_trend": convergence_trend,
}


def run_suites(settings: Optional[SuiteSettings] = None, names: Optional[Sequence[str]] = None,
               progress_callback: Optional[Callable[[str, int], None]] = None
               ) -> List[SuiteResult]:
    """
    Run the named suites (all by default)

    A suite that raises a StepFlowError is recorded as failed with the error message.
    """
    settings = settings or SuiteSettings()
    names = list(names or SUITES)
    results = []
    for count, name in enumerate(names):
        start = time.perf_counter()
        try:
            passed, detail = SUITES[name](settings)
        except StepFlowError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        runtime = time.perf_counter() - start
        level = logging.INFO if passed else logging.WARNING
        LOGGER.log(level, "suite %s %s in %.1fs: %s", name, "passed" if passed else "FAILED",
                   runtime, detail)
        results.append(SuiteResult(name, bool(passed), detail, runtime))
        if progress_callback:
            progress_callback(f"{name}: {'passed' if passed else 'failed'}",
                              int(100 * (count + 1) / len(names)))
    return results


def require_all(results: Sequence[SuiteResult]):
    failed = [result.name for result in results if not result.passed]
    if failed:
        raise AcceptanceError(f"acceptance check failed: {', '.join(failed)}", suites=failed)
