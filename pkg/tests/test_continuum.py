"""
Tests for the continuum equations, their energies and the PDE solver
"""
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core import spectral
from core.continuum import (energy_bundle, height_dissipation_rate, height_energy,
                            height_energy_bar, height_rhs, integrate_pde, mu_of_height,
                            mu_of_phi, null_lagrangian, phi_dissipation_rate, phi_energy,
                            phi_rhs)
from core.errors import ConfigError, MonotonicityLostError
from core.geometry import (DomainParams, HeightField, HeightProfile, StepTrain,
                           build_height_field, height_to_phi, phi_to_height)


def profile_field(A=0.2, L=1.0, M=128, k=1):
    return build_height_field(HeightProfile(A=A, k=k), L, M)


def test_flat_surface_is_steady():
    h = profile_field(A=0.0)
    assert np.max(np.abs(mu_of_height(h))) == 0.0
    assert np.max(np.abs(height_rhs(h))) == 0.0
    phi = height_to_phi(h, 64)
    assert np.max(np.abs(mu_of_phi(phi))) <= 1e-10
    assert np.max(np.abs(phi_rhs(phi))) <= 1e-6


def test_height_rhs_conserves_mean():
    h = profile_field(A=0.5, k=2)
    rhs = height_rhs(h)
    assert abs(np.mean(rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_mu_is_energy_variation():
    """dE_h(h + eps*g)/d eps at 0 equals int mu g dx"""
    h = profile_field(A=0.3)
    x = h.nodes
    g = np.cos(2.0 * np.pi * x) + 0.5 * np.sin(4.0 * np.pi * x) - 0.2 * np.cos(6.0 * np.pi * x)
    eps = 1e-6
    plus = height_energy(h.with_periodic_part(h.p + eps * g, 0.0))
    minus = height_energy(h.with_periodic_part(h.p - eps * g, 0.0))
    derivative = (plus - minus) / (2.0 * eps)
    expected = h.L * np.mean(mu_of_height(h) * g)
    assert derivative == pytest.approx(expected, rel=1e-4)


def test_mu_phi_is_energy_variation():
    """dE_phi(phi + eps*psi)/d eps at 0 equals int mu_phi psi d alpha"""
    phi = height_to_phi(profile_field(A=0.3, M=128), 128)
    alpha = phi.nodes
    psi = (0.01 * np.cos(2.0 * np.pi * alpha) + 0.005 * np.sin(4.0 * np.pi * alpha)
           - 0.002 * np.cos(6.0 * np.pi * alpha))
    eps = 1e-6
    plus = phi_energy(phi.with_periodic_part(phi.q + eps * psi, 0.0))
    minus = phi_energy(phi.with_periodic_part(phi.q - eps * psi, 0.0))
    derivative = (plus - minus) / (2.0 * eps)
    expected = np.mean(mu_of_phi(phi) * psi)
    assert derivative == pytest.approx(expected, rel=1e-4)



@pytest.mark.parametrize("L", [1.0, 1.5])
def test_flat_energy_closed_form(L):
    h = profile_field(A=0.0, L=L, M=32)
    expected = -np.log(2.0) / L - np.log(L) + 0.5 / L ** 2
    assert height_energy(h) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("L", [1.0, 2.0])
def test_null_lagrangian_is_constant(L):
    h = profile_field(A=0.4, L=L, M=64)
    assert null_lagrangian(h) == pytest.approx(np.log(2.0) / L, abs=1e-12)


def test_null_lagrangian_ignores_periodic_perturbations():
    h = profile_field(A=0.2, M=64)
    rng = np.random.default_rng(7)
    x = h.nodes
    for _ in range(5):
        c = rng.normal(size=4) * 0.02
        g = sum(c[m] * np.sin(2.0 * np.pi * (m + 1) * x + m) for m in range(4))
        perturbed = h.with_periodic_part(h.p + g, 0.0)
        assert abs(null_lagrangian(perturbed) - null_lagrangian(h)) <= 1e-10


def test_energy_bundle_identities():
    bundle = energy_bundle(profile_field(M=256), 256)
    assert bundle.W == pytest.approx(np.log(2.0), abs=1e-12)
    assert bundle.cross_residuals["E_h-(E_h_bar-W)"] <= 1e-5
    assert bundle.cross_residuals["E_h-E_phi"] <= 1e-5
    assert bundle.cross_residuals["E_h-E_rho"] <= 1e-12
    assert bundle.cross_residuals["E_h-E_u"] <= 1e-10
    assert bundle.E_h_bar - bundle.W == pytest.approx(bundle.E_h, abs=1e-5)


def test_phi_energy_of_flat_surface():
    h = profile_field(A=0.0, M=32)
    assert phi_energy(height_to_phi(h, 32)) == pytest.approx(height_energy(h), abs=1e-10)
    assert height_energy_bar(h) - null_lagrangian(h) == pytest.approx(height_energy(h), abs=1e-12)


def test_phi_form_matches_height_form():
    """mu and the velocity agree across formulations: phi_t = -h_t/h_x at x = phi"""
    h = profile_field(M=128)
    phi = height_to_phi(h, 128)
    mu_h = spectral.interpolate(mu_of_height(h), h.L, phi.values)
    assert np.max(np.abs(mu_of_phi(phi) - mu_h)) <= 1e-6 * max(1.0, np.max(np.abs(mu_h)))
    h_t = spectral.interpolate(height_rhs(h), h.L, phi.values)
    h_x = h.evaluate(phi.values, 1)
    expected = -h_t / h_x
    assert np.max(np.abs(phi_rhs(phi) - expected)) <= 1e-5 * np.max(np.abs(expected))


def test_dissipation_rates_agree():
    h = profile_field(M=128)
    phi = height_to_phi(h, 128)
    D = height_dissipation_rate(h)
    assert D > 0.0
    assert phi_dissipation_rate(phi) < 0.0
    assert -phi_dissipation_rate(phi) == pytest.approx(D, rel=1e-6)


def test_monotonicity_required():
    x = np.arange(32) / 32
    h = HeightField(DomainParams(1.0), 1.5 / (2 * np.pi) * np.sin(2 * np.pi * x))
    with pytest.raises(MonotonicityLostError, match="monotonicity lost"):
        mu_of_height(h)
    with pytest.raises(MonotonicityLostError):
        height_energy(h)


def test_height_run_dissipates_and_conserves_mean():
    h = profile_field(M=64)
    trajectory = integrate_pde(h, 2e-4)
    energies = trajectory.energies()
    assert trajectory.times[-1] == pytest.approx(2e-4)
    assert np.all(np.diff(energies) <= 1e-10 * np.abs(energies[:-1]))
    assert energies[-1] < energies[0]
    means = [np.mean(state.p) for state in trajectory.states]
    assert np.max(np.abs(np.array(means) - means[0])) <= 1e-12
    assert all(state.is_admissible() for state in trajectory.states)
    dissipation = max(record.dissipation for record in trajectory.energy_series)
    residuals = [abs(record.identity_residual) for record in trajectory.energy_series]
    assert max(residuals) <= 1e-2 * dissipation


def test_phi_run_agrees_with_height_run():
    h = profile_field(M=64)
    height_final = integrate_pde(h, 2e-4).final
    phi_trajectory = integrate_pde(height_to_phi(h, 64), 2e-4)
    phi_final = phi_trajectory.final
    means = [np.mean(state.q) for state in phi_trajectory.states]
    assert np.max(np.abs(np.array(means) - means[0])) <= 1e-12
    energies = phi_trajectory.energies()
    assert np.all(np.diff(energies) <= 1e-10 * np.abs(energies[:-1]))
    assert np.max(np.abs(phi_to_height(phi_final, 64).p - height_final.p)) <= 1e-3


def test_flat_run_stays_flat():
    trajectory = integrate_pde(profile_field(A=0.0, M=32), 1e-5)
    assert np.max(np.abs(trajectory.final.p)) == 0.0


def test_inadmissible_initial_state():
    x = np.arange(32) / 32
    h = HeightField(DomainParams(1.0), 0.2 / (2 * np.pi) * np.sin(2 * np.pi * x), beta=-2.0)
    with pytest.raises(MonotonicityLostError):
        integrate_pde(h, 1e-5)


def test_integrate_pde_rejects_other_states():
    train = StepTrain(DomainParams(1.0), np.arange(4) / 4)
    with pytest.raises(ConfigError):
        integrate_pde(train, 1e-5)
