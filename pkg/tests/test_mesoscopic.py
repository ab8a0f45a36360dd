"""
Tests for the discrete step-flow model
"""
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core.errors import ConfigError, StepCollisionError
from core.geometry import DomainParams, HeightProfile, StepTrain, build_height_field, height_to_phi, sample_step_train
from core.integrators import IntegratorOptions
from core.mesoscopic import (PotentialVariant, chemical_potential, discrete_energy,
                             dissipation_rate, integrate_ode, local_jacobian, ode_jacobian,
                             ode_rhs, _local_rhs)

VARIANTS = list(PotentialVariant)


def uniform(N, L=1.0):
    return StepTrain(DomainParams(L=L), np.arange(N) * (L / N))


def jittered(N, seed, L=1.0, amplitude=0.2):
    rng = np.random.default_rng(seed)
    x = (np.arange(N) + amplitude * rng.uniform(-1.0, 1.0, N)) * (L / N)
    return StepTrain(DomainParams(L=L), x)


def sampled(N, A=0.2):
    phi = height_to_phi(build_height_field(HeightProfile(A=A), 1.0, 128), 128)
    return sample_step_train(phi, N)


def test_variant_coefficients():
    assert PotentialVariant.STANDARD.coefficient(0.1, 2.0) == 1.0
    assert PotentialVariant.CORRECTED.coefficient(0.1, 2.0) == pytest.approx(0.95)
    assert PotentialVariant.CORRECTED_LITERAL.coefficient(0.1, 2.0) == pytest.approx(0.95)
    assert PotentialVariant.CORRECTED_LITERAL.coefficient(0.1, 1.0) == pytest.approx(0.95)
    assert PotentialVariant.CORRECTED.coefficient(0.1, 1.0) == pytest.approx(0.9)
    assert PotentialVariant.parse("corrected") is PotentialVariant.CORRECTED


def test_corrected_variants_agree_on_period_two():
    train = jittered(8, 3, L=2.0)
    assert np.array_equal(chemical_potential(train, PotentialVariant.CORRECTED),
                          chemical_potential(train, PotentialVariant.CORRECTED_LITERAL))
    unit = jittered(8, 3)
    difference = (chemical_potential(unit, PotentialVariant.CORRECTED)
                  - chemical_potential(unit, PotentialVariant.CORRECTED_LITERAL))
    assert np.max(np.abs(difference)) > 1e-3



def test_unknown_variant():
    with pytest.raises(ConfigError) as info:
        PotentialVariant.parse("bogus")
    assert info.value.key == "ode.variant"


@pytest.mark.parametrize("N,L", [(2, 1.0), (8, 1.0), (16, 2.0)])
def test_uniform_energy_closed_form(N, L):
    """E^N of a uniform train: (a/L) ln(N/2^(N-1)) - ln L + 1/(2L^2)"""
    a = 1.0 / N
    expected = (a / L) * (np.log(N) - (N - 1) * np.log(2.0)) - np.log(L) + 0.5 / L ** 2
    assert discrete_energy(uniform(N, L)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("N", [8, 32, 256])
def test_uniform_train_is_steady(N, variant):
    train = uniform(N)
    assert np.max(np.abs(ode_rhs(train, variant))) <= 1e-10
    assert dissipation_rate(train, variant) <= 1e-20


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_potential_is_energy_gradient(variant, seed):
    """f_i = (1/a) dE^N/dx_i, checked by central differences"""
    train = jittered(16, seed)
    x = np.asarray(train.x)
    step = 1e-6 * train.a * train.L
    gradient = np.empty(x.size)
    for i in range(x.size):
        shift = np.zeros_like(x)
        shift[i] = step
        gradient[i] = (discrete_energy(train.moved(x + shift, 0.0), variant)
                       - discrete_energy(train.moved(x - shift, 0.0), variant)) / (2.0 * step)
    f = chemical_potential(train, variant)
    assert np.max(np.abs(gradient / train.a - f)) <= 1e-6 * np.max(np.abs(f))


@pytest.mark.parametrize("variant", VARIANTS)
def test_energy_rate_equals_minus_dissipation(variant):
    train = jittered(24, 7)
    f = chemical_potential(train, variant)
    rate = train.a * np.dot(f, ode_rhs(train, variant))
    D = dissipation_rate(train, variant)
    assert D > 0.0
    assert rate == pytest.approx(-D, rel=1e-8)


def test_translation_invariance():
    train = jittered(16, 4)
    shifted = train.moved(np.asarray(train.x) + 0.37, 0.0)
    reference = ode_rhs(train)
    assert np.allclose(ode_rhs(shifted), reference, atol=1e-8 * np.max(np.abs(reference)))
    assert discrete_energy(shifted) == pytest.approx(discrete_energy(train), abs=1e-12)


def image_sum_potential(x, L, a, coefficient, terms=10 ** 5):
    """Chemical potential with the cotangent replaced by its periodic image sum"""
    k = np.arange(1, terms + 1, dtype=float)
    N = x.size
    f = np.empty(N)
    for i in range(N):
        pair = 0.0
        for j in range(N):
            if j == i:
                continue
            s = (x[j] - x[i]) / L
            # sum_k 1/(s + k) over |k| <= terms plus the 1/k^2 tail
            pair += (1.0 / s + np.sum(2.0 * s / (s * s - k * k)) - 2.0 * s / (terms + 0.5)) / L
        right = (x[(i + 1) % N] - x[i]) % L
        left = (x[i] - x[i - 1]) % L
        f[i] = (-(2.0 * a / L) * pair + coefficient * (1.0 / right - 1.0 / left)
                + a * a * (1.0 / right ** 3 - 1.0 / left ** 3))
    return f


def test_chemical_potential_two_steps():
    train = StepTrain(DomainParams(1.0), np.array([0.0, 0.4]))
    f = chemical_potential(train)
    assert f[0] == pytest.approx(2.5614, abs=1e-4)
    assert f[1] == pytest.approx(-f[0], abs=1e-12)
    assert np.allclose(f, image_sum_potential(np.asarray(train.x), 1.0, 0.5, 1.0),
                       rtol=1e-9, atol=0.0)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("L", [1.0, 2.5])
def test_chemical_potential_matches_image_sum(variant, L):
    train = jittered(6, 13, L=L)
    expected = image_sum_potential(np.asarray(train.x), L, train.a,
                                   variant.coefficient(train.a, L))
    assert np.allclose(chemical_potential(train, variant), expected,
                       rtol=1e-9, atol=1e-9 * np.max(np.abs(expected)))



def test_jacobian_annihilates_translations():
    train = jittered(8, 5)
    jacobian = ode_jacobian(train)
    assert jacobian.shape == (8, 8)
    assert np.max(np.abs(jacobian.sum(axis=1))) <= 1e-6 * np.max(np.abs(jacobian))


@pytest.mark.parametrize("seed", [1, 2])
def test_jacobian_directional_derivatives(seed):
    train = jittered(12, seed)
    x = np.asarray(train.x)
    jacobian = ode_jacobian(train)
    rng = np.random.default_rng(seed)
    for _ in range(3):
        z = rng.normal(size=12)
        z /= np.linalg.norm(z)
        eps = 1e-6 * train.a
        central = (ode_rhs(train.moved(x + eps * z, 0.0))
                   - ode_rhs(train.moved(x - eps * z, 0.0))) / (2.0 * eps)
        assert np.linalg.norm(jacobian @ z - central) <= 1e-4 * np.linalg.norm(central)


def test_uniform_jacobian_is_circulant():
    jacobian = ode_jacobian(uniform(16))
    shifted = np.roll(np.roll(jacobian, 1, axis=0), 1, axis=1)
    assert np.allclose(shifted, jacobian, atol=1e-6 * np.max(np.abs(jacobian)))
    assert np.allclose(jacobian, jacobian.T, atol=1e-6 * np.max(np.abs(jacobian)))



@pytest.mark.parametrize("N", [8, 10, 16])
def test_local_jacobian_matches_dense_differences(N):
    train = jittered(N, 11)
    x = np.asarray(train.x)
    a, L = train.a, train.L
    step = 1e-7 * a * L
    dense = np.empty((N, N))
    for j in range(N):
        shift = np.zeros(N)
        shift[j] = step
        dense[:, j] = (_local_rhs(x + shift, L, a, 1.0) - _local_rhs(x - shift, L, a, 1.0)) / (2 * step)
    banded = local_jacobian(x, L, a, 1.0).toarray()
    assert np.allclose(banded, dense, atol=1e-6 * np.max(np.abs(dense)))


def test_integrate_ode_dissipates():
    train = sampled(16)
    trajectory = integrate_ode(train, 1e-4)
    energies = trajectory.energies()
    assert trajectory.times[0] == 0.0
    assert trajectory.times[-1] == pytest.approx(1e-4)
    assert trajectory.accepted_steps > 0
    assert len(trajectory.states) == len(trajectory.energy_series)
    assert np.all(np.diff(energies) <= 1e-12 * np.abs(energies[:-1]))
    assert all(state.min_spacing > 0.05 * train.a * train.L for state in trajectory.states)


def test_integrate_ode_keeps_uniform_train():
    train = uniform(16)
    trajectory = integrate_ode(train, 1e-5)
    assert np.allclose(trajectory.final.x, train.x, atol=1e-12)


def test_perturbed_uniform_train_relaxes():
    N = 16
    base = np.arange(N) / N
    x = base + 0.05 / N * np.sin(2.0 * np.pi * base)
    train = StepTrain(DomainParams(1.0), x)
    trajectory = integrate_ode(train, 1e-3, IntegratorOptions(record_every=10))
    smallest = np.array([state.min_spacing for state in trajectory.states])
    assert np.all(np.diff(smallest) >= -1e-9)
    deviations = [np.max(np.abs(state.spacings - 1.0 / N)) for state in trajectory.states]
    assert deviations[-1] <= 1e-2 * deviations[0]
    assert smallest[-1] == pytest.approx(1.0 / N, abs=1e-2 * deviations[0])



def test_integrate_ode_explicit_fallback():
    train = sampled(8)
    options = IntegratorOptions(method="explicit_adaptive")
    trajectory = integrate_ode(train, 1e-6, options)
    implicit = integrate_ode(train, 1e-6)
    assert np.allclose(trajectory.final.x, implicit.final.x, atol=1e-8)


def test_integrate_ode_collision_threshold():
    x = np.arange(8) / 8.0
    x[1] = x[0] + 1e-3
    train = StepTrain(DomainParams(1.0), x)
    with pytest.raises(StepCollisionError, match="step collision"):
        integrate_ode(train, 1e-5)


def test_record_every_thins_snapshots():
    train = sampled(16)
    full = integrate_ode(train, 5e-5)
    thinned = integrate_ode(train, 5e-5, IntegratorOptions(record_every=5, record_energy=False))
    assert len(thinned.states) < len(full.states)
    assert thinned.times[-1] == pytest.approx(5e-5)
    assert thinned.energy_series == []
    assert np.allclose(thinned.final.x, full.final.x, atol=1e-14)
