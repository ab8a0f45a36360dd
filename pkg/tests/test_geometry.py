"""
Tests for the surface representations and their conversions
"""
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest

from core import spectral
from core.errors import (ConfigError, GridSizeError, MonotonicityLostError, ProfileError,
                         StepCollisionError)
from core.geometry import (DomainParams, HeightField, HeightProfile, StepTrain,
                           build_height_field, height_to_density, height_to_phi, height_to_u,
                           phi_to_height, sample_step_train, step_train_to_height_profile)


def test_domain_params_validation():
    assert DomainParams(L=2.0, N=4).a == 0.25
    with pytest.raises(ConfigError, match="period"):
        DomainParams(L=-1.0)
    with pytest.raises(ConfigError):
        DomainParams(L=1.0, N=1)
    with pytest.raises(ConfigError):
        DomainParams(L=1.0).a


@pytest.mark.parametrize("A", [1.0, 1.5, -1.2])
def test_profile_not_monotone(A):
    """Amplitudes with |A| >= 1 cannot give a decreasing height"""
    with pytest.raises(ProfileError, match="profile not monotone"):
        HeightProfile(A=A)


def test_profile_mode_must_be_positive():
    with pytest.raises(ConfigError):
        HeightProfile(A=0.2, k=0)


def test_build_height_field():
    h = build_height_field(HeightProfile(A=0.2), 1.0, 64)
    assert h.M == 64
    assert h.beta == pytest.approx(-0.8)
    assert h.values[0] == pytest.approx(0.0, abs=1e-15)
    assert np.max(h.h_x) == pytest.approx(-0.8, abs=1e-12)
    assert np.min(h.h_x) == pytest.approx(-1.2, abs=1e-12)
    assert h.is_admissible()


def test_build_height_field_rejects_bad_grid():
    with pytest.raises(GridSizeError):
        build_height_field(HeightProfile(), 1.0, 48)


def test_check_admissible_raises():
    x = np.arange(32) / 32
    h = HeightField(DomainParams(1.0), 0.2 / (2 * np.pi) * np.sin(2 * np.pi * x), beta=-2.0)
    assert not h.is_admissible()
    with pytest.raises(MonotonicityLostError, match="monotonicity lost"):
        h.check_admissible()


@pytest.mark.parametrize("L", [1.0, 2.0])
def test_height_to_phi_inverts(L):
    """h(phi(alpha)) = alpha at every alpha node"""
    h = build_height_field(HeightProfile(A=0.3, k=2), L, 64)
    phi = height_to_phi(h, 64)
    assert np.allclose(h.evaluate(phi.values), phi.nodes, atol=1e-10)
    assert phi.values[0] == pytest.approx(0.0, abs=1e-10)
    assert phi.is_admissible()


def test_phi_slope_bound():
    h = build_height_field(HeightProfile(A=0.2), 1.0, 128)
    phi = height_to_phi(h, 128)
    assert phi.beta2 == pytest.approx(-1.0 / 1.2, abs=1e-8)
    assert np.min(phi.phi_alpha) == pytest.approx(-1.0 / 0.8, abs=1e-8)


def test_phi_to_height_round_trip():
    h = build_height_field(HeightProfile(A=0.2), 1.0, 64)
    back = phi_to_height(height_to_phi(h, 128), 64)
    assert np.allclose(back.p, h.p, atol=1e-9)


def test_density_and_potential():
    L = 1.5
    h = build_height_field(HeightProfile(A=0.4), L, 64)
    rho = height_to_density(h)
    assert np.mean(rho) * L == pytest.approx(1.0, abs=1e-12)
    u = height_to_u(h)
    assert abs(np.mean(u)) < 1e-14
    assert np.allclose(spectral.derivative(u, L, 2) + 1.0 / L, rho, atol=1e-10)


@pytest.mark.parametrize("N", [16, 12, 5])
def test_sample_step_train(N):
    """Trains sample phi at the lattice heights (N-i)/N, grid-aligned or not"""
    h = build_height_field(HeightProfile(A=0.2), 1.0, 128)
    phi = height_to_phi(h, 128)
    train = sample_step_train(phi, N)
    alpha = (N - np.arange(1, N + 1)) / N
    assert train.N == N
    assert np.allclose(train.x, phi.evaluate(alpha), atol=1e-12)
    assert np.all(train.spacings > 0.0)
    assert train.x[-1] == pytest.approx(0.0, abs=1e-10)
    assert np.sum(train.spacings) == pytest.approx(1.0)


def test_step_train_rejects_disorder():
    with pytest.raises(StepCollisionError, match="step collision"):
        StepTrain(DomainParams(1.0), np.array([0.0, 0.5, 0.4, 0.7]))
    with pytest.raises(ConfigError):
        StepTrain(DomainParams(1.0, N=3), np.array([0.0, 0.25, 0.5, 0.75]))


def test_step_train_is_immutable():
    train = StepTrain(DomainParams(1.0), np.array([0.0, 0.25, 0.5, 0.75]))
    with pytest.raises(ValueError):
        train.x[0] = 0.1


def test_step_height_profile():
    """h_N(x) = (N-i)/N on [x_i, x_{i+1}) with h_N(x+L) = h_N(x) - 1"""
    train = StepTrain(DomainParams(1.0), np.array([0.0, 0.25, 0.5, 0.75]))
    h_N = step_train_to_height_profile(train)
    assert h_N(0.1) == pytest.approx(0.75)
    assert h_N(0.6) == pytest.approx(0.25)
    assert h_N(0.8) == pytest.approx(0.0)
    assert h_N(1.1) == pytest.approx(-0.25)
    assert h_N(-0.1) == pytest.approx(1.0)
    assert h_N(np.array([0.1, 0.3])).shape == (2,)
