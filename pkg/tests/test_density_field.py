import numpy as np
import pytest

from fkpp_particles import particle_system as ps
from fkpp_particles.density_field import (
    deposit, deposition_error_bound, density_from_positions, direct_sum_density, mollified_density,
    weighted_smoothing_bound_check,
)
from fkpp_particles.experiments.initial_data import InitialData
from fkpp_particles.grid_spectral import GridField, GridSpec
from fkpp_particles.kernels import MollifierSpec


@pytest.mark.parametrize("scheme", ["linear", "ngp"])
@pytest.mark.parametrize("d", [1, 2])
def test_deposit_conserves_weight(scheme, d):
    grid = GridSpec(d, 5.0, 64)
    pts = np.random.default_rng(0).uniform(-5, 5, size=(300, d))
    w = np.linspace(0.5, 1.5, 300)
    assert deposit(pts, grid, scheme, w).sum() == pytest.approx(w.sum(), rel=1e-13)


def test_linear_deposit_splits_between_neighbours():
    grid = GridSpec(1, 4.0, 8)  # dx = 1
    out = deposit(np.array([[-3.75]]), grid)
    assert out[0] == pytest.approx(0.75) and out[1] == pytest.approx(0.25)
    wrapped = deposit(np.array([[3.5]]), grid)
    assert wrapped[7] == pytest.approx(0.5) and wrapped[0] == pytest.approx(0.5)


@pytest.mark.parametrize("kernel", ["gaussian", "quartic"])
def test_fft_density_matches_direct_sum(kernel):
    spec = MollifierSpec(kernel=kernel, beta=0.25)
    grid = GridSpec(1, 10.0, 2048)
    pts = np.random.default_rng(1).normal(0, 1.5, size=(200, 1))
    fft = density_from_positions(pts, 200, spec, grid)
    direct = direct_sum_density(pts, 200, spec, grid)
    assert np.max(np.abs(fft.values - direct.values)) < deposition_error_bound(200, 200, spec, grid)


def test_mass_identity_and_weighted_bound():
    spec = MollifierSpec(beta=0.25, d=2)
    grid = GridSpec(2, 8.0, 256)
    pop = ps.init(400, InitialData("gaussian", 1.0, 1.0, 2), 9, grid)
    h = mollified_density(pop, spec)
    assert h.integral() == pytest.approx(ps.mass(pop), abs=1e-12)
    f = GridField(grid, np.cos(grid.mesh()[0]))
    assert weighted_smoothing_bound_check(pop, spec, f) <= 1e-12
