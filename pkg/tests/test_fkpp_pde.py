import numpy as np
import pytest

from fkpp_particles.fkpp_pde import (
    CLIPPED, LOGISTIC, check_bounds, compare_clipped_vs_logistic, front_speed, mild_residuals,
    nonlocal_to_local_refinement, solve, solve_fd,
)
from fkpp_particles.grid_spectral import GridField, GridSpec
from fkpp_particles.kernels import MollifierSpec


def bump(grid, amp=0.9, width=1.0):
    return GridField(grid, amp * np.exp(-0.5 * grid.radius_squared() / width**2))


def logistic(c, t):
    return c * np.exp(t) / (1 - c + c * np.exp(t))


def test_constant_data_follows_logistic():
    grid = GridSpec(1, 5.0, 64)
    sol = solve(GridField.constant(grid, 0.1), LOGISTIC, 1.0, 1e-3, [0.5, 1.0])
    assert abs(sol.snapshot(1.0).values - 0.23196931668).max() < 1e-6
    assert abs(sol.snapshot(1.0).values - logistic(0.1, 1.0)).max() < 1e-12


def test_clipped_equals_logistic_in_unit_interval():
    grid = GridSpec(1, 20.0, 1024)
    assert compare_clipped_vs_logistic(bump(grid), 2.0, 0.01) < 1e-7


def test_spectral_solver_against_finite_differences():
    grid = GridSpec(1, 10.0, 256)
    u0 = bump(grid, 0.5)
    dt_fd = 0.4 * grid.dx**2
    T = 0.5
    fd = solve_fd(u0, LOGISTIC, T, T / round(T / dt_fd))
    sp = solve(u0, LOGISTIC, T, 1e-3, [T]).fields[-1]
    # second-order FD error dominates: dx^2 |u''''| / 12
    assert np.max(np.abs(fd - sp)) < 2e-4


def test_bounds_and_input_checks():
    grid = GridSpec(2, 10.0, 64)
    sol = solve(bump(grid), CLIPPED, 1.0, 0.02)
    assert check_bounds(sol) <= 1e-8
    with pytest.raises(ValueError):
        solve(bump(grid), LOGISTIC, 1.0, 0.5)
    with pytest.raises(ValueError):
        solve(GridField(grid, -bump(grid).values), LOGISTIC, 1.0, 0.01)


def test_mild_residual_second_order():
    grid = GridSpec(1, 20.0, 512)
    res = [mild_residuals(solve(bump(grid), LOGISTIC, 1.0, dt)).max() for dt in (0.02, 0.01, 0.005)]
    assert res[2] < 2e-6
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.1)
    assert res[1] / res[2] == pytest.approx(4.0, rel=0.1)


def test_nonlocal_approaches_local():
    grid = GridSpec(1, 20.0, 2048)
    rows = nonlocal_to_local_refinement(bump(grid), MollifierSpec(beta=0.25), [10, 100, 1000, 10000], 1.0, 0.01)
    diffs = [r.sup_diff for r in rows]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_front_speed_with_logarithmic_correction():
    # the level-set position is 2t - (3/2) log t + O(1), so the slope over [T/2, T] is 2 - 3 log 2 / T
    grid = GridSpec(1, 100.0, 8192)
    u0 = GridField(grid, (np.abs(grid.x) <= 5).astype(float))
    T = 20.0
    sol = solve(u0, LOGISTIC, T, 0.05, np.arange(0, T + 1e-9, 0.5))
    corrected = 2 - 3 * np.log(2) / T
    for level in (0.1, 0.5, 0.9):
        assert front_speed(sol, level) == pytest.approx(corrected, abs=0.1)


def test_front_speed_increases_towards_two():
    # round-off ahead of the front grows like e^t, so horizons stay below about 25
    grid = GridSpec(1, 100.0, 8192)
    u0 = GridField(grid, (np.abs(grid.x) <= 5).astype(float))
    speeds = []
    for T in (10.0, 24.0):
        sol = solve(u0, LOGISTIC, T, 0.05, np.arange(0, T + 1e-9, 0.5))
        speeds.append(front_speed(sol, 0.5))
        assert speeds[-1] == pytest.approx(2 - 3 * np.log(2) / T, abs=0.1)
    assert speeds[0] < speeds[1] < 2.0
