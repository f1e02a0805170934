import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fkpp_particles.grid_spectral import (
    GridField, GridSpec, analytic_bound_check, fractional_power, gradient, heat_semigroup,
    interpolate, laplacian, positivity_check, sobolev_norm,
)


def gaussian(spec, var):
    r2 = spec.radius_squared()
    return np.exp(-0.5 * r2 / var) / (2 * np.pi * var) ** (spec.d / 2)


@pytest.mark.parametrize("d,G", [(1, 1024), (2, 256)])
def test_heat_semigroup_gaussian_variance(d, G):
    spec = GridSpec(d, 20.0, G)
    f = GridField(spec, gaussian(spec, 0.5))
    out = heat_semigroup(f, 0.3)
    # e^{t Delta} maps N(0, v) to N(0, v + 2t)
    assert np.max(np.abs(out.values - gaussian(spec, 0.5 + 0.6))) < 1e-8


def test_heat_semigroup_rejects_negative_time():
    spec = GridSpec(1, 5.0, 64)
    with pytest.raises(ValueError):
        heat_semigroup(GridField.constant(spec, 1.0), -0.1)


def test_fractional_power_single_mode():
    spec = GridSpec(1, np.pi, 128)  # lattice pi k / L = k
    f = GridField(spec, np.cos(spec.x))
    out = fractional_power(f, 1.0)
    assert np.max(np.abs(out.values - np.sqrt(2) * np.cos(spec.x))) < 1e-12


def test_laplacian_and_gradient_of_mode():
    spec = GridSpec(2, np.pi, 64)
    x, y = spec.mesh()
    f = GridField(spec, np.sin(2 * x) * np.cos(3 * y))
    assert np.max(np.abs(laplacian(f).values + 13 * f.values)) < 1e-10
    gx, gy = gradient(f)
    assert np.max(np.abs(gx.values - 2 * np.cos(2 * x) * np.cos(3 * y))) < 1e-10
    assert np.max(np.abs(gy.values + 3 * np.sin(2 * x) * np.sin(3 * y))) < 1e-10


def test_sobolev_norm_of_mode_and_l2():
    spec = GridSpec(1, np.pi, 64)
    f = GridField(spec, np.cos(4 * spec.x))
    # ||cos 4x||^2 = pi on [-pi, pi); weight (1 + 16)^s
    assert sobolev_norm(f, 0) == pytest.approx(f.l2_norm(), rel=1e-12)
    assert sobolev_norm(f, 1.5) == pytest.approx(np.sqrt(np.pi * 17**1.5), rel=1e-12)
    assert sobolev_norm(f, -2) == pytest.approx(np.sqrt(np.pi * 17.0**-2), rel=1e-12)


def test_sobolev_nyquist_mode_counted_once():
    spec = GridSpec(1, np.pi, 16)
    f = GridField(spec, np.cos(8 * spec.x))  # alternating +-1
    assert sobolev_norm(f, 0) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)


def test_analytic_bound_check_zero_order_and_sup():
    spec = GridSpec(1, 10.0, 512)
    rows, sup = analytic_bound_check(spec, 0.0, [0.1, 1.0])
    assert all(r.operator_norm == 1.0 for r in rows)
    rows, sup = analytic_bound_check(spec, 1.0, [0.01, 0.1, 1.0])
    # t (1+k^2) e^{-t k^2} <= t + max_k t k^2 e^{-t k^2} = t + 1/e
    for r in rows:
        assert r.c_estimate <= r.t + np.exp(-1) + 1e-12
    assert sup == max(r.c_estimate for r in rows)


def test_positivity_pure_heat_flow_is_positive():
    spec = GridSpec(1, 10.0, 512)
    assert positivity_check(spec, 0.0, 0.1, trials=20) >= -1e-12


def test_positivity_counterexample_fractional():
    # a narrow bump already gives a negative output for s = 1
    spec = GridSpec(1, 10.0, 2048)
    f = GridField(spec, gaussian(spec, 0.05**2))
    assert positivity_check(spec, 1.0, 0.01, fields=[f]) < -0.1


def test_interpolate_nodes_and_linear():
    spec = GridSpec(1, 4.0, 64)
    f = GridField(spec, spec.x.copy())
    pts = np.array([[-3.9], [0.013], [2.5]])
    assert np.allclose(interpolate(f, pts), pts[:, 0])
    nodes = spec.x[[0, 5, 40]][:, None]
    assert np.array_equal(interpolate(f, nodes), spec.x[[0, 5, 40]])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_heat_semigroup_composes(s, t):
    spec = GridSpec(1, 8.0, 128)
    f = GridField(spec, gaussian(spec, 0.3) + 0.1)
    a = heat_semigroup(heat_semigroup(f, s), t)
    b = heat_semigroup(f, s + t)
    assert np.max(np.abs(a.values - b.values)) < 1e-12
    assert a.integral() == pytest.approx(f.integral(), rel=1e-12)
