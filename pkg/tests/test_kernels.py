import numpy as np
import pytest
from scipy import integrate

from fkpp_particles.grid_spectral import GridSpec
from fkpp_particles.kernels import (
    MollifierSpec, ResolutionError, check_resolution, epsilon, fourier_ratio, kernel_spectrum,
    norm_scaling_report, sample_on_grid,
)


def test_epsilon_formula():
    spec = MollifierSpec(beta=0.25, d=2)
    assert epsilon(spec, 10**4) == pytest.approx(10 ** (-0.5))
    with pytest.raises(ValueError):
        epsilon(spec, 0)


def test_strict_mode_rejects_supercritical_beta():
    with pytest.raises(ValueError, match="--allow-supercritical"):
        MollifierSpec(beta=0.6)
    assert MollifierSpec(beta=0.6, strict=False).beta == 0.6
    with pytest.raises(ValueError):
        MollifierSpec(beta=1.0, strict=False)


def test_alpha0_ranges():
    with pytest.raises(ValueError):
        MollifierSpec(d=2, alpha0=1.0)
    with pytest.raises(ValueError):
        MollifierSpec(beta=0.4, d=1, alpha0=1.0)  # d(1-beta)/(2beta) = 0.75
    with pytest.raises(ValueError):
        MollifierSpec(kernel="quartic", beta=0.1, alpha0=2.5)


@pytest.mark.parametrize("kernel", ["gaussian", "quartic"])
def test_theta_is_probability_density(kernel):
    spec = MollifierSpec(kernel=kernel)
    mass = integrate.quad(lambda x: float(spec.theta(np.array(x))), -10, 10, points=[-1, 1])[0]
    assert mass == pytest.approx(1.0, abs=1e-10)
    l2 = integrate.quad(lambda x: float(spec.theta(np.array(x))) ** 2, -10, 10, points=[-1, 1])[0]
    assert spec.l2_norm_squared() == pytest.approx(l2, rel=1e-10)


@pytest.mark.parametrize("kernel", ["gaussian", "quartic"])
@pytest.mark.parametrize("k", [0.0, 0.3, 0.49, 0.51, 2.0, 7.5])
def test_theta_hat_matches_quadrature(kernel, k):
    spec = MollifierSpec(kernel=kernel)
    ref = integrate.quad(lambda x: np.cos(k * x) * float(spec.theta(np.array(x))), -12, 12,
                         points=[-1, 1], limit=200)[0]
    assert float(spec.theta_hat(np.array([k]))[0]) == pytest.approx(ref, abs=1e-11)


def test_resolution_rule_names_required_grid():
    spec = MollifierSpec(beta=0.25)
    grid = GridSpec(1, 20.0, 512)
    with pytest.raises(ResolutionError, match="G >= 2048"):
        check_resolution(spec, 10**4, grid)
    check_resolution(spec, 10**4, GridSpec(1, 20.0, 2048))


def test_sampled_kernel_unit_mass_and_spectrum():
    spec = MollifierSpec(kernel="quartic", beta=0.25)
    grid = GridSpec(1, 10.0, 2048)
    s = sample_on_grid(spec, 1000, grid)
    assert s.integral() == pytest.approx(1.0, abs=1e-14)
    assert kernel_spectrum(spec, 1000, grid)[0].real == pytest.approx(1.0, abs=1e-14)


def test_norm_scaling_alpha_zero_constant():
    spec = MollifierSpec(beta=0.25)
    rows = norm_scaling_report(spec, 0.0, [4**k for k in range(1, 7)])
    target = np.sqrt(spec.l2_norm_squared())
    assert max(abs(r.ratio - target) for r in rows) < 1e-6


def test_norm_scaling_alpha_one_between_limit_and_base_norm():
    spec = MollifierSpec(beta=0.25)
    rows = norm_scaling_report(spec, 1.0, [4**k for k in range(1, 7)])
    limit = fourier_ratio(spec, 1.0, 0.0)
    base = fourier_ratio(spec, 1.0, 1.0)
    # Gaussian: limit^2 = int k^2 e^{-k^2} dk / 2 pi = 1 / (4 sqrt pi)
    assert limit == pytest.approx(np.sqrt(1 / (4 * np.sqrt(np.pi))), rel=1e-10)
    ratios = [r.ratio for r in rows]
    assert all(limit <= r <= base for r in ratios)
    assert all(b <= a + 1e-9 for a, b in zip(ratios, ratios[1:]))
    for r in rows:
        assert r.ratio == pytest.approx(fourier_ratio(spec, 1.0, epsilon(spec, r.N)), rel=1e-6)
