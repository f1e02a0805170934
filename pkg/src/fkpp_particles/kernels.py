"""Mollifier family theta_N(x) = eps_N^{-d} theta(x / eps_N), eps_N = N^{-beta/d}."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .grid_spectral import GridField, GridSpec, forward, sobolev_norm

KERNELS = ("gaussian", "quartic")
# (1-x^2)^2 has a jump in its third derivative, so it sits in W^{s,2} only for s < 5/2
QUARTIC_MAX_ORDER = 2.5

_QUARTIC_SERIES = (1.0, -1 / 14, 1 / 504, -1 / 33264, 1 / 3459456, -1 / 518918400, 1 / 105859353600)


class ResolutionError(ValueError):
    """Grid too coarse for the kernel width."""


@dataclass(frozen=True)
class MollifierSpec:
    kernel: str = "gaussian"
    beta: float = 0.25
    d: int = 1
    alpha0: float | None = None
    strict: bool = True

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}, expected one of {KERNELS}")
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.strict and self.beta >= 0.5:
            raise ValueError(
                f"beta={self.beta} out of (0,1/2) required for uniform convergence: "
                "pass --allow-supercritical to override")
        if self.alpha0 is not None:
            lo = self.d / 2
            if not self.alpha0 > lo:
                raise ValueError(f"alpha0={self.alpha0} must exceed d/2={lo}")
            if self.strict:
                hi = self.d * (1 - self.beta) / (2 * self.beta)
                if self.alpha0 > hi:
                    raise ValueError(f"alpha0={self.alpha0} must be <= d(1-beta)/(2 beta)={hi:.6g}")
            if self.kernel == "quartic" and self.alpha0 >= QUARTIC_MAX_ORDER:
                raise ValueError(f"quartic kernel is only in W^(s,2) for s < {QUARTIC_MAX_ORDER}")

    # -- base kernel ---------------------------------------------------------

    @property
    def support_radius(self) -> float:
        """Half-width of the region where theta is non-negligible (exact for the bump)."""
        return 1.0 if self.kernel == "quartic" else 8.0

    def theta(self, *coords: np.ndarray) -> np.ndarray:
        if len(coords) != self.d:
            raise ValueError(f"expected {self.d} coordinate arrays")
        if self.kernel == "gaussian":
            r2 = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
            return np.exp(-0.5 * r2) / (2 * np.pi) ** (self.d / 2)
        out = 1.0
        for c in coords:
            c = np.asarray(c, dtype=float)
            out = out * np.where(np.abs(c) <= 1.0, (15 / 16) * (1 - c * c) ** 2, 0.0)
        return out

    def theta_hat(self, *freqs: np.ndarray) -> np.ndarray:
        """Fourier transform int e^{i eta.x} theta(x) dx (real, theta is even)."""
        if self.kernel == "gaussian":
            return np.exp(-0.5 * sum(np.asarray(k, dtype=float) ** 2 for k in freqs))
        out = 1.0
        for k in freqs:
            out = out * _quartic_hat(np.asarray(k, dtype=float))
        return out

    def l2_norm_squared(self) -> float:
        if self.kernel == "gaussian":
            return (4 * np.pi) ** (-self.d / 2)
        return (5 / 7) ** self.d

    # -- scaled family -------------------------------------------------------

    def epsilon(self, N: int) -> float:
        return epsilon(self, N)

    def theta_N(self, N: int, *coords: np.ndarray) -> np.ndarray:
        eps = epsilon(self, N)
        return eps ** (-self.d) * self.theta(*(np.asarray(c) / eps for c in coords))


def _quartic_hat(k: np.ndarray) -> np.ndarray:
    k = np.abs(k)
    small = k < 0.5
    out = np.empty_like(k)
    ks = k[small]
    k2 = ks * ks
    acc = np.zeros_like(ks)
    for c in reversed(_QUARTIC_SERIES):
        acc = acc * k2 + c
    out[small] = acc
    kb = k[~small]
    out[~small] = 15 * ((3 - kb * kb) * np.sin(kb) - 3 * kb * np.cos(kb)) / kb**5
    return out


def epsilon(spec: MollifierSpec, N: int) -> float:
    if N < 1:
        raise ValueError(f"particle count must be >= 1, got {N}")
    return float(N) ** (-spec.beta / spec.d)


def check_resolution(spec: MollifierSpec, N: int, grid: GridSpec) -> None:
    eps = epsilon(spec, N)
    if grid.dx > eps / 4:
        need = grid.required_points(eps / 4)
        raise ResolutionError(
            f"grid spacing {grid.dx:.4g} exceeds eps_N/4 = {eps / 4:.4g} for N={N}; "
            f"use G >= {need} at L={grid.L}")


def sample_on_grid(spec: MollifierSpec, N: int, grid: GridSpec) -> GridField:
    """theta_N centred at the origin (node G/2), wrapped periodically.

    Samples are rescaled so the rectangle-rule mass is exactly one.
    """
    if spec.d != grid.d:
        raise ValueError("kernel and grid dimensions differ")
    check_resolution(spec, N, grid)
    vals = spec.theta_N(N, *grid.mesh())
    mass = vals.sum() * grid.cell_volume
    return GridField(grid, vals / mass)


@lru_cache(maxsize=32)
def kernel_spectrum(spec: MollifierSpec, N: int, grid: GridSpec) -> np.ndarray:
    """Half-spectrum of the sampled theta_N, scaled for use as a convolution multiplier."""
    sampled = sample_on_grid(spec, N, grid)
    spectrum = forward(np.fft.ifftshift(sampled.values)) * grid.cell_volume
    spectrum.setflags(write=False)
    return spectrum


@dataclass(frozen=True)
class NormScalingRow:
    N: int
    norm: float
    ratio: float


def reference_grid(spec: MollifierSpec, N_max: int, points_per_width: int = 8) -> GridSpec:
    L = 16.0
    probe = GridSpec(spec.d, L, 8)
    return GridSpec(spec.d, L, probe.required_points(epsilon(spec, N_max) / points_per_width))


def norm_scaling_report(spec: MollifierSpec, alpha: float, N_list, grid: GridSpec | None = None
                        ) -> list[NormScalingRow]:
    """||theta_N||_{W^{alpha,2}} and the rescaled ratio ||theta_N|| eps_N^{alpha+d/2}.

    The ratio is non-increasing in N and squeezed between the eps -> 0 limit
    (``fourier_ratio(spec, alpha, 0)``) and ||theta||_{W^{alpha,2}}.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if spec.kernel == "quartic" and alpha >= QUARTIC_MAX_ORDER:
        raise ValueError(f"quartic kernel is not in W^({alpha},2)")
    N_list = [int(n) for n in N_list]
    if grid is None:
        grid = reference_grid(spec, max(N_list))
    rows = []
    for N in N_list:
        norm = sobolev_norm(sample_on_grid(spec, N, grid), alpha)
        rows.append(NormScalingRow(N, norm, norm * epsilon(spec, N) ** (alpha + spec.d / 2)))
    return rows


def fourier_ratio(spec: MollifierSpec, alpha: float, eps: float) -> float:
    """(int (eps^2+|eta|^2)^alpha |theta_hat(eta)|^2 d eta / (2 pi)^d)^{1/2} by adaptive quadrature.

    Equals ||theta_N||_{W^{alpha,2}} eps^{alpha+d/2} for eps = eps_N; eps = 0 gives the N -> inf limit.
    """
    def integrand_1d(k):
        return (eps**2 + k * k) ** alpha * float(spec.theta_hat(np.array([k]))[0]) ** 2

    if spec.d == 1:
        pieces = [(0.0, 10.0), (10.0, 60.0), (60.0, np.inf)]
        total = sum(integrate.quad(integrand_1d, a, b, limit=400, epsabs=1e-14, epsrel=1e-12)[0]
                    for a, b in pieces)
        return float(np.sqrt(2 * total / (2 * np.pi)))

    def integrand_2d(ky, kx):
        th = float(spec.theta_hat(np.array([kx]), np.array([ky]))[0])
        return (eps**2 + kx * kx + ky * ky) ** alpha * th * th

    upper = 12.0 if spec.kernel == "gaussian" else 200.0
    total = integrate.dblquad(integrand_2d, 0.0, upper, 0.0, upper, epsabs=1e-13, epsrel=1e-10)[0]
    return float(np.sqrt(4 * total / (2 * np.pi) ** 2))
