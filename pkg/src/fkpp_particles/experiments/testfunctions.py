"""Smooth compactly supported space-time test functions with analytic derivatives.

phi(t, x) = c(t) * psi(|x - x0|^2 / R^2), psi(s) = exp(-1 / (1 - s)) for s < 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid_spectral import GridField, GridSpec

PROFILES = ("constant", "cosine")


def _psi(s):
    out = np.zeros_like(s)
    m = s < 1
    out[m] = np.exp(-1.0 / (1.0 - s[m]))
    return out


def _dpsi(s):
    out = np.zeros_like(s)
    m = s < 1
    q = 1.0 - s[m]
    out[m] = -np.exp(-1.0 / q) / q**2
    return out


def _d2psi(s):
    out = np.zeros_like(s)
    m = s < 1
    q = 1.0 - s[m]
    out[m] = np.exp(-1.0 / q) * (2 * s[m] - 1) / q**4
    return out


@dataclass(frozen=True)
class BumpTestFunction:
    d: int = 1
    center: float = 0.0
    radius: float = 2.0
    amplitude: float = 1.0
    profile: str = "constant"
    T: float = 1.0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown time profile {self.profile!r}")
        if self.radius <= 0:
            raise ValueError("test function radius must be positive")

    # time profile: constant 1, or cos^2(pi t / 2T) which vanishes at T
    def c(self, t: float) -> float:
        if self.profile == "constant":
            return self.amplitude
        return self.amplitude * np.cos(0.5 * np.pi * t / self.T) ** 2

    def dc(self, t: float) -> float:
        if self.profile == "constant":
            return 0.0
        return -self.amplitude * 0.5 * np.pi / self.T * np.sin(np.pi * t / self.T)

    def _s(self, coords):
        return sum((np.asarray(x, dtype=float) - self.center) ** 2 for x in coords) / self.radius**2

    def psi(self, *coords):
        return _psi(self._s(coords))

    def laplacian_psi(self, *coords):
        s = self._s(coords)
        return (4 * s * _d2psi(s) + 2 * self.d * _dpsi(s)) / self.radius**2

    def grad_psi(self, *coords):
        s = self._s(coords)
        f = _dpsi(s) * 2 / self.radius**2
        return [f * (np.asarray(x, dtype=float) - self.center) for x in coords]

    def support_fits(self, grid: GridSpec, margin: float = 0.0) -> bool:
        return abs(self.center) + self.radius + margin < grid.L

    def spatial_field(self, grid: GridSpec) -> GridField:
        return GridField(grid, self.psi(*grid.mesh()))

    def laplacian_field(self, grid: GridSpec) -> GridField:
        return GridField(grid, self.laplacian_psi(*grid.mesh()))


ZERO_TEST_FUNCTION = BumpTestFunction(amplitude=0.0)
