"""Initial densities u0 = m * p with samplers driven by the counter-based streams."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import ndtri

from .. import rng
from ..grid_spectral import GridField, GridSpec

KINDS = ("gaussian", "bump", "uniform", "point", "constant", "zero")
_MAX_REJECTION_ROUNDS = 400


def _bump_profile(r2: np.ndarray) -> np.ndarray:
    """exp(-1 / (1 - r^2)) inside the unit ball, 0 outside."""
    r2 = np.asarray(r2, dtype=float)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@dataclass(frozen=True)
class InitialData:
    kind: str = "gaussian"
    mass: float = 1.0
    width: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown initial data {self.kind!r}, expected one of {KINDS}")
        if not (self.width > 0 and np.isfinite(self.width)):
            raise ValueError("initial data width must be positive")
        if not (self.mass >= 0 and np.isfinite(self.mass)):
            raise ValueError("initial data mass must be finite and nonnegative")
        if self.kind == "zero":
            object.__setattr__(self, "mass", 0.0)

    @property
    def integrable(self) -> bool:
        return self.kind != "constant"

    @property
    def smooth(self) -> bool:
        """Whether u0 sits in every W^{s,2} at the grid scale (point masses and indicators do not)."""
        return self.kind in ("gaussian", "bump", "zero")

    @property
    def support_radius(self) -> float:
        if self.kind == "gaussian":
            return 6.0 * self.width
        if self.kind == "uniform":
            return self.width * np.sqrt(self.d)
        if self.kind in ("bump", "point"):
            return self.width
        return 0.0

    @cached_property
    def _bump_norm(self) -> float:
        if self.d == 1:
            return integrate.quad(lambda x: float(_bump_profile(np.array(x * x))), -1, 1,
                                  epsabs=1e-15)[0]
        return 2 * np.pi * integrate.quad(lambda r: r * float(_bump_profile(np.array(r * r))), 0, 1,
                                          epsabs=1e-15)[0]

    def probability(self, *coords: np.ndarray) -> np.ndarray:
        """Normalised shape p, so that u0 = mass * p."""
        w = self.width
        if self.kind == "gaussian":
            r2 = sum(np.asarray(c, dtype=float) ** 2 for c in coords) / w**2
            return np.exp(-0.5 * r2) / (np.sqrt(2 * np.pi) * w) ** self.d
        if self.kind in ("bump", "point"):
            r2 = sum(np.asarray(c, dtype=float) ** 2 for c in coords) / w**2
            return _bump_profile(r2) / (self._bump_norm * w**self.d)
        if self.kind == "uniform":
            inside = np.ones(np.broadcast(*coords).shape, dtype=bool)
            for c in coords:
                inside &= np.abs(c) <= w
            return inside / (2 * w) ** self.d
        raise ValueError(f"{self.kind} initial data has no probability density")

    def field(self, grid: GridSpec) -> GridField:
        if grid.d != self.d:
            raise ValueError("grid and initial data dimensions differ")
        if self.kind == "constant":
            return GridField.constant(grid, self.mass)
        if self.kind == "zero" or self.mass == 0:
            return GridField.constant(grid, 0.0)
        return GridField(grid, self.mass * self.probability(*grid.mesh()))

    def max_value(self) -> float:
        if self.kind == "constant":
            return self.mass
        if self.kind == "zero" or self.mass == 0:
            return 0.0
        origin = [np.zeros(1)] * self.d
        return float(self.mass * self.probability(*origin)[0])

    # -- sampling ------------------------------------------------------------

    def sample(self, keys: np.ndarray) -> np.ndarray:
        """One position per key, drawn from p."""
        keys = np.asarray(keys, dtype=np.uint64)
        n = keys.size
        if self.kind == "constant":
            raise ValueError("constant initial data is not normalisable and cannot be sampled")
        if n == 0:
            return np.zeros((0, self.d))
        if self.kind == "zero":
            raise ValueError("zero initial data has no particles")
        if self.kind == "gaussian":
            return np.stack([self.width * ndtri(rng.uniforms(keys, 0, rng.INIT + 8 * a))
                             for a in range(self.d)], axis=1)
        if self.kind == "uniform":
            return np.stack([self.width * (2 * rng.uniforms(keys, 0, rng.INIT + 8 * a) - 1)
                             for a in range(self.d)], axis=1)
        if self.d == 1:
            return self._inverse_cdf(rng.uniforms(keys, 0, rng.INIT))[:, None]
        return self._rejection(keys)

    def _inverse_cdf(self, u: np.ndarray) -> np.ndarray:
        x = np.linspace(-self.width, self.width, 1 << 15)
        p = self.probability(x)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(x))])
        cdf /= cdf[-1]
        return np.interp(u, cdf, x)

    def _rejection(self, keys: np.ndarray) -> np.ndarray:
        out = np.full((keys.size, self.d), np.nan)
        todo = np.arange(keys.size)
        r = self.support_radius
        envelope = float(self.probability(*([np.zeros(1)] * self.d))[0])
        for attempt in range(_MAX_REJECTION_ROUNDS):
            k = keys[todo]
            prop = np.stack([r * (2 * rng.uniforms(k, attempt, rng.INIT + 8 * a) - 1)
                             for a in range(self.d)], axis=1)
            accept = rng.uniforms(k, attempt, rng.INIT + 7) * envelope <= self.probability(*prop.T)
            out[todo[accept]] = prop[accept]
            todo = todo[~accept]
            if todo.size == 0:
                return out
        raise RuntimeError("rejection sampler did not terminate")
