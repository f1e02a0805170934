"""Mollified empirical density h = theta_N * S on the grid.

Particles are deposited onto grid nodes (cloud-in-cell by default) and the
deposit is convolved with the sampled kernel by FFT. A direct kernel sum is
kept as an oracle.
"""
from __future__ import annotations

import numpy as np

from .grid_spectral import GridField, GridSpec, forward, interpolate, inverse
from .kernels import MollifierSpec, check_resolution, epsilon, kernel_spectrum

SCHEMES = ("linear", "ngp")


def deposit(positions: np.ndarray, grid: GridSpec, scheme: str = "linear",
            weights: np.ndarray | None = None) -> np.ndarray:
    """Sum of particle weights assigned to grid nodes (each particle's shares sum to its weight)."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown deposit scheme {scheme!r}")
    pts = np.asarray(positions, dtype=float).reshape(-1, grid.d)
    n = pts.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    G = grid.G
    size = G**grid.d
    scaled = (pts + grid.L) / grid.dx
    if scheme == "ngp":
        idx = np.rint(scaled).astype(np.int64) % G
        flat = idx[:, 0] if grid.d == 1 else idx[:, 0] * G + idx[:, 1]
        return np.bincount(flat, weights=w, minlength=size).reshape(grid.shape)
    base = np.floor(scaled)
    frac = scaled - base
    i0 = base.astype(np.int64) % G
    i1 = (i0 + 1) % G
    if grid.d == 1:
        out = np.bincount(i0[:, 0], weights=w * (1.0 - frac[:, 0]), minlength=size)
        out += np.bincount(i1[:, 0], weights=w * frac[:, 0], minlength=size)
        return out
    out = np.zeros(size)
    for ix, wx in ((i0[:, 0], 1.0 - frac[:, 0]), (i1[:, 0], frac[:, 0])):
        for iy, wy in ((i0[:, 1], 1.0 - frac[:, 1]), (i1[:, 1], frac[:, 1])):
            out += np.bincount(ix * G + iy, weights=w * wx * wy, minlength=size)
    return out.reshape(grid.shape)


def smooth(values: np.ndarray, spec: MollifierSpec, N: int, grid: GridSpec) -> np.ndarray:
    """Periodic convolution of a grid function with the sampled theta_N."""
    return inverse(forward(values) * kernel_spectrum(spec, N, grid), grid)


def density_from_positions(positions: np.ndarray, N0: int, spec: MollifierSpec, grid: GridSpec,
                           scheme: str = "linear", weights: np.ndarray | None = None) -> GridField:
    check_resolution(spec, N0, grid)
    dens = deposit(positions, grid, scheme, weights) / (N0 * grid.cell_volume)
    return GridField(grid, smooth(dens, spec, N0, grid))


def mollified_density(pop, spec: MollifierSpec, grid: GridSpec | None = None,
                      scheme: str = "linear") -> GridField:
    """h = theta_N * S_t with N = pop.N0; integrates to the relative mass."""
    grid = pop.grid if grid is None else grid
    return density_from_positions(pop.pos, pop.N0, spec, grid, scheme)


def direct_sum_density(positions: np.ndarray, N0: int, spec: MollifierSpec, grid: GridSpec) -> GridField:
    """sum_a theta_N(x - X_a) / N0 with minimum-image displacements."""
    pts = np.asarray(positions, dtype=float).reshape(-1, grid.d)
    mesh = grid.mesh()
    out = np.zeros(grid.shape)
    for p in pts:
        disp = [grid.wrap(m - c) for m, c in zip(mesh, p)]
        out += spec.theta_N(N0, *disp)
    return GridField(grid, out / N0)


def deposition_error_bound(n_particles: int, N0: int, spec: MollifierSpec, grid: GridSpec) -> float:
    """n/N0 * d * dx * sup|grad theta_N| bounds the linear-deposit error against the direct sum.

    Linear weights interpolate theta_N between neighbouring nodes, so each
    particle contributes at most dx * sup|grad theta_N| / N0 per node.
    """
    eps = epsilon(spec, N0)
    if spec.kernel == "gaussian":
        # sup |theta'| of the standard normal density, attained at |x| = 1
        slope = np.exp(-0.5) / np.sqrt(2 * np.pi) / (2 * np.pi) ** ((spec.d - 1) / 2)
    else:
        # (15/16) * max |d/dx (1-x^2)^2| = (15/16) * 8 / (3 sqrt 3); other factors <= 15/16
        slope = (15 / 16) * 8 / (3 * np.sqrt(3)) * (15 / 16) ** (spec.d - 1)
    # scaling: theta_N' = eps^{-d-1} theta'(x/eps); the sampled kernel is renormalised by <= 1e-3
    sup_grad = slope * eps ** (-spec.d - 1) * 1.001
    return n_particles / N0 * spec.d * grid.dx * sup_grad


def rate_field(h: GridField) -> GridField:
    """(1 - h)^+ pointwise."""
    h.check_finite()
    return GridField(h.spec, np.maximum(1.0 - h.values, 0.0))


def weighted_smoothing_bound_check(pop, spec: MollifierSpec, f: GridField,
                                   scheme: str = "linear") -> float:
    """max over nodes of |theta_N * (f S)| - ||f||_inf h; nonpositive up to round-off."""
    grid = f.spec
    fx = interpolate(f, pop.pos)
    lhs = density_from_positions(pop.pos, pop.N0, spec, grid, scheme, weights=fx).values
    h = density_from_positions(pop.pos, pop.N0, spec, grid, scheme).values
    return float(np.max(np.abs(lhs) - f.sup_norm() * h)) if h.size else 0.0
