"""Single-replica simulation with optional observers, and the worker pool."""
from __future__ import annotations

import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import particle_system as ps
from .. import rng
from ..density_field import density_from_positions
from ..grid_spectral import GridField, forward, _parseval_weights, wavenumber_squared
from .config import RunConfig


def replica_key(seed: int, N: int, replica: int) -> int:
    """Stream key of one (N, replica) run; particle keys are derived from it by label."""
    return rng.derive(int(seed), int(N), int(replica))


@dataclass
class ReplicaResult:
    N: int
    replica: int
    times: np.ndarray
    masses: np.ndarray
    fields: np.ndarray | None = field(default=None, repr=False)
    m1: float = float("nan")
    m2: float = float("nan")
    psi: float = float("nan")
    mass_identity_error: float = 0.0
    final_population: ps.Population | None = field(default=None, repr=False)
    runtime: float = 0.0


class _WeakResidual:
    """Trapezoid-in-time accumulation of int (dphi/dt + lap phi + (1-h)^+ phi) h dx."""

    def __init__(self, cfg: RunConfig):
        self.tf = cfg.test_function()
        grid = cfg.grid
        if not self.tf.support_fits(grid):
            raise ValueError("test function support touches the box boundary")
        self.psi = self.tf.spatial_field(grid).values
        self.lap = self.tf.laplacian_field(grid).values
        self.dv = grid.cell_volume
        self.dt = cfg.dt
        self.total = float(np.sum(cfg.u0.field(grid).values * self.psi) * self.dv * self.tf.c(0.0))
        self._prev = None

    def integrand(self, t: float, h: np.ndarray) -> float:
        tf = self.tf
        r = np.maximum(1.0 - h, 0.0)
        return float(np.sum((tf.dc(t) * self.psi + tf.c(t) * (self.lap + r * self.psi)) * h) * self.dv)

    def observe(self, t: float, h: np.ndarray) -> None:
        cur = self.integrand(t, h)
        if self._prev is not None:
            self.total += 0.5 * self.dt * (self._prev + cur)
        self._prev = cur

    def finish(self, t: float, h: np.ndarray) -> float:
        return self.total - float(np.sum(h * self.psi) * self.dv * self.tf.c(t))


def psi_of_fields(cfg: RunConfig, fields: np.ndarray, u0_values: np.ndarray | None = None) -> float:
    """The weak residual functional evaluated on a sequence of fields spaced by cfg.dt."""
    w = _WeakResidual(cfg)
    if u0_values is not None:
        w.total = float(np.sum(u0_values * w.psi) * w.dv * w.tf.c(0.0))
    for k, h in enumerate(fields):
        w.observe(k * cfg.dt, h)
    return w.finish((len(fields) - 1) * cfg.dt, fields[-1])


def simulate_replica(cfg: RunConfig, N: int, replica: int, *, keep_fields: bool = False,
                     martingales: bool = False, weak_residual: bool = False,
                     track: bool = False, T: float | None = None) -> ReplicaResult:
    """Run one particle system to time T, sampling h at the configured snapshot steps."""
    start = time.perf_counter()
    grid, spec = cfg.grid, cfg.mollifier
    T = cfg.T if T is None else T
    n_steps = int(round(T / cfg.dt))
    snap_steps = set(k for k in cfg.snapshot_steps if k <= n_steps) | {n_steps}
    pop = ps.init(N, cfg.u0, replica_key(cfg.seed, N, replica), grid, track=track)

    acc = None
    if martingales:
        tf = cfg.test_function()
        acc = ps.MartingaleAccumulator.for_test_function(tf.spatial_field(grid), spec, N, tf.c)
    wr = _WeakResidual(cfg) if weak_residual else None
    need_h_every_step = cfg.rate_mode == "interacting" or wr is not None

    times, masses, fields = [], [], []
    identity_err = 0.0

    def density() -> GridField:
        nonlocal identity_err
        h = density_from_positions(pop.pos, N, spec, grid, cfg.deposit)
        identity_err = max(identity_err, abs(h.integral() - ps.mass(pop)))
        return h

    for k in range(n_steps + 1):
        h = density() if (need_h_every_step or k in snap_steps) else None
        if wr is not None:
            wr.observe(k * cfg.dt, h.values)
        if k in snap_steps:
            times.append(k * cfg.dt)
            masses.append(ps.mass(pop))
            if keep_fields:
                fields.append(h.values.copy())
        if k == n_steps:
            break
        if cfg.rate_mode == "interacting":
            rate_input = h
        elif cfg.rate_mode == "yule":
            rate_input = 0.0
        else:
            rate_input = cfg.frozen_h
        events = ps.step(pop, rate_input, cfg.dt)
        if acc is not None:
            ps.accumulate_martingales(acc, events)

    res = ReplicaResult(int(N), int(replica), np.array(times), np.array(masses),
                        np.array(fields) if keep_fields else None,
                        mass_identity_error=identity_err)
    if acc is not None:
        res.m1, res.m2 = float(acc.m1), float(acc.m2)
    if wr is not None:
        res.psi = wr.finish(n_steps * cfg.dt, h.values)
    if track:
        res.final_population = pop
    res.runtime = time.perf_counter() - start
    return res


def time_regularity_statistic(fields: np.ndarray, times: np.ndarray, gamma: float, grid) -> float:
    """Double sum over i != j of ||h_i - h_j||^2_{W^{-2,2}} / |t_i - t_j|^{1+2 gamma}, rectangle weights."""
    times = np.asarray(times, dtype=float)
    n = times.size
    if n < 20:
        raise ValueError(f"time regularity needs at least 20 snapshot times, got {n}")
    if not 0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    dts = np.diff(times)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * dts[0]:
        raise ValueError("snapshot times must be uniformly spaced")
    w = _parseval_weights(grid) * (1.0 + wavenumber_squared(grid)) ** -2.0
    scale = grid.cell_volume / grid.G**grid.d
    spectra = [forward(f) for f in fields]
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            diff = spectra[i] - spectra[j]
            sq = float(np.sum(w * (diff.real**2 + diff.imag**2))) * scale
            total += 2.0 * sq / abs(times[i] - times[j]) ** (1 + 2 * gamma)
    return total * dts[0] ** 2


# -- worker pool -------------------------------------------------------------

def run_tasks(fn, tasks: list, threads: int = 1) -> list:
    """Map ``fn`` over ``tasks`` in order; results never depend on ``threads``."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
        return list(pool.map(fn, tasks, chunksize=1))
