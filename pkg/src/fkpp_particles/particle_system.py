"""Branching Brownian particles with density-suppressed proliferation.

Each living particle carries an integrated intensity and an Exp(1) threshold;
it branches into two children, born at its death position, in the step where
the intensity first reaches the threshold. Positions follow dX = sqrt(2) dB
with Euler steps, and the rate (1 - h(X))^+ is frozen at the pre-move position.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng
from .grid_spectral import GridField, GridSpec, forward, gradient, interpolate, inverse
from .kernels import MollifierSpec, kernel_spectrum

MAX_RATE_STEP = 0.1


@dataclass(frozen=True)
class Label:
    root: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.root < 1:
            raise ValueError("root index starts at 1")
        if any(i not in (1, 2) for i in self.path):
            raise ValueError("child path entries must be 1 or 2")

    @property
    def generation(self) -> int:
        return len(self.path)

    def parent(self) -> "Label":
        if not self.path:
            raise ValueError(f"{self} is an initial particle and has no parent")
        return Label(self.root, self.path[:-1])

    def child(self, i: int) -> "Label":
        return Label(self.root, self.path + (i,))

    def key(self, run_key: int) -> int:
        k = rng.derive(run_key, self.root)
        for i in self.path:
            k = rng.derive(k, i)
        return k

    def __str__(self) -> str:
        return ".".join(str(p) for p in (self.root, *self.path))


class Genealogy:
    """Append-only record of every particle that has lived."""

    _FIELDS = (("root", np.int64), ("parent", np.int64), ("child", np.int8),
               ("birth", float), ("death", float))

    def __init__(self, d: int, capacity: int = 1024):
        self.d = d
        self._n = 0
        self._cols = {name: np.empty(capacity, dtype=dt) for name, dt in self._FIELDS}
        self._death_pos = np.empty((capacity, d))

    def __len__(self) -> int:
        return self._n

    def _reserve(self, extra: int) -> None:
        need = self._n + extra
        cap = self._death_pos.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name, col in self._cols.items():
            grown = np.empty(cap, dtype=col.dtype)
            grown[: self._n] = col[: self._n]
            self._cols[name] = grown
        grown = np.empty((cap, self.d))
        grown[: self._n] = self._death_pos[: self._n]
        self._death_pos = grown

    def add(self, root, parent, child, birth) -> np.ndarray:
        n = len(root)
        self._reserve(n)
        sl = slice(self._n, self._n + n)
        self._cols["root"][sl] = root
        self._cols["parent"][sl] = parent
        self._cols["child"][sl] = child
        self._cols["birth"][sl] = birth
        self._cols["death"][sl] = np.nan
        self._death_pos[sl] = np.nan
        self._n += n
        return np.arange(sl.start, sl.stop, dtype=np.int64)

    def kill(self, ids: np.ndarray, time: float, positions: np.ndarray) -> None:
        self._cols["death"][ids] = time
        self._death_pos[ids] = positions

    def column(self, name: str) -> np.ndarray:
        return self._cols[name][: self._n]

    @property
    def roots(self) -> np.ndarray:
        return self.column("root")

    @property
    def parents(self) -> np.ndarray:
        return self.column("parent")

    @property
    def birth_times(self) -> np.ndarray:
        return self.column("birth")

    def death_times(self) -> np.ndarray:
        return self.column("death")

    def dead(self) -> np.ndarray:
        return np.flatnonzero(~np.isnan(self.death_times()))

    def death_position(self, rec: int) -> np.ndarray:
        return self._death_pos[rec]

    def label(self, rec: int) -> Label:
        parents, child = self.parents, self.column("child")
        path = []
        while parents[rec] >= 0:
            path.append(int(child[rec]))
            rec = int(parents[rec])
        return Label(int(self.roots[rec]), tuple(reversed(path)))

    def lifetimes(self) -> np.ndarray:
        """Durations of completed lives."""
        ids = self.dead()
        return self.death_times()[ids] - self.birth_times[ids]


@dataclass
class Population:
    grid: GridSpec
    N0: int
    run_key: int
    pos: np.ndarray
    keys: np.ndarray
    lam_acc: np.ndarray
    clock: np.ndarray
    rec: np.ndarray
    t: float = 0.0
    step_index: int = 0
    genealogy: Genealogy | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.keys.shape[0]

    @property
    def d(self) -> int:
        return self.grid.d


def mass(pop: Population) -> float:
    """Relative mass Card(alive) / N."""
    return pop.size / pop.N0


def init(N: int, u0, run_key: int, grid: GridSpec, track: bool = False) -> Population:
    """floor(m N) i.i.d. draws from u0 / m, each with a fresh Exp(1) clock.

    ``u0`` is an initial-data object exposing ``mass``, ``d`` and
    ``sample(keys) -> positions``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    m = float(u0.mass)
    if not (np.isfinite(m) and m >= 0):
        raise ValueError(f"initial data must have finite nonnegative mass, got {m}")
    if u0.d != grid.d:
        raise ValueError("initial data and grid dimensions differ")
    n = int(np.floor(m * N + 1e-9))
    roots = np.arange(1, n + 1, dtype=np.int64)
    keys = rng.derive_each(run_key, roots)
    pos = grid.wrap(np.asarray(u0.sample(keys), dtype=float).reshape(n, grid.d))
    gen = None
    rec = np.full(n, -1, dtype=np.int64)
    if track:
        gen = Genealogy(grid.d)
        rec = gen.add(roots, np.full(n, -1), np.zeros(n), 0.0)
    return Population(
        grid=grid, N0=int(N), run_key=int(run_key), pos=pos, keys=keys,
        lam_acc=np.zeros(n), clock=rng.exponentials(keys, 0, rng.CLOCK), rec=rec,
        genealogy=gen,
    )


@dataclass
class StepEvents:
    t: float
    dt: float
    positions: np.ndarray
    increments: np.ndarray
    rates: np.ndarray
    branched: np.ndarray
    branch_positions: np.ndarray
    branch_keys: np.ndarray


def particle_rates(pop: Population, h: GridField | float) -> np.ndarray:
    if isinstance(h, GridField):
        hv = interpolate(h, pop.pos)
    else:
        hv = np.full(pop.size, float(h))
    return np.maximum(1.0 - hv, 0.0)


def step(pop: Population, h: GridField | float, dt: float) -> StepEvents:
    """Advance the population by one Euler step, in place.

    ``h`` is the mollified density on the grid, or a constant to freeze it.
    """
    if not dt > 0:
        raise ValueError("time step must be positive")
    lam = particle_rates(pop, h)
    if lam.size and lam.max() * dt > MAX_RATE_STEP:
        raise ValueError(f"max rate * dt = {lam.max() * dt:.3g} exceeds {MAX_RATE_STEP}; reduce dt")
    d = pop.d
    xi = np.empty((pop.size, d))
    for axis in range(d):
        xi[:, axis] = rng.normals(pop.keys, pop.step_index, rng.GAUSS + axis)
    pre = pop.pos
    pop.pos = pop.grid.wrap(pre + np.sqrt(2.0 * dt) * xi)
    pop.lam_acc = pop.lam_acc + lam * dt

    hit = np.flatnonzero(pop.lam_acc >= pop.clock)
    hit = hit[np.argsort(pop.keys[hit], kind="stable")]
    events = StepEvents(
        t=pop.t, dt=dt, positions=pre, increments=xi, rates=lam, branched=hit,
        branch_positions=pop.pos[hit].copy(), branch_keys=pop.keys[hit].copy(),
    )
    t_end = pop.t + dt
    if hit.size:
        _branch(pop, hit, t_end)
    pop.t = t_end
    pop.step_index += 1
    return events


def _branch(pop: Population, hit: np.ndarray, t_end: float) -> None:
    parent_keys = pop.keys[hit]
    k1 = rng.derive_many(parent_keys, 1)
    k2 = rng.derive_many(parent_keys, 2)
    birth_pos = pop.pos[hit]
    if pop.genealogy is not None:
        gen = pop.genealogy
        parents = pop.rec[hit]
        gen.kill(parents, t_end, birth_pos)
        roots = gen.roots[parents]
        r1 = gen.add(roots, parents, np.full(hit.size, 1), t_end)
        r2 = gen.add(roots, parents, np.full(hit.size, 2), t_end)
    else:
        r1 = r2 = np.full(hit.size, -1, dtype=np.int64)
    # first child takes the parent's slot, second child is appended
    pop.keys = pop.keys.copy()
    pop.keys[hit] = k1
    pop.lam_acc[hit] = 0.0
    pop.clock = pop.clock.copy()
    pop.clock[hit] = rng.exponentials(k1, 0, rng.CLOCK)
    pop.rec = pop.rec.copy()
    pop.rec[hit] = r1
    pop.keys = np.concatenate([pop.keys, k2])
    pop.pos = np.concatenate([pop.pos, birth_pos], axis=0)
    pop.lam_acc = np.concatenate([pop.lam_acc, np.zeros(hit.size)])
    pop.clock = np.concatenate([pop.clock, rng.exponentials(k2, 0, rng.CLOCK)])
    pop.rec = np.concatenate([pop.rec, r2])


def labels(pop: Population) -> list[Label]:
    if pop.genealogy is None:
        raise ValueError("population was created without genealogy tracking")
    return [pop.genealogy.label(int(r)) for r in pop.rec]


def snapshot_rows(pop: Population) -> list[tuple]:
    """(time, label, position..., alive) rows: living particles, then dead ones."""
    rows = []
    if pop.genealogy is None:
        raise ValueError("population was created without genealogy tracking")
    gen = pop.genealogy
    for r, p in zip(pop.rec.tolist(), pop.pos):
        rows.append((pop.t, str(gen.label(r)), *p.tolist(), 1))
    for r in gen.dead().tolist():
        rows.append((pop.t, str(gen.label(r)), *gen.death_position(r).tolist(), 0))
    return rows


# -- martingale statistics ---------------------------------------------------

@dataclass
class MartingaleAccumulator:
    """Running values of int phi dM^1 dx and int phi dM^2 dx."""

    grad_smoothed: list[GridField]
    minus_smoothed: GridField
    N0: int
    time_profile: Callable[[float], float] = lambda t: 1.0
    m1: float = 0.0
    m2: float = 0.0

    @classmethod
    def for_test_function(cls, phi: GridField, spec: MollifierSpec, N0: int,
                          time_profile: Callable[[float], float] | None = None) -> "MartingaleAccumulator":
        khat = kernel_spectrum(spec, N0, phi.spec)
        smoothed = GridField(phi.spec, inverse(forward(phi.values) * khat, phi.spec))
        acc = cls(gradient(smoothed), GridField(phi.spec, -smoothed.values), N0)
        if time_profile is not None:
            acc.time_profile = time_profile
        return acc


def accumulate_martingales(acc: MartingaleAccumulator, events: StepEvents) -> MartingaleAccumulator:
    n = events.positions.shape[0]
    if events.increments.shape != events.positions.shape or events.rates.shape != (n,):
        raise ValueError("increments, rates and positions do not describe the same population")
    c = acc.time_profile(events.t)
    if c == 0 or n == 0:
        return acc
    dt = events.dt
    drift = 0.0
    for axis, g in enumerate(acc.grad_smoothed):
        drift += float(np.dot(interpolate(g, events.positions), events.increments[:, axis]))
    acc.m1 += c * np.sqrt(2.0) / acc.N0 * drift * np.sqrt(dt)
    jumps = float(interpolate(acc.minus_smoothed, events.branch_positions).sum()) if events.branched.size else 0.0
    comp = float(np.dot(interpolate(acc.minus_smoothed, events.positions), events.rates)) * dt
    acc.m2 += c / acc.N0 * (jumps - comp)
    return acc
