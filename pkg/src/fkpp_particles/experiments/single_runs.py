"""Single deterministic PDE solves and single particle runs, with their checks."""
from __future__ import annotations

import numpy as np

from ..fkpp_pde import BOUND_TOL, ReactionKind, check_bounds, nonlocal_kind, solve
from ..grid_spectral import GridField
from .config import RunConfig
from .runner import simulate_replica
from .studies import StudyResult, _group, contract

MASS_IDENTITY_TOL = 1e-8
LOGISTIC_TOL = 1e-6


def logistic_closed_form(c: float, t) -> np.ndarray:
    """Solution of u' = u(1-u), u(0) = c."""
    e = np.exp(np.asarray(t, dtype=float))
    return c * e / (1.0 - c + c * e)


def reaction_for(cfg: RunConfig) -> ReactionKind:
    if cfg.reaction == "nonlocal":
        return nonlocal_kind(cfg.mollifier, cfg.N_list[0])
    return ReactionKind(cfg.reaction)


def pde_run(cfg: RunConfig) -> tuple[StudyResult, list]:
    """Solve the PDE from cfg.u0; returns the study result and (name, grid, t, values) snapshots."""
    grid = cfg.grid
    u0 = cfg.u0.field(grid)
    sol = solve(u0, reaction_for(cfg), cfg.T, cfg.dt, cfg.snapshot_times)
    raw = []
    for t, f in zip(sol.times, sol.fields):
        g = GridField(grid, f)
        raw.append(dict(study="pde", t=float(t), min=float(f.min()), max=float(f.max()),
                        integral=g.integral(), l2=g.l2_norm()))
    res = StudyResult("pde", raw)
    res.tables, res.contracts = analyze_pde(raw, cfg)
    snaps = [(f"u_{k:04d}", grid, float(t), f) for k, (t, f) in enumerate(zip(sol.times, sol.fields))]
    return res, snaps


def analyze_pde(raw, cfg: RunConfig):
    contracts = {}
    table = []
    u0 = cfg.u0
    if u0.kind == "constant":
        for r in raw:
            exact = float(logistic_closed_form(u0.mass, r["t"]))
            table.append(dict(study="pde", t=r["t"], value=r["max"], closed_form=exact,
                              error=max(abs(r["max"] - exact), abs(r["min"] - exact))))
        worst = max(r["error"] for r in table)
        if cfg.reaction in ("logistic", "clipped") and 0 <= u0.mass <= 1:
            contracts["logistic_closed_form"] = contract(worst < LOGISTIC_TOL, worst, LOGISTIC_TOL)
    else:
        table = [dict(study="pde", t=r["t"], integral=r["integral"], max=r["max"]) for r in raw]
        m0 = raw[0]["integral"]
        ok = all(r["integral"] <= np.exp(r["t"]) * m0 * (1 + 1e-9) + 1e-12 for r in raw)
        contracts["mass_growth_bound"] = contract(ok, raw[-1]["integral"], float(np.exp(raw[-1]["t"]) * m0))
    if u0.max_value() <= 1:
        excursion = max(max(0.0, -r["min"]) for r in raw)
        excursion = max(excursion, max(max(0.0, r["max"] - 1.0) for r in raw))
        contracts["bounds_0_1"] = contract(excursion <= BOUND_TOL, excursion, BOUND_TOL)
    return {"summary": table}, contracts


def simulate_run(cfg: RunConfig) -> tuple[StudyResult, list, dict]:
    """Replica 0 for each N: mass traces, h snapshots and the final particle table."""
    raw, snaps, particles = [], [], {}
    runtimes = []
    for N in cfg.N_list:
        track = N * cfg.u0.mass <= 20000
        res = simulate_replica(cfg, N, 0, keep_fields=True, track=track)
        runtimes.append(res.runtime)
        for k, (t, m, f) in enumerate(zip(res.times, res.masses, res.fields)):
            raw.append(dict(study="simulate", N=int(N), t=float(t), mass=float(m),
                            identity_error=res.mass_identity_error))
            snaps.append((f"h_N{N}_{k:04d}", cfg.grid, float(t), f))
        if track:
            from ..particle_system import snapshot_rows
            particles[N] = snapshot_rows(res.final_population)
    out = StudyResult("simulate", raw, runtimes=runtimes)
    out.tables, out.contracts = analyze_simulate(raw, cfg)
    return out, snaps, particles


def analyze_simulate(raw, cfg: RunConfig):
    contracts, table = {}, []
    frozen_zero = cfg.rate_mode == "frozen" and cfg.frozen_h >= 1.0
    for (N,), rows in sorted(_group(raw, "N").items()):
        masses = [r["mass"] for r in rows]
        err = max(r["identity_error"] for r in rows)
        table.append(dict(study="simulate", N=N, initial_mass=masses[0], final_mass=masses[-1],
                          identity_error=err))
        contracts[f"mass_identity_N{N}"] = contract(err <= MASS_IDENTITY_TOL, err, MASS_IDENTITY_TOL)
        contracts[f"mass_nondecreasing_N{N}"] = contract(bool(np.all(np.diff(masses) >= 0)), masses[-1], ">= previous")
        if frozen_zero:
            contracts[f"mass_constant_N{N}"] = contract(len(set(masses)) == 1, masses[-1], masses[0])
    return {"per_N": table}, contracts
