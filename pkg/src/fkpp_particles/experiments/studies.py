"""Monte Carlo studies.

Each study runs replicas into raw rows (plain dicts of ints and floats) and
then calls a pure analysis function on those rows. The analysis functions are
what ``analyze`` re-runs on an archive, so tables depend only on raw data and
the config.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache, partial

import numpy as np

from .. import particle_system as ps
from ..density_field import density_from_positions
from ..fkpp_pde import LOGISTIC, solve
from ..grid_spectral import GridField, GridSpec, sobolev_norm
from .config import RunConfig, check_box
from .runner import replica_key, run_tasks, simulate_replica, time_regularity_statistic

SLOPE_TOL = 0.1
EXP_MOMENT = 0.1


@dataclass
class StudyResult:
    name: str
    raw: list[dict]
    tables: dict[str, list[dict]] = field(default_factory=dict)
    contracts: dict[str, dict] = field(default_factory=dict)
    runtimes: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] is not False for c in self.contracts.values())


def contract(passed, value, threshold, detail: str = "") -> dict:
    return {"passed": None if passed is None else bool(passed), "value": value,
            "threshold": threshold, "detail": detail}


def _tasks(cfg: RunConfig, N_list=None, replicas=None):
    N_list = cfg.N_list if N_list is None else N_list
    R = cfg.replicas if replicas is None else replicas
    return [(int(N), r) for N in N_list for r in range(R)]


def _group(rows, *keys):
    out: dict = {}
    for row in rows:
        out.setdefault(tuple(row[k] for k in keys), []).append(row)
    return out


def loglog_slope(N, values) -> float:
    N, values = np.asarray(N, dtype=float), np.asarray(values, dtype=float)
    if N.size < 2 or np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(N), np.log(values), 1)[0])


def strictly_decreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) < 0))


def _run(name, worker, cfg, tasks, analyze) -> StudyResult:
    results = run_tasks(partial(worker, cfg), tasks, cfg.threads)
    raw = [row for rows, _ in results for row in rows]
    res = StudyResult(name, raw, runtimes=[rt for _, rt in results])
    res.tables, res.contracts = analyze(raw, cfg)
    return res


# -- convergence -------------------------------------------------------------

@lru_cache(maxsize=4)
def reference_fields(cfg: RunConfig) -> np.ndarray:
    """Logistic FKPP solution at the snapshot times, solved on a refined grid and restricted to cfg.grid."""
    fine = cfg.grid.refined(cfg.pde_refine)
    sol = solve(cfg.u0.field(fine), LOGISTIC, cfg.T, cfg.dt, cfg.snapshot_times)
    r = cfg.pde_refine
    return sol.fields[(slice(None),) + (slice(None, None, r),) * cfg.d]


def window_mask(cfg: RunConfig) -> np.ndarray:
    mask = np.ones(cfg.grid.shape, dtype=bool)
    for m in cfg.grid.mesh():
        mask &= np.abs(m) <= cfg.window
    return mask


def window_taper(cfg: RunConfig) -> np.ndarray:
    """Smooth cutoff: 1 on the window, 0 beyond one unit outside it."""
    out = np.ones(cfg.grid.shape)
    for m in cfg.grid.mesh():
        s = np.clip(np.abs(m) - cfg.window, 0.0, 1.0)
        a = np.where(s < 1, np.exp(-1.0 / np.maximum(1 - s, 1e-300)), 0.0)
        b = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        out = out * a / (a + b)
    return out


def _trapezoid_weights(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    w = np.zeros_like(times)
    if times.size > 1:
        d = np.diff(times)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def convergence_errors(cfg: RunConfig, fields: np.ndarray, times) -> tuple[float, float, float]:
    """(sup error on the window, windowed L2(0,T;W^alpha) error, max_t L2 norm of h)."""
    ref = reference_fields(cfg)
    if fields.shape != ref.shape:
        raise ValueError("snapshot fields do not match the reference solution")
    mask = window_mask(cfg)
    diff = fields - ref
    sup_err = float(np.max(np.abs(diff[:, mask]))) if diff.size else 0.0
    taper = window_taper(cfg)
    grid = cfg.grid
    w = _trapezoid_weights(times)
    sob = sum(wk * sobolev_norm(GridField(grid, taper * dk), cfg.alpha) ** 2 for wk, dk in zip(w, diff))
    linf_l2 = max(GridField(grid, f).l2_norm() for f in fields)
    return sup_err, float(np.sqrt(sob)), float(linf_l2)


def _convergence_worker(cfg, task):
    N, r = task
    res = simulate_replica(cfg, N, r, keep_fields=True)
    sup_err, sob_err, l2 = convergence_errors(cfg, res.fields, res.times)
    row = dict(study="convergence", N=N, replica=r, sup_error=sup_err, sobolev_error=sob_err,
               linf_l2=l2, final_mass=float(res.masses[-1]))
    return [row], res.runtime


def _median_iqr(v):
    q1, med, q3 = np.percentile(np.asarray(v, dtype=float), [25, 50, 75])
    return float(med), float(q3 - q1)


def analyze_convergence(raw, cfg: RunConfig):
    per_N = []
    for (N,), rows in sorted(_group(raw, "N").items()):
        out = dict(study="convergence", N=N, replicas=len(rows))
        for col in ("sup_error", "sobolev_error", "linf_l2"):
            out[f"median_{col}"], out[f"iqr_{col}"] = _median_iqr([r[col] for r in rows])
        per_N.append(out)
    sup = [r["median_sup_error"] for r in per_N]
    sob = [r["median_sobolev_error"] for r in per_N]
    contracts = {}
    if cfg.beta < 0.5 and len(per_N) >= 2:
        contracts["median_sup_error_strictly_decreasing"] = contract(strictly_decreasing(sup), sup, "strict decrease")
        ok = all(b <= 1.1 * a for a, b in zip(sob, sob[1:]))
        contracts["median_sobolev_error_nonincreasing_10pct"] = contract(ok, sob, "each <= 1.1 x previous")
    else:
        contracts["median_sup_error_strictly_decreasing"] = contract(
            None, sup, "strict decrease", "not asserted for beta >= 1/2 or a single N")
    expected = {(N, r) for N, r in _tasks(cfg)}
    got = {(row["N"], row["replica"]) for row in raw}
    contracts["rows_complete"] = contract(expected == got, len(got), len(expected))
    contracts["errors_nonnegative"] = contract(
        all(row[c] >= 0 for row in raw for c in ("sup_error", "sobolev_error", "linf_l2")), None, ">= 0")
    return {"per_N": per_N}, contracts


def convergence_study(cfg: RunConfig) -> StudyResult:
    check_box(cfg)
    reference_fields(cfg)
    return _run("convergence", _convergence_worker, cfg, _tasks(cfg), analyze_convergence)


# -- martingale scaling ------------------------------------------------------

MIN_MARTINGALE_REPLICAS = 100


def _martingale_worker(cfg, task):
    N, r = task
    res = simulate_replica(cfg, N, r, martingales=True)
    return [dict(study="martingale", N=N, replica=r, m1=res.m1, m2=res.m2)], res.runtime


def analyze_martingale(raw, cfg: RunConfig):
    per_N = []
    for (N,), rows in sorted(_group(raw, "N").items()):
        per_N.append(dict(study="martingale", N=N, replicas=len(rows),
                          var_m1=float(np.var([r["m1"] for r in rows], ddof=1)),
                          var_m2=float(np.var([r["m2"] for r in rows], ddof=1))))
    Ns = [r["N"] for r in per_N]
    bound = (cfg.beta - 1) + 0.15
    contracts, slopes = {}, {}
    for i in (1, 2):
        v = [r[f"var_m{i}"] for r in per_N]
        if all(x == 0 for x in v):
            contracts[f"slope_m{i}"] = contract(None, None, bound, "degenerate: all variances are zero")
            continue
        s = loglog_slope(Ns, v)
        slopes[i] = s
        contracts[f"slope_m{i}"] = contract(bool(np.isfinite(s) and s <= bound), s, bound)
    summary = [dict(study="martingale", statistic=f"m{i}", slope=slopes.get(i, float("nan")), bound=bound)
               for i in (1, 2)]
    return {"per_N": per_N, "slopes": summary}, contracts


def martingale_scaling(cfg: RunConfig) -> StudyResult:
    if cfg.replicas < MIN_MARTINGALE_REPLICAS:
        raise ValueError(f"martingale scaling needs at least {MIN_MARTINGALE_REPLICAS} replicas, got {cfg.replicas}")
    check_box(cfg)
    return _run("martingale", _martingale_worker, cfg, _tasks(cfg), analyze_martingale)


# -- mass statistics ---------------------------------------------------------

MIN_MASS_REPLICAS = 200


def _mass_worker(cfg, task):
    N, r = task
    res = simulate_replica(cfg, N, r)
    rows = [dict(study="mass", N=N, replica=r, t=float(t), mass=float(m)) for t, m in zip(res.times, res.masses)]
    return rows, res.runtime


def bootstrap_ci(values, seed: int, n_boot: int = 1000, level: float = 0.95) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    gen = np.random.default_rng(seed)
    means = v[gen.integers(0, v.size, size=(n_boot, v.size))].mean(axis=1)
    lo, hi = np.percentile(means, [50 * (1 - level), 50 * (1 + level)])
    return float(lo), float(hi)


def analyze_mass(raw, cfg: RunConfig):
    table, moments = [], []
    contracts = {}
    m0 = cfg.u0.mass
    for (N,), rows in sorted(_group(raw, "N").items()):
        by_t = sorted(_group(rows, "t").items())
        means = []
        for (t,), rs in by_t:
            v = np.array([r["mass"] for r in rs])
            lo, hi = bootstrap_ci(v, cfg.seed)
            se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
            means.append(float(v.mean()))
            table.append(dict(study="mass", N=N, t=t, mean_mass=float(v.mean()), se=se, ci_low=lo, ci_high=hi))
        final = np.array([r["mass"] for r in by_t[-1][1]])
        em = np.exp(EXP_MOMENT * final)
        lo, hi = bootstrap_ci(em, cfg.seed)
        moments.append(dict(study="mass", N=N, exp_moment=float(em.mean()), ci_low=lo, ci_high=hi, ci_width=hi - lo))
        contracts[f"mean_nondecreasing_N{N}"] = contract(bool(np.all(np.diff(means) >= 0)), means, "non-decreasing")
        se_T = table[-1]["se"]
        T = by_t[-1][0][0]
        bound = float(np.exp(T) * m0 + 3 * se_T)
        contracts[f"yule_bound_N{N}"] = contract(means[-1] <= bound, means[-1], bound)
    widths = [m["ci_width"] for m in moments]
    if len(widths) >= 2:
        ok = all(b <= 1.1 * a + 1e-15 for a, b in zip(widths, widths[1:]))
        contracts["exp_moment_ci_width_not_growing"] = contract(ok, widths, "each <= 1.1 x previous")
    return {"per_t": table, "exp_moment": moments}, contracts


def mass_stats(cfg: RunConfig) -> StudyResult:
    if cfg.replicas < MIN_MASS_REPLICAS:
        raise ValueError(f"mass statistics need at least {MIN_MASS_REPLICAS} replicas, got {cfg.replicas}")
    check_box(cfg)
    return _run("mass", _mass_worker, cfg, _tasks(cfg), analyze_mass)


# -- Sobolev boundedness -----------------------------------------------------

def _sobolev_worker(cfg, task):
    N, r = task
    res = simulate_replica(cfg, N, r, keep_fields=True)
    rows = []
    for t, f in zip(res.times, res.fields):
        if t == 0 and cfg.rho0 < cfg.alpha:
            continue
        g = GridField(cfg.grid, f)
        rows.append(dict(study="sobolev", N=N, replica=r, t=float(t),
                         sq_norm_alpha=sobolev_norm(g, cfg.alpha) ** 2, sq_norm_l2=g.l2_norm() ** 2))
    return rows, res.runtime


def analyze_sobolev(raw, cfg: RunConfig):
    table = []
    for (N, t), rows in sorted(_group(raw, "N", "t").items()):
        table.append(dict(study="sobolev", N=N, t=t,
                          mean_sq_norm_alpha=float(np.mean([r["sq_norm_alpha"] for r in rows])),
                          mean_sq_norm_l2=float(np.mean([r["sq_norm_l2"] for r in rows]))))
    slopes = []
    for (t,), rows in sorted(_group(table, "t").items()):
        if t == 0:
            continue
        Ns = [r["N"] for r in rows]
        slopes.append(dict(study="sobolev", t=t,
                           slope_alpha=loglog_slope(Ns, [r["mean_sq_norm_alpha"] for r in rows]),
                           slope_l2=loglog_slope(Ns, [r["mean_sq_norm_l2"] for r in rows])))
    contracts = {}
    if len(cfg.N_list) >= 2:
        worst = max(max(s["slope_alpha"], s["slope_l2"]) for s in slopes)
        contracts["sobolev_slope_max"] = contract(worst <= SLOPE_TOL, worst, SLOPE_TOL)
    return {"per_N_t": table, "slopes": slopes}, contracts


def sobolev_boundedness(cfg: RunConfig) -> StudyResult:
    check_box(cfg)
    return _run("sobolev", _sobolev_worker, cfg, _tasks(cfg), analyze_sobolev)


# -- initial bound -----------------------------------------------------------

def initial_density(cfg: RunConfig, N: int, replica: int) -> GridField:
    pop = ps.init(N, cfg.u0, replica_key(cfg.seed, N, replica), cfg.grid)
    return density_from_positions(pop.pos, N, cfg.mollifier, cfg.grid, cfg.deposit)


def _initial_worker(cfg, task):
    N, r = task
    h0 = initial_density(cfg, N, r)
    return [dict(study="initial", N=N, replica=r, sq_norm=sobolev_norm(h0, cfg.rho0) ** 2)], 0.0


def analyze_initial(raw, cfg: RunConfig):
    table = []
    for (N,), rows in sorted(_group(raw, "N").items()):
        v = np.array([r["sq_norm"] for r in rows])
        table.append(dict(study="initial", N=N, mean_sq_norm=float(v.mean()),
                          se=float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0))
    contracts = {}
    if len(table) >= 2:
        s = loglog_slope([r["N"] for r in table], [r["mean_sq_norm"] for r in table])
        contracts["initial_slope"] = contract(bool(s <= SLOPE_TOL), s, SLOPE_TOL)
    return {"per_N": table}, contracts


def initial_bound(cfg: RunConfig) -> StudyResult:
    if not cfg.u0.smooth:
        raise ValueError(f"invalid input: u0 of kind {cfg.u0_kind!r} is not in W^(rho0,2) at the grid scale")
    return _run("initial", _initial_worker, cfg, _tasks(cfg), analyze_initial)


# -- time regularity ---------------------------------------------------------

MIN_TIME_POINTS = 20


def _time_worker(cfg, task):
    N, r = task
    res = simulate_replica(cfg, N, r, keep_fields=True)
    stat = time_regularity_statistic(res.fields, res.times, cfg.gamma, cfg.grid)
    return [dict(study="time_regularity", N=N, replica=r, statistic=stat)], res.runtime


def analyze_time(raw, cfg: RunConfig):
    table = []
    for (N,), rows in sorted(_group(raw, "N").items()):
        v = np.array([r["statistic"] for r in rows])
        table.append(dict(study="time_regularity", N=N, p95=float(np.percentile(v, 95)),
                          median=float(np.median(v))))
    contracts = {}
    if len(table) >= 2:
        p = [r["p95"] for r in table]
        ratio = max(p) / min(p) if min(p) > 0 else float("inf")
        contracts["p95_flat_factor2"] = contract(ratio <= 2.0, ratio, 2.0)
    return {"per_N": table}, contracts


def time_regularity(cfg: RunConfig) -> StudyResult:
    if len(cfg.snapshot_times) < MIN_TIME_POINTS:
        raise ValueError(f"time regularity needs at least {MIN_TIME_POINTS} snapshot times")
    check_box(cfg)
    return _run("time_regularity", _time_worker, cfg, _tasks(cfg), analyze_time)


# -- weak residual -----------------------------------------------------------

def _weak_worker(cfg, task):
    N, r = task
    res = simulate_replica(cfg, N, r, weak_residual=True)
    return [dict(study="weak_residual", N=N, replica=r, psi=res.psi)], res.runtime


def analyze_weak(raw, cfg: RunConfig):
    table = []
    for (N,), rows in sorted(_group(raw, "N").items()):
        v = np.abs([r["psi"] for r in rows])
        table.append(dict(study="weak_residual", N=N, median_abs_psi=float(np.median(v))))
    contracts = {}
    if len(table) >= 2:
        med = [r["median_abs_psi"] for r in table]
        contracts["median_abs_psi_strictly_decreasing"] = contract(strictly_decreasing(med), med, "strict decrease")
    return {"per_N": table}, contracts


def weak_residual(cfg: RunConfig) -> StudyResult:
    tf = cfg.test_function()
    if not tf.support_fits(cfg.grid):
        raise ValueError("test function support touches the box boundary")
    check_box(cfg)
    return _run("weak_residual", _weak_worker, cfg, _tasks(cfg), analyze_weak)


STUDIES = {
    "convergence": (convergence_study, analyze_convergence),
    "martingale": (martingale_scaling, analyze_martingale),
    "mass": (mass_stats, analyze_mass),
    "sobolev": (sobolev_boundedness, analyze_sobolev),
    "initial": (initial_bound, analyze_initial),
    "time_regularity": (time_regularity, analyze_time),
    "weak_residual": (weak_residual, analyze_weak),
}
