import json

import numpy as np
import pytest
import yaml

from fkpp_particles.archive import RunArchive, read_csv, read_snapshot, write_snapshot
from fkpp_particles.cli import main
from fkpp_particles.grid_spectral import GridSpec

BASE = dict(d=1, beta=0.25, N_list=[200, 800], G=1024, L=20.0, T=0.2, dt=0.01, n_snapshots=20,
            replicas=3, u0_mass=1.0)


def write_config(tmp_path, **kw):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({**BASE, **kw}))
    return str(path)


def tables_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for sub in ("raw", "tables") for p in sorted((root / sub).glob("*.csv"))}


def test_snapshot_roundtrip(tmp_path):
    grid = GridSpec(2, 3.0, 16)
    vals = np.random.default_rng(0).normal(size=grid.shape)
    write_snapshot(tmp_path / "s.bin", grid, 0.25, vals)
    g, t, back = read_snapshot(tmp_path / "s.bin")
    assert g == grid and t == 0.25 and np.array_equal(back, vals)
    raw = (tmp_path / "s.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_snapshot(tmp_path / "bad.bin")


def test_solve_pde_constant_matches_logistic(tmp_path, capsys):
    cfg = write_config(tmp_path, u0_kind="constant", u0_mass=0.1, T=1.0, dt=1e-3, G=64)
    out = tmp_path / "pde"
    assert main(["solve-pde", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["all_passed"] and summary["studies"]["pde"]["logistic_closed_form"]["value"] < 1e-6
    grid, t, vals = read_snapshot(sorted((out / "snapshots").glob("*.bin"))[-1])
    assert t == pytest.approx(1.0) and np.allclose(vals, 0.23196931668, atol=1e-6)
    assert RunArchive(out).verify() == []


def test_simulate_without_rate_keeps_mass(tmp_path):
    cfg = write_config(tmp_path, rate_mode="frozen", frozen_h=1.0)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "raw" / "simulate.csv")
    assert {r["mass"] for r in rows} == {1.0}
    parts = read_csv(out / "tables" / "particles_N200.csv")
    assert len(parts) == 200 and all(r["alive"] == 1 for r in parts)


def test_bad_config_exits_with_diagnostic(tmp_path, capsys):
    cfg = write_config(tmp_path, beta=0.6)
    assert main(["converge", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert "--allow-supercritical" in capsys.readouterr().err


def test_contract_failure_exit_status(tmp_path):
    # without particles every error is zero, so "strictly decreasing" cannot hold
    cfg = write_config(tmp_path, u0_kind="zero", replicas=1)
    out = tmp_path / "conv"
    assert main(["converge", "--config", cfg, "--out", str(out)]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failing"] == ["convergence.median_sup_error_strictly_decreasing"]


def test_determinism_across_threads_and_analyze(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["converge", "--config", cfg, "--out", str(a), "--threads", "1"])
    main(["converge", "--config", cfg, "--out", str(b), "--threads", "3"])
    first = tables_bytes(a)
    assert first and first == tables_bytes(b)
    summary = (a / "summary.json").read_bytes()
    main(["analyze", "--out", str(a)])
    assert tables_bytes(a) == first
    assert (a / "summary.json").read_bytes() == summary
    assert RunArchive(a).verify() == []
