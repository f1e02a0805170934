"""Command line entry point: ``fkpp-particles <subcommand> --out DIR [--config FILE | --preset NAME]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time

from .archive import RunArchive
from .experiments.config import ConfigError, from_mapping, parse_config, preset
from .experiments.single_runs import analyze_pde, analyze_simulate, pde_run, simulate_run
from .experiments.studies import STUDIES

log = logging.getLogger("fkpp_particles")

SUBCOMMANDS = ("simulate", "solve-pde", "converge", "scaling", "mass", "diagnose", "analyze")
_STUDY_OF = {"converge": ["convergence"], "scaling": ["martingale"], "mass": ["mass"],
             "diagnose": ["sobolev", "initial", "time_regularity", "weak_residual"]}
ANALYZERS = {"pde": analyze_pde, "simulate": analyze_simulate, **{k: v[1] for k, v in STUDIES.items()}}

EXIT_OK, EXIT_CONTRACT, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fkpp-particles", description=__doc__)
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat YAML run configuration")
    p.add_argument("--preset", choices=("desk", "full"), help="built-in configuration (overridden by --config)")
    p.add_argument("--out", required=True, help="archive directory (read and rewritten by 'analyze')")
    p.add_argument("--seed", type=int, help="64-bit base seed")
    p.add_argument("--threads", type=int, help="worker processes; results do not depend on it")
    p.add_argument("--allow-supercritical", action="store_true", default=None,
                   help="accept beta >= 1/2 and alpha0 above its strict range")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args, particles: bool):
    overrides = dict(seed=args.seed, threads=args.threads, allow_supercritical=args.allow_supercritical)
    if args.config:
        return parse_config(args.config, particles=particles, **overrides)
    if args.preset:
        return preset(args.preset, **{k: v for k, v in overrides.items() if v is not None})
    raise ConfigError("either --config or --preset is required")


def _analyze(archive: RunArchive) -> bool:
    import yaml
    cfg = from_mapping(yaml.safe_load((archive.root / "config.yaml").read_text()), particles=False)
    contracts = {}
    for name, rows in archive.raw_studies().items():
        if name not in ANALYZERS:
            raise ConfigError(f"archive contains raw data for unknown study {name!r}")
        tables, contracts[name] = ANALYZERS[name](rows, cfg)
        archive.write_tables(name, tables)
    passed = archive.write_summary(contracts)
    archive.write_manifest(cfg, "analyze")
    return passed


def run(subcommand: str, args) -> int:
    archive = RunArchive(args.out)
    if subcommand == "analyze":
        if not (archive.root / "config.yaml").exists():
            raise ConfigError(f"{archive.root} is not a run archive (no config.yaml)")
        return EXIT_OK if _analyze(archive) else EXIT_CONTRACT

    cfg = load_config(args, particles=subcommand != "solve-pde")
    archive.root.mkdir(parents=True, exist_ok=True)
    archive.write_config(cfg)
    contracts, timings = {}, {}
    start = time.perf_counter()
    if subcommand == "solve-pde":
        res, snaps = pde_run(cfg)
        archive.write_snapshots(snaps)
        results = [res]
    elif subcommand == "simulate":
        res, snaps, particles = simulate_run(cfg)
        archive.write_snapshots(snaps)
        for N, rows in particles.items():
            archive.write_rows(f"tables/particles_N{N}.csv",
                               [dict(zip(("t", "label", *[f"x{a}" for a in range(cfg.d)], "alive"), r))
                                for r in rows])
        results = [res]
    else:
        results = []
        for name in _STUDY_OF[subcommand]:
            log.info("running %s", name)
            results.append(STUDIES[name][0](cfg))
    for res in results:
        archive.write_raw(res.name, res.raw)
        archive.write_tables(res.name, res.tables)
        contracts[res.name] = res.contracts
        timings[res.name] = {"replica_seconds": res.runtimes}
    timings["total_seconds"] = time.perf_counter() - start
    passed = archive.write_summary(contracts)
    archive.write_timings(timings)
    archive.write_manifest(cfg, subcommand)
    for name, cs in contracts.items():
        for cname, c in cs.items():
            status = {True: "PASS", False: "FAIL", None: "SKIP"}[c["passed"]]
            print(f"{status} {name}.{cname}: value={c['value']} threshold={c['threshold']}")
    return EXIT_OK if passed else EXIT_CONTRACT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args.subcommand, args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
