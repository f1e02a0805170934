"""Run archives: config copy, raw and derived CSV tables, snapshots, summary, manifest.

Layout::

    config.yaml            resolved configuration
    raw/<study>.csv        one row per measurement, study name first
    tables/<study>_<name>.csv
    tables/<study>_long.csv  long format (study, N, replica, t, metric, value)
    snapshots/<name>.bin   headered little-endian float64 fields
    summary.json           pass/fail per contract
    timings.json           wall-clock runtimes (not reproducible, not hashed into tables)
    manifest.json          versions, seeds, stream construction, sha256 of every artifact
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import struct
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .grid_spectral import GridSpec

MAGIC = b"FKPPSNAP"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sIIIdd")
STREAM_CONSTRUCTION = (
    "SplitMix64 key folding: run key = derive(seed, N, replica); root particle k key = derive(run, k); "
    "child i key = derive(parent, i); draws = mix(mix(key ^ derive(0x5EED, step, channel)) + golden)"
)
_KEY_COLUMNS = ("study", "N", "replica", "t")


# -- snapshots ---------------------------------------------------------------

def write_snapshot(path, grid: GridSpec, t: float, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise ValueError("snapshot values do not match the grid shape")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, SNAPSHOT_VERSION, grid.d, grid.G, grid.L, float(t)))
        fh.write(values.tobytes())


def read_snapshot(path) -> tuple[GridSpec, float, np.ndarray]:
    data = Path(path).read_bytes()
    magic, version, d, G, L, t = _HEADER.unpack_from(data)
    if magic != MAGIC or version != SNAPSHOT_VERSION:
        raise ValueError(f"{path} is not a version {SNAPSHOT_VERSION} snapshot")
    grid = GridSpec(d, L, G)
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if values.size != G**d:
        raise ValueError(f"{path} is truncated")
    return grid, t, values.reshape(grid.shape).astype(float)


# -- CSV ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _columns(rows) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    return cols


def csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = _columns(rows)
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def _parse(v: str):
    if v == "":
        return None
    if v in ("true", "false"):
        return v == "true"
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def long_format(rows: list[dict]) -> list[dict]:
    """One (study, N, replica, t, metric, value) row per numeric measurement."""
    out = []
    for row in rows:
        keys = {k: row.get(k) for k in _KEY_COLUMNS}
        for k, v in row.items():
            if k in _KEY_COLUMNS or isinstance(v, (str, bool)) or v is None:
                continue
            out.append({**keys, "metric": k, "value": v})
    return out


# -- archive -----------------------------------------------------------------

def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class RunArchive:
    def __init__(self, root):
        self.root = Path(root)

    def _write(self, rel: str, text: str) -> None:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)

    def write_config(self, cfg) -> None:
        self._write("config.yaml", yaml.safe_dump(cfg.to_dict(), sort_keys=True))

    def write_raw(self, name: str, rows: list[dict]) -> None:
        self._write(f"raw/{name}.csv", csv_text(rows))
        self._write(f"tables/{name}_long.csv", csv_text(long_format(rows)))

    def write_tables(self, name: str, tables: dict[str, list[dict]]) -> None:
        for tname, rows in sorted(tables.items()):
            if rows:
                self._write(f"tables/{name}_{tname}.csv", csv_text(rows))

    def write_rows(self, rel: str, rows: list[dict]) -> None:
        self._write(rel, csv_text(rows))

    def write_snapshots(self, snaps) -> None:
        (self.root / "snapshots").mkdir(parents=True, exist_ok=True)
        for name, grid, t, values in snaps:
            write_snapshot(self.root / "snapshots" / f"{name}.bin", grid, t, values)

    def write_summary(self, contracts: dict[str, dict[str, dict]]) -> bool:
        passed = all(c["passed"] is not False for cs in contracts.values() for c in cs.values())
        failing = sorted(f"{s}.{n}" for s, cs in contracts.items() for n, c in cs.items() if c["passed"] is False)
        doc = {"all_passed": passed, "failing": failing, "studies": contracts}
        self._write("summary.json", json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
        return passed

    def write_timings(self, timings: dict) -> None:
        self._write("timings.json", json.dumps(timings, indent=2, sort_keys=True) + "\n")

    def write_manifest(self, cfg, command: str) -> dict:
        artifacts = {}
        for path in sorted(self.root.rglob("*")):
            if path.is_file() and path.name != "manifest.json":
                artifacts[path.relative_to(self.root).as_posix()] = sha256(path)
        doc = {
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "command": command,
            "base_seed": cfg.seed,
            "stream_construction": STREAM_CONSTRUCTION,
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "artifacts": artifacts,
        }
        self._write("manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return doc

    def raw_studies(self) -> dict[str, list[dict]]:
        return {p.stem: read_csv(p) for p in sorted((self.root / "raw").glob("*.csv"))}

    def verify(self) -> list[str]:
        """Artifacts whose content no longer matches the manifest hash."""
        doc = json.loads((self.root / "manifest.json").read_text())
        return [rel for rel, h in doc["artifacts"].items()
                if not (self.root / rel).exists() or sha256(self.root / rel) != h]


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o)}")
