"""Run configuration: a flat YAML mapping validated into a frozen RunConfig."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..grid_spectral import GridSpec
from ..kernels import MollifierSpec, ResolutionError, check_resolution, epsilon
from .initial_data import InitialData
from .testfunctions import BumpTestFunction

RATE_MODES = ("interacting", "yule", "frozen")
REQUIRED = ("d", "beta")


class ConfigError(ValueError):
    """A configuration value violates a modelling assumption or a numerical rule."""


@dataclass(frozen=True)
class RunConfig:
    d: int
    beta: float
    N_list: tuple[int, ...] = (1000, 4000, 16000, 64000)
    kernel: str = "gaussian"
    allow_supercritical: bool = False
    alpha0: float = 1.5
    alpha: float = 0.75
    rho0: float = 1.0
    gamma: float = 0.25
    u0_kind: str = "bump"
    u0_mass: float = 0.8
    u0_width: float = 2.0
    T: float = 1.0
    dt: float = 5e-3
    L: float = 20.0
    G: int = 4096
    n_snapshots: int = 20
    window: float = 4.0
    replicas: int = 10
    seed: int = 20240601
    deposit: str = "linear"
    rate_mode: str = "interacting"
    reaction: str = "logistic"
    frozen_h: float = 0.0
    phi_center: float = 0.0
    phi_radius: float = 2.0
    phi_profile: str = "cosine"
    phi_amplitude: float = 1.0
    pde_refine: int = 2
    threads: int = 1
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    # -- derived objects -----------------------------------------------------

    @property
    def mollifier(self) -> MollifierSpec:
        return MollifierSpec(self.kernel, self.beta, self.d, self.alpha0, strict=not self.allow_supercritical)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.d, self.L, self.G)

    @property
    def u0(self) -> InitialData:
        return InitialData(self.u0_kind, self.u0_mass, self.u0_width, self.d)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def snapshot_steps(self) -> tuple[int, ...]:
        """Step indices of the snapshot times k T / n_snapshots, k = 0..n_snapshots."""
        return tuple(sorted({int(round(k * self.n_steps / self.n_snapshots)) for k in range(self.n_snapshots + 1)}))

    @property
    def snapshot_times(self) -> tuple[float, ...]:
        return tuple(k * self.dt for k in self.snapshot_steps)

    def test_function(self) -> BumpTestFunction:
        return BumpTestFunction(self.d, self.phi_center, self.phi_radius, self.phi_amplitude, self.phi_profile, self.T)

    def replace(self, **changes) -> "RunConfig":
        return validate(dataclasses.replace(self, **changes))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "extra"}
        out["N_list"] = list(self.N_list)
        return out


# -- validation --------------------------------------------------------------

def _fail(msg: str):
    raise ConfigError(msg)


def validate(cfg: RunConfig, particles: bool = True) -> RunConfig:
    """Check modelling ranges and numerical rules; return ``cfg`` unchanged or raise ConfigError."""
    if cfg.d not in (1, 2):
        _fail(f"d={cfg.d}: dimension must be 1 or 2")
    try:
        spec = cfg.mollifier
    except ValueError as exc:
        _fail(f"mollifier: {exc}")
    if not cfg.d / 2 < cfg.alpha < cfg.alpha0:
        _fail(f"alpha={cfg.alpha} must lie in (d/2, alpha0) = ({cfg.d / 2}, {cfg.alpha0})")
    if not 0 < cfg.gamma < 0.5:
        _fail(f"gamma={cfg.gamma} must lie in (0, 1/2)")
    if not cfg.rho0 >= cfg.alpha0 - 1:
        _fail(f"rho0={cfg.rho0} must be >= alpha0 - 1 = {cfg.alpha0 - 1}")
    if not (cfg.T > 0 and cfg.dt > 0):
        _fail("T and dt must be positive")
    if abs(cfg.n_steps * cfg.dt - cfg.T) > 1e-9 * cfg.T:
        _fail(f"T={cfg.T} is not a multiple of dt={cfg.dt}")
    if cfg.n_snapshots < 1 or cfg.n_snapshots > cfg.n_steps:
        _fail(f"n_snapshots={cfg.n_snapshots} must lie in [1, T/dt]")
    if cfg.G < 4 or cfg.G & (cfg.G - 1):
        _fail(f"G={cfg.G} must be a power of two")
    if not 0 < cfg.window < cfg.L:
        _fail(f"observation window half-width {cfg.window} must lie strictly inside the box (0, L={cfg.L})")
    if cfg.replicas < 1:
        _fail("replicas must be >= 1")
    if not cfg.N_list or min(cfg.N_list) < 1:
        _fail("N_list must contain positive integers")
    if list(cfg.N_list) != sorted(set(cfg.N_list)):
        _fail("N_list must be strictly increasing")
    if cfg.rate_mode not in RATE_MODES:
        _fail(f"rate_mode must be one of {RATE_MODES}")
    if cfg.reaction not in ("logistic", "clipped", "nonlocal"):
        _fail("reaction must be 'logistic', 'clipped' or 'nonlocal'")
    if cfg.deposit not in ("linear", "ngp"):
        _fail("deposit must be 'linear' or 'ngp'")
    if cfg.pde_refine < 2:
        _fail("pde_refine must be >= 2 (reference grid at least twice as fine)")
    if cfg.threads < 1:
        _fail("threads must be >= 1")
    try:
        cfg.u0
        cfg.test_function()
    except ValueError as exc:
        _fail(str(exc))
    if particles:
        check_box(cfg)
        for N in cfg.N_list:
            try:
                check_resolution(spec, N, cfg.grid)
            except ResolutionError as exc:
                _fail(f"resolution: {exc}")
    return cfg


def box_requirement(cfg: RunConfig) -> float:
    """Smallest admissible L: initial support plus a 2T drift and six diffusive lengths."""
    return cfg.u0.support_radius + 2 * cfg.T + 6 * np.sqrt(2 * cfg.T)


def check_box(cfg: RunConfig) -> None:
    if cfg.u0_kind == "constant":
        return
    need = box_requirement(cfg)
    if cfg.L < need:
        _fail(f"box too small: L={cfg.L} < {need:.4g} = support(u0) + 2T + 6 sqrt(2T)")


# -- parsing -----------------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "extra"}


def _coerce(name: str, value):
    kind = _FIELDS[name].type
    if name == "N_list":
        if not isinstance(value, (list, tuple)):
            _fail("N_list must be a list of integers")
        return tuple(int(float(v)) for v in value)
    if kind == "int":
        if isinstance(value, bool) or float(value) != int(float(value)):
            _fail(f"{name} must be an integer, got {value!r}")
        return int(float(value))
    if kind == "float":
        return float(value)
    if kind == "bool":
        if not isinstance(value, bool):
            _fail(f"{name} must be true or false")
        return value
    return str(value)


def from_mapping(data: dict, *, particles: bool = True, **overrides) -> RunConfig:
    if not isinstance(data, dict):
        _fail("config must be a key-value mapping")
    data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        _fail(f"missing required keys: {', '.join(missing)}")
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        _fail(f"unknown keys: {', '.join(unknown)}")
    values = {}
    for k, v in data.items():
        try:
            values[k] = _coerce(k, v)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            _fail(f"{k}: cannot parse {v!r}")
    return validate(RunConfig(**values), particles=particles)


def parse_config(path, *, particles: bool = True, **overrides) -> RunConfig:
    path = Path(path)
    if not path.exists():
        _fail(f"config file {path} does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        _fail(f"config file {path} is not valid YAML: {exc}")
    return from_mapping(data or {}, particles=particles, **overrides)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


# -- presets -----------------------------------------------------------------

PRESETS = {
    "desk": dict(d=1, beta=0.25, N_list=[1000, 4000, 16000, 64000], kernel="gaussian", T=1.0, dt=5e-3,
                 L=20.0, G=4096, replicas=10, u0_kind="bump", u0_mass=0.8, u0_width=2.0),
    "full": dict(d=1, beta=0.25, N_list=[1000, 4000, 16000, 64000, 256000], kernel="gaussian", T=1.0,
                 dt=2.5e-3, L=20.0, G=8192, replicas=20, u0_kind="bump", u0_mass=0.8, u0_width=2.0),
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        _fail(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}")
    return from_mapping(dict(PRESETS[name]), **overrides)


def min_epsilon(cfg: RunConfig) -> float:
    return epsilon(cfg.mollifier, max(cfg.N_list))
