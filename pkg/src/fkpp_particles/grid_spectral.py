"""Fourier-side calculus on uniform periodic grids.

Fields live on the box [-L, L)^d sampled at G points per axis. All operators
here are Fourier multipliers on the lattice lambda_k = pi k / L and are
computed with real-to-complex FFTs.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_SOBOLEV_ORDER = 6.0


@dataclass(frozen=True)
class GridSpec:
    d: int
    L: float
    G: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.d}")
        if self.G < 8 or self.G & (self.G - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.G}")
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"box half-length must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.G

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.G,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def x(self) -> np.ndarray:
        """Node coordinates along one axis, starting at -L."""
        return -self.L + self.dx * np.arange(self.G)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*([self.x] * self.d), indexing="ij")

    def radius_squared(self) -> np.ndarray:
        return sum(c * c for c in self.mesh())

    def wrap(self, positions: np.ndarray) -> np.ndarray:
        """Map coordinates back into [-L, L)."""
        return np.mod(positions + self.L, 2.0 * self.L) - self.L

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.d, self.L, self.G * factor)

    def required_points(self, max_spacing: float) -> int:
        """Smallest power-of-two G whose spacing is at most ``max_spacing``."""
        g = 8
        while 2.0 * self.L / g > max_spacing:
            g *= 2
        return g


@dataclass
class GridField:
    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"field shape {self.values.shape} does not match grid {self.spec.shape}")

    def check_finite(self) -> "GridField":
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        return self

    def integral(self) -> float:
        return float(self.values.sum() * self.spec.cell_volume)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.spec.cell_volume))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy(self) -> "GridField":
        return GridField(self.spec, self.values.copy())

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "GridField":
        return cls(spec, np.full(spec.shape, float(c)))

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "GridField":
        return cls(spec, fn(*spec.mesh()))


# -- frequency lattice -------------------------------------------------------

_cache_lock = threading.Lock()


@lru_cache(maxsize=64)
def _lattice(spec: GridSpec) -> tuple[np.ndarray, ...]:
    k_full = 2.0 * np.pi * np.fft.fftfreq(spec.G, d=spec.dx)
    k_half = 2.0 * np.pi * np.fft.rfftfreq(spec.G, d=spec.dx)
    if spec.d == 1:
        ks = (k_half,)
    else:
        ks = (k_full[:, None], k_half[None, :])
    k2 = sum(k * k for k in ks)
    # weights that turn the half spectrum into a full Parseval sum
    w = np.full(k_half.shape, 2.0)
    w[0] = 1.0
    if spec.G % 2 == 0:
        w[-1] = 1.0
    weights = np.broadcast_to(w if spec.d == 1 else w[None, :], np.broadcast(k2, k2).shape)
    for arr in (*ks, k2):
        arr.setflags(write=False)
    return ks, k2, np.ascontiguousarray(weights)


def wavenumbers(spec: GridSpec) -> tuple[np.ndarray, ...]:
    with _cache_lock:
        return _lattice(spec)[0]


def wavenumber_squared(spec: GridSpec) -> np.ndarray:
    """|lambda|^2 on the half-spectrum layout used by ``rfftn``."""
    with _cache_lock:
        return _lattice(spec)[1]


def _parseval_weights(spec: GridSpec) -> np.ndarray:
    with _cache_lock:
        return _lattice(spec)[2]


def forward(values: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(values)


def inverse(spectrum: np.ndarray, spec: GridSpec) -> np.ndarray:
    return np.fft.irfftn(spectrum, s=spec.shape, axes=tuple(range(spec.d)))


def apply_multiplier(f: GridField, multiplier: np.ndarray) -> GridField:
    return GridField(f.spec, inverse(forward(f.values) * multiplier, f.spec))


def _check_order(s: float) -> float:
    s = float(s)
    if not np.isfinite(s) or abs(s) > MAX_SOBOLEV_ORDER:
        raise ValueError(f"Sobolev order must satisfy |s| <= {MAX_SOBOLEV_ORDER}, got {s}")
    return s


# -- operators ---------------------------------------------------------------

def heat_multiplier(spec: GridSpec, t: float) -> np.ndarray:
    return np.exp(-t * wavenumber_squared(spec))


def fractional_multiplier(spec: GridSpec, s: float) -> np.ndarray:
    return (1.0 + wavenumber_squared(spec)) ** (0.5 * s)


def heat_semigroup(f: GridField, t: float) -> GridField:
    """e^{t Delta} f via the multiplier exp(-t |lambda|^2)."""
    if not t >= 0:
        raise ValueError(f"heat flow time must be >= 0, got {t}")
    f.check_finite()
    if t == 0:
        return f.copy()
    return apply_multiplier(f, heat_multiplier(f.spec, t))


def fractional_power(f: GridField, s: float) -> GridField:
    """(I - Delta)^{s/2} f."""
    s = _check_order(s)
    f.check_finite()
    if s == 0:
        return f.copy()
    return apply_multiplier(f, fractional_multiplier(f.spec, s))


def laplacian(f: GridField) -> GridField:
    return apply_multiplier(f, -wavenumber_squared(f.spec))


def gradient(f: GridField) -> list[GridField]:
    spectrum = forward(f.values)
    return [GridField(f.spec, inverse(1j * k * spectrum, f.spec)) for k in wavenumbers(f.spec)]


def sobolev_norm(f: GridField, s: float) -> float:
    """W^{s,2} norm (sum (1+|lambda|^2)^s |f_hat|^2)^{1/2}, Parseval-scaled."""
    s = _check_order(s)
    f.check_finite()
    spec = f.spec
    spectrum = forward(f.values)
    weights = _parseval_weights(spec)
    if s != 0:
        weights = weights * (1.0 + wavenumber_squared(spec)) ** s
    total = np.sum(weights * (spectrum.real**2 + spectrum.imag**2))
    n = spec.G**spec.d
    return float(np.sqrt(total * spec.cell_volume / n))


@dataclass(frozen=True)
class AnalyticBoundRow:
    t: float
    operator_norm: float
    c_estimate: float


def analytic_bound_check(spec: GridSpec, s: float, t_list) -> tuple[list[AnalyticBoundRow], float]:
    """Lattice operator norm of (I-A)^s e^{tA} and t^s times it.

    Returns the table and sup_t of the scaled column.
    """
    s = _check_order(s)
    if s < 0:
        raise ValueError("analytic bound check needs s >= 0")
    k2 = wavenumber_squared(spec)
    rows = []
    for t in t_list:
        if not t > 0:
            raise ValueError(f"times must be positive, got {t}")
        op = float(np.max((1.0 + k2) ** s * np.exp(-t * k2)))
        rows.append(AnalyticBoundRow(float(t), op, float(t**s * op)))
    return rows, max(r.c_estimate for r in rows)


def random_bumps(spec: GridSpec, rng: np.random.Generator, count: int = 3) -> GridField:
    """Nonnegative mixture of Gaussian bumps placed well inside the box."""
    out = np.zeros(spec.shape)
    mesh = spec.mesh()
    for _ in range(count):
        center = rng.uniform(-0.5 * spec.L, 0.5 * spec.L, size=spec.d)
        width = rng.uniform(4.0 * spec.dx, 0.1 * spec.L)
        r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
        out += rng.uniform(0.2, 1.0) * np.exp(-0.5 * r2 / width**2)
    return GridField(spec, out)


def positivity_check(spec: GridSpec, s: float, t: float, trials: int = 100, seed: int = 0,
                     fields: list[GridField] | None = None) -> float:
    """Worst value of min((I-A)^{s/2} e^{tA} f) / ||f||_inf over nonnegative inputs.

    Inputs are random bump mixtures unless ``fields`` is given. A value below
    -1e-8 means the operator produced a negative output for some f >= 0.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if not t > 0:
        raise ValueError("positivity check needs t > 0")
    s = _check_order(s)
    rng = np.random.default_rng(seed)
    multiplier = fractional_multiplier(spec, s) * heat_multiplier(spec, t)
    if fields is None:
        fields = [random_bumps(spec, rng, count=int(rng.integers(1, 4))) for _ in range(trials)]
    worst = 0.0
    for f in fields:
        if np.any(f.values < 0):
            raise ValueError("positivity check inputs must be nonnegative")
        top = f.sup_norm()
        if top == 0:
            continue
        g = apply_multiplier(f, multiplier)
        worst = min(worst, float(g.values.min()) / top)
    return worst


def interpolate(f: GridField, points: np.ndarray) -> np.ndarray:
    """Periodic multilinear interpolation at ``points`` of shape (n, d)."""
    spec = f.spec
    pts = np.asarray(points, dtype=np.float64).reshape(-1, spec.d)
    scaled = (pts + spec.L) / spec.dx
    base = np.floor(scaled)
    frac = scaled - base
    idx = base.astype(np.int64) % spec.G
    if spec.d == 1:
        i0 = idx[:, 0]
        i1 = (i0 + 1) % spec.G
        w = frac[:, 0]
        v = f.values
        return (1.0 - w) * v[i0] + w * v[i1]
    i0, j0 = idx[:, 0], idx[:, 1]
    i1, j1 = (i0 + 1) % spec.G, (j0 + 1) % spec.G
    wx, wy = frac[:, 0], frac[:, 1]
    v = f.values
    return ((1 - wx) * (1 - wy) * v[i0, j0] + wx * (1 - wy) * v[i1, j0]
            + (1 - wx) * wy * v[i0, j1] + wx * wy * v[i1, j1])
