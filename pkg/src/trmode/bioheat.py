"""Explicit finite-difference Pennes bioheat solver on a uniform 3-D grid.

The unknown is the elevation u = T - T_blood, so perfusion acts as a pure
decay term. Each step is

    u' = u - dt*b/(rho*C) * u + dt*k/(rho*C*d^2) * (sum of 6 neighbours - 6u) + dt/C * SAR

with the neighbours outside the grid supplied by ghost cells (convective
Robin condition at the faces, or periodic wrap for Fourier analysis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

T_BODY = 310.15  # K

DEFAULT_CONDUCTIVITY = 0.37  # W/(m K)
DEFAULT_DENSITY = 1109.0  # kg/m^3
DEFAULT_HEAT_CAPACITY = 3391.0  # J/(kg K)
DEFAULT_PERFUSION = 9100.0  # W/(m^3 K)
WARM_SENSATION_K = 0.1


class StabilityError(ValueError):
    """Time step exceeds the explicit-scheme stability bound."""


@dataclass
class TissueGrid:
    dims: tuple
    spacing: float  # m
    density: np.ndarray
    heat_capacity: np.ndarray
    conductivity: np.ndarray
    perfusion: np.ndarray
    sar: np.ndarray

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 2:
            raise ValueError(f"grid needs three axes of at least 2 cells, got {self.dims}")
        if not self.spacing > 0:
            raise ValueError("spacing must be > 0")
        for name in ("density", "heat_capacity", "conductivity", "perfusion", "sar"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.dims).copy()
            setattr(self, name, arr)
        for name in ("density", "heat_capacity", "conductivity"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} must be > 0 everywhere")
        if np.any(self.perfusion < 0) or np.any(self.sar < 0):
            raise ValueError("perfusion and sar must be >= 0 everywhere")

    @classmethod
    def uniform(cls, dims=(40, 40, 40), spacing=1e-4, density=DEFAULT_DENSITY,
                heat_capacity=DEFAULT_HEAT_CAPACITY, conductivity=DEFAULT_CONDUCTIVITY,
                perfusion=DEFAULT_PERFUSION, sar=0.0) -> "TissueGrid":
        return cls(dims, spacing, density, heat_capacity, conductivity, perfusion, sar)

    @property
    def is_uniform(self) -> bool:
        return all(np.all(a == a.flat[0]) for a in (self.density, self.heat_capacity,
                                                     self.conductivity, self.perfusion))

    def with_sar(self, sar) -> "TissueGrid":
        return replace(self, sar=sar)


@dataclass
class TemperatureField:
    u: np.ndarray  # K above blood temperature
    iteration: int = 0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.iteration < 0:
            raise ValueError("iteration must be >= 0")

    @classmethod
    def zeros(cls, grid: TissueGrid) -> "TemperatureField":
        return cls(np.zeros(grid.dims))


@dataclass
class SolverConfig:
    dt: float = 0.01  # s
    total_time: float = 60.0  # s
    boundary_h: float = 10.0  # W/(m^2 K)
    ambient_temp: float = T_BODY  # K
    blood_temp: float = T_BODY  # K
    boundary: str = "convective"  # or "periodic"
    unstable_ok: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.boundary not in ("convective", "periodic"):
            raise ValueError(f"boundary must be 'convective' or 'periodic', got {self.boundary!r}")
        if self.boundary_h < 0:
            raise ValueError("boundary_h must be >= 0")


def stability_limit(grid: TissueGrid) -> float:
    """Largest stable time step: min over cells of 2 rho C d^2 / (12 k + b d^2)."""
    d2 = grid.spacing ** 2
    bound = 2.0 * grid.density * grid.heat_capacity * d2 / (12.0 * grid.conductivity + grid.perfusion * d2)
    return float(bound.min())


def check_stability(grid: TissueGrid, config: SolverConfig) -> float:
    limit = stability_limit(grid)
    if config.dt > limit and not config.unstable_ok:
        raise StabilityError(f"dt = {config.dt:.6g} s exceeds the stability limit {limit:.6g} s")
    return limit


def apply_boundary(field: TemperatureField, grid: TissueGrid, config: SolverConfig) -> np.ndarray:
    """Elevation padded with one layer of ghost cells on every face.

    Convective faces eliminate the ghost value from
    k (u_g - u_b)/d = -h ((u_g + u_b)/2 + T_blood - T_ambient),
    which reduces to a mirror (zero flux) for h = 0.
    """
    u = field.u
    if config.boundary == "periodic":
        return np.pad(u, 1, mode="wrap")
    padded = np.pad(u, 1, mode="edge")
    h = config.boundary_h
    if h == 0:
        return padded
    offset = config.ambient_temp - config.blood_temp
    g = grid.conductivity / grid.spacing
    ghost = (u * (g - h / 2.0) + h * offset) / (g + h / 2.0)
    padded[0, 1:-1, 1:-1] = ghost[0]
    padded[-1, 1:-1, 1:-1] = ghost[-1]
    padded[1:-1, 0, 1:-1] = ghost[:, 0]
    padded[1:-1, -1, 1:-1] = ghost[:, -1]
    padded[1:-1, 1:-1, 0] = ghost[:, :, 0]
    padded[1:-1, 1:-1, -1] = ghost[:, :, -1]
    return padded


@dataclass
class _Coefficients:
    decay: np.ndarray  # dt*b/(rho C)
    diffusion: np.ndarray  # dt*k/(rho C d^2)
    source: np.ndarray  # dt*SAR/C


def _coefficients(grid: TissueGrid, config: SolverConfig) -> _Coefficients:
    rc = grid.density * grid.heat_capacity
    return _Coefficients(
        decay=config.dt * grid.perfusion / rc,
        diffusion=config.dt * grid.conductivity / (rc * grid.spacing ** 2),
        source=config.dt * grid.sar / grid.heat_capacity,
    )


def _advance(u: np.ndarray, padded: np.ndarray, c: _Coefficients) -> np.ndarray:
    lap = (padded[2:, 1:-1, 1:-1] + padded[:-2, 1:-1, 1:-1]
           + padded[1:-1, 2:, 1:-1] + padded[1:-1, :-2, 1:-1]
           + padded[1:-1, 1:-1, 2:] + padded[1:-1, 1:-1, :-2]
           - 6.0 * u)
    return u - c.decay * u + c.diffusion * lap + c.source


def step(field: TemperatureField, grid: TissueGrid, config: SolverConfig) -> TemperatureField:
    """One explicit time step; raises StabilityError if dt is above the limit."""
    check_stability(grid, config)
    padded = apply_boundary(field, grid, config)
    u = _advance(field.u, padded, _coefficients(grid, config))
    return TemperatureField(u, field.iteration + 1)


def n_steps(config: SolverConfig) -> int:
    n = round(config.total_time / config.dt)
    if n < 1 or abs(n * config.dt - config.total_time) > 1e-9 * config.total_time:
        raise ValueError(f"total_time / dt must be a positive integer, got "
                         f"{config.total_time} / {config.dt}")
    return n


def iterate(field: TemperatureField, grid: TissueGrid, config: SolverConfig, steps: int,
            callback=None) -> TemperatureField:
    """Advance ``steps`` times, checking stability once; ``callback(field)`` after each step."""
    check_stability(grid, config)
    c = _coefficients(grid, config)
    u, it = field.u, field.iteration
    for _ in range(steps):
        padded = apply_boundary(TemperatureField(u, it), grid, config)
        u = _advance(u, padded, c)
        it += 1
        if callback is not None and callback(TemperatureField(u, it)) is False:
            break
    return TemperatureField(u, it)


def source_grid(grid: TissueGrid, incident_power: float, mass: float, pattern=None) -> TissueGrid:
    """Grid whose SAR field is P/M, optionally shaped by ``pattern`` (rescaled to unit mean)."""
    if mass <= 0:
        raise ValueError("mass must be > 0")
    if incident_power < 0:
        raise ValueError("incident_power must be >= 0")
    if pattern is None:
        shape = np.ones(grid.dims)
    else:
        shape = np.broadcast_to(np.asarray(pattern, dtype=float), grid.dims)
        mean = shape.mean()
        shape = shape / mean if mean > 0 else np.zeros(grid.dims)
    return grid.with_sar(incident_power / mass * shape)


def solve(grid: TissueGrid, config: SolverConfig, incident_power: float, mass: float,
          initial: Optional[TemperatureField] = None, pattern=None) -> TemperatureField:
    """Elevation after ``total_time`` with SAR source P/M (the grid's own SAR is replaced)."""
    g = source_grid(grid, incident_power, mass, pattern)
    start = initial if initial is not None else TemperatureField.zeros(g)
    return iterate(start, g, config, n_steps(config))


def steady_state(grid: TissueGrid, config: SolverConfig, incident_power: float, mass: float,
                 pattern=None, tol: float = 1e-12, max_steps: int = 1_000_000) -> TemperatureField:
    """Iterate until the largest per-step change drops below ``tol`` kelvin."""
    g = source_grid(grid, incident_power, mass, pattern)
    check_stability(g, config)
    c = _coefficients(g, config)
    u = np.zeros(g.dims)
    for it in range(1, max_steps + 1):
        new = _advance(u, apply_boundary(TemperatureField(u), g, config), c)
        delta = np.max(np.abs(new - u))
        u = new
        if delta < tol:
            return TemperatureField(u, it)
    raise RuntimeError(f"no steady state within {max_steps} steps")


def fourier_amplification(mode, grid: TissueGrid, config: SolverConfig) -> float:
    """Per-step growth factor of Fourier mode (l, m, g) on a homogeneous periodic grid."""
    if not grid.is_uniform:
        raise ValueError("Fourier analysis needs a homogeneous grid")
    rc = grid.density.flat[0] * grid.heat_capacity.flat[0]
    k = grid.conductivity.flat[0]
    b = grid.perfusion.flat[0]
    s = sum(math.sin(math.pi * m / n) ** 2 for m, n in zip(mode, grid.dims))
    return 1.0 - config.dt * b / rc - 4.0 * config.dt * k / (rc * grid.spacing ** 2) * s


def mode_sweep(grid: TissueGrid, config: SolverConfig) -> np.ndarray:
    """Amplification factor of every Fourier mode, shape ``grid.dims``."""
    if not grid.is_uniform:
        raise ValueError("Fourier analysis needs a homogeneous grid")
    rc = grid.density.flat[0] * grid.heat_capacity.flat[0]
    k = grid.conductivity.flat[0]
    b = grid.perfusion.flat[0]
    sx, sy, sz = (np.sin(np.pi * np.arange(n) / n) ** 2 for n in grid.dims)
    s = sx[:, None, None] + sy[None, :, None] + sz[None, None, :]
    return 1.0 - config.dt * b / rc - 4.0 * config.dt * k / (rc * grid.spacing ** 2) * s


@dataclass(frozen=True)
class TemperatureSummary:
    mode: str
    incident_power: float
    peak_elevation: float
    mean_elevation: float
    peak_temperature: float
    warm_sensation: bool


def summarize(field: TemperatureField, mode: str, incident_power: float,
              config: SolverConfig) -> TemperatureSummary:
    peak = float(field.u.max())
    return TemperatureSummary(mode, incident_power, peak, float(field.u.mean()),
                              peak + config.blood_temp, warm_sensation(field))


def warm_sensation(field: TemperatureField, threshold: float = WARM_SENSATION_K) -> bool:
    """True once the peak elevation reaches the ~0.1 K level skin perceives as warmth."""
    return bool(field.u.max() >= threshold)


def field_slice_rows(field: TemperatureField, axis: int = 1, index: Optional[int] = None):
    """(x, y, z, u) rows of one grid plane; the middle plane by default."""
    n = field.u.shape[axis]
    index = n // 2 if index is None else index
    sel = [slice(None)] * 3
    sel[axis] = slice(index, index + 1)
    sub = field.u[tuple(sel)]
    offsets = [0, 0, 0]
    offsets[axis] = index
    for i, j, k in np.ndindex(sub.shape):
        yield (i + offsets[0], j + offsets[1], k + offsets[2], float(sub[i, j, k]))


def radiation_pattern(peak_am: float, peak_tr: float, n_az: int = 37, n_el: int = 19,
                      n_elements: int = 4):
    """Gridded (azimuth, elevation, AM elevation, TR elevation) rows for plotting.

    The shape is a fixed template (a broadside array factor in elevation with a
    cardioid in azimuth) scaled by each mode's steady peak elevation; it is a
    visualization aid only.
    """
    rows = []
    for az in np.linspace(-180.0, 180.0, n_az):
        for el in np.linspace(-90.0, 90.0, n_el):
            psi = 0.5 * math.pi * math.sin(math.radians(el))
            af = 1.0 if abs(psi) < 1e-12 else abs(math.sin(n_elements * psi) / (n_elements * math.sin(psi)))
            g = af * 0.5 * (1.0 + math.cos(math.radians(az)))
            rows.append((float(az), float(el), peak_am * g, peak_tr * g))
    return rows
