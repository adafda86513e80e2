"""Point SAR and power density, skin dielectric models, and layered-skin PD/SAR depth profiles.

Conventions: time dependence e^{+jwt}, so lossy permittivities have a negative
imaginary part. Depths are in mm, power densities in mW/cm^2, SAR in W/kg.
Interface reflections are ignored; the PD profile is continuous across layers.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.constants import c as C0, epsilon_0

DEFAULT_FREQUENCY = 30e9  # Hz
MW_PER_CM2 = 10.0  # W/m^2 in one mW/cm^2


def sar_point(power, mass: float):
    """Absorbed power per unit tissue mass, W/kg. ``power`` may be an array."""
    if mass <= 0:
        raise ValueError(f"mass must be > 0, got {mass}")
    if np.any(np.asarray(power) < 0):
        raise ValueError(f"power must be >= 0, got {power}")
    return power / mass


def sar_tr(p_dl: float, mass: float) -> float:
    return sar_point(p_dl, mass)


def sar_am(p_total: float, p_dl: float, mass: float, variant: str = "printed") -> float:
    """Active-mode SAR.

    ``printed`` uses (p_total - p_dl) / M; ``total`` counts uplink and
    downlink together, p_total / M.
    """
    if variant == "printed":
        return sar_point(p_total - p_dl, mass)
    if variant == "total":
        return sar_point(p_total, mass)
    raise ValueError(f"unknown SAR_AM variant {variant!r}")


def power_density_far_field(gain: float, p_total: float, distance: float) -> float:
    """Far-field power density G * P / (4 pi d^2) in W/m^2."""
    if distance <= 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    return gain * p_total / (4.0 * math.pi * distance ** 2)


# --- dielectric models ------------------------------------------------------

@dataclass(frozen=True)
class DielectricParams:
    model: str
    eps_inf: float
    delta_eps: tuple = ()
    relaxation_times: tuple = ()
    alpha_broadening: float = 0.0
    static_conductivity: float = 0.0

    def __post_init__(self):
        if self.model not in ("debye", "cole_cole"):
            raise ValueError(f"model must be 'debye' or 'cole_cole', got {self.model!r}")
        object.__setattr__(self, "delta_eps", tuple(float(x) for x in np.atleast_1d(self.delta_eps)))
        object.__setattr__(self, "relaxation_times",
                           tuple(float(x) for x in np.atleast_1d(self.relaxation_times)))
        if len(self.delta_eps) != len(self.relaxation_times):
            raise ValueError("delta_eps and relaxation_times must have the same length")
        if not 0.0 <= self.alpha_broadening < 1.0:
            raise ValueError(f"alpha_broadening must lie in [0, 1), got {self.alpha_broadening}")
        if self.model == "debye" and self.alpha_broadening != 0.0:
            raise ValueError("a Debye model has no broadening parameter")
        values = (self.eps_inf, self.static_conductivity, *self.delta_eps, *self.relaxation_times)
        if any(v < 0 for v in values):
            raise ValueError("dielectric parameters must be non-negative")


def complex_permittivity(params: DielectricParams, frequency):
    """Relative complex permittivity at ``frequency`` (Hz)."""
    f = np.asarray(frequency, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be > 0")
    w = 2.0 * np.pi * f
    alpha = params.alpha_broadening if params.model == "cole_cole" else 0.0
    eps = params.eps_inf + 0j
    for d, tau in zip(params.delta_eps, params.relaxation_times):
        jwt = 1j * w * tau
        eps = eps + d / (1.0 + (jwt if alpha == 0.0 else jwt ** (1.0 - alpha)))
    eps = eps + params.static_conductivity / (1j * w * epsilon_0)
    return complex(eps) if np.ndim(eps) == 0 else eps


def penetration_depth(params: DielectricParams, frequency: float) -> float:
    """Plane-wave field penetration depth in mm (field falls by 1/e, power by 1/e^2)."""
    eps = complex_permittivity(params, frequency)
    k_im = 2.0 * math.pi * frequency / C0 * abs(np.sqrt(eps).imag)
    if k_im == 0:
        return math.inf
    return 1e3 / k_im


def parse_dielectric(text: str) -> DielectricParams:
    """Parse the ``key = value`` dielectric file format; lists are comma separated."""
    kv = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"expected 'key = value', got {line!r}")
        kv[key.strip()] = value.strip()
    try:
        return DielectricParams(
            model=kv["model"],
            eps_inf=float(kv["eps_inf"]),
            delta_eps=tuple(float(x) for x in kv.get("delta_eps", "").split(",") if x.strip()),
            relaxation_times=tuple(float(x) for x in kv.get("relaxation_times", "").split(",") if x.strip()),
            alpha_broadening=float(kv.get("alpha_broadening", 0.0)),
            static_conductivity=float(kv.get("static_conductivity", 0.0)),
        )
    except KeyError as exc:
        raise ValueError(f"dielectric file is missing {exc.args[0]!r}") from None


def load_dielectric(name_or_path) -> DielectricParams:
    """Bundled parameter set by name (``skin_debye``, ``fat``, ...) or a file path."""
    p = Path(str(name_or_path))
    if p.is_file():
        return parse_dielectric(p.read_text())
    res = resources.files("trmode.data").joinpath(f"{name_or_path}.txt")
    if not res.is_file():
        raise FileNotFoundError(f"no dielectric parameter set {name_or_path!r}")
    return parse_dielectric(res.read_text())


# --- layered skin -----------------------------------------------------------

@dataclass(frozen=True)
class TissueLayer:
    name: str
    thickness: float  # mm; math.inf for a semi-infinite last layer
    density: float  # kg/m^3
    dielectric: DielectricParams

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"{self.name}: thickness must be > 0")
        if not self.density > 0:
            raise ValueError(f"{self.name}: density must be > 0")


def default_skin(skin_dielectric: str = "skin_debye", epidermis_dermis_mm: float = 1.5,
                 sat_mm: float = 3.0, densities=(1109.0, 911.0, 1090.0)) -> list:
    return [
        TissueLayer("epidermis+dermis", epidermis_dermis_mm, densities[0], load_dielectric(skin_dielectric)),
        TissueLayer("SAT", sat_mm, densities[1], load_dielectric("fat")),
        TissueLayer("muscle", math.inf, densities[2], load_dielectric("muscle")),
    ]


@dataclass
class ExposureProfile:
    depths: np.ndarray  # mm
    pd: np.ndarray  # mW/cm^2
    sar: Optional[np.ndarray] = None  # W/kg
    mode_label: str = "AM"

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=float)
        self.pd = np.asarray(self.pd, dtype=float)
        if self.depths.shape != self.pd.shape:
            raise ValueError("depths and pd must have the same shape")
        if self.sar is not None:
            self.sar = np.asarray(self.sar, dtype=float)


def _layer_bounds(skin: Sequence[TissueLayer]):
    entries = np.concatenate([[0.0], np.cumsum([l.thickness for l in skin])[:-1]])
    return entries


def _layer_index(skin, depths):
    entries = _layer_bounds(skin)
    return np.searchsorted(entries, depths, side="right") - 1


def _attenuation(skin, frequency):
    """Power attenuation constants 2/delta per layer, 1/mm."""
    return np.array([2.0 / penetration_depth(l.dielectric, frequency) for l in skin])


def layer_absorption(skin: Sequence[TissueLayer], incident_pd: float, frequency: float = DEFAULT_FREQUENCY):
    """Power density absorbed in each layer and the density leaving the last one."""
    if not skin:
        raise ValueError("skin model has no layers")
    absorbed = []
    pd = incident_pd
    for layer, a in zip(skin, _attenuation(skin, frequency)):
        out = 0.0 if math.isinf(layer.thickness) else pd * math.exp(-a * layer.thickness)
        absorbed.append(pd - out)
        pd = out
    return absorbed, pd


def pd_depth_profile(skin: Sequence[TissueLayer], incident_pd: float, frequency: float = DEFAULT_FREQUENCY,
                     depths=None, mode_label: str = "AM") -> ExposureProfile:
    """Exponentially attenuated PD through the layer stack on a depth grid (mm)."""
    if not skin:
        raise ValueError("skin model has no layers")
    if incident_pd < 0:
        raise ValueError("incident_pd must be >= 0")
    depths = np.linspace(0.0, 2.0, 201) if depths is None else np.asarray(depths, dtype=float)
    if np.any(depths < 0):
        raise ValueError("depths must be >= 0")
    att = _attenuation(skin, frequency)
    entries = _layer_bounds(skin)
    thick = np.array([l.thickness for l in skin])
    # PD at each layer entry
    entry_pd = incident_pd * np.exp(-np.concatenate([[0.0], np.cumsum(att[:-1] * thick[:-1])]))
    idx = _layer_index(skin, depths)
    pd = entry_pd[idx] * np.exp(-att[idx] * (depths - entries[idx]))
    return ExposureProfile(depths, pd, None, mode_label)


def sar_depth_profile(pd_profile: ExposureProfile, skin: Sequence[TissueLayer]) -> ExposureProfile:
    """SAR(z) = -(1/rho) dPD/dz, differentiated separately inside each layer."""
    z, pd = pd_profile.depths, pd_profile.pd
    if z.size < 2:
        raise ValueError("need at least two depth points")
    idx = _layer_index(skin, z)
    rho = np.array([l.density for l in skin])[idx]
    dpd = np.gradient(pd, z, edge_order=2 if z.size > 2 else 1)
    for k in np.unique(idx):
        seg = np.flatnonzero(idx == k)
        if seg.size >= 2:
            dpd[seg] = np.gradient(pd[seg], z[seg], edge_order=2 if seg.size > 2 else 1)
    # mW/cm^2 per mm -> W/m^2 per m
    sar = -dpd * MW_PER_CM2 * 1e3 / rho
    return ExposureProfile(z, pd, sar, pd_profile.mode_label)


def absorbed_from_sar(profile: ExposureProfile, skin: Sequence[TissueLayer]) -> float:
    """Trapezoid integral of rho * SAR over the depth grid, in mW/cm^2."""
    idx = _layer_index(skin, profile.depths)
    rho = np.array([l.density for l in skin])[idx]
    return float(np.trapezoid(rho * profile.sar, profile.depths * 1e-3) / MW_PER_CM2)


# --- comparative report -----------------------------------------------------

TABLE4_COLUMNS = ("alekseev", "chahat", "am", "tr")
TABLE4_DEPTHS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def load_table4() -> dict:
    """Bundled PD columns (mW/cm^2) as profiles keyed by column name."""
    text = resources.files("trmode.data").joinpath("table4_pd.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    depths = [float(r["depth_mm"]) for r in rows]
    labels = {"alekseev": "Alekseev-ref", "chahat": "Chahat-ref", "am": "AM", "tr": "TR"}
    return {c: ExposureProfile(depths, [float(r[c]) for r in rows], None, labels[c]) for c in TABLE4_COLUMNS}


@dataclass
class ComparativeReport:
    depths: np.ndarray
    columns: tuple
    values: dict
    comparison_depth: float
    reductions: dict = field(default_factory=dict)  # % PD reduction of TR w.r.t. each column

    def rows(self, value_format: str = ".2f", depth_format: str = ".1f"):
        yield ("depth_mm",) + tuple(self.columns)
        for i, d in enumerate(self.depths):
            yield (format(d, depth_format),) + tuple(format(self.values[c][i], value_format) for c in self.columns)
        yield (f"tr_reduction_pct_at_{self.comparison_depth:g}mm",) + tuple(
            format(self.reductions[c], ".9g") for c in self.columns)

    def to_csv(self, value_format: str = ".2f") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerows(self.rows(value_format))
        return buf.getvalue()

    def text_table(self, value_format: str = ".2f") -> str:
        rows = [list(r) for r in self.rows(value_format)]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


def comparative_report(profiles: Mapping[str, ExposureProfile], comparison_depth: float = 0.4,
                       reference: str = "tr") -> ComparativeReport:
    """PD table over a shared depth grid plus percent PD reduction of ``reference`` vs each column."""
    if reference not in profiles:
        raise ValueError(f"profiles must include the {reference!r} column")
    columns = tuple(profiles)
    depths = profiles[columns[0]].depths
    for name in columns:
        if profiles[name].depths.shape != depths.shape or not np.array_equal(profiles[name].depths, depths):
            raise ValueError(f"profile {name!r} is on a different depth grid")
    hits = np.flatnonzero(np.isclose(depths, comparison_depth, rtol=0.0, atol=1e-9))
    if hits.size == 0:
        raise ValueError(f"comparison depth {comparison_depth} mm is not on the grid")
    i = int(hits[0])
    ref = profiles[reference].pd[i]
    reductions = {c: (profiles[c].pd[i] - ref) / profiles[c].pd[i] * 100.0 for c in columns}
    return ComparativeReport(depths, columns, {c: profiles[c].pd for c in columns}, comparison_depth, reductions)
