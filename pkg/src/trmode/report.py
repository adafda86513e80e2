"""Exposure/temperature coupling of a scenario result and the CSV files written for a run.

Every CSV has a header row; floats are written with 9 significant digits
through ``format`` (no locale dependence).
"""

from __future__ import annotations

import csv
import io
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bioheat import (TemperatureField, TemperatureSummary, TissueGrid, field_slice_rows, radiation_pattern,
                      solve, stability_limit, summarize)
from .config import ScenarioConfig
from .exposure import (comparative_report, default_skin, layer_absorption, load_table4, pd_depth_profile,
                       sar_depth_profile)
from .modes import TRACE_HEADER, classify_signal, load_operator_profiles, trace_rows
from .scenario import CELL_METRICS_HEADER, COMPLEXITY_HEADER, EE_HEADER, ScenarioResult, check_constraints


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def skin_for(config: ScenarioConfig) -> list:
    return default_skin(config.skin_dielectric, config.epidermis_dermis_mm, config.sat_mm, config.densities)


def depth_grid(config: ScenarioConfig) -> np.ndarray:
    n = int(round(config.max_depth_mm / config.depth_step_mm))
    return np.linspace(0.0, n * config.depth_step_mm, n + 1)


def exposure_profiles(config: ScenarioConfig, incident_am: float, incident_tr: float) -> dict:
    """PD and SAR depth profiles for the AM and TR incident power densities (mW/cm^2)."""
    skin = skin_for(config)
    z = depth_grid(config)
    out = {}
    for label, inc in (("AM", incident_am), ("TR", incident_tr)):
        out[label] = sar_depth_profile(pd_depth_profile(skin, inc, config.frequency, z, label), skin)
    return out


def surface_fraction(config: ScenarioConfig) -> float:
    """Share of incident power absorbed in the outermost (epidermis+dermis) layer."""
    absorbed, _ = layer_absorption(skin_for(config), 1.0, config.frequency)
    return absorbed[0]


@dataclass
class ThermalRun:
    summary: TemperatureSummary
    field: TemperatureField
    sar: float  # W/kg, mean source
    stability_limit: float  # s


def thermal_grid(config: ScenarioConfig) -> TissueGrid:
    return TissueGrid.uniform(config.grid_dims, config.grid_spacing, config.density, config.heat_capacity,
                              config.conductivity, config.perfusion)


def depth_pattern(config: ScenarioConfig) -> np.ndarray:
    """SAR shape along the last grid axis, sampled at cell-centre depths."""
    nz = config.grid_dims[2]
    z_mm = (np.arange(nz) + 0.5) * config.grid_spacing * 1e3
    skin = skin_for(config)
    prof = sar_depth_profile(pd_depth_profile(skin, 1.0, config.frequency, z_mm), skin)
    return prof.sar.reshape(1, 1, nz)


def thermal_runs(config: ScenarioConfig, power_am: float, power_tr: float, unstable_ok: bool = False) -> dict:
    """Elevation after ``total_time`` for the AM and TR source powers (W into ``exposure_mass``)."""
    grid = thermal_grid(config)
    solver = config.solver(unstable_ok)
    pattern = depth_pattern(config)
    limit = stability_limit(grid)
    out = {}
    for label, p in (("AM", power_am), ("TR", power_tr)):
        f = solve(grid, solver, p, config.exposure_mass, pattern=pattern)
        out[label] = ThermalRun(summarize(f, label, p, solver), f, p / config.exposure_mass, limit)
    return out


TEMPERATURE_HEADER = ("mode", "source_power_w", "mean_sar_w_per_kg", "peak_elevation_k", "mean_elevation_k",
                      "peak_temperature_k", "warm_sensation", "steps", "stability_limit_s")


def temperature_rows(runs: dict):
    for label, r in runs.items():
        s = r.summary
        yield (label, s.incident_power, r.sar, s.peak_elevation, s.mean_elevation, s.peak_temperature,
               s.warm_sensation, r.field.iteration, r.stability_limit)


def profile_files(profiles: dict) -> dict:
    am, tr = profiles["AM"], profiles["TR"]
    return {
        "pd_profile.csv": csv_text(("depth_mm", "pd_am_mw_per_cm2", "pd_tr_mw_per_cm2"),
                                   zip(am.depths, am.pd, tr.pd)),
        "sar_profile.csv": csv_text(("depth_mm", "sar_am_w_per_kg", "sar_tr_w_per_kg"),
                                    zip(am.depths, am.sar, tr.sar)),
    }


def table4_text() -> str:
    return comparative_report(load_table4()).to_csv()


def manifest_text(config: ScenarioConfig) -> str:
    lines = [
        "# trmode run manifest",
        f"trmode = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
        f"seed = {config.seed}",
        f"iterations = {config.iterations}",
        "",
        "# configuration",
        config.to_ini(),
    ]
    return "\n".join(lines)


def _trace_file(result: ScenarioResult) -> str:
    profile = load_operator_profiles()[result.config.operator_profile]
    rows = []
    for user, trace in enumerate(result.trace or []):
        for r in trace_rows(trace):
            rows.append((user,) + tuple(r) + (classify_signal(r[1], profile).value,))
    return csv_text(("user",) + TRACE_HEADER + ("quality_band",), rows)


def build_files(result: ScenarioResult, unstable_ok: bool = False) -> dict:
    """File name to content for a full run."""
    config = result.config
    am, mixed = result.am, result.mixed
    c = result.coupling
    profiles = exposure_profiles(config, c.incident_pd_am, c.incident_pd_tr)
    runs = thermal_runs(config, c.sar_power_am, c.sar_power_tr, unstable_ok)
    files = {
        "cell_metrics.csv": csv_text(CELL_METRICS_HEADER, list(am.rows()) + list(mixed.rows())),
        "constraint_report.csv": csv_text(*_split(check_constraints(am, mixed).rows())),
        "ee_series.csv": csv_text(EE_HEADER, result.ee_rows),
        "complexity_series.csv": csv_text(COMPLEXITY_HEADER, result.complexity_rows),
        **profile_files(profiles),
        "table4_report.csv": table4_text(),
        "temperature_summary.csv": csv_text(TEMPERATURE_HEADER, temperature_rows(runs)),
        "temperature_slice.csv": csv_text(("mode", "x", "y", "z", "u_k"), [
            (label,) + row for label, r in runs.items() for row in field_slice_rows(r.field)]),
        "radiation_pattern.csv": csv_text(("azimuth_deg", "elevation_deg", "am_elevation_k", "tr_elevation_k"),
                                          radiation_pattern(runs["AM"].summary.peak_elevation,
                                                            runs["TR"].summary.peak_elevation)),
        "decision_trace.csv": _trace_file(result),
        "run_manifest.txt": manifest_text(config),
    }
    return files


def _split(rows):
    rows = list(rows)
    return rows[0], rows[1:]


def write_files(files: dict, out_dir) -> list:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in sorted(files):
            p = out / name
            with open(p, "w", newline="", encoding="utf-8") as fh:
                fh.write(files[name])
            paths.append(p)
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc}") from exc
    return paths


def emit_outputs(result: ScenarioResult, out_dir, unstable_ok: bool = False) -> list:
    """Write every run file into ``out_dir``; returns the paths written."""
    return write_files(build_files(result, unstable_ok), out_dir)
