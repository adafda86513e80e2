"""Scenario configuration: a sectioned ``key = value`` file plus command-line overrides.

Example::

    [scenario]
    n_users = 50
    tr_users = 20
    iterations = 100
    seed = 42

    [exposure]
    reference_distance = 0.05

Every key belongs to exactly one section (see ``ScenarioConfig``); unknown
keys and out-of-range values raise ``ConfigError`` naming the field.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

from .apps import Application
from .bioheat import SolverConfig, T_BODY
from .modes import DecisionConfig, load_operator_profiles


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _f(default, section, doc=""):
    return field(default=default, metadata={"section": section, "doc": doc})


@dataclass
class ScenarioConfig:
    # [scenario]
    n_users: int = _f(50, "scenario", "UEs per cell")
    tr_users: int = _f(20, "scenario", "UEs of the mixed cell placed in the TR signal band")
    iterations: int = _f(100, "scenario", "Monte Carlo iterations")
    seed: int = _f(0, "scenario")
    n_slots: int = _f(10, "scenario", "slots per 10 ms frame")
    p_max: float = _f(20.0, "scenario", "per-slot power limit, W")
    p_avg: float = _f(20.0, "scenario", "per-frame average power limit, W")
    user_step: int = _f(5, "scenario", "active-user step of the EE/complexity series")
    # [channel]
    noise_var: float = _f(1e-13, "channel", "W")
    t_bs: float = _f(20.0, "channel", "BS transmit power, W")
    p_ue: float = _f(1.0, "channel", "interfering UE transmit power, W")
    n_taps: int = _f(8, "channel")
    tap_spacing: float = _f(10e-9, "channel", "s")
    delay_decay: float = _f(30e-9, "channel", "s")
    ss_reference_bandwidth: float = _f(15e3, "channel", "bandwidth the displayed signal strength refers to, Hz")
    interference_gain: float = _f(1e-16, "channel", "mean cross-link gain, BS and UE")
    am_band: tuple = _f((-99.0, -50.0), "channel", "signal strength range of AM-designated UEs, dBm")
    tr_band: tuple = _f((-120.0, -99.0), "channel", "signal strength range of TR-designated UEs, dBm")
    fading: str = _f("rayleigh", "channel", "rayleigh | none (unit coefficient every slot)")
    # [applications]
    bandwidth: float = _f(5e6, "applications", "Hz")
    rate_a1: float = _f(10e3, "applications", "bit/s")
    rate_a2: float = _f(64e3, "applications", "bit/s")
    rate_a3: float = _f(2e6, "applications", "bit/s")
    p_ckt: float = _f(0.1, "applications", "circuit power, W")
    demand: tuple = _f(("A1", "A2", "A3"), "applications", "applications every UE requests")
    # [decision]
    operator_profile: str = _f("generic", "decision")
    ss_threshold: float = _f(-99.0, "decision", "dBm")
    hysteresis_db: float = _f(0.0, "decision")
    window: int = _f(32, "decision")
    tr_a3_policy: str = _f("unserved", "decision", "unserved | dl_only")
    # [exposure]
    frequency: float = _f(30e9, "exposure", "Hz")
    reference_distance: float = _f(0.05, "exposure", "handset to head, m")
    antenna_gain: float = _f(1.0, "exposure")
    exposure_mass: float = _f(0.01, "exposure", "exposed tissue mass, kg")
    sar_am: str = _f("printed", "exposure", "printed | total")
    skin_dielectric: str = _f("skin_debye", "exposure", "bundled name or parameter file path")
    epidermis_dermis_mm: float = _f(1.5, "exposure")
    sat_mm: float = _f(3.0, "exposure")
    densities: tuple = _f((1109.0, 911.0, 1090.0), "exposure", "kg/m^3 per layer")
    max_depth_mm: float = _f(2.0, "exposure")
    depth_step_mm: float = _f(0.01, "exposure")
    # [solver]
    dt: float = _f(0.01, "solver", "s")
    total_time: float = _f(60.0, "solver", "s")
    boundary_h: float = _f(10.0, "solver", "W/(m^2 K)")
    ambient_temp: float = _f(T_BODY, "solver", "K")
    blood_temp: float = _f(T_BODY, "solver", "K")
    grid_dims: tuple = _f((2, 2, 40), "solver", "cells")
    grid_spacing: float = _f(1e-4, "solver", "m")
    conductivity: float = _f(0.37, "solver")
    density: float = _f(1109.0, "solver")
    heat_capacity: float = _f(3391.0, "solver")
    perfusion: float = _f(9100.0, "solver")

    def __post_init__(self):
        self.validate()

    def validate(self):
        problems = []

        def need(cond, name, msg):
            if not cond:
                problems.append(f"{name}: {msg}")

        need(self.n_users >= 0, "n_users", "must be >= 0")
        need(0 <= self.tr_users <= self.n_users, "tr_users", "must lie in [0, n_users]")
        need(self.iterations >= 1, "iterations", "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(self.n_slots >= 1, "n_slots", "must be >= 1")
        need(self.user_step >= 1, "user_step", "must be >= 1")
        for name in ("noise_var", "t_bs", "bandwidth", "p_ckt", "frequency", "reference_distance",
                     "antenna_gain", "exposure_mass", "ss_reference_bandwidth", "interference_gain",
                     "dt", "total_time", "grid_spacing", "conductivity", "density", "heat_capacity",
                     "max_depth_mm", "depth_step_mm", "epidermis_dermis_mm", "sat_mm", "p_max", "p_avg"):
            need(getattr(self, name) > 0, name, "must be > 0")
        need(self.n_taps >= 1, "n_taps", "must be >= 1")
        need(self.perfusion >= 0, "perfusion", "must be >= 0")
        need(self.boundary_h >= 0, "boundary_h", "must be >= 0")
        need(self.hysteresis_db >= 0, "hysteresis_db", "must be >= 0")
        need(self.window >= 1, "window", "must be >= 1")
        need(0 <= self.rate_a1 < self.rate_a2 < self.rate_a3, "rate_a1/rate_a2/rate_a3",
             "must satisfy 0 <= A1 < A2 < A3")
        need(self.tr_a3_policy in ("unserved", "dl_only"), "tr_a3_policy", "must be unserved or dl_only")
        need(self.operator_profile in load_operator_profiles(), "operator_profile",
             f"unknown profile {self.operator_profile!r}")
        need(self.fading in ("rayleigh", "none"), "fading", "must be rayleigh or none")
        need(len(self.demand) >= 1 and all(a in Application.__members__ for a in self.demand),
             "demand", "needs one or more of A1, A2, A3")
        need(self.sar_am in ("printed", "total"), "sar_am", "must be printed or total")
        need(len(self.am_band) == 2 and self.am_band[0] <= self.am_band[1], "am_band", "needs lo <= hi")
        need(len(self.tr_band) == 2 and self.tr_band[0] <= self.tr_band[1], "tr_band", "needs lo <= hi")
        if len(self.am_band) == 2:
            need(self.am_band[0] >= self.ss_threshold, "am_band", "must not extend below ss_threshold")
        if len(self.tr_band) == 2:
            need(self.tr_band[1] <= self.ss_threshold and self.tr_band[0] < self.ss_threshold, "tr_band",
                 "must lie below ss_threshold")
        need(len(self.densities) == 3 and min(self.densities) > 0, "densities", "needs three positive values")
        need(len(self.grid_dims) == 3 and min(self.grid_dims) >= 2, "grid_dims", "needs three values >= 2")
        if problems:
            raise ConfigError(problems)

    # --- derived objects ---
    def app_rates(self) -> dict:
        return {Application.A1: self.rate_a1, Application.A2: self.rate_a2, Application.A3: self.rate_a3}

    def demanded(self) -> frozenset:
        return frozenset(Application(a) for a in self.demand)

    def decision(self) -> DecisionConfig:
        return DecisionConfig(ss_threshold=self.ss_threshold, hysteresis_db=self.hysteresis_db,
                              window=self.window, tr_a3_policy=self.tr_a3_policy, bandwidth=self.bandwidth)

    def solver(self, unstable_ok: bool = False) -> SolverConfig:
        return SolverConfig(dt=self.dt, total_time=self.total_time, boundary_h=self.boundary_h,
                            ambient_temp=self.ambient_temp, blood_temp=self.blood_temp,
                            unstable_ok=unstable_ok)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_ini(self) -> str:
        lines = []
        section = None
        for f in fields(self):
            sec = f.metadata["section"]
            if sec != section:
                if section is not None:
                    lines.append("")
                lines.append(f"[{sec}]")
                section = sec
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


FIELDS = {f.name: f for f in fields(ScenarioConfig)}


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(name: str, raw: str):
    default = FIELDS[name].default
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0])
            return tuple(kind(x.strip()) for x in raw.split(",") if x.strip())
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {type(default).__name__}") from None


def parse_overrides(pairs: Iterable[str]) -> dict:
    """``key=value`` strings (``section.key=value`` also accepted) to typed field values."""
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} is not key=value")
        key = key.strip().split(".")[-1]
        if key not in FIELDS:
            raise ConfigError(f"{key}: unknown configuration key")
        out[key] = _convert(key, value)
    return out


def read_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config file: {exc}") from None
    values = {}
    problems = []
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in FIELDS:
                problems.append(f"{key}: unknown configuration key in [{section}]")
                continue
            expected = FIELDS[key].metadata["section"]
            if expected != section:
                problems.append(f"{key}: belongs in [{expected}], found in [{section}]")
                continue
            values[key] = _convert(key, raw)
    if problems:
        raise ConfigError(problems)
    return values


def load_config(path: Optional[Path] = None, overrides: Optional[dict] = None) -> ScenarioConfig:
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config file: {exc}") from None
        values.update(read_config_text(text))
    values.update(overrides or {})
    try:
        return ScenarioConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
