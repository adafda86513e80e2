"""Frame power constraints, Active/TR power splitting, Shannon-inversion power and efficiency."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .apps import Application
from .modes import UeMode, allowed_applications

LN2 = np.log(2.0)

DEFAULT_RATES = {Application.A1: 10e3, Application.A2: 64e3, Application.A3: 2e6}  # bit/s
DEFAULT_BANDWIDTH = 5e6  # Hz
DEFAULT_P_CKT = 0.1  # W


@dataclass
class FramePlan:
    n_slots: int
    n_users: int
    p_max: float
    p_avg: float
    allocations: np.ndarray = None

    def __post_init__(self):
        if self.allocations is None:
            self.allocations = np.zeros((self.n_slots, self.n_users))
        self.allocations = np.asarray(self.allocations, dtype=float)
        if self.allocations.shape != (self.n_slots, self.n_users):
            raise ValueError(f"allocations must have shape ({self.n_slots}, {self.n_users}), "
                             f"got {self.allocations.shape}")


@dataclass
class FrameReport:
    slot_ok: bool
    frame_ok: bool
    nonnegative: bool
    violating_slot: Optional[int] = None
    frame_total: float = 0.0

    @property
    def ok(self) -> bool:
        return self.slot_ok and self.frame_ok and self.nonnegative


def check_frame(plan: FramePlan) -> FrameReport:
    """Per-slot peak and per-frame average power constraints (both inclusive)."""
    alloc = plan.allocations
    slot_sums = alloc.sum(axis=1)
    bad = np.flatnonzero(slot_sums > plan.p_max)
    total = float(alloc.sum())
    return FrameReport(
        slot_ok=bad.size == 0,
        frame_ok=total <= plan.n_slots * plan.p_avg,
        nonnegative=bool(np.all(alloc >= 0)),
        violating_slot=int(bad[0]) if bad.size else None,
        frame_total=total,
    )


@dataclass(frozen=True)
class PowerSplit:
    alpha: float
    p_dl: float
    p_total: float
    gamma: float = 1.0

    @property
    def p_ul(self) -> float:
        return self.p_total - self.p_dl

    def validate(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 <= self.p_dl <= self.p_total:
            raise ValueError(f"need 0 <= p_dl <= p_total, got p_dl={self.p_dl}, p_total={self.p_total}")


def split_power(s: PowerSplit, h_gain: float):
    """Return (p_tr, p_am): the TR-circuit and active-mode portions of a slot's power."""
    s.validate()
    if h_gain < 0:
        raise ValueError(f"h_gain must be >= 0, got {h_gain}")
    p_tr = s.gamma * h_gain * (1.0 - s.alpha) * s.p_dl
    p_am = s.alpha * h_gain * (s.p_total - s.p_dl)
    return p_tr, p_am


@dataclass(frozen=True)
class ApplicationClass:
    id: Application
    target_rate: float
    bandwidth: float = DEFAULT_BANDWIDTH


def default_applications(rates: Optional[dict] = None, bandwidth: float = DEFAULT_BANDWIDTH) -> dict:
    rates = {**DEFAULT_RATES, **(rates or {})}
    apps = {a: ApplicationClass(a, float(rates[a]), bandwidth) for a in Application}
    r = [apps[a].target_rate for a in (Application.A1, Application.A2, Application.A3)]
    if not r[0] < r[1] < r[2]:
        raise ValueError(f"target rates must satisfy A1 < A2 < A3, got {r}")
    return apps


class ThroughputMode(str, Enum):
    DL_AM = "DL-AM"
    UL_AM = "UL-AM"
    TR = "TR"


def throughput(mode: ThroughputMode, powers, noise_var: float, gains=None) -> float:
    """Spectral efficiency in bit/s/Hz summed over the assigned subcarriers.

    For the downlink and TR variants the per-subcarrier powers already carry
    the downlink channel gain (they come out of ``split_power``); the uplink
    variant multiplies by the uplink gains, which are then required. In TR
    mode ``powers`` are the downlink-portion powers.
    """
    mode = ThroughputMode(mode)
    if noise_var <= 0:
        raise ValueError(f"noise_var must be > 0, got {noise_var}")
    powers = np.atleast_1d(np.asarray(powers, dtype=float))
    if gains is None:
        if mode is ThroughputMode.UL_AM:
            raise ValueError("uplink throughput needs the uplink channel gains")
        gains = np.ones_like(powers)
    gains = np.broadcast_to(np.asarray(gains, dtype=float), powers.shape)
    return float(np.sum(np.log2(1.0 + powers * gains / noise_var)))


def optimum_power(app: ApplicationClass, h_gain, noise_var: float):
    """Smallest transmit power whose Shannon rate over the app bandwidth meets the target."""
    if app.bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {app.bandwidth}")
    h = np.asarray(h_gain, dtype=float)
    if np.any(h <= 0):
        raise ValueError("h_gain must be > 0; no finite power reaches the target rate in a null fade")
    p = noise_var / h * np.expm1(app.target_rate / app.bandwidth * LN2)
    return float(p) if p.ndim == 0 else p


def shannon_rate(p_t, h_gain, noise_var: float, bandwidth: float):
    """Forward Shannon rate in bit/s for transmit power ``p_t``."""
    return bandwidth * np.log1p(np.asarray(p_t) * h_gain / noise_var) / LN2


def served_applications(mode: UeMode, apps: Iterable[ApplicationClass]) -> list:
    allowed = allowed_applications(mode)
    return [a for a in apps if a.id in allowed]


def total_power(mode: UeMode, apps: Iterable[ApplicationClass], h_gain, noise_var: float):
    """Sum of optimum powers over the applications the mode serves."""
    apps = list(apps)
    if not apps:
        raise ValueError("application set is empty")
    total = 0.0
    for app in served_applications(UeMode(mode), apps):
        total = total + optimum_power(app, h_gain, noise_var)
    return total


def power_saved(am_cell: float, mixed_cell: float) -> float:
    return am_cell - mixed_cell


def energy_efficiency(rate: float, radiated_powers, p_ckt: float = DEFAULT_P_CKT) -> float:
    """Delivered bits per joule: rate over radiated plus circuit power."""
    if p_ckt <= 0:
        raise ValueError(f"p_ckt must be > 0, got {p_ckt}")
    return rate / (float(np.sum(radiated_powers)) + p_ckt)
