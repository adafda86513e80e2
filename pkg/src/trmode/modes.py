"""Display-and-decision signal classification, Active/TR mode switching and the RRC machine.

The RRC machine is the abstract one from the TR-mode proposal: the usual
IDLE/CONNECTED pair plus RRC_AM_TR (transition state, flag raised) and RRC_EE
(low-activity, downlink-only). Nothing here encodes real RRC/NAS messages.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

from .apps import ALL_APPS, Application, Direction, Link, links_for

SS_THRESHOLD_DBM = -99.0
SERVED_BAND_DBM = (-99.0, -50.0)


class UeMode(str, Enum):
    ACTIVE = "ACTIVE"
    TR = "TR"
    FLIGHT = "FLIGHT"


class QualityBand(str, Enum):
    GREAT = "Great"
    GOOD = "Good"
    AVERAGE = "Average"
    POOR = "Poor"
    VERY_POOR = "Very Poor"


BANDS = tuple(QualityBand)


@dataclass(frozen=True)
class OperatorProfile:
    """Lower signal-strength edge (dBm) of each quality band, Great first."""

    name: str
    band_edges: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.band_edges)
        if len(edges) != len(BANDS):
            raise ValueError(f"{self.name}: need {len(BANDS)} band edges, got {len(edges)}")
        if any(b >= a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"{self.name}: band edges must be strictly decreasing, got {edges}")
        object.__setattr__(self, "band_edges", edges)

    def edge(self, band: QualityBand) -> float:
        return self.band_edges[BANDS.index(QualityBand(band))]


# Great/Good share -50..-89 dBm, Average is -90..-99, Poor/Very Poor -100..-120.
# The Great|Good and Poor|Very Poor splits inside those ranges are our choice.
GENERIC_PROFILE = OperatorProfile("generic", (-70.0, -89.0, -99.0, -110.0, -120.0))


def load_operator_profiles(path: Optional[Path] = None) -> dict:
    """Operator profiles from CSV (``operator,great_dbm,...,very_poor_dbm``), plus the generic one."""
    if path is None:
        text = resources.files("trmode.data").joinpath("table3_operators.csv").read_text()
    else:
        text = Path(path).read_text()
    cols = ("great_dbm", "good_dbm", "average_dbm", "poor_dbm", "very_poor_dbm")
    profiles = {GENERIC_PROFILE.name: GENERIC_PROFILE}
    for row in csv.DictReader(text.splitlines()):
        profiles[row["operator"]] = OperatorProfile(row["operator"], tuple(float(row[c]) for c in cols))
    return profiles


def classify_signal(ss: float, profile: OperatorProfile = GENERIC_PROFILE) -> QualityBand:
    """Best band whose lower edge ``ss`` meets or exceeds; anything weaker is Very Poor."""
    if not math.isfinite(ss):
        raise ValueError(f"signal strength must be finite, got {ss}")
    for band, edge in zip(BANDS, profile.band_edges):
        if ss >= edge:
            return band
    return QualityBand.VERY_POOR


@dataclass(frozen=True)
class DecisionConfig:
    ss_threshold: float = SS_THRESHOLD_DBM
    served_band: tuple = SERVED_BAND_DBM
    hysteresis_db: float = 0.0
    window: int = 32
    tr_a3_policy: str = "unserved"  # or "dl_only"
    bandwidth: float = 5e6

    def __post_init__(self):
        if self.tr_a3_policy not in ("unserved", "dl_only"):
            raise ValueError(f"tr_a3_policy must be 'unserved' or 'dl_only', got {self.tr_a3_policy!r}")
        if self.hysteresis_db < 0:
            raise ValueError("hysteresis_db must be >= 0")
        if self.window < 1:
            raise ValueError("window must be >= 1")


def d2_decide(ss: float, config: DecisionConfig, current: UeMode = UeMode.ACTIVE) -> UeMode:
    """Mode for one slot: TR strictly below the threshold, ACTIVE at or above it.

    With a non-zero hysteresis margin a UE already in TR only recovers once the
    signal reaches ``threshold + margin``.
    """
    current = UeMode(current)
    if current is UeMode.FLIGHT:
        raise ValueError("flight mode is user-set; the decision device never leaves it")
    if current is UeMode.TR:
        return UeMode.ACTIVE if ss >= config.ss_threshold + config.hysteresis_db else UeMode.TR
    return UeMode.TR if ss < config.ss_threshold else UeMode.ACTIVE


def allowed_applications(mode: UeMode) -> frozenset:
    mode = UeMode(mode)
    if mode is UeMode.ACTIVE:
        return ALL_APPS
    if mode is UeMode.TR:
        return frozenset({Application.A1, Application.A2})
    return frozenset()


def served_links(mode: UeMode, demand: Iterable[Application] = ALL_APPS,
                 tr_a3_policy: str = "unserved") -> frozenset:
    """Application-direction links a UE keeps active in ``mode``."""
    mode = UeMode(mode)
    demand = frozenset(Application(a) for a in demand)
    links = links_for(demand & allowed_applications(mode))
    if mode is UeMode.TR and tr_a3_policy == "dl_only" and Application.A3 in demand:
        links = links | {Link(Application.A3, Direction.DL)}
    return links


# --- RRC state machine ------------------------------------------------------

class RrcPhase(str, Enum):
    IDLE = "RRC_IDLE"
    CONNECTED = "RRC_CONNECTED"
    AM_TR = "RRC_AM_TR"
    EE = "RRC_EE"


class EventKind(str, Enum):
    SETUP_REQUEST = "setup_request"
    SETUP_COMPLETE = "setup_complete"
    MODE_IDENTIFIED = "mode_identified"
    FLAG_CHECKED = "flag_checked"
    SIGNAL_RECOVERED = "signal_recovered"
    RELEASE = "release"
    UL_INFORMATION_TRANSFER = "uplink_transfer"
    DL_INFORMATION_TRANSFER = "downlink_transfer"
    UL_NAS_TRANSPORT = "uplink_nas"
    DL_NAS_TRANSPORT = "downlink_nas"


UPLINK_EVENTS = frozenset({EventKind.UL_INFORMATION_TRANSFER, EventKind.UL_NAS_TRANSPORT})
DOWNLINK_EVENTS = frozenset({EventKind.DL_INFORMATION_TRANSFER, EventKind.DL_NAS_TRANSPORT})
TRANSFER_EVENTS = UPLINK_EVENTS | DOWNLINK_EVENTS


@dataclass(frozen=True)
class RrcEvent:
    kind: EventKind
    mode: Optional[UeMode] = None  # only for MODE_IDENTIFIED

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        if self.kind is EventKind.MODE_IDENTIFIED:
            if self.mode is None:
                raise ValueError("mode_identified needs a mode")
            object.__setattr__(self, "mode", UeMode(self.mode))


@dataclass(frozen=True)
class RrcState:
    phase: RrcPhase = RrcPhase.IDLE
    flag: int = 0
    setup_pending: bool = False
    flight: bool = False


class ProtocolViolation(Exception):
    def __init__(self, state: RrcState, event: RrcEvent, reason: str):
        super().__init__(f"{event.kind.value} rejected in {state.phase.value}: {reason}")
        self.state = state
        self.event = event
        self.reason = reason


def _reject(reason):
    def handler(state, event):
        raise ProtocolViolation(state, event, reason)
    return handler


def _idle_setup_request(s, e):
    if s.setup_pending:
        raise ProtocolViolation(s, e, "setup already requested")
    return replace(s, setup_pending=True)


def _idle_setup_complete(s, e):
    if not s.setup_pending:
        raise ProtocolViolation(s, e, "no setup in progress")
    return RrcState(RrcPhase.CONNECTED)


def _idle_release(s, e):
    if not s.setup_pending:
        raise ProtocolViolation(s, e, "nothing to release")
    return RrcState()


def _release(s, e):
    return RrcState()


def _mode_identified(s, e):
    if e.mode is UeMode.TR:
        if s.phase in (RrcPhase.AM_TR, RrcPhase.EE):
            return s
        return RrcState(RrcPhase.AM_TR, flag=1)
    if e.mode is UeMode.FLIGHT:
        return RrcState(RrcPhase.CONNECTED, flight=True)
    return RrcState(RrcPhase.CONNECTED)


def _flag_checked(s, e):
    if s.flag != 1:
        raise ProtocolViolation(s, e, "TR flag is not set")
    return RrcState(RrcPhase.EE, flag=1)


def _recovered(s, e):
    return RrcState(RrcPhase.CONNECTED)


def _transfer_connected(s, e):
    if s.flight:
        raise ProtocolViolation(s, e, "flight mode suspends all UL and DL transfer")
    return s


def _transfer_downlink_only(s, e):
    if e.kind in UPLINK_EVENTS:
        raise ProtocolViolation(s, e, "uplink transmissions are suspended in TR mode")
    return s


_TRANSITIONS = {}
for _k in EventKind:
    _TRANSITIONS[RrcPhase.IDLE, _k] = _reject("no RRC connection")
    _TRANSITIONS[RrcPhase.CONNECTED, _k] = _reject("not valid while connected")
    _TRANSITIONS[RrcPhase.AM_TR, _k] = _reject("not valid while entering TR mode")
    _TRANSITIONS[RrcPhase.EE, _k] = _reject("not valid in RRC_EE")
_TRANSITIONS.update({
    (RrcPhase.IDLE, EventKind.SETUP_REQUEST): _idle_setup_request,
    (RrcPhase.IDLE, EventKind.SETUP_COMPLETE): _idle_setup_complete,
    (RrcPhase.IDLE, EventKind.RELEASE): _idle_release,
    (RrcPhase.CONNECTED, EventKind.MODE_IDENTIFIED): _mode_identified,
    (RrcPhase.CONNECTED, EventKind.FLAG_CHECKED): _reject("TR flag is not set"),
    (RrcPhase.CONNECTED, EventKind.SIGNAL_RECOVERED): _reject("not in TR mode"),
    (RrcPhase.CONNECTED, EventKind.RELEASE): _release,
    (RrcPhase.AM_TR, EventKind.MODE_IDENTIFIED): _mode_identified,
    (RrcPhase.AM_TR, EventKind.FLAG_CHECKED): _flag_checked,
    (RrcPhase.AM_TR, EventKind.SIGNAL_RECOVERED): _recovered,
    (RrcPhase.AM_TR, EventKind.RELEASE): _release,
    (RrcPhase.EE, EventKind.MODE_IDENTIFIED): _mode_identified,
    (RrcPhase.EE, EventKind.FLAG_CHECKED): _reject("TR flag already confirmed"),
    (RrcPhase.EE, EventKind.SIGNAL_RECOVERED): _recovered,
    (RrcPhase.EE, EventKind.RELEASE): _release,
})
for _k in TRANSFER_EVENTS:
    _TRANSITIONS[RrcPhase.CONNECTED, _k] = _transfer_connected
    _TRANSITIONS[RrcPhase.AM_TR, _k] = _transfer_downlink_only
    _TRANSITIONS[RrcPhase.EE, _k] = _transfer_downlink_only
del _k


def transition(state: RrcState, event) -> RrcState:
    """Next state, or ProtocolViolation for an illegal (state, event) pair."""
    if not isinstance(event, RrcEvent):
        event = RrcEvent(event)
    return _TRANSITIONS[state.phase, event.kind](state, event)


class RrcController:
    """Single-owner wrapper that applies events and logs the transfers it let through."""

    def __init__(self, state: Optional[RrcState] = None):
        self.state = state or RrcState()
        self.emitted = []

    def apply(self, event) -> RrcState:
        if not isinstance(event, RrcEvent):
            event = RrcEvent(event)
        self.state = transition(self.state, event)
        if event.kind in TRANSFER_EVENTS:
            self.emitted.append((self.state.phase, event.kind))
        return self.state

    def connect(self) -> RrcState:
        self.apply(EventKind.SETUP_REQUEST)
        return self.apply(EventKind.SETUP_COMPLETE)

    def enter_mode(self, mode: UeMode) -> RrcState:
        """Mode identification; TR continues straight through RRC_AM_TR into RRC_EE."""
        mode = UeMode(mode)
        if mode is UeMode.TR and self.state.phase is RrcPhase.EE:
            return self.state
        if mode is UeMode.ACTIVE and self.state.phase in (RrcPhase.AM_TR, RrcPhase.EE):
            return self.apply(EventKind.SIGNAL_RECOVERED)
        self.apply(RrcEvent(EventKind.MODE_IDENTIFIED, mode))
        if mode is UeMode.TR:
            self.apply(EventKind.FLAG_CHECKED)
        return self.state

    def offer(self, kind: EventKind) -> bool:
        """Try a transfer event; True if it was allowed."""
        try:
            self.apply(kind)
        except ProtocolViolation:
            return False
        return True


# --- adaptive switching -----------------------------------------------------

class SlotRecord(NamedTuple):
    snr: float
    sinr: float
    ss: float


@dataclass(frozen=True)
class SlotDecision:
    slot: int
    ss: float
    snr: float
    sinr: float
    mode: UeMode
    served: frozenset
    links: frozenset
    above_threshold: bool  # SS > SS_th
    in_served_band: bool
    rate_feasible: bool
    window_mean_sinr: float


def adaptive_switch(history: Sequence, demand: Iterable[Application], target_rate: float,
                    config: DecisionConfig = DecisionConfig()) -> list:
    """Per-slot mode decisions from a (snr, sinr, ss) history.

    A rolling window of the last ``config.window`` records stands in for the
    training database; the mode itself depends only on signal strength, and
    the UE returns to ACTIVE on the first slot the signal is back at or above
    the threshold.
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    demand = frozenset(Application(a) for a in demand)
    db = deque(maxlen=config.window)
    lo, hi = config.served_band
    mode = UeMode.ACTIVE
    trace = []
    for i, rec in enumerate(history):
        rec = SlotRecord(*rec)
        db.append(rec)
        mode = d2_decide(rec.ss, config, mode)
        served = demand & allowed_applications(mode)
        trace.append(SlotDecision(
            slot=i,
            ss=rec.ss,
            snr=rec.snr,
            sinr=rec.sinr,
            mode=mode,
            served=served,
            links=served_links(mode, demand, config.tr_a3_policy),
            above_threshold=rec.ss > config.ss_threshold,
            in_served_band=lo < rec.ss < hi,
            rate_feasible=config.bandwidth * math.log2(1.0 + max(rec.sinr, 0.0)) >= target_rate,
            window_mean_sinr=sum(r.sinr for r in db) / len(db),
        ))
    return trace


TRACE_HEADER = ("slot", "ss_dbm", "snr", "sinr", "mode", "served", "n_ul_links", "n_dl_links",
                "above_threshold", "in_served_band", "rate_feasible", "window_mean_sinr")


def trace_rows(trace: Iterable[SlotDecision]):
    for d in trace:
        n_ul = sum(1 for l in d.links if l.direction is Direction.UL)
        yield (d.slot, d.ss, d.snr, d.sinr, d.mode.value,
               "+".join(sorted(a.value for a in d.served)), n_ul, len(d.links) - n_ul,
               int(d.above_threshold), int(d.in_served_band), int(d.rate_feasible), d.window_mean_sinr)
