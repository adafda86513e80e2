"""Two-cell Monte Carlo experiment: an all-Active cell against a cell where some UEs run TR mode.

Both cells of an iteration consume the same random draws (signal strengths,
fading coefficients, interference gains); only the mode of each UE differs.
The AM cell keeps every UE ACTIVE, the mixed cell lets the decision device
pick the mode from the measured signal strength.

Units: powers in W, SAR in W/kg, power density in W/m^2, EE in bit/J.
Complexity is the number of active application-direction links (each one an
interference term to evaluate) summed over the slots of a frame.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .apps import Application, Direction, count_links, links_for
from .channel import ChannelSnapshot, draw_coefficients
from .config import ScenarioConfig
from .exposure import MW_PER_CM2, power_density_far_field, sar_am, sar_tr
from .modes import UeMode, adaptive_switch, served_links
from .power import (FramePlan, check_frame, default_applications, optimum_power,
                    power_saved, served_applications)

APP_ORDER = (Application.A1, Application.A2, Application.A3)


@dataclass
class IterationDraw:
    """Random inputs of one iteration, shared by both cells."""

    iteration: int
    tr_designated: np.ndarray  # bool, (n_users,)
    ss: np.ndarray  # dBm, (n_users,)
    coefficients: np.ndarray  # unit-mean-power complex fading, (n_users, n_slots)
    bs_interference_gain: np.ndarray  # (n_users, n_slots)
    ue_interference_gain: np.ndarray  # (n_users, n_slots)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.tr_designated, self.ss, self.coefficients,
                    self.bs_interference_gain, self.ue_interference_gain):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def draw_iteration(config: ScenarioConfig, iteration: int) -> IterationDraw:
    """Draws for one iteration from a generator seeded by (seed, iteration).

    The TR designation is the first ``tr_users`` entries of a random
    permutation, so with the seed fixed a larger split only adds TR users.
    """
    rng = np.random.default_rng([config.seed, iteration])
    n, m = config.n_users, config.n_slots
    order = rng.permutation(n)
    u = rng.uniform(size=n)
    if config.fading == "rayleigh":
        coeff = draw_coefficients(rng, np.ones((n, m)), config.n_taps, config.tap_spacing, config.delay_decay)
    else:
        coeff = np.ones((n, m), dtype=complex)
    bs_g = rng.exponential(config.interference_gain, size=(n, m))
    ue_g = rng.exponential(config.interference_gain, size=(n, m))
    tr = np.zeros(n, dtype=bool)
    tr[order[:config.tr_users]] = True
    lo = np.where(tr, config.tr_band[0], config.am_band[0])
    hi = np.where(tr, config.tr_band[1], config.am_band[1])
    ss = lo + u * (hi - lo)
    return IterationDraw(iteration, tr, ss, coeff, bs_g, ue_g)


def large_scale_gain(ss_dbm, config: ScenarioConfig):
    """Path gain implied by a displayed signal strength.

    The displayed level is read as the BS power received per
    ``ss_reference_bandwidth``; scaled to the full bandwidth and divided by
    the BS transmit power it gives the mean link gain.
    """
    received = 10.0 ** (np.asarray(ss_dbm) / 10.0) * 1e-3 * (config.bandwidth / config.ss_reference_bandwidth)
    return received / config.t_bs


@dataclass
class UeRecord:
    user: int
    mode: UeMode
    demand: frozenset
    snapshot: ChannelSnapshot  # first slot
    p_total: float  # mean ACTIVE-mode power over the frame, W
    p_dl: float  # mean power of the TR-servable applications, W
    radiated: float  # mean power actually radiated in the assigned mode, W


@dataclass
class CellIteration:
    total_power: float
    sar: float
    pd: float
    ee: float
    complexity: int
    frame_feasible: bool
    draw_hash: str
    modes: list
    radiated: np.ndarray  # (n_users, n_slots)
    app_power: dict  # Application -> (n_users, n_slots) radiated power per application
    served: np.ndarray  # (n_users, n_slots, 3) bool, served applications in APP_ORDER
    links_per_frame: np.ndarray  # (n_users,) links summed over the frame
    user_pd: np.ndarray  # (n_users,) frame-mean incident PD, W/m^2
    user_sar_power: np.ndarray  # (n_users,) frame-mean power entering the SAR expression, W
    records: list = field(default_factory=list)
    trace: Optional[list] = None


def _slot_history(draw: IterationDraw, gain: np.ndarray, config: ScenarioConfig, user: int):
    n_link = count_links(links_for(config.demanded()))
    interf = (config.t_bs * draw.bs_interference_gain[user] * n_link[Direction.DL]
              + config.p_ue * draw.ue_interference_gain[user] * n_link[Direction.UL])
    snr = config.t_bs * gain[user] / config.noise_var
    sinr = config.t_bs * gain[user] / (config.noise_var + interf)
    return [(float(a), float(b), float(draw.ss[user])) for a, b in zip(snr, sinr)]


def evaluate_cell(draw: IterationDraw, config: ScenarioConfig, adaptive: bool,
                  keep_records: bool = False) -> CellIteration:
    """Metrics of one cell for one iteration.

    ``adaptive=False`` pins every UE to ACTIVE (the reference cell);
    ``adaptive=True`` runs the decision device on each UE's slot history.
    """
    n, m = config.n_users, config.n_slots
    demand = config.demanded()
    apps = default_applications(config.app_rates(), config.bandwidth)
    gain = large_scale_gain(draw.ss, config)[:, None] * np.abs(draw.coefficients) ** 2  # (n, m)
    safe_gain = np.where(gain > 0, gain, np.finfo(float).tiny)
    per_app = {a: optimum_power(apps[a], safe_gain, config.noise_var) if a in demand else np.zeros((n, m))
               for a in APP_ORDER}
    active_apps = served_applications(UeMode.ACTIVE, apps.values())
    tr_apps = served_applications(UeMode.TR, apps.values())
    p_total = sum(per_app[a.id] for a in active_apps)
    p_dl = sum(per_app[a.id] for a in tr_apps)

    modes = []
    traces = []
    target = sum(apps[a].target_rate for a in demand)
    for j in range(n):
        if adaptive:
            trace = adaptive_switch(_slot_history(draw, gain, config, j), demand, target, config.decision())
            traces.append(trace)
            modes.append([d.mode for d in trace])
        else:
            modes.append([UeMode.ACTIVE] * m)

    mask = {}
    n_links = {}
    for mode in UeMode:
        ids = {x.id for x in served_applications(mode, apps.values())}
        mask[mode] = [a in demand and a in ids for a in APP_ORDER]
        n_links[mode] = len(served_links(mode, demand, config.tr_a3_policy))
    served = np.array([[mask[md] for md in row] for row in modes], dtype=bool).reshape(n, m, 3)
    links = np.array([[n_links[md] for md in row] for row in modes], dtype=int).reshape(n, m)

    app_power = {a: np.where(served[:, :, k], per_app[a], 0.0) for k, a in enumerate(APP_ORDER)}
    radiated = sum(app_power.values()) if n else np.zeros((0, m))
    is_tr = np.array([[md is UeMode.TR for md in row] for row in modes], dtype=bool).reshape(n, m)

    # exposure: ACTIVE slots use the AM expressions, TR slots the TR ones
    sar_power_am = p_total if config.sar_am == "total" else p_total - p_dl
    sar_power = np.where(is_tr, p_dl, sar_power_am)
    exposed_power = np.where(is_tr, p_dl, p_total)
    user_sar_power = sar_power.mean(axis=1) if m else np.zeros(n)
    pd = power_density_far_field(config.antenna_gain, exposed_power, config.reference_distance)
    user_pd = pd.mean(axis=1)
    sar_users = np.where(is_tr, sar_tr(p_dl, config.exposure_mass),
                         sar_am(p_total, p_dl, config.exposure_mass, config.sar_am)).mean(axis=1)

    mean_radiated = float(radiated.sum(axis=0).mean()) if n else 0.0

    frame = check_frame(FramePlan(m, n, config.p_max, config.p_avg, radiated.T))

    records = []
    if keep_records:
        base = large_scale_gain(draw.ss, config)
        for j in range(n):
            c0 = complex(draw.coefficients[j, 0] * math.sqrt(base[j]))
            records.append(UeRecord(j, modes[j][0], demand, ChannelSnapshot(c0, abs(c0) ** 2, Direction.DL),
                                    float(p_total[j].mean()), float(p_dl[j].mean()),
                                    float(radiated[j].mean())))

    cell = CellIteration(
        total_power=mean_radiated,
        sar=float(sar_users.sum()),
        pd=float(user_pd.sum()),
        ee=0.0,
        complexity=int(links.sum()),
        frame_feasible=frame.ok,
        draw_hash=draw.digest(),
        modes=[row[0] for row in modes],
        radiated=radiated,
        app_power=app_power,
        served=served,
        links_per_frame=links.sum(axis=1),
        user_pd=user_pd,
        user_sar_power=user_sar_power,
        records=records,
        trace=traces if adaptive else None,
    )
    cell.ee = subset_ee(cell, config, n)
    return cell


def subset_ee(cell: CellIteration, config: ScenarioConfig, active_users: int,
              app: Optional[Application] = None) -> float:
    """EE of the first ``active_users`` UEs: served rate over frame-mean radiated power plus p_ckt.

    With ``app`` set, only that application's rate and power are counted.
    """
    k = active_users
    m = config.n_slots
    rates = config.app_rates()
    chosen = APP_ORDER if app is None else (Application(app),)
    rate = 0.0
    power = 0.0
    for a in chosen:
        i = APP_ORDER.index(a)
        rate += rates[a] * float(cell.served[:k, :, i].sum()) / m
        power += float(cell.app_power[a][:k].sum(axis=0).mean()) if k else 0.0
    return rate / (power + config.p_ckt)


# --- aggregation --------------------------------------------------------------

@dataclass
class CellMetrics:
    label: str
    total_power: np.ndarray  # W, per iteration
    power_saved: np.ndarray  # W, relative to the AM cell
    aggregate_sar: np.ndarray  # W/kg
    aggregate_pd: np.ndarray  # W/m^2
    ee: np.ndarray  # bit/J
    complexity: np.ndarray  # links summed over the frame
    frame_feasible: np.ndarray  # bool
    draw_hashes: list

    @property
    def mean_ee(self) -> float:
        return float(self.ee.mean())

    @property
    def mean_total_power(self) -> float:
        return float(self.total_power.mean())

    def rows(self):
        for i in range(len(self.total_power)):
            yield (i, self.label, self.total_power[i], self.power_saved[i], self.aggregate_sar[i],
                   self.aggregate_pd[i], self.ee[i], int(self.complexity[i]), int(self.frame_feasible[i]),
                   self.draw_hashes[i])


CELL_METRICS_HEADER = ("iteration", "cell", "total_power_w", "power_saved_w", "aggregate_sar_w_per_kg",
                       "aggregate_pd_w_per_m2", "ee_bits_per_joule", "complexity_links", "frame_feasible",
                       "draw_sha256")
EE_HEADER = ("iteration", "active_users", "cell", "application", "ee_bits_per_joule")
COMPLEXITY_HEADER = ("iteration", "active_users", "cell", "complexity_links")


@dataclass(frozen=True)
class ExposureCoupling:
    """Typical exposure of the TR-designated UEs in each cell (medians over UEs and iterations)."""

    incident_pd_am: float  # mW/cm^2
    incident_pd_tr: float  # mW/cm^2
    sar_power_am: float  # W entering the SAR source
    sar_power_tr: float  # W


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    am: CellMetrics
    mixed: CellMetrics
    ee_rows: list
    complexity_rows: list
    coupling: ExposureCoupling
    records: list  # UeRecords of the mixed cell, first iteration
    trace: list  # decision traces of the mixed cell, first iteration

    def __iter__(self):
        yield self.am
        yield self.mixed


def user_counts(config: ScenarioConfig) -> list:
    counts = set(range(config.user_step, config.n_users + 1, config.user_step))
    counts.add(config.n_users)
    return sorted(counts)


def simulate_iteration(config: ScenarioConfig, iteration: int, keep_records: bool = False):
    draw = draw_iteration(config, iteration)
    am = evaluate_cell(draw, config, adaptive=False)
    mixed = evaluate_cell(draw, config, adaptive=True, keep_records=keep_records)
    return draw, am, mixed


def _series_rows(iteration, am, mixed, config):
    ee_rows, cx_rows = [], []
    for k in user_counts(config):
        for label, cell in (("am", am), ("mixed", mixed)):
            ee_rows.append((iteration, k, label, "all", subset_ee(cell, config, k)))
            for a in APP_ORDER:
                if a in config.demanded():
                    ee_rows.append((iteration, k, label, a.value, subset_ee(cell, config, k, a)))
            cx_rows.append((iteration, k, label, int(cell.links_per_frame[:k].sum())))
    return ee_rows, cx_rows


def run_scenario(config: ScenarioConfig, workers: int = 1) -> ScenarioResult:
    """Both cells over every iteration; unpacks as ``am_cell, mixed_cell``.

    Iterations only depend on (seed, iteration index); with ``workers > 1``
    they run on a thread pool and are combined in iteration order, so the
    result is identical to a serial run.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    job = lambda i: simulate_iteration(config, i, keep_records=(i == 0))
    if workers == 1:
        per_it = [job(i) for i in range(config.iterations)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_it = list(pool.map(job, range(config.iterations)))

    def metrics(label, cells, saved):
        return CellMetrics(
            label=label,
            total_power=np.array([c.total_power for c in cells]),
            power_saved=saved,
            aggregate_sar=np.array([c.sar for c in cells]),
            aggregate_pd=np.array([c.pd for c in cells]),
            ee=np.array([c.ee for c in cells]),
            complexity=np.array([c.complexity for c in cells]),
            frame_feasible=np.array([c.frame_feasible for c in cells]),
            draw_hashes=[c.draw_hash for c in cells],
        )

    am_cells = [a for _, a, _ in per_it]
    mixed_cells = [m for _, _, m in per_it]
    am_total = np.array([c.total_power for c in am_cells])
    mixed_total = np.array([c.total_power for c in mixed_cells])
    am = metrics("am", am_cells, np.zeros(config.iterations))
    mixed = metrics("mixed", mixed_cells, power_saved(am_total, mixed_total))

    ee_rows, cx_rows = [], []
    for i, (_, a, m) in enumerate(per_it):
        e, c = _series_rows(i, a, m, config)
        ee_rows.extend(e)
        cx_rows.extend(c)

    coupling = _coupling(per_it, config)
    first = mixed_cells[0]
    return ScenarioResult(config, am, mixed, ee_rows, cx_rows, coupling, first.records, first.trace)


def _coupling(per_it, config: ScenarioConfig) -> ExposureCoupling:
    pd_am, pd_tr, s_am, s_tr = [], [], [], []
    for draw, am, mixed in per_it:
        sel = draw.tr_designated if draw.tr_designated.any() else np.ones_like(draw.tr_designated)
        pd_am.append(am.user_pd[sel])
        pd_tr.append(mixed.user_pd[sel])
        s_am.append(am.user_sar_power[sel])
        s_tr.append(mixed.user_sar_power[sel])

    def med(parts):
        v = np.concatenate(parts)
        return float(np.median(v)) if v.size else 0.0

    return ExposureCoupling(med(pd_am) / MW_PER_CM2, med(pd_tr) / MW_PER_CM2, med(s_am), med(s_tr))


def ee_series(config: ScenarioConfig) -> list:
    """Rows of EE_HEADER: EE against active-user count, per iteration, cell and application."""
    return run_scenario(config).ee_rows


def complexity_series(config: ScenarioConfig) -> list:
    """Rows of COMPLEXITY_HEADER: frame link count against active-user count, per iteration and cell."""
    return run_scenario(config).complexity_rows


# --- constraints ---------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    margins: np.ndarray  # AM-cell value minus mixed-cell value, per iteration

    @property
    def holds(self) -> bool:
        return bool(self.margins.size and np.all(self.margins > 0))

    @property
    def min_margin(self) -> float:
        return float(self.margins.min()) if self.margins.size else 0.0

    @property
    def violations(self) -> int:
        return int(np.sum(~(self.margins > 0)))


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple
    paired: bool  # both cells saw the same draws in every iteration

    @property
    def ok(self) -> bool:
        return self.paired and all(c.holds for c in self.checks)

    def rows(self):
        yield ("constraint", "holds", "min_margin", "mean_margin", "violating_iterations")
        for c in self.checks:
            yield (c.name, int(c.holds), c.min_margin, float(c.margins.mean()), c.violations)


def check_constraints(am: CellMetrics, mixed: CellMetrics) -> ConstraintReport:
    """Strict dominance of the all-AM cell over the mixed cell, iteration by iteration.

    Equality counts as a violation. Total power is reported alongside the
    aggregate SAR and PD constraints.
    """
    if len(am.total_power) != len(mixed.total_power):
        raise ValueError("cells cover different numbers of iterations")
    checks = (
        ConstraintCheck("aggregate_sar", am.aggregate_sar - mixed.aggregate_sar),
        ConstraintCheck("aggregate_pd", am.aggregate_pd - mixed.aggregate_pd),
        ConstraintCheck("total_power", am.total_power - mixed.total_power),
    )
    return ConstraintReport(checks, am.draw_hashes == mixed.draw_hashes)
