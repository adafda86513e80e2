"""Non-stationary wideband Rayleigh multipath channels, SNR/SINR and interference.

Each tap carries an amplitude and a phase; the phase folds Doppler and
oscillator offset together and is redrawn every slot. Tap amplitudes are
Rayleigh with uniform phase, so every tap is circular complex Gaussian and the
summed coefficient has a Rayleigh envelope for any tap count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .apps import Direction, Link, count_links

DEFAULT_TAP_SPACING = 10e-9  # s
DEFAULT_DELAY_DECAY = 30e-9  # s, exponential power-delay profile constant


@dataclass(frozen=True)
class ChannelTap:
    delay: float
    amplitude: float
    phase: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"tap amplitude must be >= 0, got {self.amplitude}")
        if self.delay < 0:
            raise ValueError(f"tap delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class MultipathChannel:
    taps: tuple
    measurement_time: int = 0

    def __post_init__(self):
        if len(self.taps) == 0:
            raise ValueError("a channel needs at least one tap")
        delays = [t.delay for t in self.taps]
        if any(b < a for a, b in zip(delays, delays[1:])):
            raise ValueError("taps must be sorted by delay")


@dataclass(frozen=True)
class ChannelSnapshot:
    coefficient: complex
    gain: float
    direction: Direction = Direction.DL

    def __post_init__(self):
        expected = abs(self.coefficient) ** 2
        if self.gain < 0 or abs(self.gain - expected) > 1e-12 * max(expected, self.gain):
            raise ValueError(f"gain {self.gain} does not equal |coefficient|^2 = {expected}")


@dataclass(frozen=True)
class InterferenceBudget:
    from_bs: float
    from_ues: float

    @property
    def total(self) -> float:
        return self.from_bs + self.from_ues


def exponential_profile(n_taps: int, mean_gain: float, tap_spacing: float = DEFAULT_TAP_SPACING,
                        decay: float = DEFAULT_DELAY_DECAY):
    """Tap delays and mean tap powers of an exponential profile summing to ``mean_gain``."""
    delays = np.arange(n_taps) * tap_spacing
    powers = np.exp(-delays / decay) if decay > 0 else np.ones(n_taps)
    return delays, powers * (mean_gain / powers.sum())


def _draw_taps(rng: np.random.Generator, tap_powers: np.ndarray, batch_shape=()):
    """Circular complex Gaussian taps, returned as (amplitude, phase) with tap = amplitude * e^{-j phase}."""
    shape = tuple(batch_shape) + (len(tap_powers),)
    z = rng.standard_normal(shape + (2,))
    tap = np.sqrt(np.broadcast_to(tap_powers, shape) / 2.0) * (z[..., 0] + 1j * z[..., 1])
    return np.abs(tap), np.mod(-np.angle(tap), 2.0 * np.pi)


def _rng(seed, slot: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, slot); cheap enough to build once per draw."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed < 0 or slot < 0:
        raise ValueError(f"seed and slot must be non-negative, got {seed}, {slot}")
    return np.random.Generator(np.random.Philox(key=[int(seed), int(slot)]))


def sample_channel(seed, n_taps: int, mean_gain: float, slot: int = 0,
                   tap_spacing: float = DEFAULT_TAP_SPACING,
                   decay: float = DEFAULT_DELAY_DECAY) -> MultipathChannel:
    """Draw one multipath realization for measurement slot ``slot``.

    ``seed`` is an integer or a ``numpy.random.Generator``. An integer seed is
    combined with the slot index, so each slot is an independent redraw and the
    same (seed, slot) always reproduces the same taps.
    """
    if n_taps < 1:
        raise ValueError(f"n_taps must be >= 1, got {n_taps}")
    if not mean_gain > 0:
        raise ValueError(f"mean_gain must be > 0, got {mean_gain}")
    delays, powers = exponential_profile(n_taps, mean_gain, tap_spacing, decay)
    amplitude, phase = _draw_taps(_rng(seed, slot), powers)
    taps = tuple(ChannelTap(float(d), float(a), float(p)) for d, a, p in zip(delays, amplitude, phase))
    return MultipathChannel(taps, measurement_time=slot)


def draw_coefficients(rng: np.random.Generator, mean_gain, n_taps: int,
                      tap_spacing: float = DEFAULT_TAP_SPACING,
                      decay: float = DEFAULT_DELAY_DECAY) -> np.ndarray:
    """Vectorized counterpart of ``snapshot(sample_channel(...))``.

    ``mean_gain`` may be an array; one summed coefficient is drawn per element.
    """
    mean_gain = np.asarray(mean_gain, dtype=float)
    if n_taps < 1:
        raise ValueError(f"n_taps must be >= 1, got {n_taps}")
    if np.any(mean_gain <= 0):
        raise ValueError("mean_gain must be > 0")
    _, unit = exponential_profile(n_taps, 1.0, tap_spacing, decay)
    amplitude, phase = _draw_taps(rng, unit, mean_gain.shape)
    coeff = np.sum(amplitude * np.exp(-1j * phase), axis=-1)
    return coeff * np.sqrt(mean_gain)


def snapshot(channel: MultipathChannel, direction: Direction = Direction.DL) -> ChannelSnapshot:
    coeff = sum(t.amplitude * complex(math.cos(t.phase), -math.sin(t.phase)) for t in channel.taps)
    coeff = complex(coeff)
    return ChannelSnapshot(coeff, abs(coeff) ** 2, Direction(direction))


def power_delay_profile(channel: MultipathChannel) -> list:
    """(delay, power) per tap; power is the squared tap amplitude."""
    return [(t.delay, t.amplitude ** 2) for t in channel.taps]


def snr(p_t: float, snap: ChannelSnapshot, noise_var: float) -> float:
    if noise_var <= 0:
        raise ValueError(f"noise_var must be > 0, got {noise_var}")
    return p_t * snap.gain / noise_var


def interference(t_bs: float, p_j: float, bs_gain: float, ue_gain: float,
                 active_links: Iterable[Link]) -> InterferenceBudget:
    """Interference seen by a user given the links active around it.

    Every downlink link is a base-station transmission contributing
    ``t_bs * bs_gain``; every uplink link is a handset transmission
    contributing ``p_j * ue_gain``.
    """
    n = count_links(active_links)
    return InterferenceBudget(
        from_bs=t_bs * bs_gain * n[Direction.DL],
        from_ues=p_j * ue_gain * n[Direction.UL],
    )


def sinr(p_t: float, snap: ChannelSnapshot, noise_var: float, budget: InterferenceBudget) -> float:
    if noise_var <= 0:
        raise ValueError(f"noise_var must be > 0, got {noise_var}")
    return p_t * snap.gain / (noise_var + budget.total)


class Table5Row(NamedTuple):
    time_instant: int
    gain: float
    coefficient_magnitude: float


def load_table5() -> list:
    """Reference gains and coefficients of the non-stationary channel at t = 0..4."""
    text = resources.files("trmode.data").joinpath("table5_channel.csv").read_text()
    rows = csv.DictReader(text.splitlines())
    return [Table5Row(int(r["time_instant"]), float(r["gain"]), float(r["coefficient_magnitude"])) for r in rows]


def table5_channel(tap_spacing: float = DEFAULT_TAP_SPACING) -> MultipathChannel:
    """Reference rows as a zero-phase multipath channel, one tap per time instant.

    Tap amplitudes are the square roots of the gain column (the coefficient
    column is rounded and only approximately squares to the gains).
    """
    rows = load_table5()
    taps = tuple(ChannelTap(r.time_instant * tap_spacing, math.sqrt(r.gain), 0.0) for r in rows)
    return MultipathChannel(taps)


def envelope_samples(seeds: Sequence[int], n_taps: int, mean_gain: float = 1.0,
                     tap_spacing: float = DEFAULT_TAP_SPACING, decay: float = DEFAULT_DELAY_DECAY) -> np.ndarray:
    """|h| of ``snapshot(sample_channel(seed, ...))`` for each seed, without building tap objects."""
    _, powers = exponential_profile(n_taps, mean_gain, tap_spacing, decay)
    # Same normal draws as _draw_taps on _rng(seed, 0). Re-keying one Philox
    # instance is much cheaper than constructing a generator per seed.
    bits = np.random.Philox(key=[0, 0])
    gen = np.random.Generator(bits)
    state = bits.state
    z = np.empty((len(seeds), n_taps, 2))
    for i, s in enumerate(seeds):
        if s < 0:
            raise ValueError(f"seed must be non-negative, got {s}")
        state["state"]["key"][:] = (int(s), 0)
        state["state"]["counter"][:] = 0
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        bits.state = state
        z[i] = gen.standard_normal((n_taps, 2))
    taps = np.sqrt(powers / 2.0) * (z[..., 0] + 1j * z[..., 1])
    return np.abs(taps.sum(axis=-1))


def rayleigh_ks(envelopes: np.ndarray, mean_gain: float = 1.0):
    """Kolmogorov-Smirnov statistic and p-value against a Rayleigh law of power ``mean_gain``."""
    from scipy import stats

    return stats.kstest(envelopes, stats.rayleigh(scale=math.sqrt(mean_gain / 2.0)).cdf)
