import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trmode.apps import Application
from trmode.modes import UeMode
from trmode.power import (ApplicationClass, FramePlan, PowerSplit, ThroughputMode, check_frame,
                          default_applications, energy_efficiency, optimum_power, power_saved, shannon_rate,
                          split_power, throughput, total_power)

A1, A2, A3 = Application.A1, Application.A2, Application.A3


@pytest.mark.parametrize("alpha,expected", [(0.0, (2.0, 0.0)), (1.0, (0.0, 4.0)), (0.5, (1.0, 2.0))])
def test_split_power_examples(alpha, expected):
    assert split_power(PowerSplit(alpha, 2.0, 6.0), 1.0) == pytest.approx(expected)


@pytest.mark.parametrize("split", [PowerSplit(-0.1, 1, 2), PowerSplit(1.1, 1, 2), PowerSplit(0.5, 3, 2),
                                   PowerSplit(0.5, 1, 2, gamma=0.0)])
def test_split_power_rejects(split):
    with pytest.raises(ValueError):
        split_power(split, 1.0)


def test_power_split_uplink_portion():
    assert PowerSplit(0.3, 2.0, 6.0).p_ul == 4.0


def test_check_frame_examples():
    assert check_frame(FramePlan(3, 2, 1.0, 1.0)).ok
    boundary = FramePlan(2, 2, 1.0, 1.0, [[0.5, 0.5], [0.0, 0.0]])
    assert check_frame(boundary).ok
    over = check_frame(FramePlan(2, 2, 10.0, 1.0, [[1.0, 0.5], [0.5, 0.5]]))
    assert over.slot_ok and not over.frame_ok
    assert over.frame_total == 2.5


def test_check_frame_reports_slot():
    rep = check_frame(FramePlan(3, 2, 1.0, 10.0, [[0.2, 0.2], [0.9, 0.2], [0.0, 0.0]]))
    assert not rep.slot_ok and rep.violating_slot == 1
    neg = check_frame(FramePlan(1, 2, 1.0, 1.0, [[-0.1, 0.2]]))
    assert not neg.nonnegative and not neg.ok


def test_frame_plan_shape_checked():
    with pytest.raises(ValueError):
        FramePlan(2, 2, 1.0, 1.0, [[1.0, 0.0]])


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(-1e-9, 1e-9))
def test_check_frame_straddling_boundary(m, k, seed, nudge):
    rng = np.random.default_rng(seed)
    alloc = rng.uniform(0.0, 1.0, (m, k))
    p_max = float(alloc.sum(axis=1).max()) + nudge
    p_avg = float(alloc.sum()) / m + nudge
    rep = check_frame(FramePlan(m, k, p_max, p_avg, alloc))
    # oracle: direct evaluation of both inequalities
    assert rep.slot_ok == bool(np.all(alloc.sum(axis=1) <= p_max))
    assert rep.frame_ok == bool(alloc.sum() <= m * p_avg)


def test_throughput_examples():
    assert throughput(ThroughputMode.DL_AM, [0.0], 1.0) == 0.0
    assert throughput("DL-AM", [1.0], 1.0) == pytest.approx(1.0)
    assert throughput(ThroughputMode.TR, [3.0, 3.0], 1.0) == pytest.approx(4.0)
    assert throughput(ThroughputMode.UL_AM, [1.5], 1.0, gains=[2.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        throughput(ThroughputMode.UL_AM, [1.0], 1.0)
    with pytest.raises(ValueError):
        throughput(ThroughputMode.DL_AM, [1.0], 0.0)


def test_optimum_power_examples():
    assert optimum_power(ApplicationClass(A1, 5e6, 5e6), 2.0, 1e-3) == pytest.approx(1e-3 / 2.0)
    assert optimum_power(ApplicationClass(A1, 0.0, 5e6), 2.0, 1e-3) == 0.0
    with pytest.raises(ValueError):
        optimum_power(ApplicationClass(A1, 1e3, 5e6), 0.0, 1e-3)


def test_shannon_round_trip_randomized():
    rng = np.random.default_rng(2024)
    n = 10_000
    rate = 10 ** rng.uniform(2, 8, n)
    bw = 10 ** rng.uniform(5, 8, n)
    h = 10 ** rng.uniform(-16, 0, n)
    noise = 10 ** rng.uniform(-15, -9, n)
    worst = 0.0
    for r, b, g, s in zip(rate, bw, h, noise):
        p = optimum_power(ApplicationClass(A1, r, b), g, s)
        # oracle: forward Shannon formula written out independently
        back = b * math.log2(1.0 + p * g / s)
        worst = max(worst, abs(back - r) / r)
    assert worst <= 1e-9


def test_optimum_power_vectorized_matches_scalar():
    app = ApplicationClass(A3, 2e6, 5e6)
    h = np.array([1e-12, 3e-11, 7e-10])
    np.testing.assert_allclose(optimum_power(app, h, 1e-13), [optimum_power(app, x, 1e-13) for x in h])
    np.testing.assert_allclose(shannon_rate(optimum_power(app, h, 1e-13), h, 1e-13, 5e6), 2e6, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0, 1e7), st.floats(1.0, 1e7), st.floats(1e-14, 1e-6), st.floats(1e-14, 1e-6))
def test_optimum_power_monotone(r1, r2, h1, h2):
    lo_r, hi_r = sorted((r1, r2))
    lo_h, hi_h = sorted((h1, h2))
    if hi_r > lo_r * (1 + 1e-9):
        assert optimum_power(ApplicationClass(A1, lo_r, 5e6), lo_h, 1e-13) < \
            optimum_power(ApplicationClass(A1, hi_r, 5e6), lo_h, 1e-13)
    if hi_h > lo_h * (1 + 1e-9):
        assert optimum_power(ApplicationClass(A1, lo_r, 5e6), hi_h, 1e-13) < \
            optimum_power(ApplicationClass(A1, lo_r, 5e6), lo_h, 1e-13)


def test_total_power_examples():
    zero = [ApplicationClass(a, 0.0) for a in (A1, A2, A3)]
    assert total_power(UeMode.ACTIVE, zero, 1e-10, 1e-13) == 0.0
    assert total_power(UeMode.TR, zero, 1e-10, 1e-13) == 0.0
    same = [ApplicationClass(a, 1e5) for a in (A1, A2, A3)]
    single = optimum_power(same[0], 1e-10, 1e-13)
    assert total_power(UeMode.ACTIVE, same, 1e-10, 1e-13) == pytest.approx(3 * single)
    assert total_power(UeMode.TR, same, 1e-10, 1e-13) == pytest.approx(2 * single)
    with pytest.raises(ValueError):
        total_power(UeMode.ACTIVE, [], 1e-10, 1e-13)
    assert total_power(UeMode.FLIGHT, same, 1e-10, 1e-13) == 0.0


def test_default_tr_to_am_power_ratio():
    apps = default_applications().values()
    ratio = total_power(UeMode.TR, apps, 1e-11, 1e-13) / total_power(UeMode.ACTIVE, apps, 1e-11, 1e-13)
    # oracle: term-by-term hand summation of 2^(R/B) - 1, the noise/gain factor cancels
    k1 = 2.0 ** (10e3 / 5e6) - 1.0
    k2 = 2.0 ** (64e3 / 5e6) - 1.0
    k3 = 2.0 ** (2e6 / 5e6) - 1.0
    assert ratio == pytest.approx((k1 + k2) / (k1 + k2 + k3), rel=1e-9)
    assert ratio == pytest.approx(0.0312274067, rel=1e-8)


def test_default_applications_ordering():
    apps = default_applications()
    assert apps[A1].target_rate < apps[A2].target_rate < apps[A3].target_rate
    with pytest.raises(ValueError):
        default_applications({A1: 1e6, A2: 1e5})


def test_power_saved_examples():
    assert power_saved(3.0, 3.0) == 0.0
    apps = list(default_applications().values())
    h = 2e-11
    saving = power_saved(total_power(UeMode.ACTIVE, apps, h, 1e-13), total_power(UeMode.TR, apps, h, 1e-13))
    assert saving == pytest.approx(optimum_power(apps[2], h, 1e-13), rel=1e-12)


def test_power_saved_thirty_twenty_split():
    rng = np.random.default_rng(5)
    apps = list(default_applications().values())
    h = 10 ** rng.uniform(-13, -9, 50)
    am = sum(total_power(UeMode.ACTIVE, apps, g, 1e-13) for g in h)
    mixed = (sum(total_power(UeMode.ACTIVE, apps, g, 1e-13) for g in h[:30])
             + sum(total_power(UeMode.TR, apps, g, 1e-13) for g in h[30:]))
    assert power_saved(am, mixed) > 0


def test_energy_efficiency_examples():
    assert energy_efficiency(0.0, [1.0]) == 0.0
    assert energy_efficiency(1e6, [0.4, 0.5], 0.1) == pytest.approx(1e6)
    assert energy_efficiency(1e6, [], 0.1) == pytest.approx(1e7)
    with pytest.raises(ValueError):
        energy_efficiency(1.0, [1.0], 0.0)
    apps = list(default_applications().values())
    rate = apps[0].target_rate + apps[1].target_rate
    h = 1e-11
    ee_tr = energy_efficiency(rate, [total_power(UeMode.TR, apps, h, 1e-13)])
    ee_am = energy_efficiency(rate, [total_power(UeMode.ACTIVE, apps, h, 1e-13)])
    assert ee_tr >= ee_am


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 1e7), min_size=3, max_size=3), st.floats(1e-15, 1e-3), st.floats(1e-15, 1e-9))
def test_tr_never_needs_more_power(rates, h, noise):
    apps = [ApplicationClass(a, r) for a, r in zip((A1, A2, A3), rates)]
    tr = total_power(UeMode.TR, apps, h, noise)
    am = total_power(UeMode.ACTIVE, apps, h, noise)
    assert 0.0 <= tr <= am
