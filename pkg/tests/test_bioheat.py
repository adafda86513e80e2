import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trmode.bioheat import (SolverConfig, StabilityError, TemperatureField, TissueGrid, apply_boundary,
                            field_slice_rows, fourier_amplification, iterate, mode_sweep, n_steps,
                            radiation_pattern, solve, source_grid, stability_limit, steady_state, step, summarize,
                            warm_sensation)

INSULATED = dict(boundary_h=0.0)


def _unit_grid(dims=(4, 4, 4), **kw):
    base = dict(spacing=1.0, density=2.0, heat_capacity=1.0, conductivity=1.0, perfusion=0.0)
    base.update(kw)
    return TissueGrid.uniform(dims, **base)


def test_grid_validation():
    with pytest.raises(ValueError):
        TissueGrid.uniform((1, 4, 4))
    with pytest.raises(ValueError):
        TissueGrid.uniform((4, 4, 4), conductivity=0.0)
    with pytest.raises(ValueError):
        TissueGrid.uniform((4, 4, 4), perfusion=-1.0)
    with pytest.raises(ValueError):
        TissueGrid.uniform((4, 4, 4), spacing=0.0)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0.0)
    with pytest.raises(ValueError):
        SolverConfig(boundary="dirichlet")
    with pytest.raises(ValueError):
        n_steps(SolverConfig(dt=0.03, total_time=0.1))
    assert n_steps(SolverConfig(dt=0.01, total_time=60.0)) == 6000


def test_stability_limit_examples():
    assert stability_limit(_unit_grid()) == pytest.approx(1 / 3, rel=1e-15)
    limits = [stability_limit(_unit_grid(perfusion=b)) for b in (0.0, 1e2, 1e4, 1e8)]
    assert all(a > b for a, b in zip(limits, limits[1:]))
    assert limits[-1] < 1e-7


def test_stability_limit_heterogeneous_is_cellwise_minimum():
    rng = np.random.default_rng(8)
    dims = (3, 4, 5)
    grid = TissueGrid(dims, 1e-4, rng.uniform(900, 1200, dims), rng.uniform(3000, 4000, dims),
                      rng.uniform(0.2, 0.6, dims), rng.uniform(0, 2e4, dims), 0.0)
    # oracle: evaluate the bound one cell at a time with plain floats
    best = float("inf")
    d = grid.spacing
    for idx in itertools.product(*(range(n) for n in dims)):
        rho, c, k, b = (float(a[idx]) for a in (grid.density, grid.heat_capacity, grid.conductivity, grid.perfusion))
        best = min(best, 2 * rho * c * d * d / (12 * k + b * d * d))
    assert stability_limit(grid) == pytest.approx(best, rel=1e-14)


def test_step_examples():
    grid = _unit_grid()
    cfg = SolverConfig(dt=0.3, **INSULATED)
    flat = TemperatureField(np.full(grid.dims, 2.5))
    out = step(flat, grid, cfg)
    np.testing.assert_array_equal(out.u, flat.u)
    assert out.iteration == 1
    heated = grid.with_sar(4.0)
    out = step(TemperatureField.zeros(heated), heated, cfg)
    np.testing.assert_allclose(out.u, 0.3 * 4.0 / 1.0, rtol=1e-15)


def test_step_rejects_unstable_dt():
    grid = _unit_grid()
    with pytest.raises(StabilityError):
        step(TemperatureField.zeros(grid), grid, SolverConfig(dt=0.34))
    step(TemperatureField.zeros(grid), grid, SolverConfig(dt=0.34, unstable_ok=True))


def test_single_hot_cell_conserved_each_step():
    grid = TissueGrid.uniform((6, 6, 6), perfusion=0.0)
    cfg = SolverConfig(dt=0.9 * stability_limit(grid), **INSULATED)
    u = np.zeros(grid.dims)
    u[2, 3, 1] = 1.0
    field = TemperatureField(u)
    energy = lambda f: float(np.sum(grid.density * grid.heat_capacity * f.u) * grid.spacing ** 3)
    e0 = energy(field)
    for _ in range(20):
        nxt = step(field, grid, cfg)
        assert energy(nxt) == pytest.approx(energy(field), rel=1e-10)
        field = nxt
    assert energy(field) == pytest.approx(e0, rel=1e-10)


def test_conservation_heterogeneous_heat_capacity():
    rng = np.random.default_rng(4)
    dims = (5, 6, 7)
    grid = TissueGrid(dims, 1e-4, rng.uniform(900, 1200, dims), rng.uniform(3000, 4000, dims), 0.37, 0.0, 0.0)
    cfg = SolverConfig(dt=stability_limit(grid), **INSULATED)
    u0 = TemperatureField(rng.uniform(0, 1, dims))
    energy = lambda f: float(np.sum(grid.density * grid.heat_capacity * f.u) * grid.spacing ** 3)
    out = iterate(u0, grid, cfg, 1000)
    assert energy(out) == pytest.approx(energy(u0), rel=1e-9)


def test_apply_boundary_insulated_mirror():
    grid = _unit_grid()
    u = np.random.default_rng(0).standard_normal(grid.dims)
    p = apply_boundary(TemperatureField(u), grid, SolverConfig(dt=0.1, **INSULATED))
    assert p.shape == (6, 6, 6)
    np.testing.assert_array_equal(p[0, 1:-1, 1:-1], u[0])
    np.testing.assert_array_equal(p[1:-1, 1:-1, -1], u[:, :, -1])


def test_apply_boundary_equilibrium_at_ambient():
    grid = TissueGrid.uniform((4, 4, 4))
    cfg = SolverConfig(dt=0.01, boundary_h=50.0, ambient_temp=300.0, blood_temp=310.0)
    u = np.full(grid.dims, -10.0)  # T equals ambient everywhere
    p = apply_boundary(TemperatureField(u), grid, cfg)
    np.testing.assert_allclose(p[1:-1, 1:-1, 0], -10.0, rtol=1e-14)
    out = step(TemperatureField(u), grid.with_sar(0.0), SolverConfig(dt=0.01, boundary_h=50.0, ambient_temp=300.0,
                                                                      blood_temp=310.0))
    # only perfusion acts: u' = (1 - dt b / rho C) u
    decay = 1 - 0.01 * grid.perfusion[0, 0, 0] / (grid.density[0, 0, 0] * grid.heat_capacity[0, 0, 0])
    np.testing.assert_allclose(out.u, -10.0 * decay, rtol=1e-12)


def test_apply_boundary_satisfies_robin_relation():
    grid = TissueGrid.uniform((4, 5, 6))
    cfg = SolverConfig(dt=0.01, boundary_h=40.0, ambient_temp=300.0, blood_temp=310.0)
    u = np.random.default_rng(2).uniform(0, 2, grid.dims)
    p = apply_boundary(TemperatureField(u), grid, cfg)
    k, d, h = 0.37, grid.spacing, 40.0
    ghost, inner = p[0, 1:-1, 1:-1], u[0]
    # outward flux through the face midpoint equals h times the face excess over ambient
    lhs = -k * (ghost - inner) / d
    rhs = h * ((ghost + inner) / 2 + 310.0 - 300.0)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_strong_convection_cools_boundary_monotonically():
    grid = TissueGrid.uniform((6, 6, 6), perfusion=0.0)
    cfg = SolverConfig(dt=stability_limit(grid) * 0.5, boundary_h=1e4)
    field = TemperatureField(np.ones(grid.dims))  # T above ambient (ambient = blood here)
    face = field.u[0].copy()
    for _ in range(50):
        field = step(field, grid, cfg)
        assert np.all(field.u[0] < face)
        face = field.u[0].copy()


def test_solve_zero_power_relaxes_to_zero():
    grid = TissueGrid.uniform((4, 4, 4))
    cfg = SolverConfig(dt=0.01, total_time=1.0)
    out = solve(grid, cfg, 0.0, 0.01)
    assert np.max(np.abs(out.u)) <= 1e-6
    warm = TemperatureField(np.full(grid.dims, 0.5))
    fast = TissueGrid.uniform((4, 4, 4), perfusion=1e6)
    relaxed = solve(fast, SolverConfig(dt=0.01, total_time=60.0), 0.0, 0.01, initial=warm)
    assert np.max(np.abs(relaxed.u)) <= 1e-6


def test_half_power_gives_half_steady_elevation():
    grid = TissueGrid.uniform((4, 4, 4), perfusion=1e6)
    cfg = SolverConfig(dt=0.01)
    am = steady_state(grid, cfg, 0.5, 0.01)
    tr = steady_state(grid, cfg, 0.25, 0.01)
    assert tr.u.max() / am.u.max() == pytest.approx(0.5, rel=1e-6)


def test_tr_peak_below_am_peak():
    grid = TissueGrid.uniform((3, 3, 8))
    cfg = SolverConfig(dt=0.01, total_time=2.0)
    pattern = np.exp(-np.arange(8) / 3.0)[None, None, :]
    am = solve(grid, cfg, 0.5, 0.01, pattern=pattern)
    tr = solve(grid, cfg, 0.41, 0.01, pattern=pattern)
    assert tr.u.max() < am.u.max()


def test_warm_sensation_flag():
    assert warm_sensation(TemperatureField(np.full((2, 2, 2), 0.1)))
    assert not warm_sensation(TemperatureField(np.full((2, 2, 2), 0.09)))
    grid = TissueGrid.uniform((2, 2, 2))
    cfg = SolverConfig(dt=0.01, total_time=1.0)
    # 0.1 K in one second needs SAR ~ C * 0.1 = 339 W/kg; 5 W into 10 g gives 500 W/kg
    hot = solve(grid, cfg, 5.0, 0.01)
    s = summarize(hot, "AM", 5.0, cfg)
    assert s.warm_sensation and s.peak_temperature == pytest.approx(s.peak_elevation + cfg.blood_temp)
    assert not summarize(solve(grid, cfg, 0.5, 0.01), "TR", 0.5, cfg).warm_sensation


def test_source_grid():
    grid = TissueGrid.uniform((2, 2, 4))
    g = source_grid(grid, 0.5, 0.01)
    np.testing.assert_allclose(g.sar, 50.0)
    shaped = source_grid(grid, 0.5, 0.01, [1.0, 2.0, 3.0, 2.0])
    assert shaped.sar.mean() == pytest.approx(50.0)
    with pytest.raises(ValueError):
        source_grid(grid, 0.5, 0.0)


def _mode_field(dims, mode):
    idx = np.indices(dims)
    phase = sum(2 * np.pi * m * i / n for m, i, n in zip(mode, idx, dims))
    return np.cos(phase)


@pytest.mark.parametrize("mode", [(0, 0, 0), (1, 0, 0), (1, 2, 3), (4, 4, 4), (3, 1, 4)])
def test_fourier_oracle_matches_step(mode):
    grid = TissueGrid.uniform((8, 8, 8))
    cfg = SolverConfig(dt=0.8 * stability_limit(grid), boundary="periodic")
    w = fourier_amplification(mode, grid, cfg)
    field = TemperatureField(_mode_field(grid.dims, mode))
    for _ in range(5):
        nxt = step(field, grid, cfg)
        scale = np.max(np.abs(field.u))
        np.testing.assert_allclose(nxt.u, w * field.u, rtol=0, atol=1e-10 * scale)
        field = nxt


def test_fourier_examples():
    grid = TissueGrid.uniform((8, 8, 8), perfusion=0.0)
    assert fourier_amplification((0, 0, 0), grid, SolverConfig(dt=0.01)) == 1.0
    limit = stability_limit(grid)
    at_limit = mode_sweep(grid, SolverConfig(dt=limit))
    assert at_limit.min() >= -1 - 1e-12 and at_limit.max() <= 1
    assert fourier_amplification((4, 4, 4), grid, SolverConfig(dt=limit)) == pytest.approx(-1.0, abs=1e-12)
    over = mode_sweep(grid, SolverConfig(dt=1.5 * limit, unstable_ok=True))
    assert np.abs(over).max() > 1
    sweep = mode_sweep(grid, SolverConfig(dt=0.7 * limit))
    for mode in [(0, 1, 2), (5, 3, 7), (4, 0, 4)]:
        assert sweep[mode] == pytest.approx(fourier_amplification(mode, grid, SolverConfig(dt=0.7 * limit)))


def test_fourier_rejects_heterogeneous():
    dims = (4, 4, 4)
    grid = TissueGrid(dims, 1e-4, np.linspace(1000, 1100, 64).reshape(dims), 3391.0, 0.37, 0.0, 0.0)
    with pytest.raises(ValueError):
        fourier_amplification((1, 0, 0), grid, SolverConfig())
    with pytest.raises(ValueError):
        mode_sweep(grid, SolverConfig())


def test_stability_dichotomy():
    grid = TissueGrid.uniform((8, 8, 8), perfusion=0.0)
    limit = stability_limit(grid)
    u0 = TemperatureField(np.random.default_rng(5).standard_normal(grid.dims))
    m0 = np.abs(u0.u).max()

    peaks = []
    iterate(u0, grid, SolverConfig(dt=limit, boundary="periodic"), 10_000,
            callback=lambda f: peaks.append(np.abs(f.u).max()))
    assert peaks[0] <= m0 * (1 + 1e-12)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(peaks, peaks[1:]))

    def stop(f):
        return bool(np.abs(f.u).max() <= 1e3 * m0)

    out = iterate(u0, grid, SolverConfig(dt=1.1 * limit, boundary="periodic", unstable_ok=True), 10_000, stop)
    assert np.abs(out.u).max() > 1e3 * m0
    assert out.iteration < 10_000


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.sampled_from(["convective", "periodic"]))
def test_linearity_in_source(seed, scale, boundary):
    rng = np.random.default_rng(seed)
    grid = TissueGrid.uniform((4, 5, 6))
    cfg = SolverConfig(dt=0.01, boundary=boundary, boundary_h=25.0)
    s1, s2 = rng.uniform(0, 100, grid.dims), rng.uniform(0, 100, grid.dims)
    run = lambda sar: iterate(TemperatureField.zeros(grid), grid.with_sar(sar), cfg, 30).u
    a, b, ab = run(s1), run(s2), run(s1 + s2)
    np.testing.assert_allclose(ab, a + b, rtol=1e-9, atol=1e-15)
    if scale > 0:
        np.testing.assert_allclose(run(scale * s1), scale * a, rtol=1e-9, atol=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2e4), st.floats(0.1, 1.0))
def test_maximum_principle(seed, perfusion, frac):
    rng = np.random.default_rng(seed)
    grid = TissueGrid.uniform((5, 5, 5), perfusion=perfusion)
    cfg = SolverConfig(dt=frac * stability_limit(grid), **INSULATED)
    field = TemperatureField(rng.uniform(-1, 1, grid.dims))
    hi, lo = field.u.max(), field.u.min()
    for _ in range(50):
        field = step(field, grid, cfg)
        assert field.u.max() <= hi * (1 + 1e-12) + 1e-15
        assert field.u.min() >= lo * (1 + 1e-12) - 1e-15
        hi, lo = field.u.max(), field.u.min()


def test_field_slice_rows_and_pattern():
    u = np.arange(24, dtype=float).reshape(2, 3, 4)
    rows = list(field_slice_rows(TemperatureField(u)))
    assert len(rows) == 8 and all(r[1] == 1 for r in rows)
    assert rows[0] == (0, 1, 0, u[0, 1, 0])
    pat = radiation_pattern(0.2, 0.1)
    assert len(pat) == 37 * 19
    assert max(r[2] for r in pat) == pytest.approx(0.2)
    assert all(r[3] <= r[2] for r in pat)
