"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 constraint violations
(``run --strict``) or failed validation checks, 3 time step over the
stability limit.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from .bioheat import StabilityError, TemperatureField, TissueGrid, SolverConfig, iterate, stability_limit
from .channel import envelope_samples, load_table5, power_delay_profile, rayleigh_ks, sample_channel, table5_channel
from .config import ConfigError, load_config, parse_overrides
from .exposure import comparative_report, layer_absorption, load_table4
from .report import (csv_text, emit_outputs, exposure_profiles, profile_files, skin_for, surface_fraction,
                     temperature_rows, thermal_runs, write_files, TEMPERATURE_HEADER)
from .scenario import check_constraints, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION, EXIT_UNSTABLE = 0, 1, 2, 3


def _config(args):
    overrides = parse_overrides(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "iterations", None) is not None:
        overrides["iterations"] = args.iterations
    return load_config(args.config, overrides)


def cmd_run(args) -> int:
    config = _config(args)
    t0 = time.perf_counter()
    result = run_scenario(config, workers=args.workers)
    report = check_constraints(result.am, result.mixed)
    paths = emit_outputs(result, args.out, unstable_ok=args.unstable_ok)
    am, mixed = result.am, result.mixed
    print(f"iterations: {config.iterations}  users: {config.n_users} ({config.tr_users} in the TR band)")
    print(f"mean total power  AM {am.mean_total_power:.6g} W  mixed {mixed.mean_total_power:.6g} W")
    print(f"mean EE           AM {am.mean_ee:.6g} bit/J  mixed {mixed.mean_ee:.6g} bit/J")
    print(f"complexity        AM {int(am.complexity.sum())}  mixed {int(mixed.complexity.sum())} links")
    for c in report.checks:
        print(f"constraint {c.name}: {'holds' if c.holds else 'VIOLATED'} (min margin {c.min_margin:.6g})")
    print(f"wrote {len(paths)} files to {args.out} in {time.perf_counter() - t0:.2f} s")
    if args.strict and not report.ok:
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_exposure(args) -> int:
    config = _config(args)
    profiles = exposure_profiles(config, args.incident_am, args.incident_tr)
    absorbed, exit_pd = layer_absorption(skin_for(config), 1.0, config.frequency)
    print(f"frequency {config.frequency:g} Hz; absorbed fraction per layer: "
          + ", ".join(f"{a:.4f}" for a in absorbed) + f"; beyond: {exit_pd:.3g}")
    am, tr = profiles["AM"], profiles["TR"]
    print(f"{'depth_mm':>8}  {'pd_am':>10}  {'pd_tr':>10}  {'sar_am':>10}  {'sar_tr':>10}")
    step = max(1, len(am.depths) // 10)
    for i in range(0, len(am.depths), step):
        print(f"{am.depths[i]:8.3f}  {am.pd[i]:10.4g}  {tr.pd[i]:10.4g}  {am.sar[i]:10.4g}  {tr.sar[i]:10.4g}")
    if args.out:
        write_files(profile_files(profiles), args.out)
    return EXIT_OK


def cmd_bioheat(args) -> int:
    config = _config(args)
    runs = thermal_runs(config, args.power_am, args.power_tr, unstable_ok=args.unstable_ok)
    limit = next(iter(runs.values())).stability_limit
    print(f"dt {config.dt:g} s, stability limit {limit:.6g} s")
    for row in temperature_rows(runs):
        print(f"{row[0]}: peak elevation {row[3]:.6g} K, mean {row[4]:.6g} K, warm sensation {bool(row[6])}")
    if args.out:
        write_files({"temperature_summary.csv": csv_text(TEMPERATURE_HEADER, temperature_rows(runs))}, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    report = comparative_report(load_table4(), comparison_depth=args.depth)
    print(report.text_table())
    if args.out:
        write_files({"table4_report.csv": report.to_csv()}, args.out)
    return EXIT_OK


def cmd_channel(args) -> int:
    seeds = range(args.seed, args.seed + args.samples)
    env = envelope_samples(seeds, args.taps, 1.0)
    ks = rayleigh_ks(env, 1.0)
    verdict = "pass" if ks.pvalue > 0.01 else "fail"
    print(f"envelope KS vs Rayleigh ({args.samples} samples, {args.taps} taps): "
          f"D = {ks.statistic:.5f}, p = {ks.pvalue:.4f} ({verdict} at 0.01)")
    ch = sample_channel(args.seed, args.taps, 1.0)
    print("sampled power-delay profile (delay_s, power):")
    for d, p in power_delay_profile(ch):
        print(f"  {d:.3e}  {p:.6g}")
    print("reference channel rows (t, gain, |h|):")
    for r in load_table5():
        print(f"  {r.time_instant}  {r.gain:.4g}  {r.coefficient_magnitude:.4g}")
    print(f"reference profile total power: {sum(p for _, p in power_delay_profile(table5_channel())):.6g}")
    return EXIT_OK


def _validation_checks():
    from .apps import Application
    from .modes import DecisionConfig, UeMode, d2_decide
    from .power import ApplicationClass, optimum_power, shannon_rate

    rng = np.random.default_rng(0)
    rates = rng.uniform(1e3, 1e7, 1000)
    h = 10.0 ** rng.uniform(-14, -8, 1000)
    err = max(abs(shannon_rate(optimum_power(ApplicationClass(Application.A1, r, 5e6), g, 1e-13), g, 1e-13, 5e6)
                  - r) / r for r, g in zip(rates, h))
    yield "shannon round trip", err <= 1e-9, f"max rel error {err:.2e}"

    cfg = DecisionConfig()
    sweep = np.round(np.arange(-1200, -499) / 10.0, 1)
    ok = all((d2_decide(s, cfg) is UeMode.TR) == (s < -99.0) for s in sweep)
    yield "threshold sweep", ok, f"{sweep.size} levels"

    frac = surface_fraction(load_config())
    yield "surface absorption", frac >= 0.85, f"{frac:.4f} absorbed in epidermis+dermis"

    grid = TissueGrid.uniform((8, 8, 8), perfusion=0.0)
    limit = stability_limit(grid)
    u0 = TemperatureField(np.random.default_rng(1).standard_normal(grid.dims))
    stable = iterate(u0, grid, SolverConfig(dt=limit, boundary="periodic"), 500)
    unstable = iterate(u0, grid, SolverConfig(dt=1.1 * limit, boundary="periodic", unstable_ok=True), 500)
    m0 = np.abs(u0.u).max()
    yield "stability dichotomy", np.abs(stable.u).max() <= m0 and np.abs(unstable.u).max() > m0, \
        f"limit {limit:.4g} s"

    red = comparative_report(load_table4()).reductions["am"]
    yield "reference table", math.isclose(red, 50.0, abs_tol=0.1), f"TR vs AM PD reduction {red:.3f}%"


def cmd_validate(args) -> int:
    failed = 0
    for name, ok, detail in _validation_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trmode", description="Active vs TR mode handset exposure simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", type=Path, help="scenario file ([section] key = value)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        if seed:
            sp.add_argument("--seed", type=int)
            sp.add_argument("--iterations", type=int)

    sp = sub.add_parser("run", help="two-cell Monte Carlo scenario and all output files")
    common(sp)
    sp.add_argument("--out", type=Path, default=Path("trmode-out"))
    sp.add_argument("--strict", action="store_true", help="exit 2 if any dominance constraint fails")
    sp.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo iterations")
    sp.add_argument("--unstable-ok", action="store_true", help="allow dt above the stability limit")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("exposure", help="PD and SAR depth profiles")
    common(sp, seed=False)
    sp.add_argument("--incident-am", type=float, default=0.50, help="mW/cm^2")
    sp.add_argument("--incident-tr", type=float, default=0.41, help="mW/cm^2")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_exposure)

    sp = sub.add_parser("bioheat", help="temperature elevation and stability check")
    common(sp, seed=False)
    sp.add_argument("--power-am", type=float, default=0.50, help="W into the exposed mass")
    sp.add_argument("--power-tr", type=float, default=0.41, help="W into the exposed mass")
    sp.add_argument("--unstable-ok", action="store_true", help="run even above the stability limit")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_bioheat)

    sp = sub.add_parser("compare", help="reference PD table and TR reductions")
    sp.add_argument("--depth", type=float, default=0.4, help="comparison depth, mm")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("channel", help="envelope statistics and power-delay profiles")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--taps", type=int, default=8)
    sp.add_argument("--samples", type=int, default=20000)
    sp.set_defaults(func=cmd_channel)

    sp = sub.add_parser("validate", help="quick property smoke checks")
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
