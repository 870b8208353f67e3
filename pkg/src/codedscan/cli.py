"""Command-line front end: sweeps, series recovery, pattern export, simulation."""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .aperture import build_profile
from .codes import all_window_stats, generate_de_bruijn
from .config import ConfigError, load_config
from .forward import ScanSeries, build_coding_matrix, make_boxcar_signal, make_gaussian_signal, simulate
from .metrics import patterning_correlations, scan_point_count
from .nnls import NumericalFailureError
from .recovery import FlatSeriesError, RecoverOptions, normalize, recover
from .reporting import (
    RecoveryRow,
    SeriesFormatError,
    read_pixel_series,
    series_csv_text,
    write_recovery_csv,
    write_series_csv,
    write_sweep_csv,
    write_sweep_svgs,
)

QUICK_REPLICATES = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedscan",
        description="Coded-aperture scan simulation and recovery experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run the configured sensitivity sweep")
    sweep.add_argument("--config", required=True, help="experiment file (INI)")
    sweep.add_argument("--out", help="result CSV path (default from config)")
    sweep.add_argument("--workers", type=int, default=1, help="parallel cell workers")
    sweep.add_argument("--seed", type=int, help="override the configured seed")
    sweep.add_argument(
        "--quick", action="store_true",
        help=f"run {QUICK_REPLICATES} replicates instead of the configured count",
    )
    sweep.add_argument("--noiseless", action="store_true", help="exact intensities, no noise")
    sweep.add_argument("--svg", action="store_true", help="emit one SVG plot per noise level")
    sweep.set_defaults(func=run_sweep_command)

    rec = sub.add_parser("recover", help="recover positions/shapes from a scan-series file")
    rec.add_argument("series", help="scan-series CSV (pixel_id, scan_index, position_um, counts)")
    rec.add_argument("--config", required=True)
    rec.add_argument("--out", help="recovery CSV path (default from config)")
    rec.add_argument("--workers", type=int, default=1, help="parallel pixel workers")
    rec.add_argument(
        "--truncate-bits", type=float, dest="truncate_bits",
        help="re-run on only the first TRUNCATE_BITS bits of each series",
    )
    rec.set_defaults(func=run_recover_command)

    pat = sub.add_parser("pattern", help="print the aperture pattern and window stats")
    pat.add_argument("order", nargs="?", type=int, help="pattern order (default from config)")
    pat.add_argument("--config", help="experiment file for geometry metadata")
    pat.set_defaults(func=run_pattern_command)

    sim = sub.add_parser("simulate", help="forward-simulate one scan series")
    sim.add_argument("window", nargs="?", type=int, default=0,
                     help="subsequence start index to park the signal at")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", help="write scan-series CSV here instead of stdout")
    sim.add_argument("--seed", type=int, help="override the configured seed")
    sim.add_argument("--noiseless", action="store_true")
    sim.set_defaults(func=run_simulate_command)
    return parser


def _noise_text(level: float) -> str:
    return "inf" if math.isinf(level) else f"{level:g}"


def run_sweep_command(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg = load_config(args.config)
    sweep_cfg = cfg.sweep_config(
        noiseless=args.noiseless,
        seed=args.seed,
        replicates=QUICK_REPLICATES if args.quick else None,
    )
    result = metrics.run_sweep(sweep_cfg, workers=args.workers)
    items = list(cfg.echo_items())
    items += [
        ("effective_seed", str(sweep_cfg.seed)),
        ("effective_replicates", str(sweep_cfg.replicates)),
        ("noiseless_run", str(sweep_cfg.noiseless)),
    ]
    out = Path(args.out or cfg.out_csv or f"sweep_{sweep_cfg.kind}.csv")
    write_sweep_csv(out, result, items)
    failures = 0
    for cell in result.cells:
        c = cell.cell
        line = (
            f"{c.param_name}={c.param_value:g} [{c.energy_or_angle:g}] "
            f"noise={_noise_text(c.noise_level)}: position {cell.msp_position:.2f}% "
            f"shape {cell.msp_shape:.2f}% (k={cell.k}, se {cell.stderr:.2f})"
        )
        if cell.failures:
            line += f", {cell.failures} failed"
        print(line)
        failures += cell.failures
    if result.kind == "patterning":
        for noise, (rho_zeros, rho_flips) in patterning_correlations(result).items():
            print(
                f"noise {_noise_text(noise)}: Spearman MSP~zeros {rho_zeros:+.3f}, "
                f"MSP~flips {rho_flips:+.3f}"
            )
    if failures:
        print(f"warning: {failures} trials failed numerically and scored as misses")
    print(f"wrote {out}")
    if args.svg:
        for path in write_sweep_svgs(out.with_suffix(""), result):
            print(f"wrote {path}")
    return 0


def _recover_pixel(task) -> RecoveryRow:
    profile, probe, options, mode, pixel_id, counts, step = task
    series = ScanSeries(np.asarray(counts, dtype=float), step)
    try:
        normalized = normalize(series, mode)
        result = recover(profile, normalized, probe, options)
    except FlatSeriesError:
        return RecoveryRow(pixel_id, None, None, 0, None, "flat")
    except NumericalFailureError:
        return RecoveryRow(pixel_id, None, None, 0, None, "failed")
    return RecoveryRow(
        pixel_id, float(profile.position_of(result.position)), result.residual,
        result.rounds, result.signal, "ok",
    )


def run_recover_command(args) -> int:
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    cfg = load_config(args.config)
    series = read_pixel_series(args.series)
    pattern = generate_de_bruijn(cfg.pattern_order)
    profile = build_profile(cfg.geometry(pattern), cfg.optics(), cfg.grid_step_um, cfg.oversample)
    if cfg.template == "gaussian":
        probe = make_gaussian_signal(cfg.signal_width_um, cfg.grid_step_um)
    else:
        probe = make_boxcar_signal(cfg.signal_width_um, cfg.grid_step_um)
    options = RecoverOptions(max_rounds=cfg.max_rounds, nnls_tol=cfg.nnls_tol)
    n_keep = None
    if args.truncate_bits is not None:
        n_keep = scan_point_count(args.truncate_bits, cfg.bit_size_zero_um, cfg.grid_step_um)
    tasks = []
    max_len = 0
    for pixel_id in sorted(series):
        positions, counts = series[pixel_id]
        step = float(positions[1] - positions[0])
        if abs(step - cfg.grid_step_um) > 1e-6:
            raise ConfigError(
                f"pixel {pixel_id}: scan step {step:g} um does not match "
                f"grid_step_um {cfg.grid_step_um:g}"
            )
        if n_keep is not None:
            counts = counts[:n_keep]
            if counts.size < 2:
                raise ConfigError("--truncate-bits leaves fewer than 2 samples")
        max_len = max(max_len, counts.size)
        tasks.append((pixel_id, counts, step))
    # Open padding on both flanks: scans may start before or run past the
    # mask, and the search needs those alignments to exist.
    margin = max_len + len(probe)
    profile = profile.pad_open(margin, margin)
    work = [(profile, probe, options, cfg.normalization, pid, counts, step)
            for pid, counts, step in tasks]
    if args.workers == 1 or len(work) == 1:
        rows = [_recover_pixel(item) for item in work]
    else:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_recover_pixel, work))
    items = list(cfg.echo_items())
    if args.truncate_bits is not None:
        items.append(("truncate_bits", f"{args.truncate_bits:g}"))
    out = Path(args.out or cfg.out_csv or "recovery.csv")
    write_recovery_csv(out, rows, len(probe), items)
    for row in rows:
        if row.status == "ok":
            print(
                f"pixel {row.pixel_id}: p_hat {row.p_hat_um:.3f} um, residual "
                f"{row.residual:.3e}, rounds {row.rounds}"
            )
        else:
            print(f"pixel {row.pixel_id}: {row.status}")
    skipped = sum(1 for r in rows if r.status != "ok")
    if skipped:
        print(f"warning: {skipped} of {len(rows)} pixels not recovered")
    print(f"wrote {out}")
    return 0


def run_pattern_command(args) -> int:
    cfg = load_config(args.config) if args.config else None
    order = args.order
    if order is None:
        order = cfg.pattern_order if cfg else 8
    pattern = generate_de_bruijn(order)
    print(pattern.to_string())
    if cfg is not None:
        geometry = cfg.geometry(pattern)
        print(
            f"# order {order}: {len(pattern)} bits, {geometry.length_um:g} um long, "
            f"{geometry.thickness_um:g} um thick"
        )
    else:
        print(f"# order {order}: {len(pattern)} bits")
    print("# start zeros_fraction bit_flips")
    for stats in all_window_stats(pattern, order):
        print(f"{stats.start_index:5d} {stats.zeros_fraction:14.6f} {stats.bit_flips:9d}")
    return 0


def run_simulate_command(args) -> int:
    cfg = load_config(args.config)
    pattern = generate_de_bruijn(cfg.pattern_order)
    profile = build_profile(cfg.geometry(pattern), cfg.optics(), cfg.grid_step_um, cfg.oversample)
    signal = make_gaussian_signal(cfg.signal_width_um, cfg.grid_step_um)
    n_windows = len(pattern) - cfg.pattern_order + 1
    if not 0 <= args.window < n_windows:
        raise ConfigError(f"window must be in [0, {n_windows}), got {args.window}")
    sizes = np.where(pattern.bits == 1, cfg.bit_size_one_um, cfg.bit_size_zero_um)
    start_um = float(sizes[: args.window].sum())
    p_star = profile.index_of(start_um)
    m = scan_point_count(cfg.scan_bits, cfg.bit_size_zero_um, cfg.grid_step_um)
    n = len(signal)
    shortfall = p_star + m + n - 1 - len(profile)
    if shortfall > 0:
        profile = profile.pad_open(0, shortfall)
    matrix = build_coding_matrix(profile, p_star, m, n)
    seed = cfg.seed if args.seed is None else args.seed
    peak = cfg.noise_levels[0]
    series = simulate(matrix, signal, peak, (seed, args.window), noiseless=args.noiseless)
    positions = profile.position_of(p_star + np.arange(m))
    items = list(cfg.echo_items()) + [
        ("window_start", str(args.window)),
        ("p_star_um", f"{start_um:g}"),
        ("peak_counts", f"{peak:g}"),
        ("effective_seed", str(seed)),
        ("noiseless_run", str(args.noiseless)),
    ]
    payload = {"0": (positions, series.raw)}
    if args.out:
        write_series_csv(args.out, payload, items)
        print(f"wrote {args.out} ({m} samples, window {args.window} at {start_um:g} um)")
    else:
        sys.stdout.write(series_csv_text(payload, items))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:  # ConfigError, SeriesFormatError, validation
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
