"""Trial scoring, MSP aggregation, and the design-parameter sweep harness."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .aperture import ApertureGeometry, OpticalContext, build_profile
from .codes import generate_de_bruijn, window_stats
from .forward import (
    Signal,
    build_coding_matrix,
    make_boxcar_signal,
    make_gaussian_signal,
    simulate,
)
from .nnls import NumericalFailureError
from .recovery import FlatSeriesError, RecoverOptions, RecoveryResult, normalize, recover

SWEEP_KINDS = ("bsr", "scan_length", "aspect", "patterning")

# Absorber (Au) linear attenuation in 1/um, keyed by beam energy in keV.
DEFAULT_MU_TABLE = ((5.0, 1.373), (10.0, 0.219), (20.0, 0.152), (30.0, 0.052))

_TUPLE_FIELDS = (
    "noise_levels",
    "bsr_values",
    "scan_bits_values",
    "aspect_values",
    "angles_deg",
    "energies_kev",
)


@dataclass(frozen=True)
class SuccessCriteria:
    """Tolerances deciding whether one trial counts as a success."""

    epsilon: float = 0.02  # relative L2 bound on the recovered shape
    position_margin_bits: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.position_margin_bits < 0:
            raise ValueError("position_margin_bits must be >= 0")


@dataclass(frozen=True)
class TrialOutcome:
    """Binary success indicators for one recovery trial."""

    position_success: int
    signal_success: int
    q: tuple | None = None  # (window start, replicate) when run by a sweep

    def __post_init__(self):
        if self.position_success not in (0, 1) or self.signal_success not in (0, 1):
            raise ValueError("success indicators must be 0 or 1")


@dataclass(frozen=True)
class SweepCell:
    """One grid cell: fixed physics, one noise level, and its trial block."""

    index: int
    param_name: str
    param_value: float
    energy_or_angle: float
    noise_level: float
    mu_per_um: float
    incidence_angle_deg: float
    bit_size_um: float
    thickness_um: float
    scan_bits: float
    window_start: int | None = None  # patterning: score this subsequence only


@dataclass(frozen=True)
class CellResult:
    """Aggregated MSPs for one cell, with the composition join for patterning."""

    cell: SweepCell
    msp_position: float
    msp_shape: float
    k: int
    stderr: float
    failures: int
    zeros_fraction: float | None = None
    bit_flips: int | None = None


@dataclass(frozen=True)
class SweepResult:
    kind: str
    param_name: str
    param_values: tuple
    seed: int
    replicates: int
    cells: tuple

    def __post_init__(self):
        for c in self.cells:
            if not (0.0 <= c.msp_position <= 100.0 and 0.0 <= c.msp_shape <= 100.0):
                raise ValueError("MSP outside [0, 100]")


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to reproduce a sweep; trials derive from it alone.

    ``bsr``, ``scan_bits``, ``thickness_um``, ``incidence_angle_deg`` and
    ``energy_kev`` pin the parameters a given sweep does *not* vary; the
    ``*_values`` tuples are the axes for the sweeps that do. ``template``
    selects the solver's probe shape — the simulated truth is always the
    bounded Gaussian.
    """

    kind: str
    pattern_order: int = 8
    signal_width_um: float = 10.0
    grid_step_um: float = 1.0
    template: str = "gaussian"
    scan_bits: float = 8.0
    bsr: float = 1.0
    thickness_um: float | None = None  # None: as thick as the signal is wide
    incidence_angle_deg: float = 0.0
    energy_kev: float = 10.0
    mu_per_um: float | None = None  # overrides the table lookup when set
    mu_table: tuple = DEFAULT_MU_TABLE
    noise_levels: tuple = (10.0, 100.0)
    noiseless: bool = False
    normalization: str = "corrected"
    replicates: int = 30
    position_stride: int = 1
    seed: int = 0
    oversample: int = 16
    max_rounds: int = 3
    nnls_tol: float = 1e-10
    epsilon: float = 0.02
    position_margin_bits: float = 1.0
    bsr_values: tuple = (0.25, 0.5, 1.0, 2.0)
    scan_bits_values: tuple = (2.0, 4.0, 8.0, 16.0, 24.0)
    aspect_values: tuple = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    angles_deg: tuple = (0.0, 10.0, 20.0, 40.0)
    energies_kev: tuple = (5.0, 10.0, 20.0, 30.0)

    def __post_init__(self):
        if self.kind not in SWEEP_KINDS:
            raise ValueError(f"kind must be one of {SWEEP_KINDS}, got {self.kind!r}")
        if self.template not in ("gaussian", "boxcar"):
            raise ValueError(f"unknown template {self.template!r}")
        if self.normalization not in ("corrected", "minmax"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.position_stride < 1:
            raise ValueError("position_stride must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name in _TUPLE_FIELDS:
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        object.__setattr__(
            self, "mu_table", tuple((float(e), float(m)) for e, m in self.mu_table)
        )


def score(
    result: RecoveryResult,
    truth: tuple,
    criteria: SuccessCriteria,
    bit_size_um: float,
    grid_step_um: float,
    trial_id: tuple | None = None,
) -> TrialOutcome:
    """Grade one recovery against ground truth.

    ``truth`` is ``(p_star, s_true)`` with ``p_star`` in grid offsets and
    ``s_true`` on the recovered signal's grid, in unit-sum gauge. Shape
    success requires position success first: the relative error of a shape
    fitted at the wrong depth is not meaningful.
    """
    p_star, s_true = truth
    s_true = np.asarray(s_true, dtype=float)
    if result.signal.size != s_true.size:
        raise ValueError(
            f"signal length mismatch: recovered {result.signal.size}, true {s_true.size}"
        )
    denom = float(np.linalg.norm(s_true))
    if denom == 0.0:
        raise ValueError("true signal has zero norm")
    offset_um = abs(result.position - p_star) * grid_step_um
    position_success = int(offset_um <= criteria.position_margin_bits * bit_size_um)
    relative = float(np.linalg.norm(result.signal - s_true)) / denom
    signal_success = int(position_success == 1 and relative < criteria.epsilon)
    return TrialOutcome(position_success, signal_success, trial_id)


def msp(outcomes) -> tuple:
    """Mean Success Percentage (position, shape) over a trial collection."""
    seq = list(outcomes)
    if not seq:
        raise ValueError("msp needs at least one outcome")
    position = 100.0 * sum(o.position_success for o in seq) / len(seq)
    shape = 100.0 * sum(o.signal_success for o in seq) / len(seq)
    return position, shape


def scan_point_count(scan_bits: float, bit_size_um: float, grid_step_um: float) -> int:
    """Scan points for a travel of ``scan_bits`` bits, both endpoints sampled."""
    if scan_bits < 1:
        raise ValueError("scan length must be at least one bit")
    return int(round(scan_bits * bit_size_um / grid_step_um)) + 1


def _mu_for(config: SweepConfig, energy_kev: float) -> float:
    if config.mu_per_um is not None:
        return config.mu_per_um
    table = dict(config.mu_table)
    if energy_kev not in table:
        raise ValueError(f"no attenuation entry for {energy_kev:g} keV")
    return table[energy_kev]


def _noise_axis(config: SweepConfig) -> tuple:
    return (math.inf,) if config.noiseless else config.noise_levels


def _default_thickness(config: SweepConfig) -> float:
    return config.thickness_um if config.thickness_um is not None else config.signal_width_um


def _bsr_cells(config: SweepConfig) -> list:
    cells = []
    thickness = _default_thickness(config)
    for value in config.bsr_values:
        bit = value * config.signal_width_um
        if bit < config.grid_step_um:
            raise ValueError(f"BSR {value:g} puts the bit below the grid step")
        for energy in config.energies_kev:
            mu = _mu_for(config, energy)
            for noise in _noise_axis(config):
                cells.append(
                    SweepCell(
                        len(cells), "bsr", value, energy, noise, mu,
                        config.incidence_angle_deg, bit, thickness, config.scan_bits,
                    )
                )
    return cells


def _scan_length_cells(config: SweepConfig) -> list:
    cells = []
    bit = config.bsr * config.signal_width_um
    thickness = _default_thickness(config)
    for value in config.scan_bits_values:
        if value < 1:
            raise ValueError(f"scan length of {value:g} bits is below one bit")
        for energy in config.energies_kev:
            mu = _mu_for(config, energy)
            for noise in _noise_axis(config):
                cells.append(
                    SweepCell(
                        len(cells), "scan_bits", value, energy, noise, mu,
                        config.incidence_angle_deg, bit, thickness, value,
                    )
                )
    return cells


def _aspect_cells(config: SweepConfig) -> list:
    cells = []
    bit = config.bsr * config.signal_width_um
    mu = _mu_for(config, config.energy_kev)
    for angle in config.angles_deg:
        if not 0 <= angle < 90:
            raise ValueError(f"incidence angle {angle:g} outside [0, 90)")
    for value in config.aspect_values:
        if value <= 0:
            raise ValueError("aspect ratios must be positive")
        for angle in config.angles_deg:
            for noise in _noise_axis(config):
                cells.append(
                    SweepCell(
                        len(cells), "aspect", value, angle, noise, mu,
                        angle, bit, value * bit, config.scan_bits,
                    )
                )
    return cells


def _patterning_cells(config: SweepConfig) -> list:
    cells = []
    bit = config.bsr * config.signal_width_um
    if bit < config.grid_step_um:
        raise ValueError(f"BSR {config.bsr:g} puts the bit below the grid step")
    thickness = _default_thickness(config)
    mu = _mu_for(config, config.energy_kev)
    pattern = generate_de_bruijn(config.pattern_order)
    n_windows = len(pattern) - config.pattern_order + 1
    for start in range(0, n_windows, config.position_stride):
        for noise in _noise_axis(config):
            cells.append(
                SweepCell(
                    len(cells), "subseq_start", float(start), config.energy_kev,
                    noise, mu, config.incidence_angle_deg, bit, thickness,
                    config.scan_bits, window_start=start,
                )
            )
    return cells


def _run_cell(config: SweepConfig, cell: SweepCell) -> CellResult:
    pattern = generate_de_bruijn(config.pattern_order)
    geometry = ApertureGeometry(cell.bit_size_um, cell.bit_size_um, cell.thickness_um, pattern)
    # On the aspect axis energy_or_angle carries the angle, not an energy.
    energy_tag = config.energy_kev if cell.param_name == "aspect" else cell.energy_or_angle
    context = OpticalContext(cell.mu_per_um, cell.incidence_angle_deg, energy_tag)
    profile = build_profile(geometry, context, config.grid_step_um, config.oversample)
    truth_signal = make_gaussian_signal(config.signal_width_um, config.grid_step_um)
    if config.template == "gaussian":
        probe = truth_signal
    else:
        probe = make_boxcar_signal(config.signal_width_um, config.grid_step_um)
    s_true = truth_signal.unit_sum().values
    m = scan_point_count(cell.scan_bits, cell.bit_size_um, config.grid_step_um)
    n = len(truth_signal)
    if cell.window_start is None:
        n_windows = len(pattern) - config.pattern_order + 1
        starts = range(0, n_windows, config.position_stride)
    else:
        starts = (cell.window_start,)
    # Pad the open region past the mask so the deepest start still fits.
    p_last = profile.index_of(max(starts) * cell.bit_size_um)
    shortfall = p_last + m + n - 1 - len(profile)
    if shortfall > 0:
        profile = profile.pad_open(0, shortfall)
    criteria = SuccessCriteria(config.epsilon, config.position_margin_bits)
    options = RecoverOptions(max_rounds=config.max_rounds, nnls_tol=config.nnls_tol)
    # The +-2*sqrt(mean) level corrections assume Poisson spread; exact
    # series normalize by plain extrema.
    mode = "minmax" if math.isinf(cell.noise_level) else config.normalization
    outcomes = []
    failures = 0
    for q in starts:
        p_star = profile.index_of(q * cell.bit_size_um)
        matrix = build_coding_matrix(profile, p_star, m, n)
        for r in range(config.replicates):
            series = simulate(
                matrix, truth_signal, cell.noise_level, (config.seed, cell.index, q, r)
            )
            try:
                result = recover(profile, normalize(series, mode), probe, options)
            except (FlatSeriesError, NumericalFailureError):
                failures += 1
                outcomes.append(TrialOutcome(0, 0, (q, r)))
                continue
            outcomes.append(
                score(
                    result, (p_star, s_true), criteria,
                    cell.bit_size_um, config.grid_step_um, trial_id=(q, r),
                )
            )
    position, shape = msp(outcomes)
    k = len(outcomes)
    stats = None
    if cell.window_start is not None:
        stats = window_stats(pattern, cell.window_start, config.pattern_order)
    return CellResult(
        cell, position, shape, k, 100.0 * math.sqrt(0.25 / k), failures,
        None if stats is None else stats.zeros_fraction,
        None if stats is None else stats.bit_flips,
    )


def _run_cell_task(args) -> CellResult:
    return _run_cell(*args)


def _execute(config: SweepConfig, cells, workers: int) -> tuple:
    # Trials are keyed by (cell, window, replicate), so any execution order
    # reproduces the same numbers; merging in cell order keeps output stable.
    if workers <= 1 or len(cells) <= 1:
        return tuple(_run_cell(config, cell) for cell in cells)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return tuple(pool.map(_run_cell_task, [(config, cell) for cell in cells]))


def sweep_bsr(config: SweepConfig, workers: int = 1) -> SweepResult:
    """MSP grid over bit-to-signal ratio x energy x noise at 8-bit travel."""
    cells = _execute(config, _bsr_cells(config), workers)
    return SweepResult("bsr", "bsr", config.bsr_values, config.seed, config.replicates, cells)


def sweep_scan_length(config: SweepConfig, workers: int = 1) -> SweepResult:
    """MSP grid over scan travel (in bits) at fixed bit size."""
    cells = _execute(config, _scan_length_cells(config), workers)
    return SweepResult(
        "scan_length", "scan_bits", config.scan_bits_values,
        config.seed, config.replicates, cells,
    )


def sweep_aspect_ratio(config: SweepConfig, workers: int = 1) -> SweepResult:
    """MSP grid over thickness-to-bit ratio x incidence angle x noise."""
    cells = _execute(config, _aspect_cells(config), workers)
    return SweepResult(
        "aspect", "aspect", config.aspect_values, config.seed, config.replicates, cells
    )


def sweep_patterning(config: SweepConfig, workers: int = 1) -> SweepResult:
    """Per-subsequence MSP joined with window composition stats."""
    cells = _execute(config, _patterning_cells(config), workers)
    return SweepResult(
        "patterning", "subseq_start",
        tuple(c.cell.param_value for c in cells if c.cell.noise_level == cells[0].cell.noise_level),
        config.seed, config.replicates, cells,
    )


_SWEEPS = {
    "bsr": sweep_bsr,
    "scan_length": sweep_scan_length,
    "aspect": sweep_aspect_ratio,
    "patterning": sweep_patterning,
}


def run_sweep(config: SweepConfig, workers: int = 1) -> SweepResult:
    """Dispatch on ``config.kind``."""
    return _SWEEPS[config.kind](config, workers)


def patterning_correlations(result: SweepResult) -> dict:
    """Spearman rank correlation of per-subsequence MSP_position against
    window composition: ``{noise_level: (rho_zeros, rho_flips)}``.
    """
    if result.kind != "patterning":
        raise ValueError("correlations are defined for patterning sweeps only")
    out = {}
    for noise in sorted({c.cell.noise_level for c in result.cells}):
        rows = [c for c in result.cells if c.cell.noise_level == noise]
        if any(c.zeros_fraction is None or c.bit_flips is None for c in rows):
            raise ValueError("patterning cells are missing the composition join")
        msps = [c.msp_position for c in rows]
        rho_zeros = spearmanr(msps, [c.zeros_fraction for c in rows])[0]
        rho_flips = spearmanr(msps, [c.bit_flips for c in rows])[0]
        out[noise] = (float(rho_zeros), float(rho_flips))
    return out
