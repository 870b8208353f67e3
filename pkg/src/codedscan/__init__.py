"""Coded-aperture scan simulation and signal recovery toolkit."""

from .aperture import (
    ApertureGeometry,
    OpticalContext,
    TransmissivityProfile,
    build_profile,
    gold_path_length,
)
from .codes import Pattern, SubsequenceStats, generate_de_bruijn, verify_uniqueness, window_stats
from .forward import (
    CodingMatrix,
    ScanSeries,
    Signal,
    build_coding_matrix,
    make_boxcar_signal,
    make_gaussian_signal,
    simulate,
    trial_rng,
)
from .metrics import (
    CellResult,
    SuccessCriteria,
    SweepCell,
    SweepConfig,
    SweepResult,
    TrialOutcome,
    msp,
    patterning_correlations,
    run_sweep,
    scan_point_count,
    score,
    sweep_aspect_ratio,
    sweep_bsr,
    sweep_patterning,
    sweep_scan_length,
)
from .nnls import NumericalFailureError, nnls
from .recovery import (
    FlatSeriesError,
    NormalizationEstimate,
    RecoverOptions,
    RecoveryResult,
    normalize,
    recover,
    search_position,
    solve_signal,
)

__version__ = "0.1.0"

__all__ = [
    "ApertureGeometry",
    "CellResult",
    "CodingMatrix",
    "FlatSeriesError",
    "NormalizationEstimate",
    "NumericalFailureError",
    "OpticalContext",
    "Pattern",
    "RecoverOptions",
    "RecoveryResult",
    "ScanSeries",
    "Signal",
    "SubsequenceStats",
    "SuccessCriteria",
    "SweepCell",
    "SweepConfig",
    "SweepResult",
    "TransmissivityProfile",
    "TrialOutcome",
    "build_coding_matrix",
    "build_profile",
    "generate_de_bruijn",
    "gold_path_length",
    "make_boxcar_signal",
    "make_gaussian_signal",
    "msp",
    "nnls",
    "normalize",
    "patterning_correlations",
    "recover",
    "run_sweep",
    "scan_point_count",
    "score",
    "search_position",
    "simulate",
    "solve_signal",
    "sweep_aspect_ratio",
    "sweep_bsr",
    "sweep_patterning",
    "sweep_scan_length",
    "trial_rng",
    "verify_uniqueness",
    "window_stats",
    "__version__",
]
