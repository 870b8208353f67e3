"""Recover beam position and shape from a scan series.

The pipeline: estimate fully-blocked/fully-open count levels from the
series extrema, rescale counts into transmissivity units, locate the scan
offset by exhaustive template matching against every feasible profile
window, then solve a non-negative least-squares problem for the beam
shape at that offset, optionally alternating the two steps.

Normalized counts express the fully-open level as 1, so the implied beam
shape integrates (sums) to 1; ``recover`` rescales its search template
accordingly and returns the shape in those unit-sum units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aperture import TransmissivityProfile
from .forward import ScanSeries, Signal, build_coding_matrix
from .nnls import nnls


class FlatSeriesError(ValueError):
    """Series carries no usable modulation (open level <= blocked level)."""


@dataclass(frozen=True)
class NormalizationEstimate:
    """Estimated mean counts at fully-blocked (mu0) and fully-open (mu1) bits."""

    mu0: float
    mu1: float


@dataclass(frozen=True)
class RecoverOptions:
    """Knobs for ``recover``: alternation budget and search restriction."""

    max_rounds: int = 3
    search_range: tuple[int, int] | None = None  # half-open [lo, hi) offsets
    nnls_tol: float = 1e-10


@dataclass(frozen=True)
class RecoveryResult:
    position: int
    signal: np.ndarray
    residual: float
    rounds: int


def estimate_levels(series: ScanSeries, mode: str = "corrected") -> NormalizationEstimate:
    """Blocked/open count levels from the series extrema.

    ``corrected`` de-biases Poisson extremes (the minimum of many draws
    undershoots its mean by about two standard deviations, the maximum
    overshoots): mu0 = d_min + 2*sqrt(d_min), mu1 = d_max - 2*sqrt(d_max).
    ``minmax`` uses the plain extrema, appropriate for noiseless series.
    """
    if mode not in ("corrected", "minmax"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    d_min = float(series.raw.min())
    d_max = float(series.raw.max())
    if mode == "corrected":
        return NormalizationEstimate(
            mu0=d_min + 2.0 * math.sqrt(d_min), mu1=d_max - 2.0 * math.sqrt(d_max)
        )
    return NormalizationEstimate(mu0=d_min, mu1=d_max)


def normalize(series: ScanSeries, mode: str = "corrected") -> ScanSeries:
    """Series with the normalized view (d - mu0)/(mu1 - mu0) populated."""
    if len(series) < 2:
        raise ValueError("need at least 2 scan points to normalize")
    levels = estimate_levels(series, mode)
    if not levels.mu1 > levels.mu0:
        raise FlatSeriesError(
            f"no modulation: open level {levels.mu1:g} <= blocked level {levels.mu0:g}"
        )
    normalized = (series.raw - levels.mu0) / (levels.mu1 - levels.mu0)
    return ScanSeries(series.raw, series.step_um, normalized=normalized)


def _require_normalized(series: ScanSeries) -> np.ndarray:
    if series.normalized is None:
        raise ValueError("series is not normalized; call normalize() first")
    return series.normalized


def search_position(
    profile: TransmissivityProfile,
    series: ScanSeries,
    template: Signal,
    search_range: tuple[int, int] | None = None,
) -> int:
    """Offset minimizing ||A_p * template - d'||^2 over all feasible p.

    Evaluated for every offset at once through sliding correlations (the
    residual at p needs only the window sums r[p+m] = sum_n a[p+m+n] t_n),
    so the exhaustive search is O(L*M) rather than O(L*M*N). Ties break
    toward the smallest offset.
    """
    d = _require_normalized(series)
    a = profile.values
    t = np.asarray(template.values, dtype=float)
    m, n = d.size, t.size
    last = a.size - m - n + 1  # largest feasible offset
    if last < 0:
        raise ValueError(
            f"profile of length {a.size} cannot host a scan of {m} points "
            f"with an {n}-cell signal"
        )
    lo, hi = (0, last + 1) if search_range is None else map(int, search_range)
    if not (0 <= lo < hi <= last + 1):
        raise ValueError(f"empty or out-of-bounds search range [{lo}, {hi})")

    window_dots = np.correlate(a, t, mode="valid")  # r[j] = sum_n a[j+n] t_n
    cum = np.concatenate([[0.0], np.cumsum(window_dots**2)])
    sliding_sq = cum[m:] - cum[:-m]  # sum_m r[p+m]^2 for each p
    cross = np.correlate(window_dots, d, mode="valid")  # sum_m r[p+m] d_m
    objective = sliding_sq - 2.0 * cross + float(d @ d)
    return lo + int(np.argmin(objective[lo:hi]))


def solve_signal(
    profile: TransmissivityProfile,
    series: ScanSeries,
    p: int,
    n_signal: int,
    tol: float = 1e-10,
) -> np.ndarray:
    """Non-negative beam shape at offset p: argmin_{s>=0} ||A_p s - d'||^2."""
    d = _require_normalized(series)
    matrix = build_coding_matrix(profile, p, d.size, n_signal)
    return nnls(matrix.values, d, tol=tol)


def recover(
    profile: TransmissivityProfile,
    series: ScanSeries,
    template: Signal,
    options: RecoverOptions = RecoverOptions(),
) -> RecoveryResult:
    """Alternate position search and shape solve until the position settles.

    Round 1 searches with the supplied template (rescaled to unit sum to
    match normalized-count units) and solves for the shape there; further
    rounds re-search with the recovered shape as the template and re-solve,
    stopping as soon as the position repeats or ``max_rounds`` is reached.
    The residual never increases between rounds: each half-step minimizes
    the same objective in one block of variables.
    """
    if options.max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    d = _require_normalized(series)
    n = len(template)
    probe = template.unit_sum()

    position = search_position(profile, series, probe, options.search_range)
    signal = solve_signal(profile, series, position, n, options.nnls_tol)
    rounds = 1
    while rounds < options.max_rounds and signal.sum() > 0.0:
        again = search_position(
            profile, series, Signal(signal, template.grid_step_um), options.search_range
        )
        if again == position:
            break
        position = again
        signal = solve_signal(profile, series, position, n, options.nnls_tol)
        rounds += 1

    matrix = build_coding_matrix(profile, position, d.size, n)
    residual = float(np.sum((matrix.values @ signal - d) ** 2))
    return RecoveryResult(position=position, signal=signal, residual=residual, rounds=rounds)
