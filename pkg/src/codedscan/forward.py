"""Forward model: scan a coded aperture across a beam and count photons.

A scan of M steps against a transmissivity profile a with offset p is the
matrix product I = A_p s, where A_p[m, n] = a[p + m + n]: every
measurement slides the aperture one grid step further across the fixed
beam footprint s. Counts are Poisson draws around I after rescaling so a
fully open aperture would read ``peak_counts``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aperture import TransmissivityProfile


@dataclass(frozen=True)
class Signal:
    """Non-negative beam footprint sampled on the scan grid."""

    values: np.ndarray
    grid_step_um: float

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("signal must be a non-empty vector")
        if values.min() < 0:
            raise ValueError("signal values are intensities and must be >= 0")
        if self.grid_step_um <= 0:
            raise ValueError("grid_step_um must be positive")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    def unit_sum(self) -> "Signal":
        """Same shape, rescaled to sum to 1 (normalized-count units)."""
        total = float(self.values.sum())
        if total <= 0:
            raise ValueError("cannot rescale an all-zero signal")
        return Signal(self.values / total, self.grid_step_um)


@dataclass(frozen=True)
class CodingMatrix:
    """Hankel-structured slice of a profile: entry (m, n) = a[p + m + n]."""

    values: np.ndarray
    offset: int
    normalized: bool = True

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=float)
        if values.ndim != 2 or values.size == 0:
            raise ValueError("coding matrix must be a non-empty 2-D array")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ScanSeries:
    """Measured counts per scan step, plus the optional normalized view."""

    raw: np.ndarray
    step_um: float
    normalized: np.ndarray | None = None

    def __post_init__(self):
        raw = np.ascontiguousarray(self.raw, dtype=float)
        if raw.ndim != 1 or raw.size == 0:
            raise ValueError("series must be a non-empty vector")
        if raw.min() < 0:
            raise ValueError("counts must be >= 0")
        if self.step_um <= 0:
            raise ValueError("step_um must be positive")
        raw.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        if self.normalized is not None:
            norm = np.ascontiguousarray(self.normalized, dtype=float)
            if norm.shape != raw.shape or not np.isfinite(norm).all():
                raise ValueError("normalized view must be finite and match raw shape")
            norm.flags.writeable = False
            object.__setattr__(self, "normalized", norm)

    def __len__(self) -> int:
        return int(self.raw.size)


def bounded_gaussian(z, width_um: float):
    """Peak-1 Gaussian with sigma = width/4, truncated to |z| <= width/2."""
    z = np.asarray(z, dtype=float)
    sigma = width_um / 4.0
    values = np.exp(-(z**2) / (2.0 * sigma**2))
    return np.where(np.abs(z) <= width_um / 2.0, values, 0.0)


def make_gaussian_signal(width_um: float, grid_step_um: float) -> Signal:
    """Bounded Gaussian footprint sampled at cell centers; N = round(width/step)."""
    if width_um < grid_step_um:
        raise ValueError("signal width must be at least one grid step")
    n = int(round(width_um / grid_step_um))
    centers = (np.arange(n) - (n - 1) / 2.0) * grid_step_um
    return Signal(bounded_gaussian(centers, width_um), grid_step_um)


def make_boxcar_signal(width_um: float, grid_step_um: float) -> Signal:
    """Flat footprint of the same support, for template-mismatch studies."""
    if width_um < grid_step_um:
        raise ValueError("signal width must be at least one grid step")
    n = int(round(width_um / grid_step_um))
    return Signal(np.ones(n), grid_step_um)


def build_coding_matrix(
    profile: TransmissivityProfile | np.ndarray, p: int, m: int, n: int
) -> CodingMatrix:
    """M x N scan matrix starting at profile index p; entry (i, j) = a[p+i+j]."""
    values = profile.values if isinstance(profile, TransmissivityProfile) else np.asarray(profile, dtype=float)
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be >= 1")
    if p < 0 or p + m + n - 1 > values.size:
        raise ValueError(
            f"scan window [p={p}, p+M+N-1={p + m + n - 1}] exceeds profile of "
            f"length {values.size}; pad the profile or shrink the scan"
        )
    windows = np.lib.stride_tricks.sliding_window_view(values, n)
    return CodingMatrix(windows[p : p + m].copy(), offset=int(p))


def trial_rng(*entropy: int) -> np.random.Generator:
    """Counter-based stream keyed by trial coordinates.

    Streams for distinct entropy tuples are independent, so trials may run
    in any order on any number of workers and still reproduce bit-for-bit.
    """
    key = np.random.SeedSequence([int(e) for e in entropy]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate(
    matrix: CodingMatrix,
    signal: Signal,
    peak_counts: float,
    seed,
    noiseless: bool = False,
) -> ScanSeries:
    """Expected intensities I = A_p s, Poisson-sampled unless noiseless.

    ``peak_counts`` sets the expected count at a fully open alignment
    (sum of the rescaled signal); ``math.inf`` skips rescaling and noise,
    returning raw intensities. ``seed`` is an int or tuple of ints keying
    the per-trial counter-based stream; an ``np.random.Generator`` is also
    accepted directly.
    """
    total = float(signal.values.sum())
    if total <= 0:
        raise ValueError("signal is identically zero: nothing to detect")
    intensity = matrix.values @ signal.values
    if math.isinf(peak_counts):
        return ScanSeries(intensity, signal.grid_step_um)
    if peak_counts <= 0:
        raise ValueError("peak_counts must be positive (or inf for raw intensities)")
    intensity = intensity * (peak_counts / total)
    if noiseless:
        return ScanSeries(intensity, signal.grid_step_um)
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = trial_rng(*(seed if isinstance(seed, (tuple, list)) else (seed,)))
    counts = rng.poisson(intensity).astype(float)
    return ScanSeries(counts, signal.grid_step_um)
