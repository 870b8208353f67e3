"""Forward scan model: signals, coding matrices, Poisson counts."""

from __future__ import annotations

import math

import numpy as np
import pytest

from codedscan.aperture import TransmissivityProfile
from codedscan.forward import (
    CodingMatrix,
    ScanSeries,
    Signal,
    bounded_gaussian,
    build_coding_matrix,
    make_boxcar_signal,
    make_gaussian_signal,
    simulate,
    trial_rng,
)


def test_gaussian_signal_shape_and_symmetry():
    signal = make_gaussian_signal(10.0, 1.0)
    assert len(signal) == 10
    np.testing.assert_allclose(signal.values, signal.values[::-1])
    assert signal.values.max() <= 1.0
    # centers straddle zero for even N, so the peak sits just below 1
    assert signal.values.max() == pytest.approx(math.exp(-0.5**2 / (2 * 2.5**2)))


def test_gaussian_single_cell_limit():
    signal = make_gaussian_signal(1.0, 1.0)
    assert len(signal) == 1
    assert signal.values[0] == 1.0


def test_gaussian_edge_value_frozen():
    # formula value at the support boundary itself
    assert bounded_gaussian(5.0, 10.0) == pytest.approx(math.exp(-2.0))
    assert bounded_gaussian(5.0, 10.0) == pytest.approx(0.1353, abs=5e-5)
    assert bounded_gaussian(5.001, 10.0) == 0.0


def test_gaussian_width_below_step_rejected():
    with pytest.raises(ValueError):
        make_gaussian_signal(0.5, 1.0)


def test_boxcar_signal():
    signal = make_boxcar_signal(10.0, 2.0)
    np.testing.assert_array_equal(signal.values, np.ones(5))


def test_coding_matrix_all_ones_profile():
    profile = TransmissivityProfile(np.ones(20), 1.0)
    matrix = build_coding_matrix(profile, 3, 4, 5)
    np.testing.assert_array_equal(matrix.values, np.ones((4, 5)))
    signal = make_gaussian_signal(5.0, 1.0)
    series = simulate(matrix, signal, peak_counts=math.inf, seed=0)
    np.testing.assert_allclose(series.raw, signal.values.sum())


def test_coding_matrix_single_row_is_dot_product():
    values = np.linspace(0.0, 1.0, 12)
    profile = TransmissivityProfile(values, 1.0)
    matrix = build_coding_matrix(profile, 2, 1, 6)
    np.testing.assert_array_equal(matrix.values[0], values[2:8])


def test_coding_matrix_alternating_frozen():
    profile = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
    matrix = build_coding_matrix(profile, 0, 2, 2)
    np.testing.assert_array_equal(matrix.values, [[1.0, 0.0], [0.0, 1.0]])


def test_coding_matrix_bounds():
    profile = TransmissivityProfile(np.ones(10), 1.0)
    build_coding_matrix(profile, 0, 6, 5)  # p+M+N-1 = 10, just fits
    with pytest.raises(ValueError):
        build_coding_matrix(profile, 1, 6, 5)
    with pytest.raises(ValueError):
        build_coding_matrix(profile, -1, 2, 2)
    with pytest.raises(ValueError):
        build_coding_matrix(profile, 0, 0, 2)


def test_coding_matrix_constant_antidiagonals():
    rng = np.random.default_rng(7)
    values = rng.random(40)
    matrix = build_coding_matrix(values, 5, 8, 6)
    for i in range(8):
        for j in range(6):
            assert matrix.values[i, j] == values[5 + i + j]


def test_simulate_noiseless_scaling():
    profile = TransmissivityProfile(np.ones(30), 1.0)
    matrix = build_coding_matrix(profile, 0, 10, 10)
    signal = make_gaussian_signal(10.0, 1.0)
    series = simulate(matrix, signal, peak_counts=100.0, seed=1, noiseless=True)
    np.testing.assert_allclose(series.raw, 100.0)


def test_simulate_zero_intensity_zero_counts():
    profile = TransmissivityProfile(np.zeros(30), 1.0)
    matrix = build_coding_matrix(profile, 0, 10, 10)
    signal = make_gaussian_signal(10.0, 1.0)
    series = simulate(matrix, signal, peak_counts=100.0, seed=2)
    np.testing.assert_array_equal(series.raw, 0.0)


def test_simulate_zero_signal_rejected():
    profile = TransmissivityProfile(np.ones(30), 1.0)
    matrix = build_coding_matrix(profile, 0, 10, 10)
    with pytest.raises(ValueError):
        simulate(matrix, Signal(np.zeros(10), 1.0), peak_counts=100.0, seed=0)


def test_simulate_law_of_large_numbers():
    # 1e5 repeated draws of one scan point: constant profile means every
    # row of the matrix repeats the same measurement
    draws = 100_000
    profile = TransmissivityProfile(np.full(draws + 4, 0.6), 1.0)
    matrix = build_coding_matrix(profile, 0, draws, 4)
    signal = make_gaussian_signal(4.0, 1.0)
    mean_intensity = 0.6 * 100.0
    series = simulate(matrix, signal, peak_counts=100.0, seed=42)
    tolerance = 3.0 * math.sqrt(mean_intensity / draws)
    assert series.raw.mean() == pytest.approx(mean_intensity, abs=tolerance)


def test_simulate_linearity_noiseless():
    rng = np.random.default_rng(3)
    profile = TransmissivityProfile(rng.random(40), 1.0)
    matrix = build_coding_matrix(profile, 0, 20, 8)
    s1 = Signal(rng.random(8), 1.0)
    s2 = Signal(rng.random(8), 1.0)
    both = Signal(s1.values + s2.values, 1.0)
    d1 = simulate(matrix, s1, math.inf, 0).raw
    d2 = simulate(matrix, s2, math.inf, 0).raw
    d12 = simulate(matrix, both, math.inf, 0).raw
    np.testing.assert_allclose(d12, d1 + d2, atol=1e-12)


def test_simulate_reproducible_and_stream_independent():
    rng = np.random.default_rng(4)
    profile = TransmissivityProfile(rng.random(40), 1.0)
    matrix = build_coding_matrix(profile, 0, 20, 8)
    signal = make_gaussian_signal(8.0, 1.0)
    a = simulate(matrix, signal, 50.0, seed=(9, 1, 2)).raw
    b = simulate(matrix, signal, 50.0, seed=(9, 1, 2)).raw
    c = simulate(matrix, signal, 50.0, seed=(9, 1, 3)).raw
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("mean", [0.5, 5.0, 50.0, 500.0])
def test_poisson_sampler_statistics(mean):
    n = 100_000
    draws = trial_rng(123, int(mean * 10)).poisson(mean, n)
    se_mean = math.sqrt(mean / n)
    se_var = math.sqrt((mean + 2.0 * mean**2) / n)
    assert draws.mean() == pytest.approx(mean, abs=5 * se_mean)
    assert draws.var(ddof=1) == pytest.approx(mean, abs=5 * se_var)


def test_signal_and_series_validation():
    with pytest.raises(ValueError):
        Signal(np.array([-0.1, 0.5]), 1.0)
    with pytest.raises(ValueError):
        Signal(np.array([0.1]), 0.0)
    with pytest.raises(ValueError):
        ScanSeries(np.array([-1.0]), 1.0)
    with pytest.raises(ValueError):
        ScanSeries(np.array([1.0, 2.0]), 1.0, normalized=np.array([np.nan, 0.0]))
    with pytest.raises(ValueError):
        Signal(np.zeros(3), 1.0).unit_sum()
    unit = Signal(np.array([1.0, 3.0]), 1.0).unit_sum()
    np.testing.assert_allclose(unit.values, [0.25, 0.75])


def test_coding_matrix_immutable():
    matrix = build_coding_matrix(np.ones(10), 0, 3, 3)
    with pytest.raises(ValueError):
        matrix.values[0, 0] = 5.0
