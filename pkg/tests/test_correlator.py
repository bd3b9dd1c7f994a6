"""Correlation analysis against brute-force oracles and exact synthetic
streams."""

import io

import numpy as np
import pytest

from biphoton.correlator import (
    AnalysisError,
    CorrelationHistogram,
    auto_correlation_histogram,
    coincidence_metrics,
    cross_correlation_histogram,
    heralded_autocorrelation,
    normalized_g2,
    window_sweep,
    write_fasel_csv,
    write_histogram_csv,
)
from biphoton.tagstream import TagStream


def _random_tag_soup(n, seed, horizon=200_000, n_channels=3):
    """Dense random stream with heavy bin-edge traffic."""
    rng = np.random.default_rng(seed)
    times = rng.integers(0, horizon, size=n, dtype=np.int64)
    channels = rng.integers(0, n_channels, size=n, dtype=np.int64)
    order = np.lexsort((channels, times))
    times, channels = times[order], channels[order]
    keep = np.ones(n, dtype=bool)
    same = (np.diff(times) == 0) & (np.diff(channels) == 0)
    keep[1:][same] = False
    return TagStream(times[keep], channels[keep].astype(np.uint8), validate=True)


def _brute_force(stream, start_ch, stop_ch, bin_width, tau_range):
    tau_min, tau_max = tau_range
    n_bins = (tau_max - tau_min) // bin_width
    counts = np.zeros(n_bins, dtype=np.int64)
    starts = stream.channel_times(start_ch)
    stops = stream.channel_times(stop_ch)
    for i, t0 in enumerate(starts):
        for j, t1 in enumerate(stops):
            if start_ch == stop_ch and i == j:
                continue
            dt = int(t1) - int(t0)
            if tau_min <= dt < tau_max:
                counts[(dt - tau_min) // bin_width] += 1
    return counts


def test_histogram_matches_all_pairs_enumeration():
    """The production histogram must agree bin for bin with a quadratic
    all-pairs count, including self-pair removal on a shared channel."""
    for trial in range(5):
        stream = _random_tag_soup(2_000, seed=40 + trial)
        for start_ch, stop_ch in ((0, 2), (2, 0), (1, 1)):
            hist = cross_correlation_histogram(stream, start_ch, stop_ch, 7, (-3_500, 3_500))
            oracle = _brute_force(stream, start_ch, stop_ch, 7, (-3_500, 3_500))
            assert np.array_equal(hist.counts, oracle)


def test_chunked_workers_are_bit_exact():
    rng = np.random.default_rng(50)
    n = 600_000
    times = np.sort(rng.integers(0, 10**12, size=n, dtype=np.int64))
    channels = rng.integers(0, 2, size=n, dtype=np.int64).astype(np.uint8)
    stream = TagStream(times, channels, validate=False)
    serial = cross_correlation_histogram(stream, 0, 1, 5_000, (-2_000_000, 2_000_000))
    threaded = cross_correlation_histogram(
        stream, 0, 1, 5_000, (-2_000_000, 2_000_000), workers=4
    )
    assert np.array_equal(serial.counts, threaded.counts)
    assert serial.n_starts == threaded.n_starts
    assert serial.duration_ps == threaded.duration_ps


def test_uncorrelated_streams_are_flat_at_the_accidental_level():
    rng = np.random.default_rng(51)
    duration = 10**12
    times = np.sort(rng.integers(0, duration, size=60_000, dtype=np.int64))
    channels = rng.integers(0, 2, size=60_000, dtype=np.int64).astype(np.uint8)
    stream = TagStream(times, channels, validate=False)
    hist = cross_correlation_histogram(stream, 0, 1, 20_000, (-2_000_000, 2_000_000))
    mean_norm = hist.normalized.mean()
    # Poisson scatter on ~200 bins of ~ stream-rate^2 * bin * T counts
    assert abs(mean_norm - 1.0) < 0.05
    expected = hist.n_starts * hist.n_stops * hist.bin_width_ps / hist.duration_ps
    assert hist.accidental_per_bin == pytest.approx(expected, rel=1e-12)


def test_autocorrelation_alias_matches_cross():
    stream = _random_tag_soup(1_000, seed=52)
    a = auto_correlation_histogram(stream, 1, 1, 10, (-1_000, 1_000))
    b = cross_correlation_histogram(stream, 1, 1, 10, (-1_000, 1_000))
    assert np.array_equal(a.counts, b.counts)


def test_histogram_rejects_bad_binning_and_channels():
    stream = _random_tag_soup(100, seed=53)
    with pytest.raises(AnalysisError, match="bin width"):
        cross_correlation_histogram(stream, 0, 1, 0, (-100, 100))
    with pytest.raises(AnalysisError, match="multiple"):
        cross_correlation_histogram(stream, 0, 1, 7, (-100, 100))
    with pytest.raises(AnalysisError, match="multiple"):
        cross_correlation_histogram(stream, 0, 1, 10, (100, 100))
    with pytest.raises(AnalysisError, match="start channel 9"):
        cross_correlation_histogram(stream, 9, 1, 10, (-100, 100))
    with pytest.raises(AnalysisError, match="stop channel 9"):
        cross_correlation_histogram(stream, 0, 9, 10, (-100, 100))


def test_coarse_streams_are_refused():
    coarse = TagStream([10, 20], [0, 1], resolution_ps=4)
    with pytest.raises(AnalysisError, match="1 ps resolution"):
        cross_correlation_histogram(coarse, 0, 1, 10, (-100, 100))
    with pytest.raises(AnalysisError, match="1 ps resolution"):
        heralded_autocorrelation(coarse, 0, 1, 1, 100)
    with pytest.raises(AnalysisError, match="1 ps resolution"):
        coincidence_metrics(coarse, 0, 1, 100, 0.5)


def test_histogram_dataclass_validation():
    good = np.zeros(10, dtype=np.int64)
    CorrelationHistogram(10, -50, 50, good, 0, 1, 1, 1, 100)
    with pytest.raises(AnalysisError, match="bin width"):
        CorrelationHistogram(0, -50, 50, good, 0, 1, 1, 1, 100)
    with pytest.raises(AnalysisError, match="multiple"):
        CorrelationHistogram(7, -50, 50, good, 0, 1, 1, 1, 100)
    with pytest.raises(AnalysisError, match="length"):
        CorrelationHistogram(10, -50, 50, np.zeros(9, dtype=np.int64), 0, 1, 1, 1, 100)
    with pytest.raises(AnalysisError, match="negative"):
        CorrelationHistogram(10, -50, 50, good - 1, 0, 1, 1, 1, 100)


def test_bin_centers_sit_mid_bin():
    hist = CorrelationHistogram(10, -50, 50, np.zeros(10, dtype=np.int64), 0, 1, 1, 1, 100)
    assert hist.n_bins == 10
    assert hist.bin_centers_ps[0] == -45.0
    assert hist.bin_centers_ps[-1] == 45.0


# --- normalized g2 ----------------------------------------------------------


def _step_histogram(peak=900, floor=100, peak_bins=40):
    """2000 bins of 1 ns; a flat-top peak around zero delay on a flat floor."""
    counts = np.full(2000, floor, dtype=np.int64)
    mid = 1000
    counts[mid - peak_bins // 2 : mid + peak_bins // 2] = peak
    return CorrelationHistogram(1_000, -1_000_000, 1_000_000, counts, 0, 1, 1, 1, 10**12)


def test_normalized_g2_exact_on_synthetic_step():
    hist = _step_histogram()
    res = normalized_g2(hist, 40_000, center_ps=0, floor_region_ps=(100_000, 900_000))
    assert res.value == 9.0
    assert res.floor_per_bin == 100.0
    assert res.window_counts == 40 * 900
    assert res.center_ps == 0
    expected_err = 9.0 * np.sqrt(1 / 36_000 + 1 / res.floor_counts)
    assert res.uncertainty == pytest.approx(expected_err, rel=1e-12)


def test_normalized_g2_finds_the_peak_without_a_center():
    counts = np.full(2000, 100, dtype=np.int64)
    counts[1000] = 5000
    hist = CorrelationHistogram(1_000, -1_000_000, 1_000_000, counts, 0, 1, 1, 1, 10**12)
    res = normalized_g2(hist, 1_000, floor_region_ps=(100_000, 900_000))
    assert res.center_ps == 500
    assert res.value == 50.0


def test_normalized_g2_start_anchor():
    hist = _step_histogram()
    res = normalized_g2(
        hist, 20_000, center_ps=-20_000, floor_region_ps=(100_000, 900_000), anchor="start"
    )
    assert res.value == 9.0
    with pytest.raises(AnalysisError, match="anchor"):
        normalized_g2(hist, 20_000, center_ps=0, anchor="middle")


def test_normalized_g2_error_paths():
    hist = _step_histogram()
    with pytest.raises(AnalysisError, match="window must be positive"):
        normalized_g2(hist, 0, center_ps=0)
    with pytest.raises(AnalysisError, match="floor region must satisfy"):
        normalized_g2(hist, 40_000, center_ps=0, floor_region_ps=(0, 900_000))
    with pytest.raises(AnalysisError, match="floor region must satisfy"):
        normalized_g2(hist, 40_000, center_ps=0, floor_region_ps=(900_000, 100_000))
    with pytest.raises(AnalysisError, match="overlaps"):
        normalized_g2(hist, 400_000, center_ps=0, floor_region_ps=(100_000, 900_000))
    with pytest.raises(AnalysisError, match="window contains no bins"):
        normalized_g2(hist, 40_000, center_ps=5_000_000, floor_region_ps=(6_000_000, 7_000_000))
    with pytest.raises(AnalysisError, match="floor region contains no bins"):
        normalized_g2(hist, 40_000, center_ps=0, floor_region_ps=(3_000_000, 4_000_000))
    dark = CorrelationHistogram(
        1_000, -1_000_000, 1_000_000, np.zeros(2000, dtype=np.int64), 0, 1, 1, 1, 10**12
    )
    with pytest.raises(AnalysisError, match="no counts in the floor"):
        normalized_g2(dark, 40_000, center_ps=0, floor_region_ps=(100_000, 900_000))


# --- heralded autocorrelation ------------------------------------------------


def _triple_stream(n_heralds, a_hits, b_hits, spacing=1_000_000):
    """Heralds on channel 2; channels 0/1 fire a fixed offset after the
    heralds whose indices appear in a_hits/b_hits."""
    heralds = spacing * (1 + np.arange(n_heralds, dtype=np.int64))
    times = [heralds]
    channels = [np.full(n_heralds, 2, dtype=np.uint8)]
    if len(a_hits):
        times.append(heralds[list(a_hits)] + 10)
        channels.append(np.zeros(len(a_hits), dtype=np.uint8))
    if len(b_hits):
        times.append(heralds[list(b_hits)] + 20)
        channels.append(np.ones(len(b_hits), dtype=np.uint8))
    t = np.concatenate(times)
    c = np.concatenate(channels)
    order = np.lexsort((c, t))
    return TagStream(t[order], c[order])


def test_heralded_counts_have_exact_closed_form_when_every_herald_fires():
    """If both splitter outputs fire for every herald, H(n) = N - |n| and the
    ratio to the accidental mean is N / (N - (n_max+1)/2)."""
    n = 100
    stream = _triple_stream(n, range(n), range(n))
    result = heralded_autocorrelation(stream, 2, 0, 1, 1_000, n_max=15)
    assert np.array_equal(result.histogram.orders, np.arange(-15, 16))
    expected = n - np.abs(np.arange(-15, 16))
    assert np.array_equal(result.histogram.counts, expected)
    assert result.value == pytest.approx(n / (n - 8), rel=1e-12)
    assert result.histogram.herald_count == n


def test_heralded_antibunching_is_exactly_zero():
    # A fires on even heralds only, B on odd heralds only
    n = 80
    stream = _triple_stream(n, range(0, n, 2), range(1, n, 2))
    result = heralded_autocorrelation(stream, 2, 0, 1, 1_000, n_max=10)
    assert result.value == 0.0
    assert result.histogram.counts[10] == 0
    mean_other = (result.histogram.counts.sum()) / 20
    assert result.uncertainty == pytest.approx(1.0 / mean_other, rel=1e-12)


def test_heralded_poisson_light_is_near_one():
    rng = np.random.default_rng(60)
    duration = 10**9
    heralds = np.arange(300_000, duration, 300_000, dtype=np.int64)
    a = np.sort(rng.integers(0, duration, size=1_500, dtype=np.int64))
    b = np.sort(rng.integers(0, duration, size=1_500, dtype=np.int64))
    t = np.concatenate([heralds, a, b])
    c = np.concatenate(
        [np.full(heralds.size, 2, np.uint8), np.zeros(a.size, np.uint8), np.ones(b.size, np.uint8)]
    )
    order = np.lexsort((c, t))
    stream = TagStream(t[order], c[order], validate=False)
    result = heralded_autocorrelation(stream, 2, 0, 1, 200_000, n_max=15)
    assert abs(result.value - 1.0) < 3.5 * result.uncertainty
    assert result.uncertainty < 0.5


def test_heralded_error_paths():
    stream = _triple_stream(100, range(100), range(100))
    with pytest.raises(AnalysisError, match="n_max"):
        heralded_autocorrelation(stream, 2, 0, 1, 1_000, n_max=0)
    with pytest.raises(AnalysisError, match="window"):
        heralded_autocorrelation(stream, 2, 0, 1, 0)
    with pytest.raises(AnalysisError, match="need at least 101 heralds"):
        heralded_autocorrelation(stream, 2, 0, 1, 1_000, n_max=50)
    silent = _triple_stream(100, [], [])
    with pytest.raises(AnalysisError, match="cannot normalize"):
        heralded_autocorrelation(silent, 2, 0, 1, 1_000)


# --- coincidence metrics and window sweep -------------------------------------


def test_coincidence_metrics_exact_synthetic():
    n = 1_000
    fired = 300
    stream = _triple_stream(n, range(fired), [])
    metrics = coincidence_metrics(stream, 2, 0, 1_000, 0.6)
    assert metrics.herald_count == n
    assert metrics.signal_count == fired
    assert metrics.coincidence_count == fired
    duration_s = stream.span_ps * 1e-12
    assert metrics.duration_s == duration_s
    assert metrics.herald_rate_hz == pytest.approx(n / duration_s, rel=1e-12)
    assert metrics.signal_rate_hz == pytest.approx(fired / duration_s, rel=1e-12)
    assert metrics.coincidence_rate_hz == pytest.approx(fired / duration_s, rel=1e-12)
    assert metrics.heralding_efficiency == pytest.approx(0.5, rel=1e-12)
    accidentals = n * (fired / duration_s) * 1_000e-12
    assert metrics.accidental_rate_hz == pytest.approx(accidentals / duration_s, rel=1e-12)
    corrected = (fired - accidentals) / n / 0.6
    assert metrics.heralding_efficiency_corrected == pytest.approx(corrected, rel=1e-12)


def test_coincidence_metrics_window_selectivity():
    # clicks land 10 ps after the herald; a 30 ps centered window catches
    # them, a window ending before +10 does not
    stream = _triple_stream(200, range(200), [])
    inside = coincidence_metrics(stream, 2, 0, 30, 0.5)
    assert inside.coincidence_count == 200
    outside = coincidence_metrics(stream, 2, 0, 10, 0.5)
    assert outside.coincidence_count == 0


def test_coincidence_metrics_errors():
    stream = _triple_stream(10, range(10), [])
    with pytest.raises(AnalysisError, match="efficiency"):
        coincidence_metrics(stream, 2, 0, 100, 0.0)
    with pytest.raises(AnalysisError, match="herald channel 5"):
        coincidence_metrics(stream, 5, 0, 100, 0.5)


def test_window_sweep_monotone_and_consistent():
    rng = np.random.default_rng(61)
    duration = 10**10
    heralds = np.sort(rng.integers(0, duration, size=20_000, dtype=np.int64))
    jitter = rng.integers(-40_000, 40_000, size=heralds.size, dtype=np.int64)
    partners = heralds + jitter
    keep = partners > 0
    t = np.concatenate([heralds, partners[keep]])
    c = np.concatenate([np.full(heralds.size, 2, np.uint8), np.zeros(int(keep.sum()), np.uint8)])
    order = np.lexsort((c, t))
    stream = TagStream(t[order], c[order], validate=False)
    windows = [20_000, 50_000, 100_000, 200_000]
    points = window_sweep(stream, 2, 0, windows, 0.5, center_ps=0)
    counts = [p.coincidence_count for p in points]
    assert counts == sorted(counts)
    assert [p.window_ps for p in points] == windows
    for point in points:
        direct = coincidence_metrics(stream, 2, 0, point.window_ps, 0.5)
        assert point.coincidence_count == direct.coincidence_count
        assert point.heralding_efficiency == pytest.approx(
            direct.heralding_efficiency, rel=1e-12
        )


def test_window_sweep_rejects_bad_windows():
    stream = _triple_stream(100, range(100), [])
    with pytest.raises(AnalysisError, match="positive"):
        window_sweep(stream, 2, 0, [0, 100], 0.5)
    with pytest.raises(AnalysisError, match="ascending"):
        window_sweep(stream, 2, 0, [200, 100], 0.5)
    with pytest.raises(AnalysisError, match="positive"):
        window_sweep(stream, 2, 0, [], 0.5)


# --- CSV output ----------------------------------------------------------------


def test_histogram_csv_roundtrip():
    hist = _step_histogram()
    buf = io.StringIO()
    write_histogram_csv(hist, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "delay_ns,counts,normalized"
    assert len(lines) == hist.n_bins + 1
    delay, count, norm = lines[1].split(",")
    assert float(delay) == pytest.approx(hist.bin_centers_ps[0] / 1000)
    assert int(count) == hist.counts[0]
    assert float(norm) == pytest.approx(hist.normalized[0], rel=1e-6)


def test_fasel_csv_roundtrip():
    stream = _triple_stream(100, range(100), range(100))
    result = heralded_autocorrelation(stream, 2, 0, 1, 1_000, n_max=5)
    buf = io.StringIO()
    write_fasel_csv(result.histogram, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,counts"
    rows = [line.split(",") for line in lines[1:]]
    assert [int(r[0]) for r in rows] == list(range(-5, 6))
    assert [int(r[1]) for r in rows] == list(result.histogram.counts)
