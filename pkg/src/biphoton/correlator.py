"""Histogram and estimator engine for photon correlation analysis.

Everything operates on sorted :class:`~biphoton.tagstream.TagStream` data.
Histograms are multi-stop: every (start, stop) pair whose delay falls in the
requested range is counted, which is unbiased at high rates where classical
start-stop counting saturates.  The kernel is a vectorized two-cursor sweep
(binary searches for the per-start stop range, then one bincount); work is
split into fixed-size start chunks whose partial histograms sum exactly, so
multi-threaded results are bit-identical to serial ones.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .tagstream import TagStream

_CHUNK_STARTS = 1 << 18


class AnalysisError(ValueError):
    """An estimator cannot be computed from the given data."""


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationHistogram:
    """Binned delay histogram between two channels.

    Delays are stop time minus start time in picoseconds; bin ``i`` covers
    ``[tau_min + i*bin_width, tau_min + (i+1)*bin_width)``.
    """

    bin_width_ps: int
    tau_min_ps: int
    tau_max_ps: int
    counts: np.ndarray
    start_channel: int
    stop_channel: int
    n_starts: int
    n_stops: int
    duration_ps: int

    def __post_init__(self) -> None:
        if self.bin_width_ps <= 0:
            raise AnalysisError("bin width must be positive")
        span = self.tau_max_ps - self.tau_min_ps
        if span <= 0 or span % self.bin_width_ps:
            raise AnalysisError("delay range must be a positive multiple of the bin width")
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.shape != (span // self.bin_width_ps,):
            raise AnalysisError("counts length does not match the binning")
        if counts.size and counts.min() < 0:
            raise AnalysisError("negative counts")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return (self.tau_max_ps - self.tau_min_ps) // self.bin_width_ps

    @property
    def bin_centers_ps(self) -> np.ndarray:
        return self.tau_min_ps + self.bin_width_ps * (np.arange(self.n_bins) + 0.5)

    @property
    def accidental_per_bin(self) -> float:
        """Expected pair count per bin for uncorrelated stationary streams."""
        if self.duration_ps <= 0:
            return 0.0
        return self.n_starts * self.n_stops * self.bin_width_ps / self.duration_ps

    @property
    def normalized(self) -> np.ndarray:
        """Counts divided by the stationary accidental estimate (a g2 scale)."""
        acc = self.accidental_per_bin
        if acc <= 0:
            return np.zeros(self.n_bins)
        return self.counts / acc


def _require_picosecond_resolution(stream: TagStream) -> None:
    # delay windows and bin widths are picosecond integers; coarser streams
    # would silently shift every delay, so refuse them instead
    if stream.resolution_ps != 1:
        raise AnalysisError(
            f"correlation analysis expects 1 ps resolution tags, got {stream.resolution_ps} ps"
        )


def _chunk_histogram(
    starts: np.ndarray,
    stops: np.ndarray,
    tau_min: int,
    tau_max: int,
    bin_width: int,
    n_bins: int,
) -> np.ndarray:
    lo = np.searchsorted(stops, starts + tau_min, side="left")
    hi = np.searchsorted(stops, starts + tau_max, side="left")
    mult = hi - lo
    total = int(mult.sum())
    if total == 0:
        return np.zeros(n_bins, dtype=np.int64)
    run_start = np.cumsum(mult) - mult
    idx = np.arange(total, dtype=np.int64) - np.repeat(run_start, mult) + np.repeat(lo, mult)
    delays = stops[idx] - np.repeat(starts, mult)
    bins = (delays - tau_min) // bin_width
    return np.bincount(bins, minlength=n_bins).astype(np.int64, copy=False)


def cross_correlation_histogram(
    stream: TagStream,
    start_channel: int,
    stop_channel: int,
    bin_width_ps: int,
    tau_range_ps: tuple[int, int],
    workers: int = 1,
) -> CorrelationHistogram:
    """Multi-stop delay histogram of ``stop_channel`` relative to
    ``start_channel``.

    ``workers`` > 1 correlates fixed-size start chunks in a thread pool; the
    integer partial histograms are summed, so the result does not depend on
    the worker count.
    """
    _require_picosecond_resolution(stream)
    tau_min, tau_max = (int(t) for t in tau_range_ps)
    bin_width = int(bin_width_ps)
    if bin_width <= 0:
        raise AnalysisError("bin width must be positive")
    if tau_max <= tau_min or (tau_max - tau_min) % bin_width:
        raise AnalysisError("delay range must be a positive multiple of the bin width")
    starts = stream.channel_times(start_channel)
    stops = stream.channel_times(stop_channel)
    if starts.size == 0:
        raise AnalysisError(f"no tags on start channel {start_channel}")
    if stops.size == 0:
        raise AnalysisError(f"no tags on stop channel {stop_channel}")
    n_bins = (tau_max - tau_min) // bin_width

    chunks = range(0, starts.size, _CHUNK_STARTS)

    def work(begin: int) -> np.ndarray:
        part = starts[begin : begin + _CHUNK_STARTS]
        return _chunk_histogram(part, stops, tau_min, tau_max, bin_width, n_bins)

    if workers > 1 and starts.size > _CHUNK_STARTS:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = sum(pool.map(work, chunks), np.zeros(n_bins, dtype=np.int64))
    else:
        counts = np.zeros(n_bins, dtype=np.int64)
        for begin in chunks:
            counts += work(begin)

    if start_channel == stop_channel and tau_min <= 0 < tau_max:
        # remove each tag paired with itself
        counts[(-tau_min) // bin_width] -= starts.size
    return CorrelationHistogram(
        bin_width_ps=bin_width,
        tau_min_ps=tau_min,
        tau_max_ps=tau_max,
        counts=counts,
        start_channel=start_channel,
        stop_channel=stop_channel,
        n_starts=int(starts.size),
        n_stops=int(stops.size),
        duration_ps=stream.span_ps,
    )


def auto_correlation_histogram(
    stream: TagStream,
    channel_a: int,
    channel_b: int,
    bin_width_ps: int,
    tau_range_ps: tuple[int, int],
    workers: int = 1,
) -> CorrelationHistogram:
    """Delay histogram between the two outputs of a splitter (Hanbury Brown
    and Twiss arrangement); identical machinery to the cross histogram."""
    return cross_correlation_histogram(
        stream, channel_a, channel_b, bin_width_ps, tau_range_ps, workers
    )


# ---------------------------------------------------------------------------
# normalized g2 from a histogram
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class G2Result:
    """Window-averaged normalized correlation with its statistical error."""

    value: float
    uncertainty: float
    window_ps: int
    center_ps: int
    floor_per_bin: float
    floor_region_ps: tuple[int, int]
    window_counts: int
    floor_counts: int


def _window_bounds(center: int, window: int, anchor: str) -> tuple[float, float]:
    if anchor == "center":
        return center - window / 2, center + window / 2
    if anchor == "start":
        return float(center), float(center + window)
    raise AnalysisError(f"unknown window anchor {anchor!r}")


def normalized_g2(
    hist: CorrelationHistogram,
    window_ps: int,
    center_ps: int | None = None,
    floor_region_ps: tuple[int, int] = (1_000_000, 5_000_000),
    anchor: str = "center",
) -> G2Result:
    """Mean counts per bin inside the coincidence window divided by the mean
    over the accidental floor.

    The window covers ``window_ps`` at ``center_ps`` (by default the highest
    bin); the floor is all bins with |delay - center| inside
    ``floor_region_ps``.  Uncertainty assumes Poisson counts in both regions.
    """
    window = int(window_ps)
    if window <= 0:
        raise AnalysisError("window must be positive")
    centers = hist.bin_centers_ps
    if center_ps is None:
        center = int(centers[int(np.argmax(hist.counts))])
    else:
        center = int(center_ps)
    w_lo, w_hi = _window_bounds(center, window, anchor)
    in_window = (centers >= w_lo) & (centers < w_hi)
    f_lo, f_hi = floor_region_ps
    if f_lo <= 0 or f_hi <= f_lo:
        raise AnalysisError("floor region must satisfy 0 < lo < hi")
    dist = np.abs(centers - center)
    in_floor = (dist >= f_lo) & (dist <= f_hi)
    if max(abs(w_lo - center), abs(w_hi - center)) > f_lo:
        raise AnalysisError("floor region overlaps the coincidence window")
    n_window = int(in_window.sum())
    n_floor = int(in_floor.sum())
    if n_window == 0:
        raise AnalysisError("window contains no bins")
    if n_floor == 0:
        raise AnalysisError("floor region contains no bins")
    s_window = int(hist.counts[in_window].sum())
    s_floor = int(hist.counts[in_floor].sum())
    if s_floor == 0:
        raise AnalysisError("no counts in the floor region; cannot normalize")
    floor_per_bin = s_floor / n_floor
    value = (s_window / n_window) / floor_per_bin
    uncertainty = value * math.sqrt(1.0 / max(s_window, 1) + 1.0 / s_floor)
    return G2Result(
        value=value,
        uncertainty=uncertainty,
        window_ps=window,
        center_ps=center,
        floor_per_bin=floor_per_bin,
        floor_region_ps=(int(f_lo), int(f_hi)),
        window_counts=s_window,
        floor_counts=s_floor,
    )


# ---------------------------------------------------------------------------
# heralded (conditioned) autocorrelation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FaselHistogram:
    """Triple-coincidence counts H(n) indexed by how many heralds separate
    the two split-arm detections (n = 0: same herald)."""

    orders: np.ndarray
    counts: np.ndarray
    herald_count: int
    window_ps: int
    offset_ps: int

    def __post_init__(self) -> None:
        if len(self.orders) != len(self.counts):
            raise AnalysisError("orders and counts must have equal length")
        if len(self.counts) and min(self.counts) < 0:
            raise AnalysisError("negative counts")


@dataclass(frozen=True)
class HeraldedG2:
    """Conditioned autocorrelation H(0) / mean(H(n != 0))."""

    histogram: FaselHistogram
    value: float
    uncertainty: float


def heralded_autocorrelation(
    stream: TagStream,
    herald_channel: int,
    channel_a: int,
    channel_b: int,
    window_ps: int,
    offset_ps: int = 0,
    n_max: int = 15,
    anchor: str = "center",
) -> HeraldedG2:
    """Conditioned autocorrelation of the heralded arm.

    For herald k, ``a_k``/``b_k`` record whether each splitter output fired
    within the coincidence window around that herald; H(n) counts pairs
    (a_k, b_{k+n}).  H(0) holds the same-herald triples, H(n != 0) the
    accidental reference, and their ratio estimates the conditioned g2.
    """
    if n_max < 1:
        raise AnalysisError("n_max must be at least 1")
    _require_picosecond_resolution(stream)
    window = int(window_ps)
    if window <= 0:
        raise AnalysisError("window must be positive")
    heralds = stream.channel_times(herald_channel)
    if heralds.size < 2 * n_max + 1:
        raise AnalysisError(
            f"need at least {2 * n_max + 1} heralds for orders up to {n_max}, "
            f"got {heralds.size}"
        )
    w_lo, w_hi = _window_bounds(offset_ps, window, anchor)
    lo = heralds + int(math.floor(w_lo))
    hi = heralds + int(math.ceil(w_hi))
    hits = []
    for channel in (channel_a, channel_b):
        t = stream.channel_times(channel)
        hits.append(np.searchsorted(t, hi, side="left") > np.searchsorted(t, lo, side="left"))
    a, b = hits
    orders = np.arange(-n_max, n_max + 1, dtype=np.int64)
    counts = np.empty(orders.size, dtype=np.int64)
    for i, n in enumerate(orders):
        if n >= 0:
            counts[i] = int(np.count_nonzero(a[: a.size - n] & b[n:])) if n < a.size else 0
        else:
            counts[i] = int(np.count_nonzero(a[-n:] & b[: b.size + n])) if -n < a.size else 0
    fasel = FaselHistogram(
        orders=orders,
        counts=counts,
        herald_count=int(heralds.size),
        window_ps=window,
        offset_ps=int(offset_ps),
    )
    h0 = int(counts[n_max])
    s_other = int(counts.sum()) - h0
    if s_other == 0:
        raise AnalysisError("no accidental triple coincidences; cannot normalize")
    mean_other = s_other / (2 * n_max)
    value = h0 / mean_other
    if h0 > 0:
        uncertainty = value * math.sqrt(1.0 / h0 + 1.0 / s_other)
    else:
        # Poisson scale of a zero count in the numerator
        uncertainty = 1.0 / mean_other
    return HeraldedG2(histogram=fasel, value=value, uncertainty=uncertainty)


# ---------------------------------------------------------------------------
# coincidence metrics and window sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoincidenceMetrics:
    """Singles and coincidence rates with the derived heralding efficiency."""

    duration_s: float
    herald_count: int
    signal_count: int
    herald_rate_hz: float
    signal_rate_hz: float
    coincidence_count: int
    coincidence_rate_hz: float
    accidental_rate_hz: float
    heralding_efficiency: float
    heralding_efficiency_corrected: float
    window_ps: int


def _pair_count(heralds: np.ndarray, signals: np.ndarray, lo_off: int, hi_off: int) -> int:
    lo = np.searchsorted(signals, heralds + lo_off, side="left")
    hi = np.searchsorted(signals, heralds + hi_off, side="left")
    return int((hi - lo).sum())


def coincidence_metrics(
    stream: TagStream,
    herald_channel: int,
    signal_channel: int,
    window_ps: int,
    eta_det_s: float,
    offset_ps: int = 0,
    anchor: str = "center",
) -> CoincidenceMetrics:
    """Count heralds, signals and herald-signal pairs in a coincidence window
    and derive the heralding efficiency (detector efficiency divided out).

    The accidental-corrected variant subtracts the stationary expectation
    herald_rate * signal_rate * window before normalizing.
    """
    _require_picosecond_resolution(stream)
    if not 0.0 < eta_det_s <= 1.0:
        raise AnalysisError("signal detector efficiency must lie in (0, 1]")
    heralds = stream.channel_times(herald_channel)
    signals = stream.channel_times(signal_channel)
    if heralds.size == 0:
        raise AnalysisError(f"no tags on herald channel {herald_channel}")
    duration_s = stream.span_ps * 1e-12
    if duration_s <= 0:
        raise AnalysisError("stream spans no time")
    w_lo, w_hi = _window_bounds(offset_ps, int(window_ps), anchor)
    coinc = _pair_count(heralds, signals, int(math.floor(w_lo)), int(math.ceil(w_hi)))
    herald_rate = heralds.size / duration_s
    signal_rate = signals.size / duration_s
    accidentals = heralds.size * signal_rate * (int(window_ps) * 1e-12)
    p_si = coinc / heralds.size
    p_si_corr = max(coinc - accidentals, 0.0) / heralds.size
    return CoincidenceMetrics(
        duration_s=duration_s,
        herald_count=int(heralds.size),
        signal_count=int(signals.size),
        herald_rate_hz=herald_rate,
        signal_rate_hz=signal_rate,
        coincidence_count=coinc,
        coincidence_rate_hz=coinc / duration_s,
        accidental_rate_hz=accidentals / duration_s,
        heralding_efficiency=p_si / eta_det_s,
        heralding_efficiency_corrected=p_si_corr / eta_det_s,
        window_ps=int(window_ps),
    )


@dataclass(frozen=True)
class WindowSweepPoint:
    window_ps: int
    coincidence_count: int
    coincidence_rate_hz: float
    heralding_efficiency: float
    g2: float
    g2_uncertainty: float


def window_sweep(
    stream: TagStream,
    herald_channel: int,
    signal_channel: int,
    windows_ps,
    eta_det_s: float,
    center_ps: int | None = None,
    bin_width_ps: int = 5_000,
    floor_region_ps: tuple[int, int] = (1_000_000, 5_000_000),
    anchor: str = "center",
    workers: int = 1,
) -> list[WindowSweepPoint]:
    """Coincidence rate, heralding efficiency and windowed g2 as a function
    of coincidence-window width."""
    windows = [int(w) for w in windows_ps]
    if not windows or any(w <= 0 for w in windows):
        raise AnalysisError("window widths must be positive")
    if sorted(windows) != windows:
        raise AnalysisError("window widths must be ascending")
    half_range = int(floor_region_ps[1] + max(windows))
    hist = cross_correlation_histogram(
        stream,
        herald_channel,
        signal_channel,
        bin_width_ps,
        (-half_range, half_range),
        workers=workers,
    )
    if center_ps is None:
        center = int(hist.bin_centers_ps[int(np.argmax(hist.counts))])
    else:
        center = int(center_ps)
    heralds = stream.channel_times(herald_channel)
    signals = stream.channel_times(signal_channel)
    duration_s = stream.span_ps * 1e-12
    points = []
    for window in windows:
        w_lo, w_hi = _window_bounds(center, window, anchor)
        coinc = _pair_count(heralds, signals, int(math.floor(w_lo)), int(math.ceil(w_hi)))
        g2 = normalized_g2(hist, window, center, floor_region_ps, anchor)
        points.append(
            WindowSweepPoint(
                window_ps=window,
                coincidence_count=coinc,
                coincidence_rate_hz=coinc / duration_s,
                heralding_efficiency=(coinc / heralds.size) / eta_det_s,
                g2=g2.value,
                g2_uncertainty=g2.uncertainty,
            )
        )
    return points


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def _open_dest(destination):
    if isinstance(destination, (str, os.PathLike)):
        return open(destination, "w", encoding="ascii", newline="\n"), True
    return destination, False


def write_histogram_csv(hist: CorrelationHistogram, destination) -> None:
    """Write ``delay_ns,counts,normalized`` rows (one per bin)."""
    fh, owned = _open_dest(destination)
    try:
        fh.write("delay_ns,counts,normalized\n")
        normalized = hist.normalized
        for center, count, norm in zip(hist.bin_centers_ps, hist.counts, normalized):
            fh.write(f"{center / 1000:.6g},{int(count)},{norm:.8g}\n")
    finally:
        if owned:
            fh.close()


def write_fasel_csv(fasel: FaselHistogram, destination) -> None:
    """Write ``n,counts`` rows (one per herald-separation order)."""
    fh, owned = _open_dest(destination)
    try:
        fh.write("n,counts\n")
        for n, count in zip(fasel.orders, fasel.counts):
            fh.write(f"{int(n)},{int(count)}\n")
    finally:
        if owned:
            fh.close()
