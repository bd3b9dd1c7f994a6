"""Monte Carlo generation of detector time tags for a cavity-enhanced
photon-pair source, plus synthesis of its longitudinal-mode spectrum.

Statistics model
----------------
Pair creation is thermal per longitudinal mode.  Time is partitioned into
coherence slots; in every slot each mode draws a pair count from the
Bose-Einstein distribution with mean mu_m = central_rate * w_m/w_0 * slot.
The idler emission time is uniform in its slot; the signal time is the idler
time plus a draw from the normalized two-sided exponential delay density
(falling constant 1/(2 pi dnu_s) toward positive delays, rising constant
1/(2 pi dnu_i) toward negative ones).  Losses, the idler mode filter, the
signal splitter and the detector efficiencies are independent Bernoulli
thinnings; dark counts are homogeneous Poisson processes per detector.

The slot model reproduces single-mode thermal bunching (g2 -> 2) and the
1 + 1/N reduction for N modes.  Its known artifact is that slot boundaries
smear the *shape* of autocorrelation peaks on the scale of one slot; choose
``coherence_slot_s`` accordingly when peak shapes matter.

Determinism
-----------
All randomness derives from one integer seed.  Streams are generated in
fixed-size slot blocks with per-(segment, block, mode) derived seeds, so
results are byte-identical regardless of how generation is chunked, and
identical seeds give identical tag streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import DetectorSpec, ModelError, biphoton_from_linewidths
from .tagstream import GateSpec, TagStream

CHANNEL_SIGNAL_A = 0
CHANNEL_SIGNAL_B = 1
CHANNEL_IDLER = 2
CHANNEL_LABELS = {
    CHANNEL_SIGNAL_A: "signal-A",
    CHANNEL_SIGNAL_B: "signal-B",
    CHANNEL_IDLER: "idler",
}

_PS_PER_S = 10**12
_SLOTS_PER_BLOCK = 1 << 22
# salts keep the independent random sub-streams from colliding
_SALT_PAIRS = 11
_SALT_DARKS = 29
_SALT_UNPAIRED_SIGNAL = 41
_SALT_UNPAIRED_IDLER = 43


@dataclass(frozen=True)
class SourceParams:
    """Physical description of the source, its losses and its detectors.

    ``creation_prob_per_mw`` is the pair-creation probability of the central
    mode per ``reference_window_s`` and per mW of pump; side modes scale it
    by ``mode_weights[m] / mode_weights[0]``.  Mode index 0 is the central
    (filter-transmitted) mode; odd/even indices 2k-1, 2k sit at +/- k times
    the free spectral range.

    ``splitter_ratio`` is the fraction of surviving signal photons routed to
    signal-A (1.0 means no splitter, 0.5 a balanced one).  The idler filter
    transmits the central mode with ``idler_filter_transmission`` and every
    other mode with ``idler_filter_extinction``.

    ``coherence_slot_s`` is the thermal-statistics slot; ``None`` selects
    1/(pi * biphoton bandwidth) for the configured linewidths.
    """

    pump_mw: float = 1.0
    creation_prob_per_mw: float = 2.71e-3
    reference_window_s: float = 400e-9
    signal_linewidth_hz: float = 3.7e6
    idler_linewidth_hz: float = 2.3e6
    fsr_hz: float = 423e6
    mode_weights: tuple[float, ...] = (1.0,)
    escape_s: float = 1.0
    escape_i: float = 1.0
    transmission_s: float = 1.0
    transmission_i: float = 1.0
    idler_filter_transmission: float = 1.0
    idler_filter_extinction: float = 0.0
    splitter_ratio: float = 1.0
    detector_a: DetectorSpec = DetectorSpec(1.0)
    detector_b: DetectorSpec = DetectorSpec(1.0)
    detector_i: DetectorSpec = DetectorSpec(1.0)
    coherence_slot_s: float | None = None
    gate: GateSpec | None = None
    gate_darks: bool = True
    pair_correlations: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode_weights", tuple(float(w) for w in self.mode_weights))
        if self.pump_mw < 0 or self.creation_prob_per_mw < 0:
            raise ModelError("pump power and creation probability must be non-negative")
        if self.reference_window_s <= 0:
            raise ModelError("reference window must be positive")
        if self.signal_linewidth_hz <= 0 or self.idler_linewidth_hz <= 0:
            raise ModelError("linewidths must be positive")
        if self.fsr_hz <= 0:
            raise ModelError("free spectral range must be positive")
        if not self.mode_weights or min(self.mode_weights) < 0 or max(self.mode_weights) == 0:
            raise ModelError("mode weights must be non-negative with at least one positive")
        if self.mode_weights[0] <= 0:
            raise ModelError("the central mode weight must be positive")
        for name in (
            "escape_s",
            "escape_i",
            "transmission_s",
            "transmission_i",
            "idler_filter_transmission",
            "idler_filter_extinction",
            "splitter_ratio",
        ):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ModelError(f"{name} must lie in [0, 1], got {val}")
        if self.coherence_slot_s is not None and self.coherence_slot_s <= 0:
            raise ModelError("coherence slot must be positive")

    @property
    def slot_s(self) -> float:
        if self.coherence_slot_s is not None:
            return self.coherence_slot_s
        spec = biphoton_from_linewidths(self.signal_linewidth_hz, self.idler_linewidth_hz)
        return 1.0 / (math.pi * spec.bandwidth_hz)

    @property
    def central_pair_rate_hz(self) -> float:
        """Created pairs per second in the central mode at the set pump."""
        return self.creation_prob_per_mw * self.pump_mw / self.reference_window_s

    def mode_offsets_hz(self) -> np.ndarray:
        """Frequency offset of each configured mode from the central one."""
        idx = np.arange(len(self.mode_weights))
        k = (idx + 1) // 2
        sign = np.where(idx % 2 == 1, 1.0, -1.0)
        sign[0] = 0.0
        return sign * k * self.fsr_hz


@dataclass(frozen=True)
class SpectrumScan:
    """Synthesized scanning-cavity trace of the signal mode cluster."""

    frequency_offsets_hz: np.ndarray
    intensity: np.ndarray
    heralded_intensity: np.ndarray

    def __post_init__(self) -> None:
        if not (
            len(self.frequency_offsets_hz) == len(self.intensity) == len(self.heralded_intensity)
        ):
            raise ModelError("scan arrays must have equal length")
        if self.intensity.size and (self.intensity.min() < 0 or self.heralded_intensity.min() < 0):
            raise ModelError("intensities must be non-negative")


def effective_mode_number(mode_weights) -> float:
    """Effective number of equally bright modes carrying the same statistics:
    (sum w)^2 / sum w^2.  Equal weights give the plain mode count."""
    w = np.asarray(mode_weights, dtype=float)
    if w.size == 0 or np.any(w < 0) or not np.any(w > 0):
        raise ModelError("mode weights must be non-negative with at least one positive")
    s = w.sum()
    return float(s * s / np.square(w).sum())


# ---------------------------------------------------------------------------
# tag generation
# ---------------------------------------------------------------------------


def _open_segments(gate: GateSpec | None, duration_ps: int) -> list[tuple[int, int]]:
    """Measurement-open [start, end) intervals within [0, duration)."""
    if gate is None:
        return [(0, duration_ps)]
    period = gate.period_ps
    open_ps = gate.open_ps
    if open_ps == 0:
        return []
    first = -((gate.phase_ps) // period) - 1
    last = (duration_ps - gate.phase_ps) // period + 1
    segments = []
    for k in range(first, last + 1):
        start = gate.phase_ps + k * period
        end = start + open_ps
        start = max(start, 0)
        end = min(end, duration_ps)
        if start < end:
            segments.append((start, end))
    return segments


def _occupied_slots(rng: np.random.Generator, n_slots: int, q: float) -> np.ndarray:
    """Indices of slots holding at least one pair; occupancy i.i.d. with
    probability ``q``.  Sampled via geometric gaps so empty slots cost
    nothing."""
    if q <= 0.0 or n_slots == 0:
        return np.empty(0, dtype=np.int64)
    if q >= 1.0:
        return np.arange(n_slots, dtype=np.int64)
    chunks = []
    pos = -1
    while True:
        expect = (n_slots - 1 - pos) * q
        size = int(expect + 6.0 * math.sqrt(expect + 1.0)) + 16
        idx = pos + np.cumsum(rng.geometric(q, size=size), dtype=np.int64)
        inside = idx[idx < n_slots]
        chunks.append(inside)
        if inside.size < idx.size:
            return np.concatenate(chunks)
        pos = int(idx[-1])


def _pair_block(
    rng: np.random.Generator,
    block_start_ps: int,
    n_slots: int,
    slot_ps: int,
    mu: float,
    tau_fall_ps: float,
    tau_rise_ps: float,
) -> tuple[np.ndarray, np.ndarray]:
    """(idler, signal) emission times for one slot block of one mode."""
    occ = _occupied_slots(rng, n_slots, mu / (1.0 + mu))
    if occ.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    # pair count in an occupied slot: Bose-Einstein conditioned on >= 1,
    # which is geometric with success probability 1/(1+mu)
    counts = rng.geometric(1.0 / (1.0 + mu), size=occ.size)
    slot_starts = block_start_ps + occ * slot_ps
    idler = np.repeat(slot_starts, counts) + rng.integers(
        0, slot_ps, size=int(counts.sum()), dtype=np.int64
    )
    falling = rng.random(idler.size) < tau_fall_ps / (tau_fall_ps + tau_rise_ps)
    mag = rng.standard_exponential(idler.size)
    delay = np.where(falling, mag * tau_fall_ps, -mag * tau_rise_ps)
    signal = idler + np.rint(delay).astype(np.int64)
    return idler, signal


def _generate_photons(
    params: SourceParams,
    duration_ps: int,
    seed: int,
    salt: int,
    keep_signal: bool,
    keep_idler: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """All surviving photon detection tags as (times, channels), unsorted."""
    slot_ps = max(int(round(params.slot_s * _PS_PER_S)), 1)
    central_rate = params.central_pair_rate_hz
    tau_fall_ps = _PS_PER_S / (2.0 * math.pi * params.signal_linewidth_hz)
    tau_rise_ps = _PS_PER_S / (2.0 * math.pi * params.idler_linewidth_hz)
    eff_a = params.escape_s * params.transmission_s * params.splitter_ratio * params.detector_a.efficiency
    eff_b = (
        params.escape_s
        * params.transmission_s
        * (1.0 - params.splitter_ratio)
        * params.detector_b.efficiency
    )
    idler_common = params.escape_i * params.transmission_i * params.detector_i.efficiency

    times = []
    channels = []
    w0 = params.mode_weights[0]
    for seg_index, (seg_start, seg_end) in enumerate(_open_segments(params.gate, duration_ps)):
        n_slots_seg = -((seg_start - seg_end) // slot_ps)  # ceil division
        for mode, weight in enumerate(params.mode_weights):
            if weight == 0.0:
                continue
            mu = central_rate * (weight / w0) * (slot_ps / _PS_PER_S)
            if mu <= 0.0:
                continue
            filt = params.idler_filter_transmission if mode == 0 else params.idler_filter_extinction
            p_idler = idler_common * filt
            for block in range(-(-n_slots_seg // _SLOTS_PER_BLOCK)):
                rng = np.random.default_rng(
                    np.random.SeedSequence((seed, salt, seg_index, mode, block))
                )
                n_slots = min(_SLOTS_PER_BLOCK, n_slots_seg - block * _SLOTS_PER_BLOCK)
                idler, signal = _pair_block(
                    rng,
                    seg_start + block * _SLOTS_PER_BLOCK * slot_ps,
                    n_slots,
                    slot_ps,
                    mu,
                    tau_fall_ps,
                    tau_rise_ps,
                )
                if idler.size == 0:
                    continue
                # thinning draws happen in a fixed order so streams are
                # reproducible; both are drawn even when one side is dropped
                u_idler = rng.random(idler.size)
                u_signal = rng.random(signal.size)
                if keep_idler and p_idler > 0.0:
                    kept = idler[u_idler < p_idler]
                    times.append(kept)
                    channels.append(np.full(kept.size, CHANNEL_IDLER, dtype=np.uint8))
                if keep_signal:
                    to_a = signal[u_signal < eff_a]
                    to_b = signal[(u_signal >= eff_a) & (u_signal < eff_a + eff_b)]
                    times.append(to_a)
                    channels.append(np.full(to_a.size, CHANNEL_SIGNAL_A, dtype=np.uint8))
                    times.append(to_b)
                    channels.append(np.full(to_b.size, CHANNEL_SIGNAL_B, dtype=np.uint8))
    if not times:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.uint8)
    return np.concatenate(times), np.concatenate(channels)


def _generate_darks(
    params: SourceParams, duration_ps: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    if params.gate is not None and params.gate_darks:
        segments = _open_segments(params.gate, duration_ps)
    else:
        segments = [(0, duration_ps)]
    if not segments:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.uint8)
    starts = np.array([s for s, _ in segments], dtype=np.int64)
    lengths = np.array([e - s for s, e in segments], dtype=np.int64)
    edges = np.cumsum(lengths)
    total_ps = int(edges[-1])
    times = []
    channels = []
    rates = {
        CHANNEL_SIGNAL_A: params.detector_a.dark_rate_hz,
        CHANNEL_SIGNAL_B: params.detector_b.dark_rate_hz,
        CHANNEL_IDLER: params.detector_i.dark_rate_hz,
    }
    for channel, rate in rates.items():
        if rate <= 0.0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence((seed, _SALT_DARKS, channel)))
        n = rng.poisson(rate * total_ps / _PS_PER_S)
        if n == 0:
            continue
        offsets = rng.integers(0, total_ps, size=n, dtype=np.int64)
        seg = np.searchsorted(edges, offsets, side="right")
        t = starts[seg] + offsets - (edges[seg] - lengths[seg])
        times.append(t)
        channels.append(np.full(n, channel, dtype=np.uint8))
    if not times:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.uint8)
    return np.concatenate(times), np.concatenate(channels)


def _apply_dead_time(times: np.ndarray, channels: np.ndarray, params: SourceParams):
    dead = {
        CHANNEL_SIGNAL_A: params.detector_a.dead_time_s,
        CHANNEL_SIGNAL_B: params.detector_b.dead_time_s,
        CHANNEL_IDLER: params.detector_i.dead_time_s,
    }
    if all(v == 0.0 for v in dead.values()):
        return times, channels
    keep = np.ones(times.size, dtype=bool)
    for channel, dead_s in dead.items():
        if dead_s <= 0.0:
            continue
        dead_ps = int(round(dead_s * _PS_PER_S))
        idx = np.nonzero(channels == channel)[0]
        t = times[idx]
        last = -dead_ps - 1
        for j in range(t.size):
            if t[j] - last < dead_ps:
                keep[idx[j]] = False
            else:
                last = t[j]
    return times[keep], channels[keep]


def simulate_source(params: SourceParams, duration_s: float, seed: int) -> TagStream:
    """Generate the detection record of a measurement run.

    Returns a 1 ps resolution stream on channels signal-A, signal-B and
    idler.  With ``params.pair_correlations`` False the signal and idler
    photons come from two independent realizations of the same thermal
    process: each arm keeps its singles rates and bunching, but there are no
    cross-correlations (a classical surrogate for sanity checks).
    """
    if duration_s <= 0:
        raise ModelError("duration must be positive")
    if seed is None or int(seed) < 0:
        raise ModelError("seed must be a non-negative integer")
    seed = int(seed)
    duration_ps = int(round(duration_s * _PS_PER_S))
    if duration_ps >= 2**62:
        raise ModelError("duration overflows the 64-bit picosecond clock")

    if params.pair_correlations:
        photon_parts = [
            _generate_photons(params, duration_ps, seed, _SALT_PAIRS, True, True)
        ]
    else:
        photon_parts = [
            _generate_photons(params, duration_ps, seed, _SALT_UNPAIRED_SIGNAL, True, False),
            _generate_photons(params, duration_ps, seed, _SALT_UNPAIRED_IDLER, False, True),
        ]
    dark_times, dark_channels = _generate_darks(params, duration_ps, seed)
    times = np.concatenate([p[0] for p in photon_parts] + [dark_times])
    channels = np.concatenate([p[1] for p in photon_parts] + [dark_channels])

    inside = (times >= 0) & (times < duration_ps)
    if params.gate is not None:
        open_mask = params.gate.open_mask(times)
        if not params.gate_darks:
            # darks happen in the detector, downstream of the optical gate
            open_mask[times.size - dark_times.size :] = True
        inside &= open_mask
    times = times[inside]
    channels = channels[inside]

    order = np.lexsort((channels, times))
    times = times[order]
    channels = channels[order]
    if times.size:
        distinct = np.empty(times.size, dtype=bool)
        distinct[0] = True
        distinct[1:] = (np.diff(times) != 0) | (channels[1:] != channels[:-1])
        times = times[distinct]
        channels = channels[distinct]
    times, channels = _apply_dead_time(times, channels, params)
    return TagStream(
        times, channels, resolution_ps=1, channel_labels=dict(CHANNEL_LABELS), validate=False
    )


# ---------------------------------------------------------------------------
# mode-cluster spectrum
# ---------------------------------------------------------------------------


def cluster_spectrum(
    params: SourceParams,
    scan_range_hz: float,
    scan_resolution_hz: float,
    fpi_linewidth_hz: float,
) -> SpectrumScan:
    """Scanning-cavity view of the signal mode cluster.

    The comb of modes (spacing = free spectral range, relative intensities =
    ``mode_weights``) is convolved with the Lorentzian response of the
    scanning filter.  The heralded trace repeats this with every non-central
    mode attenuated by the idler filter extinction, since only heralds from
    the transmitted mode select signal photons.
    """
    if scan_range_hz <= 0 or scan_resolution_hz <= 0 or fpi_linewidth_hz <= 0:
        raise ModelError("scan range, resolution and filter linewidth must be positive")
    offsets_mode = params.mode_offsets_hz()
    span = max(scan_range_hz, float(np.abs(offsets_mode).max()))
    n = int(math.floor(span / scan_resolution_hz))
    freq = np.arange(-n, n + 1, dtype=float) * scan_resolution_hz
    gamma = 0.5 * fpi_linewidth_hz
    weights = np.asarray(params.mode_weights, dtype=float)
    heralded_weights = weights * np.where(
        np.arange(weights.size) == 0, 1.0, params.idler_filter_extinction
    )
    det2 = np.square(freq[:, None] - offsets_mode[None, :])
    lorentz = gamma * gamma / (det2 + gamma * gamma)
    return SpectrumScan(freq, lorentz @ weights, lorentz @ heralded_weights)
