"""Experiment configuration: presets, file parsing and serialization.

Config files are flat ``key = value`` text grouped by ``[section]`` headers.
The format is deliberately dumb: one assignment per line, ``#`` comments,
no nesting, no quoting. Unknown sections or keys are hard errors so that a
typo cannot silently fall back to a default.

Times are given in nanoseconds, linewidths in MHz, rates in Hz, pump powers
in mW and durations in seconds; :meth:`ExperimentConfig.make_source` converts
to the SI units used by the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .models import DetectorSpec
from .simulator import GateSpec, SourceParams

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESET_NAMES",
    "config_text",
    "load_config",
    "parse_config",
    "preset_config",
]


class ConfigError(ValueError):
    """Raised for unparseable or inconsistent configuration input."""


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(p) for p in parts)


def _str(text: str) -> str:
    return text.strip()


# (section, key) -> converter; key doubles as the ExperimentConfig field name.
_SCHEMA: dict[str, dict[str, object]] = {
    "source": {
        "pump_mw": _float,
        "creation_prob_per_mw": _float,
        "reference_window_ns": _float,
        "signal_linewidth_mhz": _float,
        "idler_linewidth_mhz": _float,
        "fsr_mhz": _float,
        "mode_weights": _floats,
        "escape_s": _float,
        "escape_i": _float,
        "transmission_s": _float,
        "transmission_i": _float,
        "idler_filter_transmission": _float,
        "idler_filter_extinction": _float,
        "splitter_ratio": _float,
        "coherence_slot_ns": _float,
        "detector_a_efficiency": _float,
        "detector_a_dark_hz": _float,
        "detector_a_dead_ns": _float,
        "detector_b_efficiency": _float,
        "detector_b_dark_hz": _float,
        "detector_b_dead_ns": _float,
        "detector_i_efficiency": _float,
        "detector_i_dark_hz": _float,
        "detector_i_dead_ns": _float,
        "gate_period_ns": _float,
        "gate_duty": _float,
        "gate_phase_ns": _float,
        "gate_darks": _bool,
        "pair_correlations": _bool,
    },
    "analysis": {
        "bin_ns": _float,
        "tau_range_ns": _float,
        "window_ns": _float,
        "floor_min_ns": _float,
        "floor_max_ns": _float,
        "herald_channel": _int,
        "signal_channel": _int,
        "partner_channel": _int,
        "n_max": _int,
        "workers": _int,
        "budget_escape_s": _float,
        "budget_escape_i": _float,
    },
    "sweep": {
        "powers_mw": _floats,
        "windows_ns": _floats,
        "point_duration_s": _float,
        "g2_divisor": _float,
    },
    "cavity": {
        "finesse": _float,
        "finesse_err": _float,
        "r_hr": _float,
        "r_oc": _float,
        "r_oc_err": _float,
        "n_hr": _int,
        "heralding_efficiency": _float,
        "heralding_transmission": _float,
        "uncorrelated_fraction": _float,
    },
    "run": {
        "duration_s": _float,
        "seed": _int,
        "out_dir": _str,
    },
}

_FIELD_SECTION = {
    key: section for section, keys in _SCHEMA.items() for key in keys
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to simulate one acquisition and analyze it.

    Defaults describe the 1 mW cross-correlation configuration with the full
    signal flux routed to detector A; presets derive the other measurement
    arrangements from it.
    """

    # source
    pump_mw: float = 1.0
    creation_prob_per_mw: float = 2.71e-3
    reference_window_ns: float = 400.0
    signal_linewidth_mhz: float = 3.7
    idler_linewidth_mhz: float = 2.3
    fsr_mhz: float = 423.0
    mode_weights: tuple[float, ...] = (1.0, 0.8, 0.8, 0.45, 0.45, 0.2, 0.2, 0.1, 0.1)
    escape_s: float = 0.44
    escape_i: float = 0.74
    transmission_s: float = 0.71
    transmission_i: float = 0.70
    idler_filter_transmission: float = 0.5
    idler_filter_extinction: float = 0.0
    splitter_ratio: float = 1.0
    coherence_slot_ns: float = 250.0
    detector_a_efficiency: float = 0.62
    detector_a_dark_hz: float = 30.0
    detector_a_dead_ns: float = 0.0
    detector_b_efficiency: float = 0.62
    detector_b_dark_hz: float = 50.0
    detector_b_dead_ns: float = 0.0
    detector_i_efficiency: float = 0.10
    detector_i_dark_hz: float = 18.0
    detector_i_dead_ns: float = 0.0
    gate_period_ns: float = 0.0
    gate_duty: float = 0.5
    gate_phase_ns: float = 0.0
    gate_darks: bool = True
    pair_correlations: bool = True
    # analysis
    bin_ns: float = 5.0
    tau_range_ns: float = 5500.0
    window_ns: float = 400.0
    floor_min_ns: float = 1000.0
    floor_max_ns: float = 5000.0
    herald_channel: int = 2
    signal_channel: int = 0
    partner_channel: int = 1
    n_max: int = 15
    workers: int = 1
    budget_escape_s: float = 0.555
    budget_escape_i: float = 0.74
    # sweep
    powers_mw: tuple[float, ...] = (0.125, 0.25, 0.5, 1.0, 2.0, 5.0)
    windows_ns: tuple[float, ...] = (50.0, 100.0, 200.0, 400.0, 600.0, 800.0)
    point_duration_s: float = 60.0
    g2_divisor: float = 1.0
    # cavity
    finesse: float = 114.0
    finesse_err: float = 0.0
    r_hr: float = 0.9999
    r_oc: float = 0.970
    r_oc_err: float = 0.007
    n_hr: int = 3
    heralding_efficiency: float = 0.28
    heralding_transmission: float = 0.71
    uncorrelated_fraction: float = 0.10
    # run
    duration_s: float = 60.0
    seed: int = 1
    out_dir: str = "."

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ConfigError(f"duration must be positive, got {self.duration_s}")
        if self.point_duration_s <= 0:
            raise ConfigError("sweep point duration must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for name in ("bin_ns", "window_ns", "tau_range_ns", "g2_divisor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.floor_min_ns < self.floor_max_ns:
            raise ConfigError("floor region must satisfy 0 < min < max")
        channels = (self.herald_channel, self.signal_channel, self.partner_channel)
        if len(set(channels)) != 3:
            raise ConfigError(f"herald, signal and partner channels must differ, got {channels}")
        if any(not 0 <= ch <= 255 for ch in channels):
            raise ConfigError("channels must fit in a byte")
        if not self.powers_mw or any(p <= 0 for p in self.powers_mw):
            raise ConfigError("sweep powers must be positive")
        if not self.windows_ns or any(w <= 0 for w in self.windows_ns):
            raise ConfigError("sweep windows must be positive")
        if list(self.windows_ns) != sorted(self.windows_ns):
            raise ConfigError("sweep windows must be ascending")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.n_max < 1:
            raise ConfigError("n_max must be >= 1")

    def make_source(self, **overrides: object) -> SourceParams:
        """Build simulator parameters, optionally overriding any SourceParams
        keyword (values in SI units)."""
        gate = None
        if self.gate_period_ns > 0:
            gate = GateSpec(
                period_ps=int(round(self.gate_period_ns * 1000)),
                duty=self.gate_duty,
                phase_ps=int(round(self.gate_phase_ns * 1000)),
            )
        kwargs: dict[str, object] = dict(
            pump_mw=self.pump_mw,
            creation_prob_per_mw=self.creation_prob_per_mw,
            reference_window_s=self.reference_window_ns * 1e-9,
            signal_linewidth_hz=self.signal_linewidth_mhz * 1e6,
            idler_linewidth_hz=self.idler_linewidth_mhz * 1e6,
            fsr_hz=self.fsr_mhz * 1e6,
            mode_weights=self.mode_weights,
            escape_s=self.escape_s,
            escape_i=self.escape_i,
            transmission_s=self.transmission_s,
            transmission_i=self.transmission_i,
            idler_filter_transmission=self.idler_filter_transmission,
            idler_filter_extinction=self.idler_filter_extinction,
            splitter_ratio=self.splitter_ratio,
            coherence_slot_s=self.coherence_slot_ns * 1e-9,
            detector_a=DetectorSpec(
                self.detector_a_efficiency,
                self.detector_a_dark_hz,
                self.detector_a_dead_ns * 1e-9,
            ),
            detector_b=DetectorSpec(
                self.detector_b_efficiency,
                self.detector_b_dark_hz,
                self.detector_b_dead_ns * 1e-9,
            ),
            detector_i=DetectorSpec(
                self.detector_i_efficiency,
                self.detector_i_dark_hz,
                self.detector_i_dead_ns * 1e-9,
            ),
            gate=gate,
            gate_darks=self.gate_darks,
            pair_correlations=self.pair_correlations,
        )
        kwargs.update(overrides)
        return SourceParams(**kwargs)

    # analysis conveniences (picosecond units used by the correlator)

    @property
    def bin_ps(self) -> int:
        return int(round(self.bin_ns * 1000))

    @property
    def window_ps(self) -> int:
        return int(round(self.window_ns * 1000))

    @property
    def tau_range_ps(self) -> tuple[int, int]:
        span = int(round(self.tau_range_ns * 1000))
        return (-span, span)

    @property
    def floor_region_ps(self) -> tuple[int, int]:
        return (
            int(round(self.floor_min_ns * 1000)),
            int(round(self.floor_max_ns * 1000)),
        )


# Measurement arrangements used throughout: the cross-correlation setup sends
# the whole signal arm to detector A; autocorrelations split it 50/50; the
# idler autocorrelation swaps the roles of the two wavelengths (the splitter
# and both "signal" detectors then live on the idler arm) and runs at the
# pump power used for that measurement. The power-sweep arrangement keeps the
# idler detectors ungated, so their average dark rate applies.
_PRESETS: dict[str, dict[str, object]] = {
    "reference": {},
    "signal-autocorr": {"splitter_ratio": 0.5},
    "idler-autocorr": {
        "pump_mw": 4.3,
        "signal_linewidth_mhz": 2.3,
        "idler_linewidth_mhz": 3.7,
        "mode_weights": (1.0,),
        "escape_s": 0.74,
        "escape_i": 0.44,
        "transmission_s": 0.35,
        "transmission_i": 0.71,
        "idler_filter_transmission": 1.0,
        "splitter_ratio": 0.5,
        "detector_a_efficiency": 0.10,
        "detector_a_dark_hz": 18.0,
        "detector_b_efficiency": 0.10,
        "detector_b_dark_hz": 192.0,
        "detector_i_efficiency": 0.62,
        "detector_i_dark_hz": 30.0,
    },
    "surrogate": {"splitter_ratio": 0.5, "pair_correlations": False},
    "power-sweep": {"detector_i_dark_hz": 105.0},
}

PRESET_NAMES = tuple(_PRESETS)


def preset_config(name: str) -> ExperimentConfig:
    """Return one of the built-in measurement arrangements by name."""
    try:
        overrides = _PRESETS[name]
    except KeyError:
        known = ", ".join(PRESET_NAMES)
        raise ConfigError(f"unknown preset {name!r} (known: {known})") from None
    return ExperimentConfig(**overrides)  # type: ignore[arg-type]


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse config text into an :class:`ExperimentConfig`.

    A ``preset`` assignment in the ``[run]`` section selects the baseline the
    remaining keys override; otherwise ``base`` (default "reference") is used.
    All errors carry the offending line number.
    """
    lines = text.splitlines()
    assignments: list[tuple[int, str, str, str]] = []
    section = None
    preset_name = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                known = ", ".join(sorted(_SCHEMA))
                raise ConfigError(f"line {lineno}: unknown section [{section}] (known: {known})")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: assignment before any [section] header")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "run" and key == "preset":
            if preset_name is not None:
                raise ConfigError(f"line {lineno}: preset assigned twice")
            preset_name = (lineno, value)
            continue
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in section [{section}]")
        assignments.append((lineno, section, key, value))

    if preset_name is not None:
        lineno, name = preset_name
        try:
            config = preset_config(name)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    else:
        config = base if base is not None else ExperimentConfig()

    updates: dict[str, object] = {}
    for lineno, section, key, value in assignments:
        converter = _SCHEMA[section][key]
        try:
            updates[key] = converter(value)  # type: ignore[operator]
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    try:
        return replace(config, **updates)  # type: ignore[arg-type]
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ExperimentConfig:
    """Read and parse a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_text(config: ExperimentConfig) -> str:
    """Serialize a config to the file format; parses back to an equal value."""
    by_section: dict[str, list[str]] = {name: [] for name in _SCHEMA}
    for field in fields(config):
        section = _FIELD_SECTION[field.name]
        value = getattr(config, field.name)
        by_section[section].append(f"{field.name} = {_format_value(value)}")
    chunks = []
    for name, entries in by_section.items():
        chunks.append(f"[{name}]")
        chunks.extend(entries)
        chunks.append("")
    return "\n".join(chunks)
