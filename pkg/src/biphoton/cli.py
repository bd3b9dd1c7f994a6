"""Command-line front end.

Each subcommand simulates an acquisition (or loads a tag file), runs the
requested analysis and writes CSV artifacts plus ``key = value`` summary
lines. Outputs contain no timestamps, so a given (config, seed) pair always
produces byte-identical files.

Exit codes: 0 on success, 2 for configuration problems, 3 for analysis
failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .config import (
    PRESET_NAMES,
    ConfigError,
    ExperimentConfig,
    config_text,
    load_config,
    preset_config,
)
from .correlator import (
    AnalysisError,
    CorrelationHistogram,
    G2Result,
    coincidence_metrics,
    cross_correlation_histogram,
    heralded_autocorrelation,
    normalized_g2,
    window_sweep,
    write_fasel_csv,
    write_histogram_csv,
)
from .fitting import FitResult, fit_double_exponential, fit_symmetric_exponential
from .models import (
    ModelError,
    biphoton_from_linewidths,
    cauchy_schwarz,
    cavity_solve,
    conditioned_from_unconditioned,
    escape_from_heralding,
    g2_power_model,
    rate_budget,
    two_sided_capture,
)
from .simulator import simulate_source
from .tagstream import FormatError, TagStream, TagStreamError, read_tags, write_tags

__all__ = ["main"]


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.8g}"
    return str(value)


def _emit(lines: list[tuple[str, object]], dest_path: str | None = None) -> None:
    text = "\n".join(f"{key} = {_fmt(value)}" for key, value in lines) + "\n"
    sys.stdout.write(text)
    if dest_path is not None:
        _atomic_write_text(dest_path, text)


def _atomic_write_text(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write(path: str, writer) -> None:
    """Run ``writer(file)`` against a temp file, then move it into place."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer(fh)
    os.replace(tmp, path)


def _out_dir(cfg: ExperimentConfig, args: argparse.Namespace) -> str:
    out = args.out if args.out else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    return out


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = preset_config(getattr(args, "preset", "reference"))
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _obtain_stream(
    cfg: ExperimentConfig, args: argparse.Namespace, **source_overrides: object
) -> tuple[TagStream, float]:
    """Simulate per config, or load ``--tags`` if given. Returns the stream
    and the acquisition duration in seconds."""
    tags_path = getattr(args, "tags", None)
    if tags_path:
        stream = read_tags(tags_path)
        return stream, stream.span_ps * 1e-12
    source = cfg.make_source(**source_overrides)
    return simulate_source(source, cfg.duration_s, cfg.seed), cfg.duration_s


def _provenance(cfg: ExperimentConfig, args: argparse.Namespace) -> list[tuple[str, object]]:
    origin = args.config if getattr(args, "config", None) else getattr(args, "preset", "reference")
    return [("config", origin), ("seed", cfg.seed)]


def _fit_lines(fit: FitResult, prefix: str = "fit_") -> list[tuple[str, object]]:
    lines: list[tuple[str, object]] = [
        (prefix + "model", fit.model),
        (prefix + "converged", fit.converged),
        (prefix + "iterations", fit.iterations),
    ]
    for name in fit.names:
        lines.append((prefix + name, fit.param(name)))
        lines.append((prefix + name + "_err", fit.error(name)))
    lines.append((prefix + "fwhm_ns", fit.fwhm_s() * 1e9))
    return lines


def _xcorr_analysis(
    cfg: ExperimentConfig, stream: TagStream
) -> tuple[CorrelationHistogram, FitResult, G2Result, float, float]:
    """Histogram, peak fit, windowed g2 and the zero-delay estimate.

    The zero-delay value divides the fitted peak amplitude by the counted
    accidental floor instead of the fitted one; with few counts per floor bin
    the Poisson-weighted fit biases its floor low, the counted mean does not.
    """
    hist = cross_correlation_histogram(
        stream,
        cfg.herald_channel,
        cfg.signal_channel,
        cfg.bin_ps,
        cfg.tau_range_ps,
        workers=cfg.workers,
    )
    fit = fit_double_exponential(hist)
    center = int(round(fit.param("tau0_s") * 1e12)) if fit.converged else None
    g2 = normalized_g2(hist, cfg.window_ps, center_ps=center, floor_region_ps=cfg.floor_region_ps)
    if fit.converged and g2.floor_per_bin > 0:
        g2_zero = 1.0 + fit.param("amplitude") / g2.floor_per_bin
        g2_zero_err = (g2_zero - 1.0) * fit.error("amplitude") / fit.param("amplitude")
    else:
        g2_zero = float("nan")
        g2_zero_err = float("nan")
    return hist, fit, g2, g2_zero, g2_zero_err


def _autocorr_analysis(
    cfg: ExperimentConfig, stream: TagStream, channel_a: int, channel_b: int
) -> tuple[CorrelationHistogram, FitResult, G2Result]:
    hist = cross_correlation_histogram(
        stream, channel_a, channel_b, cfg.bin_ps, cfg.tau_range_ps, workers=cfg.workers
    )
    fit = fit_symmetric_exponential(hist)
    center = int(round(fit.param("tau0_s") * 1e12)) if fit.converged else 0
    g2 = normalized_g2(hist, cfg.window_ps, center_ps=center, floor_region_ps=cfg.floor_region_ps)
    return hist, fit, g2


def cmd_simulate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    stream, duration_s = _obtain_stream(cfg, args)
    path = os.path.join(out, "tags.bin")
    tmp = path + ".tmp"
    write_tags(stream, tmp)
    os.replace(tmp, path)
    lines = _provenance(cfg, args)
    lines += [("duration_s", duration_s), ("tags", len(stream)), ("tag_file", path)]
    for channel, label in sorted(stream.channel_labels.items()):
        count = stream.count(channel)
        lines.append((f"count_{label}", count))
        lines.append((f"rate_{label}_hz", count / duration_s))
    _emit(lines)
    return 0


def cmd_xcorr(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    stream, duration_s = _obtain_stream(cfg, args)
    hist, fit, g2, g2_zero, g2_zero_err = _xcorr_analysis(cfg, stream)
    csv_path = os.path.join(out, "cross_correlation.csv")
    _atomic_write(csv_path, lambda fh: write_histogram_csv(hist, fh))
    lines = _provenance(cfg, args)
    lines += [("duration_s", duration_s), ("tags", len(stream)), ("histogram", csv_path)]
    lines += _fit_lines(fit)
    lines += [
        ("window_ns", cfg.window_ns),
        ("g2", g2.value),
        ("g2_err", g2.uncertainty),
        ("g2_zero", g2_zero),
        ("g2_zero_err", g2_zero_err),
    ]
    _emit(lines, os.path.join(out, "xcorr_summary.txt"))
    return 0


def cmd_autocorr(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    stream, duration_s = _obtain_stream(cfg, args)
    hist, fit, g2 = _autocorr_analysis(cfg, stream, cfg.signal_channel, cfg.partner_channel)
    csv_path = os.path.join(out, "auto_correlation.csv")
    _atomic_write(csv_path, lambda fh: write_histogram_csv(hist, fh))
    lines = _provenance(cfg, args)
    lines += [("duration_s", duration_s), ("tags", len(stream)), ("histogram", csv_path)]
    lines += _fit_lines(fit)
    lines += [
        ("window_ns", cfg.window_ns),
        ("g2", g2.value),
        ("g2_err", g2.uncertainty),
        ("g2_zero", fit.g2_zero()),
        ("g2_zero_err", fit.error("contrast")),
    ]
    _emit(lines, os.path.join(out, "autocorr_summary.txt"))
    return 0


def _zero_order_index(orders) -> int:
    for index, order in enumerate(orders):
        if order == 0:
            return index
    raise AnalysisError("order histogram lacks the zero entry")


def cmd_heralded(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    stream, duration_s = _obtain_stream(cfg, args)
    heralded = heralded_autocorrelation(
        stream,
        cfg.herald_channel,
        cfg.signal_channel,
        cfg.partner_channel,
        cfg.window_ps,
        n_max=cfg.n_max,
    )
    csv_path = os.path.join(out, "heralded_orders.csv")
    _atomic_write(csv_path, lambda fh: write_fasel_csv(heralded.histogram, fh))
    hist = heralded.histogram
    zero_index = _zero_order_index(hist.orders)
    others = (hist.counts.sum() - hist.counts[zero_index]) / (len(hist.counts) - 1)
    lines = _provenance(cfg, args)
    lines += [
        ("duration_s", duration_s),
        ("heralds", hist.herald_count),
        ("window_ns", cfg.window_ns),
        ("orders", csv_path),
        ("h0", int(hist.counts[zero_index])),
        ("h_other_mean", others),
        ("g2_iss", heralded.value),
        ("g2_iss_err", heralded.uncertainty),
    ]
    _emit(lines, os.path.join(out, "heralded_summary.txt"))
    return 0


def cmd_metrics(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    stream, duration_s = _obtain_stream(cfg, args)
    met = coincidence_metrics(
        stream,
        cfg.herald_channel,
        cfg.signal_channel,
        cfg.window_ps,
        eta_det_s=cfg.detector_a_efficiency,
    )
    slope = met.coincidence_rate_hz / cfg.pump_mw
    bandwidth = biphoton_from_linewidths(
        cfg.signal_linewidth_mhz * 1e6, cfg.idler_linewidth_mhz * 1e6
    ).bandwidth_hz
    budget = rate_budget(
        slope,
        cfg.transmission_s,
        cfg.detector_a_efficiency,
        cfg.transmission_i * cfg.idler_filter_transmission,
        cfg.detector_i_efficiency,
        cfg.budget_escape_s,
        cfg.budget_escape_i,
        bandwidth,
        cfg.window_ps * 1e-12,
    )
    lines = _provenance(cfg, args)
    lines += [
        ("duration_s", duration_s),
        ("window_ns", cfg.window_ns),
        ("herald_count", met.herald_count),
        ("signal_count", met.signal_count),
        ("herald_rate_hz", met.herald_rate_hz),
        ("signal_rate_hz", met.signal_rate_hz),
        ("coincidence_count", met.coincidence_count),
        ("coincidence_rate_hz", met.coincidence_rate_hz),
        ("accidental_rate_hz", met.accidental_rate_hz),
        ("heralding_efficiency", met.heralding_efficiency),
        ("heralding_efficiency_corrected", met.heralding_efficiency_corrected),
        ("coincidence_slope_hz_per_mw", slope),
        ("created_per_s_mw", budget.created_per_s_mw),
        ("spectral_brightness_per_s_mw_mhz", budget.spectral_brightness_per_s_mw_mhz),
        ("creation_prob_per_mw", budget.creation_prob_per_mw),
    ]
    _emit(lines, os.path.join(out, "metrics.txt"))
    return 0


def _model_g2_si(cfg: ExperimentConfig, pump_mw: float) -> float:
    """Loss-chain prediction for the windowed cross-correlation, with the
    side modes diluting the singles but not the coincidence window."""
    weights = cfg.mode_weights
    window_s = cfg.window_ps * 1e-12
    eta_s = cfg.escape_s * cfg.transmission_s * cfg.detector_a_efficiency
    eta_i = (
        cfg.escape_i
        * cfg.transmission_i
        * cfg.idler_filter_transmission
        * cfg.detector_i_efficiency
    )
    scale_s = sum(weights) / weights[0]
    scale_i = (
        weights[0] + cfg.idler_filter_extinction * (sum(weights) - weights[0])
    ) / weights[0]
    return g2_power_model(
        cfg.creation_prob_per_mw,
        pump_mw,
        eta_s,
        eta_i,
        dark_prob_s=cfg.detector_a_dark_hz * window_s,
        dark_prob_i=cfg.detector_i_dark_hz * window_s,
        window_factor=two_sided_capture(
            cfg.signal_linewidth_mhz * 1e6, cfg.idler_linewidth_mhz * 1e6, window_s
        ),
        singles_scale_s=scale_s,
        singles_scale_i=scale_i,
    )


def cmd_sweep_power(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)

    def run_point(index: int) -> tuple:
        pump = cfg.powers_mw[index]
        seed = cfg.seed * 10007 + 2 * index
        # coincidence arrangement: the full signal arm on detector A
        source_x = cfg.make_source(pump_mw=pump, splitter_ratio=1.0)
        stream_x = simulate_source(source_x, cfg.point_duration_s, seed)
        hist = cross_correlation_histogram(
            stream_x, cfg.herald_channel, cfg.signal_channel, cfg.bin_ps, cfg.tau_range_ps
        )
        g2 = normalized_g2(hist, cfg.window_ps, center_ps=0, floor_region_ps=cfg.floor_region_ps)
        met = coincidence_metrics(
            stream_x,
            cfg.herald_channel,
            cfg.signal_channel,
            cfg.window_ps,
            eta_det_s=cfg.detector_a_efficiency,
        )
        # heralded arrangement: signal arm split 50/50
        source_h = cfg.make_source(pump_mw=pump, splitter_ratio=0.5)
        stream_h = simulate_source(source_h, cfg.point_duration_s, seed + 1)
        heralded = heralded_autocorrelation(
            stream_h,
            cfg.herald_channel,
            cfg.signal_channel,
            cfg.partner_channel,
            cfg.window_ps,
            n_max=cfg.n_max,
        )
        return (
            pump,
            met.coincidence_count,
            met.coincidence_rate_hz,
            met.heralding_efficiency,
            g2.value,
            g2.uncertainty,
            _model_g2_si(cfg, pump),
            heralded.value,
            heralded.uncertainty,
        )

    indices = range(len(cfg.powers_mw))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(run_point, indices))
    else:
        rows = [run_point(i) for i in indices]

    csv_path = os.path.join(out, "power_sweep.csv")

    def write(fh) -> None:
        fh.write(
            "power_mw,coincidences,coincidence_rate_hz,eta_h,"
            "g2_si,g2_si_err,g2_si_model,g2_iss,g2_iss_err\n"
        )
        for row in rows:
            pump, count, rate, eta_h, g2v, g2e, g2m, gissv, gisse = row
            fh.write(
                f"{_fmt(pump)},{count},{_fmt(rate)},{_fmt(eta_h)},"
                f"{_fmt(g2v)},{_fmt(g2e)},{_fmt(g2m)},{_fmt(gissv)},{_fmt(gisse)}\n"
            )

    _atomic_write(csv_path, write)
    lines = _provenance(cfg, args)
    lines += [
        ("point_duration_s", cfg.point_duration_s),
        ("points", len(rows)),
        ("sweep", csv_path),
    ]
    _emit(lines)
    return 0


def cmd_sweep_window(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    stream, duration_s = _obtain_stream(cfg, args)
    windows_ps = [int(round(w * 1000)) for w in cfg.windows_ns]
    points = window_sweep(
        stream,
        cfg.herald_channel,
        cfg.signal_channel,
        windows_ps,
        eta_det_s=cfg.detector_a_efficiency,
        center_ps=0,
        bin_width_ps=cfg.bin_ps,
        floor_region_ps=cfg.floor_region_ps,
        workers=cfg.workers,
    )
    csv_path = os.path.join(out, "window_sweep.csv")

    def write(fh) -> None:
        fh.write("window_ns,coincidences,coincidence_rate_hz,eta_h,g2_si,g2_si_err\n")
        for point in points:
            fh.write(
                f"{_fmt(point.window_ps / 1000)},{point.coincidence_count},"
                f"{_fmt(point.coincidence_rate_hz)},{_fmt(point.heralding_efficiency)},"
                f"{_fmt(point.g2 / cfg.g2_divisor)},{_fmt(point.g2_uncertainty / cfg.g2_divisor)}\n"
            )

    _atomic_write(csv_path, write)
    lines = _provenance(cfg, args)
    lines += [
        ("duration_s", duration_s),
        ("points", len(points)),
        ("g2_divisor", cfg.g2_divisor),
        ("sweep", csv_path),
    ]
    _emit(lines)
    return 0


def cmd_cavity(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)
    solution = cavity_solve(
        cfg.finesse,
        cfg.r_hr,
        cfg.r_oc,
        sigma_finesse=cfg.finesse_err,
        sigma_r_oc=cfg.r_oc_err,
        n_hr=cfg.n_hr,
    )
    # independent estimate from the measured heralding efficiency; the
    # uncorrelated-background fraction bounds it from above
    herald_low = escape_from_heralding(
        cfg.heralding_efficiency, cfg.heralding_transmission, 0.0
    )
    herald_high = escape_from_heralding(
        cfg.heralding_efficiency, cfg.heralding_transmission, cfg.uncorrelated_fraction
    )
    lines = _provenance(cfg, args)
    lines += [
        ("finesse", solution.finesse),
        ("rho", solution.rho),
        ("internal_loss", solution.internal_loss),
        ("internal_loss_err", solution.sigma_internal_loss),
        ("escape_from_losses", solution.escape_efficiency),
        ("escape_from_losses_err", solution.sigma_escape_efficiency),
        ("escape_from_heralding_low", herald_low),
        ("escape_from_heralding_high", herald_high),
    ]
    _emit(lines, os.path.join(out, "cavity.txt"))
    return 0


def cmd_report(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    out = _out_dir(cfg, args)

    # cross-correlation acquisition (full signal arm on detector A)
    stream_x = simulate_source(cfg.make_source(splitter_ratio=1.0), cfg.duration_s, cfg.seed)
    hist_x, fit_x, g2_x, g2_x_zero, g2_x_zero_err = _xcorr_analysis(cfg, stream_x)
    _atomic_write(
        os.path.join(out, "cross_correlation.csv"),
        lambda fh: write_histogram_csv(hist_x, fh),
    )

    # signal autocorrelation + heralded acquisition (signal arm split 50/50)
    stream_s = simulate_source(cfg.make_source(splitter_ratio=0.5), cfg.duration_s, cfg.seed + 1)
    hist_s, fit_s, g2_s = _autocorr_analysis(cfg, stream_s, cfg.signal_channel, cfg.partner_channel)
    _atomic_write(
        os.path.join(out, "auto_correlation_signal.csv"),
        lambda fh: write_histogram_csv(hist_s, fh),
    )
    heralded = heralded_autocorrelation(
        stream_s,
        cfg.herald_channel,
        cfg.signal_channel,
        cfg.partner_channel,
        cfg.window_ps,
        n_max=cfg.n_max,
    )
    _atomic_write(
        os.path.join(out, "heralded_orders.csv"),
        lambda fh: write_fasel_csv(heralded.histogram, fh),
    )

    # idler autocorrelation runs in its own role-swapped arrangement
    cfg_ii = replace(
        preset_config("idler-autocorr"), duration_s=cfg.duration_s, seed=cfg.seed + 2
    )
    stream_i = simulate_source(cfg_ii.make_source(), cfg_ii.duration_s, cfg_ii.seed)
    hist_i, fit_i, g2_i = _autocorr_analysis(cfg_ii, stream_i, cfg_ii.signal_channel, cfg_ii.partner_channel)
    _atomic_write(
        os.path.join(out, "auto_correlation_idler.csv"),
        lambda fh: write_histogram_csv(hist_i, fh),
    )

    g2_ss_zero = fit_s.g2_zero()
    g2_ii_zero = fit_i.g2_zero()
    r_window = cauchy_schwarz(
        g2_x.value, g2_s.value, g2_i.value,
        g2_x.uncertainty, g2_s.uncertainty, g2_i.uncertainty,
    )
    r_zero = cauchy_schwarz(
        g2_x_zero, g2_ss_zero, g2_ii_zero,
        g2_x_zero_err, fit_s.error("contrast"), fit_i.error("contrast"),
    )
    iss_zero_model = conditioned_from_unconditioned(g2_ss_zero, g2_ii_zero, g2_x_zero)

    lines = _provenance(cfg, args)
    lines += [
        ("duration_s", cfg.duration_s),
        ("window_ns", cfg.window_ns),
        ("g2_si_window", g2_x.value),
        ("g2_si_window_err", g2_x.uncertainty),
        ("g2_si_zero", g2_x_zero),
        ("g2_si_zero_err", g2_x_zero_err),
        ("g2_ss_window", g2_s.value),
        ("g2_ss_window_err", g2_s.uncertainty),
        ("g2_ss_zero", g2_ss_zero),
        ("g2_ss_zero_err", fit_s.error("contrast")),
        ("g2_ii_window", g2_i.value),
        ("g2_ii_window_err", g2_i.uncertainty),
        ("g2_ii_zero", g2_ii_zero),
        ("g2_ii_zero_err", fit_i.error("contrast")),
        ("r_window", r_window[0]),
        ("r_window_err", r_window[1]),
        ("r_zero", r_zero[0]),
        ("r_zero_err", r_zero[1]),
        ("g2_iss_window", heralded.value),
        ("g2_iss_window_err", heralded.uncertainty),
        ("g2_iss_zero_model", iss_zero_model),
    ]
    summary = "\n".join(f"{key} = {_fmt(value)}" for key, value in lines)
    summary += "\n\n# full configuration\n" + config_text(cfg)
    sys.stdout.write(summary if summary.endswith("\n") else summary + "\n")
    _atomic_write_text(os.path.join(out, "summary.txt"), summary)
    return 0


_COMMANDS = {
    "simulate": (cmd_simulate, False),
    "xcorr": (cmd_xcorr, True),
    "autocorr": (cmd_autocorr, True),
    "heralded": (cmd_heralded, True),
    "metrics": (cmd_metrics, True),
    "sweep-power": (cmd_sweep_power, False),
    "sweep-window": (cmd_sweep_window, True),
    "cavity": (cmd_cavity, False),
    "report": (cmd_report, False),
}

_HELP = {
    "simulate": "generate a tag stream and write it to a binary tag file",
    "xcorr": "signal-idler cross-correlation histogram, peak fit and g2",
    "autocorr": "splitter autocorrelation histogram, fit and windowed g2",
    "heralded": "conditioned autocorrelation of the heralded arm",
    "metrics": "coincidence counts, heralding efficiency and rate budget",
    "sweep-power": "repeat the correlation measurements across pump powers",
    "sweep-window": "coincidence rate, efficiency and g2 versus window width",
    "cavity": "escape efficiency from cavity losses and from heralding",
    "report": "full summary across all measurement arrangements",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biphoton",
        description="simulate and analyze a cavity-enhanced photon-pair source",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (func, accepts_tags) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=_HELP[name])
        sub.add_argument("--config", help="config file (overrides --preset)")
        sub.add_argument(
            "--preset",
            choices=PRESET_NAMES,
            default="reference",
            help="built-in measurement arrangement (default: reference)",
        )
        sub.add_argument("--seed", type=int, help="override the config seed")
        sub.add_argument("--out", help="output directory (default: config out_dir)")
        if accepts_tags:
            sub.add_argument("--tags", help="analyze an existing tag file instead of simulating")
        sub.set_defaults(func=func)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AnalysisError, ModelError, TagStreamError, FormatError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
