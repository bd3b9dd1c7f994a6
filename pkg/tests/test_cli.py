"""End-to-end command-line behavior: files written, exit codes, determinism."""

import csv
import io

import numpy as np
import pytest

from biphoton.cli import main
from biphoton.config import parse_config
from biphoton.tagstream import TagStream, read_tags, write_tags

LOSSLESS = """\
[source]
escape_s = 1.0
escape_i = 1.0
transmission_s = 1.0
transmission_i = 1.0
idler_filter_transmission = 1.0
detector_a_efficiency = 1.0
detector_a_dark_hz = 0
detector_i_efficiency = 1.0
detector_i_dark_hz = 0
mode_weights = 1.0

[run]
duration_s = 4.0
seed = 31
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="ascii")
    return str(path)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- simulate -----------------------------------------------------------------


def test_simulate_writes_a_readable_tag_file(tmp_path, capsys):
    cfg = _write(tmp_path, "run.cfg", LOSSLESS)
    out = tmp_path / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    stream = read_tags(out / "tags.bin")
    assert len(stream) > 10_000
    assert set(np.unique(stream.channels)) <= {0, 1, 2}
    stdout = capsys.readouterr().out
    assert "tags.bin" in stdout
    assert "idler" in stdout
    assert not list(out.glob("*.tmp"))


def test_seed_flag_overrides_the_config(tmp_path):
    cfg = _write(tmp_path, "run.cfg", LOSSLESS)
    for seed, name in ((9, "a"), (9, "b"), (10, "c")):
        assert main(["simulate", "--config", cfg, "--seed", str(seed),
                     "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "tags.bin").read_bytes()
    b = (tmp_path / "b" / "tags.bin").read_bytes()
    c = (tmp_path / "c" / "tags.bin").read_bytes()
    assert a == b
    assert a != c


def test_out_directory_is_created_deep(tmp_path):
    cfg = _write(tmp_path, "run.cfg", LOSSLESS)
    out = tmp_path / "deep" / "nested" / "dir"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "tags.bin").exists()


# --- analysis on saved tags ------------------------------------------------------


@pytest.fixture(scope="module")
def lossless_tags(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("tags")
    cfg = _write(tmp, "run.cfg", LOSSLESS)
    out = tmp / "sim"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    return cfg, str(out / "tags.bin")


def test_xcorr_on_saved_tags(tmp_path, lossless_tags, capsys):
    cfg, tags = lossless_tags
    out = tmp_path / "x"
    assert main(["xcorr", "--config", cfg, "--tags", tags, "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "g2" in stdout
    rows = _rows(out / "cross_correlation.csv")
    assert set(rows[0]) == {"delay_ns", "counts", "normalized"}
    assert len(rows) == 2200  # 11 us span over 5 ns bins
    summary = (out / "xcorr_summary.txt").read_text(encoding="ascii")
    assert "fit_dnu_fall_hz" in summary
    assert "g2 =" in summary
    assert "g2_zero =" in summary


def test_metrics_on_saved_tags(tmp_path, lossless_tags, capsys):
    cfg, tags = lossless_tags
    out = tmp_path / "m"
    assert main(["metrics", "--config", cfg, "--tags", tags, "--out", str(out)]) == 0
    text = (out / "metrics.txt").read_text(encoding="ascii")
    for key in ("coincidence_slope_hz_per_mw", "created_per_s_mw",
                "spectral_brightness_per_s_mw_mhz", "creation_prob_per_mw",
                "heralding_efficiency"):
        assert key in text
    assert "heralding_efficiency" in capsys.readouterr().out


def test_sweep_window_uses_tags_and_divisor(tmp_path, lossless_tags):
    cfg, tags = lossless_tags
    base = parse_config(open(cfg).read())
    plain = _write(
        tmp_path, "w1.cfg",
        open(cfg).read() + "\n[sweep]\nwindows_ns = 100, 400\n"
    )
    divided = _write(
        tmp_path, "w2.cfg",
        open(cfg).read() + "\n[sweep]\nwindows_ns = 100, 400\ng2_divisor = 5.0\n"
    )
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    assert main(["sweep-window", "--config", plain, "--tags", tags, "--out", str(out1)]) == 0
    assert main(["sweep-window", "--config", divided, "--tags", tags, "--out", str(out2)]) == 0
    rows1 = _rows(out1 / "window_sweep.csv")
    rows2 = _rows(out2 / "window_sweep.csv")
    assert [r["window_ns"] for r in rows1] == ["100", "400"]
    for r1, r2 in zip(rows1, rows2):
        assert r1["coincidences"] == r2["coincidences"]
        assert float(r1["g2_si"]) == pytest.approx(5.0 * float(r2["g2_si"]), rel=1e-6)
    # wider windows catch more pairs
    assert int(rows1[1]["coincidences"]) > int(rows1[0]["coincidences"])
    assert base.window_ns == 400.0


def test_heralded_needs_the_herald_channel(tmp_path):
    no_idler = TagStream([100, 200, 300], [0, 1, 0])
    path = tmp_path / "pairs_only.bin"
    write_tags(no_idler, path)
    cfg = _write(tmp_path, "run.cfg", LOSSLESS)
    rc = main(["heralded", "--config", cfg, "--tags", str(path), "--out", str(tmp_path / "h")])
    assert rc == 3


# --- exit codes ---------------------------------------------------------------------


def test_bad_config_exits_2_with_line_number(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.cfg", "[source]\nboop = 1\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "config error" in err
    assert "line 2" in err


def test_invalid_config_value_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.cfg", "[run]\nduration_s = 0\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "duration" in capsys.readouterr().err


def test_missing_tags_file_exits_3(tmp_path, capsys):
    cfg = _write(tmp_path, "run.cfg", LOSSLESS)
    rc = main(["xcorr", "--config", cfg, "--tags", str(tmp_path / "absent.bin"),
               "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "analysis error" in capsys.readouterr().err


def test_corrupt_tags_file_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a tag file at all")
    cfg = _write(tmp_path, "run.cfg", LOSSLESS)
    rc = main(["xcorr", "--config", cfg, "--tags", str(bad), "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "analysis error" in capsys.readouterr().err


def test_unknown_preset_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--preset", "fastest"])
    assert info.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


# --- sweeps and cavity ------------------------------------------------------------------


def test_power_sweep_csv_and_worker_determinism(tmp_path):
    body = "[sweep]\npowers_mw = 0.5, 1.0\npoint_duration_s = 2.0\n[run]\nseed = 5\n"
    cfg1 = _write(tmp_path, "p1.cfg", body)
    cfg3 = _write(tmp_path, "p3.cfg", body + "[analysis]\nworkers = 3\n")
    out1, out3 = tmp_path / "p1", tmp_path / "p3"
    assert main(["sweep-power", "--config", cfg1, "--out", str(out1)]) == 0
    assert main(["sweep-power", "--config", cfg3, "--out", str(out3)]) == 0
    data = (out1 / "power_sweep.csv").read_bytes()
    assert data == (out3 / "power_sweep.csv").read_bytes()

    rows = _rows(out1 / "power_sweep.csv")
    assert [r["power_mw"] for r in rows] == ["0.5", "1"]
    for row in rows:
        assert float(row["eta_h"]) > 0.05
        assert float(row["g2_si"]) > 10.0
    # stronger pumping lowers the predicted and simulated pair correlation
    assert float(rows[0]["g2_si_model"]) > float(rows[1]["g2_si_model"])
    assert float(rows[0]["g2_si"]) > float(rows[1]["g2_si"])


def test_cavity_report_matches_the_closed_form(tmp_path, capsys):
    cfg = _write(tmp_path, "c.cfg", "[run]\nseed = 1\n")
    out = tmp_path / "cav"
    assert main(["cavity", "--config", cfg, "--out", str(out)]) == 0
    text = (out / "cavity.txt").read_text(encoding="ascii")
    assert f"{0.024060511738431933:.8g}" in text
    assert f"{0.5549337036458876:.8g}" in text
    assert f"{0.28 / 0.71:.8g}" in text
    assert f"{0.28 / (0.71 * 0.9):.8g}" in text
    assert "escape" in capsys.readouterr().out


# --- report ----------------------------------------------------------------------------


def test_report_is_deterministic_and_self_describing(tmp_path):
    cfg_text = "[run]\nduration_s = 4.0\nseed = 7\n"
    cfg = _write(tmp_path, "rep.cfg", cfg_text)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["report", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["report", "--config", cfg, "--out", str(out2)]) == 0

    names = [
        "cross_correlation.csv",
        "auto_correlation_signal.csv",
        "auto_correlation_idler.csv",
        "heralded_orders.csv",
        "summary.txt",
    ]
    for name in names:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    assert not list(out1.glob("*.tmp"))

    summary = (out1 / "summary.txt").read_text(encoding="ascii")
    head, config_part = summary.split("# full configuration\n", 1)
    for key in ("g2_si_window", "g2_ss_window", "g2_ii_window",
                "g2_iss_window", "r_window", "g2_iss_zero_model"):
        assert key in head
    # the embedded configuration reproduces the run inputs exactly
    embedded = parse_config(config_part)
    assert embedded == parse_config(cfg_text)

    orders = _rows(out1 / "heralded_orders.csv")
    assert [int(r["n"]) for r in orders] == list(range(-15, 16))
