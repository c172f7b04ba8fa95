"""Command-line front end: YAML config in, CSV/SVG artifacts out.

Commands
--------
sweep      S-parameter sweep over the analysis band -> sweep.csv,
           metrics.csv, sweep.svg
spectrum   single-tone spectral probe at band center -> spectrum.csv,
           spectrum.svg
modsweep   isolation vs switching frequency -> modsweep.csv, modsweep.svg
linecheck  static delay-line-only two-port sweep with group delay ->
           linecheck_a.csv, linecheck_b.csv, linecheck.svg, linecheck_delay.svg
schedule   expanded four-column control waveforms for one period ->
           schedule.csv, schedule.svg
run        single time-domain burst through the circulator -> run.csv

Every output file begins with a comment header carrying the tool version
and a digest of the configuration that produced it, and contains nothing
time- or host-dependent: rerunning a command on the same config yields
byte-identical files. SVG output is hand-assembled plain text (no plotting
dependency) and is presentation-only; all numbers live in the CSVs.

Exit codes: 0 success, 1 configuration error (including bad command-line
usage), 2 runtime failure. The SDLSIM_THREADS environment variable sets
the worker count for frequency sweeps; results do not depend on it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import warnings as _warnings
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
import yaml

from . import __version__
from .analysis import (
    AnalysisWarning,
    FORWARD_PATHS,
    REVERSE_PATHS,
    group_delay,
    line_sweep,
    metrics,
    modfreq_sweep,
    sparams_sweep,
    spectrum_probe,
)
from .elements import DelayLineSpec, MatchSpec, SwitchSpec, element_from_touchstone
from .engine import build_circulator, run as run_network
from .errors import ConfigError, QuantizationError
from .schedule import ControlSchedule, build_schedule, expanded_controls, validate_schedule
from .signals import dbm_to_amplitude, make_burst
from .touchstone import parse_touchstone

DEFAULT_BAND = (150e6, 160e6, 51)
DEFAULT_IR_LEN = 8192

_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)


@dataclass(frozen=True)
class TouchstoneLineRef:
    """Delay line described by a measured two-port file instead of a spec.

    Duck-compatible with the network builder: it reads .data and .ir_len.
    """

    data: object
    ir_len: int
    path: str


@dataclass
class CirculatorConfig:
    """Fully validated run configuration, the unit every command consumes."""

    sample_rate: float
    line_a: object
    line_b: object
    switch: SwitchSpec
    schedule: ControlSchedule
    matching: object = None
    drive_dbm: float = -10.0
    iso_threshold_db: float = 27.0
    settle_periods: int = 10
    measure_periods: int = 4
    spectrum_window_periods: int = 16
    band: tuple[float, float, int] = DEFAULT_BAND
    fmod_values: tuple[float, ...] = ()
    digest: str = ""
    source: str = ""
    warnings: tuple[str, ...] = field(default=())


def _get_float(section: dict, key: str, default, problems: list[str], where: str):
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        problems.append(f"{where}.{key}: expected a number, got {value!r}")
        return default if isinstance(default, float) else None


def _get_int(section: dict, key: str, default: int, problems: list[str], where: str) -> int:
    value = section.get(key, default)
    try:
        out = int(value)
        if out != float(value):
            raise ValueError
        return out
    except (TypeError, ValueError):
        problems.append(f"{where}.{key}: expected an integer, got {value!r}")
        return default


def _parse_line(raw, name: str, base_dir: Path, sample_rate, problems: list[str]):
    """One delay line: inline physical spec or a measured-file reference."""
    if not isinstance(raw, dict):
        problems.append(f"{name}: expected a mapping, got {type(raw).__name__}")
        return None
    if "touchstone" in raw:
        rel = raw["touchstone"]
        ir_len = _get_int(raw, "ir_len", DEFAULT_IR_LEN, problems, name)
        path = (base_dir / rel).resolve()
        try:
            data = parse_touchstone(path.read_text())
        except OSError as err:
            problems.append(f"{name}: cannot read {rel}: {err}")
            return None
        except ValueError as err:
            problems.append(f"{name}: {rel}: {err}")
            return None
        return TouchstoneLineRef(data=data, ir_len=ir_len, path=str(path))

    fields = {}
    for key, default in (
        ("tau", None),
        ("il_db", 4.0),
        ("f_center", 155e6),
        ("bandwidth", 30e6),
        ("band_order", 2),
        ("port_return_db", 15.0),
    ):
        if key == "band_order":
            fields[key] = _get_int(raw, key, 2, problems, name)
        else:
            value = _get_float(raw, key, default, problems, name)
            if key == "tau" and value is None:
                problems.append(f"{name}.tau: missing required key (line delay in seconds)")
                return None
            fields[key] = value
    if fields["port_return_db"] is None:
        fields["port_return_db"] = math.inf
    echoes = raw.get("echoes", ())
    parsed_echoes = []
    for item in echoes:
        try:
            k, level = item
            parsed_echoes.append((int(k), float(level)))
        except (TypeError, ValueError):
            problems.append(f"{name}.echoes: expected [k, level_db] pairs, got {item!r}")
    fields["echoes"] = tuple(parsed_echoes)
    unknown = set(raw) - set(fields) - {"echoes"}
    if unknown:
        problems.append(f"{name}: unknown keys {sorted(unknown)}")
    try:
        spec = DelayLineSpec(**fields)
    except (ValueError, TypeError) as err:
        problems.append(f"{name}: {err}")
        return None
    if sample_rate is not None and sample_rate <= 2.0 * spec.f_center:
        problems.append(
            f"sample_rate {sample_rate:.6g} Hz is below the Nyquist limit for the"
            f" {name} center frequency {spec.f_center:.6g} Hz"
        )
    return spec


def _parse_switch(raw, problems: list[str]) -> SwitchSpec:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        problems.append(f"switch: expected a mapping, got {type(raw).__name__}")
        raw = {}
    fields = {
        "il_on_db": _get_float(raw, "il_on_db", 0.8, problems, "switch"),
        "iso_off_db": _get_float(raw, "iso_off_db", 30.0, problems, "switch"),
        "t_transition": _get_float(raw, "t_transition", 2e-9, problems, "switch"),
        "gamma_off": _get_float(raw, "gamma_off", 0.9, problems, "switch"),
    }
    unknown = set(raw) - set(fields)
    if unknown:
        problems.append(f"switch: unknown keys {sorted(unknown)}")
    try:
        return SwitchSpec(**fields)
    except (ValueError, TypeError) as err:
        problems.append(f"switch: {err}")
        return SwitchSpec()


def _parse_matching(raw, problems: list[str]):
    if raw is None:
        return None

    def one(entry, where):
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected a mapping with series_l and shunt_c")
            return None
        kwargs = {
            "series_l": _get_float(entry, "series_l", None, problems, where),
            "shunt_c": _get_float(entry, "shunt_c", None, problems, where),
        }
        if kwargs["series_l"] is None or kwargs["shunt_c"] is None:
            problems.append(f"{where}: series_l and shunt_c are both required")
            return None
        for key in ("orientation",):
            if key in entry:
                kwargs[key] = entry[key]
        for key in ("z0", "f0"):
            if key in entry:
                kwargs[key] = _get_float(entry, key, None, problems, where)
        try:
            return MatchSpec(**kwargs)
        except (ValueError, TypeError) as err:
            problems.append(f"{where}: {err}")
            return None

    if isinstance(raw, list):
        if len(raw) != 4:
            problems.append(f"matching: expected one network or exactly four, got {len(raw)}")
            return None
        specs = [one(entry, f"matching[{i}]") for i, entry in enumerate(raw)]
        return None if any(s is None for s in specs) else tuple(specs)
    return one(raw, "matching")


def _parse_band(raw, sample_rate, problems: list[str]) -> tuple[float, float, int]:
    if raw is None:
        return DEFAULT_BAND
    if not isinstance(raw, dict):
        problems.append("analysis.band: expected a mapping with start, stop, points")
        return DEFAULT_BAND
    start = _get_float(raw, "start", DEFAULT_BAND[0], problems, "analysis.band")
    stop = _get_float(raw, "stop", DEFAULT_BAND[1], problems, "analysis.band")
    points = _get_int(raw, "points", DEFAULT_BAND[2], problems, "analysis.band")
    if start is None or stop is None or not start < stop:
        problems.append("analysis.band: start must be below stop")
        return DEFAULT_BAND
    if points < 2:
        problems.append("analysis.band: points must be at least 2")
        points = DEFAULT_BAND[2]
    if sample_rate is not None and sample_rate <= 2.0 * stop:
        problems.append(
            f"sample_rate {sample_rate:.6g} Hz is below the Nyquist limit for the"
            f" analysis band stop {stop:.6g} Hz"
        )
    return (start, stop, points)


def load_config(path) -> CirculatorConfig:
    """Parse and validate a YAML circulator configuration.

    All violations are collected and reported in a single ConfigError so a
    broken file can be fixed in one pass. Schedule/line-delay mismatches
    within physics but outside the transition window are not errors; they
    are returned as warnings on the config.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse config {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")

    problems: list[str] = []
    warn_list: list[str] = []

    if "sample_rate" not in raw:
        problems.append("sample_rate: missing required key (samples per second)")
    fs = _get_float(raw, "sample_rate", None, problems, "config")
    if fs is not None and fs <= 0:
        problems.append(f"sample_rate must be positive, got {fs:.6g}")
        fs = None

    lines = {}
    for name in ("line_a", "line_b"):
        if name not in raw:
            problems.append(f"{name}: missing required key (delay line description)")
            lines[name] = None
        else:
            lines[name] = _parse_line(raw[name], name, p.parent, fs, problems)

    switch = _parse_switch(raw.get("switch"), problems)

    sched_raw = raw.get("schedule")
    schedule = None
    if not isinstance(sched_raw, dict):
        problems.append("schedule: missing required section (period, duty)")
    else:
        if "period" not in sched_raw:
            problems.append("schedule.period: missing required key (commutation period in seconds)")
        period = _get_float(sched_raw, "period", None, problems, "schedule")
        duty = _get_float(sched_raw, "duty", 0.5, problems, "schedule")
        side_offset = _get_float(sched_raw, "side_offset", None, problems, "schedule")
        if fs is not None and period is not None:
            try:
                schedule = build_schedule(period, switch.t_transition, duty, fs, side_offset)
            except (QuantizationError, ConfigError) as err:
                problems.append(f"schedule: {err}")

    matching = _parse_matching(raw.get("matching"), problems)

    analysis_raw = raw.get("analysis") or {}
    if not isinstance(analysis_raw, dict):
        problems.append("analysis: expected a mapping")
        analysis_raw = {}
    drive_dbm = _get_float(analysis_raw, "drive_dbm", -10.0, problems, "analysis")
    iso_threshold = _get_float(analysis_raw, "iso_threshold_db", 27.0, problems, "analysis")
    settle = _get_int(analysis_raw, "settle_periods", 10, problems, "analysis")
    measure = _get_int(analysis_raw, "measure_periods", 4, problems, "analysis")
    window = _get_int(analysis_raw, "spectrum_window_periods", 16, problems, "analysis")
    band = _parse_band(analysis_raw.get("band"), fs, problems)
    fmod_values = tuple(
        float(v) for v in analysis_raw.get("fmod_values", ()) if isinstance(v, (int, float))
    )
    if len(fmod_values) != len(analysis_raw.get("fmod_values", ())):
        problems.append("analysis.fmod_values: expected a list of frequencies in Hz")
    if settle < 0:
        problems.append("analysis.settle_periods must be >= 0")
    if measure < 1:
        problems.append("analysis.measure_periods must be >= 1")

    if problems:
        raise ConfigError(
            f"invalid configuration {path}:\n  - " + "\n  - ".join(problems)
        )

    # Physics warnings, not errors: commutation offset vs actual line delay.
    for name in ("line_a", "line_b"):
        spec = lines[name]
        if isinstance(spec, DelayLineSpec) and schedule is not None:
            report = validate_schedule(schedule, spec.tau)
            for msg in report.messages:
                warn_list.append(f"{name}: {msg}")

    digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str).encode()
    ).hexdigest()[:16]

    return CirculatorConfig(
        sample_rate=fs,
        line_a=lines["line_a"],
        line_b=lines["line_b"],
        switch=switch,
        schedule=schedule,
        matching=matching,
        drive_dbm=drive_dbm,
        iso_threshold_db=iso_threshold,
        settle_periods=settle,
        measure_periods=measure,
        spectrum_window_periods=window,
        band=band,
        fmod_values=fmod_values,
        digest=digest,
        source=str(p),
        warnings=tuple(warn_list),
    )


def _fmt(x) -> str:
    return f"{float(x):.12g}"


def _write_text(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _csv_header(config: CirculatorConfig, command: str) -> list[str]:
    return [f"# sdlsim {__version__}", f"# config {config.digest}", f"# command {command}"]


def _svg_header(config: CirculatorConfig, command: str) -> list[str]:
    return [
        f"<!-- sdlsim {__version__} -->",
        f"<!-- config {config.digest} -->",
        f"<!-- command {command} -->",
    ]


def _segments(xs, ys):
    """Split a trace at non-finite samples so polylines stay well formed."""
    seg, out = [], []
    for x, y in zip(xs, ys):
        if math.isfinite(x) and math.isfinite(y):
            seg.append((x, y))
        elif seg:
            out.append(seg)
            seg = []
    if seg:
        out.append(seg)
    return out


def write_svg(
    path: Path,
    config: CirculatorConfig,
    command: str,
    title: str,
    xlabel: str,
    ylabel: str,
    series: list[tuple[str, list[float], list[float]]],
    width: int = 720,
    height: int = 432,
) -> None:
    """Minimal deterministic line chart. Data of record lives in the CSVs."""
    left, right, top, bottom = 72, 18, 30, 46
    pw, ph = width - left - right, height - top - bottom
    finite_x = [x for _, xs, ys in series for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    finite_y = [y for _, xs, ys in series for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    x_lo, x_hi = (min(finite_x), max(finite_x)) if finite_x else (0.0, 1.0)
    y_lo, y_hi = (min(finite_y), max(finite_y)) if finite_y else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    out = _svg_header(config, command)
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">'
    )
    out.append(f'<rect width="{width}" height="{height}" fill="#ffffff"/>')
    out.append(
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444444"/>'
    )
    for i in range(5):
        fx = x_lo + i * (x_hi - x_lo) / 4
        fy = y_lo + i * (y_hi - y_lo) / 4
        px, py = sx(fx), sy(fy)
        out.append(
            f'<line x1="{px:.2f}" y1="{top}" x2="{px:.2f}" y2="{top + ph}"'
            f' stroke="#dddddd"/>'
        )
        out.append(
            f'<line x1="{left}" y1="{py:.2f}" x2="{left + pw}" y2="{py:.2f}"'
            f' stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{px:.2f}" y="{top + ph + 16}" text-anchor="middle">{fx:.6g}</text>'
        )
        out.append(
            f'<text x="{left - 6}" y="{py + 4:.2f}" text-anchor="end">{fy:.6g}</text>'
        )
    for k, (label, xs, ys) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        for seg in _segments(xs, ys):
            pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in seg)
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(
            f'<text x="{left + pw - 6}" y="{top + 16 + 14 * k}" text-anchor="end"'
            f' fill="{color}">{escape(str(label))}</text>'
        )
    out.append(
        f'<text x="{(left + width - right) / 2:.1f}" y="{top - 10}"'
        f' text-anchor="middle">{escape(title)}</text>'
    )
    out.append(
        f'<text x="{(left + width - right) / 2:.1f}" y="{height - 8}"'
        f' text-anchor="middle">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="14" y="{(top + height - bottom) / 2:.1f}" text-anchor="middle"'
        f' transform="rotate(-90 14 {(top + height - bottom) / 2:.1f})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    _write_text(path, out)


def _band_frequencies(config: CirculatorConfig, overrides: dict) -> np.ndarray:
    start = overrides.get("freq_start") or config.band[0]
    stop = overrides.get("freq_stop") or config.band[1]
    points = overrides.get("freq_points") or config.band[2]
    if not start < stop:
        raise ConfigError(f"frequency band start {start:.6g} must be below stop {stop:.6g}")
    if points < 2:
        raise ConfigError("frequency band needs at least 2 points")
    return np.linspace(start, stop, int(points))


def _level_db(value: complex) -> float:
    mag = abs(value)
    return -20.0 * math.log10(mag) if mag > 0 else math.inf


def _cmd_sweep(config: CirculatorConfig, out: Path, overrides: dict) -> list[Path]:
    freqs = _band_frequencies(config, overrides)
    grid = sparams_sweep(
        config, freqs, settle=config.settle_periods, measure=config.measure_periods
    )
    for note in grid.warnings:
        print(f"warning: {note}", file=sys.stderr)
    threshold = overrides.get("threshold_db")
    threshold = config.iso_threshold_db if threshold is None else threshold
    m = metrics(grid, threshold)

    lines = _csv_header(config, "sweep")
    cols = ["frequency_hz"]
    for j in range(1, 5):
        for i in range(1, 5):
            cols += [f"s{j}{i}_re", f"s{j}{i}_im"]
    lines.append(",".join(cols))
    for k, f in enumerate(grid.frequencies):
        row = [_fmt(f)]
        for j in range(4):
            for i in range(4):
                row += [_fmt(grid.s[k, j, i].real), _fmt(grid.s[k, j, i].imag)]
        lines.append(",".join(row))
    sweep_csv = out / "sweep.csv"
    _write_text(sweep_csv, lines)

    mlines = _csv_header(config, "sweep") + ["key,value"]
    mlines.append(f"center_frequency_hz,{_fmt(m.center_frequency)}")
    mlines.append(f"bandwidth_hz,{_fmt(m.bandwidth)}")
    mlines.append(f"fractional_bandwidth,{_fmt(m.fbw)}")
    mlines.append(f"iso_threshold_db,{_fmt(m.iso_threshold_db)}")
    for key in sorted(m.il_db):
        mlines.append(f"il_{key}_db,{_fmt(m.il_db[key])}")
    for key in sorted(m.iso_db):
        mlines.append(f"iso_{key}_db,{_fmt(m.iso_db[key])}")
    for key in sorted(m.directivity_db):
        mlines.append(f"directivity_{key}_db,{_fmt(m.directivity_db[key])}")
    for port in sorted(m.rl_db):
        mlines.append(f"rl_port{port}_db,{_fmt(m.rl_db[port])}")
    for flag in m.flags:
        mlines.append(f"flag,{flag}")
    metrics_csv = out / "metrics.csv"
    _write_text(metrics_csv, mlines)

    fmhz = [f / 1e6 for f in grid.frequencies]
    series = []
    for key, (j, i) in sorted(FORWARD_PATHS.items()):
        series.append((f"S{key} fwd", fmhz, [-_level_db(grid.s[k, j, i]) for k in range(len(fmhz))]))
    for key, (j, i) in sorted(REVERSE_PATHS.items()):
        series.append((f"S{key} rev", fmhz, [-_level_db(grid.s[k, j, i]) for k in range(len(fmhz))]))
    svg = out / "sweep.svg"
    write_svg(svg, config, "sweep", "transmission over the analysis band", "frequency / MHz", "|S| / dB", series)

    print(
        f"bandwidth {m.bandwidth / 1e6:.3f} MHz at {m.iso_threshold_db:g} dB isolation,"
        f" worst forward loss {max(m.il_db.values()):.2f} dB"
    )
    return [sweep_csv, metrics_csv, svg]


def _cmd_spectrum(config: CirculatorConfig, out: Path, overrides: dict) -> list[Path]:
    freqs = _band_frequencies(config, overrides)
    f0 = 0.5 * (freqs[0] + freqs[-1])
    rep = spectrum_probe(
        config,
        f0,
        drive_dbm=config.drive_dbm,
        window=config.spectrum_window_periods,
        settle=config.settle_periods,
    )
    lines = _csv_header(config, "spectrum")
    lines.append(f"# f0_hz {_fmt(rep.f0)}")
    lines.append(f"# f_mod_hz {_fmt(rep.f_mod)}")
    lines.append(f"# input_main_dbm {_fmt(rep.input_main_dbm)}")
    lines.append(f"# il_db {_fmt(rep.il_db)}")
    lines.append(f"# iso3_db {_fmt(rep.iso3_db)}")
    lines.append(f"# iso4_db {_fmt(rep.iso4_db)}")
    lines.append("port,order,frequency_hz,power_dbm")
    for port in rep.ports:
        for line in port.lines:
            lines.append(f"{port.port},{line.order},{_fmt(line.frequency)},{_fmt(line.power_dbm)}")
    csv = out / "spectrum.csv"
    _write_text(csv, lines)

    series = []
    for port in rep.ports:
        xs = [line.order for line in port.lines]
        ys = [line.power_dbm for line in port.lines]
        series.append((f"port {port.port}", xs, ys))
    svg = out / "spectrum.svg"
    write_svg(
        svg, config, "spectrum",
        f"output spectra around {f0 / 1e6:.3f} MHz drive",
        "sideband order k (f0 + k fmod)", "power / dBm", series,
    )
    print(
        f"main-tone loss {rep.il_db:.2f} dB, leakage below drive:"
        f" port3 {rep.iso3_db:.2f} dB, port4 {rep.iso4_db:.2f} dB"
    )
    return [csv, svg]


def _default_fmod_grid(config: CirculatorConfig) -> list[float]:
    # 21 period candidates around the configured one, quartet-aligned.
    n0 = config.schedule.period_samples
    ns = [n0 + 40 * k for k in range(-10, 11) if n0 + 40 * k >= 8]
    return sorted(config.sample_rate / n for n in ns)


def _cmd_modsweep(config: CirculatorConfig, out: Path, overrides: dict) -> list[Path]:
    values = overrides.get("fmod")
    if values is None:
        values = list(config.fmod_values) or _default_fmod_grid(config)
    freqs = _band_frequencies(config, overrides)
    f0 = 0.5 * (freqs[0] + freqs[-1])
    points = modfreq_sweep(
        config, values, f0, settle=config.settle_periods, measure=config.measure_periods
    )
    lines = _csv_header(config, "modsweep")
    lines.append("f_mod_hz,f_mod_achieved_hz,il_db,iso_db")
    for pt in points:
        if pt.note:
            print(f"warning: f_mod {pt.f_mod:.6g} Hz skipped: {pt.note}", file=sys.stderr)
        lines.append(
            ",".join([_fmt(pt.f_mod), _fmt(pt.f_mod_achieved), _fmt(pt.il_db), _fmt(pt.iso_db)])
        )
    csv = out / "modsweep.csv"
    _write_text(csv, lines)

    ok = [pt for pt in points if math.isfinite(pt.iso_db)]
    xs = [pt.f_mod_achieved / 1e3 for pt in ok]
    svg = out / "modsweep.svg"
    write_svg(
        svg, config, "modsweep",
        f"isolation vs switching frequency at {f0 / 1e6:.3f} MHz",
        "switching frequency / kHz", "dB",
        [("worst isolation", xs, [pt.iso_db for pt in ok]),
         ("worst insertion loss", xs, [pt.il_db for pt in ok])],
    )
    if ok:
        best = max(ok, key=lambda pt: pt.iso_db)
        print(
            f"best isolation {best.iso_db:.2f} dB at f_mod {best.f_mod_achieved / 1e3:.3f} kHz"
        )
    return [csv, svg]


def _line_grid_rows(grid, delays) -> list[str]:
    rows = []
    cols = ["frequency_hz"]
    for j in (1, 2):
        for i in (1, 2):
            cols += [f"s{j}{i}_re", f"s{j}{i}_im"]
    cols.append("group_delay_s")
    rows.append(",".join(cols))
    for k, f in enumerate(grid.frequencies):
        row = [_fmt(f)]
        for j in range(2):
            for i in range(2):
                row += [_fmt(grid.s[k, j, i].real), _fmt(grid.s[k, j, i].imag)]
        row.append(_fmt(delays[k]))
        rows.append(",".join(row))
    return rows


def _cmd_linecheck(config: CirculatorConfig, out: Path, overrides: dict) -> list[Path]:
    freqs = _band_frequencies(config, overrides)
    written = []
    svg_series, delay_series = [], []
    for tag, line in (("a", config.line_a), ("b", config.line_b)):
        grid = line_sweep(line, config.sample_rate, freqs)
        for note in grid.warnings:
            print(f"warning: line_{tag}: {note}", file=sys.stderr)
        with _warnings.catch_warnings(record=True) as caught:
            _warnings.simplefilter("always", AnalysisWarning)
            delays = [d for _, d in group_delay(grid, path=(2, 1))]
        for w in caught:
            print(f"warning: line_{tag}: {w.message}", file=sys.stderr)
        csv = out / f"linecheck_{tag}.csv"
        _write_text(csv, _csv_header(config, "linecheck") + _line_grid_rows(grid, delays))
        written.append(csv)
        fmhz = [f / 1e6 for f in grid.frequencies]
        svg_series.append(
            (f"line {tag} S21", fmhz, [-_level_db(grid.s[k, 1, 0]) for k in range(len(fmhz))])
        )
        delay_series.append((f"line {tag}", fmhz, [d * 1e9 for d in delays]))
        mid = len(delays) // 2
        print(f"line_{tag}: group delay {delays[mid] * 1e9:.2f} ns at {fmhz[mid]:.3f} MHz")
    svg = out / "linecheck.svg"
    write_svg(svg, config, "linecheck", "delay line transmission", "frequency / MHz", "|S21| / dB", svg_series)
    dsvg = out / "linecheck_delay.svg"
    write_svg(dsvg, config, "linecheck", "delay line group delay", "frequency / MHz", "delay / ns", delay_series)
    return written + [svg, dsvg]


def _cmd_schedule(config: CirculatorConfig, out: Path, overrides: dict) -> list[Path]:
    n = config.schedule.period_samples
    t, controls = expanded_controls(config.schedule, n)
    lines = _csv_header(config, "schedule")
    lines.append(f"# period_samples {n}")
    lines.append(f"# f_mod_hz {_fmt(config.sample_rate / n)}")
    lines.append("time_s,left_bar,left_cross,right_bar,right_cross")
    for k in range(n):
        lines.append(
            ",".join([_fmt(t[k])] + [_fmt(controls[k, c]) for c in range(4)])
        )
    csv = out / "schedule.csv"
    _write_text(csv, lines)

    tus = [tk * 1e9 for tk in t]
    names = ("left bar", "left cross", "right bar", "right cross")
    # Stack traces with a 1.5 offset so the four square waves stay readable.
    series = [
        (names[c], tus, [controls[k, c] + 1.5 * (3 - c) for k in range(n)]) for c in range(4)
    ]
    svg = out / "schedule.svg"
    write_svg(svg, config, "schedule", "crossbar control waveforms, one period", "time / ns", "control (offset)", series)
    print(f"one period = {n} samples ({n / config.sample_rate * 1e6:.4f} us)")
    return [csv, svg]


def _cmd_run(config: CirculatorConfig, out: Path, overrides: dict) -> list[Path]:
    freqs = _band_frequencies(config, overrides)
    f0 = 0.5 * (freqs[0] + freqs[-1])
    period_s = config.schedule.period_samples / config.sample_rate
    stim = make_burst(
        f0,
        dbm_to_amplitude(config.drive_dbm),
        t_start=0.0,
        t_rise=10e-9,
        t_hold=period_s,
        sample_rate=config.sample_rate,
    )
    n = len(stim) + config.schedule.period_samples
    network = build_circulator(config)
    record = run_network(network, [stim, None, None, None], n)

    lines = _csv_header(config, "run")
    lines.append(f"# burst_center_hz {_fmt(f0)}")
    header = ["sample", "time_s"]
    for p in range(1, 5):
        header += [f"p{p}_in", f"p{p}_out"]
    lines.append(",".join(header))
    dt = 1.0 / config.sample_rate
    for k in range(n):
        row = [str(k), _fmt(k * dt)]
        for p in range(4):
            row += [_fmt(record.port_in[p].samples[k]), _fmt(record.port_out[p].samples[k])]
        lines.append(",".join(row))
    csv = out / "run.csv"
    _write_text(csv, lines)

    energy_in = sum(float(np.sum(b.samples**2)) for b in record.port_in)
    energy_out = sum(float(np.sum(b.samples**2)) for b in record.port_out)
    print(f"burst energy in {energy_in:.6g}, out {energy_out:.6g} over {n} samples")
    return [csv]


_COMMANDS = {
    "sweep": _cmd_sweep,
    "spectrum": _cmd_spectrum,
    "modsweep": _cmd_modsweep,
    "linecheck": _cmd_linecheck,
    "schedule": _cmd_schedule,
    "run": _cmd_run,
}


def execute(command: str, config: CirculatorConfig, out_dir, **overrides) -> list[Path]:
    """Run one command against a loaded config, returning the files written."""
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[command](config, out, overrides)


class _Parser(argparse.ArgumentParser):
    # Usage problems are configuration errors: exit code 1, not argparse's 2.
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="sdlsim",
        description="switched-delay-line circulator simulator",
        epilog="SDLSIM_THREADS sets the sweep worker count (results are identical).",
    )
    parser.add_argument("--version", action="version", version=f"sdlsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("sweep", "S-parameter sweep, metrics, and plot over the analysis band"),
        ("spectrum", "single-tone spectral probe at the band center"),
        ("modsweep", "isolation versus switching frequency"),
        ("linecheck", "static delay-line two-port sweep with group delay"),
        ("schedule", "expanded control waveforms for one commutation period"),
        ("run", "time-domain burst through the circulator"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="YAML configuration file")
        cmd.add_argument("--out", default="out", help="output directory (default: out)")
        cmd.add_argument("--freq-start", type=float, help="band start in Hz")
        cmd.add_argument("--freq-stop", type=float, help="band stop in Hz")
        cmd.add_argument("--freq-points", type=int, help="number of sweep points")
        if name == "modsweep":
            cmd.add_argument(
                "--fmod", help="comma-separated switching frequencies in Hz"
            )
        if name == "sweep":
            cmd.add_argument(
                "--threshold-db", type=float, help="isolation threshold for metrics"
            )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    for note in config.warnings:
        print(f"warning: {note}", file=sys.stderr)
    overrides = {
        "freq_start": args.freq_start,
        "freq_stop": args.freq_stop,
        "freq_points": args.freq_points,
    }
    if getattr(args, "threshold_db", None) is not None:
        overrides["threshold_db"] = args.threshold_db
    if getattr(args, "fmod", None) is not None:
        try:
            overrides["fmod"] = [float(v) for v in args.fmod.split(",") if v.strip()]
        except ValueError:
            print(f"config error: cannot parse --fmod {args.fmod!r}", file=sys.stderr)
            return 1
    try:
        written = execute(args.command, config, args.out, **overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # SimulationFault, OSError, numerical failures
        print(f"runtime error: {err}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
