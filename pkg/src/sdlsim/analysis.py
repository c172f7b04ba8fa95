"""Steady-state analysis of circulator runs.

S-parameters of the time-varying network are defined as same-frequency
transfer ratios: drive one port with a single tone, wait for the switching
transient to die out, then take the ratio of the output phasor to the
injected phasor at the stimulus frequency. Harmonic-conversion products are
deliberately excluded here and reported only by spectrum_probe.

Measurement windows are integer numbers of schedule periods so that every
intermodulation line lands on the analysis grid. A convergence monitor
compares output power between consecutive periods inside the window and
flags runs that are still settling.

Sweep lanes are independent; SDLSIM_THREADS > 1 splits the frequency list
across worker threads. Results are merged by frequency index and are
byte-identical at any thread count.
"""

from __future__ import annotations

import math
import os
import warnings as _warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .elements import DelayLineSpec
from .engine import _line_element, build_circulator
from .errors import ConfigError, QuantizationError, SimulationFault
from .schedule import ControlSchedule, build_schedule
from .signals import amplitude_to_dbm, dbm_to_amplitude, integer_cycle_length, make_tone

FORWARD_PATHS = {"21": (1, 0), "32": (2, 1), "43": (3, 2), "14": (0, 3)}
REVERSE_PATHS = {"12": (0, 1), "23": (1, 2), "34": (2, 3), "41": (3, 0)}
# Pair key -> (forward path, reverse path) sharing those two ports.
PORT_PAIRS = {"12": ("21", "12"), "23": ("32", "23"), "34": ("43", "34"), "41": ("14", "41")}

DEFAULT_SETTLE_PERIODS = 10
DEFAULT_MEASURE_PERIODS = 4
DEFAULT_ISO_THRESHOLD_DB = 27.0
DEFAULT_DRIVE_DBM = -10.0

_RENORM_MASK = 4095  # rotator magnitude correction cadence
_DRIFT_LIMIT_DB = 0.1


class AnalysisWarning(UserWarning):
    """Non-fatal measurement quality issue."""


@dataclass(frozen=True)
class SParamGrid:
    """Same-frequency scattering ratios on a frequency grid.

    ``s[k, j-1, i-1]`` is the wave out of port j divided by the wave into
    port i at ``frequencies[k]``. Shape is (n, 4, 4) for circulator sweeps
    and (n, 2, 2) for bare delay-line sweeps.
    """

    frequencies: tuple[float, ...]
    s: np.ndarray
    drive_level: float
    schedule_summary: str
    warnings: tuple[str, ...] = ()

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]


@dataclass(frozen=True)
class CirculatorMetrics:
    """Band-level circulator figures extracted from an SParamGrid.

    Losses and isolations are positive dB; directivity is the contrast
    iso - il on each adjacent port pair. Bandwidth is the widest contiguous
    frequency interval where all four reverse paths stay above the
    isolation threshold while all four forward paths carry signal.
    """

    il_db: dict[str, float]
    iso_db: dict[str, float]
    directivity_db: dict[str, float]
    rl_db: dict[int, float]
    center_frequency: float
    bandwidth: float
    fbw: float
    iso_threshold_db: float
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SpectralLine:
    order: int  # harmonic index k relative to the stimulus
    frequency: float
    power_dbm: float


@dataclass(frozen=True)
class PortSpectrum:
    port: int
    main_dbm: float
    lines: tuple[SpectralLine, ...]

    def worst_sideband_dbc(self) -> float:
        side = [ln.power_dbm for ln in self.lines if ln.order != 0]
        if not side:
            return -math.inf
        return max(side) - self.main_dbm


@dataclass(frozen=True)
class SpectrumReport:
    f0: float
    f_mod: float
    drive_dbm: float
    input_main_dbm: float
    ports: tuple[PortSpectrum, ...]
    il_db: float
    iso3_db: float
    iso4_db: float


@dataclass(frozen=True)
class ModFreqPoint:
    """One modulation-frequency sample: worst-path loss and isolation."""

    f_mod: float  # requested value
    il_db: float
    iso_db: float
    f_mod_achieved: float = math.nan
    note: str | None = None


def _thread_count() -> int:
    raw = os.environ.get("SDLSIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _schedule_summary(schedule: ControlSchedule) -> str:
    return (
        f"f_mod={schedule.f_mod:.6f} Hz, period={schedule.period_samples} samples, "
        f"offset={schedule.offset_samples} samples, duty={schedule.duty:g}, "
        f"transition={schedule.t_transition:g} s"
    )


def _check_frequencies(frequencies, sample_rate: float) -> list[float]:
    freqs = [float(f) for f in frequencies]
    if not freqs:
        raise ConfigError("frequency list is empty")
    problems = []
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        problems.append("frequencies must be strictly increasing")
    nyquist = sample_rate / 2.0
    bad = [f for f in freqs if not 0.0 < f < nyquist]
    if bad:
        problems.append(
            f"{len(bad)} frequencies outside the open Nyquist band (0, {nyquist:g}) Hz"
        )
    if problems:
        raise ConfigError("; ".join(problems))
    return freqs


def _check_windows(settle: int, measure: int) -> None:
    if settle != int(settle) or settle < 0:
        raise ConfigError("settle must be a non-negative integer number of periods")
    if measure != int(measure) or measure < 1:
        raise ConfigError("measure must be a positive integer number of periods")


def _sweep_chunk(config, freqs: list[float], a0: float, settle: int, measure: int):
    """Measure a 4x4 S-matrix per frequency; one lane per (frequency, port)."""
    net = build_circulator(config)
    fs = net.sample_rate
    period = net.schedule.period_samples
    n_settle = settle * period
    n_total = n_settle + measure * period
    nf = len(freqs)
    lanes = 4 * nf
    net.reset(lanes=lanes)

    f_lane = np.repeat(np.asarray(freqs, dtype=float), 4)
    p_lane = np.tile(np.arange(4), nf)
    lane_ix = np.arange(lanes)
    omega = 2.0 * math.pi * f_lane / fs
    gen_rot = np.exp(1j * omega)
    gen_cur = np.ones(lanes, dtype=complex)
    det_rot = np.exp(-1j * omega)
    det_cur = np.exp(-1j * omega * n_settle)

    acc_out = np.zeros((4, lanes), dtype=complex)
    acc_in = np.zeros(lanes, dtype=complex)
    block_power = np.zeros((measure, lanes))
    ext = np.zeros((4, lanes))

    for n in range(n_total):
        drive = a0 * gen_cur.real
        ext[p_lane, lane_ix] = drive
        out = net.step(ext)
        if n >= n_settle:
            acc_out += out * det_cur
            acc_in += drive * det_cur
            block_power[(n - n_settle) // period] += np.einsum("pl,pl->l", out, out)
            det_cur *= det_rot
        gen_cur *= gen_rot
        if (n & _RENORM_MASK) == _RENORM_MASK:
            gen_cur /= np.abs(gen_cur)
            if n >= n_settle:
                det_cur /= np.abs(det_cur)
            if not np.all(np.isfinite(out)):
                raise SimulationFault(n)
    if not np.all(np.isfinite(acc_out)):
        raise SimulationFault(n_total - 1)

    s_cols = acc_out / acc_in
    s = np.empty((nf, 4, 4), dtype=complex)
    for k in range(nf):
        s[k] = s_cols[:, 4 * k : 4 * k + 4]

    notes: list[str] = []
    if measure >= 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            drift = 10.0 * np.log10(block_power[1:] / block_power[:-1])
        worst = np.nanmax(np.abs(drift), axis=0, initial=0.0)
        for lane in np.flatnonzero(worst > _DRIFT_LIMIT_DB):
            notes.append(
                f"not settled: output power drifts {worst[lane]:.3f} dB between "
                f"periods at {f_lane[lane] / 1e6:.4f} MHz, drive port {p_lane[lane] + 1}"
            )
    return s, notes


def sparams_sweep(
    config,
    frequencies,
    settle: int = DEFAULT_SETTLE_PERIODS,
    measure: int = DEFAULT_MEASURE_PERIODS,
) -> SParamGrid:
    """Single-tone S-parameter sweep of the full four-port network.

    Drives every port in turn at every frequency (one simulation lane per
    combination, all stepped together), discards `settle` schedule periods,
    and accumulates same-frequency phasors over `measure` periods.
    """
    freqs = _check_frequencies(frequencies, config.sample_rate)
    _check_windows(settle, measure)
    drive_dbm = float(getattr(config, "drive_dbm", DEFAULT_DRIVE_DBM))
    a0 = dbm_to_amplitude(drive_dbm)

    n_workers = min(_thread_count(), len(freqs))
    if n_workers <= 1:
        blocks = [_sweep_chunk(config, freqs, a0, settle, measure)]
    else:
        splits = [list(part) for part in np.array_split(freqs, n_workers) if len(part)]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [
                pool.submit(_sweep_chunk, config, part, a0, settle, measure)
                for part in splits
            ]
            blocks = [f.result() for f in futures]

    s = np.concatenate([b[0] for b in blocks], axis=0)
    notes = tuple(msg for b in blocks for msg in b[1])
    return SParamGrid(
        frequencies=tuple(freqs),
        s=s,
        drive_level=drive_dbm,
        schedule_summary=_schedule_summary(config.schedule),
        warnings=notes,
    )


def group_delay(grid: SParamGrid, path: tuple[int, int] = (2, 1)):
    """Group delay along one path, from central differences of unwrapped phase.

    Returns a list of (frequency, delay_s) pairs. A grid too coarse for the
    phase slope cannot be distinguished from a shorter delay; suspicious
    unwraps raise an AnalysisWarning.
    """
    freqs = np.asarray(grid.frequencies, dtype=float)
    if freqs.size < 2:
        raise ConfigError("group delay needs at least two frequency points")
    out_port, in_port = path
    response = grid.s[:, out_port - 1, in_port - 1]
    phase = np.unwrap(np.angle(response))
    delay = -np.gradient(phase, 2.0 * math.pi * freqs)
    dphi = np.abs(np.diff(phase))
    if np.any(dphi >= 0.95 * math.pi) or np.any(delay < -1e-9):
        _warnings.warn(
            "group delay may be aliased: adjacent phase steps approach pi "
            "(frequency grid too coarse for the delay)",
            AnalysisWarning,
            stacklevel=2,
        )
    return list(zip(freqs.tolist(), delay.tolist()))


def _longest_true_run(mask: np.ndarray) -> tuple[int, int] | None:
    best = None
    start = None
    for k, ok in enumerate(mask):
        if ok and start is None:
            start = k
        if start is not None and (not ok or k == len(mask) - 1):
            end = k if ok else k - 1
            if best is None or end - start > best[1] - best[0]:
                best = (start, end)
            start = None
    return best


def metrics(grid: SParamGrid, iso_threshold_db: float = DEFAULT_ISO_THRESHOLD_DB) -> CirculatorMetrics:
    """Band-level circulator figures at a stated isolation threshold."""
    if grid.n_ports != 4:
        raise ConfigError("metrics needs a four-port grid")
    freqs = np.asarray(grid.frequencies, dtype=float)
    mag = np.abs(grid.s)
    with np.errstate(divide="ignore"):
        level_db = -20.0 * np.log10(mag)

    qualifies = np.ones(len(freqs), dtype=bool)
    for j, i in REVERSE_PATHS.values():
        qualifies &= level_db[:, j, i] > iso_threshold_db
    for j, i in FORWARD_PATHS.values():
        qualifies &= mag[:, j, i] > 0.0

    flags: list[str] = []
    run = _longest_true_run(qualifies)
    if run is None:
        lo, hi = 0, len(freqs) - 1
        bandwidth = 0.0
        flags.append(
            f"no swept frequency meets the {iso_threshold_db:g} dB isolation "
            "threshold on all four reverse paths; statistics cover the full grid"
        )
    else:
        lo, hi = run
        bandwidth = float(freqs[hi] - freqs[lo])
    band = slice(lo, hi + 1)
    center = float((freqs[lo] + freqs[hi]) / 2.0)

    il = {k: float(np.min(level_db[band, j, i])) for k, (j, i) in FORWARD_PATHS.items()}
    iso = {k: float(np.min(level_db[band, j, i])) for k, (j, i) in REVERSE_PATHS.items()}
    rl = {p: float(np.min(level_db[band, p - 1, p - 1])) for p in range(1, 5)}
    directivity = {
        pair: iso[rev] - il[fwd] for pair, (fwd, rev) in PORT_PAIRS.items()
    }
    dead = [k for k, v in il.items() if math.isinf(v)]
    if dead:
        flags.append("no forward transmission on path " + ", ".join(dead))

    return CirculatorMetrics(
        il_db=il,
        iso_db=iso,
        directivity_db=directivity,
        rl_db=rl,
        center_frequency=center,
        bandwidth=bandwidth,
        fbw=bandwidth / center,
        iso_threshold_db=float(iso_threshold_db),
        flags=tuple(flags),
    )


def spectrum_probe(
    config,
    f0: float,
    drive_dbm: float = DEFAULT_DRIVE_DBM,
    window: int = 16,
    k_max: int = 5,
    settle: int = DEFAULT_SETTLE_PERIODS,
) -> SpectrumReport:
    """Single-tone spectral-line report at f0 and its commutation sidebands.

    Drives port 1 and reports, per port, the level at f0 and at
    f0 +/- k*f_mod for k = 1..k_max, plus the main-tone deltas against the
    input (port-2 insertion loss, port-3/4 isolation). The window must span
    at least 16 schedule periods so adjacent lines stay orthogonal.
    """
    net = build_circulator(config)
    fs = net.sample_rate
    period = net.schedule.period_samples
    if window != int(window) or window < 16:
        raise ConfigError(
            f"spectral window of {window} schedule periods cannot resolve the "
            "commutation sidebands; use at least 16"
        )
    _check_frequencies([f0], fs)
    f_mod = fs / period

    n_window = int(window) * period
    n_settle = settle * period
    n_total = n_settle + n_window
    a0 = dbm_to_amplitude(drive_dbm)
    tone = make_tone(f0, a0, 0.0, n_total, fs).samples

    net.reset(lanes=1)
    block = np.empty((4, n_window))
    ext = np.zeros((4, 1))
    for n in range(n_total):
        ext[0, 0] = tone[n]
        out = net.step(ext)
        if n >= n_settle:
            block[:, n - n_settle] = out[:, 0]
        if (n & _RENORM_MASK) == _RENORM_MASK and not np.all(np.isfinite(out)):
            raise SimulationFault(n)
    if not np.all(np.isfinite(block)):
        raise SimulationFault(n_total - 1)

    orders = [k for k in range(-k_max, k_max + 1) if 0.0 < f0 + k * f_mod < fs / 2.0]
    line_f = np.array([f0 + k * f_mod for k in orders])
    sample_ix = n_settle + np.arange(n_window)
    basis = np.exp(-2j * math.pi * np.outer(line_f, sample_ix) / fs)
    c_ports = (2.0 / n_window) * (block @ basis.T)
    c_in = (2.0 / n_window) * (basis @ tone[n_settle:n_total])

    k0 = orders.index(0)
    ports = []
    for p in range(4):
        lines = tuple(
            SpectralLine(order=k, frequency=float(line_f[m]), power_dbm=amplitude_to_dbm(abs(c_ports[p, m])))
            for m, k in enumerate(orders)
        )
        ports.append(PortSpectrum(port=p + 1, main_dbm=amplitude_to_dbm(abs(c_ports[p, k0])), lines=lines))
    input_main = amplitude_to_dbm(abs(c_in[k0]))
    return SpectrumReport(
        f0=float(f0),
        f_mod=f_mod,
        drive_dbm=float(drive_dbm),
        input_main_dbm=input_main,
        ports=tuple(ports),
        il_db=input_main - ports[1].main_dbm,
        iso3_db=input_main - ports[2].main_dbm,
        iso4_db=input_main - ports[3].main_dbm,
    )


def modfreq_sweep(
    config,
    f_mod_values,
    f0: float,
    settle: int = DEFAULT_SETTLE_PERIODS,
    measure: int = DEFAULT_MEASURE_PERIODS,
) -> list[ModFreqPoint]:
    """Loss and worst-path isolation at f0 versus modulation frequency.

    Each requested f_mod is re-quantized onto the sample grid with the
    configured duty and transition time; points that fail quantization are
    reported with a note instead of aborting the sweep. All valid points
    run as parallel lanes of one simulation with per-lane schedules.
    """
    _check_frequencies([f0], config.sample_rate)
    _check_windows(settle, measure)
    base = config.schedule
    results: dict[int, ModFreqPoint] = {}
    valid: list[tuple[int, float, ControlSchedule]] = []
    for ix, fm in enumerate(f_mod_values):
        fm = float(fm)
        if fm <= 0.0:
            results[ix] = ModFreqPoint(fm, math.nan, math.nan, note="modulation frequency must be positive")
            continue
        try:
            sched = build_schedule(1.0 / fm, base.t_transition, base.duty, config.sample_rate)
        except QuantizationError as err:
            results[ix] = ModFreqPoint(fm, math.nan, math.nan, note=str(err))
            continue
        valid.append((ix, fm, sched))

    if valid:
        net = build_circulator(config)
        net.set_lane_schedules([sched for _, _, sched in valid for _ in range(4)])
        lanes = 4 * len(valid)
        net.reset(lanes=lanes)

        periods = np.array([sched.period_samples for _, _, sched in valid for _ in range(4)])
        meas_start = settle * periods
        meas_stop = (settle + measure) * periods
        n_total = int(meas_stop.max())
        p_lane = np.tile(np.arange(4), len(valid))
        lane_ix = np.arange(lanes)

        a0 = dbm_to_amplitude(float(getattr(config, "drive_dbm", DEFAULT_DRIVE_DBM)))
        omega = 2.0 * math.pi * f0 / net.sample_rate
        gen_rot = np.exp(1j * omega)
        gen_cur = np.complex128(1.0)
        det_rot = np.exp(-1j * omega)
        det_cur = np.complex128(1.0)

        acc_out = np.zeros((4, lanes), dtype=complex)
        acc_in = np.zeros(lanes, dtype=complex)
        ext = np.zeros((4, lanes))
        for n in range(n_total):
            drive = a0 * gen_cur.real
            ext[p_lane, lane_ix] = drive
            out = net.step(ext)
            active = (n >= meas_start) & (n < meas_stop)
            if active.any():
                weight = det_cur * active
                acc_out += out * weight
                acc_in += drive * weight
            gen_cur *= gen_rot
            det_cur *= det_rot
            if (n & _RENORM_MASK) == _RENORM_MASK:
                gen_cur /= abs(gen_cur)
                det_cur /= abs(det_cur)
                if not np.all(np.isfinite(out)):
                    raise SimulationFault(n)
        if not np.all(np.isfinite(acc_out)):
            raise SimulationFault(n_total - 1)

        s_cols = acc_out / acc_in
        with np.errstate(divide="ignore"):
            for m, (ix, fm, sched) in enumerate(valid):
                s = s_cols[:, 4 * m : 4 * m + 4]
                il = max(-20.0 * math.log10(abs(s[j, i])) for j, i in FORWARD_PATHS.values())
                iso = min(-20.0 * math.log10(abs(s[j, i])) for j, i in REVERSE_PATHS.values())
                results[ix] = ModFreqPoint(fm, il, iso, f_mod_achieved=sched.f_mod)

    return [results[ix] for ix in sorted(results)]


def line_sweep(
    line,
    sample_rate: float,
    frequencies,
    settle: int = 8192,
    measure: int = 4096,
) -> SParamGrid:
    """Two-port sweep of the configured delay line alone, no switches.

    `line` is a DelayLineSpec or a resolved measured-data reference; settle
    and measure are sample counts here since there is no schedule.
    """
    freqs = _check_frequencies(frequencies, sample_rate)
    element = _line_element(line, sample_rate)
    nf = len(freqs)
    lanes = 2 * nf
    element.reset(lanes)

    f_lane = np.repeat(np.asarray(freqs, dtype=float), 2)
    d_lane = np.tile(np.arange(2), nf)
    lane_ix = np.arange(lanes)
    omega = 2.0 * math.pi * f_lane / sample_rate
    gen_rot = np.exp(1j * omega)
    gen_cur = np.ones(lanes, dtype=complex)
    det_rot = np.exp(-1j * omega)
    det_cur = np.exp(-1j * omega * settle)

    # Integer stimulus cycles per lane keep the negative-frequency image of
    # the real tone out of the accumulated phasor.
    wlen = np.array([integer_cycle_length(f, sample_rate, measure) for f in f_lane])
    acc_out = np.zeros((2, lanes), dtype=complex)
    acc_in = np.zeros(lanes, dtype=complex)
    incident = np.zeros((2, lanes))
    n_total = settle + measure
    for n in range(n_total):
        drive = gen_cur.real
        incident[d_lane, lane_ix] = drive
        out = element.step(incident)
        if n >= settle:
            weight = det_cur * ((n - settle) < wlen)
            acc_out += out * weight
            acc_in += drive * weight
            det_cur *= det_rot
        gen_cur *= gen_rot
        if (n & _RENORM_MASK) == _RENORM_MASK:
            gen_cur /= np.abs(gen_cur)
            if n >= settle:
                det_cur /= np.abs(det_cur)
            if not np.all(np.isfinite(out)):
                raise SimulationFault(n)

    s_cols = acc_out / acc_in
    s = np.empty((nf, 2, 2), dtype=complex)
    for k in range(nf):
        s[k] = s_cols[:, 2 * k : 2 * k + 2]
    summary = "static two-port, delay line only"
    if isinstance(line, DelayLineSpec):
        summary += f", tau={line.tau:g} s"
    return SParamGrid(
        frequencies=tuple(freqs),
        s=s,
        drive_level=amplitude_to_dbm(1.0),
        schedule_summary=summary,
        warnings=tuple(element.warnings),
    )
