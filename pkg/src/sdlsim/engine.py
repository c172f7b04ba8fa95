"""Sample-stepped traveling-wave simulation of the switched-delay-line
circulator.

Topology (fixed in v1): four external ports bind directly to the two
crossbar port sides; the crossbar line sides connect through one-sample
links to the two delay lines, optionally with a matching two-port spliced
into each of the four line-side connections.

    Port1 - left.PortTop    right.PortTop - Port2
    Port3 - left.PortBot    right.PortBot - Port4
    left.LineA <-> [match_1] <-> line_a <-> [match_3] <-> right.LineA
    left.LineB <-> [match_2] <-> line_b <-> [match_4] <-> right.LineB

Every link carries exactly one sample of latency; external bindings carry
none. A through traversal therefore takes the line delay plus k_link
samples, where k_link = 2 bare and 4 with matching inserted. This constant
is exposed as CirculatorNetwork.k_link and every timing oracle adds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elements import (
    CrossbarElement,
    DelayLineSpec,
    ScatteringElement,
    crossbar_element,
    delay_line_element,
    element_from_touchstone,
    matching_element,
)
from .errors import ConfigError, OracleDeclined, SimulationFault
from .schedule import ControlSchedule, trace_for
from .signals import SampleBuffer

K_LINK_BARE = 2
K_LINK_MATCHED = 4

# External port number (1-based) -> (side, crossbar port row).
_PORT_MAP = {1: ("left", 0), 2: ("right", 0), 3: ("left", 1), 4: ("right", 1)}


class _SharedControl:
    """One period of precomputed crossbar coefficients, shared by all lanes."""

    def __init__(self, crossbar: CrossbarElement, g_period: np.ndarray):
        self.period = len(g_period)
        self.t_bar, self.t_cross, self.refl = crossbar.coefficients(g_period)

    def at(self, n: int):
        i = n % self.period
        return self.t_bar[i], self.t_cross[i], self.refl[i]


class _LaneControl:
    """Per-lane coefficient tables for runs where every lane has its own
    schedule (modulation-frequency sweeps)."""

    def __init__(self, crossbar: CrossbarElement, g_rows: list[np.ndarray]):
        self.lanes = len(g_rows)
        self.periods = np.array([len(g) for g in g_rows], dtype=np.int64)
        p_max = int(self.periods.max())
        self.t_bar = np.zeros((self.lanes, p_max))
        self.t_cross = np.zeros((self.lanes, p_max))
        self.refl = np.zeros((self.lanes, p_max))
        for k, g in enumerate(g_rows):
            tb, tc, rf = crossbar.coefficients(g)
            self.t_bar[k, : len(g)] = tb
            self.t_cross[k, : len(g)] = tc
            self.refl[k, : len(g)] = rf
        self._rows = np.arange(self.lanes)

    def at(self, n: int):
        idx = n % self.periods
        return (
            self.t_bar[self._rows, idx],
            self.t_cross[self._rows, idx],
            self.refl[self._rows, idx],
        )


class CirculatorNetwork:
    """Canonical 4-port switched-delay-line network.

    Owns the element instances and the per-sample wave propagation. The
    step loop is strictly sequential in sample order; lanes (independent
    stimulus columns sharing one pass) provide the batching axis instead.
    """

    def __init__(
        self,
        switch_spec,
        line_a: ScatteringElement,
        line_b: ScatteringElement,
        schedule: ControlSchedule,
        sample_rate: float,
        matches: list[ScatteringElement] | None = None,
        config_digest: str = "",
    ):
        if matches is not None and len(matches) != 4:
            raise ConfigError("matching requires exactly 4 elements (line-side ports)")
        for el in (line_a, line_b):
            el_fs = getattr(el, "sample_rate", sample_rate)
            if el_fs != sample_rate:
                raise ConfigError(
                    f"element sample rate {el_fs:g} != network rate {sample_rate:g}"
                )
        if schedule.sample_rate != sample_rate:
            raise ConfigError(
                f"schedule sample rate {schedule.sample_rate:g} != network rate {sample_rate:g}"
            )
        self.sample_rate = sample_rate
        self.schedule = schedule
        self.config_digest = config_digest
        self.left = crossbar_element(switch_spec)
        self.right = crossbar_element(switch_spec)
        self.line_a = line_a
        self.line_b = line_b
        self.matches = list(matches) if matches else None
        self.k_link = K_LINK_MATCHED if matches else K_LINK_BARE

        self.elements: dict[str, ScatteringElement] = {
            "left_crossbar": self.left,
            "right_crossbar": self.right,
            "line_a": line_a,
            "line_b": line_b,
        }
        if self.matches:
            for i, m in enumerate(self.matches, start=1):
                self.elements[f"match_{i}"] = m

        p = schedule.period_samples
        self._ctl_left = _SharedControl(self.left, trace_for(schedule, "left", p).g)
        self._ctl_right = _SharedControl(self.right, trace_for(schedule, "right", p).g)
        self.lanes = 1
        self.track_link_energy = False
        self.reset()

    def set_lane_schedules(self, schedules: list[ControlSchedule]) -> None:
        """Give each lane its own control schedule (all sharing sample_rate)."""
        for s in schedules:
            if s.sample_rate != self.sample_rate:
                raise ConfigError("lane schedule sample rate mismatch")
        left_rows = [trace_for(s, "left", s.period_samples).g for s in schedules]
        right_rows = [trace_for(s, "right", s.period_samples).g for s in schedules]
        self._ctl_left = _LaneControl(self.left, left_rows)
        self._ctl_right = _LaneControl(self.right, right_rows)

    def reset(self, lanes: int = 1) -> None:
        if isinstance(self._ctl_left, _LaneControl) and lanes != self._ctl_left.lanes:
            raise ConfigError("lane count must match the per-lane schedule table")
        self.lanes = lanes
        for el in self.elements.values():
            el.reset(lanes)
        shape = (lanes,)
        self._li = np.zeros((4,) + shape)  # left crossbar incident
        self._ri = np.zeros((4,) + shape)
        self._ai = np.zeros((2,) + shape)  # line_a incident
        self._bi = np.zeros((2,) + shape)
        self._mi = [np.zeros((2,) + shape) for _ in range(4)] if self.matches else None
        self._out = np.zeros((4,) + shape)
        self._n = 0
        self.link_energy: dict[str, float] = {}

    @property
    def sample_index(self) -> int:
        return self._n

    def step(self, ext_in: np.ndarray) -> np.ndarray:
        """Advance one sample: consume external stimuli (4, lanes), return
        the waves emitted at the external ports this sample.

        The returned array is an internal buffer reused by the next step;
        callers that keep samples must copy them out.
        """
        n = self._n
        li, ri = self._li, self._ri
        li[0] = ext_in[0]
        li[1] = ext_in[2]
        ri[0] = ext_in[1]
        ri[1] = ext_in[3]

        lo = CrossbarElement.step_with(li, *self._ctl_left.at(n))
        ro = CrossbarElement.step_with(ri, *self._ctl_right.at(n))
        ao = self.line_a.step(self._ai)
        bo = self.line_b.step(self._bi)

        out = self._out
        out[0] = lo[0]
        out[2] = lo[1]
        out[1] = ro[0]
        out[3] = ro[1]

        mo = None
        if self.matches is None:
            li[2] = ao[0]
            li[3] = bo[0]
            ri[2] = ao[1]
            ri[3] = bo[1]
            self._ai[0] = lo[2]
            self._ai[1] = ro[2]
            self._bi[0] = lo[3]
            self._bi[1] = ro[3]
        else:
            mo = [m.step(mi) for m, mi in zip(self.matches, self._mi)]
            li[2] = mo[0][0]
            li[3] = mo[1][0]
            ri[2] = mo[2][0]
            ri[3] = mo[3][0]
            self._ai[0] = mo[0][1]
            self._ai[1] = mo[2][1]
            self._bi[0] = mo[1][1]
            self._bi[1] = mo[3][1]
            self._mi[0][0] = lo[2]
            self._mi[1][0] = lo[3]
            self._mi[2][0] = ro[2]
            self._mi[3][0] = ro[3]
            self._mi[0][1] = ao[0]
            self._mi[1][1] = bo[0]
            self._mi[2][1] = ao[1]
            self._mi[3][1] = bo[1]

        if self.track_link_energy:
            self._accumulate_link_energy(lo, ro, ao, bo, mo)
        self._n = n + 1
        return out

    def _accumulate_link_energy(self, lo, ro, ao, bo, mo) -> None:
        if mo is None:
            pairs = [
                ("left_crossbar->line_a", lo[2]),
                ("line_a->left_crossbar", ao[0]),
                ("left_crossbar->line_b", lo[3]),
                ("line_b->left_crossbar", bo[0]),
                ("right_crossbar->line_a", ro[2]),
                ("line_a->right_crossbar", ao[1]),
                ("right_crossbar->line_b", ro[3]),
                ("line_b->right_crossbar", bo[1]),
            ]
        else:
            pairs = [
                ("left_crossbar->match_1", lo[2]),
                ("match_1->left_crossbar", mo[0][0]),
                ("match_1->line_a", mo[0][1]),
                ("line_a->match_1", ao[0]),
                ("left_crossbar->match_2", lo[3]),
                ("match_2->left_crossbar", mo[1][0]),
                ("match_2->line_b", mo[1][1]),
                ("line_b->match_2", bo[0]),
                ("right_crossbar->match_3", ro[2]),
                ("match_3->right_crossbar", mo[2][0]),
                ("match_3->line_a", mo[2][1]),
                ("line_a->match_3", ao[1]),
                ("right_crossbar->match_4", ro[3]),
                ("match_4->right_crossbar", mo[3][0]),
                ("match_4->line_b", mo[3][1]),
                ("line_b->match_4", bo[1]),
            ]
        for name, wave in pairs:
            self.link_energy[name] = self.link_energy.get(name, 0.0) + float(
                np.sum(wave * wave)
            )


@dataclass
class RunRecord:
    """Time-domain record of one single-lane run."""

    sample_rate: float
    port_in: list[SampleBuffer]
    port_out: list[SampleBuffer]
    link_energy: dict[str, float]
    schedule: ControlSchedule
    config_digest: str = ""

    def __post_init__(self) -> None:
        lengths = {len(b) for b in self.port_in + self.port_out}
        rates = {b.sample_rate for b in self.port_in + self.port_out}
        if len(lengths) != 1 or rates != {self.sample_rate}:
            raise ValueError("record buffers must share sample_rate and length")

    @property
    def n_samples(self) -> int:
        return len(self.port_in[0])

    def input_energy(self) -> float:
        return sum(float(np.sum(b.samples**2)) for b in self.port_in)

    def output_energy(self) -> float:
        return sum(float(np.sum(b.samples**2)) for b in self.port_out)


def run(network: CirculatorNetwork, stimuli: list[SampleBuffer | None], n_samples: int) -> RunRecord:
    """Advance the network n_samples with per-port stimuli and record all
    external waves. stimuli is indexed by port (Port1 first); None means a
    silent port. Bit-identical for identical inputs."""
    if len(stimuli) != 4:
        raise ValueError("need one stimulus slot per external port")
    ext = np.zeros((4, n_samples))
    for p, stim in enumerate(stimuli):
        if stim is None:
            continue
        if stim.sample_rate != network.sample_rate:
            raise ConfigError("stimulus sample rate differs from network rate")
        if len(stim) > n_samples:
            raise ValueError(f"stimulus on port {p + 1} longer than the run")
        ext[p, : len(stim)] = stim.samples
    network.reset(lanes=1)
    network.track_link_energy = True
    try:
        outs = np.empty((4, n_samples))
        col = np.empty((4, 1))
        for n in range(n_samples):
            col[:, 0] = ext[:, n]
            o = network.step(col)
            outs[:, n] = o[:, 0]
            s = o[0, 0] + o[1, 0] + o[2, 0] + o[3, 0]
            if not math.isfinite(s):
                raise SimulationFault(n)
        return RunRecord(
            sample_rate=network.sample_rate,
            port_in=[SampleBuffer(network.sample_rate, ext[p]) for p in range(4)],
            port_out=[SampleBuffer(network.sample_rate, outs[p]) for p in range(4)],
            link_energy=dict(network.link_energy),
            schedule=network.schedule,
            config_digest=network.config_digest,
        )
    finally:
        network.track_link_energy = False


def _line_element(line_spec, sample_rate: float) -> ScatteringElement:
    if isinstance(line_spec, DelayLineSpec):
        return delay_line_element(line_spec, sample_rate)
    if hasattr(line_spec, "data") and hasattr(line_spec, "ir_len"):
        return element_from_touchstone(line_spec.data, sample_rate, line_spec.ir_len)
    raise ConfigError(f"unsupported line description {type(line_spec).__name__}")


def build_circulator(config) -> CirculatorNetwork:
    """Assemble the canonical network from a circulator configuration.

    config duck-type: sample_rate, schedule (ControlSchedule), switch
    (SwitchSpec), line_a / line_b (DelayLineSpec or resolved measured-data
    reference), matching (None, one MatchSpec for all four positions, or a
    4-list), digest (optional).
    """
    fs = config.sample_rate
    line_a = _line_element(config.line_a, fs)
    line_b = _line_element(config.line_b, fs)
    matching = getattr(config, "matching", None)
    matches = None
    if matching is not None:
        specs = list(matching) if isinstance(matching, (list, tuple)) else [matching] * 4
        if len(specs) != 4:
            raise ConfigError("matching must give one spec or exactly four")
        matches = [matching_element(s, fs) for s in specs]
    return CirculatorNetwork(
        config.switch,
        line_a,
        line_b,
        config.schedule,
        fs,
        matches=matches,
        config_digest=getattr(config, "digest", ""),
    )


@dataclass(frozen=True)
class BurstInjection:
    """Short single-port burst for oracle-vs-engine comparisons."""

    port: int
    t_start: float
    duration: float
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.port not in (1, 2, 3, 4):
            raise ValueError("port must be 1..4")
        if self.t_start < 0 or self.duration <= 0:
            raise ValueError("need t_start >= 0 and duration > 0")


@dataclass(frozen=True)
class PredictedArrival:
    port: int
    time: float  # seconds, link latency excluded
    amplitude: float  # signed scale relative to the injected wave
    path: str


def _binary_state(g_period: np.ndarray, start: int, stop: int) -> int:
    """Constant switch state over samples [start, stop), else decline."""
    idx = np.arange(start, stop) % len(g_period)
    vals = g_period[idx]
    if np.any(vals != vals[0]):
        raise OracleDeclined(
            f"burst window [{start}, {stop}) straddles a switching instant"
        )
    return int(vals[0])


def _exit_port(side: str, line: str, bar: int) -> int:
    # bar: LineA<->PortTop, LineB<->PortBot; cross swaps.
    top = (line == "a") == bool(bar)
    if side == "left":
        return 1 if top else 3
    return 2 if top else 4


def event_walk_oracle(config, injection: BurstInjection) -> list[PredictedArrival]:
    """Analytic walk of one burst through the schedule states.

    Supported domain: instantaneous switching, infinite off-isolation, flat
    (unfiltered) delay lines, no matching. Within it the walk is exact:
    finite line loss, port reflections, and echo paths each produce one
    predicted arrival, and the crossbar line ports never re-reflect because
    the off-throw reflection vanishes in settled states. Times exclude link
    latency; the engine observes each arrival k_link samples later.
    """
    switch = config.switch
    if switch.t_transition != 0:
        raise ValueError("oracle requires instantaneous switching (t_transition = 0)")
    if not math.isinf(switch.iso_off_db):
        raise ValueError("oracle requires infinite off-state isolation")
    if getattr(config, "matching", None) is not None:
        raise ValueError("oracle does not model matching sections")
    for spec in (config.line_a, config.line_b):
        if not isinstance(spec, DelayLineSpec):
            raise ValueError("oracle requires behavioral delay-line specs")
        if spec.bandwidth is not None and spec.band_order > 0:
            raise ValueError("oracle requires flat-band lines")

    fs = config.sample_rate
    schedule = config.schedule
    p = schedule.period_samples
    traces = {
        "left": trace_for(schedule, "left", p).g,
        "right": trace_for(schedule, "right", p).g,
    }
    n0 = round(injection.t_start * fs)
    n1 = n0 + max(1, math.ceil(injection.duration * fs))

    side, _ = _PORT_MAP[injection.port]
    far = "right" if side == "left" else "left"
    bar = _binary_state(traces[side], n0, n1)
    top = injection.port in (1, 2)
    line = "a" if top == bool(bar) else "b"
    spec: DelayLineSpec = config.line_a if line == "a" else config.line_b

    s_on = 10.0 ** (-switch.il_on_db / 20.0)
    g_line = 10.0 ** (-spec.il_db / 20.0)
    d = round(spec.tau * fs)
    arrivals: list[PredictedArrival] = []

    if not math.isinf(spec.port_return_db):
        r = 10.0 ** (-spec.port_return_db / 20.0)
        bar_back = _binary_state(traces[side], n0, n1)
        arrivals.append(
            PredictedArrival(
                port=_exit_port(side, line, bar_back),
                time=n0 / fs,
                amplitude=-injection.amplitude * r * s_on**2,
                path="port-reflection",
            )
        )

    hops = [(1, g_line, "through")] + [
        (k, g_line * 10.0 ** (level / 20.0), f"echo-k{k}") for k, level in spec.echoes
    ]
    for k, gain, path in hops:
        exit_side = far if k % 2 else side
        m = n0 + k * d
        bar_exit = _binary_state(traces[exit_side], m, m + (n1 - n0))
        arrivals.append(
            PredictedArrival(
                port=_exit_port(exit_side, line, bar_exit),
                time=m / fs,
                amplitude=injection.amplitude * gain * s_on**2,
                path=path,
            )
        )
    arrivals.sort(key=lambda a: a.time)
    return arrivals
