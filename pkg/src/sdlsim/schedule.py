"""Periodic switch-control waveform generation and validation.

The two crossbars each follow one periodic bar-fraction trace g(t): bar
state for a duty fraction of the period, cross state otherwise, with linear
g-ramps of width t_transition (the conduction sin^2(pi*g/2) is then a
raised-cosine ramp). The right crossbar runs the left trace delayed by the
side offset, nominally one quarter period.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import QuantizationError


@dataclass(frozen=True)
class ControlSchedule:
    """Four-phase commutation schedule shared by both crossbars.

    delta is always period/4, the canonical side-to-side offset. side_offset
    overrides the offset actually applied to the right crossbar (None keeps
    delta); it exists so reciprocity checks can run both sides in phase.
    """

    period: float
    delta: float
    duty: float
    t_transition: float
    left_phase: float
    sample_rate: float
    side_offset: float | None = None

    @property
    def period_samples(self) -> int:
        return 4 * round(self.period * self.sample_rate / 4.0)

    @property
    def transition_samples(self) -> int:
        return round(self.t_transition * self.sample_rate)

    @property
    def offset_samples(self) -> int:
        if self.side_offset is None:
            return self.period_samples // 4
        return round(self.side_offset * self.sample_rate)

    @property
    def left_phase_samples(self) -> int:
        return round(self.left_phase * self.sample_rate)

    @property
    def f_mod(self) -> float:
        """Achieved switching frequency after sample quantization."""
        return self.sample_rate / self.period_samples


@dataclass(frozen=True)
class ControlTrace:
    """Materialized bar-fraction sequence for one crossbar side."""

    side: str
    sample_rate: float
    g: np.ndarray


@dataclass
class ScheduleReport:
    """Advisory delay-matching and quantization report."""

    mismatch_s: float
    mismatch_fraction: float
    period_residue_samples: float
    offset_residue_samples: float
    isolation_flag: bool
    messages: list[str] = field(default_factory=list)


def build_schedule(
    period: float,
    t_transition: float,
    duty: float,
    sample_rate: float,
    side_offset: float | None = None,
) -> ControlSchedule:
    """Construct the canonical schedule with the left bar interval at t = 0."""
    if period <= 0:
        raise QuantizationError("period must be positive")
    if not 0.0 < duty < 1.0:
        raise QuantizationError("duty must lie in (0, 1)")
    if t_transition < 0:
        raise QuantizationError("t_transition must be >= 0")
    p = period * sample_rate
    nearest = 4 * round(p / 4.0)
    if nearest < 4:
        raise QuantizationError(
            f"period {period:g} s is under one sample quartet at {sample_rate:g} Hz"
        )
    if abs(p - nearest) > 0.25:
        raise QuantizationError(
            f"period {period:g} s is {p:.3f} samples, more than 0.25 samples from a "
            f"multiple of 4; nearest achievable period is {nearest / sample_rate:.12g} s",
            nearest=nearest / sample_rate,
        )
    tt = round(t_transition * sample_rate)
    bar_n = round(duty * nearest)
    if tt > bar_n or tt > nearest - bar_n:
        raise QuantizationError(
            f"t_transition {t_transition:g} s does not fit inside the "
            f"{duty:g}-duty state intervals of period {period:g} s"
        )
    return ControlSchedule(
        period=period,
        delta=period / 4.0,
        duty=duty,
        t_transition=t_transition,
        left_phase=0.0,
        sample_rate=sample_rate,
        side_offset=side_offset,
    )


def _one_period(schedule: ControlSchedule) -> np.ndarray:
    p = schedule.period_samples
    tt = schedule.transition_samples
    bar_n = round(schedule.duty * p)
    g = np.zeros(p)
    g[: bar_n - tt] = 1.0
    if tt > 0:
        # Midpoint-sampled linear ramps: fall ends where the cross interval
        # begins, rise ends at the period wrap, and the per-period conduction
        # integral stays exactly duty * period_samples.
        ramp = (np.arange(tt) + 0.5) / tt
        g[bar_n - tt : bar_n] = 1.0 - ramp
        g[p - tt :] = ramp
    return g


def trace_for(schedule: ControlSchedule, side: str, n_samples: int) -> ControlTrace:
    """Materialize n_samples of the periodic bar-fraction trace for one side."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    base = _one_period(schedule)
    shift = schedule.left_phase_samples
    if side == "right":
        shift += schedule.offset_samples
    idx = (np.arange(n_samples) - shift) % schedule.period_samples
    return ControlTrace(side, schedule.sample_rate, base[idx])


def expanded_controls(
    schedule: ControlSchedule, n_samples: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-switch control expansion: columns c1 = left bar, c2 = 1 - c1,
    c3 = right bar, c4 = 1 - c3. Returns (time_s, (n_samples, 4) array)."""
    left = trace_for(schedule, "left", n_samples).g
    right = trace_for(schedule, "right", n_samples).g
    t = np.arange(n_samples) / schedule.sample_rate
    return t, np.column_stack([left, 1.0 - left, right, 1.0 - right])


def validate_schedule(schedule: ControlSchedule, line_tau: float) -> ScheduleReport:
    """Advisory report of the delta-to-line-delay mismatch and rounding residues."""
    mismatch = schedule.delta - line_tau
    fraction = mismatch / line_tau if line_tau else float("inf")
    period_residue = schedule.period * schedule.sample_rate - schedule.period_samples
    offset = schedule.side_offset if schedule.side_offset is not None else schedule.delta
    offset_residue = offset * schedule.sample_rate - schedule.offset_samples
    flag = abs(mismatch) > schedule.t_transition
    messages = []
    if flag:
        messages.append(
            f"side offset {schedule.delta * 1e9:.3f} ns differs from line delay "
            f"{line_tau * 1e9:.3f} ns by {mismatch * 1e9:+.3f} ns "
            f"({100 * fraction:+.2f}%), beyond the {schedule.t_transition * 1e9:.3f} ns "
            "transition window; first-order isolation degradation expected"
        )
    return ScheduleReport(mismatch, fraction, period_residue, offset_residue, flag, messages)
