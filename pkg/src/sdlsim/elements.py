"""Behavioral scattering elements with a per-sample step contract.

Every element consumes one incident wave sample per port and emits one wave
sample per port, with shape (n_ports, lanes) so that independent
measurement runs (lanes) share a single pass. All elements are causal and
linear in the signal for a fixed control trajectory.

Includes the L-section matching synthesis (synth_lmatch) and its
discrete-time realization alongside the delay-line, crossbar-switch, and
measured-data elements.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sig

from .touchstone import TouchstoneData


def conduction_weight(g: np.ndarray | float) -> np.ndarray | float:
    """Raised-cosine conduction law w(g) = sin^2(pi*g/2).

    Satisfies w(g) + w(1-g) = 1, so the two throws of a crossbar always
    share unit conductance during a transition.
    """
    return np.sin(0.5 * math.pi * np.asarray(g)) ** 2


class ScatteringElement:
    """Base step contract: stateful, single-owner during a run."""

    n_ports: int = 2

    def __init__(self) -> None:
        self.warnings: list[str] = []
        self.lanes = 1

    def reset(self, lanes: int = 1) -> None:
        self.lanes = lanes

    def step(self, incident: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class DelayLineSpec:
    """Behavioral delay-line parameters.

    echoes lists (transit_multiple k, level_db) spurious paths at k times
    the main transit: odd multiples (triple transit and kin) exit the far
    port, even multiples return to the entry port. port_return_db is the
    in-band reflection magnitude below incident at each port (math.inf
    disables it). bandwidth None gives a flat (unfiltered) band.
    """

    tau: float = 280e-9
    il_db: float = 4.0
    f_center: float = 155e6
    bandwidth: float | None = 30e6
    band_order: int = 2
    echoes: tuple[tuple[int, float], ...] = ()
    port_return_db: float = 15.0

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "echoes", tuple((int(k), float(level)) for k, level in self.echoes)
        )
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.il_db < 0:
            raise ValueError("il_db must be >= 0")
        if self.bandwidth is not None and not 0 < self.bandwidth < self.f_center:
            raise ValueError("bandwidth must lie in (0, f_center)")
        for k, level in self.echoes:
            if k < 2:
                raise ValueError(f"echo transit multiple must be an integer >= 2, got {k}")
            if level > 0:
                raise ValueError("echo levels must be <= 0 dB")


@dataclass(frozen=True)
class SwitchSpec:
    """Crossbar switch parameters; the defaults are calibrated assumptions
    for commercial absorptive RF switches, not measured values."""

    il_on_db: float = 0.8
    iso_off_db: float = 30.0
    t_transition: float = 2e-9
    gamma_off: float = 0.9

    def __post_init__(self) -> None:
        if self.il_on_db < 0:
            raise ValueError("il_on_db must be >= 0")
        if self.iso_off_db <= self.il_on_db:
            raise ValueError("iso_off_db must exceed il_on_db")
        if self.t_transition < 0:
            raise ValueError("t_transition must be >= 0")
        if not -1.0 <= self.gamma_off <= 1.0:
            raise ValueError("gamma_off must lie in [-1, 1]")


def _filter_group_delay_samples(sos: np.ndarray, f_center: float, fs: float) -> float:
    total = 0.0
    for section in sos:
        _, gd = sig.group_delay((section[:3], section[3:]), w=[f_center], fs=fs)
        total += gd[0]
    return total


def _sos_step(sos: np.ndarray, z: np.ndarray, x: np.ndarray) -> np.ndarray:
    # Transposed direct form II, one sample across all channels.
    for k in range(sos.shape[0]):
        b0, b1, b2, _, a1, a2 = sos[k]
        y = b0 * x + z[k, 0]
        z[k, 0] = b1 * x - a1 * y + z[k, 1]
        z[k, 1] = b2 * x - a2 * y
        x = y
    return x


class DelayLineElement(ScatteringElement):
    """Symmetric band-limited two-port delay line.

    Each port's incident wave passes one shared band-shape filter; the
    filtered stream feeds the main transit tap, the configured echo taps,
    and the port reflection (gain -10^(-port_return_db/20), zero delay
    after the filter). The main tap is placed at round(tau*fs) minus the
    filter's own mid-band group delay so the element's total mid-band
    group delay is round(tau*fs)/fs; echo taps are compensated the same
    way, landing at exactly k times the main transit.
    """

    n_ports = 2

    def __init__(self, spec: DelayLineSpec, sample_rate: float):
        super().__init__()
        if spec.tau * sample_rate < 1.0:
            raise ValueError("tau must span at least one sample")
        self.spec = spec
        self.sample_rate = sample_rate
        self.delay_samples = round(spec.tau * sample_rate)
        self.rounding_error_s = abs(self.delay_samples / sample_rate - spec.tau)
        if self.rounding_error_s * sample_rate > 0.5:
            self.warnings.append(
                f"delay quantization error {self.rounding_error_s * 1e12:.1f} ps "
                "exceeds half a sample"
            )

        banded = spec.bandwidth is not None and spec.band_order > 0
        if banded:
            f1 = spec.f_center - spec.bandwidth / 2.0
            f2 = spec.f_center + spec.bandwidth / 2.0
            sos = sig.butter(spec.band_order, [f1, f2], btype="bandpass", fs=sample_rate, output="sos")
            _, h = sig.sosfreqz(sos, worN=[spec.f_center], fs=sample_rate)
            sos[0, :3] /= np.abs(h[0])  # exact unit gain at center
            self.sos = sos
            self.filter_delay_samples = round(_filter_group_delay_samples(sos, spec.f_center, sample_rate))
        else:
            self.sos = None
            self.filter_delay_samples = 0

        self.compensated_delay_samples = self.delay_samples - self.filter_delay_samples
        if self.compensated_delay_samples < 1:
            raise ValueError(
                "band filter group delay exceeds the line delay; "
                "reduce band_order or widen bandwidth"
            )

        g_main = 10.0 ** (-spec.il_db / 20.0)
        r = 0.0 if math.isinf(spec.port_return_db) else 10.0 ** (-spec.port_return_db / 20.0)
        # Tap table: (delay after filter, source channel seen from port 1's
        # output, gain). Port 2's output swaps the source channels.
        taps: list[tuple[int, int, float]] = []
        if r > 0.0:
            taps.append((0, 0, -r))
        taps.append((self.compensated_delay_samples, 1, g_main))
        for k, level in spec.echoes:
            d = k * self.delay_samples - self.filter_delay_samples
            ch = 1 if k % 2 else 0
            taps.append((d, ch, g_main * 10.0 ** (level / 20.0)))
        self.taps = taps
        self.buf_len = max(d for d, _, _ in taps) + 1
        self.reset()

    def reset(self, lanes: int = 1) -> None:
        super().reset(lanes)
        self._buf = np.zeros((self.buf_len, 2, lanes))
        self._ptr = 0
        if self.sos is not None:
            self._z = np.zeros((self.sos.shape[0], 2, 2 * lanes))

    def step(self, incident: np.ndarray) -> np.ndarray:
        incident = np.asarray(incident, dtype=np.float64)
        one_d = incident.ndim == 1
        if one_d:
            incident = incident[:, None]
        if self.sos is not None:
            f = _sos_step(self.sos, self._z, incident.reshape(2 * self.lanes))
            f = f.reshape(2, self.lanes)
        else:
            f = incident
        self._buf[self._ptr] = f
        out = np.zeros_like(self._buf[0])
        for delay, ch, gain in self.taps:
            row = self._buf[(self._ptr - delay) % self.buf_len]
            out[0] += gain * row[ch]
            out[1] += gain * row[1 - ch]
        self._ptr = (self._ptr + 1) % self.buf_len
        return out[:, 0] if one_d else out


PORT_TOP, PORT_BOT, LINE_A, LINE_B = 0, 1, 2, 3


class CrossbarElement(ScatteringElement):
    """Switched 2x2 crossbar: bar state (g=1) connects PortTop-LineA and
    PortBot-LineB, cross state (g=0) the swapped pairs.

    Conducting paths carry s_on = 10^(-il_on_db/20), blocked paths leak
    s_leak = 10^(-iso_off_db/20); during a transition the two throws blend
    with the sin^2 conduction law, and a wave incident at a line port sees
    a reflection gamma_off*min(w, 1-w), which vanishes in both settled
    states. The blend is not a unitary 4x4 scattering matrix: each single
    drive is energy-consistent, but coherent simultaneous drive on both
    line ports can transiently emit more energy than arrives mid
    transition. Network-level passivity relies on line losses.
    """

    n_ports = 4

    def __init__(self, spec: SwitchSpec):
        super().__init__()
        self.spec = spec
        self.s_on = 10.0 ** (-spec.il_on_db / 20.0)
        self.s_leak = 0.0 if math.isinf(spec.iso_off_db) else 10.0 ** (-spec.iso_off_db / 20.0)
        gain_sq = self.s_on**2 + self.s_leak**2
        if gain_sq > 1.0 + 1e-12:
            self.warnings.append(
                f"through plus leakage energy per drive is {gain_sq:.6f} > 1 "
                "(il_on_db too small for the given iso_off_db); "
                "the switch itself is slightly active"
            )

    def coefficients(self, g: np.ndarray | float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(bar gain, cross gain, line-port reflection) for bar fraction g."""
        g = np.asarray(g, dtype=np.float64)
        if np.any((g < 0.0) | (g > 1.0)):
            raise ValueError("control bar_fraction outside [0, 1]")
        w = conduction_weight(g)
        t_bar = self.s_on * w + self.s_leak * (1.0 - w)
        t_cross = self.s_on * (1.0 - w) + self.s_leak * w
        refl = self.spec.gamma_off * np.minimum(w, 1.0 - w)
        return t_bar, t_cross, refl

    @staticmethod
    def step_with(incident: np.ndarray, t_bar, t_cross, refl) -> np.ndarray:
        a_top, a_bot, a_la, a_lb = incident
        return np.stack(
            [
                t_bar * a_la + t_cross * a_lb,
                t_cross * a_la + t_bar * a_lb,
                t_bar * a_top + t_cross * a_bot + refl * a_la,
                t_cross * a_top + t_bar * a_bot + refl * a_lb,
            ]
        )

    def step(self, incident: np.ndarray, g: np.ndarray | float = 1.0) -> np.ndarray:
        t_bar, t_cross, refl = self.coefficients(g)
        return self.step_with(incident, t_bar, t_cross, refl)


def _interp_onto_grid(
    freqs: np.ndarray, values: np.ndarray, grid: np.ndarray, taper_width: float
) -> np.ndarray:
    """Interpolate a measured complex response onto an FFT grid.

    Magnitude and unwrapped phase interpolate separately (linear re/im
    interpolation of a delay response would scallop the magnitude between
    grid points). Outside the measured band the response is zero, with a
    raised-cosine taper occupying taper_width inside each band edge.
    """
    mag = np.abs(values)
    phase = np.unwrap(np.angle(values))
    in_band = (grid >= freqs[0]) & (grid <= freqs[-1])
    gm = np.zeros(len(grid))
    gp = np.zeros(len(grid))
    gm[in_band] = np.interp(grid[in_band], freqs, mag)
    gp[in_band] = np.interp(grid[in_band], freqs, phase)
    if taper_width > 0:
        lo_edge = (grid >= freqs[0]) & (grid < freqs[0] + taper_width)
        hi_edge = (grid > freqs[-1] - taper_width) & (grid <= freqs[-1])
        gm[lo_edge] *= np.sin(0.5 * math.pi * (grid[lo_edge] - freqs[0]) / taper_width) ** 2
        gm[hi_edge] *= np.sin(0.5 * math.pi * (freqs[-1] - grid[hi_edge]) / taper_width) ** 2
    return gm * np.exp(1j * gp)


class TouchstoneElement(ScatteringElement):
    """Two-port built from measured S-parameters via frequency sampling.

    Each S_ij becomes a finite impulse response: the measured response is
    band-tapered, sampled onto an FFT grid, inverse transformed, and
    truncated to ir_len samples. The fraction of impulse-response energy
    lost to truncation is reported per entry in energy_loss and warned
    about above 0.1%.
    """

    n_ports = 2

    def __init__(
        self,
        data: TouchstoneData,
        sample_rate: float,
        ir_len: int,
        require_band: tuple[float, float] | None = None,
    ):
        super().__init__()
        if ir_len < 1:
            raise ValueError("ir_len must be >= 1")
        self.sample_rate = sample_rate
        self.ir_len = ir_len
        f = data.frequencies
        if require_band is not None and (f[0] > require_band[0] or f[-1] < require_band[1]):
            raise ValueError(
                f"measured band [{f[0]:g}, {f[-1]:g}] Hz does not cover required "
                f"[{require_band[0]:g}, {require_band[1]:g}] Hz"
            )
        sv = np.linalg.svd(data.s, compute_uv=False)
        if np.any(sv > 1.0 + 1e-6):
            self.warnings.append(
                f"non-passive measured data: max singular value {sv.max():.6f}"
            )

        n_fft = 1 << max(13, (4 * ir_len - 1).bit_length())
        grid = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
        taper = (f[-1] - f[0]) / 10.0
        self.h = np.zeros((2, 2, ir_len))
        self.energy_loss = np.zeros((2, 2))
        for j in range(2):
            for i in range(2):
                response = _interp_onto_grid(f, data.s[:, j, i], grid, taper)
                ir = np.fft.irfft(response, n=n_fft)
                total = float(np.sum(ir * ir))
                kept = float(np.sum(ir[:ir_len] ** 2))
                self.h[j, i] = ir[:ir_len]
                self.energy_loss[j, i] = 0.0 if total == 0.0 else 1.0 - kept / total
        if np.any(self.energy_loss > 1e-3):
            worst = self.energy_loss.max()
            self.warnings.append(
                f"impulse response truncation loses {100 * worst:.2f}% of energy; "
                "increase ir_len"
            )
        # Reversed taps so a contiguous oldest-to-newest history slice
        # convolves with a plain matmul.
        self._hr = self.h[:, :, ::-1].copy()
        self.reset()

    def reset(self, lanes: int = 1) -> None:
        super().reset(lanes)
        self._hist = np.zeros((2 * self.ir_len, 2, lanes))
        self._pos = self.ir_len - 1

    def step(self, incident: np.ndarray) -> np.ndarray:
        incident = np.asarray(incident, dtype=np.float64)
        one_d = incident.ndim == 1
        if one_d:
            incident = incident[:, None]
        pos = self._pos
        self._hist[pos] = incident
        self._hist[pos + self.ir_len] = incident
        window = self._hist[pos + 1 : pos + 1 + self.ir_len]
        out0 = self._hr[0, 0] @ window[:, 0] + self._hr[0, 1] @ window[:, 1]
        out1 = self._hr[1, 0] @ window[:, 0] + self._hr[1, 1] @ window[:, 1]
        self._pos = (pos + 1) % self.ir_len
        out = np.stack([out0, out1])
        return out[:, 0] if one_d else out


def delay_line_element(spec: DelayLineSpec, sample_rate: float) -> DelayLineElement:
    return DelayLineElement(spec, sample_rate)


def crossbar_element(spec: SwitchSpec) -> CrossbarElement:
    return CrossbarElement(spec)


def element_from_touchstone(
    data: TouchstoneData,
    sample_rate: float,
    ir_len: int,
    require_band: tuple[float, float] | None = None,
) -> TouchstoneElement:
    return TouchstoneElement(data, sample_rate, ir_len, require_band)

L_TOWARD_LINE = "L-toward-line"
L_TOWARD_PORT = "L-toward-port"


@dataclass(frozen=True)
class MatchSpec:
    """Series inductor and shunt capacitor of one L-section.

    Element port 1 faces the crossbar (source), port 2 faces the line
    (load). orientation says which side the series inductor sits on:
    L_TOWARD_LINE puts the inductor at port 2 with the capacitor shunting
    port 1, L_TOWARD_PORT mirrors that.
    """

    series_l: float
    shunt_c: float
    orientation: str = L_TOWARD_LINE
    z0: float = 50.0
    f0: float = 155e6

    def __post_init__(self) -> None:
        if self.series_l < 0 or self.shunt_c < 0:
            raise ValueError("component values must be >= 0")
        if self.orientation not in (L_TOWARD_LINE, L_TOWARD_PORT):
            raise ValueError(f"unknown orientation {self.orientation!r}")


def synth_lmatch(z_load: complex, z0: float, f0: float) -> MatchSpec:
    """Closed-form L-match of z_load to z0 at f0.

    Loads below z0 get the series inductor toward the load with the load
    reactance absorbed into the series branch; loads above z0 get the
    mirrored section with the load susceptance absorbed into the shunt
    branch. A load already at z0 returns the empty ladder.
    """
    z_load = complex(z_load)
    if z_load.real <= 0:
        raise ValueError("load must have positive real part")
    w0 = 2.0 * math.pi * f0
    if z_load == complex(z0, 0.0):
        return MatchSpec(0.0, 0.0, L_TOWARD_LINE, z0, f0)

    def series_first() -> tuple[float, float, str] | None:
        # Load resistance stepped up: series L absorbs the load reactance.
        if z_load.real > z0:
            return None
        q = math.sqrt(z0 / z_load.real - 1.0)
        x_series = q * z_load.real - z_load.imag
        if x_series < 0:
            return None
        return x_series, q / z0, L_TOWARD_LINE

    def shunt_first() -> tuple[float, float, str] | None:
        # Load conductance stepped up: shunt C absorbs the load susceptance.
        y_load = 1.0 / z_load
        r_p = 1.0 / y_load.real
        if r_p < z0:
            return None
        q = math.sqrt(r_p / z0 - 1.0)
        b_shunt = q * y_load.real - y_load.imag
        if b_shunt < 0:
            return None
        return q * z0, b_shunt, L_TOWARD_PORT

    # The primary branch follows the resistance comparison; strongly
    # reactive loads on the wrong side of it resolve via the mirror. The
    # two domains tile the whole Re > 0 half plane, so one always fits.
    order = (series_first, shunt_first) if z_load.real <= z0 else (shunt_first, series_first)
    for branch in order:
        result = branch()
        if result is not None:
            x_series, b_shunt, orientation = result
            return MatchSpec(x_series / w0, b_shunt / w0, orientation, z0, f0)
    raise ValueError(f"no series-L/shunt-C section matches load {z_load:g}")


def lsection_sparams(spec: MatchSpec, frequency: np.ndarray | float) -> np.ndarray:
    """Analytic two-port scattering response, shape (..., 2, 2)."""
    s = 2j * math.pi * np.asarray(frequency, dtype=np.float64)
    lc = spec.series_l * spec.shunt_c
    k_sum = spec.series_l / spec.z0 + spec.shunt_c * spec.z0
    k_diff = spec.series_l / spec.z0 - spec.shunt_c * spec.z0
    den = lc * s * s + k_sum * s + 2.0
    s21 = 2.0 / den
    s_cap_side = (k_diff * s - lc * s * s) / den
    s_ind_side = (k_diff * s + lc * s * s) / den
    out = np.empty(np.shape(s) + (2, 2), dtype=np.complex128)
    if spec.orientation == L_TOWARD_LINE:
        out[..., 0, 0] = s_cap_side
        out[..., 1, 1] = s_ind_side
    else:
        out[..., 0, 0] = s_ind_side
        out[..., 1, 1] = s_cap_side
    out[..., 0, 1] = s21
    out[..., 1, 0] = s21
    return out


def input_impedance(spec: MatchSpec, z_term: complex, frequency: float) -> complex:
    """Impedance looking into port 1 with z_term on port 2 (oracle check)."""
    w = 2.0 * math.pi * frequency
    zl = 1j * w * spec.series_l
    yc = 1j * w * spec.shunt_c
    if spec.orientation == L_TOWARD_LINE:
        z = zl + z_term
        return 1.0 / (yc + 1.0 / z)
    y = yc + (1.0 / z_term if z_term != 0 else cmath.inf)
    return zl + 1.0 / y


def _strip_leading_zeros(coeffs: list[float]) -> list[float]:
    out = list(coeffs)
    while len(out) > 1 and out[0] == 0.0:
        out.pop(0)
    return out


def _bilinear_biquad(num_s: list[float], den_s: list[float], k: float) -> tuple[np.ndarray, np.ndarray]:
    # scipy's bilinear uses s = 2*fs*(1 - z^-1)/(1 + z^-1); passing fs = k/2
    # substitutes the pre-warped constant k. Degenerate (lower-order) sections
    # are transformed at their true degree so no cancelled z = -1 pole pair
    # enters the recursion, then padded back to biquad length.
    den = _strip_leading_zeros(den_s)
    num = list(num_s)[-len(den) :]
    if not any(num):
        return np.zeros(3), np.array([1.0, 0.0, 0.0])
    b, a = sig.bilinear(num, den, fs=k / 2.0)
    b = np.concatenate([b, np.zeros(3 - len(b))])
    a = np.concatenate([a, np.zeros(3 - len(a))])
    return b, a


class MatchingElement(ScatteringElement):
    """Discrete-time L-section two-port.

    Four biquads realize S11, S21, S12, S22 of the analytic section via the
    bilinear transform, pre-warped so the response at spec.f0 is exact.
    """

    n_ports = 2

    def __init__(self, spec: MatchSpec, sample_rate: float):
        super().__init__()
        self.spec = spec
        self.sample_rate = sample_rate
        w0 = 2.0 * math.pi * spec.f0
        k = w0 / math.tan(w0 / (2.0 * sample_rate)) if spec.f0 > 0 else 2.0 * sample_rate

        lc = spec.series_l * spec.shunt_c
        k_sum = spec.series_l / spec.z0 + spec.shunt_c * spec.z0
        k_diff = spec.series_l / spec.z0 - spec.shunt_c * spec.z0
        den = [lc, k_sum, 2.0]
        num_cap = [-lc, k_diff, 0.0]
        num_ind = [lc, k_diff, 0.0]
        num_thru = [0.0, 0.0, 2.0]
        if spec.orientation == L_TOWARD_LINE:
            num_11, num_22 = num_cap, num_ind
        else:
            num_11, num_22 = num_ind, num_cap
        self._coef = [
            _bilinear_biquad(num, den, k)
            for num in (num_11, num_thru, num_thru, num_22)
        ]
        self.reset()

    def reset(self, lanes: int = 1) -> None:
        super().reset(lanes)
        self._z = [np.zeros((2, lanes)) for _ in range(4)]

    def _biquad(self, idx: int, x: np.ndarray) -> np.ndarray:
        b, a = self._coef[idx]
        z = self._z[idx]
        y = b[0] * x + z[0]
        z[0] = b[1] * x - a[1] * y + z[1]
        z[1] = b[2] * x - a[2] * y
        return y

    def step(self, incident: np.ndarray) -> np.ndarray:
        incident = np.asarray(incident, dtype=np.float64)
        one_d = incident.ndim == 1
        if one_d:
            incident = incident[:, None]
        out0 = self._biquad(0, incident[0]) + self._biquad(2, incident[1])
        out1 = self._biquad(1, incident[0]) + self._biquad(3, incident[1])
        out = np.stack([out0, out1])
        return out[:, 0] if one_d else out


def matching_element(spec: MatchSpec, sample_rate: float) -> MatchingElement:
    return MatchingElement(spec, sample_rate)
