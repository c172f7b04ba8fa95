import math
from types import SimpleNamespace

import numpy as np
import pytest

from sdlsim.elements import DelayLineSpec, MatchSpec, SwitchSpec
from sdlsim.engine import (
    BurstInjection,
    K_LINK_BARE,
    K_LINK_MATCHED,
    build_circulator,
    event_walk_oracle,
    run,
)
from sdlsim.errors import ConfigError, OracleDeclined, SimulationFault
from sdlsim.schedule import build_schedule
from sdlsim.signals import SampleBuffer, extract_phasor, make_burst
from sdlsim.touchstone import TouchstoneData

FS = 4e9
FC = 155e6
D = 1120
IDEAL_PERIOD = 4 * (D + K_LINK_BARE) / FS  # one quarter matches the loop transit

FLAT_IDEAL = DelayLineSpec(il_db=0.0, bandwidth=None, port_return_db=math.inf, echoes=())


def make_config(
    line=FLAT_IDEAL,
    switch=None,
    period=IDEAL_PERIOD,
    t_transition=0.0,
    matching=None,
    side_offset=None,
):
    if switch is None:
        switch = SwitchSpec(il_on_db=0.0, iso_off_db=math.inf, t_transition=t_transition, gamma_off=0.9)
    return SimpleNamespace(
        sample_rate=FS,
        schedule=build_schedule(period, t_transition, 0.5, FS, side_offset=side_offset),
        switch=switch,
        line_a=line,
        line_b=line,
        matching=matching,
        digest="test",
    )


def burst_at(start_sample, t_rise=10e-9, t_hold=200e-9, amplitude=1.0):
    return make_burst(FC, amplitude, start_sample / FS, t_rise, t_hold, FS)


# Safe injection samples: burst support 880 samples sits inside one state
# interval on both sides for the ideal 4488-sample period (delta 1122).
LEFT_T0 = 200
RIGHT_T0 = 1122 + 200


class TestStructure:
    def test_bare_topology(self):
        net = build_circulator(make_config())
        assert set(net.elements) == {"left_crossbar", "right_crossbar", "line_a", "line_b"}
        assert net.k_link == K_LINK_BARE == 2

    def test_matched_topology(self):
        net = build_circulator(make_config(matching=MatchSpec(0.0, 0.0)))
        assert sum(1 for k in net.elements if k.startswith("match_")) == 4
        assert net.k_link == K_LINK_MATCHED == 4

    def test_touchstone_line_accepted(self):
        freqs = np.linspace(100e6, 210e6, 23)
        s = np.zeros((23, 2, 2), dtype=complex)
        s[:, 1, 0] = s[:, 0, 1] = np.exp(-2j * math.pi * freqs * 280e-9)
        ref = SimpleNamespace(data=TouchstoneData(freqs, s), ir_len=2048)
        cfg = make_config()
        cfg.line_a = ref
        net = build_circulator(cfg)
        assert net.elements["line_a"].ir_len == 2048

    def test_schedule_rate_mismatch_rejected(self):
        cfg = make_config()
        cfg.schedule = build_schedule(IDEAL_PERIOD, 0.0, 0.5, 2e9)
        with pytest.raises(ConfigError, match="sample rate"):
            build_circulator(cfg)


class TestRun:
    def test_zero_stimuli_zero_records(self):
        net = build_circulator(make_config())
        rec = run(net, [None, None, None, None], 3000)
        for buf in rec.port_out:
            assert np.all(buf.samples == 0.0)
        assert rec.n_samples == 3000

    def test_ideal_burst_port1_to_port2_exact(self):
        net = build_circulator(make_config())
        stim = burst_at(LEFT_T0)
        n = len(stim) + D + 100
        rec = run(net, [stim, None, None, None], n)
        expected = np.zeros(n)
        expected[D + 2 : D + 2 + len(stim)] = stim.samples
        np.testing.assert_allclose(rec.port_out[1].samples, expected, atol=1e-12)
        for p in (0, 2, 3):
            assert np.max(np.abs(rec.port_out[p].samples)) == 0.0

    def test_matched_identity_adds_two_link_samples(self):
        net = build_circulator(make_config(matching=MatchSpec(0.0, 0.0)))
        stim = burst_at(LEFT_T0)
        n = len(stim) + D + 100
        rec = run(net, [stim, None, None, None], n)
        expected = np.zeros(n)
        expected[D + 4 : D + 4 + len(stim)] = stim.samples
        np.testing.assert_allclose(rec.port_out[1].samples, expected, atol=1e-12)

    @pytest.mark.parametrize(
        "inject,expect,t0",
        [(1, 2, LEFT_T0), (2, 3, RIGHT_T0), (3, 4, LEFT_T0), (4, 1, RIGHT_T0)],
    )
    def test_circulation_cycle(self, inject, expect, t0):
        net = build_circulator(make_config())
        stim = burst_at(t0)
        n = len(stim) + D + 100
        stimuli = [None] * 4
        stimuli[inject - 1] = stim
        rec = run(net, stimuli, n)
        arr = t0 + D + 2
        ph = extract_phasor(
            SampleBuffer(FS, rec.port_out[expect - 1].samples), FC,
            window_start=arr + 48, window_len=560,
        )
        assert ph.amplitude >= 0.99
        for p in range(4):
            if p != expect - 1:
                assert np.max(np.abs(rec.port_out[p].samples)) < 1e-6

    def test_determinism(self):
        cfg = make_config(
            line=DelayLineSpec(echoes=((3, -20.0),)),
            switch=SwitchSpec(),
            period=1.14e-6,
            t_transition=2e-9,
        )
        stim = burst_at(LEFT_T0)
        a = run(build_circulator(cfg), [stim, None, None, None], 9000)
        b = run(build_circulator(cfg), [stim, None, None, None], 9000)
        for x, y in zip(a.port_out, b.port_out):
            assert np.array_equal(x.samples, y.samples)

    def test_linearity_power_of_two_exact(self):
        cfg = make_config(line=DelayLineSpec(), switch=SwitchSpec(), period=1.14e-6, t_transition=2e-9)
        base = burst_at(LEFT_T0)
        scaled = burst_at(LEFT_T0, amplitude=4.0)
        a = run(build_circulator(cfg), [base, None, None, None], 8000)
        b = run(build_circulator(cfg), [scaled, None, None, None], 8000)
        for x, y in zip(a.port_out, b.port_out):
            assert np.array_equal(4.0 * x.samples, y.samples)

    def test_linearity_general_scale(self):
        cfg = make_config(switch=SwitchSpec(), period=1.14e-6, t_transition=2e-9)
        a = run(build_circulator(cfg), [burst_at(LEFT_T0), None, None, None], 8000)
        b = run(build_circulator(cfg), [burst_at(LEFT_T0, amplitude=3.0), None, None, None], 8000)
        for x, y in zip(a.port_out, b.port_out):
            np.testing.assert_allclose(3.0 * x.samples, y.samples, atol=1e-12)

    def test_nan_stimulus_faults_with_index(self):
        net = build_circulator(make_config())
        bad = np.zeros(500)
        bad[100] = np.nan
        with pytest.raises(SimulationFault) as exc:
            run(net, [SampleBuffer(FS, bad), None, None, None], 4000)
        assert 100 <= exc.value.sample_index <= 100 + D + 8

    def test_link_energy_accounting(self):
        net = build_circulator(make_config())
        stim = burst_at(LEFT_T0)
        rec = run(net, [stim, None, None, None], len(stim) + D + 100)
        assert len(rec.link_energy) == 8
        e_in = float(np.sum(stim.samples**2))
        assert rec.link_energy["left_crossbar->line_a"] == pytest.approx(e_in, rel=1e-12)
        assert rec.link_energy["line_a->right_crossbar"] == pytest.approx(e_in, rel=1e-12)
        assert rec.link_energy["left_crossbar->line_b"] == 0.0

    def test_matched_link_energy_has_16_entries(self):
        net = build_circulator(make_config(matching=MatchSpec(0.0, 0.0)))
        rec = run(net, [burst_at(LEFT_T0), None, None, None], 4000)
        assert len(rec.link_energy) == 16

    def test_stimulus_longer_than_run_rejected(self):
        net = build_circulator(make_config())
        with pytest.raises(ValueError, match="longer"):
            run(net, [burst_at(0), None, None, None], 100)

    @pytest.mark.parametrize("seed", range(4))
    def test_passivity_randomized(self, seed):
        rng = np.random.default_rng(seed)
        line = DelayLineSpec(
            il_db=float(rng.uniform(3.0, 6.0)),
            echoes=((2, float(rng.uniform(-26, -16))), (3, float(rng.uniform(-45, -35)))),
            port_return_db=float(rng.uniform(10.0, 20.0)),
        )
        switch = SwitchSpec(
            il_on_db=float(rng.uniform(0.5, 1.5)),
            iso_off_db=float(rng.uniform(25.0, 35.0)),
            t_transition=2e-9,
            gamma_off=float(rng.uniform(0.5, 0.95)),
        )
        cfg = make_config(line=line, switch=switch, period=1.14e-6, t_transition=2e-9)
        stimuli = [
            SampleBuffer(FS, rng.standard_normal(6000) * 0.1) for _ in range(4)
        ]
        rec = run(build_circulator(cfg), stimuli, 16000)
        assert rec.output_energy() <= rec.input_energy() * (1 + 1e-9)


class TestLanes:
    def test_lane_independence(self):
        net = build_circulator(make_config())
        stim = burst_at(LEFT_T0)
        n = len(stim) + D + 100
        single = run(net, [stim, None, None, None], n)

        net.reset(lanes=2)
        ext = np.zeros((4, 2))
        outs = np.zeros((n, 4, 2))
        for i in range(n):
            ext[0, 0] = stim.samples[i] if i < len(stim) else 0.0
            ext[0, 1] = 0.0
            outs[i] = net.step(ext)
        assert np.array_equal(outs[:, 1, 0], single.port_out[1].samples)
        assert np.all(outs[:, :, 1] == 0.0)

    def test_lane_schedule_table(self):
        net = build_circulator(make_config())
        s1 = build_schedule(IDEAL_PERIOD, 0.0, 0.5, FS)
        s2 = build_schedule(1.14e-6, 0.0, 0.5, FS)
        net.set_lane_schedules([s1, s2])
        with pytest.raises(ConfigError, match="lane count"):
            net.reset(lanes=3)
        net.reset(lanes=2)
        out = net.step(np.zeros((4, 2)))
        assert out.shape == (4, 2)


class TestOracle:
    def oracle_config(self):
        line = DelayLineSpec(
            il_db=2.0,
            bandwidth=None,
            echoes=((2, -20.0), (3, -15.0)),
            port_return_db=15.0,
        )
        switch = SwitchSpec(il_on_db=0.5, iso_off_db=math.inf, t_transition=0.0, gamma_off=0.9)
        return make_config(line=line, switch=switch)

    def test_ideal_through_prediction(self):
        cfg = make_config()
        inj = BurstInjection(1, LEFT_T0 / FS, 880 / FS)
        arrivals = event_walk_oracle(cfg, inj)
        assert len(arrivals) == 1
        a = arrivals[0]
        assert a.port == 2
        assert a.time == pytest.approx((LEFT_T0 + D) / FS)
        assert a.amplitude == pytest.approx(1.0)
        assert a.path == "through"

    def test_full_arrival_set_against_engine(self):
        cfg = self.oracle_config()
        t_rise, t_hold = 10e-9, 150e-9
        n0 = RIGHT_T0 + 100
        inj = BurstInjection(2, n0 / FS, (2 * 40 + 600) / FS)
        arrivals = event_walk_oracle(cfg, inj)
        assert [a.path for a in arrivals] == ["port-reflection", "through", "echo-k2", "echo-k3"]
        assert [a.port for a in arrivals] == [2, 3, 4, 1]

        net = build_circulator(cfg)
        stim = make_burst(FC, 1.0, n0 / FS, t_rise, t_hold, FS)
        n = n0 + 3 * D + 800
        rec = run(net, [None, stim, None, None], n)
        for arr in arrivals:
            n_arr = round(arr.time * FS) + net.k_link
            ref = make_burst(FC, 1.0, n_arr / FS, t_rise, t_hold, FS)
            w0, wl = n_arr + 48, 560
            measured = extract_phasor(SampleBuffer(FS, rec.port_out[arr.port - 1].samples), FC, w0, wl)
            expected = extract_phasor(ref, FC, w0, wl)
            assert abs(measured.complex - arr.amplitude * expected.complex) <= 1e-6 * abs(
                arr.amplitude
            )

    def test_declines_boundary_straddle(self):
        cfg = make_config()
        start = (2 * 1122 - 100) / FS  # 880-sample burst crosses the left flip
        with pytest.raises(OracleDeclined):
            event_walk_oracle(cfg, BurstInjection(1, start, 880 / FS))

    def test_domain_restrictions(self):
        with pytest.raises(ValueError, match="instantaneous"):
            event_walk_oracle(make_config(t_transition=2e-9, switch=SwitchSpec()),
                              BurstInjection(1, LEFT_T0 / FS, 1e-7))
        with pytest.raises(ValueError, match="isolation"):
            event_walk_oracle(
                make_config(switch=SwitchSpec(il_on_db=0.0, iso_off_db=30.0, t_transition=0.0)),
                BurstInjection(1, LEFT_T0 / FS, 1e-7),
            )
        with pytest.raises(ValueError, match="flat"):
            event_walk_oracle(make_config(line=DelayLineSpec()), BurstInjection(1, LEFT_T0 / FS, 1e-7))
        with pytest.raises(ValueError, match="matching"):
            event_walk_oracle(make_config(matching=MatchSpec(0.0, 0.0)),
                              BurstInjection(1, LEFT_T0 / FS, 1e-7))
