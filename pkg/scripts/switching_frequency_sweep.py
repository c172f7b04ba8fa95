#!/usr/bin/env python3
"""Locate the optimum switching frequency against the quarter-wave rule.

For a link delay of tau plus one crossbar latency t_link per hop, leakage
through the commutation cancels when the side-to-side control offset equals
the one-way link delay, i.e. at f_mod = 1 / (4 (tau + t_link)). This script
sweeps commutation periods on the sample grid around that point, reports
the measured optimum and its distance from the rule, and writes a CSV plus
an SVG of worst-case isolation and insertion loss versus f_mod.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from sdlsim.analysis import modfreq_sweep  # noqa: E402
from sdlsim.cli import load_config, write_svg, _csv_header, _fmt, _write_text  # noqa: E402
from sdlsim.elements import DelayLineSpec  # noqa: E402
from sdlsim.engine import K_LINK_BARE, K_LINK_MATCHED  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--config", default=str(ROOT / "configs" / "paper.yaml"), help="YAML config"
    )
    parser.add_argument("--out", default="out/modfreq", help="artifact directory")
    parser.add_argument("--span", type=int, default=12, help="period steps either side")
    parser.add_argument("--step", type=int, default=8, help="period step in samples")
    args = parser.parse_args()

    config = load_config(args.config)
    if not isinstance(config.line_a, DelayLineSpec):
        print("config error: this study needs an analytic line delay", file=sys.stderr)
        return 1
    fs = config.sample_rate
    k_link = K_LINK_MATCHED if config.matching is not None else K_LINK_BARE
    t_link = k_link / fs
    f_rule = 1.0 / (4.0 * (config.line_a.tau + t_link))
    n_rule = 4 * round(fs / f_rule / 4.0)
    print(f"quarter-wave rule: f_mod = {f_rule / 1e3:.3f} kHz "
          f"(period {n_rule} samples at {fs / 1e9:g} GS/s)")

    steps = range(-args.span, args.span + 1)
    periods = [n_rule + args.step * k for k in steps if n_rule + args.step * k >= 8]
    values = sorted(fs / n for n in periods)
    f0 = 0.5 * (config.band[0] + config.band[1])
    points = modfreq_sweep(
        config, values, f0,
        settle=config.settle_periods, measure=config.measure_periods,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = _csv_header(config, "switching_frequency_sweep")
    lines.append("f_mod_hz,f_mod_achieved_hz,il_db,iso_db")
    for pt in points:
        if pt.note:
            print(f"warning: {pt.f_mod:.6g} Hz skipped: {pt.note}", file=sys.stderr)
        lines.append(",".join(
            [_fmt(pt.f_mod), _fmt(pt.f_mod_achieved), _fmt(pt.il_db), _fmt(pt.iso_db)]
        ))
    csv = out / "modfreq.csv"
    _write_text(csv, lines)

    ok = [pt for pt in points if pt.note is None]
    xs = [pt.f_mod_achieved / 1e3 for pt in ok]
    write_svg(
        out / "modfreq.svg", config, "switching_frequency_sweep",
        f"isolation vs switching frequency at {f0 / 1e6:.3f} MHz drive",
        "switching frequency / kHz", "dB",
        [("worst isolation", xs, [pt.iso_db for pt in ok]),
         ("worst insertion loss", xs, [pt.il_db for pt in ok])],
    )

    best = max(ok, key=lambda pt: pt.iso_db)
    print(f"measured optimum: {best.iso_db:.2f} dB isolation at "
          f"{best.f_mod_achieved / 1e3:.3f} kHz "
          f"({abs(best.f_mod_achieved - f_rule) / 1e3:.3f} kHz from the rule)")
    print(f"wrote {csv} and {out / 'modfreq.svg'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
