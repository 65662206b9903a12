"""
Command-line entry points.

    paircomb simulate <config> [--seed N] [--out DIR]
    paircomb analyze --tags FILE [FILE ...] --pair S:I --out DIR
    paircomb report <bundle-dir>

Exit code 0 on success; failures print one machine-readable
``error: <message>`` line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import compute_car, cross_histogram, fit_g2
from .config import ConfigError, DEFAULT_CONFIG_TEMPLATE, parse_config
from .scenarios import ReportBundle, render_report, run_scenario
from .tags import TagFileError, read_timetags


def _cmd_simulate(args: argparse.Namespace) -> int:
    if args.write_default_config:
        print(DEFAULT_CONFIG_TEMPLATE, end="")
        return 0
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    bundle = run_scenario(cfg, out_dir=args.out)
    print(f"scenario {bundle.scenario} -> {bundle.output_dir}")
    for rel in sorted(bundle.files or {}):
        print(f"  wrote {rel}")
    print("  wrote report.txt")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    try:
        start_id, stop_id = (int(part) for part in args.pair.split(":"))
    except ValueError as exc:
        raise ValueError(f"bad --pair {args.pair!r}, expected START:STOP channel ids") from exc
    streams = {}
    for path in args.tags:
        for stream in read_timetags(path):
            streams[stream.channel_id] = stream
    for chan in (start_id, stop_id):
        if chan not in streams:
            raise ValueError(f"channel {chan} not present in the given tag files")
    start, stop = streams[start_id], streams[stop_id]
    range_ticks = int(round(args.range_ns * 1e-9 / start.tick_s))
    hist = cross_histogram(start, stop, bin_ticks=args.bin_ticks, range_ticks=range_ticks)
    fit = fit_g2(hist, jitter_sigma_s=args.jitter_ps * 1e-12)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["tau_s\tcounts"]
    rows += [f"{tau:.12e}\t{int(c)}" for tau, c in zip(hist.tau_s, hist.counts)]
    (out / f"hist_{start_id}_{stop_id}.tsv").write_text("\n".join(rows) + "\n")
    lines = [
        f"pair = {start_id}:{stop_id}",
        f"n_start = {hist.n_start}",
        f"n_stop = {hist.n_stop}",
        f"fit.success = {str(fit.success).lower()}",
    ]
    if fit.success:
        car = compute_car(hist, fit, far_offset_s=args.far_offset_ns * 1e-9)
        lines += [
            f"fit.delta_nu_fit_hz = {fit.delta_nu_fit:.6g}",
            f"fit.delta_nu_corr_hz = {fit.delta_nu_corr:.6g}",
            f"fit.fwhm_s = {fit.fwhm_s:.6g}",
            f"car.cc_counts = {car.cc:.6g}",
            f"car.ac_counts = {car.ac:.6g}",
            f"car.car = {car.car:.6g}",
        ]
    else:
        lines.append(f"fit.message = {fit.message}")
    (out / f"analysis_{start_id}_{stop_id}.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    report = Path(args.bundle_dir) / "report.txt"
    if not report.is_file():
        raise FileNotFoundError(f"no report.txt in {args.bundle_dir}")
    print(report.read_text(encoding="utf-8"), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paircomb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a configured scenario")
    p_sim.add_argument("config", nargs="?", help="experiment configuration file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--out", default=None, help="output directory override")
    p_sim.add_argument(
        "--write-default-config",
        action="store_true",
        help="print the annotated reference configuration and exit",
    )
    p_sim.set_defaults(func=_cmd_simulate)

    p_ana = sub.add_parser("analyze", help="correlate channels of recorded tag files")
    p_ana.add_argument("--tags", nargs="+", required=True, help="QTT1 files")
    p_ana.add_argument("--pair", required=True, help="START:STOP channel ids, e.g. 0:1")
    p_ana.add_argument("--out", required=True, help="output directory")
    p_ana.add_argument("--bin-ticks", type=int, default=1)
    p_ana.add_argument("--range-ns", type=float, default=150.0)
    p_ana.add_argument("--far-offset-ns", type=float, default=60.0)
    p_ana.add_argument("--jitter-ps", type=float, default=0.0, help="combined two-detector sigma")
    p_ana.set_defaults(func=_cmd_analyze)

    p_rep = sub.add_parser("report", help="print the report of a finished bundle")
    p_rep.add_argument("bundle_dir")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and not args.write_default_config and args.config is None:
        print("error: simulate requires a config file (or --write-default-config)", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, TagFileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
