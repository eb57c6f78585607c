"""Command-line driver: deterministic sweeps and tables as CSV.

Subcommands map to figure families: ``psd`` (analytic output-noise
spectrum at one operating point), ``rms-sweep`` (RMS noise vs photocurrent
and band edge), ``event-sweep`` (noise/leak/total event rates vs
photocurrent), ``fig7`` (normalized noise-event rate vs normalized
threshold), ``synth`` (one raw contrast path, optionally with its event
stream).  Every CSV starts with ``#`` comments echoing the effective
configuration, so (config, seed) determines every output byte.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .estimators import fig7_curve, write_fig7_csv
from .events import EventGenConfig, LeakModel, generate_events
from .events import write_event_csv as write_event_dump_csv
from .sweep import (
    SweepSpec,
    _pixel_params,
    _point_seed,
    config_echo,
    parse_config,
    psd_grid,
    run_sweep,
    sweep_dt,
    write_event_csv,
    write_rms_csv,
)
from .synth import synthesize_path


def _load_spec(args) -> SweepSpec:
    if args.config is None:
        spec = SweepSpec()
    else:
        text = Path(args.config).read_text(encoding="utf-8")
        spec = parse_config(text, source=str(args.config))
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    if args.threads is not None:
        spec = replace(spec, threads=args.threads)
    return spec


def _cmd_psd(spec: SweepSpec, args) -> None:
    freqs, psd = psd_grid(spec)
    with open(args.out, "w") as f:
        for line in config_echo(spec):
            f.write(f"# {line}\n")
        f.write("f_hz,psd\n")
        for fr, p in zip(freqs, psd):
            f.write(f"{float(fr)!r},{float(p)!r}\n")


def _cmd_rms_sweep(spec: SweepSpec, args) -> None:
    rows, errors = run_sweep(spec, "rms")
    write_rms_csv(spec, rows, errors, args.out)


def _cmd_event_sweep(spec: SweepSpec, args) -> None:
    rows, errors = run_sweep(spec, "event")
    write_event_csv(spec, rows, errors, args.out)


def _cmd_fig7(spec: SweepSpec, args) -> None:
    points = fig7_curve(spec.fig7_f_3db, spec.fig7_r_values,
                        duration_cycles=spec.fig7_duration_cycles,
                        dt_cycles=spec.fig7_dt_cycles,
                        seed=spec.master_seed, threads=spec.threads)
    write_fig7_csv(points, args.out, header_comments=config_echo(spec))


def _cmd_synth(spec: SweepSpec, args) -> None:
    params = _pixel_params(spec, spec.point_i_photo, spec.point_i_pr)
    dt = sweep_dt(spec, params)
    rng, seed_used = _point_seed(spec.master_seed, spec.point_i_photo,
                                 spec.point_i_pr)
    path = synthesize_path(params, spec.synth_duration, dt, rng=rng)
    comments = config_echo(spec) + [f"seed_used = {seed_used}"]
    with open(args.out, "w") as f:
        for line in comments:
            f.write(f"# {line}\n")
        f.write("t_s,contrast\n")
        for i, s in enumerate(path.samples):
            f.write(f"{i * dt!r},{float(s)!r}\n")
    if args.events_out is not None:
        config = EventGenConfig(
            theta_on=spec.theta_values[0], theta_off=spec.theta_values[0],
            t_refractory=spec.t_refractory,
            max_events_per_step=spec.max_events_per_step,
            leak=LeakModel(i_leak_dark=spec.i_leak_dark,
                           eta_parasitic=spec.eta_parasitic,
                           c_amp_in=spec.c_amp_in))
        stream = generate_events(path, config, i_photo=spec.point_i_photo)
        write_event_dump_csv(stream, args.events_out,
                             header_comments=comments)


_COMMANDS = {
    "psd": (_cmd_psd, "analytic output-noise PSD at the configured point"),
    "rms-sweep": (_cmd_rms_sweep,
                  "RMS noise / corner / shot fraction over the grid"),
    "event-sweep": (_cmd_event_sweep,
                    "noise, leak and total event rates over the grid"),
    "fig7": (_cmd_fig7,
             "normalized noise-event rate vs normalized threshold"),
    "synth": (_cmd_synth, "one synthesized contrast path (and its events)"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dvsnoise",
        description="Pixel-level noise simulator for dynamic vision "
                    "sensors: spectra, sample paths and event rates.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None,
                       help="key = value configuration file")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--seed", type=int, default=None,
                       help="override master_seed")
        p.add_argument("--threads", type=int, default=None,
                       help="override worker thread count")
        if name == "synth":
            p.add_argument("--events-out", default=None,
                           help="also write the event stream CSV here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = _load_spec(args)
        _COMMANDS[args.command][0](spec, args)
    except (ValueError, OSError) as exc:
        print(f"dvsnoise {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
