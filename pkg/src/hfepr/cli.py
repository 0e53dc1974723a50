"""Command line front end.

    hfepr run FILE [--out DIR] [--format csv|json] [--seed N] [--workers N]
    hfepr validate FILE [FILE ...]
    hfepr describe FILE

Exit codes: 0 on success, 1 when a file fails to parse or validate,
2 when a run fails after a clean parse.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings

from .acquisition import shot_plan
from .constants import CONSTANTS
from .errors import DomainError, SimulationWarning
from .expdsl import (
    ExperimentConfig,
    ExperimentSyntaxError,
    emit_dataset,
    parse_experiment,
    render_config,
    run_experiment,
)
from .pulses import duration_for_angle, excitation_window_mt, flip_angle
from .resonator import b1_from_power, ringdown_time_s
from .thermal import two_level_polarization


def _print_errors(path: str, exc: ExperimentSyntaxError) -> None:
    for err in exc.errors:
        print(f"{path}:{err.line}:{err.column}: {err.message}", file=sys.stderr)
        if err.snippet:
            print(f"    {err.snippet}", file=sys.stderr)


def _load(path: str) -> ExperimentConfig | None:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"{path}: {exc.strerror or exc}", file=sys.stderr)
        return None
    try:
        return parse_experiment(text)
    except ExperimentSyntaxError as exc:
        _print_errors(path, exc)
        return None


def _override_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    # Rendering with the new seed and reparsing keeps raw table, metadata
    # echo and assembled plan consistent in one step.
    config.raw["sweep"]["seed"] = seed
    return parse_experiment(render_config(config))


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args.file)
    if config is None:
        return 1
    if args.seed is not None:
        config = _override_seed(config, args.seed)
    fmt = args.format or config.output_format
    try:
        ds = run_experiment(config, workers=args.workers)
        text = emit_dataset(ds, fmt)
    except (DomainError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2
    name = config.output_path or os.path.splitext(os.path.basename(args.file))[0] + "." + fmt
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, name)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    n = ds.values.size
    print(f"wrote {out_path} ({n} points, {fmt})")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    status = 0
    for path in args.files:
        config = _load(path)
        if config is None:
            status = 1
        else:
            print(f"{path}: ok")
    return status


def cmd_describe(args: argparse.Namespace) -> int:
    config = _load(args.file)
    if config is None:
        return 1
    try:
        _describe(config)
    except (DomainError, ValueError) as exc:
        print(f"describe failed: {exc}", file=sys.stderr)
        return 2
    return 0


def _describe(config: ExperimentConfig) -> None:
    sysm = config.system
    res = config.resonator
    elec = sysm.electron
    g = elec.g_iso
    b1 = b1_from_power(res)
    carrier = config.carrier_ghz
    center_t = carrier * 1e9 * CONSTANTS.h / (g * CONSTANTS.muB)

    print(f"system        {sysm.name}  (S = {elec.s}, {len(sysm.nuclei)} nuclear species, "
          f"Hilbert dimension {sysm.dimension})")
    print(f"temperature   {config.temperature_k} K, two-level polarization "
          f"{two_level_polarization(carrier, config.temperature_k):.4f}")
    print(f"resonator     {res.freq_ghz} GHz, n = {res.n_halfwaves}: length {res.length_m * 1e3:.3f} mm, "
          f"FSR {res.fsr_ghz:.3f} GHz, Q = {res.q:.1f}")
    print(f"              B1 = {b1 * 1e3:.4g} uT rotating at {res.incident_power_w * 1e3:.3g} mW "
          f"({res.polarization_mode}), ringdown {ringdown_time_s(res.q, res.freq_ghz) * 1e9:.2f} ns")
    print(f"              pi/2 at this B1: {duration_for_angle(math.pi / 2, b1, g) * 1e9:.1f} ns")
    print(f"carrier       {carrier} GHz, resonance center {center_t:.4f} T (g_iso = {g:.6g})")
    for k, p in enumerate(config.seq.pulses, start=1):
        print(f"pulse {k}       {p.duration_s * 1e9:.0f} ns, flip {math.degrees(flip_angle(p, g)):.1f} deg, "
              f"window {excitation_window_mt(p.duration_s, g):.3f} mT")
    print(f"sequence      {config.seq.kind}, tau = {config.seq.tau_s * 1e6:.3f} us")
    plan = config.plan
    n_points = plan.axis1.values.size
    if plan.axis2 is not None:
        n_points *= plan.axis2.values.size
    if plan.axis1.name == "rf":
        n_points += 1  # reference echo
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SimulationWarning)
        wall = shot_plan(n_points, plan.shots_per_point, plan.repetition_time_s, t1_s=elec.t1_s)
    lo, hi = plan.axis1.values[0], plan.axis1.values[-1]
    print(f"sweep         {plan.axis1.name}: {lo:g}..{hi:g} {plan.axis1.unit}, "
          f"{plan.axis1.values.size} points x {plan.shots_per_point} shot(s)")
    if plan.axis2 is not None:
        print(f"              x tau: {plan.axis2.values[0] * 1e6:g}..{plan.axis2.values[-1] * 1e6:g} us, "
              f"{plan.axis2.values.size} points")
    if plan.repetition_time_s < 3.0 * elec.t1_s:
        print(f"note          repetition time {plan.repetition_time_s:g} s is below 3*T1 = "
              f"{3 * elec.t1_s:g} s; echoes will be partially saturated")
    print(f"wall time     {wall:.1f} s estimated")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="hfepr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment file and write the dataset")
    p_run.add_argument("file")
    p_run.add_argument("--out", default=".", help="output directory (default .)")
    p_run.add_argument("--format", choices=("csv", "json"), default=None,
                       help="override the output format from the file")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="parse and cross-check files without running")
    p_val.add_argument("files", nargs="+")
    p_val.set_defaults(func=cmd_validate)

    p_desc = sub.add_parser("describe", help="print derived quantities for an experiment file")
    p_desc.add_argument("file")
    p_desc.set_defaults(func=cmd_describe)

    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
