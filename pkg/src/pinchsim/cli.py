"""Command-line interface: run scenarios, list presets.

Exit codes: 0 run converged, 2 run finished without converging, 3 run
aborted (simulation-time failure), 1 usage/config error.
"""

import argparse
import os
import sys

from .errors import PinchSimError, SimulationAbort
from .scenario import PRESETS, builtin_scene, load_config, run


def _parse_perturb(text):
    try:
        t, finger, torque = text.split(",")
        return {"time": float(t), "finger": int(finger), "torque": float(torque)}
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected time,finger,torque (e.g. 2.0,1,0.5), got {text!r}"
        ) from None


def _parse_bias(text):
    try:
        a, b = (float(v) for v in text.split(","))
        return [a, b]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected two comma-separated degrees (e.g. 30,15), got {text!r}"
        ) from None


def build_parser():
    p = argparse.ArgumentParser(prog="sim", description="Two-fingered pinch-grasp simulator")
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a scenario from a JSON config or preset name")
    runp.add_argument("scenario", help="path to a config JSON or one of the preset names")
    runp.add_argument("--dt", type=float, help="integration step, s")
    runp.add_argument("--duration", type=float, help="simulated duration, s")
    runp.add_argument("--seed", type=int, help="random seed")
    runp.add_argument("--out", help="output directory for the CSV log")
    runp.add_argument("--log-every", type=int, help="log decimation (rows every N steps)")
    runp.add_argument("--include-gyroscopic", action="store_true",
                      help="include the object's gyroscopic torque")
    runp.add_argument("--sensor-bias", type=_parse_bias, metavar="DEG,DEG",
                      help="sensed-frame bias angles for the two fingers, degrees")
    runp.add_argument("--perturb", type=_parse_perturb, action="append", metavar="T,FINGER,NM",
                      help="one-step joint-torque impulse (repeatable)")

    sub.add_parser("scenes", help="list built-in scenes")
    return p


def _load_scenario(name):
    if os.path.exists(name):
        return load_config(name)
    return builtin_scene(name)


def cmd_run(args):
    cfg = _load_scenario(args.scenario)
    if args.dt is not None:
        cfg.dt = args.dt
    if args.duration is not None:
        cfg.duration = args.duration
    if args.seed is not None:
        cfg.seed = args.seed
    if args.log_every is not None:
        cfg.log_every = args.log_every
    if args.include_gyroscopic:
        cfg.include_gyroscopic = True
    if args.sensor_bias is not None:
        cfg.sensor["bias_angle_deg"] = args.sensor_bias
    if args.perturb:
        cfg.perturbations = cfg.perturbations + args.perturb
    if args.out is not None:
        cfg.log_path = os.path.join(args.out, os.path.basename(cfg.log_path))

    try:
        summary = run(cfg)
    except SimulationAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3
    print(f"scenario:  {cfg.name}")
    print(f"verdict:   {summary.verdict}")
    print(f"settle:    {summary.settle_time:.3f} s ({summary.settle_events} event(s))")
    print(f"forces:    f1={summary.final_forces[0]:.4f} N  f2={summary.final_forces[1]:.4f} N")
    print(f"steps:     {summary.steps} ({summary.wall_time:.1f} s wall)")
    print(f"log:       {summary.log_path}")
    return 0 if summary.verdict == "converged" else 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scenes":
            for name in PRESETS:
                print(name)
            return 0
        return cmd_run(args)
    except SimulationAbort:
        raise
    except PinchSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
