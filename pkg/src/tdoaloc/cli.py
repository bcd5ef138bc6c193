"""Command-line harness.

Subcommands
-----------
``simulate``   render a multichannel WAV for one source placement, with a
               sidecar JSON holding the ground truth.
``localize``   estimate a source position from a WAV with any method.
``bench``      run the benchmark protocol from a JSON configuration and
               write CSV/JSON reports.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench, simroom, wavio
from .errors import ConfigError, SolverError
from .geometry import MicArray, delays_from_source

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _load_array(path):
    if path is None:
        return simroom.default_array()
    return MicArray.from_json(path)


def _cmd_simulate(args):
    array = _load_array(args.array)
    room = simroom.RoomSpec(dimensions=tuple(args.room),
                            t60=args.t60, snr_db=args.snr,
                            sample_rate=args.fs)
    placement = simroom.SourcePlacement(args.azimuth, args.elevation,
                                        args.radius)
    rirs = simroom.simulate_rir(room, array, placement)
    signal = simroom.make_test_signal(args.signal, args.duration, args.fs,
                                      args.seed)
    frame = simroom.render_frame(rirs, signal, args.snr, args.seed + 1,
                                 args.fs, frame_duration=args.frame_duration)
    wavio.write_frame(args.out, frame)
    truth = placement.resolve(array)
    sidecar = {
        "position": truth.tolist(),
        "delays": delays_from_source(array, truth).tolist(),
        "azimuth_deg": args.azimuth, "elevation_deg": args.elevation,
        "radius": args.radius, "t60": args.t60, "snr_db": args.snr,
        "seed": args.seed, "sample_rate": args.fs,
        "array": array.to_json_dict(),
    }
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
    print(f"wrote {args.out} and {args.out}.json")
    return EXIT_OK


def _cmd_localize(args):
    array = _load_array(args.array)
    frame = wavio.read_frame(args.wav if len(args.wav) > 1 else args.wav[0])
    if frame.n_channels != array.n_mics:
        raise ConfigError(f"{frame.n_channels} channels for {array.n_mics} "
                          "microphones")
    try:
        result = bench.run_localize(frame, array, args.method)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    doc = {
        "method": result.method,
        "position": None if result.position is None
        else result.position.tolist(),
        "delays": None if result.delays is None else result.delays.tolist(),
        "criterion": result.criterion,
        "feasible": bool(result.feasible),
        "wall_time": result.wall_time,
    }
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if result.position is not None else EXIT_SOLVER


def _cmd_bench(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    known = {f for f in bench.BenchmarkConfig.__dataclass_fields__}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown benchmark config keys: {sorted(extra)}")
    if "methods" in doc:
        doc["methods"] = tuple(doc["methods"])
    if "conditions" in doc:
        doc["conditions"] = tuple((float(s), float(t))
                                  for s, t in doc["conditions"])
    try:
        cfg = bench.BenchmarkConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out:
        cfg.csv_path = args.out + ".csv"
        cfg.json_path = args.out + ".json"

    def progress(cond, direction, rep):
        print(f"\rcondition {cond} direction {direction} repeat {rep} ",
              end="", file=sys.stderr, flush=True)

    rows, _ = bench.run_benchmark(cfg, progress=progress)
    print("", file=sys.stderr)
    for row in rows:
        print(f"{row.method:7s} snr={row.snr_db:+.0f} t60={row.t60:.1f}  "
              f"inliers {row.inlier_rate:5.1f}%  "
              f"mean {row.inlier_mean_error:6.2f} deg  "
              f"({row.n_trials} trials)")
    if cfg.csv_path:
        print(f"reports: {cfg.csv_path}, {cfg.json_path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tdoaloc",
        description="Delay-based sound source localization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a synthetic recording")
    sim.add_argument("--out", required=True, help="output WAV path")
    sim.add_argument("--array", help="array JSON (default: benchmark array)")
    sim.add_argument("--azimuth", type=float, default=0.0)
    sim.add_argument("--elevation", type=float, default=0.0)
    sim.add_argument("--radius", type=float, default=1.7)
    sim.add_argument("--t60", type=float, default=0.0)
    sim.add_argument("--snr", type=float, default=np.inf,
                     help="per-channel SNR in dB (default: noiseless)")
    sim.add_argument("--room", type=float, nargs=3, default=[4.0, 4.0, 4.0])
    sim.add_argument("--fs", type=float, default=simroom.DEFAULT_SAMPLE_RATE)
    sim.add_argument("--duration", type=float, default=1.2,
                     help="source signal duration in seconds")
    sim.add_argument("--frame-duration", type=float, default=0.1)
    sim.add_argument("--signal", default="speech_like",
                     choices=["speech_like", "white", "chirp"])
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=_cmd_simulate)

    loc = sub.add_parser("localize", help="localize a recorded frame")
    loc.add_argument("wav", nargs="+",
                     help="one multichannel WAV or M mono WAVs")
    loc.add_argument("--array", help="array JSON (default: benchmark array)")
    loc.add_argument("--method", default="bnb", choices=list(bench.METHODS))
    loc.add_argument("--out", help="write the result JSON here")
    loc.set_defaults(func=_cmd_localize)

    ben = sub.add_parser("bench", help="run the benchmark protocol")
    ben.add_argument("config", help="benchmark configuration JSON")
    ben.add_argument("--seed", type=int, help="override the master seed")
    ben.add_argument("--out", help="report path stem (.csv/.json appended)")
    ben.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
