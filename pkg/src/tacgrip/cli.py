"""Command-line interface.

Subcommands:
  grasp      run a closed-loop grasp episode from a scenario file
  workspace  sample finger workspaces and report hull volumes
  analyze    run the perception pipeline over a directory of PGM frames
  replay     re-run flag classification over a recorded track CSV
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .control import CONTROL_PERIOD_S, ControlThresholds, classify_frame
from .density import KdeConfig, write_density_pgm
from .episode import measure_response_latency, run_grasp
from .errors import NoDisturbanceError, TacgripError
from .kinematics import dex_rot_chain, rot_dex_chain, workspace, write_workspace_csv
from .pgm import iter_frame_files, read_pgm
from .perception import DEFAULT_CALIBRATION_RATIO, FingerPipeline
from .scenario import load_scenario
from .tactile import TactileFrame
from .tracking import ContactTrack, read_track_csv, write_track_csv


def _cmd_grasp(args):
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
        scenario.sensor = replace(scenario.sensor, seed=args.seed)
    result = run_grasp(scenario, out_dir=args.out, save_frames=args.save_frames)
    print(f"scenario {scenario.name} (seed {scenario.seed}): "
          f"final phase {result.final_phase.value}, "
          f"{len(result.episode_rows)} control ticks")
    tts = result.time_to_stable
    if tts is not None:
        print(f"time to stable: {tts:.3f} s")
    try:
        latency = measure_response_latency(result)
        print(f"disturbance response latency: {latency:.3f} s")
    except NoDisturbanceError:
        pass
    print(f"traces written to {args.out}")
    return 0


def _cmd_workspace(args):
    orders = ["dexrot", "rotdex"] if args.order == "both" else [args.order]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    volumes = {}
    for order in orders:
        chain = dex_rot_chain() if order == "dexrot" else rot_dex_chain()
        res = workspace(chain, samples_per_axis=args.samples)
        write_workspace_csv(res.points, out / f"workspace_{order}.csv")
        volumes[order] = res.hull_volume
        print(f"volume({order}) = {res.hull_volume:.1f} mm^3 "
              f"({len(res.points)} samples)")
    if len(volumes) == 2:
        smaller = min(volumes, key=volumes.get)
        larger = max(volumes, key=volumes.get)
        print(f"volume({smaller}) < volume({larger})")
    return 0


def _cmd_analyze(args):
    frames = list(iter_frame_files(args.frames))
    if not frames:
        print(f"no frame_<finger>_<seq>.pgm files in {args.frames}",
              file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kde = KdeConfig(pixel_scale_s=args.pixel_scale)

    by_finger = {}
    for finger_id, seq, path in frames:
        by_finger.setdefault(finger_id, []).append((seq, path))

    for finger_id, items in sorted(by_finger.items()):
        items.sort()
        pipe = FingerPipeline(finger_id, kde_config=kde,
                              calibration_ratio=args.calibration_ratio,
                              control_period=args.period)
        first_frame = _load_frame(items[0][1], items[0][0], finger_id, args.period)
        pipe.calibrate(first_frame)
        contacts = 0
        for seq, path in items:
            frame = _load_frame(path, seq, finger_id, args.period)
            report = pipe.process(frame)
            if report.center is not None:
                contacts += 1
            if report.field is not None and args.heatmaps:
                write_density_pgm(report.field,
                                  out / f"density_{finger_id}_{seq:06d}.pgm")
        write_track_csv(pipe.track, out / f"track_{finger_id}.csv")
        print(f"finger {finger_id}: {len(items)} frames, "
              f"{contacts} with contact, track -> track_{finger_id}.csv")
    return 0


def _load_frame(path, seq, finger_id, period):
    pixels = read_pgm(path) / 255.0
    return TactileFrame(pixels=pixels, timestamp=seq * period,
                        finger_id=finger_id)


def _cmd_replay(args):
    track = read_track_csv(args.track)
    thresholds = ControlThresholds(t1_mm=args.t1, t2_mm=args.t2)
    flags = []
    prefix = ContactTrack(finger_id=track.finger_id)
    for i, t in enumerate(track.timestamps):
        prefix.timestamps.append(t)
        prefix.centers.append(track.centers[i])
        if i > 0:
            prefix.disp_timestamps.append(t)
            prefix.displacements.append(track.displacements[i - 1])
        flag = classify_frame(prefix, thresholds, t, control_period=args.period)
        flags.append((t, flag.kind.value))

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        dest = out / f"flags_{Path(args.track).stem}.csv"
        with open(dest, "w", newline="") as fh:
            fh.write("t,flag\n")
            for t, kind in flags:
                fh.write(f"{t:.6f},{kind}\n")
        print(f"flags -> {dest}")
    counts = {}
    for _, kind in flags:
        counts[kind] = counts.get(kind, 0) + 1
    summary = ", ".join(f"{k}: {v}" for k, v in sorted(counts.items()))
    print(f"{len(flags)} samples ({summary})")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tacgrip",
        description="Tactile gripping stack: perception, control, plant "
                    "and kinematics simulation.",
    )
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--deterministic", action="store_true",
                        help="force the single-threaded deterministic loop "
                             "(always on; flag kept for interface stability)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grasp", help="run a scenario closed-loop")
    g.add_argument("--scenario", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--save-frames", action="store_true",
                   help="also write the rendered PGM frames")
    g.set_defaults(func=_cmd_grasp)

    w = sub.add_parser("workspace", help="finger workspace volumes")
    w.add_argument("--order", choices=["dexrot", "rotdex", "both"],
                   default="both")
    w.add_argument("--samples", type=int, default=9,
                   help="pressure samples per chamber axis")
    w.add_argument("--out", default=".")
    w.set_defaults(func=_cmd_workspace)

    a = sub.add_parser("analyze", help="perception over a PGM directory")
    a.add_argument("--frames", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--pixel-scale", type=float, default=0.05,
                   help="mm per pixel")
    a.add_argument("--calibration-ratio", type=float,
                   default=DEFAULT_CALIBRATION_RATIO)
    a.add_argument("--period", type=float, default=CONTROL_PERIOD_S,
                   help="seconds between frames")
    a.add_argument("--heatmaps", action="store_true",
                   help="write per-frame density PGMs")
    a.set_defaults(func=_cmd_analyze)

    r = sub.add_parser("replay", help="reclassify a recorded track")
    r.add_argument("--track", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--t1", type=float, default=0.5)
    r.add_argument("--t2", type=float, default=5.0)
    r.add_argument("--period", type=float, default=CONTROL_PERIOD_S)
    r.set_defaults(func=_cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TacgripError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
