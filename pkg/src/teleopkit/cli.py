"""Command-line entry point.

Subcommands:
    run               launch the pipeline (gateway + arms) until stopped
    measure-latency   step-injection latency harness against a fresh pipeline
    replay            drive a scripted operator session through the gateway
    validate-dataset  structural checks on an exported dataset tree
    config            print-default | print-bimanual

Exit codes: 0 success, 1 completed with violations/failures, 2 fatal
(bad config, bind failure, unreadable input).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import signal
import sys
from pathlib import Path

from . import config as config_mod
from . import replay as replay_mod
from .config import ConfigError, LaunchProfile
from .latency import expected_band, measure_latency
from .pipeline import DEFAULT_PLANNER_HZ, Pipeline
from .validate import validate_dataset

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_FATAL = 2


def _load_profile(args: argparse.Namespace) -> LaunchProfile:
    if getattr(args, "profile", None):
        profile = config_mod.load_profile(args.profile)
    else:
        profile = config_mod.default_profile()
    overrides = {}
    if getattr(args, "port", None) is not None:
        overrides["gateway_port"] = args.port
    if getattr(args, "host", None):
        overrides["gateway_host"] = args.host
    if getattr(args, "output", None):
        overrides["output_root"] = args.output
    if getattr(args, "clock", None):
        overrides["clock"] = args.clock
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "video_mode", None):
        overrides["video_mode"] = args.video_mode
    return dataclasses.replace(profile, **overrides) if overrides else profile


def _cmd_run(args: argparse.Namespace) -> int:
    profile = _load_profile(args)
    pipeline = Pipeline(profile)
    try:
        pipeline.start()
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return EXIT_FATAL

    print(f"gateway listening on {pipeline.gateway_url}")
    for arm in profile.arms:
        label = arm.namespace or "(unprefixed)"
        print(f"arm {label}: endpoint={arm.endpoint}, cameras={[c.name for c in arm.cameras]}")
    print(f"dataset root: {profile.output_root} (video mode {profile.video_mode})")

    signal.signal(signal.SIGINT, lambda *_: pipeline.stop_event.set())
    signal.signal(signal.SIGTERM, lambda *_: pipeline.stop_event.set())
    try:
        if args.duration is not None:
            pipeline.run_for(args.duration)
        else:
            while not pipeline.stop_event.is_set():
                pipeline.run_for(1.0)
    finally:
        pipeline.shutdown()
    print("pipeline stopped")
    return EXIT_OK


def _cmd_measure_latency(args: argparse.Namespace) -> int:
    profile = _load_profile(args)
    pipeline = Pipeline(profile, planner_hz=args.planner_hz, gateway_port=0)
    try:
        pipeline.start()
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        report = measure_latency(
            pipeline,
            namespace=args.namespace,
            trials=args.trials,
            epsilon_m=args.epsilon_mm / 1e3,
            step_m=args.step_mm / 1e3,
            timeout_s=args.timeout,
        )
    finally:
        pipeline.shutdown()

    print(report.summary())
    if not report.succeeded:
        return EXIT_VIOLATIONS
    sim = pipeline.unit(args.namespace).profile.sim
    lo, hi = expected_band(
        sim, args.epsilon_mm / 1e3, args.step_mm / 1e3, 1.0 / args.planner_hz
    )
    print(
        f"expected band: [{lo * 1e3:.1f}, {hi * 1e3:.1f}] ms "
        f"(transport {sim.transport_delay * 1e3:.0f} ms + lag crossing, +10% margin)"
    )
    in_band = lo * 1e3 <= report.mean_ms <= hi * 1e3
    print(f"mean within band: {'yes' if in_band else 'NO'}")
    if report.failed_count:
        return EXIT_VIOLATIONS
    return EXIT_OK if in_band else EXIT_VIOLATIONS


def _cmd_replay(args: argparse.Namespace) -> int:
    profile = _load_profile(args)
    if args.clock is None:
        profile = dataclasses.replace(profile, clock="virtual")
    try:
        if args.script == "pick-place":
            text = replay_mod.build_pick_place_script()
        elif args.script == "hold":
            text = replay_mod.build_hold_script()
        else:
            text = Path(args.script).read_text()
    except OSError as exc:
        print(f"cannot read script: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        events = replay_mod.parse_script(text)
    except replay_mod.ScriptError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return EXIT_FATAL

    pipeline = Pipeline(profile, gateway_port=args.port if args.port else 0)
    try:
        pipeline.start()
    except OSError as exc:
        print(f"startup failed: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        driver = replay_mod.ReplayDriver(pipeline, namespace=args.namespace)
        result = driver.run(events)
    finally:
        pipeline.shutdown()

    unit = pipeline.unit(args.namespace)
    print(
        f"replayed {result.events_sent} events ({result.poses_sent} poses); "
        f"exported {unit.writer.episode_count} episode(s) to {unit.writer.root}"
    )
    for err in result.errors + unit.export_errors:
        print(f"  problem: {err}", file=sys.stderr)
    return EXIT_VIOLATIONS if (result.errors or unit.export_errors) else EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    root = Path(args.root)
    if not root.exists():
        print(f"no such dataset root: {root}", file=sys.stderr)
        return EXIT_FATAL
    report = validate_dataset(root)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def _cmd_config(args: argparse.Namespace) -> int:
    if args.what == "print-default":
        print(config_mod.default_toml(), end="")
    elif args.what == "print-bimanual":
        print(config_mod.bimanual_toml(), end="")
    else:
        print(f"unknown config action {args.what!r}", file=sys.stderr)
        return EXIT_FATAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teleopkit",
        description="Phone-style 6-DoF teleoperation pipeline with episode recording.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--profile", help="TOML profile path (defaults built in)")
        p.add_argument("--port", type=int, help="gateway port override")
        p.add_argument("--host", help="gateway host override")
        p.add_argument("--output", help="dataset output root override")
        p.add_argument("--clock", choices=["wall", "virtual"], help="clock mode override")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--video-mode", choices=["mp4", "images"], dest="video_mode")

    p_run = sub.add_parser("run", help="launch gateway + arm pipelines")
    common(p_run)
    p_run.add_argument("--duration", type=float, help="stop after this many seconds")
    p_run.set_defaults(fn=_cmd_run)

    p_lat = sub.add_parser("measure-latency", help="step-injection latency harness")
    common(p_lat)
    p_lat.add_argument("--namespace", default="", help="arm namespace to probe")
    p_lat.add_argument("--trials", type=int, default=20)
    p_lat.add_argument("--epsilon-mm", type=float, default=2.0, dest="epsilon_mm")
    p_lat.add_argument("--step-mm", type=float, default=20.0, dest="step_mm")
    p_lat.add_argument("--timeout", type=float, default=5.0, help="per-trial timeout (s)")
    p_lat.add_argument("--planner-hz", type=float, default=DEFAULT_PLANNER_HZ, dest="planner_hz")
    p_lat.set_defaults(fn=_cmd_measure_latency)

    p_rep = sub.add_parser("replay", help="drive a scripted operator session")
    common(p_rep)
    p_rep.add_argument(
        "script",
        help="JSONL script path, or built-ins 'pick-place' / 'hold'",
    )
    p_rep.add_argument("--namespace", default="", help="namespace to drive")
    p_rep.set_defaults(fn=_cmd_replay)

    p_val = sub.add_parser("validate-dataset", help="check an exported dataset")
    p_val.add_argument("root", help="dataset root directory")
    p_val.set_defaults(fn=_cmd_validate)

    p_cfg = sub.add_parser("config", help="configuration utilities")
    p_cfg.add_argument("what", choices=["print-default", "print-bimanual"])
    p_cfg.set_defaults(fn=_cmd_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except KeyboardInterrupt:
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
