"""Command-line front end.

Subcommands: estimate-rod, estimate-rope, plan, simulate-wrap, run, report.
Exit codes: 0 success/converged, 2 non-convergence, 3 perception failure,
4 planning or execution failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness, imaging, wrap_planner
from .errors import (
    ExecutionError,
    NonConvergence,
    PerceptionError,
    PlanningError,
    RopewrapError,
)
from .harness import ScenarioOptions, run_many, run_scenario
from .simworld import World, config_from_name_or_path, preset_names

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_PERCEPTION = 3
EXIT_PLANNING = 4


def _add_common(p: argparse.ArgumentParser, multi_config: bool = False) -> None:
    if multi_config:
        p.add_argument("--config", action="append", required=True,
                       help="preset name (e.g. rod1xrope1) or world config file; repeatable")
    else:
        p.add_argument("--config", required=True,
                       help="preset name (e.g. rod1xrope1) or world config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, default=Path("out"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ropewrap",
        description="Closed-loop rope wrapping workbench (simulated). "
                    f"Presets: {', '.join(preset_names())}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-rod", help="render the scene and estimate the rod")
    _add_common(p)

    p = sub.add_parser("estimate-rope", help="estimate the rope's hue range and diameter")
    _add_common(p)

    p = sub.add_parser("plan", help="select wrap geometry and export one trajectory")
    _add_common(p)

    p = sub.add_parser("simulate-wrap", help="run a single wrap cycle and score it")
    _add_common(p)

    p = sub.add_parser("run", help="full feedback loop until both stop conditions hold")
    _add_common(p, multi_config=True)
    p.add_argument("--max-wraps", type=int, default=harness.DEFAULT_MAX_WRAPS)
    p.add_argument("--pre-wrap", action="store_true",
                   help="keep one hand-made wrap on the rod before the loop")
    p.add_argument("--unravel", action="store_true",
                   help="reset the coil and retry when the rope runs out")
    p.add_argument("--frozen", type=Path, default=None, metavar="RECORD_JSON",
                   help="replay the final parameters of a previous run without updates")
    p.add_argument("--parallel", action="store_true",
                   help="run independent scenarios on worker threads")

    p = sub.add_parser("report", help="summarize one or more run records")
    p.add_argument("records", nargs="+", type=Path,
                   help="record.json files or run output directories")
    p.add_argument("--out-dir", type=Path, default=None)
    return parser


def _options(args, **extra) -> ScenarioOptions:
    return ScenarioOptions(seed=args.seed, out_dir=args.out_dir, **extra)


def _single_config(args):
    return config_from_name_or_path(args.config, seed=args.seed)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except NonConvergence as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except PerceptionError as err:
        print(f"perception failure: {err}", file=sys.stderr)
        return EXIT_PERCEPTION
    except (PlanningError, ExecutionError) as err:
        print(f"planning failure: {err}", file=sys.stderr)
        return EXIT_PLANNING
    except RopewrapError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "estimate-rod":
        cfg = _single_config(args)
        world = World(cfg)
        frame = world.render()
        pre = harness.preprocess(world, frame, cfg)
        print(pre.rod.to_record())
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "rod_estimate.txt").write_text(pre.rod.to_record() + "\n")
        imaging.write_ppm(args.out_dir / "initial.ppm", frame.rgb)
        return EXIT_OK

    if cmd == "estimate-rope":
        cfg = _single_config(args)
        world = World(cfg)
        frame = world.render()
        pre = harness.preprocess(world, frame, cfg)
        print(pre.rope.to_record())
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "rope_estimate.txt").write_text(pre.rope.to_record() + "\n")
        return EXIT_OK

    if cmd == "plan":
        cfg = _single_config(args)
        world = World(cfg)
        frame = world.render()
        pre = harness.preprocess(world, frame, cfg)
        fb = harness.FeedbackState(radius=pre.radius, advance=harness.INITIAL_ADVANCE,
                                   t_radius_px=1.5 * pre.rope.diameter_px)
        traj = harness.plan_wrap(pre, fb, world, frame,
                                 harness.HueMaskProvider(pre.rope),
                                 cfg.reachability(), cfg)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        path = args.out_dir / "trajectory.txt"
        path.write_text(wrap_planner.export_trajectory(traj))
        print(f"R={pre.radius * 1e3:.1f}mm L'={pre.safe_distance * 1e3:.1f}mm "
              f"a={fb.advance * 1e3:.1f}mm -> {path}")
        return EXIT_OK

    if cmd == "simulate-wrap":
        cfg = _single_config(args)
        opts = _options(args, max_wraps=1)
        try:
            run_scenario(cfg, opts, scenario=args.config)
        except NonConvergence:
            pass  # a single wrap need not converge; artifacts are written
        csv_path = Path(args.out_dir) / "run.csv"
        if csv_path.exists():
            print(csv_path.read_text().strip())
        return EXIT_OK

    if cmd == "run":
        frozen = None
        if args.frozen:
            import json
            rec = json.loads(Path(args.frozen).read_text())
            frozen = (rec["final_radius_m"], rec["final_advance_m"],
                      rec["safe_distance_m"])
        opts = _options(args, max_wraps=args.max_wraps, pre_wrap=args.pre_wrap,
                        unravel=args.unravel, frozen_params=frozen)
        configs = {spec: config_from_name_or_path(spec, seed=args.seed)
                   for spec in args.config}
        records = run_many(configs, opts, parallel=args.parallel)
        for rec in records:
            status = (f"converged in {rec.wraps_to_convergence} wraps"
                      if rec.converged else "did not converge")
            print(f"{rec.scenario}: {status}; final R={rec.final_radius * 1e3:.1f}mm "
                  f"a={rec.final_advance * 1e3:.1f}mm")
        return EXIT_OK

    if cmd == "report":
        import json

        from .harness import RunRecord, WrapRow
        from .feedback import FeedbackState, WrapQuality

        records = []
        for path in args.records:
            p = Path(path)
            if p.is_dir():
                p = p / "record.json"
            d = json.loads(p.read_text())
            rows = [
                WrapRow(n=wr["n"],
                        quality=WrapQuality(height_px=wr["h_px"], area_rope=wr["S_r"],
                                            area_gap=wr["S_g"], q_radial=wr["q_r"],
                                            q_axial=wr["q_a"]),
                        state=FeedbackState(radius=wr["R_m"], advance=wr["a_m"],
                                            t_radius_px=1.0,
                                            radial_converged=wr["radial_converged"],
                                            axial_converged=wr["axial_converged"]))
                for wr in d["wraps"]
            ]
            records.append(RunRecord(
                scenario=d["scenario"], rows=rows, converged=d["converged"],
                wraps_to_convergence=d["wraps_to_convergence"],
                final_radius=d["final_radius_m"], final_advance=d["final_advance_m"],
                safe_distance=d["safe_distance_m"],
                rod_estimate_record=d.get("rod_estimate", ""),
                rope_estimate_record=d.get("rope_estimate", "")))
        csv_text, table = harness.report(records)
        print(table)
        if args.out_dir:
            args.out_dir.mkdir(parents=True, exist_ok=True)
            (args.out_dir / "report.csv").write_text(csv_text)
            (args.out_dir / "report.txt").write_text(table)
        return EXIT_OK

    raise RopewrapError(f"unknown command {cmd}")


if __name__ == "__main__":
    sys.exit(main())
