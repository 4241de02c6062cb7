"""Full-loop orchestration: estimate the rod and rope once, then repeat
{trace -> grasp -> plan -> execute -> evaluate -> update} until both the
radial and axial stop conditions hold.

Artifacts (frames, per-wrap CSV, trajectory dumps, a JSON run record) land
under an output directory with deterministic names, so a run with a fixed
seed is bit-reproducible.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import feedback, imaging, rope_tracing, wrap_planner
from .errors import NonConvergence, RopeExhausted, RopewrapError
from .feedback import FeedbackState, RodRegion, WrapQuality
from .imaging import Camera
from .rod_estimation import RodEstimate, RodPipelineParams, estimate_rod
from .rope_estimation import RopeEstimate, estimate_rope
from .rope_tracing import GraspSpec, HueMaskProvider, MaskProvider
from .simworld import RenderResult, World, WorldConfig
from .wrap_planner import BoxReachability, SpiralParams, WrapTrajectory

INITIAL_ADVANCE = 0.020         # m, first-wrap axial step
RADIUS_START_FACTOR = 1.5       # R_0 = 1.5 * estimated rod radius
DEFAULT_MAX_WRAPS = 8


@dataclass
class ScenarioOptions:
    seed: int = 0
    max_wraps: int = DEFAULT_MAX_WRAPS
    pre_wrap: bool = False
    unravel: bool = False
    frozen_params: tuple[float, float, float] | None = None  # (R, a, L')
    out_dir: Path | None = None
    save_depth: bool = False


@dataclass
class WrapRow:
    n: int
    quality: WrapQuality
    state: FeedbackState


@dataclass
class RunRecord:
    scenario: str
    rows: list[WrapRow]
    converged: bool
    wraps_to_convergence: int | None
    final_radius: float
    final_advance: float
    safe_distance: float
    rod_estimate_record: str
    rope_estimate_record: str
    frame_paths: list[str] = field(default_factory=list)

    @property
    def advance_sequence_mm(self) -> list[float]:
        return [r.state.advance * 1e3 for r in self.rows]

    def to_json(self) -> str:
        return json.dumps({
            "scenario": self.scenario,
            "converged": self.converged,
            "wraps_to_convergence": self.wraps_to_convergence,
            "final_radius_m": self.final_radius,
            "final_advance_m": self.final_advance,
            "safe_distance_m": self.safe_distance,
            "rod_estimate": self.rod_estimate_record,
            "rope_estimate": self.rope_estimate_record,
            "frames": self.frame_paths,
            "wraps": [
                {
                    "n": r.n,
                    "h_px": r.quality.height_px,
                    "S_r": r.quality.area_rope,
                    "S_g": r.quality.area_gap,
                    "q_r": r.quality.q_radial,
                    "q_a": r.quality.q_axial,
                    "R_m": r.state.radius,
                    "a_m": r.state.advance,
                    "radial_converged": r.state.radial_converged,
                    "axial_converged": r.state.axial_converged,
                }
                for r in self.rows
            ],
        }, indent=2)


@dataclass
class Preprocessing:
    """Per-scenario one-time results: estimates, planner geometry, region."""
    rod: RodEstimate
    rope: RopeEstimate
    region: RodRegion
    radius: float
    safe_distance: float
    scale_px_per_mm: float


def _scenario_context(scenario: str, err: RopewrapError) -> RopewrapError:
    wrapped = type(err)(f"[{scenario}] {err}")
    wrapped.__cause__ = err
    return wrapped


def rod_region_from_image(hsv: np.ndarray, rod: RodEstimate) -> RodRegion:
    """Visible rod bounds from the color image.

    Uses the rod's own hue so the bounds track the full silhouette; the
    depth channel can lose the near-tangent arcs and would bias the bottom
    edge upward.
    """
    from .rope_estimation import circular_delta

    hue_ok = np.abs(circular_delta(hsv[..., 0], rod.rod_hue)) <= 25.0
    mask = hue_ok & (hsv[..., 1] >= 0.3)
    if rod.rect is not None:
        cols = slice(rod.rect.min_x, rod.rect.max_x + 1)
    else:
        cols = slice(0, mask.shape[1])
    sub = mask[:, cols]
    counts = sub.sum(axis=1)
    rows = np.flatnonzero(counts >= max(8, sub.shape[1] // 4))
    if len(rows) == 0:
        raise NonConvergence("rod not visible in the evaluation image")
    left = rod.rect.min_x if rod.rect is not None else 0
    right = rod.rect.max_x if rod.rect is not None else mask.shape[1] - 1
    return RodRegion(top_row=int(rows[0]), bottom_row=int(rows[-1]),
                     left_col=left, right_col=right)


def preprocess(world: World, frame: RenderResult, config: WorldConfig) -> Preprocessing:
    """Rod estimation, rope estimation, and wrap geometry selection.

    Runs once per scenario; the feedback loop reuses the results.
    """
    params = RodPipelineParams(robot_plane_x=config.robot_plane_x,
                               table_z=config.table_z)
    rod = estimate_rod(frame.dmap, world.camera, params)

    forward = world.camera.rotation[:, 2]
    depth = float(np.dot(rod.center - world.camera.position, forward))
    scale_px_per_mm = world.camera.intrinsics.fx / depth / 1000.0
    rope = estimate_rope(rod.pixel_region, rod.pixel_hues,
                         (frame.hsv.shape[0], frame.hsv.shape[1]), scale_px_per_mm)

    region = rod_region_from_image(frame.hsv, rod)

    reach = config.reachability()
    origin, x_in, y_in, z_in = wrap_planner.make_spiral_frame(
        rod, start_axial=0.0,
        hang_hint=np.array([-1.0, 0.0, 0.0]),
        advance_hint=np.array([0.0, -1.0, 0.0]))
    seed_params = SpiralParams(
        radius=RADIUS_START_FACTOR * rod.radius, advance=INITIAL_ADVANCE,
        safe_distance=wrap_planner.SAFE_DISTANCE_BOUNDS[1],
        origin=origin, in_plane_x=x_in, in_plane_y=y_in, axis_dir=z_in)
    planned = wrap_planner.shrink_radius_until_reachable(
        seed_params, rod.radius, wrap_planner.SAFE_DISTANCE_BOUNDS, reach)
    return Preprocessing(rod=rod, rope=rope, region=region,
                         radius=planned.radius, safe_distance=planned.safe_distance,
                         scale_px_per_mm=scale_px_per_mm)


def plan_wrap(pre: Preprocessing, fb: FeedbackState, world: World,
              frame: RenderResult, provider: MaskProvider,
              reach: BoxReachability, config: WorldConfig) -> WrapTrajectory:
    """Trace the rope, pick the grasp, and build one wrap trajectory."""
    hsv = frame.hsv
    bounds = rope_tracing.build_subimage_bounds(pre.rod.rect, hsv.shape[:2])
    sub = hsv[bounds.min_y: bounds.max_y + 1, bounds.min_x: bounds.max_x + 1]
    m1 = np.zeros(hsv.shape[:2], dtype=bool)
    m2 = np.zeros(hsv.shape[:2], dtype=bool)
    m1[bounds.min_y: bounds.max_y + 1, bounds.min_x: bounds.max_x + 1] = provider.mask(sub)
    m2[bounds.min_y: bounds.max_y + 1, bounds.min_x: bounds.max_x + 1] = \
        HueMaskProvider(pre.rope).mask(sub)
    fused = rope_tracing.fuse_masks(m1, m2)
    sections = rope_tracing.extract_sections(fused, pre.rod, world.camera)

    hang = 2.0 * math.pi * fb.radius + pre.safe_distance
    grasp = rope_tracing.grasp_point(
        sections, GraspSpec("active", hang * 1000.0), pre.rod,
        pre.scale_px_per_mm, world.camera)

    d_m = pre.rope.diameter_mm / 1000.0
    origin, x_in, y_in, z_in = wrap_planner.make_spiral_frame(
        pre.rod, start_axial=0.0,
        hang_hint=np.array([-1.0, 0.0, 0.0]),
        advance_hint=np.array([0.0, -1.0, 0.0]))
    origin = np.array([pre.rod.center[0],
                       sections.tangent_active[1] + d_m,
                       pre.rod.center[2]])
    params = SpiralParams(radius=fb.radius, advance=fb.advance,
                          safe_distance=pre.safe_distance, origin=origin,
                          in_plane_x=x_in, in_plane_y=y_in, axis_dir=z_in)
    spiral, thetas = wrap_planner.build_spiral(params, reach)
    return wrap_planner.auxiliary_waypoints(
        grasp, spiral, thetas, params, pre.rod,
        remaining_rope=world.state.remaining, table_z=config.table_z)


def run_scenario(config: WorldConfig, options: ScenarioOptions,
                 scenario: str = "custom",
                 provider_factory=None) -> RunRecord:
    """Execute one full wrapping session against a fresh world."""
    cfg = replace(config, seed=options.seed if options.seed else config.seed)
    world = World(cfg)
    out = Path(options.out_dir) if options.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    frames: list[str] = []

    def save_frame(tag: str, frame: RenderResult) -> None:
        if not out:
            return
        path = out / f"{tag}.ppm"
        imaging.write_ppm(path, frame.rgb)
        frames.append(str(path))
        if options.save_depth:
            imaging.write_pgm16(out / f"{tag}.pgm", frame.depth_mm)

    try:
        if options.pre_wrap:
            world.add_pre_wrap()
        frame = world.render()
        save_frame("initial", frame)
        pre = preprocess(world, frame, cfg)
        provider = provider_factory(pre.rope) if provider_factory else HueMaskProvider(pre.rope)

        if options.frozen_params:
            radius, advance, safe = options.frozen_params
            pre = replace(pre, radius=radius, safe_distance=safe)
        else:
            advance = INITIAL_ADVANCE
        fb = FeedbackState(radius=pre.radius, advance=advance,
                           t_radius_px=1.5 * pre.rope.diameter_px)
        reach = cfg.reachability()

        if out:
            (out / "rod_estimate.txt").write_text(pre.rod.to_record() + "\n")
            (out / "rope_estimate.txt").write_text(pre.rope.to_record() + "\n")

        rows: list[WrapRow] = []
        converged_at: int | None = None
        for n in range(1, options.max_wraps + 1):
            frame = world.render()
            for attempt in (0, 1):
                traj = plan_wrap(pre, fb, world, frame, provider, reach, cfg)
                try:
                    world.execute_wrap(traj)
                    break
                except RopeExhausted:
                    if options.unravel and attempt == 0:
                        world.unravel()
                        frame = world.render()
                        continue
                    raise
            if out:
                (out / f"traj_{n:02d}.txt").write_text(
                    wrap_planner.export_trajectory(traj))
            frame = world.render()
            save_frame(f"wrap_{n:02d}", frame)

            h = feedback.measure_height(frame.hsv, pre.region, pre.rope)
            s_r, s_g = feedback.measure_advance(frame.hsv, pre.region, pre.rope)
            q_a = feedback.gap_fraction(s_r, s_g)
            quality = WrapQuality(height_px=h, area_rope=s_r, area_gap=s_g,
                                  q_radial=h - fb.t_radius_px, q_axial=q_a)
            if not options.frozen_params:
                fb = feedback.update_radius(fb, h)
                fb = feedback.update_advance(fb, q_a)
            fb = replace(fb, wrap_index=n)
            rows.append(WrapRow(n=n, quality=quality, state=fb))
            if fb.converged and converged_at is None:
                converged_at = n
                break

        record = RunRecord(
            scenario=scenario, rows=rows,
            converged=converged_at is not None,
            wraps_to_convergence=converged_at,
            final_radius=fb.radius, final_advance=fb.advance,
            safe_distance=pre.safe_distance,
            rod_estimate_record=pre.rod.to_record(),
            rope_estimate_record=pre.rope.to_record(),
            frame_paths=frames)
        if out:
            (out / "record.json").write_text(record.to_json())
            (out / "run.csv").write_text(render_csv(record))
        if converged_at is None and not options.frozen_params:
            raise NonConvergence(
                f"[{scenario}] no convergence within {options.max_wraps} wraps")
        return record
    except RopewrapError as err:
        if isinstance(err, NonConvergence):
            raise
        raise _scenario_context(scenario, err) from err


def run_many(configs: dict[str, WorldConfig], options: ScenarioOptions,
             parallel: bool = False) -> list[RunRecord]:
    """Run several scenarios, optionally on worker threads (one world each)."""
    def one(item):
        name, cfg = item
        opts = replace(options,
                       out_dir=(Path(options.out_dir) / name) if options.out_dir else None)
        return run_scenario(cfg, opts, scenario=name)

    items = list(configs.items())
    if parallel:
        with ThreadPoolExecutor(max_workers=min(6, len(items))) as pool:
            return list(pool.map(one, items))
    return [one(it) for it in items]


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def render_csv(record: RunRecord) -> str:
    lines = [feedback.CSV_HEADER]
    for row in record.rows:
        lines.append(feedback.csv_row(row.n, row.quality, row.state))
    return "\n".join(lines) + "\n"


def report(records: list[RunRecord]) -> tuple[str, str]:
    """Convergence summary as (csv, human-readable table).

    The table mirrors the rod-by-rope matrix layout: one row per rod, one
    column per rope, each cell listing the advance used per trial with a
    "(complete)" marker once both stop conditions held.
    """
    if not records:
        raise ValueError("no run records to report")
    csv_lines = ["scenario,wraps,converged,final_R_mm,final_a_mm,L_prime_mm,a_sequence_mm"]
    for rec in records:
        seq = ";".join(f"{a:.1f}" for a in _trial_advances(rec))
        csv_lines.append(
            f"{rec.scenario},{len(rec.rows)},{int(rec.converged)},"
            f"{rec.final_radius * 1e3:.2f},{rec.final_advance * 1e3:.2f},"
            f"{rec.safe_distance * 1e3:.1f},{seq}")

    by_name = {rec.scenario: rec for rec in records}
    rods = sorted({name.split("x")[0] for name in by_name if "x" in name})
    ropes = sorted({name.split("x")[1] for name in by_name if "x" in name})
    table: list[str] = []
    if rods and ropes:
        widths = 28
        header = " " * 8 + "".join(f"{r:<{widths}}" for r in ropes)
        table.append(header)
        for rod in rods:
            cells = []
            for rope in ropes:
                rec = by_name.get(f"{rod}x{rope}")
                cells.append(_cell_text(rec) if rec else "-")
            table.append(f"{rod:<8}" + "".join(f"{c:<{widths}}" for c in cells))
    else:
        for rec in records:
            table.append(f"{rec.scenario}: {_cell_text(rec)}")
    return "\n".join(csv_lines) + "\n", "\n".join(table) + "\n"


def _trial_advances(rec: RunRecord) -> list[float]:
    """Advance value commanded for each trial, in millimeters."""
    advances = [INITIAL_ADVANCE * 1e3]
    for row in rec.rows[:-1]:
        advances.append(row.state.advance * 1e3)
    return advances[: len(rec.rows)]


def _cell_text(rec: RunRecord) -> str:
    parts = [f"a_{i + 1}={a:.1f}" for i, a in enumerate(_trial_advances(rec))]
    if rec.converged:
        parts.append("(complete)")
    return " ".join(parts)
