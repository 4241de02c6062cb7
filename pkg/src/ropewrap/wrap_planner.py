"""Spiral wrapping path generation and the motions around it.

The gripper follows an inward spiral in the rod's cross-section plane:

    x = R cos(t) - (2 pi R + L' - t R) sin(t)
    y = R sin(t) + (2 pi R + L' - t R) cos(t)
    z = a t / (2 pi)

with t in [0, 2 pi]. Here x points toward the side where the active section
hangs (the camera side), y points down, and z along the wrap advance
direction. R is the wrap radius (rod radius plus a correction, treated as a
single quantity), L' the safe distance keeping the gripper clear of the rod,
and a the axial advance per wrap. The gripper orientation turns by the same
angle t about the rod axis as it goes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NoFeasibleSafeDistance, RadiusUnderflow, TrajectoryIncomplete, Unreachable
from .geometry import GripperPose, IDENTITY_QUAT, quat_from_axis_angle, quat_multiply
from .rod_estimation import RodEstimate

THETA_SAMPLES = 64
SAFE_DISTANCE_BOUNDS = (0.020, 0.060)  # m
SAFE_DISTANCE_GRID = 0.005             # m
RADIUS_SHRINK_STEP = 0.005             # m
ENTRY_OFFSET = 0.040                   # m along the gripper opening axis
DEFAULT_WORKSPACE = (np.array([0.15, -0.45, 0.0]), np.array([0.65, 0.45, 0.55]))


@dataclass(frozen=True)
class BoxReachability:
    """Closed axis-aligned workspace box; poses on the boundary count as
    reachable. Stands in for the robot's inverse kinematics."""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    def reachable(self, pose: GripperPose) -> bool:
        p = pose.position
        return bool(np.all(p >= self.lo - 1e-12) and np.all(p <= self.hi + 1e-12))

    @staticmethod
    def default() -> "BoxReachability":
        return BoxReachability(*DEFAULT_WORKSPACE)


@dataclass(frozen=True)
class SpiralParams:
    """Geometry of one wrap of the spiral in the rod cross-section frame."""
    radius: float            # R, m
    advance: float           # a, m per full turn
    safe_distance: float     # L', m
    origin: np.ndarray       # cross-section center where this wrap starts
    in_plane_x: np.ndarray   # toward the hanging active section
    in_plane_y: np.ndarray   # downward in the cross-section plane
    axis_dir: np.ndarray     # advance direction along the rod
    theta_samples: int = THETA_SAMPLES

    def __post_init__(self):
        for name in ("origin", "in_plane_x", "in_plane_y", "axis_dir"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.theta_samples < 8:
            raise ValueError("need at least 8 spiral samples")
        for a, b in (("in_plane_x", "in_plane_y"), ("in_plane_y", "axis_dir"),
                     ("in_plane_x", "axis_dir")):
            if abs(float(np.dot(getattr(self, a), getattr(self, b)))) > 1e-9:
                raise ValueError("spiral frame must be orthonormal")

    @property
    def hanging_length(self) -> float:
        """L = 2 pi R + L', the rope between gripper and tangent at start."""
        return 2.0 * math.pi * self.radius + self.safe_distance


def make_spiral_frame(rod: RodEstimate, start_axial: float,
                      hang_hint: np.ndarray | None = None,
                      advance_hint: np.ndarray | None = None,
                      down: np.ndarray = np.array([0.0, 0.0, -1.0])):
    """Cross-section frame for a wrap starting at the given axial offset.

    start_axial is measured along the rod axis from the rod center. The
    advance direction is the rod axis signed to match advance_hint; the
    in-plane x axis points toward hang_hint (defaults to the camera side).
    """
    axis = rod.axis / np.linalg.norm(rod.axis)
    adv = axis.copy()
    if advance_hint is not None and float(np.dot(adv, advance_hint)) < 0:
        adv = -adv
    y = down - float(np.dot(down, adv)) * adv
    y = y / np.linalg.norm(y)
    x = np.cross(y, adv)
    if hang_hint is not None and float(np.dot(x, hang_hint)) < 0:
        x = -x
        adv = -adv  # keep the frame right-handed: x = y cross z
    origin = rod.center + start_axial * axis
    return origin, x, y, adv


def spiral_point(params: SpiralParams, theta: float) -> GripperPose:
    """Gripper pose on the spiral at wrap angle theta in [0, 2 pi]."""
    r = params.radius
    slack = params.hanging_length - theta * r  # rope left between gripper and rod
    x = r * math.cos(theta) - slack * math.sin(theta)
    y = r * math.sin(theta) + slack * math.cos(theta)
    z = params.advance * theta / (2.0 * math.pi)
    position = (params.origin + x * params.in_plane_x + y * params.in_plane_y
                + z * params.axis_dir)
    orientation = quat_multiply(quat_from_axis_angle(params.axis_dir, theta),
                                IDENTITY_QUAT)
    return GripperPose(position=position, orientation=orientation)


def spiral_thetas(params: SpiralParams) -> np.ndarray:
    """Uniform theta samples over [0, 2 pi] including both endpoints."""
    return np.linspace(0.0, 2.0 * math.pi, params.theta_samples)


def build_spiral(params: SpiralParams, reach: BoxReachability) -> tuple[list[GripperPose], np.ndarray]:
    """Sampled spiral poses with the theta = 0 and theta = 2 pi ends discarded.

    Raises Unreachable naming the first sample outside the workspace.
    """
    thetas = spiral_thetas(params)[1:-1]
    poses = []
    for t in thetas:
        pose = spiral_point(params, float(t))
        if not reach.reachable(pose):
            raise Unreachable(float(t))
        poses.append(pose)
    return poses, thetas


def search_safe_distance(params: SpiralParams, bounds: tuple[float, float],
                         reach: BoxReachability,
                         grid: float = SAFE_DISTANCE_GRID) -> float:
    """Largest safe distance on a 5 mm grid whose spiral stays reachable.

    Scans from the upper bound downward; a larger value keeps the gripper
    farther from the rod, so the first feasible candidate wins.
    """
    lo, hi = bounds
    if lo > hi or lo < 0:
        raise ValueError("invalid safe distance bounds")
    n = int(round((hi - lo) / grid))
    candidates = [hi - i * grid for i in range(n + 1)]
    for cand in candidates:
        trial = replace(params, safe_distance=cand)
        try:
            build_spiral(trial, reach)
        except Unreachable:
            continue
        return cand
    raise NoFeasibleSafeDistance(
        f"no safe distance in [{lo * 1e3:.0f}, {hi * 1e3:.0f}] mm is reachable")


def shrink_radius_until_reachable(params: SpiralParams, r_rod: float,
                                  bounds: tuple[float, float],
                                  reach: BoxReachability,
                                  step: float = RADIUS_SHRINK_STEP) -> SpiralParams:
    """Reduce R in fixed steps until some safe distance yields a reachable
    spiral; returns the feasible parameters (largest feasible L' included).

    params.radius carries the starting radius (1.5x the estimated rod
    radius by convention). Raises RadiusUnderflow below half the rod radius.
    """
    if step <= 0:
        raise ValueError("shrink step must be positive")
    radius = params.radius
    while radius >= r_rod / 2.0 - 1e-12:
        trial = replace(params, radius=radius)
        try:
            lp = search_safe_distance(trial, bounds, reach)
        except NoFeasibleSafeDistance:
            radius -= step
            continue
        return replace(trial, safe_distance=lp)
    raise RadiusUnderflow(
        f"radius search fell below {r_rod / 2.0 * 1e3:.1f} mm without a feasible spiral")


# ---------------------------------------------------------------------------
# Full wrap trajectory
# ---------------------------------------------------------------------------

@dataclass
class WrapTrajectory:
    """Ordered pose phases for one wrap. Adjacent phases share their boundary
    pose, so concatenation is positionally continuous by construction."""
    params: SpiralParams
    pick: list[GripperPose]
    spiral: list[GripperPose]
    release: list[GripperPose]
    align: list[GripperPose]
    thetas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def phases(self) -> list[tuple[str, list[GripperPose]]]:
        out = [("pick", self.pick), ("spiral", self.spiral), ("release", self.release)]
        if self.align:
            out.append(("align", self.align))
        return out

    def validate(self) -> None:
        if not (self.pick and self.spiral and self.release):
            raise TrajectoryIncomplete("pick, spiral, and release phases are required")


def auxiliary_waypoints(grasp: GripperPose, spiral: list[GripperPose],
                        thetas: np.ndarray, params: SpiralParams,
                        rod: RodEstimate, remaining_rope: float,
                        table_z: float = 0.0,
                        entry_offset: float = ENTRY_OFFSET) -> WrapTrajectory:
    """Wrap the spiral phase with pick, release, and optional align motions.

    Pick runs entry -> grasp -> connection, entering along the gripper
    opening axis away from the rope. Release straightens the rope with a
    straight-line drop of one safe distance, then withdraws. The align
    phase (90 degree wrist turn plus a push toward the manipulator) is
    appended only when the leftover rope is longer than the rod's height
    above the table and would pool instead of hanging vertically.
    """
    if not spiral:
        raise TrajectoryIncomplete("empty spiral phase")
    entry = grasp.translated(np.array([-entry_offset, 0.0, 0.0]))
    connection = spiral[0]
    pick = [entry, grasp, connection]

    last = spiral[-1]
    straighten = GripperPose(last.position + np.array([0.0, 0.0, -params.safe_distance]),
                             last.orientation.copy())
    withdraw = GripperPose(straighten.position + np.array([-entry_offset, 0.0, 0.0]),
                           straighten.orientation.copy())
    release = [last, straighten, withdraw]

    align: list[GripperPose] = []
    rod_height = rod.center[2] - table_z
    if remaining_rope > rod_height:
        turned = quat_multiply(quat_from_axis_angle(np.array([0.0, 0.0, 1.0]),
                                                    math.pi / 2.0),
                               withdraw.orientation)
        rotate = GripperPose(withdraw.position.copy(), turned)
        front = GripperPose(np.array([rod.center[0] - 0.05, withdraw.position[1],
                                      (rod.center[2] - rod.radius + table_z) / 2.0]),
                            turned)
        push = GripperPose(front.position + np.array([0.04, 0.0, 0.0]), turned)
        align = [withdraw, rotate, front, push]

    return WrapTrajectory(params=params, pick=pick, spiral=list(spiral),
                          release=release, align=align, thetas=thetas)


def export_trajectory(traj: WrapTrajectory) -> str:
    """One line per pose: "phase theta x y z qw qx qy qz"."""
    lines = []
    theta_by_id = {id(p): float(t) for p, t in zip(traj.spiral, traj.thetas)}
    for phase, poses in traj.phases():
        for pose in poses:
            theta = theta_by_id.get(id(pose), 0.0)
            lines.append(pose.format_line(phase, theta))
    return "\n".join(lines) + "\n"
