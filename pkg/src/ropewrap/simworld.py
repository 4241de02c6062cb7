"""Deterministic quasi-static rope/rod world.

Executes wrap trajectories against an affine rope response model and renders
the synthetic RGB image, depth raster, and colorized point cloud the
perception stack consumes.

World layout (meters, world frame): the table is z = 0; the camera sits on
the low-x side looking along +x; the rod is a horizontal cylinder along the
y axis in front of the robot body. The rope's initial crossing rides over
the rod; hanging sections are drawn vertically beneath the rod's lower edge,
which is where the release and push-back motions park them.

Rope response per wrap: achieved advance = compliance * commanded + springback.
Wraps cannot overlap, so the axial position advances by at least one rope
diameter; any excess over the diameter is the inter-wrap gap. A wrap sags
below the rod only when the commanded wrap radius exceeds the true rod
radius (taut rope otherwise; the gripper simply slides down the strand).

The rope presets are calibration targets chosen to reproduce qualitative
rope classes (compliant/light, compliant/heavy, stiff); they are not
measured material properties.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import RopeExhausted, TrajectoryIncomplete
from .geometry import GripperPose
from .imaging import Camera, CameraIntrinsics, ColorizedDepthMap, look_rotation
from .wrap_planner import BoxReachability, WrapTrajectory

# label ids in the renderer's ground-truth image
LBL_BG, LBL_ROBOT, LBL_ARM, LBL_SUPPORT, LBL_ROD = 0, 1, 2, 3, 4
LBL_BAND, LBL_SAG, LBL_STRAND_ACTIVE, LBL_STRAND_FIXED = 5, 6, 7, 8
ROPE_LABELS = (LBL_BAND, LBL_SAG, LBL_STRAND_ACTIVE, LBL_STRAND_FIXED)


@dataclass
class RodSpec:
    radius: float = 0.021
    length: float = 0.280
    center: tuple[float, float, float] = (0.40, 0.0, 0.26)
    hue: float = 220.0


@dataclass
class RopeSpec:
    diameter: float = 0.006
    hue: float = 5.0
    compliance: float = 0.95     # fraction of the commanded advance achieved
    springback: float = 0.0      # m; stiff ropes spring open by this much
    sag_gain: float = 2.0        # sag depth per meter of wrap-radius excess
    length: float = 2.0


@dataclass
class CameraSpec:
    position: tuple[float, float, float] = (-0.40, 0.0, 0.26)
    fx: float = 1600.0
    fy: float = 1600.0
    cx: float = 320.0
    cy: float = 45.0
    width: int = 640
    height: int = 480


@dataclass
class WorldConfig:
    rod: RodSpec = field(default_factory=RodSpec)
    rope: RopeSpec = field(default_factory=RopeSpec)
    camera: CameraSpec = field(default_factory=CameraSpec)
    seed: int = 0
    depth_noise: float = 0.001        # m, along the pixel ray
    hue_dither_rod: float = 1.0       # deg
    hue_dither_rope: float = 2.0      # deg
    grazing_cutoff_deg: float = 75.0  # depth drops out at steeper incidence
    robot_plane_x: float = 0.50
    table_z: float = 0.01
    crossing_y: float = 0.10
    workspace_lo: tuple[float, float, float] = (0.15, -0.45, 0.0)
    workspace_hi: tuple[float, float, float] = (0.50, 0.45, 0.55)
    springback_shift_threshold: float = 0.002  # m; stiffer ropes shift the fixed end
    strand_gap_mm: float = 2.0        # image-space clearance strand <-> last band

    def build_camera(self) -> Camera:
        c = self.camera
        rot = look_rotation(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        return Camera(position=np.array(self.position_of_camera()), rotation=rot,
                      intrinsics=CameraIntrinsics(c.fx, c.fy, c.cx, c.cy),
                      width=c.width, height=c.height)

    def position_of_camera(self) -> tuple[float, float, float]:
        return tuple(float(v) for v in self.camera.position)

    def reachability(self) -> BoxReachability:
        return BoxReachability(np.array(self.workspace_lo), np.array(self.workspace_hi))

    # -- plain-text key=value serialization --------------------------------

    def to_text(self) -> str:
        lines = ["# ropewrap world configuration",
                 "# rope response values are calibration targets, not measured data"]

        def emit(prefix, obj):
            for k, v in asdict(obj).items():
                if isinstance(v, tuple):
                    v = " ".join(f"{x:g}" for x in v)
                lines.append(f"{prefix}.{k} = {v}")

        emit("rod", self.rod)
        emit("rope", self.rope)
        emit("camera", self.camera)
        for k in ("seed", "depth_noise", "hue_dither_rod", "hue_dither_rope",
                  "grazing_cutoff_deg", "robot_plane_x", "table_z", "crossing_y",
                  "springback_shift_threshold", "strand_gap_mm"):
            lines.append(f"{k} = {getattr(self, k)}")
        for k in ("workspace_lo", "workspace_hi"):
            lines.append(f"{k} = " + " ".join(f"{x:g}" for x in getattr(self, k)))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "WorldConfig":
        cfg = WorldConfig()
        groups = {"rod": {}, "rope": {}, "camera": {}}
        flat = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, val = (s.strip() for s in line.split("=", 1))
            if "." in key:
                g, f_ = key.split(".", 1)
                groups.setdefault(g, {})[f_] = val
            else:
                flat[key] = val

        def convert(template, raw_val):
            if isinstance(template, tuple):
                parts = raw_val.replace(",", " ").split()
                return tuple(float(p) for p in parts)
            if isinstance(template, int) and not isinstance(template, bool):
                return int(float(raw_val))
            return float(raw_val)

        for gname, target in (("rod", cfg.rod), ("rope", cfg.rope), ("camera", cfg.camera)):
            for f_, val in groups.get(gname, {}).items():
                setattr(target, f_, convert(getattr(target, f_), val))
        for key, val in flat.items():
            setattr(cfg, key, convert(getattr(cfg, key), val))
        return cfg

    def to_file(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_text())

    @staticmethod
    def from_file(path) -> "WorldConfig":
        with open(path) as f:
            return WorldConfig.from_text(f.read())


# rod ground truths: 21 mm and 17 mm radius
ROD_PRESETS = {
    "rod1": RodSpec(radius=0.021),
    "rod2": RodSpec(radius=0.017),
}

# qualitative rope classes; see module docstring
ROPE_PRESETS = {
    "rope1": RopeSpec(diameter=0.006, hue=5.0, compliance=0.95, springback=0.0),
    "rope2": RopeSpec(diameter=0.007, hue=120.0, compliance=0.30, springback=0.0),
    "rope3": RopeSpec(diameter=0.003, hue=30.0, compliance=0.85, springback=0.008),
}


def preset_config(rod: str, rope: str, seed: int = 0) -> WorldConfig:
    if rod not in ROD_PRESETS:
        raise ValueError(f"unknown rod preset {rod!r}; options: {sorted(ROD_PRESETS)}")
    if rope not in ROPE_PRESETS:
        raise ValueError(f"unknown rope preset {rope!r}; options: {sorted(ROPE_PRESETS)}")
    return WorldConfig(rod=replace(ROD_PRESETS[rod]), rope=replace(ROPE_PRESETS[rope]),
                       seed=seed)


def preset_names() -> list[str]:
    return [f"{rod}x{rope}" for rod in sorted(ROD_PRESETS) for rope in sorted(ROPE_PRESETS)]


def config_from_name_or_path(spec: str, seed: int = 0) -> WorldConfig:
    if "x" in spec and spec.split("x")[0] in ROD_PRESETS:
        rod, rope = spec.split("x", 1)
        return preset_config(rod, rope, seed)
    cfg = WorldConfig.from_file(spec)
    cfg.seed = seed if seed else cfg.seed
    return cfg


# ---------------------------------------------------------------------------
# Wrap state
# ---------------------------------------------------------------------------

@dataclass
class Wrap:
    axial_y: float      # m along the rod axis (world y)
    sag: float          # m below the rod bottom, last wrap only is drawn
    contact: bool
    gap: float          # m of open space to the previous wrap


@dataclass
class WrapState:
    crossing_y: float
    remaining_0: float                  # initial rope length
    wraps: list[Wrap] = field(default_factory=list)
    consumed_total: float = 0.0
    pre_wrapped: bool = False

    @property
    def remaining(self) -> float:
        return self.remaining_0 - self.consumed_total

    def front_y(self) -> float:
        return self.wraps[-1].axial_y if self.wraps else self.crossing_y

    def to_json(self) -> str:
        return json.dumps({
            "crossing_y": self.crossing_y,
            "remaining_0": self.remaining_0,
            "consumed_total": self.consumed_total,
            "pre_wrapped": self.pre_wrapped,
            "wraps": [asdict(w) for w in self.wraps],
        }, indent=2)

    @staticmethod
    def from_json(text: str) -> "WrapState":
        d = json.loads(text)
        return WrapState(
            crossing_y=d["crossing_y"], remaining_0=d["remaining_0"],
            consumed_total=d["consumed_total"], pre_wrapped=d["pre_wrapped"],
            wraps=[Wrap(**w) for w in d["wraps"]],
        )


# ---------------------------------------------------------------------------
# Render output
# ---------------------------------------------------------------------------

@dataclass
class RenderLabels:
    """Ground truth for tests: per-pixel labels plus scene scalars."""
    label: np.ndarray            # (H, W) uint8, see LBL_* ids
    rod_top_row: int
    rod_bottom_row: int
    scale_px_per_mm: float       # at the rod center's depth
    band_width_px: float         # rendered rope band width on the rod
    active_strand_y: float | None
    gap_px: float | None         # image gap between the last two bands

    def mask(self, *ids: int) -> np.ndarray:
        return np.isin(self.label, ids)

    @property
    def rope_mask(self) -> np.ndarray:
        return self.mask(*ROPE_LABELS)

    @property
    def rod_mask(self) -> np.ndarray:
        return self.mask(LBL_ROD)


@dataclass
class RenderResult:
    rgb: np.ndarray              # (H, W, 3) uint8
    hsv: np.ndarray              # (H, W, 3) float
    depth_mm: np.ndarray         # (H, W) uint16, 0 = invalid
    dmap: ColorizedDepthMap
    labels: RenderLabels


# ---------------------------------------------------------------------------
# World
# ---------------------------------------------------------------------------

class World:
    """Single-owner mutable wrap state driven by trajectories."""

    def __init__(self, config: WorldConfig):
        self.config = config
        self.camera = config.build_camera()
        self.state = WrapState(crossing_y=config.crossing_y,
                               remaining_0=config.rope.length)
        self._rays: np.ndarray | None = None

    # -- reachability -------------------------------------------------------

    def reachable(self, pose: GripperPose) -> bool:
        return self.config.reachability().reachable(pose)

    # -- state management ----------------------------------------------------

    def add_pre_wrap(self) -> None:
        """Place one tight wrap by hand before the feedback loop starts."""
        d = self.config.rope.diameter
        r = self.config.rod.radius
        y = self.state.front_y() - d
        self.state.wraps.append(Wrap(axial_y=y, sag=0.0, contact=True, gap=0.0))
        self.state.consumed_total += math.hypot(2.0 * math.pi * (r + d / 2.0), d)
        self.state.pre_wrapped = True

    def unravel(self) -> None:
        """Reset the coil and re-feed the rope; controller state is untouched."""
        pre = self.state.pre_wrapped
        self.state = WrapState(crossing_y=self.config.crossing_y,
                               remaining_0=self.config.rope.length)
        if pre:
            self.add_pre_wrap()

    def execute_wrap(self, trajectory: WrapTrajectory) -> WrapState:
        self.state = execute_wrap(self.state, trajectory, self.config)
        return self.state

    def render(self) -> RenderResult:
        return render(self.state, self.config, camera=self.camera,
                      rays=self._pixel_rays())

    def _pixel_rays(self) -> np.ndarray:
        if self._rays is None:
            _, self._rays = self.camera.pixel_rays()
        return self._rays


def execute_wrap(state: WrapState, trajectory: WrapTrajectory,
                 config: WorldConfig) -> WrapState:
    """Apply the rope response model to one commanded wrap.

    Deterministic: identical (state, trajectory, config) yield an identical
    next state.
    """
    trajectory.validate()
    rope = config.rope
    params = trajectory.params
    hang_needed = params.hanging_length
    if state.remaining < hang_needed:
        raise RopeExhausted(
            f"remaining rope {state.remaining * 1e3:.0f} mm is shorter than the "
            f"{hang_needed * 1e3:.0f} mm needed between gripper and rod")

    achieved = rope.compliance * params.advance + rope.springback
    increment = max(rope.diameter, achieved)

    new = WrapState(crossing_y=state.crossing_y, remaining_0=state.remaining_0,
                    wraps=list(state.wraps), consumed_total=state.consumed_total,
                    pre_wrapped=state.pre_wrapped)
    front_old = new.front_y()
    y_new = front_old - increment

    first_wrap = not new.wraps
    if first_wrap and rope.springback > config.springback_shift_threshold:
        # a stiff first wrap pushes the fixed section away, widening the gap
        new.crossing_y += rope.springback

    prev_ref = new.wraps[-1].axial_y if new.wraps else new.crossing_y
    gap = max(0.0, (prev_ref - y_new) - rope.diameter)
    sag = rope.sag_gain * max(0.0, params.radius - config.rod.radius)
    new.wraps.append(Wrap(axial_y=y_new, sag=sag, contact=gap <= 1e-9, gap=gap))
    new.consumed_total += math.hypot(2.0 * math.pi * params.radius, increment)
    return new


# ---------------------------------------------------------------------------
# Renderer
# ---------------------------------------------------------------------------

def render(state: WrapState, config: WorldConfig, camera: Camera | None = None,
           rays: np.ndarray | None = None) -> RenderResult:
    """Render the world: full-color image, depth raster with realistic
    grazing-incidence dropout, and the registered point cloud.

    The RGB image always shows the full silhouettes; only the depth channel
    loses the near-tangent arcs of curved surfaces, the way active-stereo
    depth cameras do. Output is a pure function of (state, config)."""
    cam = camera if camera is not None else config.build_camera()
    if rays is None:
        _, rays = cam.pixel_rays()
    h, w = cam.height, cam.width
    rod = config.rod
    rope = config.rope
    cx_, cy_, cz_ = cam.position
    rx, ry, rz = rod.center
    forward = cam.rotation[:, 2]

    hsv = np.zeros((h, w, 3))
    hsv[..., 0] = 230.0
    hsv[..., 1] = 0.08
    hsv[..., 2] = 0.10
    tbuf = np.full((h, w), np.inf)        # ray parameter (= distance)
    label = np.zeros((h, w), dtype=np.uint8)
    valid = np.zeros((h, w), dtype=bool)

    dx, dy, dz = rays[..., 0], rays[..., 1], rays[..., 2]
    cos_cut = math.cos(math.radians(config.grazing_cutoff_deg))

    def paint(mask, t, lbl, color_hsv, depth_ok):
        win = mask & (t < tbuf)
        tbuf[win] = t[win]
        label[win] = lbl
        valid[win] = depth_ok[win] if isinstance(depth_ok, np.ndarray) else depth_ok
        hsv[win] = color_hsv

    def draw_plate(x_plane, y_lo, y_hi, z_lo, z_hi, lbl, color_hsv, depth_ok=True):
        with np.errstate(divide="ignore"):
            t = (x_plane - cx_) / dx
        py = cy_ + t * dy
        pz = cz_ + t * dz
        mask = (t > 0) & (py >= y_lo) & (py <= y_hi) & (pz >= z_lo) & (pz <= z_hi)
        paint(mask, t, lbl, color_hsv, depth_ok)

    def draw_cylinder(radius, y_lo, y_hi, z_lo, z_hi, lbl, color_hsv):
        # axis parallel to world y through the rod center
        ox, oz = cx_ - rx, cz_ - rz
        a = dx * dx + dz * dz
        b = 2.0 * (ox * dx + oz * dz)
        c = ox * ox + oz * oz - radius * radius
        disc = b * b - 4.0 * a * c
        hit = disc > 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b - sq) / (2.0 * a)
        py = cy_ + t * dy
        pz = cz_ + t * dz
        mask = hit & (t > 0) & (py >= y_lo) & (py <= y_hi) & (pz >= z_lo) & (pz <= z_hi)
        nx = (cx_ + t * dx - rx) / radius
        nz = (pz - rz) / radius
        incidence = -(dx * nx + dz * nz)
        paint(mask, t, lbl, color_hsv, incidence >= cos_cut)

    # background structure
    draw_plate(0.62, -0.35, 0.35, 0.02, 0.60, LBL_ROBOT, (300.0, 0.35, 0.45))
    draw_plate(0.47, -0.15, -0.08, 0.10, 0.22, LBL_ARM, (300.0, 0.35, 0.55))
    draw_plate(rx - 0.010, 0.119, 0.143, 0.02, rz - rod.radius + 0.004,
               LBL_SUPPORT, (60.0, 0.50, 0.35))

    # rod and the rope bands riding on it
    draw_cylinder(rod.radius, ry - rod.length / 2.0, ry + rod.length / 2.0,
                  rz - rod.radius, rz + rod.radius, LBL_ROD, (rod.hue, 0.80, 0.55))

    bands = [state.crossing_y] + [wr.axial_y for wr in state.wraps]
    for by in bands:
        draw_cylinder(rod.radius + rope.diameter, by - rope.diameter / 2.0,
                      by + rope.diameter / 2.0, rz - rod.radius, rz + rod.radius,
                      LBL_BAND, (rope.hue, 0.85, 0.60))

    # sag of the last wrap: tapered drop below the rod's bottom edge
    if state.wraps and state.wraps[-1].sag > 1e-6:
        wlast = state.wraps[-1]
        x_plane = rx - rod.radius
        with np.errstate(divide="ignore"):
            t = (x_plane - cx_) / dx
        py = cy_ + t * dy
        pz = cz_ + t * dz
        z_top = rz - rod.radius
        z_bot = z_top - wlast.sag
        frac = np.clip((z_top - pz) / max(wlast.sag, 1e-9), 0.0, 1.0)
        half_w = 0.5 * rope.diameter * (0.8 - 0.6 * frac)
        mask = (t > 0) & (pz <= z_top) & (pz >= z_bot) & (np.abs(py - wlast.axial_y) <= half_w)
        paint(mask, t, LBL_SAG, (rope.hue, 0.85, 0.55), True)

    # hanging sections beneath the rod; widths match the on-rod band's pixel
    # width so the row-scan rules in the wrap evaluation see a full diameter
    z_strand_top = rz - rod.radius - 0.00075
    x_band_front = rx - rod.radius - rope.diameter
    zc_strand = float(np.dot(np.array([rx, 0, 0]) - cam.position, forward))
    zc_band = float(np.dot(np.array([x_band_front, 0, 0]) - cam.position, forward))
    strand_half = 0.5 * rope.diameter * (zc_strand / zc_band)

    fixed_y = state.crossing_y
    hang_fixed = min(0.35, max(0.0, state.remaining_0 * 0.2))
    draw_plate(rx, fixed_y - strand_half, fixed_y + strand_half,
               max(config.table_z + 0.005, z_strand_top - hang_fixed), z_strand_top,
               LBL_STRAND_FIXED, (rope.hue, 0.85, 0.58))

    active_y = _active_strand_y(state, config, cam)
    if active_y is not None:
        hang_active = min(0.30, max(0.0, state.remaining - 0.02))
        if hang_active > 0.01:
            draw_plate(rx, active_y - strand_half, active_y + strand_half,
                       max(config.table_z + 0.005, z_strand_top - hang_active),
                       z_strand_top, LBL_STRAND_ACTIVE, (rope.hue, 0.85, 0.58))

    # deterministic noise: keyed by seed and the state's physical content
    rng = np.random.default_rng(
        (config.seed, len(state.wraps), int(round(state.consumed_total * 1e9)),
         int(round(state.crossing_y * 1e9))))
    rope_px = np.isin(label, ROPE_LABELS)
    rod_px = label == LBL_ROD
    dither = rng.normal(0.0, 1.0, (h, w))
    hsv[..., 0] = np.where(rope_px, (hsv[..., 0] + dither * config.hue_dither_rope) % 360.0,
                           hsv[..., 0])
    hsv[..., 0] = np.where(rod_px, (hsv[..., 0] + dither * config.hue_dither_rod) % 360.0,
                           hsv[..., 0])

    t_noise = rng.normal(0.0, config.depth_noise, (h, w))
    t_final = np.where(valid, tbuf + t_noise, 0.0)

    from .imaging import hsv_to_rgb  # local import to keep module load light
    rgb = hsv_to_rgb(hsv)

    cos_fwd = rays @ forward
    depth_m = np.where(valid, t_final * cos_fwd, 0.0)
    depth_mm = np.clip(np.round(depth_m * 1000.0), 0, 65535).astype(np.uint16)

    vy, vx = np.nonzero(valid)
    pts = cam.position[None, :] + t_final[vy, vx, None] * rays[vy, vx]
    dmap = ColorizedDepthMap(
        width=w, height=h, intrinsics=cam.intrinsics,
        points=pts, pixels=np.column_stack([vx, vy]).astype(np.int32),
        colors=hsv[vy, vx].copy(),
    )

    scale = cam.intrinsics.fx / float(np.dot(np.array(rod.center) - cam.position, forward))
    uv_top, _ = cam.project(np.array([[rx - rod.radius, ry, rz + rod.radius]]))
    uv_bot, _ = cam.project(np.array([[rx, ry, rz - rod.radius]]))
    band_scale = cam.intrinsics.fx / zc_band
    gap_px = None
    if state.wraps:
        prev_ref = state.wraps[-2].axial_y if len(state.wraps) > 1 else state.crossing_y
        gap_px = max(0.0, (prev_ref - state.wraps[-1].axial_y - rope.diameter)) * band_scale
    labels = RenderLabels(
        label=label,
        rod_top_row=int(math.ceil(uv_top[0][1])),
        rod_bottom_row=int(math.floor(uv_bot[0][1])),
        scale_px_per_mm=scale / 1000.0,
        band_width_px=rope.diameter * band_scale,
        active_strand_y=active_y,
        gap_px=gap_px,
    )
    return RenderResult(rgb=rgb, hsv=hsv, depth_mm=depth_mm, dmap=dmap, labels=labels)


def _active_strand_y(state: WrapState, config: WorldConfig,
                     cam: Camera) -> float | None:
    """Axial position where the active section hangs.

    Parked on the advance side of the coil front with a small image-space
    clearance to the front band, so the hanging strand never merges with the
    band in the rendered view."""
    rope = config.rope
    rod = config.rod
    forward = cam.rotation[:, 2]
    front = state.front_y()
    x_band_front = rod.center[0] - rod.radius - rope.diameter
    zc_band = float(np.dot(np.array([x_band_front, 0, 0]) - cam.position, forward))
    zc_strand = float(np.dot(np.array([rod.center[0], 0, 0]) - cam.position, forward))
    fx = cam.intrinsics.fx
    if not state.wraps:
        # initial crossing: the short diagonal behind the rod lands the
        # active section a couple of diameters over
        base_offset = 2.5 * rope.diameter + 0.002
        strand_y = front - base_offset
    else:
        strand_y = front - rope.diameter - 0.0015
    # enforce the pixel clearance against the band's right edge
    u_band_right = cam.intrinsics.cx - fx * (front - rope.diameter / 2.0 - cam.position[1]) / zc_band
    need_px = config.strand_gap_mm * (fx / zc_strand) / 1000.0
    half_strand_px = 0.5 * rope.diameter * fx / zc_band
    u_target = u_band_right + need_px + half_strand_px
    y_from_px = cam.position[1] + (cam.intrinsics.cx - u_target) * zc_strand / fx
    return min(strand_y, y_from_px)
