"""Find the hanging rope sections in the image and turn an along-rope grasp
offset into a 3D gripper pose.

Two binary masks are fused: a pluggable segmentation mask and a hue-threshold
mask that repairs vertical gaps in it. The fused mask is skeletonized and the
two longest bottom-up chains become the fixed and active sections.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from . import imaging
from .errors import DimensionMismatch, RopeTooShort, SectionsNotFound
from .geometry import IDENTITY_QUAT, GripperPose
from .imaging import AxisRect, Camera
from .rod_estimation import RodEstimate
from .rope_estimation import RopeEstimate, hue_in_range


class MaskProvider(Protocol):
    """Produces a rope candidate mask from an HSV sub-image."""

    def mask(self, hsv: np.ndarray) -> np.ndarray: ...


class HueMaskProvider:
    """Default provider: threshold the sub-image with the rope's hue range."""

    def __init__(self, estimate: RopeEstimate, min_saturation: float = 0.2):
        self.estimate = estimate
        self.min_saturation = min_saturation

    def mask(self, hsv: np.ndarray) -> np.ndarray:
        return hue_in_range(hsv[..., 0], self.estimate) & (hsv[..., 1] >= self.min_saturation)


class DefectiveMaskProvider:
    """Wraps a provider and erases a horizontal band near the rod.

    Reproduces the segmentation dropouts the mask fusion step exists to
    repair; only useful for tests and demos.
    """

    def __init__(self, base: MaskProvider, gap_rows: int = 16):
        self.base = base
        self.gap_rows = gap_rows

    def mask(self, hsv: np.ndarray) -> np.ndarray:
        m = self.base.mask(hsv).copy()
        m[: self.gap_rows, :] = False
        return m


@dataclass(frozen=True)
class GraspSpec:
    """Which section to grasp and how far down it, in millimeters."""
    section: str      # "fixed" or "active"
    l_gp_mm: float

    def __post_init__(self):
        if self.section not in ("fixed", "active"):
            raise ValueError("section must be 'fixed' or 'active'")
        if self.l_gp_mm <= 0:
            raise ValueError("grasp offset must be positive")


@dataclass
class RopeSections:
    """Traced rope chains in full-image pixel coordinates, bottom to top."""
    fixed_chain: np.ndarray    # (K, 2) int (u, v), v decreasing
    active_chain: np.ndarray
    tangent_fixed: np.ndarray  # (3,) world point where the fixed chain meets the rod
    tangent_active: np.ndarray

    def chain(self, section: str) -> np.ndarray:
        return self.fixed_chain if section == "fixed" else self.active_chain


def build_subimage_bounds(rect: AxisRect, image_shape: tuple[int, int],
                          side_fraction: float = 0.2) -> AxisRect:
    """Rod rectangle widened 20 percent on both sides and extended to the
    bottom of the image (the table row lies below the frame)."""
    h, w = image_shape
    pad = int(round(rect.width * side_fraction))
    return AxisRect(
        min_x=max(0, rect.min_x - pad),
        min_y=max(0, rect.min_y),
        max_x=min(w - 1, rect.max_x + pad),
        max_y=h - 1,
    )


def fuse_masks(m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Add to m1 every vertical run of m2 that passes through an m1 pixel.

    The result is a superset of m1 and the operation is idempotent on its
    own output.
    """
    a = np.asarray(m1, dtype=bool)
    b = np.asarray(m2, dtype=bool)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    out = a.copy()
    h, _w = a.shape
    for col in range(a.shape[1]):
        col_b = b[:, col]
        if not col_b.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate(([0], col_b.view(np.int8), [0]))))
        for start, stop in zip(edges[::2], edges[1::2]):
            if a[start:stop, col].any():
                out[start:stop, col] = True
    return out


_TRACE_STEPS = (
    (-1, 0),            # straight up first
    (-1, -1), (-1, 1),  # then up-diagonals
    (0, -1), (0, 1),    # lastly sideways
)


def _trace_up(skel: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Greedy upward walk along a skeleton from a starting pixel."""
    h, w = skel.shape
    visited = {start}
    chain = [start]
    cur = start
    while True:
        nxt = None
        for dy, dx in _TRACE_STEPS:
            y, x = cur[0] + dy, cur[1] + dx
            if 0 <= y < h and 0 <= x < w and skel[y, x] and (y, x) not in visited:
                nxt = (y, x)
                break
        if nxt is None:
            break
        visited.add(nxt)
        chain.append(nxt)
        cur = nxt
    return chain


def extract_sections(fused: np.ndarray, rod: RodEstimate, camera: Camera) -> RopeSections:
    """Skeletonize the fused mask and return the two longest bottom-up chains.

    The chain with the smaller mean column is the fixed section (it hangs on
    the robot's right; image x grows toward the robot's left). Tangent
    points sit on the rod's lower edge at each chain's column.
    """
    skel = imaging.skeletonize(fused)
    labels, count = imaging.connected_components(skel)
    chains: list[np.ndarray] = []
    for cid in range(1, count + 1):
        ys, xs = np.nonzero(labels == cid)
        lowest = int(np.argmax(ys))
        chain = _trace_up(skel, (int(ys[lowest]), int(xs[lowest])))
        if len(chain) >= 2:
            chains.append(np.array([(x, y) for y, x in chain], dtype=np.int64))
    if len(chains) < 2:
        raise SectionsNotFound(f"found {len(chains)} rope chain(s); need 2")
    chains.sort(key=lambda c: (-len(c), float(c[:, 0].mean())))
    two = chains[:2]
    two.sort(key=lambda c: float(c[:, 0].mean()))
    fixed, active = two[0], two[1]

    def tangent(chain: np.ndarray) -> np.ndarray:
        bottom_row = _rod_bottom_row(rod, camera)
        col = _column_at_row(chain, bottom_row)
        hit = camera.ray_plane_point(col, bottom_row,
                                     plane_point=rod.center,
                                     plane_normal=np.array([1.0, 0.0, 0.0]))
        return np.array([rod.center[0], hit[1], rod.center[2] - rod.radius])

    return RopeSections(fixed_chain=fixed, active_chain=active,
                        tangent_fixed=tangent(fixed), tangent_active=tangent(active))


def _rod_bottom_row(rod: RodEstimate, camera: Camera) -> float:
    bottom = rod.center - np.array([0.0, 0.0, rod.radius])
    (uv,), _ = camera.project(bottom[None, :])
    return float(uv[1])


def _column_at_row(chain: np.ndarray, row: float) -> float:
    """Chain column at (or nearest to) the given image row."""
    idx = int(np.argmin(np.abs(chain[:, 1] - row)))
    return float(chain[idx, 0])


def grasp_point(sections: RopeSections, spec: GraspSpec, rod: RodEstimate,
                scale_px_per_mm: float, camera: Camera) -> GripperPose:
    """Walk l_gp down the requested section from the rod's lower edge and
    lift the landing pixel to a 3D grasp pose.

    The lift uses two assumptions: the section's tangent point lies on the
    rod (position from the rod estimate), and the hanging section is
    vertical with uniform image-to-world scaling, so depth equals the rod
    center's and the walk maps to a pure drop in z.
    """
    chain = sections.chain(spec.section)
    bottom_row = _rod_bottom_row(rod, camera)
    below = chain[chain[:, 1] >= bottom_row - 0.5]
    n_px = int(round(spec.l_gp_mm * scale_px_per_mm))
    if len(below) <= n_px:
        raise RopeTooShort(
            f"{spec.section} section has {len(below)} px below the rod; "
            f"need {n_px} px for l_gp={spec.l_gp_mm:.1f} mm")
    tangent = sections.tangent_fixed if spec.section == "fixed" else sections.tangent_active
    position = tangent + np.array([0.0, 0.0, -spec.l_gp_mm / 1000.0])
    return GripperPose(position=position, orientation=IDENTITY_QUAT.copy())


def annotate_sections(rgb: np.ndarray, sections: RopeSections,
                      grasp_px: tuple[int, int] | None = None) -> np.ndarray:
    """Debug overlay: fixed chain green, active chain blue, grasp point red."""
    out = np.asarray(rgb, dtype=np.uint8).copy()
    h, w = out.shape[:2]

    def paint(chain: np.ndarray, color: tuple[int, int, int]):
        for u, v in chain:
            if 0 <= v < h and 0 <= u < w:
                out[v, u] = color

    paint(sections.fixed_chain, (0, 255, 0))
    paint(sections.active_chain, (0, 0, 255))
    if grasp_px is not None:
        u, v = grasp_px
        out[max(0, v - 2): v + 3, max(0, u - 2): u + 3] = (255, 0, 0)
    return out
