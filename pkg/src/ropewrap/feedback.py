"""Per-wrap quality evaluation and the proportional parameter updates.

After each wrap the latest image is scored along two axes: the height h of
the last wrap's lowest point below the rod (radial tightness) and the gap
fraction q_a between the last two wraps (axial tightness). The controller
then applies

    R_{n+1} = R_n - K_R * (h - t_R)        while h > t_R
    a_{n+1} = a_n - K_a * q_a              while neither stop condition holds

with pixel-valued h and dimensionless q_a. K_R is meters per pixel and K_a
meters, which reconciles the millimeter-scale parameter steps with the bare
gain values; both are configuration inputs. Stop conditions: radial when
h <= t_R; axial when q_a = 0 or two consecutive q_a differ by less than t_a.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NoWrapDetected
from .rope_estimation import RopeEstimate, hue_in_range

K_RADIUS = 0.001       # m per pixel of excess sag
K_ADVANCE = 0.04       # m per unit gap fraction
T_ADVANCE = 0.05       # gap-fraction change considered "no longer improving"
CLOSE_CONTACT_FACTOR = 1.5  # first-run length beyond this times d means merged wraps


@dataclass(frozen=True)
class RodRegion:
    """Pixel bounds of the rod in the evaluation image."""
    top_row: int
    bottom_row: int
    left_col: int
    right_col: int

    def __post_init__(self):
        if self.top_row > self.bottom_row or self.left_col > self.right_col:
            raise ValueError("degenerate rod region")


@dataclass(frozen=True)
class WrapQuality:
    height_px: int
    area_rope: int
    area_gap: int
    q_radial: float
    q_axial: float

    def __post_init__(self):
        if self.area_rope < 0 or self.area_gap < 0:
            raise ValueError("areas must be non-negative")
        if not 0.0 <= self.q_axial <= 1.0:
            raise ValueError("gap fraction must lie in [0, 1]")


@dataclass(frozen=True)
class FeedbackState:
    """Controller parameters and convergence flags; updated as a value."""
    radius: float                 # R_n, m
    advance: float                # a_n, m (may legally go negative)
    t_radius_px: float            # t_R = 1.5 * rope diameter in pixels
    k_radius: float = K_RADIUS
    k_advance: float = K_ADVANCE
    t_advance: float = T_ADVANCE
    q_history: tuple[float, ...] = ()
    radial_converged: bool = False
    axial_converged: bool = False
    wrap_index: int = 0

    @property
    def converged(self) -> bool:
        return self.radial_converged and self.axial_converged


def rope_mask(hsv: np.ndarray, estimate: RopeEstimate,
              min_saturation: float = 0.2) -> np.ndarray:
    return hue_in_range(hsv[..., 0], estimate) & (hsv[..., 1] >= min_saturation)


def _runs_right_to_left(row: np.ndarray) -> list[tuple[int, int]]:
    """Maximal white runs of a row as (start, stop) slices, rightmost first."""
    padded = np.concatenate(([0], row.view(np.int8), [0]))
    edges = np.flatnonzero(np.diff(padded))
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])][::-1]


def measure_height(hsv: np.ndarray, rod_region: RodRegion,
                   estimate: RopeEstimate) -> int:
    """Sag of the last wrap below the rod's bottom edge, in pixels.

    Row rule, scanning right to left: the first white run is the hanging
    strand and is removed; the next run is kept only when it is shorter
    than the rope diameter. Full-width strands and whole wrap bands fail
    that test, so only the tapered sag survives. The surviving segment is
    skeletonized and h is the drop from its lowest (valley) point to the
    rod's bottom edge; ties go to the free-end side.
    """
    from . import imaging

    h_img, w_img = hsv.shape[:2]
    bottom = min(h_img - 1, rod_region.bottom_row
                 + (rod_region.bottom_row - rod_region.top_row) + 20)
    crop = hsv[rod_region.top_row: bottom + 1]
    mask = rope_mask(crop, estimate)
    if not mask.any():
        raise NoWrapDetected("no rope pixels in the wrap height region")
    d = estimate.diameter_px
    kept = np.zeros_like(mask)
    for r in range(mask.shape[0]):
        runs = _runs_right_to_left(mask[r])
        if len(runs) < 2:
            continue
        nxt = runs[1]  # runs[0] is the hanging strand
        if (nxt[1] - nxt[0]) < d:
            kept[r, nxt[0]: nxt[1]] = True
    if not kept.any():
        return 0
    skel = imaging.skeletonize(kept)
    ys, xs = np.nonzero(skel)
    vmax = ys.max()
    # valley: lowest skeleton pixel, ties toward the free end (larger column)
    _ = xs[ys == vmax].max()
    valley_row = rod_region.top_row + int(vmax)
    return max(0, valley_row - rod_region.bottom_row)


def measure_advance(hsv: np.ndarray, rod_region: RodRegion,
                    estimate: RopeEstimate) -> tuple[int, int]:
    """Rope area of the last wrap and the gap area to its neighbor.

    Per rod-region row, scanning from the free-end side: the first white
    run belongs to the last wrap. A run longer than 1.5 diameters means the
    last two wraps merged (close contact, no gap); otherwise the black run
    immediately left of it, up to the previous wrap, is gap.
    """
    crop = hsv[rod_region.top_row: rod_region.bottom_row + 1,
               rod_region.left_col: rod_region.right_col + 1]
    mask = rope_mask(crop, estimate)
    if not mask.any():
        raise NoWrapDetected("no rope pixels in the rod region")
    d = estimate.diameter_px
    area_rope = 0
    area_gap = 0
    for r in range(mask.shape[0]):
        runs = _runs_right_to_left(mask[r])
        if not runs:
            continue
        first = runs[0]
        length = first[1] - first[0]
        area_rope += length
        if length > CLOSE_CONTACT_FACTOR * d:
            continue  # merged with the previous wrap: close contact
        if len(runs) < 2:
            continue  # no previous wrap visible in this row
        prev = runs[1]
        area_gap += first[0] - prev[1]
    return area_rope, area_gap


def gap_fraction(area_rope: int, area_gap: int) -> float:
    total = area_rope + area_gap
    return float(area_gap) / total if total else 0.0


def update_radius(state: FeedbackState, height_px: float) -> FeedbackState:
    """One radial update; freezes the radius once h <= t_R."""
    if state.radial_converged:
        return state
    if height_px <= state.t_radius_px:
        return replace(state, radial_converged=True)
    q_r = height_px - state.t_radius_px
    return replace(state, radius=state.radius - state.k_radius * q_r)


def update_advance(state: FeedbackState, q_a: float) -> FeedbackState:
    """One axial update; freezes the advance when the gap closes or stops
    improving between consecutive wraps."""
    if state.axial_converged:
        return state
    history = state.q_history + (q_a,)
    if q_a == 0.0:
        return replace(state, axial_converged=True, q_history=history)
    if state.q_history and abs(state.q_history[-1] - q_a) < state.t_advance:
        return replace(state, axial_converged=True, q_history=history)
    return replace(state, advance=state.advance - state.k_advance * q_a,
                   q_history=history)


CSV_HEADER = "n,h_px,S_r,S_g,q_r,q_a,R_mm,a_mm,radial_converged,axial_converged"


def csv_row(n: int, quality: WrapQuality, state: FeedbackState) -> str:
    return (f"{n},{quality.height_px},{quality.area_rope},{quality.area_gap},"
            f"{quality.q_radial:.3f},{quality.q_axial:.6f},"
            f"{state.radius * 1e3:.3f},{state.advance * 1e3:.3f},"
            f"{int(state.radial_converged)},{int(state.axial_converged)}")
