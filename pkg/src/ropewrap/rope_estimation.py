"""Estimate the rope's hue range and pixel diameter from the rod's pixel region.

The rod region contains mostly rod-colored pixels with a minority of rope
pixels where the rope rides over the rod. A threshold on the hue histogram
separates the two; the rope side gets a Gaussian fit by moment matching and
its pixel mask yields the diameter via a minimum-area rectangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import imaging
from .errors import DegenerateGeometry, UnimodalDegenerate
from .imaging import HUE_BINS


@dataclass(frozen=True)
class RopeEstimate:
    """Rope hue model and measured diameter."""
    hue_mu: float        # degrees in [0, 360)
    hue_sigma: float     # degrees
    diameter_px: float
    diameter_mm: float

    @property
    def hue_range(self) -> tuple[float, float]:
        """Hue interval [mu - 3 sigma, mu + 3 sigma], endpoints mod 360."""
        return ((self.hue_mu - 3.0 * self.hue_sigma) % 360.0,
                (self.hue_mu + 3.0 * self.hue_sigma) % 360.0)

    def to_record(self) -> str:
        return (f"mu= {self.hue_mu:.3f} sigma= {self.hue_sigma:.3f} "
                f"d_px= {self.diameter_px:.2f}")


def circular_delta(a, b):
    """Signed smallest angular difference a - b in degrees, in [-180, 180)."""
    return (np.asarray(a, dtype=float) - np.asarray(b, dtype=float) + 180.0) % 360.0 - 180.0


def hue_in_range(hue, estimate: RopeEstimate):
    """True where hue falls inside the rope's range (circular comparison)."""
    return np.abs(circular_delta(hue, estimate.hue_mu)) <= 3.0 * estimate.hue_sigma


def estimate_rope(pixels: np.ndarray, hues: np.ndarray, image_shape: tuple[int, int],
                  scale_px_per_mm: float, bins: int = HUE_BINS) -> RopeEstimate:
    """Estimate rope color and diameter from the rod-region pixels.

    pixels: (N, 2) integer (u, v) coordinates of the rod region;
    hues: matching hue values in degrees; image_shape: (height, width) of
    the source image; scale_px_per_mm: pixel scale at the rod's depth.
    """
    pixels = np.asarray(pixels)
    hues = np.asarray(hues, dtype=float)
    if len(pixels) != len(hues):
        raise ValueError("pixels and hues must align")
    if len(pixels) < 2:
        raise UnimodalDegenerate("rod region too small to split")

    rotated, offset = imaging.rotate_hues_centered(hues, bins)
    counts = imaging.hue_histogram(rotated, bins)
    t = imaging.otsu_threshold(counts)  # raises UnimodalDegenerate when flat

    bin_width = 360.0 / bins
    bin_idx = np.clip(np.floor(rotated / bin_width).astype(int), 0, bins - 1)
    low_mass = counts[: t + 1].sum()
    high_mass = counts[t + 1:].sum()
    # the rod dominates the region, so the lighter side is the rope
    rope_side_high = high_mass < low_mass or (high_mass == low_mass and t + 1 > bins // 2)
    rope_sel = bin_idx > t if rope_side_high else bin_idx <= t

    rope_counts = counts[t + 1:] if rope_side_high else counts[: t + 1]
    centers = (np.arange(len(counts), dtype=float) + 0.5) * bin_width
    rope_centers = centers[t + 1:] if rope_side_high else centers[: t + 1]
    mass = rope_counts.sum()
    if mass == 0:
        raise UnimodalDegenerate("threshold left the rope side empty")
    p = rope_counts / mass  # normalized rope-side histogram, sums to 1
    mu_rot = float((p * rope_centers).sum())
    # moment match with the within-bin uniform term, so a single occupied
    # bin still yields sigma = bin_width / sqrt(12) instead of zero
    var = float((p * (rope_centers - mu_rot) ** 2).sum()) + bin_width ** 2 / 12.0
    sigma = math.sqrt(var)
    mu = (mu_rot - offset) % 360.0

    h, w = image_shape
    mask = np.zeros((h, w), dtype=bool)
    sel_px = pixels[rope_sel]
    mask[sel_px[:, 1], sel_px[:, 0]] = True
    rect = imaging.min_area_rect(mask)  # raises DegenerateGeometry when too thin
    d_px = rect.width
    if d_px <= 0:
        raise DegenerateGeometry("rope rectangle has zero width")
    return RopeEstimate(hue_mu=mu, hue_sigma=sigma, diameter_px=float(d_px),
                        diameter_mm=float(d_px / scale_px_per_mm))
