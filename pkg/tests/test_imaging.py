import math

import numpy as np
import pytest

from ropewrap import imaging
from ropewrap.errors import DegenerateGeometry, EmptyMask, UnimodalDegenerate
from ropewrap.imaging import (
    AxisRect,
    hue_histogram,
    max_inscribed_rect,
    min_area_rect,
    otsu_threshold,
    skeletonize,
)


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def otsu_bruteforce(counts):
    """Independent maximizer: loop every split, compute class stats directly."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    best_t, best_var = None, -1.0
    for t in range(len(counts) - 1):
        w0 = counts[: t + 1].sum()
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        centers = np.arange(len(counts), dtype=float)
        mu0 = (counts[: t + 1] * centers[: t + 1]).sum() / w0
        mu1 = (counts[t + 1:] * centers[t + 1:]).sum() / w1
        var = w0 * w1 * (mu0 - mu1) ** 2
        if var > best_var + 1e-9:
            best_var, best_t = var, t
    return best_t


def all_foreground_rects(mask):
    """Exhaustive enumeration of maximal all-white axis rectangles."""
    h, w = mask.shape
    best_area = 0
    best = None
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0]:
                continue
            max_x = w - 1
            for y1 in range(y0, h):
                row = mask[y1, x0: max_x + 1]
                if not row[0]:
                    break
                stop = np.flatnonzero(~row)
                if len(stop):
                    max_x = x0 + stop[0] - 1
                area = (y1 - y0 + 1) * (max_x - x0 + 1)
                key = (area, -y0, -x0)
                if best is None or key > (best_area, -best[1], -best[0]):
                    best_area = area
                    best = (x0, y0, max_x, y1)
    return best_area, best


# ---------------------------------------------------------------------------
# otsu_threshold
# ---------------------------------------------------------------------------

def test_otsu_tie_breaks_to_smallest_split():
    counts = np.zeros(6, dtype=int)
    counts[0] = counts[1] = counts[4] = counts[5] = 5
    assert otsu_bruteforce(counts) == 1
    assert otsu_threshold(counts) == 1


def test_otsu_two_spikes():
    counts = np.zeros(8, dtype=int)
    counts[0] = counts[7] = 10
    assert otsu_bruteforce(counts) == 0
    assert otsu_threshold(counts) == 0


def test_otsu_single_bin_degenerate():
    counts = np.zeros(8, dtype=int)
    counts[3] = 20
    with pytest.raises(UnimodalDegenerate):
        otsu_threshold(counts)


def test_otsu_matches_bruteforce_on_random_histograms():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        bins = rng.integers(2, 40)
        counts = rng.integers(0, 50, size=bins)
        if np.count_nonzero(counts) < 2:
            counts[0] += 1
            counts[-1] += 1
        assert otsu_threshold(counts) == otsu_bruteforce(counts)


# ---------------------------------------------------------------------------
# hue_histogram
# ---------------------------------------------------------------------------

def test_hue_histogram_single_bin():
    counts = hue_histogram(np.zeros(10), bins=36)
    assert counts[0] == 10 and counts.sum() == 10


def test_hue_histogram_spread():
    counts = hue_histogram(np.array([10.0, 10.0, 200.0]), bins=36)
    assert counts[1] == 2 and counts[20] == 1 and counts.sum() == 3


def test_hue_histogram_empty():
    counts = hue_histogram(np.array([]), bins=36)
    assert counts.sum() == 0 and len(counts) == 36


# ---------------------------------------------------------------------------
# skeletonize
# ---------------------------------------------------------------------------

def test_skeletonize_horizontal_bar_thins_to_middle_row():
    mask = np.zeros((7, 24), dtype=bool)
    mask[2:5, 2:22] = True  # 3x20 solid bar, middle row index 3
    skel = skeletonize(mask)
    ys, xs = np.nonzero(skel)
    assert set(ys) == {3}
    # endpoints may retract by at most one pixel on each side
    assert xs.min() <= 3 and xs.max() >= 20
    assert np.all(skel <= mask)


def test_skeletonize_empty_is_empty():
    mask = np.zeros((5, 5), dtype=bool)
    assert not skeletonize(mask).any()


def test_skeletonize_thin_diagonal_is_fixed_point():
    mask = np.zeros((10, 10), dtype=bool)
    for i in range(1, 9):
        mask[i, i] = True
    assert np.array_equal(skeletonize(mask), mask)


def test_skeletonize_properties_random_masks():
    rng = np.random.default_rng(11)
    for _ in range(25):
        mask = rng.random((32, 32)) < 0.45
        # thicken with a dilation so there is something to thin
        from scipy import ndimage
        mask = ndimage.binary_dilation(mask, np.ones((2, 2), dtype=bool))
        skel = skeletonize(mask)
        assert np.all(skel <= mask), "skeleton must be a subset"
        assert skel.sum() <= mask.sum()
        sq = skel[:-1, :-1] & skel[:-1, 1:] & skel[1:, :-1] & skel[1:, 1:]
        assert not sq.any(), "no 2x2 block may remain"
        _, n_in = imaging.connected_components(mask)
        _, n_out = imaging.connected_components(skel)
        assert n_in == n_out, "component count must be preserved"


# ---------------------------------------------------------------------------
# max_inscribed_rect
# ---------------------------------------------------------------------------

def test_inscribed_rect_full_mask():
    rect = max_inscribed_rect(np.ones((10, 10), dtype=bool))
    assert (rect.min_x, rect.min_y, rect.max_x, rect.max_y) == (0, 0, 9, 9)


def test_inscribed_rect_one_hole_corner():
    mask = np.ones((10, 10), dtype=bool)
    mask[0, 0] = False
    rect = max_inscribed_rect(mask)
    assert rect.area == 90
    area, _ = all_foreground_rects(mask)
    assert area == 90


def test_inscribed_rect_empty_mask():
    with pytest.raises(EmptyMask):
        max_inscribed_rect(np.zeros((4, 4), dtype=bool))


def test_inscribed_rect_matches_exhaustive_on_random_masks():
    rng = np.random.default_rng(3)
    for _ in range(30):
        mask = rng.random((14, 17)) < 0.72
        if not mask.any():
            mask[5, 5] = True
        rect = max_inscribed_rect(mask)
        sub = mask[rect.min_y: rect.max_y + 1, rect.min_x: rect.max_x + 1]
        assert sub.all(), "returned rectangle must be all-foreground"
        area, _ = all_foreground_rects(mask)
        assert rect.area == area


def test_inscribed_rect_beats_random_samples():
    rng = np.random.default_rng(5)
    mask = rng.random((40, 40)) < 0.8
    mask[20, 20] = True
    rect = max_inscribed_rect(mask)
    for _ in range(300):
        y0, y1 = sorted(rng.integers(0, 40, 2))
        x0, x1 = sorted(rng.integers(0, 40, 2))
        if mask[y0: y1 + 1, x0: x1 + 1].all():
            assert rect.area >= (y1 - y0 + 1) * (x1 - x0 + 1)


# ---------------------------------------------------------------------------
# min_area_rect
# ---------------------------------------------------------------------------

def test_min_area_rect_axis_aligned_block():
    mask = np.zeros((30, 10), dtype=bool)
    mask[5:25, 3:7] = True  # 4 wide, 20 long
    rect = min_area_rect(mask)
    assert rect.width == pytest.approx(4.0, abs=1e-9)
    assert rect.length == pytest.approx(20.0, abs=1e-9)
    # long axis is vertical: angle pi/2
    assert rect.angle == pytest.approx(math.pi / 2.0, abs=1e-9)


def rasterize_rotated_block(width, length, angle_deg, canvas=80):
    """Oracle helper: rasterize a rotated rectangle by point-in-rect test."""
    mask = np.zeros((canvas, canvas), dtype=bool)
    c = canvas / 2.0
    ang = math.radians(angle_deg)
    ca, sa = math.cos(ang), math.sin(ang)
    ys, xs = np.mgrid[0:canvas, 0:canvas]
    rx = (xs - c) * ca + (ys - c) * sa
    ry = -(xs - c) * sa + (ys - c) * ca
    mask[(np.abs(rx) <= length / 2.0) & (np.abs(ry) <= width / 2.0)] = True
    return mask


def exhaustive_angle_scan(mask):
    """Oracle: smallest enclosing box over a fine angle sweep."""
    ys, xs = np.nonzero(mask)
    pts = np.column_stack([xs, ys]).astype(float)
    corners = np.concatenate([pts + off for off in
                              ([-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5])])
    best = (math.inf, None, None)
    for deg in np.arange(0.0, 180.0, 0.25):
        ang = math.radians(deg)
        e = np.array([math.cos(ang), math.sin(ang)])
        p = np.array([-e[1], e[0]])
        a = corners @ e
        b = corners @ p
        area = (a.max() - a.min()) * (b.max() - b.min())
        if area < best[0]:
            ext = sorted([a.max() - a.min(), b.max() - b.min()])
            best = (area, ext[0], deg)
    return best


def test_min_area_rect_rotated_block():
    mask = rasterize_rotated_block(width=4, length=20, angle_deg=30)
    rect = min_area_rect(mask)
    _, oracle_width, _ = exhaustive_angle_scan(mask)
    assert rect.width == pytest.approx(oracle_width, abs=0.51)
    assert abs(rect.width - 4.0) <= 1.0
    assert math.degrees(rect.angle) == pytest.approx(30.0, abs=2.0)


def test_min_area_rect_degenerate():
    mask = np.zeros((5, 5), dtype=bool)
    mask[2, 2] = True
    with pytest.raises(DegenerateGeometry):
        min_area_rect(mask)
    mask[2, 3] = True
    mask[2, 4] = True  # three collinear pixels
    with pytest.raises(DegenerateGeometry):
        min_area_rect(mask)


def test_min_area_rect_never_beats_axis_bbox():
    rng = np.random.default_rng(9)
    for _ in range(20):
        mask = np.zeros((30, 30), dtype=bool)
        pts = rng.integers(3, 27, size=(rng.integers(3, 40), 2))
        mask[pts[:, 0], pts[:, 1]] = True
        try:
            rect = min_area_rect(mask)
        except DegenerateGeometry:
            continue
        ys, xs = np.nonzero(mask)
        bbox_area = (xs.max() - xs.min() + 1) * (ys.max() - ys.min() + 1)
        assert rect.area <= bbox_area + 1e-6


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def test_ppm_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(12, 17, 3), dtype=np.uint8)
    path = tmp_path / "img.ppm"
    imaging.write_ppm(path, img)
    assert np.array_equal(imaging.read_ppm(path), img)


def test_pgm16_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    depth = rng.integers(0, 65536, size=(9, 13), dtype=np.uint16)
    path = tmp_path / "depth.pgm"
    imaging.write_pgm16(path, depth)
    assert np.array_equal(imaging.read_pgm16(path), depth)


def test_point_cloud_roundtrip(tmp_path):
    intr = imaging.CameraIntrinsics(fx=1600, fy=1600, cx=320, cy=45)
    dmap = imaging.ColorizedDepthMap(
        width=640, height=480, intrinsics=intr,
        points=np.array([[0.1, 0.2, 0.3], [0.4, -0.5, 0.6]]),
        pixels=np.array([[10, 20], [30, 40]], dtype=np.int32),
        colors=np.array([[120.0, 0.5, 0.5], [10.0, 0.9, 0.8]]))
    path = tmp_path / "cloud.txt"
    imaging.write_point_cloud(path, dmap, comments=["test cloud"])
    back = imaging.read_point_cloud(path)
    assert back.width == 640 and back.height == 480
    assert np.allclose(back.points, dmap.points, atol=1e-6)
    assert np.array_equal(back.pixels, dmap.pixels)
    assert np.allclose(back.colors, dmap.colors, atol=1e-3)


def test_colorized_depth_map_bijection_check():
    intr = imaging.CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0)
    dmap = imaging.ColorizedDepthMap(
        width=4, height=4, intrinsics=intr,
        points=np.zeros((2, 3)), pixels=np.array([[1, 1], [1, 1]], dtype=np.int32),
        colors=np.zeros((2, 3)))
    with pytest.raises(ValueError):
        dmap.validate()


def test_hsv_rgb_roundtrip():
    rng = np.random.default_rng(2)
    hsv = np.stack([rng.random(50) * 360.0,
                    0.2 + 0.8 * rng.random(50),
                    0.2 + 0.8 * rng.random(50)], axis=-1)
    rgb = imaging.hsv_to_rgb(hsv)
    back = imaging.rgb_to_hsv(rgb)
    err = np.abs((back[:, 0] - hsv[:, 0] + 180.0) % 360.0 - 180.0)
    assert err.max() < 2.0
