"""Shared image, mask, and point-cloud primitives for the perception stages.

Conventions used throughout the package:

* images are numpy arrays indexed ``[row, col]`` with row 0 at the top;
* binary masks are boolean arrays of shape ``(height, width)``;
* hue is measured in degrees on ``[0, 360)``, saturation and value on ``[0, 1]``;
* 3D points are metric coordinates in the world frame (x front, y left, z up,
  origin on the tabletop at the manipulator base).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGeometry,
    DimensionMismatch,
    EmptyMask,
    UnimodalDegenerate,
)

HUE_BINS = 36  # 10 degree bins; coarse enough to ride out render dither


# ---------------------------------------------------------------------------
# Camera model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""
    fx: float
    fy: float
    cx: float
    cy: float


def look_rotation(forward: np.ndarray, up: np.ndarray) -> np.ndarray:
    """Rotation whose columns are camera x (image right), y (image down),
    z (viewing direction) expressed in world coordinates."""
    z = np.asarray(forward, dtype=float)
    z = z / np.linalg.norm(z)
    upv = np.asarray(up, dtype=float)
    y = -(upv - np.dot(upv, z) * z)  # image "down" opposes world up
    ny = np.linalg.norm(y)
    if ny < 1e-12:
        raise ValueError("up vector parallel to viewing direction")
    y = y / ny
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


@dataclass(frozen=True)
class Camera:
    """World-posed pinhole camera."""
    position: np.ndarray          # (3,)
    rotation: np.ndarray          # (3,3), columns = image right / down / forward
    intrinsics: CameraIntrinsics
    width: int
    height: int

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.position) @ self.rotation

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Project world points. Returns float (u, v) pairs and depths."""
        cam = self.world_to_camera(points)
        z = cam[:, 2]
        k = self.intrinsics
        with np.errstate(divide="ignore", invalid="ignore"):
            u = k.cx + k.fx * cam[:, 0] / z
            v = k.cy + k.fy * cam[:, 1] / z
        return np.column_stack([u, v]), z

    def pixel_rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit ray directions through every pixel center, shape (H, W, 3)."""
        k = self.intrinsics
        us = np.arange(self.width, dtype=float)
        vs = np.arange(self.height, dtype=float)
        uu, vv = np.meshgrid(us, vs)
        dirs_cam = np.stack(
            [(uu - k.cx) / k.fx, (vv - k.cy) / k.fy, np.ones_like(uu)], axis=-1
        )
        dirs_world = dirs_cam @ self.rotation.T
        dirs_world /= np.linalg.norm(dirs_world, axis=-1, keepdims=True)
        return self.position.copy(), dirs_world

    def pixel_ray(self, u: float, v: float) -> tuple[np.ndarray, np.ndarray]:
        k = self.intrinsics
        d_cam = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
        d = self.rotation @ d_cam
        return self.position.copy(), d / np.linalg.norm(d)

    def ray_plane_point(self, u: float, v: float, plane_point: np.ndarray,
                        plane_normal: np.ndarray) -> np.ndarray:
        """World point where the pixel ray crosses the given plane."""
        origin, d = self.pixel_ray(u, v)
        n = np.asarray(plane_normal, dtype=float)
        denom = float(np.dot(d, n))
        if abs(denom) < 1e-12:
            raise ValueError("pixel ray parallel to plane")
        t = float(np.dot(np.asarray(plane_point, dtype=float) - origin, n)) / denom
        return origin + t * d


# ---------------------------------------------------------------------------
# Colorized depth map
# ---------------------------------------------------------------------------

@dataclass
class ColorizedDepthMap:
    """Joint container of 3D points and their registered color pixels.

    ``points[i]`` is the world-frame position observed at image pixel
    ``pixels[i]`` with HSV color ``colors[i]``. The pixel assignment is a
    bijection over the valid entries: no pixel appears twice.
    """
    width: int
    height: int
    intrinsics: CameraIntrinsics
    points: np.ndarray   # (N, 3) float64, meters
    pixels: np.ndarray   # (N, 2) int32, (u, v)
    colors: np.ndarray   # (N, 3) float64, (hue deg, sat, val)

    def __len__(self) -> int:
        return len(self.points)

    def validate(self) -> None:
        n = len(self.points)
        if not (len(self.pixels) == n and len(self.colors) == n):
            raise DimensionMismatch("points, pixels and colors must align")
        if n:
            u, v = self.pixels[:, 0], self.pixels[:, 1]
            if u.min() < 0 or v.min() < 0 or u.max() >= self.width or v.max() >= self.height:
                raise ValueError("pixel coordinates outside the image")
            flat = v.astype(np.int64) * self.width + u.astype(np.int64)
            if len(np.unique(flat)) != n:
                raise ValueError("pixel mapping is not a bijection")

    def select(self, keep: np.ndarray) -> "ColorizedDepthMap":
        return ColorizedDepthMap(
            width=self.width, height=self.height, intrinsics=self.intrinsics,
            points=self.points[keep], pixels=self.pixels[keep], colors=self.colors[keep],
        )

    def index_grid(self) -> np.ndarray:
        """(H, W) int array mapping a pixel to its entry index, -1 if none."""
        grid = np.full((self.height, self.width), -1, dtype=np.int64)
        grid[self.pixels[:, 1], self.pixels[:, 0]] = np.arange(len(self.points))
        return grid

    def pixel_mask(self) -> np.ndarray:
        mask = np.zeros((self.height, self.width), dtype=bool)
        mask[self.pixels[:, 1], self.pixels[:, 0]] = True
        return mask


# ---------------------------------------------------------------------------
# Rectangles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisRect:
    """Axis-aligned pixel rectangle with inclusive corners."""
    min_x: int
    min_y: int
    max_x: int
    max_y: int

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError("rectangle corners out of order")

    @property
    def width(self) -> int:
        return self.max_x - self.min_x + 1

    @property
    def height(self) -> int:
        return self.max_y - self.min_y + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, x: int, y: int) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


@dataclass(frozen=True)
class OrientedRect:
    """Rotated rectangle; the short edge is reported as the width."""
    center: tuple[float, float]   # (x, y) pixels
    half_length: float            # long half-extent, pixels
    half_width: float             # short half-extent, pixels
    angle: float                  # long-axis direction, radians in [0, pi)

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise ValueError("half extents must be positive")
        if self.half_width > self.half_length + 1e-9:
            raise ValueError("width edge must not exceed length edge")

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def area(self) -> float:
        return self.width * self.length


# ---------------------------------------------------------------------------
# Histograms and thresholds
# ---------------------------------------------------------------------------

def hue_histogram(hues: np.ndarray, bins: int = HUE_BINS) -> np.ndarray:
    """Counts per hue bin; bin k covers [k*360/bins, (k+1)*360/bins)."""
    if bins < 2:
        raise ValueError("need at least two bins")
    h = np.asarray(hues, dtype=float) % 360.0
    idx = np.floor(h * bins / 360.0).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    return np.bincount(idx, minlength=bins).astype(np.int64)


def otsu_threshold(counts: np.ndarray) -> int:
    """Split index t maximizing between-class variance of [0..t] vs [t+1..].

    Ties break toward the smallest t. Raises UnimodalDegenerate when the
    histogram has fewer than two occupied bins.
    """
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or len(c) < 2:
        raise ValueError("histogram must be a 1-D array with >= 2 bins")
    if np.count_nonzero(c) < 2:
        raise UnimodalDegenerate("all histogram mass lies in a single bin")
    centers = np.arange(len(c), dtype=float)
    w0 = np.cumsum(c)[:-1]
    w1 = c.sum() - w0
    m0 = np.cumsum(c * centers)[:-1]
    m1 = (c * centers).sum() - m0
    valid = (w0 > 0) & (w1 > 0)
    var = np.zeros(len(c) - 1)
    var[valid] = w0[valid] * w1[valid] * (m0[valid] / w0[valid] - m1[valid] / w1[valid]) ** 2
    return int(np.argmax(var))  # argmax returns the first (smallest) maximizer


def rotate_hues_centered(hues: np.ndarray, bins: int = HUE_BINS) -> tuple[np.ndarray, float]:
    """Rotate hue values so their circular mean sits at 180 degrees.

    Hue is circular; Otsu and moment fits need a linear axis. Returns the
    rotated hues and the applied offset (add it back, mod 360, to undo).
    """
    h = np.asarray(hues, dtype=float) % 360.0
    ang = np.deg2rad(h)
    mean = math.degrees(math.atan2(np.sin(ang).mean(), np.cos(ang).mean())) % 360.0
    offset = (180.0 - mean) % 360.0
    return (h + offset) % 360.0, offset


# ---------------------------------------------------------------------------
# Skeletonization (Zhang-Suen thinning)
# ---------------------------------------------------------------------------

def _neighbor_ring(img: np.ndarray) -> list[np.ndarray]:
    p = np.pad(img, 1)
    return [
        p[:-2, 1:-1],  # N
        p[:-2, 2:],    # NE
        p[1:-1, 2:],   # E
        p[2:, 2:],     # SE
        p[2:, 1:-1],   # S
        p[2:, :-2],    # SW
        p[1:-1, :-2],  # W
        p[:-2, :-2],   # NW
    ]


def skeletonize(mask: np.ndarray) -> np.ndarray:
    """Thin foreground strokes to unit width with two-subiteration thinning.

    Empty input yields empty output; already-thin strokes are fixed points.
    """
    img = np.ascontiguousarray(mask, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError("mask must be 2-D")
    if not img.any():
        return np.zeros_like(mask, dtype=bool)
    img = img.copy()
    while True:
        changed = False
        for step in (0, 1):
            ring = _neighbor_ring(img)
            b = np.zeros(img.shape, dtype=np.int32)
            for r in ring:
                b += r
            a = np.zeros(img.shape, dtype=np.int32)
            for i in range(8):
                a += ((ring[i] == 0) & (ring[(i + 1) % 8] == 1)).astype(np.int32)
            n, e, s, w = ring[0], ring[2], ring[4], ring[6]
            if step == 0:
                cond = (n * e * s == 0) & (e * s * w == 0)
            else:
                cond = (n * e * w == 0) & (n * s * w == 0)
            kill = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & cond
            if kill.any():
                img[kill] = 0
                changed = True
        if not changed:
            break
    _prune_square_corners(img)
    return img.astype(bool)


def _prune_square_corners(img: np.ndarray) -> None:
    """Remove leftover pixels that still complete a 2x2 foreground square.

    Parallel thinning can leave single staircase corners whose removal does
    not break 8-connectivity; drop them in raster order.
    """
    while True:
        sq = (img[:-1, :-1] & img[:-1, 1:] & img[1:, :-1] & img[1:, 1:])
        ys, xs = np.nonzero(sq)
        if len(ys) == 0:
            return
        removed = False
        for y, x in zip(ys, xs):
            # corner pixels of this 2x2 block, raster order
            for (py, px) in ((y, x), (y, x + 1), (y + 1, x), (y + 1, x + 1)):
                if img[py, px] and _removal_safe(img, py, px):
                    img[py, px] = 0
                    removed = True
                    break
            if removed:
                break
        if not removed:
            return


def _removal_safe(img: np.ndarray, y: int, x: int) -> bool:
    """True if deleting (y, x) keeps its 8-neighborhood connected."""
    h, w = img.shape
    ring_off = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    vals = []
    for dy, dx in ring_off:
        yy, xx = y + dy, x + dx
        vals.append(1 if 0 <= yy < h and 0 <= xx < w and img[yy, xx] else 0)
    transitions = sum(1 for i in range(8) if vals[i] == 0 and vals[(i + 1) % 8] == 1)
    return transitions == 1 and sum(vals) >= 2


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels (0 = background) via two-pass union-find."""
    from scipy import ndimage

    structure = np.ones((3, 3), dtype=int)
    labels, count = ndimage.label(mask, structure=structure)
    return labels, count


# ---------------------------------------------------------------------------
# Maximum inscribed axis-aligned rectangle
# ---------------------------------------------------------------------------

def max_inscribed_rect(mask: np.ndarray) -> AxisRect:
    """Largest all-foreground axis-aligned rectangle in the mask.

    Ties break toward the smallest (min_y, min_x). Runs the classic
    largest-rectangle-in-histogram sweep row by row.
    """
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    if not m.any():
        raise EmptyMask("no foreground pixels")
    h, w = m.shape
    heights = np.zeros(w, dtype=np.int64)
    best_key = None
    best_rect = None
    for row in range(h):
        heights = np.where(m[row], heights + 1, 0)
        stack: list[tuple[int, int]] = []  # (start_col, height)
        for col in range(w + 1):
            cur = int(heights[col]) if col < w else 0
            start = col
            while stack and stack[-1][1] >= cur:
                c0, h0 = stack.pop()
                area = h0 * (col - c0)
                key = (-area, row - h0 + 1, c0)
                if best_key is None or key < best_key:
                    best_key = key
                    best_rect = AxisRect(min_x=c0, min_y=row - h0 + 1,
                                         max_x=col - 1, max_y=row)
                start = c0
            if cur > 0 and (not stack or stack[-1][1] < cur):
                stack.append((start, cur))
    assert best_rect is not None
    return best_rect


# ---------------------------------------------------------------------------
# Minimum-area enclosing rectangle (rotating calipers)
# ---------------------------------------------------------------------------

def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise, no repeated endpoint."""
    pts = np.unique(points, axis=0)
    if len(pts) == 1:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def min_area_rect(mask: np.ndarray) -> OrientedRect:
    """Smallest-area rotated rectangle enclosing the foreground pixels.

    Pixels are treated as unit squares (corners at +-0.5 around centers) so
    an axis-aligned w x l block reports exactly width w and length l.
    Requires at least three non-collinear pixel centers.
    """
    m = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(m)
    if len(xs) < 3:
        raise DegenerateGeometry("need at least three foreground pixels")
    centers = np.column_stack([xs, ys]).astype(float)
    d1 = centers[1] - centers[0]
    rel = centers[2:] - centers[0]
    if np.all(np.abs(d1[0] * rel[:, 1] - d1[1] * rel[:, 0]) < 1e-9):
        raise DegenerateGeometry("foreground pixels are collinear")

    hull_c = _convex_hull(centers)
    offs = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    corners = (hull_c[:, None, :] + offs[None, :, :]).reshape(-1, 2)
    hull = _convex_hull(corners)

    edges = np.roll(hull, -1, axis=0) - hull
    lengths = np.linalg.norm(edges, axis=1)
    edges = edges[lengths > 1e-12] / lengths[lengths > 1e-12, None]

    best = None
    for e in edges:
        perp = np.array([-e[1], e[0]])
        a = hull @ e
        b = hull @ perp
        ext_a = a.max() - a.min()
        ext_b = b.max() - b.min()
        area = ext_a * ext_b
        if best is None or area < best[0] - 1e-12:
            ca = (a.max() + a.min()) / 2.0
            cb = (b.max() + b.min()) / 2.0
            center = ca * e + cb * perp
            if ext_a >= ext_b:
                long_dir, half_l, half_w = e, ext_a / 2.0, ext_b / 2.0
            else:
                long_dir, half_l, half_w = perp, ext_b / 2.0, ext_a / 2.0
            angle = math.atan2(long_dir[1], long_dir[0]) % math.pi
            best = (area, center, half_l, half_w, angle)
    assert best is not None
    _, center, half_l, half_w, angle = best
    return OrientedRect(center=(float(center[0]), float(center[1])),
                        half_length=float(half_l), half_width=float(max(half_w, 1e-9)),
                        angle=float(angle))


# ---------------------------------------------------------------------------
# Color conversion
# ---------------------------------------------------------------------------

def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Vectorized HSV (hue deg, sat, val in [0,1]) to RGB uint8."""
    arr = np.asarray(hsv, dtype=float)
    h = (arr[..., 0] % 360.0) / 60.0
    s = np.clip(arr[..., 1], 0.0, 1.0)
    v = np.clip(arr[..., 2], 0.0, 1.0)
    i = np.floor(h).astype(int) % 6
    f = h - np.floor(h)
    p = v * (1 - s)
    q = v * (1 - f * s)
    t = v * (1 - (1 - f) * s)
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return (np.stack([r, g, b], axis=-1) * 255.0 + 0.5).astype(np.uint8)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized RGB uint8 to HSV (hue deg, sat, val in [0,1])."""
    arr = np.asarray(rgb, dtype=float) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = arr.max(axis=-1)
    mn = arr.min(axis=-1)
    diff = mx - mn
    hue = np.zeros_like(mx)
    nz = diff > 1e-12
    rmax = nz & (mx == r)
    gmax = nz & (mx == g) & ~rmax
    bmax = nz & (mx == b) & ~rmax & ~gmax
    hue[rmax] = (60.0 * (g[rmax] - b[rmax]) / diff[rmax]) % 360.0
    hue[gmax] = 60.0 * (b[gmax] - r[gmax]) / diff[gmax] + 120.0
    hue[bmax] = 60.0 * (r[bmax] - g[bmax]) / diff[bmax] + 240.0
    sat = np.where(mx > 1e-12, diff / np.maximum(mx, 1e-12), 0.0)
    return np.stack([hue % 360.0, sat, mx], axis=-1)


# ---------------------------------------------------------------------------
# File formats: PPM (P6) color, PGM (P5, 16-bit mm) depth, ASCII point lists
# ---------------------------------------------------------------------------

def write_ppm(path, rgb: np.ndarray) -> None:
    img = np.asarray(rgb, dtype=np.uint8)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected HxWx3 uint8 image")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    magic, rest = _parse_pnm_header(data, b"P6", 3)
    w, h, maxval, offset = magic
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    img = np.frombuffer(rest, dtype=np.uint8, count=w * h * 3, offset=offset)
    return img.reshape(h, w, 3).copy()


def write_pgm16(path, depth_mm: np.ndarray) -> None:
    img = np.asarray(depth_mm, dtype=np.uint16)
    if img.ndim != 2:
        raise ValueError("expected HxW uint16 depth raster")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(img.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    magic, rest = _parse_pnm_header(data, b"P5", 1)
    w, h, maxval, offset = magic
    if maxval <= 255:
        raise ValueError("expected a 16-bit PGM")
    img = np.frombuffer(rest, dtype=">u2", count=w * h, offset=offset)
    return img.reshape(h, w).astype(np.uint16)


def _parse_pnm_header(data: bytes, magic: bytes, _channels: int):
    if not data.startswith(magic):
        raise ValueError(f"not a {magic.decode()} file")
    fields: list[int] = []
    i = len(magic)
    while len(fields) < 3:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        fields.append(int(data[i:j]))
        i = j
    i += 1  # single whitespace after maxval
    w, h, maxval = fields
    return (w, h, maxval, 0), data[i:]


def write_point_cloud(path, dmap: ColorizedDepthMap, comments: list[str] | None = None) -> None:
    """ASCII lines "p_x p_y p_z q_x q_y h s v"; metadata in '#' comments."""
    k = dmap.intrinsics
    lines = [
        f"# width {dmap.width}",
        f"# height {dmap.height}",
        f"# intrinsics {k.fx} {k.fy} {k.cx} {k.cy}",
    ]
    for c in comments or []:
        lines.append(f"# {c}")
    for p, q, c in zip(dmap.points, dmap.pixels, dmap.colors):
        lines.append(
            f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {int(q[0])} {int(q[1])} "
            f"{c[0]:.3f} {c[1]:.4f} {c[2]:.4f}"
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_point_cloud(path) -> ColorizedDepthMap:
    width = height = None
    intr = None
    pts, pix, col = [], [], []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].split()
                if body[:1] == ["width"]:
                    width = int(body[1])
                elif body[:1] == ["height"]:
                    height = int(body[1])
                elif body[:1] == ["intrinsics"]:
                    intr = CameraIntrinsics(*map(float, body[1:5]))
                continue
            parts = line.split()
            pts.append([float(parts[0]), float(parts[1]), float(parts[2])])
            pix.append([int(parts[3]), int(parts[4])])
            col.append([float(parts[5]), float(parts[6]), float(parts[7])])
    if width is None or height is None or intr is None:
        raise ValueError("point cloud file missing width/height/intrinsics comments")
    return ColorizedDepthMap(
        width=width, height=height, intrinsics=intr,
        points=np.array(pts, dtype=float).reshape(-1, 3),
        pixels=np.array(pix, dtype=np.int32).reshape(-1, 2),
        colors=np.array(col, dtype=float).reshape(-1, 3),
    )
