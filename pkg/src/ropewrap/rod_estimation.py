"""Recover the rod's radius, length, center, and axis from a colorized depth map.

Pipeline: background subtraction, voxel downsampling, density clustering,
nearest-cluster selection, hue split of the cluster's pixels, inscribed
rectangle, then half-cylinder template registration with an outer radius
search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import imaging
from .errors import EmptyScene, IcpDiverged, NoClusters
from .imaging import AxisRect, Camera, ColorizedDepthMap, max_inscribed_rect

NOISE = -1

DBSCAN_EPS = 0.020        # m; tuned for 5 mm voxel clouds of desk-scale objects
DBSCAN_MIN_PTS = 8
VOXEL_EDGE = 0.005        # m
BBOX_PAD = 0.005          # m added around the selected cluster on all sides
ICP_GATE = 0.020          # m correspondence rejection distance
ICP_TOL = 1e-5            # m RMS change convergence threshold (10 um)
ICP_MAX_ITER = 50
ICP_DIVERGED_RMS = 0.010  # m
TEMPLATE_ARC_STEP = 0.002  # m spacing along the template arc
TEMPLATE_AXIAL_STEP = 0.004


@dataclass
class RodEstimate:
    """Rod pose and dimensions plus the pixel/point region they came from."""
    center: np.ndarray          # (3,) m, world frame
    axis: np.ndarray            # (3,) unit vector
    radius: float               # m
    length: float               # m
    pixel_region: np.ndarray    # (N, 2) int pixels inside the fit rectangle
    points: np.ndarray          # (N, 3) m, the corresponding 3D points
    rect: AxisRect | None = None
    rod_hue: float = 0.0        # circular mean hue of the rod-colored pixels
    rms: float = 0.0            # final registration residual, m

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        axis = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(axis)
        if n > 0:
            axis = axis / n
        self.axis = axis
        if self.radius <= 0 or self.length <= 0:
            raise ValueError("radius and length must be positive")
        if len(self.pixel_region) != len(self.points):
            raise ValueError("pixel region and point set must align")

    def to_record(self) -> str:
        c, a = self.center, self.axis
        return (
            f"center= {c[0]:.6f} {c[1]:.6f} {c[2]:.6f} "
            f"axis= {a[0]:.6f} {a[1]:.6f} {a[2]:.6f} "
            f"radius= {self.radius:.6f} length= {self.length:.6f}"
        )


@dataclass
class ClusterLabeling:
    """Per-point cluster ids; NOISE (-1) marks unclustered points."""
    labels: np.ndarray
    eps: float
    min_pts: int

    @property
    def n_clusters(self) -> int:
        valid = self.labels[self.labels != NOISE]
        return 0 if len(valid) == 0 else int(valid.max()) + 1


# ---------------------------------------------------------------------------
# Stage operations
# ---------------------------------------------------------------------------

def subtract_background(dmap: ColorizedDepthMap, robot_plane_x: float,
                        table_z: float) -> ColorizedDepthMap:
    """Keep points in front of the robot plane and above the tabletop."""
    keep = (dmap.points[:, 0] < robot_plane_x) & (dmap.points[:, 2] > table_z)
    if not keep.any():
        raise EmptyScene("no points between the robot plane and the table")
    return dmap.select(keep)


def voxel_downsample(points: np.ndarray, voxel: float = VOXEL_EDGE) -> np.ndarray:
    """One centroid per occupied voxel, ordered by first occurrence."""
    if voxel <= 0:
        raise ValueError("voxel edge must be positive")
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts.reshape(0, 3)
    keys = np.floor(pts / voxel).astype(np.int64)
    _, first_idx, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    sums = np.zeros((len(first_idx), 3))
    np.add.at(sums, inverse, pts)
    counts = np.bincount(inverse, minlength=len(first_idx)).astype(float)
    centroids = sums / counts[:, None]
    order = np.argsort(first_idx, kind="stable")
    return centroids[order]


def dbscan(points: np.ndarray, eps: float = DBSCAN_EPS,
           min_pts: int = DBSCAN_MIN_PTS) -> ClusterLabeling:
    """Density-based clustering; expansion proceeds in point index order.

    A point is a core point when its eps-ball (including itself) holds at
    least min_pts points. Cluster ids are assigned in order of each
    cluster's smallest core index, which makes the labeling deterministic.
    """
    if eps <= 0 or min_pts < 1:
        raise ValueError("eps must be positive and min_pts >= 1")
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return ClusterLabeling(labels=labels, eps=eps, min_pts=min_pts)

    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighborhoods])

    cluster = 0
    visited = np.zeros(n, dtype=bool)
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        # breadth-first expansion from the lowest-index unvisited core point
        labels[i] = cluster
        visited[i] = True
        queue = [i]
        while queue:
            j = queue.pop(0)
            for k in neighborhoods[j]:
                if labels[k] == NOISE:
                    labels[k] = cluster
                if core[k] and not visited[k]:
                    visited[k] = True
                    queue.append(k)
        cluster += 1
    return ClusterLabeling(labels=labels, eps=eps, min_pts=min_pts)


def nearest_cluster(labeling: ClusterLabeling, points: np.ndarray,
                    camera_pos: np.ndarray) -> int:
    """Cluster whose centroid lies closest to the camera."""
    pts = np.asarray(points, dtype=float)
    cam = np.asarray(camera_pos, dtype=float)
    best_id, best_dist = None, math.inf
    for cid in range(labeling.n_clusters):
        members = pts[labeling.labels == cid]
        d = float(np.linalg.norm(members.mean(axis=0) - cam))
        if d < best_dist:
            best_id, best_dist = cid, d
    if best_id is None:
        raise NoClusters("no non-noise cluster found")
    return best_id


def split_rod_by_hue(hues: np.ndarray) -> np.ndarray:
    """Two-means split on hue; True marks the larger (rod) cluster.

    Hue is rotated so its circular mean is centered before clustering.
    On a tie the cluster with the smaller mean hue wins.
    """
    h = np.asarray(hues, dtype=float) % 360.0
    if len(h) < 2:
        return np.ones(len(h), dtype=bool)
    rot, _ = imaging.rotate_hues_centered(h)
    lo, hi = rot.min(), rot.max()
    if hi - lo < 1e-9:
        return np.ones(len(h), dtype=bool)
    c = np.array([lo, hi])
    assign = np.zeros(len(rot), dtype=int)
    for _ in range(100):
        assign_new = (np.abs(rot - c[0]) > np.abs(rot - c[1])).astype(int)
        if np.array_equal(assign_new, assign) and _ > 0:
            break
        assign = assign_new
        for k in (0, 1):
            sel = rot[assign == k]
            if len(sel):
                c[k] = sel.mean()
    n0, n1 = int((assign == 0).sum()), int((assign == 1).sum())
    if n0 > n1:
        larger = 0
    elif n1 > n0:
        larger = 1
    else:
        larger = 0 if c[0] <= c[1] else 1
    return assign == larger


# ---------------------------------------------------------------------------
# Half-cylinder template registration
# ---------------------------------------------------------------------------

@dataclass
class IcpResult:
    rotation: np.ndarray      # (3,3)
    translation: np.ndarray   # (3,)
    rms: float
    iterations: int
    rms_history: list[float] = field(default_factory=list)


def _orthonormal_to(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = axis / np.linalg.norm(axis)
    helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(a, helper)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    return u, v


def half_cylinder_template(center: np.ndarray, axis: np.ndarray, radius: float,
                           length: float, facing: np.ndarray,
                           arc_step: float = TEMPLATE_ARC_STEP,
                           axial_step: float = TEMPLATE_AXIAL_STEP) -> np.ndarray:
    """Sample the camera-facing half of a cylinder surface."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    f = np.asarray(facing, dtype=float)
    f = f - np.dot(f, a) * a
    f = f / np.linalg.norm(f)
    s = np.cross(a, f)
    n_arc = max(4, int(round(math.pi * radius / arc_step)))
    n_ax = max(2, int(round(length / axial_step)))
    phis = np.linspace(-math.pi / 2.0, math.pi / 2.0, n_arc)
    ts = np.linspace(-length / 2.0, length / 2.0, n_ax)
    ring = radius * (np.cos(phis)[:, None] * f[None, :] + np.sin(phis)[:, None] * s[None, :])
    pts = (np.asarray(center, dtype=float)[None, None, :]
           + ring[:, None, :] + ts[None, :, None] * a[None, None, :])
    return pts.reshape(-1, 3)


def _best_fit_transform(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rigid transform mapping src onto dst (Kabsch)."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    h = (src - mu_s).T @ (dst - mu_d)
    u, _, vt = np.linalg.svd(h)
    r = vt.T @ u.T
    if np.linalg.det(r) < 0:
        vt[-1, :] *= -1
        r = vt.T @ u.T
    t = mu_d - r @ mu_s
    return r, t


def icp_align(source: np.ndarray, target: np.ndarray,
              max_iter: int = ICP_MAX_ITER, tol: float = ICP_TOL,
              gate: float = ICP_GATE,
              target_tree: cKDTree | None = None) -> IcpResult:
    """Point-to-point rigid registration of source onto target.

    Correspondences are nearest neighbors with a rejection gate; iterates
    until the RMS change drops below tol or the iteration cap is reached.
    The returned rms_history is non-increasing up to the gate's effect.
    """
    src0 = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    tree = target_tree if target_tree is not None else cKDTree(tgt)

    r_total = np.eye(3)
    t_total = np.zeros(3)
    src = src0.copy()
    prev_rms = math.inf
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        dists, idx = tree.query(src)
        inliers = dists <= gate
        if inliers.sum() < 3:
            inliers = np.ones(len(src), dtype=bool)
        rms = float(np.sqrt(np.mean(dists[inliers] ** 2)))
        history.append(rms)
        if abs(prev_rms - rms) < tol:
            break
        prev_rms = rms
        r, t = _best_fit_transform(src[inliers], tgt[idx[inliers]])
        src = src @ r.T + t
        r_total = r @ r_total
        t_total = r @ t_total + t
    dists, _ = tree.query(src)
    inliers = dists <= gate
    if not inliers.any():
        inliers = np.ones(len(src), dtype=bool)
    final_rms = float(np.sqrt(np.mean(dists[inliers] ** 2)))
    return IcpResult(rotation=r_total, translation=t_total, rms=final_rms,
                     iterations=iterations, rms_history=history)


def _golden_section(f, lo: float, hi: float, tol: float = 3e-4) -> tuple[float, float]:
    """Minimize a unimodal scalar function on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def fit_half_cylinder(points: np.ndarray, initial: RodEstimate,
                      camera_pos: np.ndarray,
                      radius_bracket: float = 0.30,
                      max_iter: int = ICP_MAX_ITER) -> RodEstimate:
    """Refine the rod estimate by registering a half-cylinder template.

    Pose comes from point-to-point registration of the camera-facing
    template onto the measured points; the radius is refined by a
    golden-section search over +-30 percent of the initial value, rerunning
    the pose alignment for each candidate radius.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 50:
        raise ValueError("need at least 50 points to fit the rod")
    tree = cKDTree(pts)
    facing = np.asarray(camera_pos, dtype=float) - initial.center

    cache: dict[float, IcpResult] = {}

    def run(radius: float) -> IcpResult:
        key = round(radius, 6)
        if key not in cache:
            template = half_cylinder_template(initial.center, initial.axis, radius,
                                              initial.length, facing)
            cache[key] = icp_align(template, pts, max_iter=max_iter, target_tree=tree)
        return cache[key]

    lo = initial.radius * (1.0 - radius_bracket)
    hi = initial.radius * (1.0 + radius_bracket)
    best_r, _ = _golden_section(lambda r: run(r).rms, lo, hi)
    result = run(best_r)
    if result.rms > ICP_DIVERGED_RMS:
        raise IcpDiverged(f"registration residual {result.rms * 1e3:.2f} mm exceeds "
                          f"{ICP_DIVERGED_RMS * 1e3:.0f} mm")

    center = result.rotation @ initial.center + result.translation
    axis = result.rotation @ initial.axis
    span = pts @ axis
    length = float(span.max() - span.min())
    return replace(initial, center=center, axis=axis, radius=float(best_r),
                   length=max(length, 1e-6), rms=result.rms)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

@dataclass
class RodPipelineParams:
    robot_plane_x: float
    table_z: float
    voxel: float = VOXEL_EDGE
    eps: float = DBSCAN_EPS
    min_pts: int = DBSCAN_MIN_PTS
    bbox_pad: float = BBOX_PAD
    icp_voxel: float = 0.004   # downsample size for the registration point set


def estimate_rod(dmap: ColorizedDepthMap, camera: Camera,
                 params: RodPipelineParams) -> RodEstimate:
    """Run the whole rod estimation chain on one colorized depth map.

    The inscribed rectangle is fit to the selected cluster's pixel mask, so
    the returned pixel region keeps any rope pixels riding on the rod; the
    downstream rope estimator depends on that. The hue split selects the
    rod-colored subset used for template registration.
    """
    sub = subtract_background(dmap, params.robot_plane_x, params.table_z)
    ds = voxel_downsample(sub.points, params.voxel)
    labeling = dbscan(ds, params.eps, params.min_pts)
    cid = nearest_cluster(labeling, ds, camera.position)
    members = ds[labeling.labels == cid]

    lo = members.min(axis=0) - params.bbox_pad
    hi = members.max(axis=0) + params.bbox_pad
    in_box = np.all((sub.points >= lo) & (sub.points <= hi), axis=1)
    cand = sub.select(in_box)
    if len(cand) == 0:
        raise EmptyScene("selected cluster has no full-resolution points")

    cand_mask = cand.pixel_mask()
    rect = max_inscribed_rect(cand_mask)

    px = cand.pixels
    in_rect = ((px[:, 0] >= rect.min_x) & (px[:, 0] <= rect.max_x)
               & (px[:, 1] >= rect.min_y) & (px[:, 1] <= rect.max_y))
    region = cand.select(in_rect)
    if len(region) < 50:
        raise EmptyScene("rod rectangle holds too few points")

    rod_flags = split_rod_by_hue(region.colors[:, 0])
    rod_pts = region.points[rod_flags]
    if len(rod_pts) < 50:
        rod_pts = region.points
    ang = np.deg2rad(region.colors[rod_flags, 0])
    rod_hue = math.degrees(math.atan2(np.sin(ang).mean(), np.cos(ang).mean())) % 360.0

    depth = float(np.linalg.norm(rod_pts - camera.position, axis=1).mean())
    scale = camera.intrinsics.fx / depth  # px per meter at the rod
    r0 = rect.height / (2.0 * scale)
    l0 = rect.width / scale

    # axis from the rectangle's long direction lifted to 3D
    row_mid = (rect.min_y + rect.max_y) / 2.0
    left = camera.pixel_ray(rect.min_x, row_mid)[1]
    right = camera.pixel_ray(rect.max_x, row_mid)[1]
    axis0 = right * depth - left * depth
    axis0 /= np.linalg.norm(axis0)

    view_dir = (camera.position - rod_pts.mean(axis=0))
    view_dir /= np.linalg.norm(view_dir)
    # visible-arc centroid sits 2r/pi toward the camera from the axis
    center0 = rod_pts.mean(axis=0) - view_dir * (2.0 * r0 / math.pi)

    initial = RodEstimate(center=center0, axis=axis0, radius=r0, length=l0,
                          pixel_region=region.pixels, points=region.points,
                          rect=rect, rod_hue=rod_hue)
    fit_pts = voxel_downsample(rod_pts, params.icp_voxel)
    fitted = fit_half_cylinder(fit_pts, initial, camera.position)
    return fitted
