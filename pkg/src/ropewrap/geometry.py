"""Rigid-body helpers: quaternions and gripper poses.

Quaternions are stored as (w, x, y, z). The gripper's canonical frame is
identity orientation with the opening axis along world +x, so an entry
offset along -x backs the gripper away from the rope toward the camera.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    half = angle / 2.0
    return np.array([math.cos(half), *(math.sin(half) * a)])


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    u = np.array([x, y, z])
    vv = np.asarray(v, dtype=float)
    return 2.0 * np.dot(u, vv) * u + (w * w - np.dot(u, u)) * vv + 2.0 * w * np.cross(u, vv)


def quat_angle_about(q: np.ndarray, axis: np.ndarray) -> float:
    """Rotation angle of q about the given axis (twist decomposition)."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    w, x, y, z = q
    proj = np.dot([x, y, z], a)
    twist = np.array([w, *(proj * a)])
    n = np.linalg.norm(twist)
    if n < 1e-12:
        return math.pi
    twist = twist / n
    angle = 2.0 * math.atan2(np.dot(twist[1:], a), twist[0])
    return angle % (2.0 * math.pi)


@dataclass(frozen=True)
class GripperPose:
    """World-frame gripper pose."""
    position: np.ndarray     # (3,) m
    orientation: np.ndarray  # quaternion (w, x, y, z)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        q = np.asarray(self.orientation, dtype=float)
        object.__setattr__(self, "orientation", q / np.linalg.norm(q))

    def translated(self, offset: np.ndarray) -> "GripperPose":
        return GripperPose(self.position + np.asarray(offset, dtype=float),
                           self.orientation.copy())

    def format_line(self, phase: str, theta: float) -> str:
        p, q = self.position, self.orientation
        return (f"{phase} {theta:.6f} {p[0]:.6f} {p[1]:.6f} {p[2]:.6f} "
                f"{q[0]:.6f} {q[1]:.6f} {q[2]:.6f} {q[3]:.6f}")
