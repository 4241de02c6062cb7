"""Closed-loop rope-on-rod wrapping workbench.

Perception (rod and rope estimation from synthetic RGB-D), spiral wrap
planning with gripper orientation, proportional feedback on wrap radius and
axial advance, and a deterministic quasi-static simulator that closes the
loop end to end.
"""
from .errors import RopewrapError
from .feedback import FeedbackState, RodRegion, WrapQuality
from .geometry import GripperPose
from .imaging import AxisRect, Camera, CameraIntrinsics, ColorizedDepthMap, OrientedRect
from .rod_estimation import ClusterLabeling, RodEstimate
from .rope_estimation import RopeEstimate
from .rope_tracing import GraspSpec, RopeSections
from .simworld import RenderResult, World, WorldConfig, preset_config, preset_names
from .wrap_planner import BoxReachability, SpiralParams, WrapTrajectory

__all__ = [
    "AxisRect",
    "BoxReachability",
    "Camera",
    "CameraIntrinsics",
    "ClusterLabeling",
    "ColorizedDepthMap",
    "FeedbackState",
    "GraspSpec",
    "GripperPose",
    "OrientedRect",
    "RenderResult",
    "RodEstimate",
    "RodRegion",
    "RopeEstimate",
    "RopeSections",
    "RopewrapError",
    "SpiralParams",
    "World",
    "WorldConfig",
    "WrapQuality",
    "WrapTrajectory",
    "preset_config",
    "preset_names",
]

__version__ = "0.1.0"
