"""Blind-spot motion detection from monocular frame sequences.

Dense Horn-Schunck flow is split into object and background vectors, a
gated tracker boxes the approaching vehicle, a circular Hough transform finds
wheels when flow sees nothing, depth maps give a three-level alert, and the
expanding flow inside the box yields time to collision.
"""

__version__ = "0.1.0"

from .errors import BlindspotError, ConfigError, DataError  # noqa: E402
from .frames import DepthFrame, Frame, FrameSequence  # noqa: E402
from .flow import FlowField, SolverParams, solve_horn_schunck  # noqa: E402
from .config import PipelineConfig  # noqa: E402
from .pipeline import DetectionRecord, RunReport, run_detection  # noqa: E402
from .stereo import AlertLevel  # noqa: E402

__all__ = [
    "AlertLevel",
    "BlindspotError",
    "ConfigError",
    "DataError",
    "DepthFrame",
    "DetectionRecord",
    "FlowField",
    "Frame",
    "FrameSequence",
    "PipelineConfig",
    "RunReport",
    "SolverParams",
    "run_detection",
    "solve_horn_schunck",
]
