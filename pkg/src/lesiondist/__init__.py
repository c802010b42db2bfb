"""Intensity-aware distance maps from dot annotations, and lesion detection scoring."""

__version__ = "0.1.0"

from .detection import Detection, DetectionSet, local_maxima, threshold_detections
from .evaluation import (
    BootstrapSummary,
    FrocCurve,
    FrocPoint,
    MatchResult,
    bootstrap_fauc,
    froc,
    match_detections,
    operating_point,
)
from .grid import DotSet, VoxelGrid, dots_read_csv, grid_read, grid_write
from .maps import ShiftConfig, TargetMap, image_normalize, normalize_map, shift_dots
from .synthetic import SimulatorConfig, SynthConfig, generate_case, simulate_prediction
from .transform import DistanceKind, DistanceMap, dijkstra_oracle, distance_transform

__all__ = [
    "BootstrapSummary",
    "Detection",
    "DetectionSet",
    "DistanceKind",
    "DistanceMap",
    "DotSet",
    "FrocCurve",
    "FrocPoint",
    "MatchResult",
    "ShiftConfig",
    "SimulatorConfig",
    "SynthConfig",
    "TargetMap",
    "VoxelGrid",
    "bootstrap_fauc",
    "dijkstra_oracle",
    "distance_transform",
    "dots_read_csv",
    "froc",
    "generate_case",
    "grid_read",
    "grid_write",
    "image_normalize",
    "local_maxima",
    "match_detections",
    "normalize_map",
    "operating_point",
    "shift_dots",
    "simulate_prediction",
    "threshold_detections",
]
