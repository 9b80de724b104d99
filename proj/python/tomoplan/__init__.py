"""Layered tomogram maps, multi-slice A* and trajectory smoothing."""

from ._tomoplan import (
    DegeneratePathError,
    FormatError,
    InfeasibleTrajectoryError,
    InvalidArgument,
    IoError,
    Map,
    NoPathError,
    OutOfBounds,
    Path,
    PlanningError,
    TomoError,
    Trajectory,
    UnsnappableError,
    build_map,
    default_endpoints,
    generate_scene,
    load_cloud,
    load_map,
    optimize,
    plan,
    save_cloud,
)

__all__ = [
    "DegeneratePathError",
    "FormatError",
    "InfeasibleTrajectoryError",
    "InvalidArgument",
    "IoError",
    "Map",
    "NoPathError",
    "OutOfBounds",
    "Path",
    "PlanningError",
    "TomoError",
    "Trajectory",
    "UnsnappableError",
    "build_map",
    "default_endpoints",
    "generate_scene",
    "load_cloud",
    "load_map",
    "optimize",
    "plan",
    "save_cloud",
]
