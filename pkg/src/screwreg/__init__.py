"""Gravity-aware 4-DOF point cloud registration by screw decomposition."""
from .errors import (
    AntipodalInput,
    DegeneratePoint,
    EmptyInput,
    IndexOutOfRange,
    NoConsensus,
    ParseError,
    RegistrationError,
    UnsupportedFormat,
)
from .geometry import GravityFrame, GravityPair, RigidTransform
from .pipeline import RegistrationConfig, RegistrationResult, register
from .ransac import ransac_baseline
from .spcr import PointCloudPair, solve_spcr
from .stabbing import CorrespondenceSet
from .synth import SynthConfig, generate, rotation_error, translation_error

__version__ = "0.1.0"

__all__ = [
    "AntipodalInput",
    "CorrespondenceSet",
    "DegeneratePoint",
    "EmptyInput",
    "GravityFrame",
    "GravityPair",
    "IndexOutOfRange",
    "NoConsensus",
    "ParseError",
    "PointCloudPair",
    "RegistrationConfig",
    "RegistrationError",
    "RegistrationResult",
    "RigidTransform",
    "SynthConfig",
    "UnsupportedFormat",
    "generate",
    "ransac_baseline",
    "register",
    "rotation_error",
    "solve_spcr",
    "translation_error",
]
