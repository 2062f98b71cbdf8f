"""Sequence-level LiDAR point-cloud toolkit.

Builds density-consistent multi-scan frames (distance-based window
selection, egomotion accumulation, two-stage voxel downsampling under a
voxel budget) and fuses/evaluates semantic predictions (range-based
ensemble, radius-weighted sequence voting, range-bucketed mIoU).
"""

from ._kernels import available_backends, backend
from .geom import Pose, RangeBucket
from .profiles import PROFILES, Profile, get_profile

__version__ = "0.1.0"

__all__ = [
    "PROFILES",
    "Pose",
    "Profile",
    "RangeBucket",
    "available_backends",
    "backend",
    "get_profile",
    "__version__",
]
