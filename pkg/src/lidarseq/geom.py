"""Rigid-pose algebra and range geometry.

Poses are 4x4 homogeneous transforms carrying the egomotion of a scan
relative to the sequence start. All arithmetic runs in float64 even though
scan files store float32: chains of ~40 composed transforms must not
accumulate visible drift.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .errors import OrthonormalityViolation

CLOSE_LIMIT = 20.0
FAR_LIMIT = 50.0

ORTHO_TOL = 1e-6


class RangeBucket(IntEnum):
    """Range partition used throughout reporting: close / medium / far."""

    CLOSE = 0
    MEDIUM = 1
    FAR = 2


class Pose:
    """A validated 4x4 rigid transform, immutable after construction.

    The rotation block must be orthonormal within ``ORTHO_TOL`` and the
    bottom row exactly ``[0, 0, 0, 1]``; poses come from upstream odometry
    and a failing check signals a data error rather than something to
    silently re-orthogonalize.
    """

    __slots__ = ("m",)

    def __init__(self, m) -> None:
        m = np.array(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError(f"pose matrix must be 4x4, got {m.shape}")
        if not np.array_equal(m[3], np.array([0.0, 0.0, 0.0, 1.0])):
            raise OrthonormalityViolation(f"bottom row must be [0,0,0,1], got {m[3]}")
        r = m[:3, :3]
        err = np.abs(r.T @ r - np.eye(3)).max()
        det = np.linalg.det(r)
        if err > ORTHO_TOL or abs(det - 1.0) > ORTHO_TOL:
            raise OrthonormalityViolation(
                f"rotation block not orthonormal: |R^T R - I|={err:.3e}, det={det:.9f}"
            )
        m.setflags(write=False)
        self.m = m

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "Pose":
        return cls.from_rt(np.eye(3), (x, y, z))

    @property
    def rotation(self) -> np.ndarray:
        return self.m[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.m[:3, 3]

    def __repr__(self) -> str:
        t = self.translation
        return f"Pose(t=({t[0]:.3f}, {t[1]:.3f}, {t[2]:.3f}))"


def yaw_rotation(angle: float) -> np.ndarray:
    """3x3 rotation about +z by ``angle`` radians."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def compose(a: Pose, b: Pose) -> Pose:
    """Matrix product a.b (apply b first, then a)."""
    return Pose(a.m @ b.m)


def invert(p: Pose) -> Pose:
    """Closed-form rigid inverse (R^T, -R^T t); exact, no matrix solve."""
    rt = p.rotation.T
    return Pose.from_rt(rt, -rt @ p.translation)


def relative_to_reference(e_ref: Pose, e_src: Pose) -> Pose:
    """Transform mapping source-frame points into the reference frame.

    With egomotions expressed relative to the sequence start, a source
    point lands in the reference frame via inv(e_ref) . e_src.
    """
    return compose(invert(e_ref), e_src)


def transform_points(t: Pose, pts: np.ndarray) -> np.ndarray:
    """Apply a pose to points of shape (3,) or (N, 3); returns float64."""
    pts = np.asarray(pts, dtype=np.float64)
    return pts @ t.rotation.T + t.translation


def radius(pts: np.ndarray) -> np.ndarray:
    """Euclidean norm sqrt(x^2 + y^2 + z^2) over the last axis."""
    pts = np.asarray(pts, dtype=np.float64)
    return np.linalg.norm(pts[..., :3], axis=-1)


def bucket_of(r):
    """Bucket per the half-open partition r<20, 20<=r<50, r>=50 (meters).

    Scalar input returns a RangeBucket; array input returns int8 codes.
    """
    arr = np.asarray(r)
    codes = np.where(arr < CLOSE_LIMIT, 0, np.where(arr < FAR_LIMIT, 1, 2)).astype(
        np.int8
    )
    if arr.ndim == 0:
        return RangeBucket(int(codes))
    return codes
