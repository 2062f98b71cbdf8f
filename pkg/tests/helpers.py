"""Shared builders for randomized test inputs."""

from __future__ import annotations

import numpy as np

from lidarseq.accumulate import FusedCloud
from lidarseq.geom import Pose


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pose(rng: np.random.Generator, translation_scale: float = 50.0) -> Pose:
    return Pose.from_rt(
        random_rotation(rng), rng.uniform(-translation_scale, translation_scale, 3)
    )


def make_cloud(
    rng: np.random.Generator,
    n_ref: int,
    n_other: int,
    reference_index: int = 0,
    spread: float = 60.0,
    with_labels: bool = False,
    n_classes: int = 5,
) -> FusedCloud:
    """Random fused cloud with float32-representable coordinates, as the
    real pipeline produces (scan files store float32)."""
    n = n_ref + n_other
    xyz = rng.uniform(-spread, spread, size=(n, 3)).astype(np.float32)
    is_ref = np.zeros(n, dtype=bool)
    is_ref[:n_ref] = True
    prov = np.empty((n, 2), dtype=np.uint32)
    prov[:n_ref, 0] = reference_index
    prov[:n_ref, 1] = np.arange(n_ref)
    prov[n_ref:, 0] = reference_index + 1
    prov[n_ref:, 1] = np.arange(n_other)
    labels = (
        rng.integers(1, n_classes + 1, size=n).astype(np.uint32)
        if with_labels
        else None
    )
    return FusedCloud(
        xyz=xyz.astype(np.float64),
        intensity=np.full(n, 0.5, dtype=np.float32),
        labels=labels,
        prov=prov,
        is_ref=is_ref,
        reference_index=reference_index,
    )


def ref_point_bytes(cloud: FusedCloud) -> set[bytes]:
    """Byte-level multiset signature of the reference points (as float32)."""
    pts = cloud.xyz[cloud.is_ref].astype(np.float32)
    prov = cloud.prov[cloud.is_ref]
    return {
        prov[i].tobytes() + pts[i].tobytes() for i in range(pts.shape[0])
    }
