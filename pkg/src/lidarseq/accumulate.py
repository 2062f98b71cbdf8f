"""Egomotion-compensated fusion of a scan window into the reference frame.

Reference points come first and untransformed; every surviving point of a
non-reference scan is mapped through inv(E_ref) . E_src. In non-smearing
mode, moving points are stripped from non-reference scans before the
transform (the reference scan keeps its moving points: validation compares
reference points only, so removing them would change the support).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import LengthMismatch, MissingMask
from .geom import relative_to_reference, transform_points
from .seqio import ScanRecord


class AccumMode(Enum):
    NON_SMEARING = "non-smearing"
    SMEARING = "smearing"


@dataclass
class FusedCloud:
    """Fused points in the reference frame, as parallel per-point arrays.

    ``xyz`` is float64 (reference-frame coordinates), ``intensity`` float32
    pass-through, ``prov`` the (source_scan, source_point) pairs identifying
    each physical point, ``is_ref`` flags points of the reference scan.
    """

    xyz: np.ndarray
    intensity: np.ndarray
    labels: np.ndarray | None
    prov: np.ndarray
    is_ref: np.ndarray
    reference_index: int

    def __len__(self) -> int:
        return int(self.xyz.shape[0])

    def take(self, selector) -> "FusedCloud":
        """New cloud with rows selected by a boolean mask or index array."""
        return FusedCloud(
            xyz=self.xyz[selector],
            intensity=self.intensity[selector],
            labels=None if self.labels is None else self.labels[selector],
            prov=self.prov[selector],
            is_ref=self.is_ref[selector],
            reference_index=self.reference_index,
        )


def derive_moving_mask(labels: np.ndarray, moving_classes) -> np.ndarray:
    """Moving mask from ground-truth labels and a moving-class id set."""
    moving = np.fromiter(moving_classes, dtype=np.uint32) if moving_classes else None
    if moving is None or moving.size == 0:
        return np.zeros(len(labels), dtype=np.uint8)
    return np.isin(np.asarray(labels, dtype=np.uint32), moving).astype(np.uint8)


def strip_moving(scan: ScanRecord, mask: np.ndarray) -> ScanRecord:
    """Remove points flagged as moving; survivor order is preserved."""
    mask = np.asarray(mask)
    if len(mask) != len(scan.points):
        raise LengthMismatch(
            f"scan {scan.index}: mask length {len(mask)} != {len(scan.points)} points"
        )
    keep = mask == 0
    return replace(
        scan,
        points=scan.points[keep],
        labels=None if scan.labels is None else scan.labels[keep],
    )


def accumulate_window(
    window_scans: Sequence[ScanRecord],
    ref: ScanRecord,
    mode: AccumMode,
    masks: Mapping[int, np.ndarray] | None = None,
) -> FusedCloud:
    """Fuse the window into the reference frame.

    Labels are carried only when the reference and every window scan have
    them (training mode); otherwise the fused cloud has none.
    """
    with_labels = ref.labels is not None and all(
        s.labels is not None for s in window_scans
    )

    xyz_parts = [ref.points[:, :3].astype(np.float64)]
    intensity_parts = [ref.points[:, 3]]
    label_parts = [ref.labels] if with_labels else None
    n_ref = len(ref.points)
    prov_parts = [
        np.column_stack(
            [
                np.full(n_ref, ref.index, dtype=np.uint32),
                np.arange(n_ref, dtype=np.uint32),
            ]
        )
    ]
    ref_flags = [np.ones(n_ref, dtype=bool)]

    for scan in window_scans:
        survivors = np.arange(len(scan.points), dtype=np.uint32)
        if mode is AccumMode.NON_SMEARING:
            mask = None if masks is None else masks.get(scan.index)
            if mask is None:
                raise MissingMask(
                    f"non-smearing accumulation needs a moving mask for scan "
                    f"{scan.index}"
                )
            if len(mask) != len(scan.points):
                raise LengthMismatch(
                    f"scan {scan.index}: mask length {len(mask)} != "
                    f"{len(scan.points)} points"
                )
            survivors = survivors[np.asarray(mask) == 0]
        rel = relative_to_reference(ref.pose, scan.pose)
        pts = scan.points[survivors]
        xyz_parts.append(transform_points(rel, pts[:, :3]))
        intensity_parts.append(pts[:, 3])
        if with_labels:
            label_parts.append(scan.labels[survivors])
        prov_parts.append(
            np.column_stack(
                [np.full(survivors.size, scan.index, dtype=np.uint32), survivors]
            )
        )
        ref_flags.append(np.zeros(survivors.size, dtype=bool))

    return FusedCloud(
        xyz=np.concatenate(xyz_parts),
        intensity=np.concatenate(intensity_parts).astype(np.float32),
        labels=np.concatenate(label_parts).astype(np.uint32) if with_labels else None,
        prov=np.concatenate(prov_parts),
        is_ref=np.concatenate(ref_flags),
        reference_index=ref.index,
    )
