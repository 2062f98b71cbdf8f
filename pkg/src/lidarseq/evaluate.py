"""Range-bucketed per-class IoU / mIoU and voxel-distribution statistics.

Every evaluated point increments one bucket confusion matrix (close, medium
or far, by the point's radius in its own scan's sensor frame) plus the
overall matrix, so Overall = Close + Medium + Far holds as an exact integer
identity. Classes with zero union in a bucket are excluded from that
bucket's mean; classes with ground-truth mass but no overlap contribute 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, seqio
from .errors import EmptyReport, LengthMismatch, NonPositiveCellSize, UnknownClass
from .geom import bucket_of, radius

BUCKET_NAMES = ("overall", "close", "medium", "far")


class ConfusionAccumulator:
    """Per-bucket K x K confusion counts (gt row, prediction column)."""

    def __init__(self, num_classes: int, ignore_class: int = 0) -> None:
        if num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        self.num_classes = num_classes
        self.ignore_class = ignore_class
        self._dim = num_classes + 1
        # matrices[0] = overall, then close / medium / far
        self.matrices = np.zeros((4, self._dim, self._dim), dtype=np.int64)

    @property
    def class_ids(self) -> tuple[int, ...]:
        return tuple(c for c in range(self._dim) if c != self.ignore_class)

    def bucket(self, name: str) -> np.ndarray:
        return self.matrices[BUCKET_NAMES.index(name)]

    def add(self, gt, pred, radii) -> None:
        gt = np.asarray(gt, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        radii = np.asarray(radii, dtype=np.float64)
        if not (len(gt) == len(pred) == len(radii)):
            raise LengthMismatch(
                f"gt/pred/radii lengths differ: {len(gt)}/{len(pred)}/{len(radii)}"
            )
        if len(gt) == 0:
            return
        top = max(int(gt.max()), int(pred.max()))
        low = min(int(gt.min()), int(pred.min()))
        if top >= self._dim or low < 0:
            raise UnknownClass(
                f"label id outside 0..{self._dim - 1} encountered ({low}..{top})"
            )
        keep = gt != self.ignore_class
        gt, pred, radii = gt[keep], pred[keep], radii[keep]
        flat = gt * self._dim + pred
        buckets = bucket_of(radii)
        size = self._dim * self._dim
        for code in (0, 1, 2):
            counts = np.bincount(flat[buckets == code], minlength=size)
            self.matrices[code + 1] += counts.reshape(self._dim, self._dim)
        self.matrices[0] += np.bincount(flat, minlength=size).reshape(
            self._dim, self._dim
        )

    def merge(self, other: "ConfusionAccumulator") -> None:
        if (
            other.num_classes != self.num_classes
            or other.ignore_class != self.ignore_class
        ):
            raise ValueError("cannot merge accumulators with different class setups")
        self.matrices += other.matrices


def iou_percent(matrix: np.ndarray, c: int) -> float | None:
    """100 * TP / (TP + FP + FN); None when the class has zero union."""
    tp = int(matrix[c, c])
    fn = int(matrix[c].sum()) - tp
    fp = int(matrix[:, c].sum()) - tp
    denom = tp + fp + fn
    if denom == 0:
        return None
    return 100.0 * tp / denom


def class_ious(matrix: np.ndarray, class_ids) -> dict[int, float]:
    """IoU per class, omitting classes with zero union."""
    out = {}
    for c in class_ids:
        v = iou_percent(matrix, c)
        if v is not None:
            out[c] = v
    return out


def miou_percent(matrix: np.ndarray, class_ids) -> float:
    """Arithmetic mean of the defined per-class IoUs."""
    ious = class_ious(matrix, class_ids)
    if not ious:
        raise EmptyReport("no class has a defined IoU")
    return float(np.mean(list(ious.values())))


@dataclass
class BucketReport:
    miou: float | None
    ious: dict[int, float]
    share: float  # percent of evaluated points in this bucket


@dataclass
class RangeReport:
    num_classes: int
    ignore_class: int
    buckets: dict[str, BucketReport]
    metadata: dict[str, str] = field(default_factory=dict)


def build_report(acc: ConfusionAccumulator) -> RangeReport:
    total = int(acc.bucket("overall").sum())
    buckets = {}
    for name in BUCKET_NAMES:
        matrix = acc.bucket(name)
        ious = class_ious(matrix, acc.class_ids)
        try:
            miou = miou_percent(matrix, acc.class_ids)
        except EmptyReport:
            miou = None
        share = 100.0 * matrix.sum() / total if total else 0.0
        buckets[name] = BucketReport(miou=miou, ious=ious, share=share)
    return RangeReport(
        num_classes=acc.num_classes,
        ignore_class=acc.ignore_class,
        buckets=buckets,
        metadata={"zero_union_classes": "excluded from the bucket mean"},
    )


def format_report(report: RangeReport, fmt: str = "table") -> str:
    if fmt == "kv":
        lines = []
        for name in BUCKET_NAMES:
            b = report.buckets[name]
            if b.miou is not None:
                lines.append(f"{name}.miou = {b.miou:.4f}")
            if name != "overall":
                lines.append(f"{name}.share = {b.share:.4f}")
            for c in sorted(b.ious):
                lines.append(f"{name}.iou.{c} = {b.ious[c]:.4f}")
        for k, v in report.metadata.items():
            lines.append(f"meta.{k} = {v}")
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")

    classes = sorted({c for b in report.buckets.values() for c in b.ious})
    header = ["range", "share", "mIoU"] + [f"c{c}" for c in classes]
    rows = [header]
    for name in BUCKET_NAMES:
        b = report.buckets[name]
        row = [
            name,
            "" if name == "overall" else f"{b.share:.1f}",
            f"{b.miou:.1f}" if b.miou is not None else "-",
        ]
        row += [f"{b.ious[c]:.1f}" if c in b.ious else "-" for c in classes]
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def voxel_distribution(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Occupied-voxel share per range bucket, as percentages (close, medium, far).

    A voxel's bucket is that of its center's radius.
    """
    if voxel_size <= 0:
        raise NonPositiveCellSize(f"voxel_size must be > 0, got {voxel_size}")
    points = np.asarray(points)
    keys = np.unique(_kernels.voxel_keys(points, voxel_size))
    if keys.size == 0:
        return np.zeros(3)
    centers = (_kernels.unpack_keys(keys) + 0.5) * voxel_size
    buckets = bucket_of(radius(centers))
    counts = np.bincount(buckets, minlength=3).astype(np.float64)
    return 100.0 * counts / counts.sum()


def evaluate_scan_predictions(
    scan_dir,
    gt_dir,
    pred_dir,
    num_classes: int,
    ignore_class: int = 0,
    max_range: float | None = None,
) -> ConfusionAccumulator:
    """Per-scan evaluation: gt and predictions aligned with the scan files."""
    acc = ConfusionAccumulator(num_classes, ignore_class)
    scan_paths = sorted(Path(scan_dir).glob(f"*{seqio.SCAN_SUFFIX}"))
    if not scan_paths:
        raise FileNotFoundError(f"no scans in {scan_dir}")
    for scan_path in scan_paths:
        name = scan_path.stem
        gt_path = Path(gt_dir) / (name + seqio.LABEL_SUFFIX)
        pred_path = Path(pred_dir) / (name + seqio.LABEL_SUFFIX)
        if not pred_path.is_file():
            continue
        gt = seqio.semantic_ids(seqio.read_labels(gt_path))
        pred = seqio.semantic_ids(seqio.read_labels(pred_path))
        radii = radius(seqio.read_points(scan_path)[:, :3])
        if not (len(gt) == len(pred) == len(radii)):
            raise LengthMismatch(
                f"scan {name}: {len(radii)} points, {len(gt)} gt labels, "
                f"{len(pred)} predictions"
            )
        if max_range is not None:
            keep = radii < max_range
            gt, pred, radii = gt[keep], pred[keep], radii[keep]
        acc.add(gt, pred, radii)
    return acc


def evaluate_frame_predictions(
    frames_root,
    gt_dir,
    pred_dir,
    num_classes: int,
    ignore_class: int = 0,
    max_range: float | None = None,
) -> ConfusionAccumulator:
    """Evaluate multi-scan frame predictions on reference points only.

    ``frames_root`` must contain ``points/`` and ``prov/``; the provenance
    sidecar restricts scoring to reference points and maps them back to the
    per-scan ground truth in ``gt_dir``.
    """
    frames_root = Path(frames_root)
    prov_paths = sorted((frames_root / "prov").glob(f"*{seqio.PROV_SUFFIX}"))
    if not prov_paths:
        raise FileNotFoundError(f"no provenance sidecars under {frames_root}")
    acc = ConfusionAccumulator(num_classes, ignore_class)
    for prov_path in prov_paths:
        name = prov_path.stem
        fid = int(name)
        prov = seqio.read_provenance(prov_path)
        points = seqio.read_points(
            frames_root / "points" / (name + seqio.SCAN_SUFFIX)
        )
        pred = seqio.semantic_ids(
            seqio.read_labels(Path(pred_dir) / (name + seqio.LABEL_SUFFIX))
        )
        if not (len(prov) == len(points) == len(pred)):
            raise LengthMismatch(
                f"frame {name}: {len(points)} points, {len(prov)} provenance "
                f"records, {len(pred)} predictions"
            )
        gt_all = seqio.semantic_ids(
            seqio.read_labels(Path(gt_dir) / (name + seqio.LABEL_SUFFIX))
        )
        ref_rows = np.flatnonzero(prov[:, 0] == fid)
        src = prov[ref_rows, 1]
        gt = gt_all[src]
        radii = radius(points[ref_rows, :3])
        pred_ref = pred[ref_rows]
        if max_range is not None:
            keep = radii < max_range
            gt, pred_ref, radii = gt[keep], pred_ref[keep], radii[keep]
        acc.add(gt, pred_ref, radii)
    return acc
