"""Range-based ensemble of two prediction streams and sequence-wise voting.

A physical point is classified once per multi-scan frame it survives in,
each time from a different viewpoint. Close observations are more reliable,
so each observation votes with the weight max(0.1, 20 / (r + 20)) taken at
the radius where the observation was made, and the point's final class is
the weighted argmax over the whole sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seqio
from .errors import (
    KeyMismatch,
    LengthMismatch,
    NegativeRadius,
    UnseenPoint,
)
from .geom import radius

WEIGHT_FLOOR = 0.1
WEIGHT_SCALE = 20.0


def range_weight(r):
    """Observation weight max(0.1, 20 / (r + 20)); 1 at r=0, floor at r>=180."""
    arr = np.asarray(r, dtype=np.float64)
    if arr.size and np.any(arr < 0):
        raise NegativeRadius("radius must be >= 0")
    w = np.maximum(WEIGHT_FLOOR, WEIGHT_SCALE / (arr + WEIGHT_SCALE))
    if arr.ndim == 0:
        return float(w)
    return w


@dataclass
class FramePredictions:
    """Per-point predictions of one frame plus the geometry voting needs."""

    frame_id: int
    labels: np.ndarray  # (N,) semantic class ids
    radii: np.ndarray  # (N,) float64, in this frame's reference coordinates
    prov: np.ndarray  # (N, 2) uint32 (source_scan, source_point)
    is_ref: np.ndarray  # (N,) bool

    def __post_init__(self) -> None:
        n = len(self.labels)
        if not (len(self.radii) == n and len(self.prov) == n and len(self.is_ref) == n):
            raise LengthMismatch(
                f"frame {self.frame_id}: prediction arrays have unequal lengths"
            )
        if n and np.any(np.asarray(self.radii) < 0):
            raise NegativeRadius(f"frame {self.frame_id}: negative radius")

    def __len__(self) -> int:
        return len(self.labels)


def single_stream(frame_id: int, labels: np.ndarray, radii: np.ndarray) -> FramePredictions:
    """Wrap a single-scan model's per-scan labels as a prediction stream."""
    labels = np.asarray(labels, dtype=np.uint32)
    n = len(labels)
    prov = np.column_stack(
        [np.full(n, frame_id, dtype=np.uint32), np.arange(n, dtype=np.uint32)]
    )
    return FramePredictions(
        frame_id=frame_id,
        labels=labels,
        radii=np.asarray(radii, dtype=np.float64),
        prov=prov,
        is_ref=np.ones(n, dtype=bool),
    )


def ensemble_merge(
    single_scan: FramePredictions,
    multi_scan: FramePredictions,
    boundary: float = 20.0,
) -> FramePredictions:
    """Close-range reference points take the single-scan label; the rest
    (reference at or beyond the boundary, and every accumulated point) keep
    the multi-scan label."""
    ref_rows = np.flatnonzero(multi_scan.is_ref)
    src_points = multi_scan.prov[ref_rows, 1]

    if np.any(single_scan.prov[:, 0] != multi_scan.frame_id):
        raise KeyMismatch(
            f"frame {multi_scan.frame_id}: single-scan stream covers a "
            f"different scan"
        )
    if single_scan.prov.shape[0] != src_points.size or not np.array_equal(
        np.sort(single_scan.prov[:, 1]), np.sort(src_points)
    ):
        raise KeyMismatch(
            f"frame {multi_scan.frame_id}: single-scan stream does not cover "
            f"exactly the reference points "
            f"({single_scan.prov.shape[0]} vs {src_points.size})"
        )

    lut = np.empty(int(src_points.max()) + 1 if src_points.size else 0, dtype=np.uint32)
    lut[single_scan.prov[:, 1]] = single_scan.labels

    merged = np.asarray(multi_scan.labels, dtype=np.uint32).copy()
    close = multi_scan.radii[ref_rows] < boundary
    merged[ref_rows[close]] = lut[src_points[close]]
    return FramePredictions(
        frame_id=multi_scan.frame_id,
        labels=merged,
        radii=multi_scan.radii,
        prov=multi_scan.prov,
        is_ref=multi_scan.is_ref,
    )


class VoteTally:
    """Per physical point, class -> accumulated range weight.

    Observations are kept as flat arrays and only summed at finalization,
    after sorting by (point, class, frame): merging partial tallies is plain
    concatenation, and any frame arrival order yields bitwise-identical
    results.
    """

    _COLUMNS = ("scan", "point", "label", "frame", "weight")

    def __init__(self) -> None:
        self._chunks: list[tuple[np.ndarray, ...]] = []

    def add_frame(self, preds: FramePredictions) -> None:
        weights = range_weight(preds.radii)
        self._chunks.append(
            (
                preds.prov[:, 0].astype(np.uint32),
                preds.prov[:, 1].astype(np.uint32),
                np.asarray(preds.labels, dtype=np.uint32),
                np.full(len(preds), preds.frame_id, dtype=np.int64),
                np.asarray(weights, dtype=np.float64),
            )
        )

    def merge(self, other: "VoteTally") -> "VoteTally":
        out = VoteTally()
        out._chunks = self._chunks + other._chunks
        return out

    @property
    def n_observations(self) -> int:
        return sum(int(c[0].size) for c in self._chunks)

    def _collated(self) -> tuple[np.ndarray, ...]:
        if not self._chunks:
            empty_u = np.empty(0, dtype=np.uint32)
            return (
                empty_u,
                empty_u.copy(),
                empty_u.copy(),
                np.empty(0, dtype=np.int64),
                np.empty(0, dtype=np.float64),
            )
        return tuple(
            np.concatenate([c[i] for c in self._chunks]) for i in range(5)
        )

    def finalize(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(scan, point, final class) arrays, one row per observed physical
        point, sorted by (scan, point). Ties break to the lowest class id."""
        scan, point, label, frame, weight = self._collated()
        if scan.size == 0:
            return scan, point, label
        order = np.lexsort((frame, label, point, scan))
        scan, point, label, weight = (
            scan[order],
            point[order],
            label[order],
            weight[order],
        )
        # contiguous runs of equal (scan, point, label): one vote slot each
        new_slot = np.concatenate(
            (
                [True],
                (scan[1:] != scan[:-1])
                | (point[1:] != point[:-1])
                | (label[1:] != label[:-1]),
            )
        )
        slot_starts = np.flatnonzero(new_slot)
        slot_weight = np.add.reduceat(weight, slot_starts)
        slot_scan = scan[slot_starts]
        slot_point = point[slot_starts]
        slot_label = label[slot_starts]
        # group slots by (scan, point) and take the first slot reaching the max
        new_point = np.concatenate(
            (
                [True],
                (slot_scan[1:] != slot_scan[:-1])
                | (slot_point[1:] != slot_point[:-1]),
            )
        )
        point_starts = np.flatnonzero(new_point)
        counts = np.diff(np.append(point_starts, slot_weight.size))
        max_weight = np.maximum.reduceat(slot_weight, point_starts)
        positions = np.arange(slot_weight.size, dtype=np.int64)
        candidate = np.where(
            slot_weight == np.repeat(max_weight, counts), positions, slot_weight.size
        )
        winner = np.minimum.reduceat(candidate, point_starts)
        return slot_scan[point_starts], slot_point[point_starts], slot_label[winner]

    def class_weights(self, scan: int, point: int) -> dict[int, float]:
        """Accumulated weight per class for one physical point."""
        s, p, label, frame, weight = self._collated()
        rows = np.flatnonzero((s == scan) & (p == point))
        if rows.size == 0:
            raise UnseenPoint(f"point (scan={scan}, point={point}) never observed")
        out: dict[int, float] = {}
        order = rows[np.lexsort((frame[rows], label[rows]))]
        for cls in np.unique(label[rows]):
            mine = order[label[order] == cls]
            out[int(cls)] = float(np.add.reduce(weight[mine]))
        return out


def finalize_votes(tally: VoteTally, scan: int, point: int) -> int:
    """Final class of one physical point: weighted argmax, lowest id on ties."""
    weights = tally.class_weights(scan, point)
    best = max(weights.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]


def load_frame_predictions(
    points_path, prov_path, label_path, frame_id: int
) -> FramePredictions:
    """Assemble a frame's prediction stream from its three files."""
    points = seqio.read_points(points_path)
    prov = seqio.read_provenance(prov_path)
    labels = seqio.semantic_ids(seqio.read_labels(label_path))
    if not (len(prov) == len(points) and len(labels) == len(points)):
        raise LengthMismatch(
            f"frame {frame_id}: {len(points)} points, {len(prov)} provenance "
            f"records, {len(labels)} labels"
        )
    return FramePredictions(
        frame_id=frame_id,
        labels=labels,
        radii=radius(points[:, :3]),
        prov=prov,
        is_ref=prov[:, 0] == frame_id,
    )


def single_stream_for_frame(
    frame: FramePredictions, label_path
) -> FramePredictions:
    """Single-scan predictions for a frame's reference scan, with the
    radii taken from the frame's (untransformed) reference points."""
    labels = seqio.semantic_ids(seqio.read_labels(label_path))
    ref_rows = np.flatnonzero(frame.is_ref)
    src = frame.prov[ref_rows, 1]
    if len(labels) != ref_rows.size:
        raise KeyMismatch(
            f"frame {frame.frame_id}: {len(labels)} single-scan labels for "
            f"{ref_rows.size} reference points"
        )
    radii = np.empty(ref_rows.size, dtype=np.float64)
    radii[src] = frame.radii[ref_rows]
    return single_stream(frame.frame_id, labels, radii)


def postprocess_sequence(
    single_dir,
    frames_root,
    multi_dir,
    out_dir,
    boundary: float = 20.0,
) -> list[Path]:
    """Ensemble each frame, vote over the sequence, write final labels.

    ``frames_root`` is a preprocess output sequence directory (containing
    ``points/`` and ``prov/``); ``multi_dir`` holds the model predictions
    for those frames and ``single_dir`` the per-scan single-scan predictions.
    Writes one label file per reference scan into ``out_dir``.
    """
    frames_root = Path(frames_root)
    points_dir = frames_root / "points"
    prov_dir = frames_root / "prov"
    for needed in (points_dir, prov_dir, Path(single_dir), Path(multi_dir)):
        if not needed.is_dir():
            raise FileNotFoundError(f"directory not found: {needed}")

    prov_paths = sorted(prov_dir.glob(f"*{seqio.PROV_SUFFIX}"))
    if not prov_paths:
        raise FileNotFoundError(f"no provenance sidecars in {prov_dir}")

    tally = VoteTally()
    ref_counts: dict[int, int] = {}
    for prov_path in prov_paths:
        fid = int(prov_path.stem)
        name = prov_path.stem
        frame = load_frame_predictions(
            points_dir / (name + seqio.SCAN_SUFFIX),
            prov_path,
            Path(multi_dir) / (name + seqio.LABEL_SUFFIX),
            fid,
        )
        single = single_stream_for_frame(
            frame, Path(single_dir) / (name + seqio.LABEL_SUFFIX)
        )
        merged = ensemble_merge(single, frame, boundary)
        tally.add_frame(merged)
        ref_counts[fid] = int(frame.is_ref.sum())

    scan_arr, point_arr, label_arr = tally.finalize()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fid, n_points in ref_counts.items():
        rows = np.flatnonzero(scan_arr == fid)
        covered = rows[point_arr[rows] < n_points]
        if covered.size != n_points:
            raise UnseenPoint(
                f"scan {fid}: {covered.size} of {n_points} points received a vote"
            )
        final = np.zeros(n_points, dtype=np.uint32)
        final[point_arr[covered]] = label_arr[covered]
        path = out_dir / (seqio.frame_name(fid) + seqio.LABEL_SUFFIX)
        seqio.write_labels(path, final)
        written.append(path)
    return written
