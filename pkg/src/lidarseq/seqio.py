"""Bit-exact readers/writers for scans, labels, poses, masks and sidecars.

Binary layouts follow the SemanticKITTI convention: points are little-endian
float32 quadruples (x, y, z, intensity), labels are little-endian uint32 with
the semantic class in the low 16 bits, poses are text files with one 3x4
row-major matrix per line. Provenance sidecars and moving masks are this
toolkit's own formats (uint32 pairs and one byte per point respectively).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    IoFailure,
    LengthMismatch,
    OrthonormalityViolation,
    ParseError,
    TruncatedFile,
)
from .geom import Pose

SCAN_SUFFIX = ".bin"
LABEL_SUFFIX = ".label"
MASK_SUFFIX = ".mask"
PROV_SUFFIX = ".prov"

SEMANTIC_MASK = 0xFFFF


def frame_name(index: int) -> str:
    return f"{index:06d}"


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_points(path) -> np.ndarray:
    """Load a scan as an (N, 4) float32 array of x, y, z, intensity."""
    raw = _read_bytes(path)
    if len(raw) % 16 != 0:
        raise TruncatedFile(f"{path}: length {len(raw)} not a multiple of 16")
    return np.frombuffer(raw, dtype="<f4").reshape(-1, 4).copy()


def write_points(path, points: np.ndarray) -> None:
    points = np.ascontiguousarray(points, dtype="<f4")
    if points.ndim != 2 or points.shape[1] != 4:
        raise ValueError(f"points must be (N, 4), got {points.shape}")
    _write_bytes(path, points.tobytes())


def read_labels(path) -> np.ndarray:
    """Load raw uint32 labels; high 16 bits (instance ids) are preserved."""
    raw = _read_bytes(path)
    if len(raw) % 4 != 0:
        raise TruncatedFile(f"{path}: length {len(raw)} not a multiple of 4")
    return np.frombuffer(raw, dtype="<u4").copy()


def semantic_ids(labels: np.ndarray) -> np.ndarray:
    """Semantic class ids: the low 16 bits of raw label values."""
    return np.asarray(labels, dtype=np.uint32) & np.uint32(SEMANTIC_MASK)


def write_labels(path, ids: np.ndarray) -> None:
    """Write class ids as uint32 records; high 16 bits are written as zero."""
    ids = semantic_ids(ids).astype("<u4")
    _write_bytes(path, ids.tobytes())


def read_mask(path) -> np.ndarray:
    """Load a moving mask: one byte per point, 0 = static, nonzero = moving."""
    raw = _read_bytes(path)
    return (np.frombuffer(raw, dtype=np.uint8) != 0).astype(np.uint8)


def write_mask(path, mask: np.ndarray) -> None:
    mask = (np.asarray(mask) != 0).astype(np.uint8)
    _write_bytes(path, mask.tobytes())


def read_provenance(path) -> np.ndarray:
    """Load an (N, 2) uint32 array of (source_scan, source_point) pairs."""
    raw = _read_bytes(path)
    if len(raw) % 8 != 0:
        raise TruncatedFile(f"{path}: length {len(raw)} not a multiple of 8")
    return np.frombuffer(raw, dtype="<u4").reshape(-1, 2).copy()


def write_provenance(path, prov: np.ndarray) -> None:
    prov = np.ascontiguousarray(prov, dtype="<u4")
    if prov.ndim != 2 or prov.shape[1] != 2:
        raise ValueError(f"provenance must be (N, 2), got {prov.shape}")
    _write_bytes(path, prov.tobytes())


def read_poses(path) -> list[Pose]:
    """Parse a pose file: 12 reals per line, row-major 3x4, line i = scan i."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    poses = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 12:
            raise ParseError(f"{path}:{lineno}: expected 12 values, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        m = np.eye(4)
        m[:3, :] = np.array(vals).reshape(3, 4)
        try:
            poses.append(Pose(m))
        except OrthonormalityViolation as exc:
            raise OrthonormalityViolation(f"{path}:{lineno}: {exc}") from exc
    return poses


def write_poses(path, poses) -> None:
    lines = []
    for p in poses:
        lines.append(" ".join(f"{v:.12g}" for v in p.m[:3, :].reshape(-1)))
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_kv_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` config document; '#' starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_kv_config(path, items: dict[str, str]) -> None:
    text = "".join(f"{k} = {v}\n" for k, v in items.items())
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass
class ScanRecord:
    """One timestamp's scan: points, optional semantic labels, pose."""

    index: int
    points: np.ndarray  # (N, 4) float32
    labels: np.ndarray | None  # (N,) uint32 semantic ids
    pose: Pose

    def __post_init__(self) -> None:
        if self.labels is not None and len(self.labels) != len(self.points):
            raise LengthMismatch(
                f"scan {self.index}: {len(self.points)} points but "
                f"{len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class SequenceManifest:
    """Locates the files of one sequence.

    Built either programmatically or from a flat key=value manifest file
    with keys ``scan_dir``, ``pose_file`` and optional ``label_dir``,
    ``mask_dir``, ``profile``, ``sequence``. Relative paths resolve against
    the manifest's directory.
    """

    scan_paths: list[Path]
    pose_path: Path
    label_dir: Path | None = None
    mask_dir: Path | None = None
    profile: str = "semantickitti"
    sequence: str = "00"

    @classmethod
    def from_dirs(
        cls,
        scan_dir,
        pose_path,
        label_dir=None,
        mask_dir=None,
        profile: str = "semantickitti",
        sequence: str | None = None,
    ) -> "SequenceManifest":
        scan_dir = Path(scan_dir)
        if not scan_dir.is_dir():
            raise IoFailure(f"scan directory not found: {scan_dir}")
        scan_paths = sorted(scan_dir.glob(f"*{SCAN_SUFFIX}"))
        if not scan_paths:
            raise IoFailure(f"no {SCAN_SUFFIX} files in {scan_dir}")
        pose_path = Path(pose_path)
        if not pose_path.is_file():
            raise IoFailure(f"pose file not found: {pose_path}")
        return cls(
            scan_paths=scan_paths,
            pose_path=pose_path,
            label_dir=Path(label_dir) if label_dir else None,
            mask_dir=Path(mask_dir) if mask_dir else None,
            profile=profile,
            sequence=sequence if sequence is not None else scan_dir.parent.name,
        )

    @classmethod
    def from_file(cls, path) -> "SequenceManifest":
        path = Path(path)
        cfg = read_kv_config(path)
        if "scan_dir" not in cfg or "pose_file" not in cfg:
            raise ParseError(f"{path}: manifest needs scan_dir and pose_file")
        base = path.parent

        def resolve(value):
            return (base / value).resolve() if value else None

        return cls.from_dirs(
            scan_dir=resolve(cfg["scan_dir"]),
            pose_path=resolve(cfg["pose_file"]),
            label_dir=resolve(cfg.get("label_dir")),
            mask_dir=resolve(cfg.get("mask_dir")),
            profile=cfg.get("profile", "semantickitti"),
            sequence=cfg.get("sequence", path.parent.name),
        )

    def label_path(self, index: int) -> Path | None:
        if self.label_dir is None:
            return None
        return self.label_dir / (self.scan_paths[index].stem + LABEL_SUFFIX)

    def mask_path(self, index: int) -> Path | None:
        if self.mask_dir is None:
            return None
        return self.mask_dir / (self.scan_paths[index].stem + MASK_SUFFIX)

    def __len__(self) -> int:
        return len(self.scan_paths)


def load_sequence(manifest: SequenceManifest) -> list[ScanRecord]:
    """Load all scans of a sequence, verifying pose and label alignment."""
    poses = read_poses(manifest.pose_path)
    if len(poses) != len(manifest.scan_paths):
        raise LengthMismatch(
            f"{manifest.pose_path}: {len(poses)} poses for "
            f"{len(manifest.scan_paths)} scans"
        )
    records = []
    for i, scan_path in enumerate(manifest.scan_paths):
        points = read_points(scan_path)
        labels = None
        label_path = manifest.label_path(i)
        if label_path is not None:
            if not label_path.is_file():
                raise IoFailure(f"label file not found: {label_path}")
            labels = semantic_ids(read_labels(label_path))
            if len(labels) != len(points):
                raise LengthMismatch(
                    f"{label_path}: {len(labels)} labels for {len(points)} points"
                )
        records.append(ScanRecord(index=i, points=points, labels=labels, pose=poses[i]))
    return records


def load_mask(manifest: SequenceManifest, index: int) -> np.ndarray | None:
    """Moving mask for one scan, or None when the manifest has no mask dir."""
    path = manifest.mask_path(index)
    if path is None or not path.is_file():
        return None
    return read_mask(path)
