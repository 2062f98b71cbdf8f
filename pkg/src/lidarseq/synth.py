"""Synthetic LiDAR sequences and a density-aware mock labeler.

Objects are sampled by ray-free surface sampling whose expected point count
falls off as 1/r^2 with sensor distance (ground returns fall off faster, as
grazing incidence does); occlusion is not modeled. This reproduces the
varying-density behavior the pipeline exploits at desk scale, where real
datasets and trained models are unavailable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seqio
from .errors import LengthMismatch
from .geom import Pose, bucket_of, invert, transform_points, yaw_rotation
from .seqio import SequenceManifest


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; a nonzero velocity makes it a moving object."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    class_id: int
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def moving(self) -> bool:
        return any(v != 0.0 for v in self.velocity)

    def center_at(self, t: float) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.velocity) * t

    @property
    def area(self) -> float:
        a, b, c = self.size
        return 2.0 * (a * b + b * c + c * a)


@dataclass(frozen=True)
class GroundDisk:
    """Flat ground at a fixed height below the sensor path."""

    class_id: int
    height: float = -1.6


@dataclass(frozen=True)
class SensorModel:
    max_range: float
    points_per_steradian: float
    min_range: float = 2.0


@dataclass(frozen=True)
class Trajectory:
    kind: str  # "straight" or "arc"
    speed: float
    rate_hz: float
    scan_count: int
    turn_rate: float = 0.05  # rad/s, arc only

    def __post_init__(self) -> None:
        if self.scan_count < 1:
            raise ValueError("scan_count must be >= 1")
        if self.kind not in ("straight", "arc"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "arc" and self.turn_rate == 0.0:
            raise ValueError("arc trajectory needs a nonzero turn_rate")

    def pose_at(self, i: int) -> Pose:
        t = i / self.rate_hz
        if self.kind == "straight":
            return Pose.from_translation(self.speed * t, 0.0, 0.0)
        theta = self.turn_rate * t
        r = self.speed / self.turn_rate
        return Pose.from_rt(
            yaw_rotation(theta),
            (r * np.sin(theta), r * (1.0 - np.cos(theta)), 0.0),
        )


@dataclass(frozen=True)
class SceneSpec:
    trajectory: Trajectory
    sensor: SensorModel
    boxes: tuple[Box, ...]
    ground: GroundDisk | None
    seed: int

    def poses(self) -> list[Pose]:
        return [self.trajectory.pose_at(i) for i in range(self.trajectory.scan_count)]


def default_scene(
    seed: int = 0,
    scan_count: int = 40,
    speed: float = 2.0,
    rate_hz: float = 1.0,
    trajectory: str = "straight",
    turn_rate: float = 0.02,
    max_range: float = 120.0,
    density: float = 1500.0,
    num_classes: int = 8,
) -> SceneSpec:
    """A driving corridor: ground plane, box rows on both sides, two movers."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(999,)))
    boxes = []
    corridor = speed / rate_hz * scan_count + 0.8 * max_range
    x = 8.0
    cls = 2
    while x < corridor:
        for side in (-1.0, 1.0):
            w, d, h = rng.uniform(1.0, 4.0, size=3)
            lateral = side * rng.uniform(4.0, 14.0)
            boxes.append(
                Box(
                    center=(x + rng.uniform(-2, 2), lateral, -1.6 + h / 2),
                    size=(w, d, h),
                    class_id=cls,
                )
            )
            cls = 2 + (cls - 1) % (num_classes - 1)
        x += 12.0
    boxes.append(
        Box(center=(15.0, 2.0, -0.9), size=(4.0, 2.0, 1.5), class_id=2,
            velocity=(3.0, 0.0, 0.0))
    )
    boxes.append(
        Box(center=(40.0, -2.0, -0.9), size=(4.0, 2.0, 1.5), class_id=2,
            velocity=(-2.0, 0.0, 0.0))
    )
    return SceneSpec(
        trajectory=Trajectory(trajectory, speed, rate_hz, scan_count, turn_rate),
        sensor=SensorModel(max_range=max_range, points_per_steradian=density),
        boxes=tuple(boxes),
        ground=GroundDisk(class_id=1),
        seed=seed,
    )


def _sample_box(rng, box: Box, center: np.ndarray, n: int) -> np.ndarray:
    a, b, c = box.size
    areas = np.array([b * c, b * c, a * c, a * c, a * b, a * b])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2  # 0=x, 1=y, 2=z faces
    sign = np.where(face % 2 == 0, 0.5, -0.5)
    size = np.array(box.size)
    for ax in range(3):
        rows = axis == ax
        others = [o for o in range(3) if o != ax]
        pts[rows, ax] = sign[rows] * size[ax]
        pts[rows, others[0]] = u[rows, 0] * size[others[0]]
        pts[rows, others[1]] = u[rows, 1] * size[others[1]]
    return pts + center


def _sample_ground(rng, spec: SceneSpec, sensor_xy: np.ndarray) -> np.ndarray:
    sensor = spec.sensor
    h = -spec.ground.height
    r0, rmax = sensor.min_range, sensor.max_range
    flux = 1.0 / r0 - 1.0 / rmax
    expected = sensor.points_per_steradian * 2.0 * np.pi * h * flux
    n = rng.poisson(expected)
    u = rng.uniform(size=n)
    r = 1.0 / (1.0 / r0 - u * flux)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    out = np.empty((n, 3))
    out[:, 0] = sensor_xy[0] + r * np.cos(theta)
    out[:, 1] = sensor_xy[1] + r * np.sin(theta)
    out[:, 2] = spec.ground.height
    return out


def render_scan(spec: SceneSpec, index: int):
    """Sample one scan: (points (N,4) float32 in the scan's own frame,
    semantic labels, moving mask). Deterministic for a fixed spec."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(index,)))
    pose = spec.trajectory.pose_at(index)
    t = index / spec.trajectory.rate_hz
    sensor_pos = pose.translation

    world_parts: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    moving: list[np.ndarray] = []

    if spec.ground is not None:
        g = _sample_ground(rng, spec, sensor_pos[:2])
        world_parts.append(g)
        labels.append(np.full(len(g), spec.ground.class_id, dtype=np.uint32))
        moving.append(np.zeros(len(g), dtype=np.uint8))

    for box in spec.boxes:
        center = box.center_at(t)
        d = float(np.linalg.norm(center - sensor_pos))
        if d > spec.sensor.max_range:
            continue
        expected = spec.sensor.points_per_steradian * box.area / max(d, 1.0) ** 2
        n = rng.poisson(expected)
        if n == 0:
            continue
        pts = _sample_box(rng, box, center, n)
        world_parts.append(pts)
        labels.append(np.full(n, box.class_id, dtype=np.uint32))
        moving.append(np.full(n, 1 if box.moving else 0, dtype=np.uint8))

    world = np.concatenate(world_parts) if world_parts else np.empty((0, 3))
    label_arr = np.concatenate(labels) if labels else np.empty(0, dtype=np.uint32)
    moving_arr = np.concatenate(moving) if moving else np.empty(0, dtype=np.uint8)

    local = transform_points(invert(pose), world)
    r = np.linalg.norm(local, axis=1)
    keep = (r >= spec.sensor.min_range) & (r < spec.sensor.max_range)
    local, label_arr, moving_arr = local[keep], label_arr[keep], moving_arr[keep]

    points = np.empty((len(local), 4), dtype=np.float32)
    points[:, :3] = local.astype(np.float32)
    points[:, 3] = 0.5
    return points, label_arr, moving_arr


def generate_sequence(spec: SceneSpec, out_dir, profile: str = "semantickitti") -> SequenceManifest:
    """Write a full synthetic sequence in the toolkit's on-disk layout."""
    out = Path(out_dir)
    for sub in ("scans", "labels", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    poses = spec.poses()
    seqio.write_poses(out / "poses.txt", poses)
    for i in range(spec.trajectory.scan_count):
        name = seqio.frame_name(i)
        points, labels, mask = render_scan(spec, i)
        seqio.write_points(out / "scans" / (name + seqio.SCAN_SUFFIX), points)
        seqio.write_labels(out / "labels" / (name + seqio.LABEL_SUFFIX), labels)
        seqio.write_mask(out / "masks" / (name + seqio.MASK_SUFFIX), mask)
    seqio.write_kv_config(
        out / "manifest.cfg",
        {
            "scan_dir": "scans",
            "pose_file": "poses.txt",
            "label_dir": "labels",
            "mask_dir": "masks",
            "profile": profile,
            "sequence": out.name,
        },
    )
    return SequenceManifest.from_file(out / "manifest.cfg")


@dataclass(frozen=True)
class LabelerSpec:
    """Mock per-bucket labeler: keeps the true class with the bucket's
    probability, otherwise answers a uniformly random wrong class."""

    p_close: float
    p_medium: float
    p_far: float
    num_classes: int
    seed: int = 0

    def __post_init__(self) -> None:
        for p in (self.p_close, self.p_medium, self.p_far):
            if not 0.0 < p <= 1.0:
                raise ValueError("bucket probabilities must lie in (0, 1]")
        if not self.p_close >= self.p_medium >= self.p_far:
            raise ValueError("need p_close >= p_medium >= p_far")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2 to sample wrong classes")


def mock_predict(
    gt_labels: np.ndarray,
    radii: np.ndarray,
    labeler: LabelerSpec,
    frame_key: int = 0,
    ignore_class: int = 0,
) -> np.ndarray:
    """Corrupt ground truth per range bucket; ignore-class points pass through."""
    gt = np.asarray(gt_labels, dtype=np.uint32)
    radii = np.asarray(radii, dtype=np.float64)
    if len(gt) != len(radii):
        raise LengthMismatch(f"{len(gt)} labels vs {len(radii)} radii")
    rng = np.random.default_rng(
        np.random.SeedSequence(labeler.seed, spawn_key=(frame_key,))
    )
    probs = np.array([labeler.p_close, labeler.p_medium, labeler.p_far])
    p = probs[bucket_of(radii)]
    keep = rng.random(len(gt)) < p
    wrong = rng.integers(1, labeler.num_classes, size=len(gt)).astype(np.uint32)
    wrong = wrong + (wrong >= gt)
    out = np.where(keep, gt, wrong).astype(np.uint32)
    out[gt == ignore_class] = gt[gt == ignore_class]
    return out
