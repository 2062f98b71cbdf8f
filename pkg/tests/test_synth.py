import numpy as np
import pytest

from lidarseq import seqio
from lidarseq.errors import LengthMismatch
from lidarseq.geom import Pose, bucket_of, radius
from lidarseq.synth import (
    Box,
    GroundDisk,
    LabelerSpec,
    SceneSpec,
    SensorModel,
    Trajectory,
    default_scene,
    generate_sequence,
    mock_predict,
    render_scan,
)


def small_scene(seed=0, scan_count=4):
    return default_scene(
        seed=seed, scan_count=scan_count, speed=2.0, max_range=80.0, density=400.0
    )


class TestSceneSpec:
    def test_poses_are_valid(self):
        for kind in ("straight", "arc"):
            spec = default_scene(seed=1, scan_count=6, trajectory=kind)
            for pose in spec.poses():
                Pose(pose.m)  # re-validates orthonormality

    def test_zero_speed_identical_poses(self):
        traj = Trajectory("straight", speed=0.0, rate_hz=1.0, scan_count=5)
        poses = [traj.pose_at(i) for i in range(5)]
        for p in poses[1:]:
            assert np.array_equal(p.m, poses[0].m)

    def test_arc_needs_turn_rate(self):
        with pytest.raises(ValueError):
            Trajectory("arc", speed=1.0, rate_hz=1.0, scan_count=3, turn_rate=0.0)


class TestRenderScan:
    def test_deterministic(self):
        spec = small_scene()
        a = render_scan(spec, 2)
        b = render_scan(spec, 2)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_inverse_square_falloff(self):
        # identical box at 10 m and 20 m: point count ratio ~4:1
        sensor = SensorModel(max_range=200.0, points_per_steradian=4000.0)
        spec = SceneSpec(
            trajectory=Trajectory("straight", 0.0, 1.0, 1),
            sensor=sensor,
            boxes=(
                Box(center=(10.0, 0, 0), size=(2, 2, 2), class_id=2),
                Box(center=(20.0, 0, 0), size=(2, 2, 2), class_id=3),
            ),
            ground=None,
            seed=5,
        )
        points, labels, _ = render_scan(spec, 0)
        near = int((labels == 2).sum())
        far = int((labels == 3).sum())
        assert far > 0
        assert abs(near / far - 4.0) < 0.8  # within +-20%

    def test_moving_mask_marks_exactly_the_movers(self):
        spec = SceneSpec(
            trajectory=Trajectory("straight", 0.0, 1.0, 1),
            sensor=SensorModel(max_range=100.0, points_per_steradian=2000.0),
            boxes=(
                Box(center=(12.0, 0, 0), size=(2, 2, 2), class_id=2),
                Box(center=(20.0, 5, 0), size=(2, 2, 2), class_id=3,
                    velocity=(1.0, 0, 0)),
            ),
            ground=GroundDisk(class_id=1),
            seed=6,
        )
        _, labels, mask = render_scan(spec, 0)
        assert np.array_equal(mask == 1, labels == 3)

    def test_range_clipping(self):
        spec = small_scene()
        points, _, _ = render_scan(spec, 0)
        r = radius(points[:, :3])
        assert r.max() < spec.sensor.max_range
        assert r.min() >= spec.sensor.min_range

    def test_moving_box_moves(self):
        box = Box(center=(10.0, 0, 0), size=(2, 2, 2), class_id=2, velocity=(3.0, 0, 0))
        assert np.allclose(box.center_at(2.0), [16.0, 0, 0])
        assert box.moving


class TestGenerateSequence:
    def test_same_seed_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            manifest = generate_sequence(small_scene(seed=3), tmp_path / name)
            assert len(manifest) == 4
        for sub in ("scans", "labels", "masks"):
            for f in sorted((tmp_path / "a" / sub).iterdir()):
                twin = tmp_path / "b" / sub / f.name
                assert f.read_bytes() == twin.read_bytes()
        assert (tmp_path / "a" / "poses.txt").read_text() == (
            tmp_path / "b" / "poses.txt"
        ).read_text()

    def test_layout_loads_as_sequence(self, tmp_path):
        manifest = generate_sequence(small_scene(), tmp_path / "seq")
        records = seqio.load_sequence(manifest)
        assert len(records) == 4
        for i, rec in enumerate(records):
            assert rec.labels is not None
            mask = seqio.load_mask(manifest, i)
            assert mask is not None and len(mask) == len(rec)


class TestMockPredict:
    def test_perfect_labeler(self):
        rng = np.random.default_rng(0)
        gt = rng.integers(1, 6, 500).astype(np.uint32)
        radii = rng.uniform(0, 100, 500)
        spec = LabelerSpec(1.0, 1.0, 1.0, num_classes=5)
        assert np.array_equal(mock_predict(gt, radii, spec), gt)

    def test_far_accuracy_binomial(self):
        rng = np.random.default_rng(1)
        n = 10_000
        gt = rng.integers(1, 6, n).astype(np.uint32)
        radii = np.full(n, 75.0)
        spec = LabelerSpec(1.0, 0.75, 0.5, num_classes=5, seed=9)
        pred = mock_predict(gt, radii, spec)
        accuracy = float((pred == gt).mean())
        assert abs(accuracy - 0.5) < 0.02

    def test_bucket_accuracies_ordered(self):
        rng = np.random.default_rng(2)
        n = 30_000
        gt = rng.integers(1, 6, n).astype(np.uint32)
        radii = rng.uniform(0, 120, n)
        spec = LabelerSpec(0.95, 0.8, 0.55, num_classes=5, seed=4)
        pred = mock_predict(gt, radii, spec)
        buckets = bucket_of(radii)
        acc = [
            float((pred[buckets == b] == gt[buckets == b]).mean()) for b in (0, 1, 2)
        ]
        assert acc[0] >= acc[1] >= acc[2]

    def test_wrong_labels_stay_in_class_range(self):
        rng = np.random.default_rng(3)
        gt = rng.integers(1, 4, 2000).astype(np.uint32)
        spec = LabelerSpec(0.5, 0.5, 0.5, num_classes=3, seed=1)
        pred = mock_predict(gt, np.full(2000, 90.0), spec)
        wrong = pred[pred != gt]
        assert wrong.size > 0
        assert wrong.min() >= 1 and wrong.max() <= 3

    def test_ignore_class_passthrough(self):
        gt = np.array([0, 0, 2], dtype=np.uint32)
        spec = LabelerSpec(0.5, 0.5, 0.5, num_classes=3, seed=2)
        pred = mock_predict(gt, np.array([90.0, 90.0, 90.0]), spec)
        assert pred[0] == 0 and pred[1] == 0

    def test_length_mismatch(self):
        spec = LabelerSpec(0.9, 0.8, 0.7, num_classes=4)
        with pytest.raises(LengthMismatch):
            mock_predict(np.array([1, 2], dtype=np.uint32), np.array([5.0]), spec)

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            LabelerSpec(0.5, 0.8, 0.7, num_classes=4)  # not ordered
        with pytest.raises(ValueError):
            LabelerSpec(1.0, 0.5, 0.0, num_classes=4)  # p_far out of (0, 1]
