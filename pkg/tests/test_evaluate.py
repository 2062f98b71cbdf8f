import numpy as np
import pytest

from lidarseq.errors import EmptyReport, LengthMismatch, UnknownClass
from lidarseq.evaluate import (
    ConfusionAccumulator,
    build_report,
    class_ious,
    format_report,
    iou_percent,
    miou_percent,
    voxel_distribution,
)


class TestConfusionAccumulator:
    def test_close_hit(self):
        acc = ConfusionAccumulator(num_classes=3)
        acc.add([2], [2], [10.0])
        assert acc.bucket("close")[2, 2] == 1
        assert acc.bucket("overall")[2, 2] == 1
        assert acc.bucket("medium").sum() == 0

    def test_far_miss(self):
        acc = ConfusionAccumulator(num_classes=3)
        acc.add([1], [2], [55.0])
        assert acc.bucket("far")[1, 2] == 1

    def test_ignore_class_skipped(self):
        acc = ConfusionAccumulator(num_classes=3, ignore_class=0)
        acc.add([0], [2], [10.0])
        assert acc.matrices.sum() == 0

    def test_unknown_class(self):
        acc = ConfusionAccumulator(num_classes=3)
        with pytest.raises(UnknownClass):
            acc.add([7], [1], [5.0])

    def test_length_mismatch(self):
        acc = ConfusionAccumulator(num_classes=3)
        with pytest.raises(LengthMismatch):
            acc.add([1, 2], [1], [5.0, 6.0])

    def test_bucket_identity(self):
        rng = np.random.default_rng(0)
        acc = ConfusionAccumulator(num_classes=5)
        for _ in range(5):
            n = 300
            acc.add(
                rng.integers(0, 6, n),
                rng.integers(0, 6, n),
                rng.uniform(0, 100, n),
            )
        summed = (
            acc.bucket("close") + acc.bucket("medium") + acc.bucket("far")
        )
        assert np.array_equal(summed, acc.bucket("overall"))

    def test_merge(self):
        rng = np.random.default_rng(1)
        a = ConfusionAccumulator(num_classes=4)
        b = ConfusionAccumulator(num_classes=4)
        whole = ConfusionAccumulator(num_classes=4)
        for acc_part in (a, b):
            gt = rng.integers(0, 5, 100)
            pred = rng.integers(0, 5, 100)
            radii = rng.uniform(0, 80, 100)
            acc_part.add(gt, pred, radii)
            whole.add(gt, pred, radii)
        a.merge(b)
        assert np.array_equal(a.matrices, whole.matrices)


class TestIoU:
    def test_perfect_predictions(self):
        acc = ConfusionAccumulator(num_classes=2)
        acc.add([1, 2, 1], [1, 2, 1], [10.0, 30.0, 60.0])
        for c in (1, 2):
            assert iou_percent(acc.bucket("overall"), c) == 100.0

    def test_hand_counted_two_class(self):
        # gt x pred counts [[2, 1], [1, 2]] for classes (1, 2):
        # IoU(1) = 2 / (2 + 1 + 1) = 50%
        acc = ConfusionAccumulator(num_classes=2)
        acc.add(
            [1, 1, 1, 2, 2, 2],
            [1, 1, 2, 2, 2, 1],
            [10.0] * 6,
        )
        assert iou_percent(acc.bucket("overall"), 1) == 50.0
        assert iou_percent(acc.bucket("overall"), 2) == 50.0

    def test_absent_class_is_undefined(self):
        acc = ConfusionAccumulator(num_classes=3)
        acc.add([1], [1], [10.0])
        assert iou_percent(acc.bucket("overall"), 2) is None
        assert 2 not in class_ious(acc.bucket("overall"), acc.class_ids)

    def test_zero_overlap_contributes_zero(self):
        # class with gt mass but no correct predictions scores 0.0
        acc = ConfusionAccumulator(num_classes=2)
        acc.add([1, 2], [2, 2], [10.0, 10.0])
        assert iou_percent(acc.bucket("overall"), 1) == 0.0

    def test_miou_mean(self):
        acc = ConfusionAccumulator(num_classes=2)
        # class 1: iou 50%; class 2: iou 100%
        acc.add([1, 1, 2], [1, 2, 2], [10.0, 10.0, 10.0])
        assert miou_percent(acc.bucket("overall"), acc.class_ids) == pytest.approx(
            (100 * 1 / 3 + 100 * 2 / 3) / 2
        )

    def test_empty_report(self):
        acc = ConfusionAccumulator(num_classes=2)
        with pytest.raises(EmptyReport):
            miou_percent(acc.bucket("overall"), acc.class_ids)


class TestOracleEquivalence:
    @staticmethod
    def brute_force(gt, pred, radii, n_classes, ignore, bucket):
        """Set-based per-class recount for one bucket ('overall' = all)."""
        limits = {"close": (0, 20), "medium": (20, 50), "far": (50, np.inf)}
        ious = {}
        for c in range(n_classes + 1):
            if c == ignore:
                continue
            tp = fp = fn = 0
            for g, p, r in zip(gt, pred, radii):
                if g == ignore:
                    continue
                if bucket != "overall":
                    lo, hi = limits[bucket]
                    if not (lo <= r < hi):
                        continue
                if g == c and p == c:
                    tp += 1
                elif g != c and p == c:
                    fp += 1
                elif g == c and p != c:
                    fn += 1
            if tp + fp + fn:
                ious[c] = 100.0 * tp / (tp + fp + fn)
        return ious

    def test_random_instances(self):
        rng = np.random.default_rng(2)
        for trial in range(10):
            n = int(rng.integers(50, 1000))
            gt = rng.integers(0, 6, n)
            pred = rng.integers(0, 6, n)
            radii = rng.uniform(0, 90, n)
            acc = ConfusionAccumulator(num_classes=5)
            acc.add(gt, pred, radii)
            for bucket in ("overall", "close", "medium", "far"):
                expected = self.brute_force(gt, pred, radii, 5, 0, bucket)
                got = class_ious(acc.bucket(bucket), acc.class_ids)
                assert set(got) == set(expected)
                for c in expected:
                    assert abs(got[c] - expected[c]) < 1e-12
                if expected:
                    assert abs(
                        miou_percent(acc.bucket(bucket), acc.class_ids)
                        - np.mean(list(expected.values()))
                    ) < 1e-12


class TestReport:
    def _acc(self):
        acc = ConfusionAccumulator(num_classes=2)
        acc.add([1, 2, 1, 2], [1, 2, 1, 1], [5.0, 10.0, 30.0, 70.0])
        return acc

    def test_shares_sum_to_100(self):
        report = build_report(self._acc())
        total = sum(report.buckets[b].share for b in ("close", "medium", "far"))
        assert total == pytest.approx(100.0)

    def test_table_has_bucket_rows(self):
        text = format_report(build_report(self._acc()), "table")
        for name in ("overall", "close", "medium", "far"):
            assert name in text

    def test_kv_is_parseable(self):
        text = format_report(build_report(self._acc()), "kv")
        for line in text.strip().splitlines():
            assert " = " in line

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            format_report(build_report(self._acc()), "json")


class TestVoxelDistribution:
    def test_all_close(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-3, 3, size=(500, 3))
        shares = voxel_distribution(pts, 0.5)
        assert shares.tolist() == [100.0, 0.0, 0.0]

    def test_brute_force_recount(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(-80, 80, size=(3000, 3))
        size = 2.5
        counts = [0, 0, 0]
        seen = set()
        for x, y, z in pts:
            key = (int(np.floor(x / size)), int(np.floor(y / size)), int(np.floor(z / size)))
            if key in seen:
                continue
            seen.add(key)
            cx, cy, cz = ((k + 0.5) * size for k in key)
            r = np.sqrt(cx * cx + cy * cy + cz * cz)
            counts[0 if r < 20 else (1 if r < 50 else 2)] += 1
        expected = 100.0 * np.array(counts) / sum(counts)
        assert np.allclose(voxel_distribution(pts, size), expected, atol=1e-12)

    def test_empty(self):
        assert voxel_distribution(np.empty((0, 3)), 1.0).tolist() == [0, 0, 0]
