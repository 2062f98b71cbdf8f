import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lidarseq.errors import KeyMismatch, NegativeRadius, UnseenPoint
from lidarseq.postproc import (
    FramePredictions,
    VoteTally,
    ensemble_merge,
    finalize_votes,
    range_weight,
    single_stream,
)


class TestRangeWeight:
    def test_paper_anchors(self):
        assert abs(range_weight(0.0) - 1.0) < 1e-12
        assert abs(range_weight(20.0) - 0.5) < 1e-12
        assert abs(range_weight(180.0) - 0.1) < 1e-12

    def test_clamp_floor(self):
        assert range_weight(380.0) == 0.1

    def test_negative_radius(self):
        with pytest.raises(NegativeRadius):
            range_weight(-1.0)
        with pytest.raises(NegativeRadius):
            range_weight(np.array([3.0, -0.5]))

    def test_vectorized(self):
        out = range_weight(np.array([0.0, 20.0, 180.0, 1000.0]))
        assert np.allclose(out, [1.0, 0.5, 0.1, 0.1], atol=1e-12)

    @given(
        st.floats(min_value=0.0, max_value=1e6),
        st.floats(min_value=0.0, max_value=1e6),
    )
    def test_monotone_non_increasing(self, a, b):
        lo, hi = sorted((a, b))
        assert range_weight(hi) <= range_weight(lo)

    @given(st.floats(min_value=0.0, max_value=1e9))
    def test_bounds(self, r):
        w = range_weight(r)
        assert 0.1 <= w <= 1.0
        # strictly below 1 once r is above float64 rounding scale
        if r > 1e-12:
            assert w < 1.0


def frame(frame_id, labels, radii, prov, is_ref):
    return FramePredictions(
        frame_id=frame_id,
        labels=np.asarray(labels, dtype=np.uint32),
        radii=np.asarray(radii, dtype=np.float64),
        prov=np.asarray(prov, dtype=np.uint32),
        is_ref=np.asarray(is_ref, dtype=bool),
    )


class TestEnsembleMerge:
    def _streams(self):
        # frame 0: 2 reference points (r = 10, 35) and 1 accumulated point
        multi = frame(
            0,
            labels=[7, 7, 7],
            radii=[10.0, 35.0, 60.0],
            prov=[[0, 0], [0, 1], [1, 4]],
            is_ref=[True, True, False],
        )
        single = single_stream(0, labels=[3, 3], radii=[10.0, 35.0])
        return single, multi

    def test_close_reference_takes_single(self):
        single, multi = self._streams()
        merged = ensemble_merge(single, multi, boundary=20.0)
        assert merged.labels[0] == 3

    def test_medium_reference_takes_multi(self):
        single, multi = self._streams()
        merged = ensemble_merge(single, multi, boundary=20.0)
        assert merged.labels[1] == 7

    def test_non_reference_takes_multi(self):
        single, multi = self._streams()
        merged = ensemble_merge(single, multi, boundary=20.0)
        assert merged.labels[2] == 7

    def test_key_mismatch_on_count(self):
        _, multi = self._streams()
        bad = single_stream(0, labels=[3], radii=[10.0])
        with pytest.raises(KeyMismatch):
            ensemble_merge(bad, multi)

    def test_key_mismatch_on_scan(self):
        _, multi = self._streams()
        bad = single_stream(1, labels=[3, 3], radii=[10.0, 35.0])
        with pytest.raises(KeyMismatch):
            ensemble_merge(bad, multi)


class TestVoteTally:
    def test_single_observation(self):
        tally = VoteTally()
        tally.add_frame(frame(0, [4], [0.0], [[0, 0]], [True]))
        assert tally.class_weights(0, 0) == {4: 1.0}
        assert finalize_votes(tally, 0, 0) == 4

    def test_hand_computed_weights(self):
        # class 1 at r=10 (w=2/3); class 2 at r=60 (w=1/4) and r=70 (w=2/9)
        tally = VoteTally()
        tally.add_frame(frame(0, [1], [10.0], [[5, 9]], [False]))
        tally.add_frame(frame(1, [2], [60.0], [[5, 9]], [False]))
        tally.add_frame(frame(2, [2], [70.0], [[5, 9]], [False]))
        weights = tally.class_weights(5, 9)
        assert abs(weights[1] - 2.0 / 3.0) < 1e-12
        assert abs(weights[2] - (0.25 + 2.0 / 9.0)) < 1e-12
        assert finalize_votes(tally, 5, 9) == 1

    def test_tie_breaks_to_lowest_class(self):
        tally = VoteTally()
        tally.add_frame(frame(0, [9], [20.0], [[0, 0]], [True]))
        tally.add_frame(frame(1, [2], [20.0], [[0, 0]], [False]))
        assert finalize_votes(tally, 0, 0) == 2

    def test_unseen_point(self):
        tally = VoteTally()
        with pytest.raises(UnseenPoint):
            finalize_votes(tally, 0, 0)

    def test_merge_equals_concatenation(self):
        rng = np.random.default_rng(0)
        frames = [
            frame(
                f,
                rng.integers(1, 5, size=20),
                rng.uniform(0, 100, size=20),
                np.column_stack([rng.integers(0, 3, 20), rng.integers(0, 10, 20)]),
                rng.random(20) < 0.5,
            )
            for f in range(6)
        ]
        whole = VoteTally()
        for f in frames:
            whole.add_frame(f)
        part_a, part_b = VoteTally(), VoteTally()
        for f in frames[:3]:
            part_a.add_frame(f)
        for f in frames[3:]:
            part_b.add_frame(f)
        merged = part_a.merge(part_b)
        for arr_w, arr_m in zip(whole.finalize(), merged.finalize()):
            assert np.array_equal(arr_w, arr_m)

    def test_order_independent_bitwise(self):
        rng = np.random.default_rng(1)
        frames = [
            frame(
                f,
                rng.integers(1, 4, size=50),
                rng.uniform(0, 150, size=50),
                np.column_stack(
                    [np.zeros(50, dtype=np.uint32), rng.integers(0, 25, 50)]
                ),
                np.ones(50, dtype=bool),
            )
            for f in range(8)
        ]
        forward, backward = VoteTally(), VoteTally()
        for f in frames:
            forward.add_frame(f)
        for f in reversed(frames):
            backward.add_frame(f)
        for arr_f, arr_b in zip(forward.finalize(), backward.finalize()):
            assert np.array_equal(arr_f, arr_b)

    def test_scaling_invariance_of_argmax(self):
        # scaling every accumulated weight by a positive constant must not
        # change any final label
        rng = np.random.default_rng(2)
        tally = VoteTally()
        for f in range(12):
            n = 80
            tally.add_frame(
                frame(
                    f,
                    rng.integers(1, 6, n),
                    rng.uniform(0, 150, n),
                    np.column_stack(
                        [np.zeros(n, dtype=np.uint32), rng.integers(0, 40, n)]
                    ),
                    np.ones(n, bool),
                )
            )
        baseline = tally.finalize()
        for scale in (0.5, 3.0, 100.0):
            scaled = VoteTally()
            scaled._chunks = [
                (s, p, l, fr, w * scale) for s, p, l, fr, w in tally._chunks
            ]
            for a, b in zip(baseline, scaled.finalize()):
                assert np.array_equal(a, b)

    def test_never_assigns_zero_weight_class(self):
        rng = np.random.default_rng(3)
        tally = VoteTally()
        observed: dict[tuple[int, int], set[int]] = {}
        for f in range(10):
            labels = rng.integers(1, 6, size=30).astype(np.uint32)
            prov = np.column_stack(
                [np.zeros(30, dtype=np.uint32), rng.integers(0, 12, 30)]
            )
            tally.add_frame(
                frame(f, labels, rng.uniform(0, 120, 30), prov, np.ones(30, bool))
            )
            for row in range(30):
                observed.setdefault((0, int(prov[row, 1])), set()).add(int(labels[row]))
        scans, points, final = tally.finalize()
        for s, p, c in zip(scans, points, final):
            assert int(c) in observed[(int(s), int(p))]


class TestVotingOracle:
    def brute_force(self, observations):
        """Dict-based recount: observations are (scan, point, cls, frame, r)."""
        tally: dict[tuple[int, int], dict[int, float]] = {}
        for scan, point, cls, _frame, r in sorted(observations, key=lambda o: o[3]):
            w = max(0.1, 20.0 / (r + 20.0))
            tally.setdefault((scan, point), {}).setdefault(cls, 0.0)
            tally[(scan, point)][cls] += w
        out = {}
        for key, per_class in tally.items():
            best = max(per_class.items(), key=lambda kv: (kv[1], -kv[0]))
            out[key] = best[0]
        return out

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        observations = []
        tally = VoteTally()
        for f in range(15):
            n = int(rng.integers(5, 60))
            labels = rng.integers(1, 6, size=n).astype(np.uint32)
            radii = rng.uniform(0, 200, size=n)
            prov = np.column_stack(
                [rng.integers(0, 4, n).astype(np.uint32),
                 rng.integers(0, 30, n).astype(np.uint32)]
            )
            tally.add_frame(frame(f, labels, radii, prov, np.ones(n, bool)))
            observations += [
                (int(prov[i, 0]), int(prov[i, 1]), int(labels[i]), f, float(radii[i]))
                for i in range(n)
            ]
        expected = self.brute_force(observations)
        scans, points, final = tally.finalize()
        got = {
            (int(s), int(p)): int(c) for s, p, c in zip(scans, points, final)
        }
        assert got == expected
