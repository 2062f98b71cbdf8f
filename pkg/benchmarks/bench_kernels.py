"""Benchmark the compiled voxel kernels against the numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--points 2000000] [--repeats 5]

Two workloads: "clustered" mimics a fused LiDAR frame (dense ground annulus
plus object clusters, many points per cell) and is the case the compiled
core is built for; "scattered" is a uniform cube (nearly one point per
cell), the worst case for hash grouping. Each kernel primitive plus the
full two-stage downsample is timed once per available backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from lidarseq import _kernels
from lidarseq.accumulate import FusedCloud
from lidarseq.downsample import (
    DownsampleParams,
    density_based_downsample,
    point_based_downsample,
)


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def scattered_cloud(rng, n: int) -> np.ndarray:
    return rng.uniform(-100, 100, size=(n, 3))


def clustered_cloud(rng, n: int) -> np.ndarray:
    """Ground annulus with 1/r density plus gaussian object clusters."""
    n_ground = n // 2
    r = 2.0 * (60.0 / 2.0) ** rng.uniform(size=n_ground)
    theta = rng.uniform(0, 2 * np.pi, n_ground)
    ground = np.column_stack(
        [r * np.cos(theta), r * np.sin(theta), rng.normal(0, 0.05, n_ground)]
    )
    n_cluster = n - n_ground
    centers = rng.uniform(-60, 60, size=(200, 3))
    assign = rng.integers(0, 200, n_cluster)
    clusters = centers[assign] + rng.normal(0, 1.2, size=(n_cluster, 3))
    return np.concatenate([ground, clusters])


def as_cloud(xyz: np.ndarray, is_ref: np.ndarray) -> FusedCloud:
    n = len(xyz)
    prov = np.empty((n, 2), dtype=np.uint32)
    prov[:, 0] = np.where(is_ref, 0, 1)
    prov[:, 1] = np.arange(n, dtype=np.uint32)
    return FusedCloud(
        xyz=xyz,
        intensity=np.full(n, 0.5, dtype=np.float32),
        labels=None,
        prov=prov,
        is_ref=is_ref,
        reference_index=0,
    )


def run_workload(name: str, xyz: np.ndarray, repeats: int, backends) -> None:
    n = len(xyz)
    rng = np.random.default_rng(1)
    is_ref = rng.random(n) < 0.02
    cloud = as_cloud(xyz, is_ref)
    params = DownsampleParams(
        voxel_size=0.1,
        lower_range=0.0,
        upper_range=1000.0,
        max_voxel=150_000,
        ref_dist=400.0,
        rng_seed=1,
    )
    keys = _kernels.voxel_keys(xyz, 0.1)
    cells = _kernels.count_cells(keys)

    def scenarios():
        eligible = ~is_ref
        yield "voxel_keys", lambda: _kernels.voxel_keys(xyz, 0.1)
        yield "ref_cell_mask", lambda: _kernels.ref_cell_mask(keys, is_ref)
        yield "pick_per_cell", lambda: _kernels.pick_per_cell(keys, eligible, 7)
        yield "count_cells", lambda: _kernels.count_cells(keys)
        yield "downsample (algo 1+2)", lambda: density_based_downsample(
            point_based_downsample(cloud, params), params
        )

    results: dict[str, dict[str, float]] = {}
    original = _kernels.backend()
    try:
        for backend in backends:
            _kernels.set_backend(backend)
            for label, fn in scenarios():
                results.setdefault(label, {})[backend] = best_of(fn, repeats)
    finally:
        _kernels.set_backend(original)

    width = max(len(label) for label in results)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(f"\n[{name}] {n:,} points, {cells:,} occupied cells, best of {repeats}")
    print(header)
    print("-" * len(header))
    for label, timings in results.items():
        row = f"{label:<{width}}  " + "".join(
            f"{timings[b] * 1e3:>10.1f}ms" for b in backends
        )
        if len(backends) == 2:
            row += f"{timings['numpy'] / timings['cython']:>9.2f}x"
        print(row)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=2_000_000)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    if len(backends) == 1:
        print("compiled core not built; benchmarking the numpy fallback only")

    rng = np.random.default_rng(0)
    run_workload("clustered", clustered_cloud(rng, args.points), args.repeats, backends)
    run_workload("scattered", scattered_cloud(rng, args.points), args.repeats, backends)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
