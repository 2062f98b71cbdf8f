"""Two-stage downsampling producing the budgeted multi-scan frame.

Stage one works per voxel at the model's cell size: cells containing
reference points keep only those (accumulated neighbors would add noise
where the reference is already dense), while each purely-accumulated cell
keeps a single seeded-random point, and only inside the accumulation band
[lower_range, upper_range) where extra density is actually wanted.

Stage two enforces the voxel budget: after dropping context points that
share no coarse ``ref_dist`` cell with any reference point, it repeatedly
voxelizes at a geometrically growing window size and thins each window to
its reference points plus one random survivor, until the occupied-voxel
count at the model's cell size fits ``max_voxel``. Reference points are
never removed; if they alone exceed the budget the frame is infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels, seqio
from .accumulate import AccumMode, FusedCloud, accumulate_window
from .errors import BudgetInfeasible
from .geom import radius
from .seqio import ScanRecord
from .window import WindowParams, select_window

# Stage tags folded into the per-cell RNG key so the point-based pick and
# each density round draw independent choices.
_STAGE_POINT = 1
_STAGE_DENSITY = 2


@dataclass(frozen=True)
class DownsampleParams:
    voxel_size: float
    lower_range: float
    upper_range: float
    max_voxel: int
    ref_dist: float
    rng_seed: int = 0
    window_growth: float = 2.0

    def __post_init__(self) -> None:
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be > 0")
        if not 0 <= self.lower_range < self.upper_range:
            raise ValueError("need 0 <= lower_range < upper_range")
        if self.max_voxel < 1:
            raise ValueError("max_voxel must be a positive integer")
        if self.ref_dist <= self.voxel_size:
            raise ValueError("ref_dist must exceed voxel_size")
        if self.window_growth <= 1:
            raise ValueError("window_growth must be > 1")


@dataclass
class MultiScanFrame:
    """Downsampled fused cloud for one reference timestamp."""

    cloud: FusedCloud
    reference_index: int
    params: DownsampleParams

    def __len__(self) -> int:
        return len(self.cloud)


def point_based_downsample(cloud: FusedCloud, params: DownsampleParams) -> FusedCloud:
    """Per-voxel thinning: reference cells keep reference points only;
    other cells keep one random point if it falls in the accumulation band."""
    keys = _kernels.voxel_keys(cloud.xyz, params.voxel_size)
    in_ref_cell = _kernels.ref_cell_mask(keys, cloud.is_ref)
    seed = _kernels.derive_seed(params.rng_seed, cloud.reference_index, _STAGE_POINT)
    picked = _kernels.pick_per_cell(keys, ~in_ref_cell, seed)
    r = radius(cloud.xyz)
    in_band = (r >= params.lower_range) & (r < params.upper_range)
    keep = (in_ref_cell & cloud.is_ref) | (picked & in_band)
    return cloud.take(keep)


def coarse_reference_filter(cloud: FusedCloud, ref_dist: float) -> FusedCloud:
    """Drop points whose coarse ``ref_dist`` cell holds no reference point."""
    if ref_dist <= 0:
        raise ValueError("ref_dist must be > 0")
    keys = _kernels.voxel_keys(cloud.xyz, ref_dist)
    return cloud.take(_kernels.ref_cell_mask(keys, cloud.is_ref))


def occupied_voxels(cloud: FusedCloud, cell_size: float) -> int:
    return _kernels.count_cells(_kernels.voxel_keys(cloud.xyz, cell_size))


def density_based_downsample(
    cloud: FusedCloud, params: DownsampleParams
) -> MultiScanFrame:
    """Iterative window thinning until the voxel budget holds.

    Expects the output of :func:`point_based_downsample`. Raises
    BudgetInfeasible when the reference points alone occupy more than
    ``max_voxel`` cells; the budget is never silently violated.
    """
    cloud = coarse_reference_filter(cloud, params.ref_dist)

    ref_cells = occupied_voxels(cloud.take(cloud.is_ref), params.voxel_size)
    if ref_cells > params.max_voxel:
        raise BudgetInfeasible(
            f"frame {cloud.reference_index}: reference points occupy "
            f"{ref_cells} voxels at {params.voxel_size} m, over the "
            f"max_voxel budget of {params.max_voxel}"
        )

    window_size = params.voxel_size
    round_no = 0
    while occupied_voxels(cloud, params.voxel_size) > params.max_voxel:
        round_no += 1
        window_size *= params.window_growth
        wkeys = _kernels.voxel_keys(cloud.xyz, window_size)
        seed = _kernels.derive_seed(
            params.rng_seed, cloud.reference_index, _STAGE_DENSITY, round_no
        )
        picked = _kernels.pick_per_cell(wkeys, ~cloud.is_ref, seed)
        kept = cloud.is_ref | picked
        if bool(kept.all()) and _kernels.count_cells(wkeys) == 1:
            # A single window covers the scene and holds at most one
            # non-reference survivor; only dropping it can meet the budget.
            cloud = cloud.take(cloud.is_ref)
            break
        cloud = cloud.take(kept)

    return MultiScanFrame(
        cloud=cloud, reference_index=cloud.reference_index, params=params
    )


def preprocess_frame(
    scans: Sequence[ScanRecord],
    ref_idx: int,
    window_params: WindowParams,
    mode: AccumMode,
    ds_params: DownsampleParams,
    mask_lookup: Callable[[int], np.ndarray | None] | None = None,
) -> MultiScanFrame:
    """Full per-frame pipeline: window -> accumulate -> both downsamplers."""
    poses = [s.pose for s in scans]
    win = select_window(poses, ref_idx, window_params)
    window_scans = [scans[i] for i in win.selected]
    masks: Mapping[int, np.ndarray] | None = None
    if mode is AccumMode.NON_SMEARING and mask_lookup is not None:
        masks = {
            i: m for i in win.selected if (m := mask_lookup(i)) is not None
        }
    fused = accumulate_window(window_scans, scans[ref_idx], mode, masks)
    thinned = point_based_downsample(fused, ds_params)
    return density_based_downsample(thinned, ds_params)


def frame_paths(out_root, sequence: str, reference_index: int) -> dict[str, Path]:
    """Output layout: <out>/<seq>/{points,labels,prov}/<frame>.<ext>."""
    base = Path(out_root) / sequence
    name = seqio.frame_name(reference_index)
    return {
        "points": base / "points" / (name + seqio.SCAN_SUFFIX),
        "labels": base / "labels" / (name + seqio.LABEL_SUFFIX),
        "prov": base / "prov" / (name + seqio.PROV_SUFFIX),
    }


def write_frame(out_root, sequence: str, frame: MultiScanFrame) -> dict[str, Path]:
    """Write a frame's point file, label file (if labeled) and sidecar."""
    paths = frame_paths(out_root, sequence, frame.reference_index)
    cloud = frame.cloud
    for key, path in paths.items():
        if key == "labels" and cloud.labels is None:
            continue
        path.parent.mkdir(parents=True, exist_ok=True)
    points = np.column_stack(
        [cloud.xyz.astype(np.float32), cloud.intensity.astype(np.float32)]
    )
    seqio.write_points(paths["points"], points)
    if cloud.labels is not None:
        seqio.write_labels(paths["labels"], cloud.labels)
    seqio.write_provenance(paths["prov"], cloud.prov)
    return paths
