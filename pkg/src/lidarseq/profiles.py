"""Built-in dataset profiles and their pipeline defaults."""

from __future__ import annotations

from dataclasses import dataclass

from .downsample import DownsampleParams
from .window import WindowParams


@dataclass(frozen=True)
class Profile:
    name: str
    voxel_size: float
    accumulate_length: int
    min_dist: float
    max_voxel: int
    ref_dist: float
    lower_range: float
    upper_range: float
    num_classes: int
    moving_classes: frozenset[int]
    ignore_class: int = 0

    def window_params(self) -> WindowParams:
        return WindowParams(
            accumulate_length=self.accumulate_length, min_dist=self.min_dist
        )

    def downsample_params(
        self, rng_seed: int = 0, window_growth: float = 2.0
    ) -> DownsampleParams:
        return DownsampleParams(
            voxel_size=self.voxel_size,
            lower_range=self.lower_range,
            upper_range=self.upper_range,
            max_voxel=self.max_voxel,
            ref_dist=self.ref_dist,
            rng_seed=rng_seed,
            window_growth=window_growth,
        )


PROFILES = {
    # SemanticKITTI: 19 classes, moving-* raw semantic ids 252..259,
    # segmentation clipped at 51.2 m.
    "semantickitti": Profile(
        name="semantickitti",
        voxel_size=0.05,
        accumulate_length=20,
        min_dist=2.0,
        max_voxel=180_000,
        ref_dist=5.0,
        lower_range=20.0,
        upper_range=51.2,
        num_classes=19,
        moving_classes=frozenset(range(252, 260)),
    ),
    # nuScenes lidarseg: 16 classes, no motion split in the labels (masks
    # must come from files), range ~120 m.
    "nuscenes": Profile(
        name="nuscenes",
        voxel_size=0.1,
        accumulate_length=40,
        min_dist=2.0,
        max_voxel=120_000,
        ref_dist=5.0,
        lower_range=20.0,
        upper_range=120.0,
        num_classes=16,
        moving_classes=frozenset(),
    ),
}


def get_profile(name: str) -> Profile:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(
            f"unknown profile {name!r}; available: {', '.join(sorted(PROFILES))}"
        ) from None
