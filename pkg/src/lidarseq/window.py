"""Distance-based selection of the accumulation window around a reference scan.

Temporal closeness is deliberately not the criterion: a stationary vehicle
produces many near-identical scans that add no context. Instead, greedy
chains walk outward from the reference in both temporal directions,
accepting a scan only when it has moved at least ``min_dist`` meters from
the previously accepted one, and the closest-in-translation candidates win.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import Pose


@dataclass(frozen=True)
class WindowParams:
    accumulate_length: int
    min_dist: float

    def __post_init__(self) -> None:
        if self.accumulate_length < 1:
            raise ValueError("accumulate_length must be a positive integer")
        if self.min_dist <= 0:
            raise ValueError("min_dist must be > 0 meters")


@dataclass(frozen=True)
class ScanWindow:
    """Reference scan index plus the selected scans, in selection order."""

    reference: int
    selected: tuple[int, ...]

    @property
    def past(self) -> tuple[int, ...]:
        return tuple(i for i in self.selected if i < self.reference)

    @property
    def future(self) -> tuple[int, ...]:
        return tuple(i for i in self.selected if i > self.reference)


def _chain(translations: np.ndarray, ref_idx: int, step: int, min_dist: float):
    accepted = []
    anchor = translations[ref_idx]
    i = ref_idx + step
    while 0 <= i < len(translations):
        if np.linalg.norm(translations[i] - anchor) >= min_dist:
            accepted.append(i)
            anchor = translations[i]
        i += step
    return accepted


def select_window(poses: list[Pose], ref_idx: int, params: WindowParams) -> ScanWindow:
    """Pick up to ``accumulate_length`` scans around the reference.

    Candidates come from the two greedy min_dist chains (past and future);
    of those, the closest in translation distance to the reference win.
    Ties break toward the smaller temporal offset, then past before future.
    """
    if not 0 <= ref_idx < len(poses):
        raise IndexError(f"reference index {ref_idx} out of range 0..{len(poses) - 1}")
    translations = np.array([p.translation for p in poses])
    candidates = _chain(translations, ref_idx, -1, params.min_dist) + _chain(
        translations, ref_idx, +1, params.min_dist
    )

    def rank(i: int):
        dist = float(np.linalg.norm(translations[i] - translations[ref_idx]))
        return (dist, abs(i - ref_idx), 0 if i < ref_idx else 1)

    selected = sorted(candidates, key=rank)[: params.accumulate_length]
    return ScanWindow(reference=ref_idx, selected=tuple(selected))
