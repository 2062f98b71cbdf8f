"""Sparse voxelization shared by both downsampling algorithms.

Cells are world-frame axis-aligned cubes anchored at the origin with floor
indexing, so -0.01 / 0.05 lands in cell -1, not 0. The grid maps each
occupied cell to its member point indices in input order.
"""

from __future__ import annotations

from typing import Iterator, NamedTuple

import numpy as np

from . import _kernels
from .errors import NonPositiveCellSize


class VoxelKey(NamedTuple):
    i: int
    j: int
    k: int


class VoxelGrid:
    """Sparse integer-keyed grid: occupied cell -> member point indices."""

    def __init__(self, cell_size: float, point_keys: np.ndarray) -> None:
        self.cell_size = float(cell_size)
        self.point_keys = point_keys
        order = np.argsort(point_keys, kind="stable")
        sorted_keys = point_keys[order]
        if sorted_keys.size:
            starts = np.flatnonzero(
                np.concatenate(([True], sorted_keys[1:] != sorted_keys[:-1]))
            )
        else:
            starts = np.empty(0, dtype=np.int64)
        self._order = order
        self._starts = starts
        self._ends = np.append(starts[1:], sorted_keys.size)
        self.keys = sorted_keys[starts] if sorted_keys.size else sorted_keys

    def __len__(self) -> int:
        return int(self.keys.size)

    @property
    def n_points(self) -> int:
        return int(self.point_keys.size)

    def cells(self) -> Iterator[tuple[VoxelKey, np.ndarray]]:
        """Yield (key, member indices) per occupied cell, keys ascending."""
        unpacked = _kernels.unpack_keys(self.keys)
        for c in range(len(self)):
            members = self._order[self._starts[c] : self._ends[c]]
            yield VoxelKey(*unpacked[c]), members

    def centers(self) -> np.ndarray:
        """(C, 3) float64 centers of the occupied cells."""
        return (_kernels.unpack_keys(self.keys) + 0.5) * self.cell_size


def voxelize(points: np.ndarray, cell_size: float) -> VoxelGrid:
    """Bucket points into a sparse grid of ``cell_size`` cubes."""
    if cell_size <= 0:
        raise NonPositiveCellSize(f"cell_size must be > 0, got {cell_size}")
    points = np.asarray(points)
    keys = _kernels.voxel_keys(points, cell_size)
    return VoxelGrid(cell_size, keys)
