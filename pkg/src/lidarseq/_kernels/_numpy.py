"""Pure-numpy implementations of the voxel kernels.

Bit-for-bit equivalent to the compiled core in ``_core.pyx``;
``tests/test_kernels.py`` asserts parity on randomized inputs.
"""

from __future__ import annotations

import numpy as np

PACK_BITS = 21
PACK_OFFSET = 1 << (PACK_BITS - 1)

_U64 = np.uint64


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer, vectorized over uint64
    z = x + _U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def voxel_keys(xyz: np.ndarray, cell_size: float) -> np.ndarray:
    """Packed int64 floor-grid key per point.

    Keys encode (floor(x/s), floor(y/s), floor(z/s)) with 21 bits per signed
    axis index, so the grid spans +-(2^20 - 1) cells around the origin.
    """
    xyz = np.asarray(xyz)
    if xyz.ndim != 2 or xyz.shape[1] < 3:
        raise ValueError("expected an (N, 3) coordinate array")
    coords = xyz[:, :3].astype(np.float64, copy=False)
    if coords.size and not np.isfinite(coords).all():
        raise ValueError("coordinates contain NaN or Inf")
    idx = np.floor(coords / cell_size).astype(np.int64)
    if idx.size and (idx.min() < -PACK_OFFSET or idx.max() >= PACK_OFFSET):
        raise ValueError(
            f"voxel index out of packable range +-{PACK_OFFSET} "
            f"(cell_size={cell_size})"
        )
    shifted = (idx + PACK_OFFSET).astype(_U64)
    packed = (
        (shifted[:, 0] << _U64(2 * PACK_BITS))
        | (shifted[:, 1] << _U64(PACK_BITS))
        | shifted[:, 2]
    )
    return packed.astype(np.int64)


def ref_cell_mask(keys: np.ndarray, is_ref: np.ndarray) -> np.ndarray:
    """Per point: True iff its cell contains at least one reference point."""
    keys = np.asarray(keys, dtype=np.int64)
    is_ref = np.asarray(is_ref, dtype=bool)
    if keys.shape != is_ref.shape:
        raise ValueError("keys and is_ref must have equal length")
    ref_keys = np.unique(keys[is_ref])
    return np.isin(keys, ref_keys)


def pick_per_cell(keys: np.ndarray, eligible: np.ndarray, seed: int) -> np.ndarray:
    """Mark one seeded-random eligible point per cell.

    The survivor of a cell is the ``h % n``-th eligible member in input
    order, with ``h`` a hash of the cell key and ``seed``; results therefore
    depend only on the key, the seed and the eligible membership.
    """
    keys = np.asarray(keys, dtype=np.int64)
    eligible = np.asarray(eligible, dtype=bool)
    if keys.shape != eligible.shape:
        raise ValueError("keys and eligible must have equal length")
    out = np.zeros(keys.shape[0], dtype=bool)
    idx = np.flatnonzero(eligible)
    if idx.size == 0:
        return out
    sub = keys[idx]
    order = np.argsort(sub, kind="stable")
    sorted_keys = sub[order]
    starts = np.flatnonzero(
        np.concatenate(([True], sorted_keys[1:] != sorted_keys[:-1]))
    )
    counts = np.diff(np.append(starts, sorted_keys.size))
    h = _mix64(sorted_keys[starts].astype(_U64) ^ _U64(seed & 0xFFFFFFFFFFFFFFFF))
    pos = (h % counts.astype(_U64)).astype(np.int64)
    out[idx[order[starts + pos]]] = True
    return out


def count_cells(keys: np.ndarray) -> int:
    """Number of distinct occupied cells."""
    keys = np.asarray(keys, dtype=np.int64)
    return int(np.unique(keys).size)
