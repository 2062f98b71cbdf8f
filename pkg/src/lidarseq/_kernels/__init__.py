"""Voxel hot kernels with a compiled core and a numpy fallback.

The compiled Cython core is used when the extension built; otherwise the
numpy implementation takes over with identical results. The active backend
can be forced with the ``LIDARSEQ_KERNELS`` environment variable
(``cython`` or ``numpy``) or swapped at runtime with :func:`set_backend`,
which is what the benchmark in ``benchmarks/bench_kernels.py`` does.
"""

from __future__ import annotations

import os

import numpy as np

from . import _numpy

try:
    from . import _core
except ImportError:
    _core = None

PACK_BITS = _numpy.PACK_BITS
PACK_OFFSET = _numpy.PACK_OFFSET

_BACKENDS = {"numpy": _numpy}
if _core is not None:
    _BACKENDS["cython"] = _core

_MASK64 = 0xFFFFFFFFFFFFFFFF


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _initial_backend() -> str:
    forced = os.environ.get("LIDARSEQ_KERNELS")
    if forced:
        if forced not in _BACKENDS:
            raise ImportError(
                f"LIDARSEQ_KERNELS={forced!r} but available backends are "
                f"{available_backends()}"
            )
        return forced
    return "cython" if _core is not None else "numpy"


_backend_name = _initial_backend()
_impl = _BACKENDS[_backend_name]


def backend() -> str:
    """Name of the active kernel backend."""
    return _backend_name


def set_backend(name: str) -> None:
    global _backend_name, _impl
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    _backend_name = name
    _impl = _BACKENDS[name]


def voxel_keys(xyz: np.ndarray, cell_size: float) -> np.ndarray:
    return _impl.voxel_keys(xyz, cell_size)


def ref_cell_mask(keys: np.ndarray, is_ref: np.ndarray) -> np.ndarray:
    return _impl.ref_cell_mask(keys, is_ref)


def pick_per_cell(keys: np.ndarray, eligible: np.ndarray, seed: int) -> np.ndarray:
    return _impl.pick_per_cell(keys, eligible, seed)


def count_cells(keys: np.ndarray) -> int:
    return _impl.count_cells(keys)


def unpack_keys(keys: np.ndarray) -> np.ndarray:
    """Inverse of the key packing: (N,) int64 -> (N, 3) integer grid indices."""
    keys = np.asarray(keys, dtype=np.int64).astype(np.uint64)
    field = np.uint64((1 << PACK_BITS) - 1)
    out = np.empty((keys.shape[0], 3), dtype=np.int64)
    out[:, 0] = (keys >> np.uint64(2 * PACK_BITS)).astype(np.int64) - PACK_OFFSET
    out[:, 1] = ((keys >> np.uint64(PACK_BITS)) & field).astype(np.int64) - PACK_OFFSET
    out[:, 2] = (keys & field).astype(np.int64) - PACK_OFFSET
    return out


def _mix64_scalar(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integer parts (seed, scan index, stage, round, ...) into one seed."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = _mix64_scalar(h ^ (int(p) & _MASK64))
    return h
