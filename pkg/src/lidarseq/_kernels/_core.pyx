# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled voxel kernels: open-addressing hash grouping.

Must stay bit-for-bit equivalent to ``_numpy.py``. Packed keys are always
non-negative, so -1 serves as the empty-slot sentinel.
"""

from libc.math cimport floor, isfinite
from libc.stdint cimport int64_t, uint64_t, uint8_t
from libcpp.vector cimport vector

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF PACK_BITS = 21
DEF PACK_OFFSET = 1048576  # 1 << (PACK_BITS - 1)
DEF EMPTY = -1


cdef inline uint64_t _mix64(uint64_t x) nogil:
    cdef uint64_t z = x + <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline uint64_t _capacity_for(Py_ssize_t n) nogil:
    # power of two, load factor <= 0.5
    cdef uint64_t cap = 16
    while cap < <uint64_t>(2 * n):
        cap <<= 1
    return cap


cdef inline Py_ssize_t _probe(vector[int64_t]& slots, uint64_t mask,
                              int64_t key) nogil:
    cdef uint64_t h = _mix64(<uint64_t>key) & mask
    while slots[h] != EMPTY and slots[h] != key:
        h = (h + 1) & mask
    return <Py_ssize_t>h


def voxel_keys(xyz, double cell_size):
    arr = np.asarray(xyz)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise ValueError("expected an (N, 3) coordinate array")
    cdef double[:, :] c = np.ascontiguousarray(arr[:, :3], dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    cdef Py_ssize_t p
    cdef double v
    cdef int64_t i, j, k
    cdef int axis
    with nogil:
        for p in range(n):
            for axis in range(3):
                v = c[p, axis]
                if not isfinite(v):
                    with gil:
                        raise ValueError("coordinates contain NaN or Inf")
            i = <int64_t>floor(c[p, 0] / cell_size)
            j = <int64_t>floor(c[p, 1] / cell_size)
            k = <int64_t>floor(c[p, 2] / cell_size)
            if (i < -PACK_OFFSET or i >= PACK_OFFSET or
                    j < -PACK_OFFSET or j >= PACK_OFFSET or
                    k < -PACK_OFFSET or k >= PACK_OFFSET):
                with gil:
                    raise ValueError(
                        "voxel index out of packable range +-%d (cell_size=%g)"
                        % (PACK_OFFSET, cell_size))
            out[p] = <int64_t>(
                ((<uint64_t>(i + PACK_OFFSET)) << (2 * PACK_BITS))
                | ((<uint64_t>(j + PACK_OFFSET)) << PACK_BITS)
                | (<uint64_t>(k + PACK_OFFSET)))
    return out_arr


def ref_cell_mask(keys, is_ref):
    cdef int64_t[::1] k = np.ascontiguousarray(keys, dtype=np.int64)
    cdef uint8_t[::1] r = np.ascontiguousarray(is_ref, dtype=np.uint8)
    cdef Py_ssize_t n = k.shape[0]
    if r.shape[0] != n:
        raise ValueError("keys and is_ref must have equal length")
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr
    cdef Py_ssize_t p, slot, n_ref = 0
    cdef uint64_t mask
    cdef vector[int64_t] slots
    with nogil:
        for p in range(n):
            if r[p]:
                n_ref += 1
        mask = _capacity_for(n_ref if n_ref > 0 else 1) - 1
        slots.assign(mask + 1, EMPTY)
        for p in range(n):
            if r[p]:
                slots[_probe(slots, mask, k[p])] = k[p]
        for p in range(n):
            if slots[_probe(slots, mask, k[p])] == k[p]:
                out[p] = 1
    return out_arr.view(np.bool_)


def pick_per_cell(keys, eligible, seed):
    cdef int64_t[::1] k = np.ascontiguousarray(keys, dtype=np.int64)
    cdef uint8_t[::1] e = np.ascontiguousarray(eligible, dtype=np.uint8)
    cdef Py_ssize_t n = k.shape[0]
    if e.shape[0] != n:
        raise ValueError("keys and eligible must have equal length")
    cdef uint64_t s = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] out = out_arr
    cdef vector[int64_t] slots
    cdef vector[uint64_t] counts, seen
    cdef Py_ssize_t p, slot
    cdef uint64_t mask
    with nogil:
        mask = _capacity_for(n if n > 0 else 1) - 1
        slots.assign(mask + 1, EMPTY)
        counts.assign(mask + 1, 0)
        seen.assign(mask + 1, 0)
        for p in range(n):
            if e[p]:
                slot = _probe(slots, mask, k[p])
                slots[slot] = k[p]
                counts[slot] += 1
        for p in range(n):
            if not e[p]:
                continue
            slot = _probe(slots, mask, k[p])
            if seen[slot] == _mix64((<uint64_t>k[p]) ^ s) % counts[slot]:
                out[p] = 1
            seen[slot] += 1
    return out_arr.view(np.bool_)


def count_cells(keys):
    cdef int64_t[::1] k = np.ascontiguousarray(keys, dtype=np.int64)
    cdef Py_ssize_t n = k.shape[0]
    cdef vector[int64_t] slots
    cdef Py_ssize_t p, slot, distinct = 0
    cdef uint64_t mask
    with nogil:
        mask = _capacity_for(n if n > 0 else 1) - 1
        slots.assign(mask + 1, EMPTY)
        for p in range(n):
            slot = _probe(slots, mask, k[p])
            if slots[slot] == EMPTY:
                slots[slot] = k[p]
                distinct += 1
    return distinct
