"""Packet occupancy over the square lattice {-m..m}^2.

Every cell holds one byte; bit ``i`` is set once packet ``i`` has visited
the cell. A cell whose byte equals ``full_mask`` lies in the joint
intersection of all packets, so detection is a single OR and compare.

Two storage back-ends share the kernel-level signature
``visit(cells, meta, x, y, bit, full) -> bool``:

* dense: a ``(2m+1, 2m+1)`` uint8 array;
* sparse: a numba typed dict keyed by the flattened cell index, for boxes
  too large to allocate.

``meta[0]`` is the largest box half-length advanced into since the last
reset. All recorded cells lie strictly inside that box, so a reset only
clears that square rather than the whole allocation.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict

MAX_PACKETS = 8
SPARSE_THRESHOLD = 1 << 15


@njit(inline="always")
def dense_visit(cells, meta, x, y, bit, full):
    m = meta[1]
    c = cells[y + m, x + m]
    nc = c | bit
    if nc == c:
        return False
    cells[y + m, x + m] = nc
    return nc == full


@njit
def sparse_visit(cells, meta, x, y, bit, full):
    m = meta[1]
    key = (y + m) * (2 * m + 1) + (x + m)
    c = cells.get(key, np.uint8(0))
    nc = np.uint8(c | bit)
    if nc == c:
        return False
    cells[key] = nc
    return nc == full


@njit
def dense_reset(cells, meta):
    m = meta[1]
    e = min(meta[0], m)
    if e > 0:
        cells[m - e:m + e + 1, m - e:m + e + 1] = 0
    meta[0] = 0


@njit
def sparse_reset(cells, meta):
    cells.clear()
    meta[0] = 0


@njit
def _dense_get(cells, meta, x, y):
    m = meta[1]
    return cells[y + m, x + m]


@njit
def _sparse_get(cells, meta, x, y):
    m = meta[1]
    return cells.get((y + m) * (2 * m + 1) + (x + m), np.uint8(0))


@njit
def _sparse_items(cells):
    keys = np.empty(len(cells), dtype=np.int64)
    vals = np.empty(len(cells), dtype=np.uint8)
    i = 0
    for k, v in cells.items():
        keys[i] = k
        vals[i] = v
        i += 1
    return keys, vals


@njit
def _sparse_load(cells, keys, vals):
    for i in range(keys.shape[0]):
        cells[keys[i]] = vals[i]


def full_mask_for(p: int) -> int:
    return (1 << p) - 1


class OccupancyGrid:
    """Per-sample visitation masks for ``p`` packets on {-m..m}^2.

    The dense layout costs exactly ``(2m+1)**2`` bytes. Pass
    ``sparse=True`` (or let :func:`make_grid` decide) for boxes that do
    not fit in memory.
    """

    def __init__(self, half_length: int, p: int, sparse: bool = False):
        if half_length < 1:
            raise ValueError(f"half_length must be positive, got {half_length}")
        if not 1 <= p <= MAX_PACKETS:
            raise ValueError(f"need 1 <= p <= {MAX_PACKETS}, got {p}")
        self.half_length = int(half_length)
        self.p = int(p)
        self.full_mask = np.uint8(full_mask_for(p))
        self.sparse = bool(sparse)
        self.meta = np.array([0, self.half_length], dtype=np.int64)
        if self.sparse:
            self.cells = Dict.empty(key_type=types.int64, value_type=types.uint8)
            self.visit_fn = sparse_visit
            self._reset = sparse_reset
            self._get = _sparse_get
        else:
            side = 2 * self.half_length + 1
            self.cells = np.zeros((side, side), dtype=np.uint8)
            self.visit_fn = dense_visit
            self._reset = dense_reset
            self._get = _dense_get

    @property
    def nbytes(self) -> int:
        if self.sparse:
            return len(self.cells)
        return self.cells.nbytes

    def _check(self, cell) -> tuple[int, int]:
        x, y = int(cell[0]), int(cell[1])
        m = self.half_length
        if abs(x) > m or abs(y) > m:
            raise IndexError(f"cell {cell} outside grid of half-length {m}")
        return x, y

    def record_visit(self, cell, packet: int) -> bool:
        """Mark ``cell`` as visited by ``packet``.

        Returns True iff this call completed the cell's mask, i.e. the cell
        has just become a p-fold intersection point.
        """
        if not 0 <= packet < self.p:
            raise IndexError(f"packet {packet} outside [0, {self.p})")
        x, y = self._check(cell)
        self.meta[0] = max(self.meta[0], max(abs(x), abs(y)) + 1)
        return bool(self.visit_fn(self.cells, self.meta, x, y,
                                  np.uint8(1 << packet), self.full_mask))

    def mask(self, cell) -> int:
        x, y = self._check(cell)
        return int(self._get(self.cells, self.meta, x, y))

    def reset(self) -> None:
        """Restore all-zero masks (only the touched square is cleared)."""
        self._reset(self.cells, self.meta)

    def nonzero_cells(self) -> dict[tuple[int, int], int]:
        """Every cell with a non-empty mask; intended for tests and small grids."""
        m = self.half_length
        if self.sparse:
            keys, vals = _sparse_items(self.cells)
            side = 2 * m + 1
            return {(int(k % side) - m, int(k // side) - m): int(v)
                    for k, v in zip(keys, vals)}
        ys, xs = np.nonzero(self.cells)
        return {(int(x) - m, int(y) - m): int(self.cells[y, x]) for y, x in zip(ys, xs)}

    def snapshot(self) -> "GridSnapshot":
        """Copy the touched region (the square of half-length ``meta[0]``)."""
        e = int(self.meta[0])
        if self.sparse:
            keys, vals = _sparse_items(self.cells)
            return GridSnapshot(e, None, keys, vals)
        m = self.half_length
        block = self.cells[m - e:m + e + 1, m - e:m + e + 1].copy() if e else None
        return GridSnapshot(e, block, None, None)

    def restore(self, snap: "GridSnapshot") -> None:
        """Reset, then load a snapshot taken from a grid of the same kind."""
        self.reset()
        e = snap.extent
        if e > self.half_length:
            raise ValueError("snapshot extent exceeds this grid")
        if self.sparse:
            if snap.keys is None:
                raise ValueError("dense snapshot cannot be restored into a sparse grid")
            _sparse_load(self.cells, snap.keys, snap.values)
        elif snap.block is not None:
            m = self.half_length
            self.cells[m - e:m + e + 1, m - e:m + e + 1] = snap.block
        self.meta[0] = e


class GridSnapshot:
    __slots__ = ("extent", "block", "keys", "values")

    def __init__(self, extent, block, keys, values):
        self.extent = extent
        self.block = block
        self.keys = keys
        self.values = values

    def has_full_cell(self, full_mask: int) -> bool:
        if self.block is not None:
            return bool((self.block == full_mask).any())
        if self.values is not None:
            return bool((self.values == full_mask).any())
        return False


def dense_bytes(half_length: int) -> int:
    return (2 * half_length + 1) ** 2


def make_grid(half_length: int, p: int, memory_budget: int | None = None,
              force_sparse: bool = False) -> OccupancyGrid:
    """Dense grid when it fits ``memory_budget`` bytes, sparse otherwise."""
    sparse = force_sparse
    if memory_budget is not None and dense_bytes(half_length) > memory_budget:
        sparse = True
    try:
        return OccupancyGrid(half_length, p, sparse=sparse)
    except MemoryError as exc:
        raise MemoryError(
            f"cannot allocate {dense_bytes(half_length)} bytes for a dense grid "
            f"of half-length {half_length}; use the sparse mode") from exc


def intersection_nonempty(visited_sets) -> bool:
    """Brute-force check whether some cell lies in every one of the sets."""
    sets = [set(map(tuple, s)) for s in visited_sets]
    if len(sets) < 2:
        raise ValueError("need at least two packets")
    sets.sort(key=len)
    common = sets[0]
    for s in sets[1:]:
        common = common & s
        if not common:
            return False
    return bool(common)
