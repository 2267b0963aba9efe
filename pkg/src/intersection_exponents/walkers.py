"""Nearest-neighbour random walks on Z^2 grouped into packets.

A sample runs in two phases. First, every walker leaves the origin and is
stopped on the boundary of the ``L0`` box; nothing is recorded (all walkers
share the origin, so this phase only produces starting points). Then, level
by level, each walker is run from its current boundary point to the boundary
of the next box while its packet bit is OR-ed into every interior cell it
steps on.

Walkers of one level are run one after the other. The survival verdict
depends only on the traces, not on their interleaving, so this is
statistically identical to a simultaneous run, and it keeps memory access
local.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import MAX_PACKETS, OccupancyGrid
from .rng import DX, DY, kernel_args, store_state


@dataclass(frozen=True)
class PacketSpec:
    """Packet sizes (n_1, ..., n_p), kept in nondecreasing order."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if len(counts) < 2:
            raise ValueError(f"need at least p=2 packets, got {counts}")
        if len(counts) > MAX_PACKETS:
            raise ValueError(f"at most {MAX_PACKETS} packets are supported, got {len(counts)}")
        if any(n < 1 for n in counts):
            raise ValueError(f"packet sizes must be positive, got {counts}")
        object.__setattr__(self, "counts", tuple(sorted(counts)))

    @classmethod
    def parse(cls, text: str) -> "PacketSpec":
        parts = [t for t in text.replace(" ", "").split(",") if t]
        try:
            return cls(tuple(int(t) for t in parts))
        except ValueError as exc:
            raise ValueError(f"invalid packet list {text!r}: {exc}") from None

    @property
    def p(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def packet_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.p, dtype=np.int64), self.counts)

    def walker_bits(self) -> np.ndarray:
        return (1 << self.packet_of()).astype(np.uint8)

    def __str__(self) -> str:
        return ",".join(map(str, self.counts))


@dataclass
class WalkerEnsemble:
    xs: np.ndarray
    ys: np.ndarray
    packet_of: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return np.stack([self.xs, self.ys], axis=1)

    def copy(self) -> "WalkerEnsemble":
        return WalkerEnsemble(self.xs.copy(), self.ys.copy(), self.packet_of.copy())


class Outcome(enum.Enum):
    SURVIVED = "survived"
    INTERSECTED = "intersected"


# ---------------------------------------------------------------- kernels


@njit(nogil=True)
def scatter_kernel(xs, ys, L0, draw, s, aux):
    for w in range(xs.shape[0]):
        x = 0
        y = 0
        while abs(x) < L0 and abs(y) < L0:
            s, d = draw(s, aux)
            x += DX[d]
            y += DY[d]
        xs[w] = x
        ys[w] = y
    return s


@njit(nogil=True)
def advance_kernel(xs, ys, bits, full, L, cells, meta, visit, draw, s, aux, record_entry):
    """Run every walker to the L box boundary; True on the first full cell."""
    if L > meta[0]:
        meta[0] = L
    for w in range(xs.shape[0]):
        x = xs[w]
        y = ys[w]
        bit = bits[w]
        if record_entry and visit(cells, meta, x, y, bit, full):
            return s, True
        while True:
            s, d = draw(s, aux)
            x += DX[d]
            y += DY[d]
            if abs(x) >= L or abs(y) >= L:
                break
            if visit(cells, meta, x, y, bit, full):
                xs[w] = x
                ys[w] = y
                return s, True
        xs[w] = x
        ys[w] = y
    return s, False


@njit(nogil=True)
def sample_kernel(xs, ys, bits, full, levels, cells, meta, visit, draw, s, aux, record_entry):
    """Scatter, then climb the schedule; returns (state, last level survived)."""
    s = scatter_kernel(xs, ys, levels[0], draw, s, aux)
    for k in range(1, levels.shape[0]):
        s, dead = advance_kernel(xs, ys, bits, full, levels[k], cells, meta,
                                 visit, draw, s, aux, record_entry)
        if dead:
            return s, k - 1
    return s, levels.shape[0] - 1


# ---------------------------------------------------------------- wrappers


def scatter_from_origin(spec: PacketSpec, L0: int, stream, rule: str = "top") -> WalkerEnsemble:
    """Start all walkers at the origin and stop each on the boundary of the L0 box."""
    if L0 < 2:
        raise ValueError(f"L0 must be at least 2, got {L0}")
    xs = np.zeros(spec.total, dtype=np.int64)
    ys = np.zeros(spec.total, dtype=np.int64)
    draw, s, aux = kernel_args(stream, rule)
    s = scatter_kernel(xs, ys, np.int64(L0), draw, s, aux)
    store_state(stream, s)
    return WalkerEnsemble(xs, ys, spec.packet_of())


def advance_level(ensemble: WalkerEnsemble, L: int, grid: OccupancyGrid, stream,
                  record_entry: bool = False, rule: str = "top") -> Outcome:
    """Run the ensemble out to the boundary of the L box, recording visits.

    Stops at the first cell that every packet has visited and returns
    ``Outcome.INTERSECTED``; the walkers are then left where they were.
    """
    if L > grid.half_length:
        raise ValueError(f"L={L} exceeds grid half-length {grid.half_length}")
    norms = np.maximum(np.abs(ensemble.xs), np.abs(ensemble.ys))
    if norms.size and norms.max() >= L:
        raise ValueError(f"walkers must start strictly inside the L={L} box")
    if ensemble.packet_of.size and ensemble.packet_of.max() >= grid.p:
        raise ValueError("ensemble has more packets than the grid")
    bits = (1 << ensemble.packet_of).astype(np.uint8)
    draw, s, aux = kernel_args(stream, rule)
    s, dead = advance_kernel(ensemble.xs, ensemble.ys, bits, grid.full_mask, np.int64(L),
                             grid.cells, grid.meta, grid.visit_fn, draw, s, aux,
                             bool(record_entry))
    store_state(stream, s)
    return Outcome.INTERSECTED if dead else Outcome.SURVIVED
