"""Nested-box survival campaign (scheme 1).

Each sample is scattered to the L_0 box and then pushed through the box
schedule until the packets first share a cell. ``N_k`` counts the samples
that survived level ``k``. Sample ``i`` always draws from
``spawn_stream(base_seed, i)``, so the counts do not depend on how samples
are distributed over workers or on checkpoint boundaries.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numba import njit

from .lattice import make_grid, OccupancyGrid, dense_reset, sparse_reset
from .rng import DIRECTION_RULES, kernel_args, spawn_kernel_state, store_state
from .walkers import PacketSpec, sample_kernel

DEFAULT_GROWTH = Fraction(11, 10)
DEFAULT_MEMORY_BUDGET = 2 << 30
CHECKPOINT_VERSION = 1

# incremented whenever the simulator is entered; replay paths must leave it alone
SIMULATION_CALLS = {"run_sample": 0, "run_campaign": 0}


class ConfigurationError(ValueError):
    pass


class CheckpointError(RuntimeError):
    pass


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class BoxSchedule:
    levels: tuple[int, ...]
    growth: Optional[Fraction] = None

    def __post_init__(self):
        levels = tuple(int(v) for v in self.levels)
        if len(levels) < 2:
            raise ConfigurationError("a schedule needs at least two levels")
        if levels[0] < 1 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigurationError(f"levels must be positive and strictly increasing: {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def K(self) -> int:
        return len(self.levels) - 1

    @property
    def ratios(self) -> list[Fraction]:
        """q_l = L_l / L_{l+1} as exact rationals."""
        return [Fraction(a, b) for a, b in zip(self.levels, self.levels[1:])]

    def index_of(self, L: int) -> int:
        try:
            return self.levels.index(int(L))
        except ValueError:
            raise ConfigurationError(f"L={L} is not a level of this schedule") from None


def build_schedule(L0: int, growth=DEFAULT_GROWTH, Lmax: int = 20000) -> BoxSchedule:
    """L_{k+1} = max(floor(g L_k), L_k + 1), with the last level clamped to Lmax."""
    g = as_fraction(growth)
    if L0 < 2:
        raise ConfigurationError(f"L0 must be at least 2, got {L0}")
    if L0 >= Lmax:
        raise ConfigurationError(f"L0={L0} must be smaller than Lmax={Lmax}")
    if g <= 1:
        raise ConfigurationError(f"growth must exceed 1, got {g}")
    levels = [int(L0)]
    while True:
        nxt = max(math.floor(g * levels[-1]), levels[-1] + 1)
        if nxt >= Lmax:
            levels.append(int(Lmax))
            break
        levels.append(nxt)
    return BoxSchedule(tuple(levels), g)


@dataclass
class SurvivalCounts:
    n: tuple[int, ...]
    schedule: BoxSchedule
    spec: Optional[PacketSpec] = None
    base_seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n = tuple(int(v) for v in self.n)
        if len(self.n) != len(self.schedule.levels):
            raise ValueError("one count per schedule level is required")
        if any(v < 0 for v in self.n):
            raise ValueError("counts must be non-negative")
        for k, (a, b) in enumerate(zip(self.n, self.n[1:])):
            if b > a:
                raise ValueError(f"counts increase at level {k + 1}: {a} -> {b}")

    @property
    def levels(self) -> tuple[int, ...]:
        return self.schedule.levels

    def digest(self) -> str:
        payload = json.dumps({"L": list(self.levels), "n": list(self.n)}, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_results(cls, results: np.ndarray, schedule: BoxSchedule, **kw) -> "SurvivalCounts":
        return cls(counts_from_histogram(np.bincount(results, minlength=len(schedule.levels))),
                   schedule, **kw)


def counts_from_histogram(hist) -> tuple[int, ...]:
    """N_k = #{samples whose last survived level is >= k}."""
    hist = np.asarray(hist, dtype=np.int64)
    return tuple(int(v) for v in np.cumsum(hist[::-1])[::-1])


# ---------------------------------------------------------------- kernels


@njit(nogil=True)
def campaign_block(bits, full, levels, base_seed, start, stop, cells, meta,
                   visit, reset, draw, record_entry, out):
    aux = np.zeros(0, dtype=np.int64)
    nw = bits.shape[0]
    xs = np.zeros(nw, dtype=np.int64)
    ys = np.zeros(nw, dtype=np.int64)
    for i in range(start, stop):
        s = spawn_kernel_state(base_seed, np.uint64(i))
        _, k = sample_kernel(xs, ys, bits, full, levels, cells, meta, visit, draw,
                             s, aux, record_entry)
        out[i - start] = k
        reset(cells, meta)


def _reset_fn(grid: OccupancyGrid):
    return sparse_reset if grid.sparse else dense_reset


def run_sample(spec: PacketSpec, schedule: BoxSchedule, stream, grid: OccupancyGrid,
               record_entry: bool = False, rule: str = "top") -> int:
    """Highest level index survived by one sample (0 if it dies before L_1).

    The grid is left dirty; call ``grid.reset()`` before reusing it.
    """
    SIMULATION_CALLS["run_sample"] += 1
    if grid.half_length < schedule.levels[-1]:
        raise ConfigurationError("grid is smaller than the last schedule level")
    if grid.p != spec.p:
        raise ConfigurationError(f"grid built for p={grid.p}, spec has p={spec.p}")
    levels = np.asarray(schedule.levels, dtype=np.int64)
    xs = np.zeros(spec.total, dtype=np.int64)
    ys = np.zeros(spec.total, dtype=np.int64)
    draw, s, aux = kernel_args(stream, rule)
    s, k = sample_kernel(xs, ys, spec.walker_bits(), grid.full_mask, levels, grid.cells,
                         grid.meta, grid.visit_fn, draw, s, aux, bool(record_entry))
    store_state(stream, s)
    return int(k)


def run_samples(spec: PacketSpec, schedule: BoxSchedule, base_seed: int, start: int, stop: int,
                grid: OccupancyGrid, record_entry: bool = False, rule: str = "top") -> np.ndarray:
    """Per-sample results for sample indices [start, stop) on one grid."""
    out = np.zeros(stop - start, dtype=np.int16)
    if stop <= start:
        return out
    grid.reset()
    campaign_block(spec.walker_bits(), grid.full_mask, np.asarray(schedule.levels, dtype=np.int64),
                   np.uint64(base_seed), np.int64(start), np.int64(stop), grid.cells, grid.meta,
                   grid.visit_fn, _reset_fn(grid), DIRECTION_RULES[rule], bool(record_entry), out)
    return out


# ---------------------------------------------------------------- campaign


def campaign_digest(spec: PacketSpec, schedule: BoxSchedule, sample_count: int, base_seed: int,
                    record_entry: bool, rule: str) -> str:
    payload = {
        "packets": list(spec.counts),
        "levels": list(schedule.levels),
        "samples": int(sample_count),
        "seed": int(base_seed),
        "record_entry": bool(record_entry),
        "rule": rule,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _checksum(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def write_checkpoint(path: Path, digest: str, completed: int, hist, base_seed: int) -> None:
    body = {
        "version": CHECKPOINT_VERSION,
        "config_digest": digest,
        "completed": int(completed),
        "histogram": [int(v) for v in hist],
        "base_seed": int(base_seed),
    }
    doc = {"body": body, "sha256": _checksum(body)}
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True))
    os.replace(tmp, path)


def read_checkpoint(path: Path, digest: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
        body = doc["body"]
        stored = doc["sha256"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from None
    if _checksum(body) != stored:
        raise CheckpointError(f"checkpoint {path} failed its integrity check")
    if body.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {body.get('version')}")
    if body["config_digest"] != digest:
        raise CheckpointError(f"checkpoint {path} was written by a different configuration")
    return body


def run_campaign(spec: PacketSpec, schedule: BoxSchedule, sample_count: int, base_seed: int,
                 worker_count: int = 1, *, record_entry: bool = False, rule: str = "top",
                 memory_budget: Optional[int] = DEFAULT_MEMORY_BUDGET, sparse: bool = False,
                 checkpoint_path=None, checkpoint_every: Optional[int] = None,
                 progress: Optional[Callable[[int, int], None]] = None) -> SurvivalCounts:
    """Simulate ``sample_count`` samples and tally survivors per level.

    With ``checkpoint_path`` set, progress is persisted every
    ``checkpoint_every`` samples and an existing checkpoint for the same
    configuration is resumed. ``progress(done, total)`` is called after each
    persisted block.
    """
    SIMULATION_CALLS["run_campaign"] += 1
    if sample_count < 1:
        raise ConfigurationError(f"sample count must be positive, got {sample_count}")
    if worker_count < 1:
        raise ConfigurationError(f"worker count must be positive, got {worker_count}")
    if rule not in DIRECTION_RULES:
        raise ConfigurationError(f"unknown direction rule {rule!r}")

    K1 = len(schedule.levels)
    hist = np.zeros(K1, dtype=np.int64)
    done = 0
    digest = campaign_digest(spec, schedule, sample_count, base_seed, record_entry, rule)
    if checkpoint_path is not None:
        checkpoint_path = Path(checkpoint_path)
        if checkpoint_path.exists():
            body = read_checkpoint(checkpoint_path, digest)
            hist = np.asarray(body["histogram"], dtype=np.int64)
            done = body["completed"]

    grids = [make_grid(schedule.levels[-1], spec.p, memory_budget, sparse)
             for _ in range(worker_count)]
    block = checkpoint_every or sample_count

    def work(args):
        w, lo, hi = args
        return run_samples(spec, schedule, base_seed, lo, hi, grids[w], record_entry, rule)

    with ThreadPoolExecutor(max_workers=worker_count) as pool:
        while done < sample_count:
            hi = min(done + block, sample_count)
            edges = np.linspace(done, hi, worker_count + 1).astype(np.int64)
            jobs = [(w, int(edges[w]), int(edges[w + 1])) for w in range(worker_count)]
            for res in pool.map(work, jobs):
                hist += np.bincount(res, minlength=K1)
            done = hi
            if checkpoint_path is not None:
                write_checkpoint(checkpoint_path, digest, done, hist, base_seed)
            if progress is not None:
                progress(done, sample_count)

    return SurvivalCounts(counts_from_histogram(hist), schedule, spec, base_seed,
                          meta={"record_entry": bool(record_entry), "rule": rule})
