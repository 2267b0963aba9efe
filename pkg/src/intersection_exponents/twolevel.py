"""Two-level scheme: expensive masters reused by many cheap trials.

A master is a sample that survived from the origin to the L1 box. Its full
state (walker positions and occupancy) is frozen and restored at the start
of each of ``m`` trials that continue the same walkers to the L2 box. The
fraction of surviving trials estimates the master's conditional survival
probability, and the mean over masters estimates (L1/L2)**s.

Streams: master attempt ``a`` draws from ``spawn_stream(seed, a)``; its
trials draw from ``spawn_stream(seed ^ TRIAL_SALT, a)``, consumed in trial
order.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimators import EstimateReport, EstimationError, InsufficientDataError
from .lattice import GridSnapshot, OccupancyGrid, make_grid
from .multilevel import DEFAULT_MEMORY_BUDGET, ConfigurationError
from .rng import kernel_args, spawn_stream, store_state
from .walkers import PacketSpec, advance_kernel, scatter_kernel

TRIAL_SALT = 0x5DEECE66D2B7E151
DEFAULT_TRIALS = 1000
DEFAULT_BINS = 50


class AllTrialsDeadError(EstimationError):
    pass


@dataclass
class MasterSample:
    xs: np.ndarray
    ys: np.ndarray
    bits: np.ndarray
    snapshot: GridSnapshot
    L1: int
    index: Optional[int] = None


@dataclass
class TrialBatch:
    x: np.ndarray
    m: int
    master_index: np.ndarray
    L1: int
    L2: int
    attempts: int = 0
    timing: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int64)
        if np.any(self.x < 0) or np.any(self.x > self.m):
            raise ValueError("survivor counts must lie in [0, m]")

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def fractions(self) -> np.ndarray:
        return self.x / self.m

    @property
    def dead_attempts(self) -> int:
        return self.attempts - self.n

    def histogram(self, bins: int = DEFAULT_BINS):
        counts, edges = np.histogram(self.fractions, bins=bins, range=(0.0, 1.0))
        return counts, edges


def generate_master(spec: PacketSpec, L0: int, L1: int, stream, grid: OccupancyGrid,
                    index: Optional[int] = None, record_entry: bool = False,
                    rule: str = "top") -> Optional[MasterSample]:
    """One attempt at a master: scatter to L0, then a single run to L1.

    Returns None if the packets intersected on the way. Intermediate boxes
    are skipped; detection is online, so they cannot change the verdict.
    """
    if not L0 < L1:
        raise ConfigurationError(f"need L0 < L1, got {L0}, {L1}")
    if grid.half_length < L1:
        raise ConfigurationError("grid is smaller than L1")
    grid.reset()
    xs = np.zeros(spec.total, dtype=np.int64)
    ys = np.zeros(spec.total, dtype=np.int64)
    bits = spec.walker_bits()
    draw, s, aux = kernel_args(stream, rule)
    # kernels hand states back as Python ints; keep the original numpy type
    s = type(s)(scatter_kernel(xs, ys, np.int64(L0), draw, s, aux))
    s, dead = advance_kernel(xs, ys, bits, grid.full_mask, np.int64(L1), grid.cells, grid.meta,
                             grid.visit_fn, draw, s, aux, bool(record_entry))
    store_state(stream, s)
    if dead:
        return None
    return MasterSample(xs, ys, bits, grid.snapshot(), int(L1), index)


def run_trials(master: MasterSample, m: int, L2: int, stream, grid: OccupancyGrid,
               record_entry: bool = False, rule: str = "top") -> int:
    """Number of the ``m`` continuations from ``master`` that reach the L2 box."""
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if not L2 > master.L1:
        raise ConfigurationError(f"need L2 > L1, got {L2} <= {master.L1}")
    if grid.half_length < L2:
        raise ConfigurationError("grid is smaller than L2")
    draw, s, aux = kernel_args(stream, rule)
    state_type = type(s)
    survivors = 0
    for _ in range(m):
        grid.restore(master.snapshot)
        xs = master.xs.copy()
        ys = master.ys.copy()
        s, dead = advance_kernel(xs, ys, master.bits, grid.full_mask, np.int64(L2), grid.cells,
                                 grid.meta, grid.visit_fn, draw, s, aux, bool(record_entry))
        s = state_type(s)
        survivors += not dead
    store_state(stream, s)
    grid.reset()
    return survivors


def two_level_from_moments(p_hat: float, sigma_p: float, ratio: float = 2.0) -> tuple[float, float]:
    """(exponent, sigma) from the mean survival fraction and its standard error."""
    if not p_hat > 0:
        raise AllTrialsDeadError("mean survival fraction is zero")
    if not ratio > 1:
        raise ValueError(f"L2/L1 must exceed 1, got {ratio}")
    log_r = math.log(ratio)
    return -math.log(p_hat) / log_r, sigma_p / (log_r * p_hat)


def two_level_estimate(batch: TrialBatch, ratio: Optional[float] = None) -> EstimateReport:
    """Closed-form estimate from per-master survival fractions."""
    if batch.n < 2:
        raise InsufficientDataError("need at least two masters")
    if ratio is None:
        ratio = batch.L2 / batch.L1
    p = batch.fractions
    p_hat = float(p.mean())
    var_mean = float(np.sum((p - p_hat) ** 2) / (batch.n * (batch.n - 1)))
    sigma_p = math.sqrt(var_mean)
    s, sigma = two_level_from_moments(p_hat, sigma_p, ratio)
    digest_src = f"{batch.L1}:{batch.L2}:{batch.m}:" + ",".join(map(str, batch.x.tolist()))
    return EstimateReport(
        exponent_hat=s, sigma_hat=sigma, kmin=0, L_kmin=batch.L1, method="two_level",
        input_digest=hashlib.sha256(digest_src.encode()).hexdigest(),
        details={"p_hat": p_hat, "sigma_p": sigma_p, "n_masters": batch.n, "m": batch.m,
                 "L1": batch.L1, "L2": batch.L2},
    )


def _cost(m: int, T1: float, T2: float, var_ps: float, mean_ps: float) -> float:
    return (T1 + m * T2) * (var_ps + mean_ps / m)


def optimal_trial_count(T1: float, T2: float, var_ps: float, mean_ps: float) -> int:
    """Trials per master minimising CPU time times the variance bound of p-hat.

    (T1 + m T2)(V + E/m) is convex in m with continuous minimiser
    sqrt(T1 E / (T2 V)); the integer optimum is the better of its floor and
    ceiling (the smaller one on ties).
    """
    for name, v in (("T1", T1), ("T2", T2), ("var_ps", var_ps), ("mean_ps", mean_ps)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    root = math.sqrt(T1 * mean_ps / (T2 * var_ps))
    lo = max(1, math.floor(root))
    hi = max(1, math.ceil(root))
    return lo if _cost(lo, T1, T2, var_ps, mean_ps) <= _cost(hi, T1, T2, var_ps, mean_ps) else hi


def _attempt(spec, L0, L1, L2, m, base_seed, a, grid, record_entry, rule):
    t0 = time.perf_counter()
    master = generate_master(spec, L0, L1, spawn_stream(base_seed, a), grid, a, record_entry, rule)
    t1 = time.perf_counter()
    if master is None:
        return a, None, t1 - t0, 0.0
    x = run_trials(master, m, L2, spawn_stream(base_seed ^ TRIAL_SALT, a), grid, record_entry, rule)
    return a, x, t1 - t0, time.perf_counter() - t1


def run_twolevel_campaign(spec: PacketSpec, L0: int, L1: int, L2: int, n_masters: int,
                          m: int = DEFAULT_TRIALS, base_seed: int = 0, workers: int = 1, *,
                          record_entry: bool = False, rule: str = "top",
                          memory_budget: Optional[int] = DEFAULT_MEMORY_BUDGET,
                          sparse: bool = False) -> TrialBatch:
    """Generate attempts in index order until ``n_masters`` survive; run m trials each.

    The kept masters are always the first ``n_masters`` surviving attempt
    indices, whatever the worker count.
    """
    if not L0 < L1 < L2:
        raise ConfigurationError(f"need L0 < L1 < L2, got {L0}, {L1}, {L2}")
    if n_masters < 1 or m < 1 or workers < 1:
        raise ConfigurationError("n_masters, m and workers must be positive")
    grids = [make_grid(L2, spec.p, memory_budget, sparse) for _ in range(workers)]
    found: dict[int, int] = {}
    next_attempt = 0
    t_master = t_trial = 0.0
    n_attempts_timed = 0

    def work(args):
        w, idx = args
        return [_attempt(spec, L0, L1, L2, m, base_seed, a, grids[w], record_entry, rule)
                for a in idx]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        while len(found) < n_masters:
            need = n_masters - len(found)
            rate = (len(found) + 1) / (next_attempt + 2)
            block = max(workers, min(int(math.ceil(need / rate)), 64 * workers))
            idx = np.arange(next_attempt, next_attempt + block)
            parts = [(w, idx[w::workers].tolist()) for w in range(workers)]
            for res in pool.map(work, parts):
                for a, x, tm, tt in res:
                    t_master += tm
                    t_trial += tt
                    n_attempts_timed += 1
                    if x is not None:
                        found[a] = x
            next_attempt += block

    kept = sorted(found)[:n_masters]
    attempts = kept[-1] + 1
    x = np.array([found[a] for a in kept], dtype=np.int64)
    timing = {
        "seconds_per_attempt": t_master / max(n_attempts_timed, 1),
        "seconds_per_master": t_master / max(len(found), 1),
        "seconds_per_trial": t_trial / max(len(found) * m, 1),
    }
    return TrialBatch(x, m, np.array(kept, dtype=np.int64), int(L1), int(L2), attempts, timing)
