"""64-bit linear congruential streams.

The generator is the plain Knuth MMIX recurrence

    r' = (6364136223846793005 * r + 1) mod 2**64

used both from Python (exact big-integer arithmetic, for tests and small
tools) and from numba kernels (wrapping ``uint64`` arithmetic, for the
simulation). The two paths are bit-identical.

Kernels thread the state through by value: a *draw rule* is an njit
function ``rule(state, aux) -> (state, direction)``. ``aux`` is an int64
array that only the scripted rule reads; the LCG rules ignore it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

MULTIPLIER = 6364136223846793005
INCREMENT = 1
MASK64 = (1 << 64) - 1
SPLIT_MIX = 0x9E3779B97F4A7C15
BURN_IN = 8

# (dx, dy) for direction indices 0..3: +x, -x, +y, -y
STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
DX = np.array([1, -1, 0, 0], dtype=np.int64)
DY = np.array([0, 0, 1, -1], dtype=np.int64)

_A = np.uint64(MULTIPLIER)
_C = np.uint64(INCREMENT)
_SHIFT_TOP = np.uint64(62)
_SHIFT_ALT = np.uint64(60)
_THREE = np.uint64(3)


@dataclass
class RngStream:
    """Mutable single-owner LCG stream. ``state`` is the last output."""

    state: int

    def __post_init__(self):
        self.state = int(self.state) & MASK64

    def next(self) -> int:
        return lcg_next(self)

    def uniform(self) -> float:
        return unit_uniform(self)

    def direction(self) -> tuple[int, int]:
        return step_direction(self)

    def copy(self) -> "RngStream":
        return RngStream(self.state)


class ScriptedStream:
    """A stand-in stream that replays a fixed list of direction indices.

    Only meaningful for the walker kernels; it lets tests force paths.
    Running past the end of the script raises ``IndexError``.
    """

    def __init__(self, directions):
        self.script = np.asarray(directions, dtype=np.int64)
        if self.script.size and (self.script.min() < 0 or self.script.max() > 3):
            raise ValueError("scripted directions must be in 0..3")
        self.cursor = 0

    @property
    def remaining(self) -> int:
        return int(self.script.size - self.cursor)


def lcg_next(stream: RngStream) -> int:
    """Advance ``stream`` one step and return the new state."""
    stream.state = (MULTIPLIER * stream.state + INCREMENT) & MASK64
    return stream.state


def unit_uniform(stream: RngStream) -> float:
    """Uniform double in [0, 1) from the top 53 bits of the next state."""
    return (lcg_next(stream) >> 11) / 9007199254740992.0


def step_direction(stream: RngStream) -> tuple[int, int]:
    """Lattice unit step chosen by the top two bits of the next state."""
    return STEPS[lcg_next(stream) >> 62]


def advance(state: int, steps: int) -> int:
    for _ in range(steps):
        state = (MULTIPLIER * state + INCREMENT) & MASK64
    return state


def spawn_state(base_seed: int, index: int) -> int:
    mixed = (int(base_seed) ^ ((int(index) * SPLIT_MIX) & MASK64)) & MASK64
    return advance(mixed, BURN_IN)


def spawn_stream(base_seed: int, index: int) -> RngStream:
    """Independent, reproducible stream number ``index`` under ``base_seed``."""
    if index < 0:
        raise ValueError(f"stream index must be non-negative, got {index}")
    return RngStream(spawn_state(base_seed, index))


def parse_seed(text: str | int) -> int:
    """Accept a decimal or 0x-prefixed hex seed; reject values outside 64 bits."""
    if isinstance(text, int):
        value = text
    else:
        value = int(text.strip(), 0)
    if not 0 <= value <= MASK64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {text!r}")
    return value


# ---------------------------------------------------------------- kernels


@njit(inline="always")
def lcg_step(s):
    return s * _A + _C


@njit(inline="always")
def draw_top_bits(s, aux):
    s = s * _A + _C
    return s, s >> _SHIFT_TOP


@njit(inline="always")
def draw_alt_bits(s, aux):
    # bits 60-61: a different, still long-period, pair of state bits
    s = s * _A + _C
    return s, (s >> _SHIFT_ALT) & _THREE


@njit
def draw_scripted(s, aux):
    if s >= aux.shape[0]:
        raise IndexError("scripted stream exhausted")
    return s + 1, aux[s]


@njit(inline="always")
def spawn_kernel_state(base_seed, index):
    s = base_seed ^ (index * np.uint64(SPLIT_MIX))
    for _ in range(BURN_IN):
        s = s * _A + _C
    return s


DIRECTION_RULES = {"top": draw_top_bits, "alt": draw_alt_bits}

_EMPTY_AUX = np.zeros(0, dtype=np.int64)


def kernel_args(stream, rule: str = "top"):
    """Translate a Python stream into ``(draw, state, aux)`` for a kernel."""
    if isinstance(stream, ScriptedStream):
        return draw_scripted, np.int64(stream.cursor), stream.script
    try:
        draw = DIRECTION_RULES[rule]
    except KeyError:
        raise ValueError(f"unknown direction rule {rule!r}") from None
    return draw, np.uint64(stream.state), _EMPTY_AUX


def store_state(stream, state) -> None:
    """Write a kernel's returned state back into the Python stream."""
    if isinstance(stream, ScriptedStream):
        stream.cursor = int(state)
    else:
        stream.state = int(state)
