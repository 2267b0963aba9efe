"""Known exponent values and rigorous bounds for benchmarking.

Exact values exist for p = 2 (a handful are stored here) and for the
family (1, 2, n_3, ..., n_p) with every n_i >= 2, whose exponent is 2.
For the other simulated specs only the bounds implied by the two
monotonicity rules are recorded, exactly as tabulated with the original
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .walkers import PacketSpec

SQRT73 = math.sqrt(73)

EXACT = {
    (1, 1): ("5/4", 5 / 4),
    (2, 2): ("35/12", 35 / 12),
    (1, 3): ("(13+sqrt73)/8", (13 + SQRT73) / 8),
    (2, 3): ("(47+5sqrt73)/24", (47 + 5 * SQRT73) / 24),
}

# "rigorous" column of the two published result tables, stored literally
RIGOROUS_TABLE = {
    (1, 1): (Fraction(5, 4), Fraction(5, 4)),
    (2, 2): (Fraction(35, 12), Fraction(35, 12)),
    (1, 1, 1): (Fraction(1, 2), Fraction(5, 4)),
    (1, 1, 2): (Fraction(1), Fraction(5, 4)),
    (1, 1, 1, 1): (Fraction(1, 4), Fraction(5, 4)),
    (1, 1, 1, 2): (Fraction(1, 2), Fraction(5, 4)),
    (1, 1, 1, 1, 1): (Fraction(1, 8), Fraction(5, 4)),
    (1, 3, 3): (Fraction(2), (13 + SQRT73) / 8),
    (2, 2, 2): (Fraction(2), Fraction(35, 12)),
    (2, 2, 3): (Fraction(2), Fraction(35, 12)),
    (2, 3, 3): (Fraction(2), Fraction(35, 12)),
    (2, 2, 2, 2): (Fraction(2), Fraction(35, 12)),
}

# specs the published comparisons pair with a smaller spec
PUBLISHED_COMPARISONS = {
    (1, 1, 2): (1, 1),
    (1, 1, 1, 2): (1, 1, 1),
    (1, 3, 3): (1, 3),
    (2, 2, 3): (2, 2),
    (2, 3, 3): (2, 3),
}

# estimates published for the simulated specs: (exponent, two_sigma)
PUBLISHED_ESTIMATES = {
    (1, 1): (1.2502, 0.001),
    (2, 2): (2.9188, 0.0033),
    (1, 1, 1): (1.027, 0.005),
    (1, 1, 2): (1.2503, 0.0011),
    (1, 1, 1, 1): (0.877, 0.006),
    (1, 1, 1, 2): (1.02, 0.004),
    (1, 1, 1, 1, 1): (0.74, 0.02),
    (1, 3, 3): (2.688, 0.01),
    (2, 2, 2): (2.786, 0.01),
    (2, 2, 3): (2.937, 0.01),
    (2, 3, 3): (3.767, 0.057),
    (2, 2, 2, 2): (2.664, 0.01),
}

Number = Union[float, Fraction]


@dataclass(frozen=True)
class ReferenceValue:
    spec: PacketSpec
    value: Union[float, tuple[float, float]]
    status: str
    label: str = ""


def _counts(spec) -> tuple[int, ...]:
    if isinstance(spec, PacketSpec):
        return spec.counts
    return PacketSpec(tuple(spec)).counts


def is_theorem2(counts: tuple[int, ...]) -> bool:
    return len(counts) >= 2 and counts[0] == 1 and counts[1] == 2 and all(n >= 2 for n in counts[2:])


def exact_value(spec) -> Optional[ReferenceValue]:
    """Exact exponent where one is known, else None."""
    counts = _counts(spec)
    ps = PacketSpec(counts)
    if counts in EXACT:
        label, value = EXACT[counts]
        return ReferenceValue(ps, value, "exact", label)
    if is_theorem2(counts):
        return ReferenceValue(ps, 2.0, "theorem2", "2")
    return None


def conjectured_reduction(spec) -> PacketSpec:
    """Apply the reduction rule literally.

    k is the smallest l in {2, ..., p} with n_{l+1} > n_l (k = p if there is
    none) and the result is (n_1, ..., n_k).
    """
    counts = _counts(spec)
    p = len(counts)
    k = p
    for ell in range(2, p):  # 1-based l; n_{l+1} exists only for l < p
        if counts[ell] > counts[ell - 1]:
            k = ell
            break
    return PacketSpec(counts[:k])


def rigorous_interval(spec) -> Optional[tuple[float, float]]:
    """Tabulated rigorous bounds, or a degenerate interval at an exact value."""
    counts = _counts(spec)
    if counts in RIGOROUS_TABLE:
        lo, hi = RIGOROUS_TABLE[counts]
        return float(lo), float(hi)
    exact = exact_value(counts)
    if exact is not None:
        return float(exact.value), float(exact.value)
    return None


def reduction_annotation(spec) -> dict:
    """Literal reduction next to the published comparison target, flagging mismatches."""
    counts = _counts(spec)
    literal = conjectured_reduction(counts).counts
    target = PUBLISHED_COMPARISONS.get(counts)
    note = {
        "spec": list(counts),
        "literal_reduction": list(literal),
        "published_comparison": list(target) if target else None,
        "consistent": target is None or tuple(target) == literal,
    }
    if not note["consistent"]:
        note["warning"] = (
            f"the printed reduction rule maps {counts} to {literal}, but the published "
            f"comparison is with {target}")
    return note


def reference_summary(spec) -> dict:
    """Everything known about ``spec``, for embedding in reports."""
    counts = _counts(spec)
    exact = exact_value(counts)
    interval = rigorous_interval(counts)
    literal = conjectured_reduction(counts).counts
    conj = exact_value(literal) if literal != counts else None
    published = PUBLISHED_ESTIMATES.get(counts)
    return {
        "exact": None if exact is None else {"value": exact.value, "status": exact.status,
                                              "label": exact.label},
        "rigorous_interval": None if interval is None else list(interval),
        "conjectured_value": None if conj is None else conj.value,
        "reduction": reduction_annotation(counts),
        "published": None if published is None else {"exponent": published[0],
                                                      "two_sigma": published[1]},
    }
