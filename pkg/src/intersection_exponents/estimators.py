"""Exponent estimates from per-level survival counts.

Above ``kmin`` the survival probability is modelled as an exact power law,
so a sample alive at L_l survives to L_{l+1} with probability q_l**s, where
q_l = L_l / L_{l+1}. The counts then form a chain of binomial
transitions with log-likelihood (dropping the data-only constant)

    ll(s) = sum_l  n_{l+1} * s * log q_l  +  (n_l - n_{l+1}) * log(1 - q_l**s).

``ll`` is strictly concave whenever some transition has deaths, so the
maximiser is the unique root of ``ll'``. Its variance is estimated by the
inverse observed information ``-1 / ll''``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .multilevel import SurvivalCounts

BRACKET = (1e-6, 64.0)
NEWTON_TOL = 1e-12
MAX_NEWTON = 100


class EstimationError(ValueError):
    """The data admit no interior estimate."""


class NoDeathsError(EstimationError):
    pass


class AllDeadError(EstimationError):
    pass


class InsufficientDataError(EstimationError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass
class EstimateReport:
    exponent_hat: float
    sigma_hat: float
    kmin: int
    L_kmin: Optional[int]
    method: str
    input_digest: str
    details: dict = field(default_factory=dict)

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.exponent_hat - 2 * self.sigma_hat, self.exponent_hat + 2 * self.sigma_hat)

    @property
    def two_sigma(self) -> float:
        return 2 * self.sigma_hat

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d


def _transitions(counts: SurvivalCounts, kmin: int):
    K = len(counts.n) - 1
    if not 0 <= kmin < K:
        raise InsufficientDataError(f"kmin must lie in 0..{K - 1}, got {kmin}")
    n = np.asarray(counts.n, dtype=np.float64)
    if n[kmin] < 1:
        raise InsufficientDataError(f"no samples alive at level kmin={kmin}")
    L = counts.levels
    # log q_l from exact integer ratios, one rounding per level
    logq = np.array([math.log(L[l]) - math.log(L[l + 1]) for l in range(kmin, K)])
    alive = n[kmin + 1:]
    deaths = n[kmin:K] - alive
    return logq, alive, deaths


def _check_exponent(exponent: float) -> None:
    if not exponent > 0:
        raise ValueError(f"exponent must be positive, got {exponent}")


def _odds(logq, exponent):
    # q**s / (1 - q**s) = 1 / (q**-s - 1)
    return 1.0 / np.expm1(-exponent * logq)


def log_likelihood(counts: SurvivalCounts, kmin: int, exponent: float) -> float:
    _check_exponent(exponent)
    logq, alive, deaths = _transitions(counts, kmin)
    u = exponent * logq
    with np.errstate(divide="ignore"):
        death_term = np.where(deaths > 0, deaths * np.log(-np.expm1(u)), 0.0)
    return float(np.sum(alive * u) + np.sum(death_term))


def loglik_prime(counts: SurvivalCounts, kmin: int, exponent: float) -> float:
    _check_exponent(exponent)
    logq, alive, deaths = _transitions(counts, kmin)
    return float(np.sum(alive * logq) - np.sum(deaths * logq * _odds(logq, exponent)))


def loglik_double_prime(counts: SurvivalCounts, kmin: int, exponent: float) -> float:
    _check_exponent(exponent)
    logq, alive, deaths = _transitions(counts, kmin)
    r = _odds(logq, exponent)
    # q**s / (1 - q**s)**2 = r (1 + r)
    return float(-np.sum(deaths * logq ** 2 * r * (1.0 + r)))


def _solve(logq, alive, deaths, guess):
    def d1(s):
        return np.sum(alive * logq) - np.sum(deaths * logq * _odds(logq, s))

    def d2(s):
        r = _odds(logq, s)
        return -np.sum(deaths * logq ** 2 * r * (1.0 + r))

    lo, hi = BRACKET
    while d1(hi) > 0:
        hi *= 2
        if hi > 1e6:
            raise NonConvergenceError("no sign change of the score below 1e6")
    s = guess if (guess is not None and lo < guess < hi) else 0.5 * (lo + hi)
    for it in range(1, MAX_NEWTON + 1):
        g = d1(s)
        if g == 0:
            return s, it
        if g > 0:
            lo = s
        else:
            hi = s
        step = -g / d2(s)
        nxt = s + step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - s) < NEWTON_TOL:
            return nxt, it
        s = nxt
    # Newton and bisection both stalled; finish on the bracket alone
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if d1(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < NEWTON_TOL:
            return 0.5 * (lo + hi), MAX_NEWTON
    raise NonConvergenceError("maximum-likelihood solve did not converge")


def mle(counts: SurvivalCounts, kmin: int) -> EstimateReport:
    """Maximum-likelihood exponent with observed-information standard error."""
    logq, alive, deaths = _transitions(counts, kmin)
    if not np.any(deaths > 0):
        raise NoDeathsError("no deaths above kmin: the likelihood increases as the exponent -> 0")
    if alive[0] == 0:
        raise AllDeadError("no survivors past kmin: the likelihood increases without bound")
    n = counts.n
    K = len(n) - 1
    guess = None
    if n[K] > 0:
        guess = -math.log(n[K] / n[kmin]) / math.log(counts.levels[kmin] / counts.levels[K])
    s, iterations = _solve(logq, alive, deaths, guess)
    info = -loglik_double_prime(counts, kmin, s)
    sigma = math.sqrt(1.0 / info)
    return EstimateReport(
        exponent_hat=float(s), sigma_hat=sigma, kmin=kmin, L_kmin=counts.levels[kmin],
        method="mle", input_digest=counts.digest(),
        details={"iterations": iterations, "score": loglik_prime(counts, kmin, s)},
    )


def regression_estimate(counts: SurvivalCounts, kmin: int) -> EstimateReport:
    """Least-squares slope of log N_k on log L_k over k >= kmin (diagnostic)."""
    L = np.asarray(counts.levels[kmin:], dtype=np.float64)
    n = np.asarray(counts.n[kmin:], dtype=np.float64)
    keep = n >= 1
    if keep.sum() < 2:
        raise InsufficientDataError("regression needs at least two non-empty levels")
    fit = stats.linregress(np.log(L[keep]), np.log(n[keep]))
    return EstimateReport(
        exponent_hat=float(-fit.slope) + 0.0, sigma_hat=float(fit.stderr), kmin=kmin,
        L_kmin=counts.levels[kmin], method="regression", input_digest=counts.digest(),
        details={"intercept": float(fit.intercept), "points": int(keep.sum())},
    )


@dataclass
class ScanEntry:
    kmin: int
    L_kmin: int
    exponent: Optional[float]
    two_sigma: Optional[float]
    error: Optional[str] = None


def kmin_scan(counts: SurvivalCounts) -> list[ScanEntry]:
    """MLE for every kmin in 0..K-1; failures are kept as empty entries."""
    out = []
    for kmin in range(len(counts.n) - 1):
        try:
            rep = mle(counts, kmin)
        except EstimationError as exc:
            out.append(ScanEntry(kmin, counts.levels[kmin], None, None, type(exc).__name__))
        else:
            out.append(ScanEntry(kmin, counts.levels[kmin], rep.exponent_hat, rep.two_sigma))
    return out


def resolve_kmin(counts: SurvivalCounts, kmin: Optional[int] = None,
                 kmin_L: Optional[int] = None) -> int:
    """Level index from either an explicit index or a box half-length."""
    if (kmin is None) == (kmin_L is None):
        raise ValueError("give exactly one of kmin or kmin_L")
    if kmin_L is not None:
        return counts.schedule.index_of(kmin_L)
    return int(kmin)
