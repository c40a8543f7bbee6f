"""Rank statistics: Spearman correlation with ties, Kruskal-Wallis H, p-values.

Spearman is computed as Pearson correlation of average ranks rather than via
the 6*sum(d^2) shortcut, which is wrong under ties; decision-coherence scores
are heavily tied ({0, 1/3, 2/3, 1}), so tie handling is load-bearing here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AllTied,
    ConstantInput,
    InsufficientData,
    LengthMismatch,
    NonFiniteInput,
)

PERMUTATION = "permutation"
T_APPROX = "t_approx"

_EPS = 1e-15
_MAX_ITER = 500


@dataclass(frozen=True)
class RankedSample:
    """Values paired with their ascending average ranks (ties share the mean)."""

    values: tuple[float, ...]
    ranks: tuple[float, ...]

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "RankedSample":
        ranks = rank_with_ties(values)
        return cls(tuple(float(v) for v in values), tuple(float(r) for r in ranks))


@dataclass(frozen=True)
class KruskalWallisResult:
    h: float
    p: float
    n: tuple[int, ...]


def _as_finite_array(values: Sequence[float], name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise NonFiniteInput(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} must be finite")
    return arr


def rank_with_ties(values: Sequence[float]) -> np.ndarray:
    """Ascending 1-based average ranks; tied values share the mean position."""
    arr = _as_finite_array(values)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        avg = (i + j + 2) / 2.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rho: Pearson correlation of average ranks."""
    ax = _as_finite_array(x, "x")
    ay = _as_finite_array(y, "y")
    if ax.size != ay.size:
        raise LengthMismatch(f"samples differ in length: {ax.size} != {ay.size}")
    if ax.size < 3:
        raise InsufficientData("need at least 3 paired observations")
    if np.min(ax) == np.max(ax):
        raise ConstantInput("x is constant; rho undefined")
    if np.min(ay) == np.max(ay):
        raise ConstantInput("y is constant; rho undefined")
    rx = rank_with_ties(ax)
    ry = rank_with_ties(ay)
    rxc = rx - rx.mean()
    ryc = ry - ry.mean()
    rho = float(rxc @ ryc / math.sqrt((rxc @ rxc) * (ryc @ ryc)))
    return max(-1.0, min(1.0, rho))


def spearman_pvalue(
    x: Sequence[float],
    y: Sequence[float],
    method: str = PERMUTATION,
    n_perm: int = 10_000,
    seed: int = 0,
) -> float:
    """Two-sided p-value for Spearman rho.

    PERMUTATION counts seeded shuffles of y whose |rho| reaches the observed
    one: p = (1 + count) / (n_perm + 1). T_APPROX uses the classic Student-t
    transform t = rho * sqrt((n - 2) / (1 - rho^2)) with n - 2 degrees of
    freedom.
    """
    rho = spearman(x, y)
    n = len(x)
    if method == T_APPROX:
        if abs(rho) >= 1.0:
            return 0.0
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        return 2.0 * _student_t_sf(abs(t), n - 2)
    if method != PERMUTATION:
        raise ValueError(f"unknown p-value method {method!r}")
    if n_perm < 1000:
        raise ValueError("PERMUTATION requires n_perm >= 1000")

    rx = rank_with_ties(np.asarray(x, dtype=np.float64))
    ry = rank_with_ties(np.asarray(y, dtype=np.float64))
    rxc = rx - rx.mean()
    ryc = ry - ry.mean()
    denom = math.sqrt(float(rxc @ rxc) * float(ryc @ ryc))
    target = abs(rho) - 1e-12  # keep exact re-draws of |rho| in the count

    rng = np.random.default_rng(seed)
    count = 0
    chunk = 2048
    done = 0
    while done < n_perm:
        b = min(chunk, n_perm - done)
        # argsorting uniform keys yields independent uniform permutations
        keys = rng.random((b, n))
        idx = np.argsort(keys, axis=1)
        rhos = (ryc[idx] @ rxc) / denom
        count += int(np.count_nonzero(np.abs(rhos) >= target))
        done += b
    return (1 + count) / (n_perm + 1)


def kruskal_wallis(groups: Iterable[Sequence[float]]) -> KruskalWallisResult:
    """Kruskal-Wallis H over pooled average ranks with tie correction."""
    arrays = [_as_finite_array(g, f"group {i}") for i, g in enumerate(groups)]
    if len(arrays) < 2:
        raise InsufficientData("need at least 2 groups")
    if any(a.size < 2 for a in arrays):
        raise InsufficientData("every group needs at least 2 values")

    pooled = np.concatenate(arrays)
    n_total = pooled.size
    ranks = rank_with_ties(pooled)

    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    divisor = 1.0 - tie_term / (n_total**3 - n_total)
    if divisor == 0.0:
        raise AllTied("all pooled values identical; H undefined")

    h = 0.0
    offset = 0
    for a in arrays:
        r_sum = float(np.sum(ranks[offset : offset + a.size]))
        h += r_sum * r_sum / a.size
        offset += a.size
    h = 12.0 / (n_total * (n_total + 1)) * h - 3.0 * (n_total + 1)
    h = max(h / divisor, 0.0)
    p = chi_square_sf(h, len(arrays) - 1)
    return KruskalWallisResult(h=h, p=p, n=tuple(a.size for a in arrays))


# ---------------------------------------------------------------------------
# special functions
#
# Regularized incomplete gamma via the usual regime split: series for
# x < a + 1, continued fraction (modified Lentz) otherwise. Incomplete beta
# likewise via its continued fraction, for the Student-t survival function.
# ---------------------------------------------------------------------------


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    for n in range(1, _MAX_ITER):
        term *= x / (a + n)
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_cf(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    f = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return f * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_sf(x: float, df: int) -> float:
    """Chi-square survival function: 1 - P(df/2, x/2), relative error < 1e-10."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    s = x / 2.0
    if s < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_p_series(a, s)))
    return min(1.0, max(0.0, _gamma_q_cf(a, s)))


def _beta_cf(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    f = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        f *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return f


def _beta_inc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def _student_t_sf(t: float, df: int) -> float:
    """Student-t survival function P(T > t)."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    if t == 0.0:
        return 0.5
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    x = df / (df + t * t)
    tail = 0.5 * _beta_inc(df / 2.0, 0.5, x)
    return tail if t > 0 else 1.0 - tail
