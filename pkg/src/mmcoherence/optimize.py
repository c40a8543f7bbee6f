"""Composite weight learning: Nelder-Mead on the probability simplex.

The objective (negative Spearman correlation between the 3-dimension composite
and decision coherence) is piecewise constant in the weights, so the landscape
is all plateaus. Seeded multi-start plus a closest-to-uniform tie-break keeps
the answer stable across runs.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConstantInput, DegenerateTarget, InsufficientData
from .metrics import EventScores
from .stats import spearman

_SIMPLEX_SUM_TOL = 1e-9


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative weights over (IC, SpC, SC) summing to 1.

    The optional DC term exists for the full four-term composite as a manual
    option; it is never learned and is excluded from the simplex constraint.
    """

    w_ic: float
    w_spc: float
    w_sc: float
    w_dc: float = 0.0

    def __post_init__(self):
        for name in ("w_ic", "w_spc", "w_sc", "w_dc"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        total = self.w_ic + self.w_spc + self.w_sc
        if abs(total - 1.0) > _SIMPLEX_SUM_TOL:
            raise ValueError(f"w_ic + w_spc + w_sc = {total!r}, expected 1")

    @classmethod
    def equal(cls) -> "WeightVector":
        return cls(1 / 3, 1 / 3, 1 / 3)

    def as_array(self) -> np.ndarray:
        return np.array([self.w_ic, self.w_spc, self.w_sc], dtype=np.float64)


@dataclass(frozen=True)
class NelderMeadOptions:
    max_iters: int = 500
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    diameter_tol: float = 1e-6
    spread_tol: float = 1e-9
    restarts: int = 8
    init_step: float = 0.15

    def __post_init__(self):
        if min(self.reflection, self.expansion, self.contraction, self.shrink) <= 0:
            raise ValueError("coefficients must be positive")
        if self.expansion <= 1.0:
            raise ValueError("expansion must exceed 1")
        if not 0.0 < self.contraction < 1.0:
            raise ValueError("contraction must lie in (0, 1)")


@dataclass(frozen=True)
class NelderMeadResult:
    point: np.ndarray
    value: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class LearnedWeights:
    weights: WeightVector
    rho: float
    n_events: int
    seed: int
    per_dimension_rho: dict[str, float | None]


def project_to_simplex(v: Sequence[float]) -> WeightVector:
    """Euclidean projection onto {w >= 0, sum(w) = 1} (sort-based)."""
    arr = np.asarray(v, dtype=np.float64)
    u = np.sort(arr)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, arr.size + 1)
    rho = int(np.nonzero(u - css / idx > 0)[0][-1])
    theta = css[rho] / (rho + 1)
    w = np.maximum(arr - theta, 0.0)
    w = w / w.sum()  # kill last-ulp drift so the invariant holds exactly
    return WeightVector(float(w[0]), float(w[1]), float(w[2]))


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    init: Sequence[float],
    opts: NelderMeadOptions = NelderMeadOptions(),
) -> NelderMeadResult:
    """Standard reflect/expand/contract/shrink simplex iteration.

    Terminates when the simplex diameter or the objective spread falls under
    its tolerance, or at max_iters (returning best-so-far, flagged
    unconverged).
    """
    x0 = np.asarray(init, dtype=np.float64)
    dim = x0.size
    simplex = [x0.copy()]
    for i in range(dim):
        vertex = x0.copy()
        vertex[i] += opts.init_step
        simplex.append(vertex)
    values = [float(objective(v)) for v in simplex]

    iterations = 0
    converged = False
    while iterations < opts.max_iters:
        order = sorted(range(len(simplex)), key=lambda i: values[i])
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]

        diameter = max(float(np.max(np.abs(v - simplex[0]))) for v in simplex[1:])
        spread = values[-1] - values[0]
        if diameter < opts.diameter_tol or spread < opts.spread_tol:
            converged = True
            break
        iterations += 1

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + opts.reflection * (centroid - worst)
        f_reflected = float(objective(reflected))

        if f_reflected < values[0]:
            expanded = centroid + opts.expansion * (reflected - centroid)
            f_expanded = float(objective(expanded))
            if f_expanded < f_reflected:
                simplex[-1], values[-1] = expanded, f_expanded
            else:
                simplex[-1], values[-1] = reflected, f_reflected
            continue
        if f_reflected < values[-2]:
            simplex[-1], values[-1] = reflected, f_reflected
            continue

        if f_reflected < values[-1]:
            contracted = centroid + opts.contraction * (reflected - centroid)
        else:
            contracted = centroid + opts.contraction * (worst - centroid)
        f_contracted = float(objective(contracted))
        if f_contracted < min(values[-1], f_reflected):
            simplex[-1], values[-1] = contracted, f_contracted
            continue

        best = simplex[0]
        for i in range(1, len(simplex)):
            simplex[i] = best + opts.shrink * (simplex[i] - best)
            values[i] = float(objective(simplex[i]))

    order = sorted(range(len(simplex)), key=lambda i: values[i])
    return NelderMeadResult(
        point=simplex[order[0]].copy(),
        value=values[order[0]],
        converged=converged,
        iterations=iterations,
    )


def _weights_from_free(p: np.ndarray) -> WeightVector:
    """Two free coordinates; the third is 1 - sum, projected when infeasible."""
    full = np.array([p[0], p[1], 1.0 - p[0] - p[1]], dtype=np.float64)
    if np.min(full) < 0.0 or full.sum() > 1.0 + _SIMPLEX_SUM_TOL:
        return project_to_simplex(full)
    return WeightVector(float(full[0]), float(full[1]), float(full[2]))


# Stratified interior starting weights: uniform, the pulled-in vertices, and
# the pulled-in edge midpoints. Extra restarts draw from a seeded Dirichlet.
_START_WEIGHTS = (
    (1 / 3, 1 / 3, 1 / 3),
    (0.8, 0.1, 0.1),
    (0.1, 0.8, 0.1),
    (0.1, 0.1, 0.8),
    (0.45, 0.45, 0.1),
    (0.45, 0.1, 0.45),
    (0.1, 0.45, 0.45),
    (0.2, 0.3, 0.5),
)

_VERTEX_WEIGHTS = (
    WeightVector(1.0, 0.0, 0.0),
    WeightVector(0.0, 1.0, 0.0),
    WeightVector(0.0, 0.0, 1.0),
)


def learn_weights(
    per_event: Sequence[EventScores],
    opts: NelderMeadOptions = NelderMeadOptions(),
    seed: int = 0,
    jobs: int = 1,
) -> LearnedWeights:
    """Maximize Spearman correlation between the 3-term composite and DC.

    Events missing any of ic, spc, sc, dc are excluded. The returned weights
    are the best over all seeded restarts plus the simplex vertices, so the
    achieved correlation is never below any single dimension's.
    """
    complete = [
        s
        for s in per_event
        if s.ic is not None and s.spc is not None and s.sc is not None and s.dc is not None
    ]
    if len(complete) < 10:
        raise InsufficientData(
            f"need at least 10 events with all of ic, spc, sc, dc; got {len(complete)}"
        )
    dims = np.array([[s.ic, s.spc, s.sc] for s in complete], dtype=np.float64)
    dc = np.array([s.dc for s in complete], dtype=np.float64)
    if float(dc.min()) == float(dc.max()):
        raise DegenerateTarget("dc is constant across events; Spearman undefined")

    def rho_for(w: WeightVector) -> float:
        try:
            return spearman(dims @ w.as_array(), dc)
        except ConstantInput:
            return -math.inf

    def objective(p: np.ndarray) -> float:
        return -rho_for(_weights_from_free(p))

    rng = np.random.default_rng(seed)
    starts = [np.array(w, dtype=np.float64) for w in _START_WEIGHTS[: opts.restarts]]
    for _ in range(max(0, opts.restarts - len(_START_WEIGHTS))):
        starts.append(rng.dirichlet((1.0, 1.0, 1.0)))

    def run_start(start: np.ndarray) -> tuple[WeightVector, float]:
        result = nelder_mead(objective, start[:2], opts)
        w = _weights_from_free(result.point)
        return w, rho_for(w)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            candidates = list(pool.map(run_start, starts))
    else:
        candidates = [run_start(s) for s in starts]
    candidates.extend((w, rho_for(w)) for w in _VERTEX_WEIGHTS)
    candidates.append((WeightVector.equal(), rho_for(WeightVector.equal())))

    uniform = np.full(3, 1 / 3)

    def preference(item: tuple[WeightVector, float]) -> tuple[float, float]:
        w, rho = item
        # maximize rho; on plateaus prefer the point nearest uniform weights
        return (-rho, float(np.linalg.norm(w.as_array() - uniform)))

    best_w, best_rho = min(candidates, key=preference)

    per_dim: dict[str, float | None] = {}
    for name, column in zip(("ic", "spc", "sc"), dims.T):
        try:
            per_dim[name] = spearman(column, dc)
        except ConstantInput:
            per_dim[name] = None

    return LearnedWeights(
        weights=best_w,
        rho=best_rho,
        n_events=len(complete),
        seed=seed,
        per_dimension_rho=per_dim,
    )
