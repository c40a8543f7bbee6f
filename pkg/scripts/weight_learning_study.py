#!/usr/bin/env python3
"""Weight learning on planted rank structure.

Builds per-event scores where decision coherence tracks the rank of one
chosen dimension plus noise, learns simplex weights by Nelder-Mead, and
compares the achieved rank correlation against every single dimension and a
0.01-resolution grid search.
"""
import argparse

import numpy as np

from mmcoherence.metrics import EventScores
from mmcoherence.optimize import learn_weights
from mmcoherence.stats import spearman


def planted_scores(n: int, driver: str, seed: int) -> list[EventScores]:
    rng = np.random.default_rng(seed)
    dims = {name: rng.uniform(0, 1, n) for name in ("ic", "spc", "sc")}
    rank_signal = np.argsort(np.argsort(dims[driver])) / n
    dc = 0.9 * rank_signal + 0.1 * rng.uniform(0, 1, n)
    return [
        EventScores(
            f"e{i}",
            float(dims["ic"][i]),
            float(dims["spc"][i]),
            float(dims["sc"][i]),
            float(dc[i]),
            None,
        )
        for i in range(n)
    ]


def grid_search(scores: list[EventScores], step: float = 0.01) -> float:
    dims = np.array([[s.ic, s.spc, s.sc] for s in scores])
    dc = np.array([s.dc for s in scores])
    best = -2.0
    n = round(1 / step)
    for i in range(n + 1):
        for j in range(n + 1 - i):
            w = np.array([i, j, n - i - j]) / n
            best = max(best, spearman(dims @ w, dc))
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=200)
    parser.add_argument("--driver", choices=("ic", "spc", "sc"), default="sc")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    scores = planted_scores(args.events, args.driver, args.seed)
    learned = learn_weights(scores, seed=args.seed)
    print(f"planted driver: {args.driver}, n = {args.events}, seed = {args.seed}")
    print(
        f"learned weights: w_ic = {learned.weights.w_ic:.4f}, "
        f"w_spc = {learned.weights.w_spc:.4f}, w_sc = {learned.weights.w_sc:.4f}"
    )
    print(f"achieved rho = {learned.rho:.4f}")
    for dim, rho in learned.per_dimension_rho.items():
        print(f"  single-dimension rho[{dim}] = {rho:.4f}")
    grid_best = grid_search(scores)
    print(f"grid-search optimum (step 0.01): {grid_best:.4f} (gap {grid_best - learned.rho:+.4f})")


if __name__ == "__main__":
    main()
