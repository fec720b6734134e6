"""Minimal elitist NSGA-II used to seed Pareto-front overapproximations.

Binary tournament on (rank, crowding), simulated binary crossover,
polynomial mutation, and front-by-front environmental selection. Everything
draws from one seeded generator, so runs are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import ObjectiveProblem, Population, dominance_counts


@dataclass(frozen=True)
class GAConfig:
    pop_size: int = 250
    max_evaluations: int = 10_000
    crossover_prob: float = 0.9
    crossover_eta: float = 20.0
    mutation_eta: float = 20.0
    mutation_rate: float | None = None  # default 1/M
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 4 or self.pop_size % 2 != 0:
            raise ValueError("population size must be even and >= 4")
        if self.max_evaluations < self.pop_size:
            raise ValueError("max evaluations must cover at least one population")


def fast_nondominated_sort(ys: np.ndarray) -> list:
    """Fronts as index lists: front 0 nondominated, front i+1 after removing <= i."""
    Y = np.atleast_2d(np.asarray(ys, dtype=float))
    n = Y.shape[0]
    if n == 0:
        raise ValueError("empty objective set")
    le = np.all(Y[:, None, :] <= Y[None, :, :], axis=2)
    lt = np.any(Y[:, None, :] < Y[None, :, :], axis=2)
    dominates = le & lt  # dominates[p, q]: p dominates q
    n_dominators = dominates.sum(axis=0).astype(int)
    fronts = []
    current = np.nonzero(n_dominators == 0)[0]
    assigned = np.zeros(n, dtype=bool)
    while current.size:
        fronts.append(current.tolist())
        assigned[current] = True
        n_dominators = n_dominators - dominates[current].sum(axis=0)
        nxt = np.nonzero((n_dominators == 0) & ~assigned)[0]
        current = nxt
    return fronts


def crowding_distance(front_ys: np.ndarray) -> np.ndarray:
    """Crowding distances within one front; boundary points get infinity."""
    Y = np.atleast_2d(np.asarray(front_ys, dtype=float))
    n, m = Y.shape
    if n == 0:
        raise ValueError("empty front")
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        order = np.argsort(Y[:, j], kind="stable")
        lo, hi = Y[order[0], j], Y[order[-1], j]
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        if hi > lo:
            gaps = (Y[order[2:], j] - Y[order[:-2], j]) / (hi - lo)
            dist[order[1:-1]] += gaps
    return dist


def _rank_and_crowding(ys: np.ndarray):
    fronts = fast_nondominated_sort(ys)
    n = len(ys)
    rank = np.empty(n, dtype=int)
    crowd = np.empty(n)
    for r, front in enumerate(fronts):
        idx = np.asarray(front)
        rank[idx] = r
        crowd[idx] = crowding_distance(ys[idx])
    return rank, crowd, fronts


def _tournament(rank, crowd, rng, count):
    """Binary tournaments on (rank asc, crowding desc)."""
    n = rank.shape[0]
    a = rng.integers(0, n, size=count)
    b = rng.integers(0, n, size=count)
    better_b = (rank[b] < rank[a]) | ((rank[b] == rank[a]) & (crowd[b] > crowd[a]))
    return np.where(better_b, b, a)


def _sbx(parents1, parents2, lo, hi, eta, prob, rng):
    """Simulated binary crossover, per-variable with probability 0.5."""
    c1 = parents1.copy()
    c2 = parents2.copy()
    do_pair = rng.random(len(parents1)) < prob
    swap = rng.random(parents1.shape) < 0.5
    u = rng.random(parents1.shape)
    beta = np.where(u <= 0.5,
                    (2.0 * u) ** (1.0 / (eta + 1.0)),
                    (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)))
    mean = 0.5 * (parents1 + parents2)
    half = 0.5 * beta * (parents1 - parents2)
    v1 = mean + half
    v2 = mean - half
    apply = do_pair[:, None] & swap
    c1[apply] = v1[apply]
    c2[apply] = v2[apply]
    return np.clip(c1, lo, hi), np.clip(c2, lo, hi)


def _polynomial_mutation(X, lo, hi, eta, rate, rng):
    Y = X.copy()
    mutate = rng.random(X.shape) < rate
    r = rng.random(X.shape)
    delta = np.where(r < 0.5,
                     (2.0 * r) ** (1.0 / (eta + 1.0)) - 1.0,
                     1.0 - (2.0 * (1.0 - r)) ** (1.0 / (eta + 1.0)))
    Y[mutate] = (Y + delta * (hi - lo))[mutate]
    return np.clip(Y, lo, hi)


def _sanitize(Y: np.ndarray) -> np.ndarray:
    """Evaluation failures count as worst rank: non-finite rows pushed to +inf."""
    Y = Y.copy()
    bad = ~np.all(np.isfinite(Y), axis=1)
    Y[bad] = np.inf
    return Y


def _environmental_selection(X, Y, size):
    rank, crowd, fronts = _rank_and_crowding(Y)
    chosen = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
        else:
            idx = np.asarray(front)
            order = np.argsort(-crowd[idx], kind="stable")
            chosen.extend(idx[order[: size - len(chosen)]].tolist())
            break
    sel = np.asarray(chosen)
    return X[sel], Y[sel]


def nsga2_run(problem: ObjectiveProblem, cfg: GAConfig) -> Population:
    """Run NSGA-II within the evaluation budget and return the final population."""
    rng = np.random.default_rng(cfg.seed)
    pop = cfg.pop_size
    M = problem.n_var
    rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / M
    lo, hi = problem.lower, problem.upper
    X = lo + rng.random((pop, M)) * (hi - lo)
    Y = _sanitize(problem.evaluate_batch(X))
    evaluations = pop
    while evaluations + pop <= cfg.max_evaluations:
        rank, crowd, _ = _rank_and_crowding(Y)
        p1 = _tournament(rank, crowd, rng, pop // 2)
        p2 = _tournament(rank, crowd, rng, pop // 2)
        c1, c2 = _sbx(X[p1], X[p2], lo, hi, cfg.crossover_eta, cfg.crossover_prob, rng)
        children = np.vstack([c1, c2])
        children = _polynomial_mutation(children, lo, hi, cfg.mutation_eta, rate, rng)
        Yc = _sanitize(problem.evaluate_batch(children))
        evaluations += pop
        X, Y = _environmental_selection(np.vstack([X, children]), np.vstack([Y, Yc]), pop)
    return Population(problem=problem, xs=X, ys=Y, dom=dominance_counts(Y),
                      feasible=np.ones(pop, dtype=bool))
