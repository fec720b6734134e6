"""Diversity enhancement without differentiability.

A stochastic pullback of the weighting gradient flow (candidate
perturbations scored against the objective-space target), a gradient-driven
effort allocation, and a Metropolis-Hastings magnitude maximizer over a
finite ground set with the scale frozen at its original positive cutoff.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MagflowError, ProposalExhaustedError
from .flow import jacobian, pullback, weighting_gradient
from .geometry import PointSet, distance_matrix, similarity
from .magnitude import positive_cutoff, solve_weighting
from .problems import Population, dominance_counts


def nearest_neighbor_scales(xs: np.ndarray) -> np.ndarray:
    """Per-point perturbation scales delta_j = 0.5 min_{k != j} |x_j - x_k|."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    n = xs.shape[0]
    if n < 2:
        raise ValueError("need at least two points for neighbor scales")
    d = distance_matrix(PointSet(xs)).d + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    return 0.5 * d.min(axis=1)


def _orthonormal_basis(mu: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis whose first column is mu-hat (Householder)."""
    M = mu.shape[0]
    norm = np.linalg.norm(mu)
    if norm == 0.0:
        return np.eye(M)
    u = mu / norm
    v = u.copy()
    v[0] += math.copysign(1.0, u[0] if u[0] != 0 else 1.0)
    v /= np.linalg.norm(v)
    H = np.eye(M) - 2.0 * np.outer(v, v)  # H maps e_0 to -sign*u; fix the sign
    if np.dot(H[:, 0], u) < 0:
        H[:, 0] *= -1.0
    B = H.copy()
    B[:, 0] = u
    # re-orthogonalize the trailing columns against u (guards rounding)
    for i in range(1, M):
        B[:, i] -= np.dot(B[:, i], u) * u
        B[:, i] /= np.linalg.norm(B[:, i])
    return B


@dataclass
class PerturbationModel:
    """Gaussian candidate sampler delta-x ~ N(mu_j, Sigma_j) per point.

    mu_j solves the Jacobian system D_x f mu = (grad w)|_{f(x_j)} in least
    squares; Sigma_j = diag(|mu_j|, delta_j, ..., delta_j) in an orthonormal
    basis with first vector mu_j (isotropic delta_j fallback when mu_j = 0).
    """

    mus: np.ndarray          # (n, M)
    deltas: np.ndarray       # (n,)
    evaluations: int = 0

    @classmethod
    def from_population(cls, pop: Population, grad_vectors: np.ndarray) -> "PerturbationModel":
        n = pop.n
        mus = np.zeros((n, pop.problem.n_var))
        evals = 0
        for j in range(n):
            J, used = jacobian(pop.problem, pop.xs[j], pop.ys[j])
            evals += used
            mus[j] = pullback(J, grad_vectors[j])
        return cls(mus=mus, deltas=nearest_neighbor_scales(pop.xs), evaluations=evals)

    def sample(self, j: int, rng: np.random.Generator) -> np.ndarray:
        mu = self.mus[j]
        delta = float(self.deltas[j])
        M = mu.shape[0]
        xi = rng.standard_normal(M)
        norm = np.linalg.norm(mu)
        if norm == 0.0:
            return math.sqrt(delta) * xi
        stdev = np.sqrt(np.concatenate([[norm], np.full(M - 1, delta)]))
        return mu + _orthonormal_basis(mu) @ (stdev * xi)


def gradient_step_scale(grad_vectors: np.ndarray, ys: np.ndarray) -> float:
    """delta-s = delta-d / (2 <|grad w|>): mean nearest-neighbor objective distance
    (zeros excluded) over twice the mean gradient norm."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    n = ys.shape[0]
    d = distance_matrix(PointSet(ys)).d
    d = d + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    d[d == 0.0] = np.inf
    nn = d.min(axis=1)
    nn = nn[np.isfinite(nn)]
    if nn.size == 0:
        raise MagflowError("all objective points coincide: no nonzero distances")
    mean_norm = np.linalg.norm(grad_vectors, axis=1).mean()
    if mean_norm == 0.0:
        raise MagflowError("zero gradient field: no step scale")
    return float(nn.mean() / (2.0 * mean_norm))


def effort(grad_norms: np.ndarray, C: float) -> np.ndarray:
    """Candidate counts E_j = ceil(C |grad w|_j / sum |grad w|)."""
    g = np.asarray(grad_norms, dtype=float)
    if np.any(g < 0):
        raise ValueError("gradient norms must be nonnegative")
    total = g.sum()
    if total == 0.0:
        raise ValueError("all gradient norms are zero")
    if C <= 0:
        raise ValueError("C must be positive")
    return np.ceil(C * g / total).astype(int)


def stochastic_flow_step(pop: Population, model: PerturbationModel,
                         num_candidates, rng: np.random.Generator,
                         t: float | None = None,
                         grad_vectors: np.ndarray | None = None,
                         delta_s: float | None = None) -> Population:
    """Stochastic analogue of the pulled-back flow.

    For each point, draws its candidate perturbations from the model,
    evaluates the objective at each, and keeps the candidate whose image is
    closest to the target f(x) + delta_s * (grad w)|_{f(x)}. The null
    perturbation is always admissible, so points whose target is nearer to
    where they already sit stay put (a significant fraction does on the
    first step), and points whose candidates all fail the bounds/finiteness
    check never move.
    """
    problem = pop.problem
    n = pop.n
    if grad_vectors is None:
        ys = PointSet(pop.ys)
        dY = distance_matrix(ys)
        if t is None:
            rep = positive_cutoff(dY)
            t = rep.t_plus if rep.t_plus and rep.t_plus > 0 else rep.t_d
        Z = similarity(dY, t)
        grad_vectors = weighting_gradient(ys, Z, solve_weighting(Z)).vectors
    if delta_s is None:
        delta_s = gradient_step_scale(grad_vectors, pop.ys)
    counts = (np.full(n, int(num_candidates)) if np.isscalar(num_candidates)
              else np.asarray(num_candidates, dtype=int))
    new_xs = pop.xs.copy()
    new_ys = pop.ys.copy()
    for j in range(n):
        target = pop.ys[j] + delta_s * grad_vectors[j]
        best = None
        best_dist = float(np.linalg.norm(pop.ys[j] - target))  # null perturbation
        for _ in range(int(counts[j])):
            dx = model.sample(j, rng)
            x_cand = pop.xs[j] + dx
            if not np.all(np.isfinite(x_cand)) or not problem.in_bounds(x_cand):
                continue
            y_cand = problem.evaluate(x_cand)
            if not np.all(np.isfinite(y_cand)):
                continue
            dist = float(np.linalg.norm(y_cand - target))
            if dist < best_dist:
                best_dist = dist
                best = (x_cand, y_cand)
        if best is not None:
            new_xs[j], new_ys[j] = best
    return Population(problem, new_xs, new_ys, dominance_counts(new_ys),
                      np.ones(n, dtype=bool))


# ---------------------------------------------------------------------------
# Metropolis-Hastings magnitude maximizer on a finite ground set
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MHConfig:
    beta: float = np.inf
    steps: int = 200
    n_select: int = 10
    n_candidates: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive (inf allowed)")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


def _magnitude(points: np.ndarray, t: float) -> float:
    return solve_weighting(similarity(distance_matrix(PointSet(points)), t)).magnitude


def _in_set(x: np.ndarray, points: np.ndarray) -> bool:
    return bool(np.any(np.all(points == x, axis=1)))


def _draw_candidates(ground: np.ndarray, points: np.ndarray, count: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Sample `count` ground-set rows outside the current locations, no replacement."""
    occupied = np.zeros(len(ground), dtype=bool)
    for p in points:
        occupied |= np.all(ground == p, axis=1)
    avail = np.nonzero(~occupied)[0]
    if avail.size < count:
        raise ProposalExhaustedError(
            f"only {avail.size} ground-set points available, need {count}")
    return ground[rng.choice(avail, size=count, replace=False)]


def mh_magnitude_step(points: np.ndarray, proposal, t_plus_fixed: float,
                      cfg: MHConfig, rng: np.random.Generator):
    """One Metropolis-Hastings swap attempt at the frozen scale.

    Picks the minimum-weight index (lowest index on ties), proposes a point
    outside the current set, and accepts when the swapped magnitude does not
    decrease, otherwise with probability exp(-beta (mu - mu')). Returns
    (points, accepted, magnitude after the step).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    wt = solve_weighting(similarity(distance_matrix(PointSet(points)), t_plus_fixed))
    j_star = int(np.argmin(wt.w))
    mu = wt.magnitude
    if callable(proposal):
        x_new = np.asarray(proposal(rng, points, j_star), dtype=float)
        if _in_set(x_new, points):
            return points, False, mu  # guard: x' must lie outside the current set
    else:
        x_new = _draw_candidates(np.asarray(proposal, dtype=float), points, 1, rng)[0]
    trial = points.copy()
    trial[j_star] = x_new
    mu_new = _magnitude(trial, t_plus_fixed)
    accept = mu_new >= mu
    if not accept and np.isfinite(cfg.beta):
        accept = rng.random() < math.exp(-cfg.beta * (mu - mu_new))
    if accept:
        return trial, True, mu_new
    return points, False, mu


def mh_batch_maximizer(ground: np.ndarray, initial: np.ndarray, cfg: MHConfig,
                     t_plus_fixed: float | None = None):
    """Batch maximizer protocol: per step, swap candidates into the least-weight slots.

    Each step selects the cfg.n_select points with least weighting component,
    samples cfg.n_candidates ground-set points outside the current locations
    without replacement, then tests the substitutions in ascending order of
    weighting component, accepting each swap by the MH rule (improvements
    always accepted; beta = inf accepts nothing else). The scale stays at the
    initial configuration's positive cutoff for the whole run.

    Returns (final points, magnitude trace of length steps + 1, accepted counts).
    """
    rng = np.random.default_rng(cfg.seed)
    points = np.atleast_2d(np.asarray(initial, dtype=float)).copy()
    ground = np.asarray(ground, dtype=float)
    if t_plus_fixed is None:
        rep = positive_cutoff(distance_matrix(PointSet(points)))
        t_plus_fixed = rep.t_plus if rep.t_plus and rep.t_plus > 0 else rep.t_d
    mu = _magnitude(points, t_plus_fixed)
    trace = [mu]
    accepted_per_step = []
    for _ in range(cfg.steps):
        wt = solve_weighting(similarity(distance_matrix(PointSet(points)), t_plus_fixed))
        order = np.argsort(wt.w, kind="stable")[: cfg.n_select]
        candidates = _draw_candidates(ground, points, cfg.n_candidates, rng)
        accepted = 0
        for slot, j in enumerate(order):
            if slot >= len(candidates):
                break
            trial = points.copy()
            trial[j] = candidates[slot]
            try:
                mu_new = _magnitude(trial, t_plus_fixed)
            except MagflowError:
                continue
            take = mu_new >= mu
            if not take and np.isfinite(cfg.beta):
                take = rng.random() < math.exp(-cfg.beta * (mu - mu_new))
            if take:
                points = trial
                mu = mu_new
                accepted += 1
        trace.append(mu)
        accepted_per_step.append(accepted)
    return points, np.asarray(trace), np.asarray(accepted_per_step, dtype=int)


def lattice_ground_set(side: int) -> np.ndarray:
    """Integer lattice on [0, side-1]^2 as a ground set for the maximizer."""
    g = np.arange(side, dtype=float)
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def sample_lattice(ground: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sample `count` distinct ground-set points (without replacement)."""
    idx = rng.choice(len(ground), size=count, replace=False)
    return ground[idx].copy()
