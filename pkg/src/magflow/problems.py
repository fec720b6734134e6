"""Objective problems, Pareto dominance machinery, and IGD.

Problems are pure vectorized evaluators with box bounds and a reference
sampler for their Pareto front. Minimization throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ObjectiveProblem:
    """Evaluatable map f: R^M -> R^m with box bounds and a front sampler."""

    name: str
    n_var: int
    n_obj: int
    lower: np.ndarray
    upper: np.ndarray
    evaluator: callable = field(repr=False)
    front_sampler: callable = field(repr=False, default=None)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate_batch(np.asarray(x, dtype=float)[None, :])[0]

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_var:
            raise ValueError(f"{self.name} expects {self.n_var} variables, got {X.shape[1]}")
        return self.evaluator(X)

    def pareto_front(self, count: int = 1000, seed: int = 12345) -> np.ndarray:
        """Mutually nondominated reference points on the known front."""
        if self.front_sampler is None:
            raise ValueError(f"{self.name} has no Pareto-front sampler")
        return self.front_sampler(count, np.random.default_rng(seed))

    def clip(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)

    def in_bounds(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


def dominance_counts(ys: np.ndarray) -> np.ndarray:
    """dom_j = number of points dominating j (<= everywhere, < somewhere)."""
    Y = np.atleast_2d(np.asarray(ys, dtype=float))
    n = Y.shape[0]
    # pairwise: k dominates j iff Y[k] <= Y[j] componentwise and Y[k] != Y[j]
    le = np.all(Y[:, None, :] <= Y[None, :, :], axis=2)
    lt = np.any(Y[:, None, :] < Y[None, :, :], axis=2)
    dom = (le & lt).sum(axis=0)
    return dom.astype(int)


def delta_dominance_filter(ys: np.ndarray, delta: float) -> np.ndarray:
    """Indices retained under additive delta-dominance.

    j is dropped iff some k beats it by more than delta in every coordinate
    (y_k + delta < y_j componentwise); at delta = 0 this retains exactly the
    points not strictly dominated in every coordinate, so nondominated points
    survive any delta >= 0.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    Y = np.atleast_2d(np.asarray(ys, dtype=float))
    if np.isinf(delta):
        return np.arange(Y.shape[0])
    beats = np.all(Y[:, None, :] + delta < Y[None, :, :], axis=2)
    dropped = beats.any(axis=0)
    return np.nonzero(~dropped)[0]


def unique_objective_indices(ys: np.ndarray) -> np.ndarray:
    """Indices of the first occurrence of each distinct objective vector.

    Seeded populations can carry exact clones (elitism, flat transformation
    regions); coincident objective points make the similarity matrix singular
    and the cutoff scales undefined, so flows dedupe at entry.
    """
    Y = np.atleast_2d(np.asarray(ys, dtype=float))
    _, first = np.unique(Y, axis=0, return_index=True)
    return np.sort(first)


def igd(X: np.ndarray, R: np.ndarray) -> float:
    """Inverted generational distance: mean over r in R of min_x |x - r|."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if X.shape[0] == 0 or R.shape[0] == 0:
        raise ValueError("igd needs nonempty point sets")
    diff = R[:, None, :] - X[None, :, :]
    dists = np.sqrt(np.sum(diff * diff, axis=2))
    return float(dists.min(axis=1).mean())


@dataclass
class Population:
    """Paired solution points xs and objective points ys = f(xs) with dominance counts."""

    problem: ObjectiveProblem
    xs: np.ndarray
    ys: np.ndarray
    dom: np.ndarray
    feasible: np.ndarray

    @classmethod
    def from_solutions(cls, problem: ObjectiveProblem, xs: np.ndarray) -> "Population":
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = problem.evaluate_batch(xs)
        return cls(problem=problem, xs=xs, ys=ys, dom=dominance_counts(ys),
                   feasible=np.ones(len(xs), dtype=bool))

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def nondominated_mask(self) -> np.ndarray:
        return self.dom == 0

    def copy(self) -> "Population":
        return Population(self.problem, self.xs.copy(), self.ys.copy(),
                          self.dom.copy(), self.feasible.copy())


# ---------------------------------------------------------------------------
# polygon toys: objectives are distances to the vertices of a regular k-gon
# ---------------------------------------------------------------------------

def polygon_problem(k: int) -> ObjectiveProblem:
    """k objectives measuring distance to the vertices of a regular k-gon on S^1."""
    if k < 3:
        raise ValueError("polygon needs k >= 3 vertices")
    angles = 2.0 * np.pi * np.arange(k) / k
    verts = np.column_stack([np.cos(angles), np.sin(angles)])

    def evaluate(X):
        diff = X[:, None, :] - verts[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    def sampler(count, rng):
        # uniform points in the convex hull of the vertices, mapped through f
        pts = []
        while len(pts) < count:
            cand = rng.uniform(-1.0, 1.0, size=(4 * count, 2))
            pts.extend(cand[_in_convex_hull(cand, verts)].tolist())
        pts = np.asarray(pts[:count])
        diff = pts[:, None, :] - verts[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    lo = np.full(2, -1.25)
    hi = np.full(2, 1.25)
    return ObjectiveProblem(f"polygon{k}", 2, k, lo, hi, evaluate, sampler)


def _in_convex_hull(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Membership test for the convex hull of polygon vertices in CCW order."""
    inside = np.ones(len(points), dtype=bool)
    k = len(verts)
    for i in range(k):
        a, b = verts[i], verts[(i + 1) % k]
        edge = b - a
        cross = edge[0] * (points[:, 1] - a[1]) - edge[1] * (points[:, 0] - a[0])
        inside &= cross >= 0.0
    return inside


def sample_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of the disk of the given radius (area-uniform)."""
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


# ---------------------------------------------------------------------------
# DTLZ4 / DTLZ7 (standard definitions, alpha = 100 bias for DTLZ4)
# ---------------------------------------------------------------------------

def dtlz_problem(which: int, n_var: int = 10, n_obj: int = 3) -> ObjectiveProblem:
    if which == 4:
        return _dtlz4(n_var, n_obj)
    if which == 7:
        return _dtlz7(n_var, n_obj)
    raise ValueError(f"unsupported DTLZ problem {which}")


def _dtlz4(n_var, n_obj, alpha=100.0):
    def evaluate(X):
        m = n_obj
        theta = 0.5 * np.pi * X[:, :m - 1] ** alpha
        g = np.sum((X[:, m - 1:] - 0.5) ** 2, axis=1)
        F = np.empty((X.shape[0], m))
        for j in range(m):
            f = 1.0 + g
            f = f * np.prod(np.cos(theta[:, :m - 1 - j]), axis=1)
            if j > 0:
                f = f * np.sin(theta[:, m - 1 - j])
            F[:, j] = f
        return F

    def sampler(count, rng):
        # g = 0 front: the unit sphere octant, parameterized by angles
        u = rng.random((count, n_obj - 1))
        theta = 0.5 * np.pi * u
        F = np.empty((count, n_obj))
        for j in range(n_obj):
            f = np.prod(np.cos(theta[:, :n_obj - 1 - j]), axis=1)
            if j > 0:
                f = f * np.sin(theta[:, n_obj - 1 - j])
            F[:, j] = f
        return F

    lo = np.zeros(n_var)
    hi = np.ones(n_var)
    return ObjectiveProblem("dtlz4", n_var, n_obj, lo, hi, evaluate, sampler)


def _dtlz7_efficient_intervals(grid_size=200_001):
    """Per-coordinate efficient set of phi(x) = x/2 (1 + sin 3 pi x).

    A coordinate value is efficient iff phi strictly exceeds its running
    maximum there; the front is the product of this set across position
    coordinates, giving the 2^{m-1} disconnected regions.
    """
    x = np.linspace(0.0, 1.0, grid_size)
    phi = 0.5 * x * (1.0 + np.sin(3.0 * np.pi * x))
    runmax = np.maximum.accumulate(phi)
    keep = phi >= runmax - 1e-12
    edges = np.flatnonzero(np.diff(keep.astype(int)))
    starts = [0] if keep[0] else []
    ends = []
    for e in edges:
        if keep[e + 1]:
            starts.append(e + 1)
        else:
            ends.append(e)
    if keep[-1]:
        ends.append(grid_size - 1)
    return [(x[a], x[b]) for a, b in zip(starts, ends) if x[b] > x[a]]


def _dtlz7(n_var, n_obj):
    def evaluate(X):
        m = n_obj
        g = 1.0 + 9.0 * np.mean(X[:, m - 1:], axis=1)
        F = np.empty((X.shape[0], m))
        F[:, :m - 1] = X[:, :m - 1]
        h = m - np.sum(F[:, :m - 1] / (1.0 + g)[:, None]
                       * (1.0 + np.sin(3.0 * np.pi * F[:, :m - 1])), axis=1)
        F[:, m - 1] = (1.0 + g) * h
        return F

    intervals = _dtlz7_efficient_intervals()
    lengths = np.array([b - a for a, b in intervals])
    weights = lengths / lengths.sum()

    def sample_efficient(count, rng):
        which = rng.choice(len(intervals), size=count, p=weights)
        lo = np.array([intervals[i][0] for i in which])
        hi = np.array([intervals[i][1] for i in which])
        return lo + rng.random(count) * (hi - lo)

    def sampler(count, rng):
        # exact front: position coordinates on the efficient set, tail at 0
        X = np.zeros((count, n_var))
        for i in range(n_obj - 1):
            X[:, i] = sample_efficient(count, rng)
        return evaluate(X)

    lo = np.zeros(n_var)
    hi = np.ones(n_var)
    return ObjectiveProblem("dtlz7", n_var, n_obj, lo, hi, evaluate, sampler)


# ---------------------------------------------------------------------------
# WFG2 / WFG3 (toolkit transformation pipeline, position parameter k = 4)
# ---------------------------------------------------------------------------

def wfg_problem(which: int, n_var: int = 10, n_obj: int = 3, k: int = 4) -> ObjectiveProblem:
    if which not in (2, 3):
        raise ValueError(f"unsupported WFG problem {which}")
    if k % (n_obj - 1) != 0:
        raise ValueError("position parameter k must be a multiple of n_obj - 1")
    l = n_var - k
    if l % 2 != 0:
        raise ValueError("WFG2/WFG3 need an even number of distance parameters")
    name = f"wfg{which}"
    S = 2.0 * np.arange(1, n_obj + 1)
    A = np.ones(n_obj - 1)
    if which == 3:
        A[1:] = 0.0
    hi = 2.0 * np.arange(1, n_var + 1)

    def transform(X):
        y = X / hi
        # t1: linear shift of the distance parameters toward 0.35
        y = y.copy()
        y[:, k:] = _shift_linear(y[:, k:], 0.35)
        # t2: nonseparable pairwise reduction of the distance block
        parts = [y[:, :k]]
        for i in range(l // 2):
            parts.append(_reduce_nonsep(y[:, k + 2 * i: k + 2 * i + 2], 2)[:, None])
        y = np.hstack(parts)
        # t3: uniform weighted-sum reduction to n_obj components
        gap = k // (n_obj - 1)
        t = [y[:, i * gap:(i + 1) * gap].mean(axis=1) for i in range(n_obj - 1)]
        t.append(y[:, k:].mean(axis=1))
        return np.column_stack(t)

    def evaluate(X):
        t = transform(X)
        x_last = t[:, -1]
        x = np.empty_like(t)
        for i in range(n_obj - 1):
            x[:, i] = np.maximum(x_last, A[i]) * (t[:, i] - 0.5) + 0.5
        x[:, -1] = x_last
        if which == 2:
            h = [_shape_convex(x[:, :-1], j + 1) for j in range(n_obj - 1)]
            h.append(_shape_disconnected(x[:, 0]))
        else:
            h = [_shape_linear(x[:, :-1], j + 1) for j in range(n_obj)]
        return x_last[:, None] + S * np.column_stack(h)

    def sampler(count, rng):
        # optimal distance parameters z_i = 0.35 * 2i; random position parameters,
        # rejecting dominated images (WFG2's front is disconnected)
        out = np.empty((0, n_obj))
        while out.shape[0] < count:
            cand = np.empty((4 * count, n_var))
            cand[:, :k] = rng.random((4 * count, k)) * hi[:k]
            cand[:, k:] = 0.35 * hi[k:]
            F = evaluate(cand)
            F = F[dominance_counts(F) == 0]
            out = np.vstack([out, F])
        return out[:count]

    lo = np.zeros(n_var)
    return ObjectiveProblem(name, n_var, n_obj, lo, hi, evaluate, sampler)


def _shift_linear(y, a):
    return np.abs(y - a) / np.abs(np.floor(a - y) + a)


def _reduce_nonsep(y, A):
    n, m = y.shape
    num = np.zeros(n)
    for j in range(m):
        num += y[:, j]
        for p in range(A - 1):
            num += np.abs(y[:, j] - y[:, (1 + j + p) % m])
    val = np.ceil(A / 2.0)
    denom = m * val * (1.0 + 2.0 * A - 2.0 * val) / A
    return num / denom


def _shape_convex(x, j):
    M = x.shape[1] + 1
    if j == 1:
        return np.prod(1.0 - np.cos(0.5 * np.pi * x), axis=1)
    if j < M:
        head = np.prod(1.0 - np.cos(0.5 * np.pi * x[:, :M - j]), axis=1)
        return head * (1.0 - np.sin(0.5 * np.pi * x[:, M - j]))
    return 1.0 - np.sin(0.5 * np.pi * x[:, 0])


def _shape_linear(x, j):
    M = x.shape[1] + 1
    if j == 1:
        return np.prod(x, axis=1)
    if j < M:
        return np.prod(x[:, :M - j], axis=1) * (1.0 - x[:, M - j])
    return 1.0 - x[:, 0]


def _shape_disconnected(x1, alpha=1.0, beta=1.0, A=5.0):
    return 1.0 - x1 ** alpha * np.cos(A * np.pi * x1 ** beta) ** 2


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

PROBLEM_NAMES = ("tri", "dodeca", "dtlz4", "dtlz7", "wfg2", "wfg3")


def get_problem(name: str) -> ObjectiveProblem:
    """Problems selectable by name string."""
    key = name.lower()
    if key == "tri":
        return polygon_problem(3)
    if key == "dodeca":
        return polygon_problem(12)
    if key == "dtlz4":
        return dtlz_problem(4)
    if key == "dtlz7":
        return dtlz_problem(7)
    if key == "wfg2":
        return wfg_problem(2)
    if key == "wfg3":
        return wfg_problem(3)
    raise ValueError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")
