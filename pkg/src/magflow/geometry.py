"""Point sets, Euclidean distance matrices, and scaled similarity matrices.

Everything downstream (weightings, cutoff scales, gradient fields) consumes
the three types defined here. Values are immutable after construction and
safe to share across threads.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError


def _frozen_array(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PointSet:
    """Ordered finite set of n points in R^m, rejecting non-finite coordinates."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("PointSet needs an (n, m) array with n >= 1, m >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("PointSet rejects NaN/inf coordinates")
        object.__setattr__(self, "points", _frozen_array(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative n x n matrix with zero diagonal.

    The stored matrix is exactly symmetric: the upper triangle is mirrored at
    construction so floating-point asymmetry cannot leak in.
    """

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance matrix entries must be finite")
        if np.any(np.diag(d) != 0.0):
            raise ValueError("distance matrix diagonal must be zero")
        if np.any(d < 0.0):
            raise ValueError("distance matrix entries must be nonnegative")
        sym = np.triu(d, 1)
        sym = sym + sym.T
        if not np.allclose(sym, d, rtol=1e-9, atol=1e-12):
            raise ValueError("distance matrix must be symmetric")
        object.__setattr__(self, "d", _frozen_array(sym))

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def offdiag(self) -> np.ndarray:
        """Off-diagonal entries as a flat array (empty for n = 1)."""
        mask = ~np.eye(self.n, dtype=bool)
        return self.d[mask]

    def min_offdiag(self) -> float:
        off = self.offdiag()
        return float(off.min()) if off.size else 0.0

    def max_offdiag(self) -> float:
        off = self.offdiag()
        return float(off.max()) if off.size else 0.0


@dataclass(frozen=True)
class ScaledSimilarity:
    """Entrywise similarity Z = exp(-t * d) at scale t > 0; unit diagonal."""

    Z: np.ndarray
    t: float
    _factor_cache: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not (np.isfinite(self.t) and self.t > 0):
            raise ValueError("scale t must be positive and finite")
        if np.any(np.diag(Z) != 1.0):
            raise ValueError("similarity diagonal must be exactly 1")
        # entries live in (0, 1]; exact zeros are admitted as exp underflow at huge t
        if np.any(Z < 0.0) or np.any(Z > 1.0):
            raise ValueError("similarity entries must lie in [0, 1]")
        object.__setattr__(self, "Z", _frozen_array(Z))
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.Z.shape[0]


def distance_matrix(ps: PointSet) -> DistanceMatrix:
    """Euclidean pairwise distances; upper triangle computed once and mirrored."""
    pts = ps.points
    n = ps.n
    d = np.zeros((n, n))
    for j in range(n - 1):
        diff = pts[j + 1:] - pts[j]
        d[j, j + 1:] = np.sqrt(np.sum(diff * diff, axis=1))
    return DistanceMatrix(d + d.T)


def similarity(d: DistanceMatrix, t: float) -> ScaledSimilarity:
    """Componentwise Z = exp(-t * d) with the diagonal pinned to exactly 1."""
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"scale t must be positive and finite, got {t!r}")
    Z = np.exp(-t * d.d)
    np.fill_diagonal(Z, 1.0)
    return ScaledSimilarity(Z, float(t))


def pullback_metric(problem, xs: PointSet) -> DistanceMatrix:
    """Distance matrix of the image points f(x_j): d_f(x, x') = d(f(x), f(x'))."""
    ys = problem.evaluate_batch(xs.points)
    bad = np.nonzero(~np.all(np.isfinite(ys), axis=1))[0]
    if bad.size:
        raise EvaluationError(bad.tolist())
    return distance_matrix(PointSet(ys))


def save_points_csv(path, points: np.ndarray, header: bool = False) -> None:
    """One row per point, columns are coordinates. Optional x1..xm header."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{i + 1}" for i in range(points.shape[1])])
        for row in points:
            writer.writerow([f"{v:.17g}" for v in row])


def load_points_csv(path) -> PointSet:
    """Read a coordinate CSV, tolerating an optional x1..xm header row."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            if i == 0:
                try:
                    float(row[0])
                except ValueError:
                    continue  # header row
            rows.append([float(v) for v in row])
    if not rows:
        raise ValueError(f"no points found in {path}")
    return PointSet(np.asarray(rows))
