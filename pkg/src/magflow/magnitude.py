"""Weightings, magnitude, diversity, cutoff scales, spread, and erosion.

A weighting w solves Z w = 1 for a similarity matrix Z = exp(-t d); its
component sum is the magnitude, a scale-dependent effective number of
points. Above the positive cutoff t_plus the normalized weighting is the
unique diversity-maximizing distribution, which is what the flow and the
discrete maximizer exploit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import IllConditionedError, MagflowError, ScaleSearchError
from .geometry import DistanceMatrix, ScaledSimilarity, similarity

# Entries above this are "positive" for weighting purposes; separates genuine
# negativity from solver noise at the residual bound below.
POSITIVITY_TOL = 1e-10

# Residual contract: max |Z w - 1| <= RESIDUAL_RTOL * n for returned weightings.
RESIDUAL_RTOL = 1e-8

# Condition estimates above this abort the solve.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Weighting:
    """Solution of Z w = 1 together with its magnitude and positivity flag."""

    w: np.ndarray
    t: float
    magnitude: float
    all_positive: bool

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def distribution(self) -> np.ndarray:
        """Normalized weighting w / sum(w); diversity-maximizing when positive."""
        return self.w / self.w.sum()


@dataclass(frozen=True)
class ScaleReport:
    """Diagonal cutoff t_d with its analytic bracket, plus the positive cutoff."""

    t_d: float
    lower_bound: float
    upper_bound: float
    t_plus: float | None = None

    def __post_init__(self):
        slack = 1e-9 * max(abs(self.upper_bound), 1.0)
        if not self.lower_bound - slack <= self.t_d <= self.upper_bound + slack:
            raise ValueError("t_d outside its bracket")
        if self.t_plus is not None and self.t_plus > self.t_d * (1 + 1e-9) + 1e-12:
            raise ValueError("t_plus must not exceed t_d")


@dataclass(frozen=True)
class MagnitudeProfile:
    """Magnitude function sampled on a strictly increasing scale grid.

    Scales where the solver failed are recorded in `gaps`, not interpolated.
    """

    ts: np.ndarray
    magnitudes: np.ndarray
    n: int
    gaps: tuple = ()

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        mags = np.asarray(self.magnitudes, dtype=float)
        if ts.shape != mags.shape:
            raise ValueError("ts and magnitudes must align")
        if ts.size and np.any(np.diff(ts) <= 0):
            raise ValueError("profile scales must be strictly increasing")
        if not np.all(np.isfinite(mags)):
            raise ValueError("profile magnitudes must be finite")
        if mags.size and (np.any(mags <= 0) or np.any(mags > self.n + 1e-6)):
            raise ValueError("magnitudes must lie in (0, n] up to 1e-6 slack")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "magnitudes", mags)


@dataclass(frozen=True)
class DiversityDistribution:
    """Probability vector with the diversity orders it was validated against."""

    p: np.ndarray
    q_checked: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("p must be a probability vector (sum 1 within 1e-10)")
        object.__setattr__(self, "p", p)


def _factorize(Z_arr: np.ndarray):
    """SPD factorization first, pivoted LU fallback; diagonal-ratio condition estimate."""
    try:
        c, low = scipy.linalg.cho_factor(Z_arr, lower=True, check_finite=False)
        diag = np.abs(np.diag(c))
        cond = float((diag.max() / diag.min()) ** 2) if diag.min() > 0 else np.inf
        return ("chol", (c, low), cond)
    except scipy.linalg.LinAlgError:
        pass
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(Z_arr, check_finite=False)
    diag = np.abs(np.diag(lu))
    cond = float(diag.max() / diag.min()) if diag.min() > 0 else np.inf
    return ("lu", (lu, piv), cond)


def _factor_solve(kind, fac, b):
    if kind == "chol":
        return scipy.linalg.cho_solve(fac, b, check_finite=False)
    return scipy.linalg.lu_solve(fac, b, check_finite=False)


def _cached_factor(Z: ScaledSimilarity):
    if not Z._factor_cache:
        Z._factor_cache.append(_factorize(Z.Z))
    return Z._factor_cache[0]


def solve_weighting(Z: ScaledSimilarity) -> Weighting:
    """Solve Z w = 1 to the residual contract, with iterative refinement.

    Raises IllConditionedError (carrying the condition estimate) when the
    factorization's diagonal-ratio estimate exceeds 1e12 or refinement cannot
    reach max |Z w - 1| <= 1e-8 n.
    """
    n = Z.n
    kind, fac, cond = _cached_factor(Z)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(cond)
    ones = np.ones(n)
    w = _factor_solve(kind, fac, ones)
    bound = RESIDUAL_RTOL * n
    for _ in range(4):
        r = ones - Z.Z @ w
        res = np.abs(r).max()
        if res <= bound:
            break
        w = w + _factor_solve(kind, fac, r)
    else:
        r = ones - Z.Z @ w
        res = np.abs(r).max()
    if res > bound:
        raise IllConditionedError(cond, f"residual {res:.3e} above bound {bound:.3e}")
    mag = float(w.sum())
    return Weighting(w=w, t=Z.t, magnitude=mag, all_positive=bool(w.min() > POSITIVITY_TOL))


def solve_coweighting(Z: ScaledSimilarity) -> Weighting:
    """Coweighting: transpose of a weighting for Z^T (equal to w for symmetric Z)."""
    Zt = ScaledSimilarity(np.ascontiguousarray(Z.Z.T), Z.t)
    return solve_weighting(Zt)


def magnitude_of(Z: ScaledSimilarity) -> float:
    """Sum of weighting components; equals 1^T Z^{-1} 1 for invertible Z."""
    return solve_weighting(Z).magnitude


def magnitude_profile(d: DistanceMatrix, t_min: float | None = None,
                      t_max: float | None = None, count: int = 64) -> MagnitudeProfile:
    """Magnitude function on a log-spaced grid; solver failures become gaps.

    Default grid spans [t_plus / 10, 10 t_d], covering the informative regime
    around both cutoffs (degenerate cutoffs fall back sensibly).
    """
    if t_min is None or t_max is None:
        rep = positive_cutoff(d)
        hi_anchor = rep.t_d if rep.t_d > 0 else 1.0
        if t_max is None:
            t_max = 10.0 * hi_anchor
        if t_min is None:
            t_min = (rep.t_plus / 10.0) if rep.t_plus and rep.t_plus > 0 else hi_anchor / 100.0
    if not (0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    if count < 2:
        raise ValueError("count must be >= 2")
    grid = np.geomspace(t_min, t_max, count)
    ts, mags, gaps = [], [], []
    for t in grid:
        try:
            mags.append(magnitude_of(similarity(d, t)))
            ts.append(t)
        except MagflowError:
            gaps.append(float(t))
    return MagnitudeProfile(np.asarray(ts), np.asarray(mags), n=d.n, gaps=tuple(gaps))


def _dominance_predicate(d: DistanceMatrix, t: float) -> bool:
    """True when exp(-t d) is strictly diagonally dominant."""
    E = np.exp(-t * d.d)
    np.fill_diagonal(E, 0.0)
    return bool(E.sum(axis=1).max() < 1.0)


def diagonal_cutoff(d: DistanceMatrix, tol: float = 1e-6) -> ScaleReport:
    """Minimal t_d with exp(-t d) diagonally dominant for t > t_d.

    Bisects the dominance predicate inside the analytic bracket
    [log(n-1)/min_j max_k d_jk, log(n-1)/min_j min_{k != j} d_jk]
    until the relative width is below tol.
    """
    n = d.n
    if n < 2:
        raise ValueError("diagonal cutoff needs n >= 2")
    if d.min_offdiag() <= 0.0:
        raise ScaleSearchError("zero off-diagonal distance: no finite diagonal cutoff")
    log_nm1 = math.log(n - 1)
    row_max = d.d.max(axis=1)
    off = d.d + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    row_min = off.min(axis=1)
    lower = log_nm1 / float(row_max.min())
    upper = log_nm1 / float(row_min.min())
    if log_nm1 == 0.0:  # n = 2: every t > 0 is diagonally dominant
        return ScaleReport(t_d=0.0, lower_bound=0.0, upper_bound=0.0)
    lo, hi = lower, upper
    # the cutoff is an infimum: when some row attains the bound with equality
    # the predicate is false at exactly t_d = upper, so nudge the search side
    while not _dominance_predicate(d, hi):
        hi *= 1.0 + 1e-9
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _dominance_predicate(d, mid):
            hi = mid
        else:
            lo = mid
    return ScaleReport(t_d=min(hi, upper), lower_bound=lower, upper_bound=upper)


def _probe_positivity(d: DistanceMatrix, t: float) -> str:
    """Classify scale t as 'positive', 'negative', 'marginal', or 'unsolvable'.

    The certification band is max(POSITIVITY_TOL, cond * eps * max|w|): the
    solver cannot distinguish signs inside it, so only values clearing the
    band count as positive and only values below -band as negative.
    """
    try:
        Z = similarity(d, t)
        wt = solve_weighting(Z)
    except MagflowError:
        return "unsolvable"
    cond = _cached_factor(Z)[2]
    band = max(POSITIVITY_TOL, cond * np.finfo(float).eps * np.abs(wt.w).max())
    lo = wt.w.min()
    if lo > band:
        return "positive"
    return "negative" if lo < -band else "marginal"


def _positive_at(d: DistanceMatrix, t: float) -> bool:
    """Predicate P(t): the weighting at scale t is certifiably all-positive."""
    return _probe_positivity(d, t) == "positive"


def positive_cutoff(d: DistanceMatrix, tol: float = 1e-6) -> ScaleReport:
    """Smallest t_plus <= t_d above which the weighting is entrywise positive.

    Scans geometrically downward from t_d (factor 2) to bracket the last sign
    change, bisects to relative tol, then validates positivity on 32
    log-spaced probes in (t_plus, t_d]; a failed probe (non-monotone pocket)
    demotes the result to ScaleSearchError.
    """
    rep = diagonal_cutoff(d, tol)
    t_d = rep.t_d
    if d.n <= 2:
        # two-point weighting w = 1/(1 + e^{-t d}) is positive for all t > 0
        return ScaleReport(t_d=t_d, lower_bound=rep.lower_bound,
                           upper_bound=rep.upper_bound, t_plus=0.0)
    if not _positive_at(d, t_d):
        raise ScaleSearchError(
            "weighting not positive at the diagonal cutoff: inconsistent input")
    # descend until a certified sign change appears; marginal probes (noise
    # band) keep descending, and two unsolvable probes in a row mean the
    # conditioning cliff was reached with no sign change above it
    t_hi = t_d
    t_neg = None
    t = 0.5 * t_d
    floor = t_d * 2.0 ** -60
    unsolvable_run = 0
    while t >= floor:
        cls = _probe_positivity(d, t)
        if cls == "positive":
            t_hi = t
            unsolvable_run = 0
        elif cls == "negative":
            t_neg = t
            break
        elif cls == "unsolvable":
            unsolvable_run += 1
            if unsolvable_run >= 2:
                break
        else:
            unsolvable_run = 0
        t *= 0.5
    if t_neg is None:  # no sign change anywhere above the floor/cliff
        return ScaleReport(t_d=t_d, lower_bound=rep.lower_bound,
                           upper_bound=rep.upper_bound, t_plus=0.0)
    t_lo = t_neg
    while t_hi - t_lo > tol * t_hi:
        mid = 0.5 * (t_lo + t_hi)
        if _positive_at(d, mid):
            t_hi = mid
        else:
            t_lo = mid
    t_plus = t_hi
    probes = np.geomspace(min(t_plus * (1.0 + 2.0 * tol), t_d), t_d, 32)
    for t in probes:
        # an unambiguously negative weight above t_plus is a non-monotone
        # pocket; marginal/unsolvable probes only occur hugging the crossing
        # or the conditioning cliff and are inconclusive, not disqualifying
        if _probe_positivity(d, t) == "negative":
            raise ScaleSearchError(
                f"positivity fails at probe t={t:.6g} inside ({t_plus:.6g}, {t_d:.6g}]")
    return ScaleReport(t_d=t_d, lower_bound=rep.lower_bound,
                       upper_bound=rep.upper_bound, t_plus=t_plus)


def zero_scale_weighting(d: DistanceMatrix) -> np.ndarray:
    """Zero-scale limit w(0) = d^{-1} 1 / (1^T d^{-1} 1); sums to 1, may go negative."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(d.d, check_finite=False)
    diag = np.abs(np.diag(lu))
    cond = float(diag.max() / diag.min()) if diag.min() > 0 else np.inf
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(cond, "distance matrix singular in zero-scale limit")
    u = scipy.linalg.lu_solve((lu, piv), np.ones(d.n), check_finite=False)
    total = u.sum()
    if abs(total) < 1e-300:
        raise IllConditionedError(np.inf, "1^T d^{-1} 1 vanishes")
    return u / total


def diversity_order_q(Z: ScaledSimilarity, p: np.ndarray, q: float) -> float:
    """Similarity-sensitive diversity of order q for distribution p.

    Order-1 and order-infinity values use their analytic limit formulas.
    With Z = I this reduces to the exponential of Renyi entropy.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (Z.n,):
        raise ValueError("p must have one entry per point")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("p must be a probability vector")
    if not (q >= 0):
        raise ValueError("order q must be nonnegative")
    support = p > 0
    if not support.any():
        raise ValueError("p must have nonempty support")
    zp = (Z.Z @ p)[support]
    ps = p[support]
    if np.isinf(q):
        return float(1.0 / zp.max())
    if q == 1.0:
        return float(np.exp(-np.sum(ps * np.log(zp))))
    return float(np.exp(np.log(np.sum(ps * zp ** (q - 1.0))) / (1.0 - q)))


def maximum_diversity_distribution(d: DistanceMatrix, t: float,
                                   orders=(0.0, 1.0, 2.0, np.inf)) -> DiversityDistribution:
    """Normalize a positive weighting and validate q-independence of its diversity."""
    Z = similarity(d, t)
    wt = solve_weighting(Z)
    if not wt.all_positive:
        raise ScaleSearchError("weighting not positive: no certified maximizer at this scale")
    p = wt.distribution()
    checked = []
    for q in orders:
        div = diversity_order_q(Z, p, q)
        if abs(div - wt.magnitude) > 1e-6 * wt.magnitude:
            raise ScaleSearchError(f"diversity at q={q} deviates from magnitude")
        checked.append(q)
    return DiversityDistribution(p=p, q_checked=tuple(checked))


def spread(d: DistanceMatrix, t: float):
    """Spread vector a_j = 1 / sum_k exp(-t d_jk) (self term included) and E0 = sum a."""
    if not (np.isfinite(t) and t > 0):
        raise ValueError("scale t must be positive and finite")
    a = 1.0 / np.exp(-t * d.d).sum(axis=1)
    return float(a.sum()), a


def erode(d: DistanceMatrix, t: float):
    """Iteratively drop nonpositive-weight points until the weighting is positive.

    Returns (retained indices into d, final Weighting on the eroded subset).
    Terminates within n iterations; the normalized final weighting maximizes
    diversity on the retained subset.
    """
    idx = np.arange(d.n)
    for _ in range(d.n):
        sub = DistanceMatrix(d.d[np.ix_(idx, idx)])
        wt = solve_weighting(similarity(sub, t))
        if wt.all_positive:
            return idx, wt
        keep = wt.w > POSITIVITY_TOL
        if not keep.any():
            raise ScaleSearchError("erosion emptied the set")
        idx = idx[keep]
    raise ScaleSearchError("erosion failed to terminate")  # unreachable: <= n drops
