"""Weighting gradient estimate and the (modulated) gradient flow.

The flow acts on objective points: dy_j = ds * S_j * (grad w)_j at the
positive cutoff scale, pulled back to solution space through the Jacobian
pseudoinverse, with badly behaving points restored to their predecessors.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EvaluationError, MagflowError, SingularPairError
from .geometry import DistanceMatrix, PointSet, ScaledSimilarity, distance_matrix, similarity
from .magnitude import Weighting, positive_cutoff, solve_weighting, spread
from .problems import ObjectiveProblem, Population, dominance_counts, igd

JACOBIAN_RCOND = 1e-10
IJE_RANK_RTOL = 1e-8


@dataclass(frozen=True)
class GradientField:
    """Per-point weighting-gradient estimates in objective-space units."""

    vectors: np.ndarray
    t: float


@dataclass(frozen=True)
class FlowConfig:
    """Parameters of one flow run."""

    steps: int = 10
    scale: float | None = None          # None: recompute t_plus each step
    speed_factor_enabled: bool = True
    lambda_w: float = 1.0
    lambda_f: float = 0.0
    jacobian_mode: str = "fresh"        # "fresh" | "recycled"
    flow_kind: str = "weighting"        # "weighting" | "multi" | "spread"
    ds_scale: float = 1.0               # step-size multiplier (sub-stepping)
    scale_tol: float = 1e-6
    reference_count: int = 1000

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.jacobian_mode not in ("fresh", "recycled"):
            raise ValueError("jacobian_mode must be 'fresh' or 'recycled'")
        if self.flow_kind not in ("weighting", "multi", "spread"):
            raise ValueError("unknown flow_kind")
        if self.flow_kind == "multi" and self.lambda_w + self.lambda_f <= 0:
            raise ValueError("multi-objective flow needs lambda_w + lambda_f > 0")


@dataclass
class FlowState:
    """Mutable bookkeeping shared across steps: eval counter and history pool."""

    evaluations: int = 0
    history_x: np.ndarray | None = None
    history_y: np.ndarray | None = None
    last_t: float | None = None
    last_ds: float | None = None

    def record(self, xs: np.ndarray, ys: np.ndarray) -> None:
        if self.history_x is None:
            self.history_x = xs.copy()
            self.history_y = ys.copy()
        else:
            self.history_x = np.vstack([self.history_x, xs])
            self.history_y = np.vstack([self.history_y, ys])


@dataclass(frozen=True)
class FlowSnapshot:
    step: int
    t_plus: float
    ds: float
    mag_feasible: float
    mag_nondom: float
    n_nondom: int
    igd: float
    evaluations: int
    population: Population


@dataclass
class FlowTrace:
    """Per-timestep snapshots; snapshot count is steps + 1 (step 0 included)."""

    snapshots: list = field(default_factory=list)

    def append(self, snap: FlowSnapshot) -> None:
        if self.snapshots and snap.evaluations < self.snapshots[-1].evaluations:
            raise ValueError("evaluation counter must be nondecreasing")
        self.snapshots.append(snap)

    def __len__(self):
        return len(self.snapshots)


def weighting_gradient(ps: PointSet, Z: ScaledSimilarity, w) -> GradientField:
    """Heuristic weighting-gradient estimate on a point cloud.

    (grad w)_j = sum_{k != j} [Z_jk / sum_{k' != j} Z_jk'] (w_k - w_j)/d_jk e_jk
    with unit vectors e_jk = (x_k - x_j)/d_jk. Coincident pairs are an error,
    as is an underflowed normalizing sum.
    """
    X = ps.points
    n = ps.n
    wv = w.w if isinstance(w, Weighting) else np.asarray(w, dtype=float)
    if n == 1:
        return GradientField(np.zeros_like(X), Z.t)
    d = distance_matrix(ps).d
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] == 0.0):
        j, k = np.argwhere((d == 0.0) & off)[0]
        raise SingularPairError(int(j), int(k))
    Zo = Z.Z.copy()
    np.fill_diagonal(Zo, 0.0)
    norm = Zo.sum(axis=1)
    if np.any(norm == 0.0):
        j = int(np.argmax(norm == 0.0))
        raise MagflowError(f"similarity row {j} underflowed to zero: scale too large")
    dd = d + np.eye(n)  # dummy diagonal, masked by Zo's zero diagonal
    coef = (Zo / norm[:, None]) * (wv[None, :] - wv[:, None]) / (dd * dd)
    vectors = coef @ X - coef.sum(axis=1)[:, None] * X
    if not np.all(np.isfinite(vectors)):
        raise MagflowError("non-finite gradient field")
    return GradientField(vectors, Z.t)


def speed_factors(dom: np.ndarray) -> np.ndarray:
    """S_j = 1 - 2 dom_j / max_k dom_k, with S = 1 everywhere when max is 0."""
    dom = np.asarray(dom, dtype=float)
    if np.any(dom < 0):
        raise ValueError("dominance counts must be nonnegative")
    peak = dom.max() if dom.size else 0.0
    if peak == 0.0:
        return np.ones_like(dom)
    return 1.0 - 2.0 * dom / peak


def step_size(ys) -> float:
    """ds = sqrt(mean nearest-neighbor distance / n) on the objective points."""
    pts = ys.points if isinstance(ys, PointSet) else np.atleast_2d(np.asarray(ys, float))
    n = pts.shape[0]
    if n < 2:
        raise ValueError("step size needs n >= 2")
    d = distance_matrix(PointSet(pts)).d + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    return float(np.sqrt(d.min(axis=1).mean() / n))


def jacobian(problem: ObjectiveProblem, x: np.ndarray, base_value: np.ndarray | None = None):
    """Forward-difference Jacobian (m x M) with probes clamped into the box.

    Step h_i = max(1e-6, 1e-6 |x_i|); probes flip to backward steps at the
    upper boundary. Costs M evaluations plus one for the base when it is not
    supplied. Returns (J, evaluations spent).
    """
    x = np.asarray(x, dtype=float)
    M = x.shape[0]
    evals = 0
    if base_value is None:
        base_value = problem.evaluate(x)
        evals += 1
    if not np.all(np.isfinite(base_value)):
        raise EvaluationError([-1], "non-finite base value for jacobian")
    J = np.empty((problem.n_obj, M))
    for i in range(M):
        h = max(1e-6, 1e-6 * abs(x[i]))
        probe = x.copy()
        probe[i] = min(x[i] + h, problem.upper[i])
        if probe[i] == x[i]:
            probe[i] = max(x[i] - h, problem.lower[i])
        denom = probe[i] - x[i]
        if denom == 0.0:
            raise EvaluationError([i], f"degenerate bounds prevent probing variable {i}")
        fp = problem.evaluate(probe)
        evals += 1
        if not np.all(np.isfinite(fp)):
            raise EvaluationError([i], f"non-finite objective at probe for variable {i}")
        J[:, i] = (fp - base_value) / denom
    return J, evals


def pullback(J: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """dx = J^+ dy, truncating singular values below rcond * sigma_max."""
    return np.linalg.pinv(J, rcond=JACOBIAN_RCOND) @ np.asarray(dy, dtype=float)


def recycled_jacobian(history_x: np.ndarray, history_y: np.ndarray,
                      x: np.ndarray, base_value: np.ndarray,
                      problem: ObjectiveProblem):
    """Initial Jacobian estimate from recycled evaluations, with fresh fallback.

    Least squares over the offsets of the M nearest previously evaluated
    neighbors; if the estimate's numerical rank (singular values >=
    1e-8 sigma_max) is below min(m, M), falls back to a fresh
    finite-difference Jacobian. Returns (J, fresh evaluations spent).
    """
    M = problem.n_var
    m = problem.n_obj
    if history_x is None or len(history_x) == 0:
        return jacobian(problem, x, base_value)
    dx = history_x - x
    dist = np.sqrt(np.sum(dx * dx, axis=1))
    usable = dist > 1e-14
    if not usable.any():
        return jacobian(problem, x, base_value)
    order = np.argsort(dist[usable])[:M]
    DX = dx[usable][order]
    DY = (history_y - base_value)[usable][order]
    sol, *_ = np.linalg.lstsq(DX, DY, rcond=None)
    J = sol.T
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv >= IJE_RANK_RTOL * sv.max())) if sv.size and sv.max() > 0 else 0
    if rank < min(m, M):
        return jacobian(problem, x, base_value)
    return J, 0


def resolve_scale(cfg: FlowConfig, dY: DistanceMatrix) -> float:
    """Operating scale for a step: fixed value, or t_plus of the current points."""
    if cfg.scale is not None:
        return cfg.scale
    rep = positive_cutoff(dY, cfg.scale_tol)
    if rep.t_plus and rep.t_plus > 0:
        return rep.t_plus
    return rep.t_d if rep.t_d > 0 else 1.0


def _objective_differentials(pop: Population, cfg: FlowConfig, t: float):
    """Assemble dy for the configured flow variant at scale t."""
    ys = PointSet(pop.ys)
    dY = distance_matrix(ys)
    Z = similarity(dY, t)
    if cfg.flow_kind == "spread":
        _, a = spread(dY, t)
        grad = weighting_gradient(ys, Z, a)
    else:
        grad = weighting_gradient(ys, Z, solve_weighting(Z))
    S = speed_factors(pop.dom) if cfg.speed_factor_enabled else np.ones(pop.n)
    ds = step_size(ys) * cfg.ds_scale
    G = grad.vectors
    if cfg.flow_kind == "multi":
        # admit the unit descent direction -e_l of each objective whose
        # inner product with the weighting gradient is positive
        descent = np.zeros_like(G)
        for l in range(pop.problem.n_obj):
            admit = G[:, l] < 0.0
            descent[admit, l] -= 1.0
        dy = ds * (cfg.lambda_w * S[:, None] * G + cfg.lambda_f * descent)
    else:
        dy = ds * S[:, None] * G
    return dy, ds


def _advance(pop: Population, dy: np.ndarray, cfg: FlowConfig, state: FlowState) -> Population:
    """Pull dy back to solution space, update, and restore bad points."""
    problem = pop.problem
    n = pop.n
    new_xs = pop.xs.copy()
    new_ys = pop.ys.copy()
    for j in range(n):
        if cfg.jacobian_mode == "recycled":
            J, used = recycled_jacobian(state.history_x, state.history_y,
                                        pop.xs[j], pop.ys[j], problem)
        else:
            J, used = jacobian(problem, pop.xs[j], pop.ys[j])
        state.evaluations += used
        dx = pullback(J, dy[j])
        x_new = pop.xs[j] + dx
        if not np.all(np.isfinite(x_new)) or not problem.in_bounds(x_new):
            continue  # predecessor kept, objective value reused
        y_new = problem.evaluate(x_new)
        state.evaluations += 1
        if not np.all(np.isfinite(y_new)):
            continue
        new_xs[j] = x_new
        new_ys[j] = y_new
    out = Population(problem, new_xs, new_ys, dominance_counts(new_ys),
                     np.ones(n, dtype=bool))
    state.record(new_xs, new_ys)
    return out


def flow_step(pop: Population, cfg: FlowConfig, state: FlowState | None = None,
              t: float | None = None) -> Population:
    """One Euler step of the configured gradient flow variant."""
    if state is None:
        state = FlowState()
        state.record(pop.xs, pop.ys)
    if pop.n < 2:
        return pop.copy()
    if t is None:
        t = resolve_scale(cfg, distance_matrix(PointSet(pop.ys)))
    dy, ds = _objective_differentials(pop, cfg, t)
    state.last_t = t
    state.last_ds = ds
    return _advance(pop, dy, cfg, state)


def mowgf_step(pop: Population, cfg: FlowConfig, state: FlowState | None = None,
               t: float | None = None) -> Population:
    """Multi-objective variant: weighting gradient blended with admitted descents."""
    return flow_step(pop, replace(cfg, flow_kind="multi"), state, t)


def spread_vector_flow_step(pop: Population, cfg: FlowConfig,
                            state: FlowState | None = None,
                            t: float | None = None) -> Population:
    """Flow variant using the spread vector in place of a weighting."""
    return flow_step(pop, replace(cfg, flow_kind="spread"), state, t)


def _magnitude_at(ys: np.ndarray, t: float) -> float:
    if len(ys) == 0:
        return float("nan")
    if len(ys) == 1:
        return 1.0
    try:
        return solve_weighting(similarity(distance_matrix(PointSet(ys)), t)).magnitude
    except MagflowError:
        return float("nan")


def _snapshot(step: int, pop: Population, t: float, cfg: FlowConfig,
              state: FlowState, reference: np.ndarray | None) -> FlowSnapshot:
    nondom = pop.ys[pop.nondominated_mask()]
    ds = step_size(pop.ys) * cfg.ds_scale if pop.n >= 2 else float("nan")
    return FlowSnapshot(
        step=step,
        t_plus=t,
        ds=ds,
        mag_feasible=_magnitude_at(pop.ys, t),
        mag_nondom=_magnitude_at(nondom, t),
        n_nondom=int(pop.nondominated_mask().sum()),
        igd=igd(pop.ys, reference) if reference is not None else float("nan"),
        evaluations=state.evaluations,
        population=pop.copy(),
    )


def run_flow(pop: Population, cfg: FlowConfig, reference: np.ndarray | None = None,
             state: FlowState | None = None) -> FlowTrace:
    """Drive cfg.steps flow steps and record the trace (snapshots for steps 0..N).

    The scale driving each step is the t_plus of the population it starts
    from, computed once per timestep and reused for that step's snapshot.
    """
    if state is None:
        state = FlowState()
    state.record(pop.xs, pop.ys)
    trace = FlowTrace()
    current = pop
    t_cur = resolve_scale(cfg, distance_matrix(PointSet(current.ys))) if current.n >= 2 else 1.0
    trace.append(_snapshot(0, current, t_cur, cfg, state, reference))
    for k in range(1, cfg.steps + 1):
        if current.n >= 2:
            current = flow_step(current, cfg, state, t=t_cur)
            t_cur = resolve_scale(cfg, distance_matrix(PointSet(current.ys)))
        else:
            current = current.copy()
        trace.append(_snapshot(k, current, t_cur, cfg, state, reference))
    return trace
