"""Command-line entry points.

Subcommands: mag, scales, problem, seed, flow, discrete, toy, benchmark.
Report-producing commands write CSV/JSON artifacts and, unless --no-plot is
given, matplotlib figures alongside them.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .discrete import (MHConfig, PerturbationModel, mh_batch_maximizer,
                       lattice_ground_set, sample_lattice, stochastic_flow_step)
from .experiments import (DESK_GA, DESK_SEEDS, PAPER_GA, ExperimentSpec,
                          emit_csv, run_benchmark, run_toy, toy_population,
                          write_config, write_population_csv)
from .flow import FlowConfig, FlowState, run_flow
from .geometry import PointSet, distance_matrix, load_points_csv, save_points_csv
from .magnitude import magnitude_of, magnitude_profile, positive_cutoff
from .geometry import similarity
from .moea import GAConfig, nsga2_run
from .problems import PROBLEM_NAMES, Population, dominance_counts, get_problem


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", default=None, help="output file or directory")


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_rows(path, header, rows):
    fh, close = _open_out(path)
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if close:
            fh.close()


def _load_solution_points(path, problem):
    """Accept either a bare coordinate CSV or a population CSV (x1.., y1.., dom)."""
    with open(path, newline="") as fh:
        first = fh.readline().strip().split(",")
    if first and first[0] == "x1" and any(c.startswith("y") for c in first):
        M = sum(1 for c in first if c.startswith("x"))
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return np.atleast_2d(data)[:, :M]
    return load_points_csv(path).points


def cmd_mag(args):
    ps = load_points_csv(args.points)
    d = distance_matrix(ps)
    if args.profile:
        prof = magnitude_profile(d, args.t_min, args.t_max, args.count)
        rows = [[f"{t:.17g}", f"{m:.17g}"] for t, m in zip(prof.ts, prof.magnitudes)]
        _write_rows(args.out, ["t", "magnitude"], rows)
        if args.out and not args.no_plot:
            from . import figures
            figures.plot_magnitude_profile(prof.ts, prof.magnitudes,
                                           Path(args.out).with_suffix(".png"))
    else:
        if args.t is None:
            raise SystemExit("mag: provide --t VALUE or --profile")
        mag = magnitude_of(similarity(d, args.t))
        _write_rows(args.out, ["t", "magnitude"], [[f"{args.t:.17g}", f"{mag:.17g}"]])
    return 0


def cmd_scales(args):
    ps = load_points_csv(args.points)
    rep = positive_cutoff(distance_matrix(ps))
    _write_rows(args.out, ["t_d", "t_plus", "lower_bound", "upper_bound"],
                [[f"{rep.t_d:.17g}", f"{rep.t_plus:.17g}",
                  f"{rep.lower_bound:.17g}", f"{rep.upper_bound:.17g}"]])
    return 0


def cmd_problem(args):
    problem = get_problem(args.name)
    rng = np.random.default_rng(args.seed)
    X = problem.lower + rng.random((args.sample, problem.n_var)) * (problem.upper - problem.lower)
    Y = problem.evaluate_batch(X)
    header = [f"x{i+1}" for i in range(problem.n_var)] + [f"y{i+1}" for i in range(problem.n_obj)]
    rows = [[f"{v:.17g}" for v in np.concatenate([x, y])] for x, y in zip(X, Y)]
    _write_rows(args.out, header, rows)
    return 0


def cmd_seed(args):
    problem = get_problem(args.problem)
    cfg = GAConfig(pop_size=args.pop, max_evaluations=args.evals, seed=args.seed)
    pop = nsga2_run(problem, cfg)
    if args.out is None:
        raise SystemExit("seed: --out FILE is required")
    write_population_csv(args.out, pop)
    return 0


def cmd_flow(args):
    problem = get_problem(args.problem)
    xs = _load_solution_points(args.points, problem)
    pop = Population.from_solutions(problem, xs)
    from .problems import unique_objective_indices
    keep = unique_objective_indices(pop.ys)
    if len(keep) < pop.n:
        pop = Population.from_solutions(problem, pop.xs[keep])
    if args.out is None:
        raise SystemExit("flow: --out DIR is required")
    cfg = FlowConfig(
        steps=args.steps,
        jacobian_mode="recycled" if args.recycle else "fresh",
        flow_kind="spread" if args.spread else ("multi" if args.lambda_f > 0 else "weighting"),
        lambda_w=args.lambda_w,
        lambda_f=args.lambda_f,
    )
    spec = ExperimentSpec(pipeline="flow", problem=args.problem, seed=args.seed,
                          out_dir=args.out, flow=cfg, profiles=False)
    reference = problem.pareto_front(cfg.reference_count)
    trace = run_flow(pop, cfg, reference=reference)
    write_config(spec, args.out)
    emit_csv(trace, args.out)
    if not args.no_plot:
        from . import figures
        rows = [snap.__dict__ for snap in trace.snapshots]
        figures.plot_trace(rows, Path(args.out) / "trace.png", title=args.problem)
        figures.plot_point_comparison(trace.snapshots[0].population.ys,
                                      trace.snapshots[-1].population.ys,
                                      Path(args.out) / "objective_points.png",
                                      title=f"{args.problem} objective space")
    return 0


def cmd_toy(args):
    name = {"tri": "toy-triangle", "dodeca": "toy-dodecagon"}[args.problem]
    if args.out is None:
        raise SystemExit("toy: --out DIR is required")
    spec = ExperimentSpec(pipeline=name, problem=args.problem, seed=args.seed,
                          out_dir=args.out, flow=FlowConfig(steps=args.steps),
                          n0=args.n0, profiles=not args.no_profiles)
    trace = run_toy(spec)
    if not args.no_plot:
        from . import figures
        rows = [snap.__dict__ for snap in trace.snapshots]
        figures.plot_trace(rows, Path(args.out) / "trace.png", title=name)
        figures.plot_point_comparison(trace.snapshots[0].population.xs,
                                      trace.snapshots[-1].population.xs,
                                      Path(args.out) / "solution_points.png",
                                      title=f"{name} solution space")
        figures.plot_point_comparison(trace.snapshots[0].population.ys,
                                      trace.snapshots[-1].population.ys,
                                      Path(args.out) / "objective_points.png",
                                      title=f"{name} objective space")
    n0 = trace.snapshots[0].population.n
    nd = trace.snapshots[-1]
    print(f"{name}: n={n0} mag {trace.snapshots[0].mag_feasible:.3f} -> "
          f"{nd.mag_feasible:.3f}, nondominated {trace.snapshots[0].n_nondom} -> "
          f"{nd.n_nondom}")
    return 0


def cmd_benchmark(args):
    if args.out is None:
        raise SystemExit("benchmark: --out DIR is required")
    ga_base = dict(PAPER_GA if args.paper_scale else DESK_GA)
    if args.pop is not None:
        ga_base["pop_size"] = args.pop
    if args.evals is not None:
        ga_base["max_evaluations"] = args.evals
    out_root = Path(args.out)
    summary = []
    for i in range(args.seeds):
        seed = args.seed + i
        sub = out_root / f"seed_{seed}"
        spec = ExperimentSpec(
            pipeline="benchmark", problem=args.problem, seed=seed, out_dir=str(sub),
            ga=GAConfig(seed=seed, **ga_base),
            flow=FlowConfig(steps=args.steps,
                            jacobian_mode="recycled" if args.recycle else "fresh"),
            profiles=False,
        )
        trace = run_benchmark(spec)
        first, last = trace.snapshots[0], trace.snapshots[-1]
        summary.append({
            "seed": seed,
            "quotient_feasible": last.mag_feasible / first.mag_feasible,
            "quotient_nondom": last.mag_nondom / first.mag_nondom,
            "nondom_fraction": last.n_nondom / max(first.n_nondom, 1),
            "igd_initial": first.igd,
            "igd_final": last.igd,
            "flow_evals": last.evaluations - first.evaluations,
        })
        if not args.no_plot:
            from . import figures
            rows = [snap.__dict__ for snap in trace.snapshots]
            figures.plot_trace(rows, sub / "trace.png",
                               title=f"{args.problem} seed {seed}")
    _write_rows(out_root / "summary.csv", list(summary[0].keys()),
                [[_fmt_cell(v) for v in row.values()] for row in summary])
    med = {k: float(np.median([row[k] for row in summary]))
           for k in summary[0] if k != "seed"}
    with open(out_root / "summary_median.json", "w") as fh:
        json.dump(med, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{args.problem}: median feasible quotient {med['quotient_feasible']:.4f}, "
          f"nondominated fraction {med['nondom_fraction']:.3f}, "
          f"IGD {med['igd_initial']:.4f} -> {med['igd_final']:.4f}")
    return 0


def _fmt_cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def cmd_discrete(args):
    if args.out is None:
        raise SystemExit("discrete: --out DIR is required")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    beta = np.inf if args.beta in ("inf", "Inf", "INF") else float(args.beta)
    rng = np.random.default_rng(args.seed)
    if args.mode == "mh":
        ground = lattice_ground_set(args.side)
        initial = sample_lattice(ground, args.n_points, rng)
        cfg = MHConfig(beta=beta, steps=args.steps, n_select=args.select,
                       n_candidates=args.candidates, seed=args.seed)
        points, trace, accepted = mh_batch_maximizer(ground, initial, cfg)
        rows = [[0, f"{trace[0]:.17g}", 0]]
        rows += [[k + 1, f"{trace[k + 1]:.17g}", int(accepted[k])]
                 for k in range(len(accepted))]
        _write_rows(out / "magnitude_trace.csv", ["step", "magnitude", "accepted"], rows)
        save_points_csv(out / "final_points.csv", points, header=True)
        gain = trace[-1] / trace[0] - 1.0
        print(f"mh: magnitude {trace[0]:.4f} -> {trace[-1]:.4f} ({gain:+.1%})")
        mags = trace
    else:
        spec = ExperimentSpec(pipeline="discrete", problem=args.problem,
                              seed=args.seed, n0=args.n0)
        pop = toy_population(spec)
        from .magnitude import solve_weighting
        from .flow import weighting_gradient
        dY = distance_matrix(PointSet(pop.ys))
        rep = positive_cutoff(dY)
        t_fixed = rep.t_plus if rep.t_plus and rep.t_plus > 0 else rep.t_d
        mags = [magnitude_of(similarity(dY, t_fixed))]
        rows = [[0, f"{mags[0]:.17g}", 0]]
        for k in range(args.steps):
            dY = distance_matrix(PointSet(pop.ys))
            Z = similarity(dY, t_fixed)
            grad = weighting_gradient(PointSet(pop.ys), Z, solve_weighting(Z)).vectors
            model = PerturbationModel.from_population(pop, grad)
            new_pop = stochastic_flow_step(pop, model, args.candidates, rng,
                                           t=t_fixed, grad_vectors=grad)
            moved = int(np.sum(np.any(new_pop.xs != pop.xs, axis=1)))
            pop = new_pop
            mag = magnitude_of(similarity(distance_matrix(PointSet(pop.ys)), t_fixed))
            mags.append(mag)
            rows.append([k + 1, f"{mag:.17g}", moved])
        _write_rows(out / "magnitude_trace.csv", ["step", "magnitude", "accepted"], rows)
        save_points_csv(out / "final_points.csv", pop.xs, header=True)
        print(f"flow: magnitude {mags[0]:.4f} -> {mags[-1]:.4f}")
    config = {k: (v if not isinstance(v, float) or np.isfinite(v) else "inf")
              for k, v in vars(args).items() if k != "func"}
    with open(out / "config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    if not args.no_plot:
        from . import figures
        figures.plot_magnitude_trace(np.asarray([float(m) for m in mags]),
                                     out / "magnitude_trace.png",
                                     title=f"discrete {args.mode}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="magflow",
                                     description="magnitude-based diversity tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mag", help="magnitude at a scale, or a magnitude profile")
    p.add_argument("--points", required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--profile", action="store_true")
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--count", type=int, default=64)
    p.add_argument("--no-plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_mag)

    p = sub.add_parser("scales", help="diagonal and positive cutoff scales")
    p.add_argument("--points", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_scales)

    p = sub.add_parser("problem", help="dump random (x, y) samples of a problem")
    p.add_argument("--name", required=True, choices=PROBLEM_NAMES)
    p.add_argument("--sample", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_problem)

    p = sub.add_parser("seed", help="NSGA-II seeding run")
    p.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    p.add_argument("--pop", type=int, default=250)
    p.add_argument("--evals", type=int, default=10_000)
    _add_common(p)
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("flow", help="weighting gradient flow on a point file")
    p.add_argument("--points", required=True)
    p.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--recycle", action="store_true")
    p.add_argument("--spread", action="store_true")
    p.add_argument("--lambda-w", type=float, default=1.0)
    p.add_argument("--lambda-f", type=float, default=0.0)
    p.add_argument("--no-plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("toy", help="polygon toy pipeline (disk sample + flow)")
    p.add_argument("--problem", default="tri", choices=("tri", "dodeca"))
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--n0", type=int, default=1000, help="disk sample size")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--no-profiles", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("benchmark", help="NSGA-II seeding followed by the flow")
    p.add_argument("--problem", default="wfg2", choices=PROBLEM_NAMES)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--seeds", type=int, default=DESK_SEEDS)
    p.add_argument("--pop", type=int, default=None, help="override preset population")
    p.add_argument("--evals", type=int, default=None, help="override preset budget")
    p.add_argument("--recycle", action="store_true")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk", dest="paper_scale", action="store_false",
                       help="pop 100, 5000 evaluations (default)")
    scale.add_argument("--paper-scale", dest="paper_scale", action="store_true",
                       help="pop 250, 10000 evaluations")
    p.set_defaults(paper_scale=False)
    p.add_argument("--no-plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("discrete", help="stochastic flow or MH magnitude maximizer")
    p.add_argument("--mode", required=True, choices=("mh", "flow"))
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--beta", default="inf")
    p.add_argument("--side", type=int, default=30, help="lattice side (mh mode)")
    p.add_argument("--n-points", type=int, default=100, help="initial sample size (mh)")
    p.add_argument("--select", type=int, default=10)
    p.add_argument("--candidates", type=int, default=10)
    p.add_argument("--problem", default="tri", choices=("tri", "dodeca"))
    p.add_argument("--n0", type=int, default=300, help="disk sample size (flow mode)")
    p.add_argument("--no-plot", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_discrete)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
