"""Command-line experiment runner.

Every subcommand reads an optional TOML config (``--config``), writes JSON
reports / CSV archives under the configured output directory, and exits
with 0 when the run succeeded and all of its assertions held, 1 on a solver
or assertion failure and 2 on usage errors.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import verify
from .analysis import classify_singularity, design_perturbation
from .arrival import DEFAULT_LADDER, arrival_time, probe_points, regularity_probe
from .centering import center_flow, extinction_event
from .config import load_config
from .errors import FitError, FlowError, GraphError, SweepError, TrajectoryGap
from .experiments import base_initial, controls_for, denseness_experiment, mode_field, random_field, stability_experiment
from .flow import FlowControls, evolve_mcf, evolve_rmcf, propagator_matrix
from .geometry import RadialGraph
from .harmonics import write_coefficients_csv
from .io import load_graph, load_trajectory, save_graph, save_trajectory


def _emit(report, path=None):
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable)
    print(text)
    if path:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _out(cfg, args, name):
    return args.out if getattr(args, "out", None) else os.path.join(cfg.output, name)


def _initial(cfg, args):
    """Initial graph: a graph file, or the configured base plus an optional seeded perturbation."""
    if getattr(args, "graph", None):
        return load_graph(args.graph)
    G = base_initial(args.base or cfg.base.kind, cfg.base.amplitude, cfg.k_max, cfg.n)
    if args.seed is None:
        return G
    p = cfg.perturbation
    if p.kind == "modes":
        pert = mode_field(p.modes, p.amplitude, cfg.k_max, cfg.n)
    else:
        pert = random_field(args.seed, p.amplitude, cfg.k_max, p.spectral_decay, cfg.n)
    return RadialGraph.from_graph_function(G.graph_function() + pert)


def cmd_simulate(cfg, args):
    if args.dt is not None:
        cfg = cfg.with_overrides(dt=args.dt)
    G = _initial(cfg, args)
    out = _out(cfg, args, "simulate")
    seeds = [] if args.seed is None else [args.seed]
    status = 0
    if cfg.clock == "mcf":
        res = evolve_mcf(G, FlowControls(dt=args.dt or 1e-4, snapshot_every=min(cfg.snapshot_every, 0.01)))
        traj = res.trajectory
    else:
        ctrl = FlowControls(dt=cfg.dt, snapshot_every=cfg.snapshot_every)
        try:
            traj = evolve_rmcf(G, cfg.horizon, ctrl)
        except FlowError as exc:
            _log(f"solver failure: {exc}")
            traj, status = exc.trajectory, 1
    digest = save_trajectory(traj, out, seeds, {"config": cfg.to_dict()})
    _emit({"archive": out, "snapshots": len(traj), "final_time": float(traj.times[-1]),
           "content_hash": digest, "stopped": traj.meta.get("stopped")})
    return status


def cmd_classify(cfg, args):
    traj = load_trajectory(args.archive)
    rep = classify_singularity(traj, rate_tol=cfg.tolerances.rate)
    _emit(json.loads(rep.to_json()), args.out)
    return 0


def cmd_center(cfg, args):
    G = _initial(cfg, args)
    cf = center_flow(G, cfg.horizon, controls_for(cfg), tol=cfg.tolerances.centering)
    out = _out(cfg, args, "center")
    save_trajectory(cf.trajectory, out, [] if args.seed is None else [args.seed])
    save_graph(cf.initial, os.path.join(out, "centered_initial.csv"), "centered initial graph")
    rep = json.loads(cf.transform.to_json())
    rep["history"] = cf.history
    rep["archive"] = out
    _emit(rep, os.path.join(out, "transform.json"))
    return 0 if cf.transform.residuals["last_correction"] < cfg.tolerances.centering else 1


def cmd_stability(cfg, args):
    amps = tuple(args.amplitudes) if args.amplitudes else None
    seeds = range(args.seeds) if args.seeds is not None else None
    rep = stability_experiment(cfg, amps, seeds, log=_log, workers=args.workers)
    _emit(rep, os.path.join(cfg.output, "stability.json"))
    ok = rep["ladder"][-1]["slow_fraction"] == 1.0 and rep["zero_perturbation"].get("verdict") == rep["base_verdict"]
    return 0 if ok else 1


def cmd_denseness(cfg, args):
    eps = tuple(args.epsilons) if args.epsilons else None
    rep = denseness_experiment(cfg, eps, log=_log)
    _emit(rep, os.path.join(cfg.output, "denseness.json"))
    return 0 if rep["smallest_slow_epsilon"] is not None and rep["base_verdict"] == "fast" else 1


def cmd_design(cfg, args):
    traj = load_trajectory(args.archive)
    t1 = cfg.design.time if args.time is None else args.time
    P = propagator_matrix(traj, 0.0, t1, max_degree=cfg.design.max_degree)
    des = design_perturbation(P, 1.0, max_degree=cfg.design.max_degree)
    out = _out(cfg, args, "design")
    os.makedirs(out, exist_ok=True)
    write_coefficients_csv(des.perturbation, os.path.join(out, "perturbation.csv"))
    _emit({"ratio": des.ratio, "rank": des.rank, "time": t1, "perturbation": os.path.join(out, "perturbation.csv")},
          os.path.join(out, "design.json"))
    return 0


def cmd_arrival(cfg, args):
    traj = load_trajectory(args.archive)
    ladder = tuple(args.ladder) if args.ladder else DEFAULT_LADDER
    center = np.asarray(traj.zoom[0]) if traj.clock == "rmcf" else np.asarray(extinction_event(traj).point)
    out = _out(cfg, args, "arrival")
    os.makedirs(out, exist_ok=True)
    smp = arrival_time(traj, probe_points(args.order, ladder, center), reference=center if traj.clock == "mcf" else None)
    smp.to_csv(os.path.join(out, f"samples_order{args.order}.csv"))
    rep = regularity_probe(traj, args.order, ladder, traj.n, center, hessian_tol=cfg.tolerances.hessian)
    _emit(json.loads(rep.to_json()), os.path.join(out, f"probe_order{args.order}.json"))
    return 0


def cmd_verify(cfg, args):
    names = list(verify.SUITES) if args.suites == ["all"] else args.suites
    rows = verify.run_suites(names, log=print)
    failed = [r.name for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="sphereflow", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML config file (defaults are printed by --print-config)")
    p.add_argument("--print-config", action="store_true", help="print the effective config as TOML and exit")
    sub = p.add_subparsers(dest="command")

    def initial_args(q):
        q.add_argument("--graph", help="initial graph CSV (overrides --base/--seed)")
        q.add_argument("--base", choices=("round", "slow", "fast"), help="base flow (default: config base.kind)")
        q.add_argument("--seed", type=int, help="add the configured seeded perturbation")
        q.add_argument("--out", help="output directory")

    q = sub.add_parser("simulate", help="evolve a graph and write a trajectory archive")
    initial_args(q)
    q.add_argument("--dt", type=float, help="step size in (0, 0.01] (default: config dt; 1e-4 for clock = mcf)")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("classify", help="classify the singularity of an archived rescaled flow")
    q.add_argument("archive")
    q.add_argument("--out", help="report JSON path")
    q.set_defaults(func=cmd_classify)

    q = sub.add_parser("center", help="center a flow so its singularity sits at (0, 1)")
    initial_args(q)
    q.set_defaults(func=cmd_center)

    q = sub.add_parser("stability", help="seeded perturbations of a slow flow, recentered and reclassified")
    q.add_argument("--amplitudes", type=float, nargs="+", help="perturbation amplitudes (Q-norm)")
    q.add_argument("--seeds", type=int, help="use seeds 0..N-1 (default: config seeds)")
    q.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    q.set_defaults(func=cmd_stability)

    q = sub.add_parser("denseness", help="designed perturbation of a fast flow, recentered and reclassified")
    q.add_argument("--epsilons", type=float, nargs="+", help="perturbation scales (0 = withheld)")
    q.set_defaults(func=cmd_denseness)

    q = sub.add_parser("design", help="design a degree-2 steering perturbation along an archived flow")
    q.add_argument("archive")
    q.add_argument("--time", type=float, help="target time (default: config design.time)")
    q.add_argument("--out", help="output directory")
    q.set_defaults(func=cmd_design)

    q = sub.add_parser("arrival", help="arrival-time samples and regularity probe at the singular point")
    q.add_argument("archive")
    q.add_argument("--order", type=int, choices=(2, 3), default=3)
    q.add_argument("--ladder", type=float, nargs="+", help="probe radii (default 0.2 * 2^-j, j = 0..6)")
    q.add_argument("--out", help="output directory")
    q.set_defaults(func=cmd_arrival)

    q = sub.add_parser("verify", help="run verification suites ('all' or names)")
    q.add_argument("suites", nargs="+", choices=["all"] + list(verify.SUITES), metavar="SUITE",
                   help="one or more of: all, " + ", ".join(verify.SUITES))
    q.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ValueError, OSError) as exc:
        parser.error(f"invalid config: {exc}")
    if args.print_config:
        print(cfg.to_toml(), end="")
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(cfg, args)
    except (FlowError, GraphError, FitError, SweepError, TrajectoryGap) as exc:
        _log(f"error: {type(exc).__name__}: {exc}")
        return 1
    except ValueError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
