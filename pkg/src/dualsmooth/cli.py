"""
Command-line front end.

    dualsmooth gen --scenario basis_pursuit --n 3 --d 2 --p 2 --seed 7 --out runs/bp
    dualsmooth run --scenario basis_pursuit --seed 7 --eps 1e-4 --out runs/bp
    dualsmooth reference --instance runs/bp/instance.json --method long_run --out runs/bp
    dualsmooth report runs/bp

``run`` exits with 0 when the solver converged, 2 when it hit the
iteration limit and 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

from .graphs import GraphError
from .instances import ConfigError, ExperimentConfig, generate, graph_for, read_instance, write_instance
from .problems import ProblemError
from .reference import METHODS, UnsupportedReferenceError, compute_reference
from .report import read_csv

log = logging.getLogger("dualsmooth")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2
CONFIG_ERRORS = (ConfigError, ProblemError, GraphError, UnsupportedReferenceError,
                 FileNotFoundError, json.JSONDecodeError, KeyError)
SCHEMA_PATH = Path(__file__).parent / "schemas" / "summary.schema.json"


def _add_problem_flags(ap):
    ap.add_argument("--scenario", default="basis_pursuit",
                    help="basis_pursuit, basis_pursuit_dd, mae_consensus, mse_dd or custom")
    ap.add_argument("--instance", help="instance JSON (overrides the generated preset)")
    ap.add_argument("--graph", default="path", help="path, ring, star, complete or erdos_renyi")
    ap.add_argument("--edge-prob", type=float, default=0.5, help="Erdos-Renyi edge probability")
    ap.add_argument("--n", type=int, default=3, help="number of nodes")
    ap.add_argument("--d", type=int, default=2, help="local variable size")
    ap.add_argument("--p", type=int, default=2, help="constraint rows (coupled) or rows per node")
    ap.add_argument("--lambda", dest="lam", type=float, default=1.0, help="smoothing weight")
    ap.add_argument("--noise", type=float, default=None, help="noise scale added to b")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="out", help="output directory")


def _add_solver_flags(ap):
    ap.add_argument("--eps", type=float, default=1e-4, help="target objective accuracy")
    ap.add_argument("--radius", type=float, default=10.0,
                    help="bound on the distance from the start to a solution")
    ap.add_argument("--tol", type=float, default=None, help="tighter distance target")
    ap.add_argument("--max-iter", type=int, default=1_000_000)
    ap.add_argument("--mode", default="centralized", choices=("centralized", "decentralized"))
    ap.add_argument("--log-every", type=int, default=10, help="CSV logging stride")


def build_parser():
    ap = argparse.ArgumentParser(prog="dualsmooth", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance file and its edge list")
    _add_problem_flags(g)

    r = sub.add_parser("run", help="solve an instance and write CSV/JSON reports")
    _add_problem_flags(r)
    _add_solver_flags(r)
    r.add_argument("--reference", action="store_true", help="log distances to a long-run reference")
    r.add_argument("--trace", action="store_true", help="write a per-round JSON-lines trace")
    r.add_argument("--seeds", type=int, nargs="+", help="several seeds, one output subdirectory each")
    r.add_argument("--jobs", type=int, default=1, help="parallel processes for --seeds")

    f = sub.add_parser("reference", help="compute a reference solution")
    _add_problem_flags(f)
    _add_solver_flags(f)
    f.add_argument("--method", default="long_run", choices=METHODS)

    p = sub.add_parser("report", help="summarize and validate a run directory")
    p.add_argument("path", help="run directory")
    return ap


def config_from_args(args):
    cfg = ExperimentConfig(
        scenario=args.scenario, graph=args.graph, graph_p=args.edge_prob, n=args.n, d=args.d,
        p=args.p, lam=args.lam, seed=args.seed, noise=args.noise, instance=args.instance,
        out=args.out,
    )
    for name, attr in (("eps", "eps"), ("radius", "R"), ("tol", "tol"), ("max_iter", "max_iter"),
                       ("mode", "mode")):
        if hasattr(args, name):
            setattr(cfg, attr, getattr(args, name))
    if hasattr(args, "log_every"):
        cfg.extra["log_every"] = args.log_every
    return cfg.validate()


def load_instance(cfg):
    """Instance data and graph: read from file or generated from the preset."""
    if cfg.instance:
        data, graph = read_instance(cfg.instance)
        cfg.n = data["n"]
        return data, graph
    return generate(cfg), graph_for(cfg)


def cmd_gen(cfg):
    data, graph = load_instance(cfg)
    path = write_instance(data, graph, Path(cfg.out) / "instance.json")
    print(path)
    return EXIT_OK


def run_one(cfg, reference=False, trace=False):
    """Solve, write ``report.csv`` and ``summary.json``; return the exit code."""
    from .experiment import run_experiment

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data, graph = load_instance(cfg)
    write_instance(data, graph, out / "instance.json")
    fh = open(out / "trace.jsonl", "w") if trace and cfg.mode == "decentralized" else None
    try:
        res = run_experiment(cfg, data, graph, reference=reference, trace=fh)
    finally:
        if fh is not None:
            fh.close()
    res.report.write_csv(out / "report.csv")
    summary = res.report.summary()
    summary["config"] = {k: v for k, v in asdict(cfg).items() if k not in ("out", "extra")}
    summary["metrics"] = res.metrics
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    status = "converged" if res.report.converged else "NOT converged"
    print(f"{cfg.scenario} seed={cfg.seed}: {status} after {res.report.iterations} iterations, "
          f"{res.report.comm_rounds} rounds; reports in {out}")
    return EXIT_OK if res.report.converged else EXIT_NOT_CONVERGED


def _run_seed(payload):
    cfg, reference, trace = payload
    try:
        return run_one(cfg, reference, trace)
    except CONFIG_ERRORS as exc:
        log.error("seed %s: %s", cfg.seed, exc)
        return EXIT_CONFIG


def cmd_run(cfg, args):
    if not args.seeds:
        return run_one(cfg, args.reference, args.trace)
    jobs = []
    for s in args.seeds:
        c = ExperimentConfig(**{**asdict(cfg), "seed": s, "out": str(Path(cfg.out) / f"seed_{s}")})
        jobs.append((c, args.reference, args.trace))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_seed, jobs))
    else:
        codes = [_run_seed(j) for j in jobs]
    return max(codes)


def cmd_reference(cfg, method):
    from .experiment import solved_problem
    from .instances import build_problem
    from .problems import regularize

    data, graph = load_instance(cfg)
    problem = regularize(solved_problem(cfg.scenario, build_problem(data, graph)), cfg.eps, cfg.R)
    tol = math.sqrt(problem.meta["delta"]) if cfg.tol is None else cfg.tol
    ref = compute_reference(problem, method, budget=cfg.max_iter // 100 or 1, tol=tol)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reference.json").write_text(json.dumps(ref.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"{method}: objective {ref.objective:.12g}, tolerance {ref.tolerance:.3g}")
    return EXIT_OK


def validate_summary(summary):
    import jsonschema

    schema = json.loads(SCHEMA_PATH.read_text())
    try:
        jsonschema.validate(summary, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"summary does not match the schema: {exc.message}") from exc


def cmd_report(path):
    path = Path(path)
    summary = json.loads((path / "summary.json").read_text())
    validate_summary(summary)
    rows = read_csv(path / "report.csv")
    m = summary["metrics"]
    print(f"scenario           {summary['config']['scenario']}")
    print(f"converged          {summary['converged']} ({summary['reason']})")
    print(f"iterations         {summary['iterations']}")
    print(f"comm_rounds        {summary['comm_rounds']}")
    print(f"objective          {m['objective']:.10g}")
    print(f"feas_residual      {m['feas_residual']:.3e}")
    for key in ("coupling_residual", "consensus_residual", "dist_to_ref"):
        if key in m:
            print(f"{key:<19}{m[key]:.3e}")
    print(f"log rows           {len(rows)}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.path)
        cfg = config_from_args(args)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "run":
            return cmd_run(cfg, args)
        return cmd_reference(cfg, args.method)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
