"""
Scenario presets, from problem construction to primal recovery.

Every preset goes through the transforms in :mod:`dualsmooth.problems`;
this module only wires them together.

========================  ==============================================
scenario                  solved problem
========================  ==============================================
``basis_pursuit``         smoothed dual of the coupled l1 problem
``basis_pursuit_dd``      Huber primal from the double dual, ``Ax+Wu=b``
``mae_consensus``         smoothed dual of the absolute-error consensus
``mse_dd``                Huber primal from the double dual, ``Wx=0``
``custom``                as its instance ``type`` (coupled or consensus)
========================  ==============================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .apapc import solve_nonstrongly
from .graphs import lift_apply
from .instances import build_problem
from .problems import (
    CoupledProblem,
    double_dual_basis_pursuit,
    double_dual_mse,
    dualize_consensus,
    dualize_coupled,
    recover_primal,
    regularize,
    split_consensus_dual,
    split_coupled_primal,
)
from .reference import long_run


@dataclass
class ExperimentResult:
    scenario: str
    solution: np.ndarray
    x: np.ndarray
    report: object
    metrics: dict = field(default_factory=dict)
    reference: object = None


def solved_problem(scenario, p):
    """The affinely constrained problem a scenario hands to the solver."""
    if scenario == "custom":
        scenario = "basis_pursuit" if isinstance(p, CoupledProblem) else "mae_consensus"
    if scenario == "basis_pursuit":
        return dualize_coupled(p)
    if scenario == "basis_pursuit_dd":
        return double_dual_basis_pursuit(p)
    if scenario == "mae_consensus":
        return dualize_consensus(p)
    if scenario == "mse_dd":
        return double_dual_mse(p)
    raise ValueError(f"unknown scenario {scenario!r}")


def _primal(problem, p, w, report):
    """Primal point of the original problem from the solver output."""
    if problem.kind == "coupled_dual":
        return recover_primal(p, w)
    if problem.kind == "consensus_dual":
        z, _ = split_consensus_dual(p, w)
        return recover_primal(p, z, multiplier=report.final["y"])
    if problem.kind == "coupled_primal":
        return split_coupled_primal(p, w)[0]
    return w


def _primal_metrics(p, x):
    if isinstance(p, CoupledProblem):
        return {"primal_objective": p.primal_value(x),
                "coupling_residual": float(np.linalg.norm(p.coupling_residual(x)))}
    return {"primal_objective": p.primal_value(x),
            "consensus_residual": float(np.linalg.norm(lift_apply(p.gossip.lifted(p.d), x)))}


def run_experiment(config, data, graph, reference=False, trace=None, tol=None):
    """
    Solve one preset instance.

    Parameters
    ----------
    config : ExperimentConfig
        ``eps`` and ``R`` set the regularization, ``mode`` picks the
        centralized solver or the network simulation.
    data, graph
        Instance dictionary and its communication graph.
    reference : bool
        Also compute a long-run reference of the regularized problem and
        log distances to it.
    tol : float, optional
        Tighter distance target than the regularization default.
    """
    if tol is None:
        tol = config.tol
    p = build_problem(data, graph)
    problem = solved_problem(config.scenario, p)
    kw = {"max_iter": config.max_iter, "log_every": config.extra.get("log_every", 1)}
    if config.mode == "decentralized" and trace is not None:
        kw["trace"] = trace
    ref = None
    if reference:
        reg = regularize(problem, config.eps, config.R)
        target = math.sqrt(reg.meta["delta"]) if tol is None else min(tol, math.sqrt(reg.meta["delta"]))
        ref = long_run(reg, config.max_iter, target)
        kw["reference"] = ref.point
        kw["reference_stops"] = False
    w, report = solve_nonstrongly(problem, config.eps, config.R, tol=tol,
                                  mode=config.mode, **kw)
    x = _primal(problem, p, w, report)
    metrics = {
        "objective": float(report.final["problem"].value(w)),
        "feas_residual": float(np.linalg.norm(problem.residual(w))),
        "iterations": report.iterations,
        "comm_rounds": report.comm_rounds,
        "converged": report.converged,
    }
    metrics.update(_primal_metrics(p, x))
    if ref is not None:
        metrics["dist_to_ref"] = float(np.linalg.norm(w - ref.point))
    report.meta.update(scenario=config.scenario, seed=config.seed, graph=config.graph)
    report.final["x"] = x
    report.final.update(metrics)
    return ExperimentResult(config.scenario, w, x, report, metrics, ref)
