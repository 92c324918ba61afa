import io
import json

import numpy as np
import pytest
from helpers import random_quadratic

from dualsmooth.apapc import ApapcState, params_for, solve, step
from dualsmooth.experiment import solved_problem
from dualsmooth.graphs import GossipOperator, build_graph, laplacian, lift_apply
from dualsmooth.instances import ExperimentConfig, build_problem, generate, graph_for
from dualsmooth.netsim import (
    DecentralizedRun,
    Network,
    ProtocolError,
    UnsupportedTopologyError,
    decentralized_matvec,
    run_decentralized,
)
from dualsmooth.problems import regularize

PRESETS = ("basis_pursuit", "basis_pursuit_dd", "mae_consensus", "mse_dd")


def preset_problem(scenario, graph="path", n=3, seed=7):
    cfg = ExperimentConfig(scenario=scenario, graph=graph, n=n, seed=seed)
    p = build_problem(generate(cfg), graph_for(cfg))
    return regularize(solved_problem(scenario, p), 1e-2, 10.0)


def test_matvec_single_edge():
    gossip = laplacian(build_graph("path", 2))
    out = decentralized_matvec(gossip, [np.array([1.0]), np.array([-1.0])])
    assert np.concatenate(out) == pytest.approx([2.0, -2.0])
    out = decentralized_matvec(gossip, [np.array([3.0]), np.array([3.0])])
    assert np.concatenate(out) == pytest.approx([0.0, 0.0])


@pytest.mark.parametrize("kind", ["path", "ring", "star", "complete", "erdos_renyi"])
def test_matvec_matches_lift(kind):
    rng = np.random.default_rng(0)
    g = build_graph(kind, 6, p=0.6, seed=1)
    gossip = laplacian(g).lifted(3)
    x = rng.standard_normal(18)
    net = Network(gossip)
    out = np.concatenate(decentralized_matvec(gossip, np.split(x, 6), net))
    assert np.linalg.norm(out - lift_apply(gossip, x)) <= 1e-12 * max(1.0, np.linalg.norm(x))
    assert net.ledger() == {"rounds": 1, "messages": 2 * len(g.edges), "volume": 6 * len(g.edges)}


def test_protocol_errors():
    net = Network(laplacian(build_graph("path", 3)))
    with pytest.raises(ProtocolError):
        net.nodes[0].receive(3, np.zeros(1))
    with pytest.raises(ProtocolError):
        net.nodes[1].mix(np.zeros(1))
    with pytest.raises(ProtocolError):
        net.gossip_round([np.zeros(1)] * 2)


def test_stores_are_disjoint():
    run = DecentralizedRun(preset_problem("basis_pursuit"), params_for(preset_problem("basis_pursuit")))
    run.load(ApapcState.initial(run.problem))
    stores = [node.store for node in run.network.nodes]
    assert [s.owner for s in stores] == [1, 2, 3]
    for i, a in enumerate(stores):
        for b in stores[i + 1:]:
            for key in ("u", "z", "y"):
                assert not np.shares_memory(a[key], b[key])


def test_unsupported_topology():
    with pytest.raises(UnsupportedTopologyError):
        Network(GossipOperator.from_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]])))
    with pytest.raises(UnsupportedTopologyError):
        run_decentralized(random_quadratic(0), iters=3)


@pytest.mark.parametrize("scenario", PRESETS)
def test_equivalence_with_centralized(scenario):
    prob = preset_problem(scenario)
    params = params_for(prob)
    s = ApapcState.initial(prob)
    for _ in range(150):
        s = step(s, prob, params)
    u, rep = run_decentralized(prob, iters=150)
    assert np.linalg.norm(u - s.u) <= 1e-9 * max(1.0, np.linalg.norm(s.u))
    assert rep.iterations == 150


@pytest.mark.parametrize("scenario", PRESETS)
def test_ledger_counts(scenario):
    prob = preset_problem(scenario)
    buf = io.StringIO()
    _, rep = run_decentralized(prob, iters=25, trace=buf)
    edges = rep.meta["edges"]
    assert rep.comm_rounds == 50
    assert rep.meta["ledger"]["rounds"] == 50
    assert rep.meta["ledger"]["messages"] == 50 * 2 * edges
    lines = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert len(lines) == 50 and all(r["messages"] == 2 * edges for r in lines)
    assert rep.counters["operator_applications"] == 50


def test_stopping_rules_match_centralized():
    prob = preset_problem("mae_consensus")
    u1, r1 = solve(prob, eps=1e-6, max_iter=50_000)
    u2, r2 = run_decentralized(prob, eps=1e-6, max_iter=50_000)
    assert r1.iterations == r2.iterations and r1.reason == r2.reason
    assert np.array_equal(u1, u2)


@pytest.mark.parametrize("n", [5, 8])
def test_well_connected_graphs_need_fewer_rounds(n):
    # the coupled dual's constraint is the lifted Laplacian alone
    rounds = {}
    for kind in ("path", "star", "complete"):
        prob = preset_problem("basis_pursuit", graph=kind, n=n)
        _, rep = run_decentralized(prob, eps=1e-6, max_iter=100_000)
        assert rep.converged
        rounds[kind] = rep.comm_rounds
    assert rounds["complete"] <= rounds["star"] <= rounds["path"]
