"""
Synchronous message-passing execution of the solver.

Each node owns a private store with its blocks of ``u``, ``u_f``, ``z``,
``y`` and views of its local objective and operator data. The only way
information crosses nodes is :meth:`Network.gossip`, one synchronous
round in which every node sends one vector to each neighbor and combines
what it receives with its row of ``W``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .apapc import ApapcState, StopRule, _scale, params_for, run_loop


class ProtocolError(RuntimeError):
    pass


class UnsupportedTopologyError(ValueError):
    pass


@dataclass
class RoundLog:
    index: int
    messages: int
    volume: int
    tag: str


class _Store(dict):
    """Node-private storage, tagged with its owner."""

    def __init__(self, owner):
        super().__init__()
        self.owner = owner


@dataclass
class NodeState:
    node: int
    neighbors: tuple
    weights: dict
    store: _Store = None
    inbox: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.store is None:
            self.store = _Store(self.node)

    def receive(self, sender, vector):
        if sender not in self.neighbors:
            raise ProtocolError(f"node {self.node} received from non-neighbor {sender}")
        self.inbox[sender] = vector

    def mix(self, own):
        """``sum_j W_ij x_j`` from the own block and the inbox."""
        out = self.weights[self.node] * own
        for j in self.neighbors:
            if j not in self.inbox:
                raise ProtocolError(f"missing message on edge ({j},{self.node})")
            out = out + self.weights[j] * self.inbox[j]
        self.inbox.clear()
        return out


class Network:
    """Nodes of a gossip graph plus a ledger of communication rounds."""

    def __init__(self, gossip, trace=None):
        if gossip is None or gossip.graph is None:
            raise UnsupportedTopologyError("gossip operator carries no graph")
        self.gossip = gossip
        g = gossip.graph
        W = gossip.W
        self.nodes = []
        for i in range(1, g.n + 1):
            nbrs = tuple(g.neighbors(i))
            weights = {i: float(W[i - 1, i - 1])}
            weights.update({j: float(W[i - 1, j - 1]) for j in nbrs})
            self.nodes.append(NodeState(node=i, neighbors=nbrs, weights=weights))
        self.edges = len(g.edges)
        self.rounds = []
        self.trace = trace

    @property
    def round_count(self):
        return len(self.rounds)

    def gossip_round(self, blocks, tag="gossip"):
        """One synchronous round: send, then mix at every node."""
        if len(blocks) != len(self.nodes):
            raise ProtocolError("one block per node is required")
        messages = volume = 0
        for node, x in zip(self.nodes, blocks):
            for j in node.neighbors:
                self.nodes[j - 1].receive(node.node, x)
                messages += 1
                volume += x.size
        out = [node.mix(x) for node, x in zip(self.nodes, blocks)]
        rec = RoundLog(index=len(self.rounds) + 1, messages=messages, volume=volume, tag=tag)
        self.rounds.append(rec)
        if self.trace is not None:
            self.trace.write(json.dumps({"round": rec.index, "messages": messages,
                                         "volume": volume, "tag": tag}) + "\n")
        return out

    def mixer(self, tag):
        def mix(gossip, blocks):
            if gossip.n != len(self.nodes) or not np.array_equal(gossip.W, self.gossip.W):
                raise UnsupportedTopologyError("operator gossip matrix differs from the network's")
            return self.gossip_round(blocks, tag)
        return mix

    def ledger(self):
        return {
            "rounds": len(self.rounds),
            "messages": sum(r.messages for r in self.rounds),
            "volume": sum(r.volume for r in self.rounds),
        }


def decentralized_matvec(gossip, blocks, network=None):
    """
    ``y_i = sum_j W_ij x_j`` computed by message passing in one round.

    Returns the output blocks; the round is recorded on `network` (a fresh
    one is built when omitted).
    """
    network = network or Network(gossip)
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    return network.gossip_round(blocks, tag="matvec")


def _check_decomposable(problem, network):
    K = problem.K
    if K.gossip is None:
        raise UnsupportedTopologyError("constraint operator has no gossip term")
    if K.in_layout.n != len(network.nodes) or K.out_layout.n != len(network.nodes):
        raise UnsupportedTopologyError("constraint operator is not partitioned over the network nodes")
    if problem.objective.layout != K.in_layout:
        raise UnsupportedTopologyError("objective is not partitioned like the constraint")


class DecentralizedRun:
    """
    Simulated execution of the solver on a node-partitioned problem.

    ``step`` performs the same updates as the centralized solver, node by
    node; K and K' products run their gossip parts through the network.
    """

    def __init__(self, problem, params, trace=None):
        self.problem = problem
        self.params = params
        self.network = Network(problem.K.gossip, trace=trace)
        _check_decomposable(problem, self.network)
        obj_views = problem.objective.views
        op_views = problem.K.views
        c_blocks = problem.K.out_layout.split(problem.c)
        for node, fv, kv, c in zip(self.network.nodes, obj_views, op_views, c_blocks):
            node.store.update(objective=fv, operator=kv, c=c.copy())
        self.in_layout = problem.K.in_layout
        self.out_layout = problem.K.out_layout

    def load(self, state):
        for node, u, uf, z, y in zip(self.network.nodes, self.in_layout.split(state.u),
                                     self.in_layout.split(state.u_f), self.in_layout.split(state.z),
                                     self.out_layout.split(state.y)):
            node.store.update(u=u.copy(), u_f=uf.copy(), z=z.copy(), y=y.copy())
        self.k = state.k

    def gather(self, key, layout):
        return layout.join([node.store[key] for node in self.network.nodes])

    def _operator(self, inputs, transpose, tag):
        nodes = self.network.nodes
        outgoing = [nd.store["operator"].gossip_input(x, transpose) for nd, x in zip(nodes, inputs)]
        mixed = self.network.gossip_round(outgoing, tag)
        return [nd.store["operator"].output(x, m, transpose) for nd, x, m in zip(nodes, inputs, mixed)]

    def step(self, state=None):
        p = self.params
        tau, eta, theta, alpha = p.tau, p.eta, p.theta, p.alpha
        shrink = 1.0 / (1.0 + eta * alpha)
        nodes = self.network.nodes
        for nd in nodes:
            s = nd.store
            s["u_g"] = tau * s["u"] + (1.0 - tau) * s["u_f"]
            s["grad_g"] = s["objective"].grad(s["u_g"])
            s["base"] = s["grad_g"] - alpha * s["u_g"]
            s["u_half"] = shrink * (s["u"] - eta * (s["base"] + s["z"]))
        Ku = self._operator([nd.store["u_half"] for nd in nodes], False, "K u_half")
        r = [k - nd.store["c"] for k, nd in zip(Ku, nodes)]
        Ktr = self._operator(r, True, "K' (K u_half - c)")
        for nd, ri, gi in zip(nodes, r, Ktr):
            s = nd.store
            s["residual"] = ri
            s["z"] = s["z"] + theta * gi
            s["y"] = s["y"] + theta * ri
            u_new = shrink * (s["u"] - eta * (s["base"] + s["z"]))
            s["u_f"] = s["u_g"] + (2.0 * tau / (2.0 - tau)) * (u_new - s["u"])
            s["u"] = u_new
        self.k += 1
        return self.snapshot()

    def snapshot(self):
        """Observer view of the global state (monitoring only, no rounds)."""
        L_in, L_out = self.in_layout, self.out_layout
        st = ApapcState(u=self.gather("u", L_in), u_f=self.gather("u_f", L_in),
                        z=self.gather("z", L_in), y=self.gather("y", L_out), k=self.k)
        st.u_g = self.gather("u_g", L_in)
        st.u_half = self.gather("u_half", L_in)
        st.grad_g = self.gather("grad_g", L_in)
        st.residual_half = self.gather("residual", L_out)
        if not (np.all(np.isfinite(st.u)) and np.all(np.isfinite(st.z))):
            from .apapc import DivergenceError
            raise DivergenceError(self.k, "non-finite iterate")
        return st


def run_decentralized(problem, params="auto", iters=None, eps=None, reference=None, u0=None,
                      tol_feas=None, tol_opt=None, check_every=10, log_every=1, max_iter=10_000,
                      schedule="verbatim", trace=None, reference_stops=True):
    """
    Execute the solver over the simulated network.

    With `iters` the run performs exactly that many iterations; otherwise
    it uses the same stopping rules as :func:`dualsmooth.apapc.solve`.
    The report carries the round ledger; ``comm_rounds`` counts gossip
    rounds only (two per iteration: one for K, one for K').
    """
    if params == "auto":
        params = params_for(problem, schedule)
    run = DecentralizedRun(problem, params, trace=trace)
    state = ApapcState.initial(problem, u0)
    run.load(state)
    scale = _scale(problem, state.u)
    if iters is not None:
        rule = StopRule(reference=reference, fixed=True)
        max_iter = iters
    else:
        rule = StopRule(eps=eps, reference=reference, reference_stops=reference_stops,
                        tol_feas=tol_feas if tol_feas is not None else 1e-9 * scale,
                        tol_opt=tol_opt if tol_opt is not None else 1e-9 * scale,
                        check_every=check_every)
    rounds_per_iter = 2 * problem.K.gossip_terms
    u, report = run_loop(problem, params, state, rule, max_iter, log_every,
                         stepper=run.step, rounds_per_iter=rounds_per_iter)
    ledger = run.network.ledger()
    if ledger["rounds"] != report.comm_rounds:
        raise ProtocolError(f"ledger has {ledger['rounds']} rounds, expected {report.comm_rounds}")
    report.counters.update(grad_calls=report.iterations, K_applications=report.iterations,
                           Kt_applications=report.iterations,
                           operator_applications=2 * report.iterations,
                           local_grad_calls=report.iterations * len(run.network.nodes))
    report.meta.update(mode="decentralized", ledger=ledger, edges=run.network.edges)
    report.final["network"] = run.network
    return u, report
