"""
Communication graphs and gossip matrices.

Nodes are numbered 1..n in every public interface (edge lists, violation
messages); arrays are indexed 0..n-1 internally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# eigenvalues below ZERO_TOL * lambda_max are treated as zero
ZERO_TOL = 1e-10
PSD_TOL = 1e-9

GRAPH_KINDS = ("path", "ring", "star", "complete", "erdos_renyi")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph on nodes 1..n."""

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"node count must be >= 1, got {self.n}")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise GraphError(f"edge ({i},{j}) outside 1..{self.n}")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(normalized))
        if not self.is_connected():
            raise GraphError("graph is not connected")

    def sorted_edges(self):
        return sorted(self.edges)

    def neighbors(self, i):
        """Sorted neighbor list of node `i` (1-based)."""
        out = [b for a, b in self.edges if a == i] + [a for a, b in self.edges if b == i]
        return sorted(out)

    def adjacency(self):
        adj = np.zeros((self.n, self.n))
        for i, j in self.edges:
            adj[i - 1, j - 1] = adj[j - 1, i - 1] = 1.0
        return adj

    def is_connected(self):
        seen = {1}
        stack = [1]
        nbrs = {k: [] for k in range(1, self.n + 1)}
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        while stack:
            k = stack.pop()
            for m in nbrs[k]:
                if m not in seen:
                    seen.add(m)
                    stack.append(m)
        return len(seen) == self.n


def _erdos_renyi_edges(n, p, rng):
    return {(i, j) for i, j in itertools.combinations(range(1, n + 1), 2) if rng.random() < p}


def build_graph(kind, n, p=None, seed=0):
    """
    Build a connected graph of a named topology.

    Parameters
    ----------
    kind : str
        One of ``path``, ``ring``, ``star``, ``complete``, ``erdos_renyi``.
    n : int
        Number of nodes, at least 2.
    p : float, optional
        Edge probability for ``erdos_renyi``, in (0, 1].
    seed : int
        Seed for ``erdos_renyi``. Disconnected draws are regenerated with
        the seed salted by the attempt index, so the result is a
        deterministic function of ``(n, p, seed)``.
    """
    if n < 2:
        raise GraphError(f"need n >= 2, got {n}")
    if kind == "path":
        edges = {(i, i + 1) for i in range(1, n)}
    elif kind == "ring":
        edges = {(i, i + 1) for i in range(1, n)} | {(1, n)} if n > 2 else {(1, 2)}
    elif kind == "star":
        edges = {(1, j) for j in range(2, n + 1)}
    elif kind == "complete":
        edges = set(itertools.combinations(range(1, n + 1), 2))
    elif kind == "erdos_renyi":
        if p is None or not (0 < p <= 1):
            raise GraphError(f"erdos_renyi needs 0 < p <= 1, got {p}")
        salt = 0
        while True:
            rng = np.random.default_rng([seed, salt])
            edges = _erdos_renyi_edges(n, p, rng)
            try:
                return Graph(n, frozenset(edges))
            except GraphError:
                salt += 1
    else:
        raise GraphError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    return Graph(n, frozenset(edges))


def spectral_constants(W):
    """
    Return ``(L_W, mu_W, kappa_W)`` for a symmetric psd matrix.

    ``mu_W`` is the smallest eigenvalue above ``ZERO_TOL * L_W``.
    """
    W = np.asarray(W, dtype=float)
    eig = np.linalg.eigvalsh(W)
    top = eig[-1]
    if top <= 0:
        raise ValueError("matrix has no positive eigenvalue")
    positive = eig[eig > ZERO_TOL * top]
    if positive.size == 0:
        raise ValueError("matrix has no positive eigenvalue")
    bottom = positive[0]
    return float(top), float(bottom), float(top / bottom)


@dataclass(frozen=True)
class GossipOperator:
    """Gossip matrix ``W`` together with the block size ``d`` of its lift ``W kron I_d``."""

    W: np.ndarray = field(repr=False)
    d: int = 1
    L_W: float = 0.0
    mu_W: float = 0.0
    kappa_W: float = 0.0
    graph: Graph | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_matrix(cls, W, d=1, graph=None):
        W = np.array(W, dtype=float)
        W.setflags(write=False)
        L, mu, kappa = spectral_constants(W)
        return cls(W=W, d=d, L_W=L, mu_W=mu, kappa_W=kappa, graph=graph)

    @property
    def n(self):
        return self.W.shape[0]

    def lifted(self, d):
        """Same matrix with lift block size `d`."""
        return replace(self, d=int(d))


def laplacian(g):
    """Graph Laplacian ``D - A`` as a gossip operator."""
    adj = g.adjacency()
    L = np.diag(adj.sum(axis=1)) - adj
    return GossipOperator.from_matrix(L, graph=g)


def lift_apply(op, x):
    """Compute ``(W kron I_d) x`` blockwise."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != op.n * op.d:
        raise ValueError(f"expected vector of length {op.n * op.d}, got shape {x.shape}")
    return (op.W @ x.reshape(op.n, op.d)).reshape(-1)


def validate_gossip(W, g):
    """
    Check a matrix against the gossip-matrix requirements for graph `g`.

    Returns a list of human-readable violations, empty when `W` is a
    symmetric psd matrix supported on the edges plus diagonal whose kernel
    is exactly the consensus line.
    """
    W = np.asarray(W, dtype=float)
    n = g.n
    if W.shape != (n, n):
        return [f"shape {W.shape} does not match node count {n}"]
    problems = []
    scale = max(np.linalg.norm(W, 2), 1e-300)
    if not np.allclose(W, W.T, atol=1e-12 * scale, rtol=0):
        problems.append("not symmetric")
    sym = 0.5 * (W + W.T)
    eig, vec = np.linalg.eigh(sym)
    if eig[0] < -PSD_TOL * scale:
        problems.append(f"not positive semi-definite (min eigenvalue {eig[0]:.3e})")
    for i in range(n):
        for j in range(n):
            if i != j and W[i, j] != 0 and (min(i, j) + 1, max(i, j) + 1) not in g.edges:
                if i < j:
                    problems.append(f"nonzero entry at ({i + 1},{j + 1}) which is not an edge")
    kernel = vec[:, np.abs(eig) <= PSD_TOL * scale]
    ones = np.ones(n) / np.sqrt(n)
    if kernel.shape[1] != 1:
        problems.append(f"kernel has dimension {kernel.shape[1]}, expected 1 (consensus line)")
    elif abs(abs(kernel[:, 0] @ ones) - 1) > 1e-8:
        problems.append("kernel is not the consensus line")
    return problems


def write_edgelist(g, path):
    lines = [f"n {g.n}"] + [f"{i} {j}" for i, j in g.sorted_edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path):
    n = None
    edges = set()
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        a, b = line.split()
        if a == "n":
            n = int(b)
        else:
            edges.add((int(a), int(b)))
    if n is None:
        raise GraphError(f"{path}: missing 'n <count>' header")
    return Graph(n, frozenset(edges))
