"""
Instance generation and the JSON instance format.

An instance file stores the problem data; the communication graph lives
in an edge-list file referenced by relative path::

    {"type": "coupled", "scenario": "basis_pursuit", "n": 3, "p": 2,
     "d_i": [2, 2, 2], "atoms": ["l1", "l1", "l1"],
     "A": [[[...], [...]], ...], "b": [[...], ...], "set": {"kind": "full_space"},
     "lambda": 1.0, "graph": "instance.edges", "seed": 7, "x_true": [...]}

Consensus instances carry ``d`` instead of ``d_i`` and ``p`` is the row
count of every ``A_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atoms import FeasibleSet, atom_from_name
from .graphs import build_graph, laplacian, read_edgelist, write_edgelist
from .problems import ConsensusProblem, CoupledProblem

SCENARIOS = ("basis_pursuit", "basis_pursuit_dd", "mae_consensus", "mse_dd", "custom")
COUPLED_SCENARIOS = ("basis_pursuit", "basis_pursuit_dd")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "basis_pursuit"
    graph: str = "path"
    graph_p: float = 0.5
    n: int = 3
    d: int = 2
    p: int = 2
    lam: float = 1.0
    eps: float = 1e-6
    R: float = 10.0
    seed: int = 7
    noise: float = None
    mode: str = "centralized"
    max_iter: int = 200_000
    tol: float = None
    instance: str = None
    out: str = "out"
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.scenario == "custom" and not self.instance:
            raise ConfigError("custom scenario needs an instance file")
        for name in ("n", "d", "p", "max_iter"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n < 2:
            raise ConfigError("need at least two nodes")
        for name in ("eps", "R", "lam"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.mode not in ("centralized", "decentralized"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.scenario in COUPLED_SCENARIOS and self.d * self.n < self.p:
            raise ConfigError("basis pursuit needs n*d >= p for a solvable coupling constraint")
        return self

    @property
    def problem_type(self):
        return "coupled" if self.scenario in COUPLED_SCENARIOS else "consensus"


def generate(config):
    """
    Instance dictionary for a scenario preset.

    ``A_i`` entries are standard normal. Basis pursuit uses a sparse
    ``x_true`` and ``b_i = A_i x_true_i`` (noise-free unless ``noise`` is
    set), so ``x_true`` satisfies the coupling constraint exactly. The
    absolute-error presets use a dense ``x_true`` and add Gaussian noise of
    scale ``noise`` (default 0.1).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, d, p = config.n, config.d, config.p
    if config.problem_type == "coupled":
        A = [rng.standard_normal((p, d)) for _ in range(n)]
        x_true = np.zeros(n * d)
        k = max(1, (n * d) // 3)
        support = rng.choice(n * d, size=k, replace=False)
        x_true[np.sort(support)] = rng.standard_normal(k)
        noise = config.noise or 0.0
        xs = np.split(x_true, n)
        b = [Ai @ xi + noise * rng.standard_normal(p) for Ai, xi in zip(A, xs)]
        data = {"type": "coupled", "d_i": [d] * n}
    else:
        A = [rng.standard_normal((p, d)) for _ in range(n)]
        x_true = rng.standard_normal(d)
        noise = 0.1 if config.noise is None else config.noise
        b = [Ai @ x_true + noise * rng.standard_normal(p) for Ai in A]
        data = {"type": "consensus", "d": d}
    data.update({
        "scenario": config.scenario,
        "n": n,
        "p": p,
        "atoms": ["l1"] * n,
        "A": [Ai.tolist() for Ai in A],
        "b": [bi.tolist() for bi in b],
        "set": {"kind": "full_space"},
        "lambda": config.lam,
        "seed": config.seed,
        "noise": noise,
        "x_true": x_true.tolist(),
    })
    return data


def graph_for(config):
    return build_graph(config.graph, config.n, p=config.graph_p, seed=config.seed)


def write_instance(data, graph, path):
    """Write the instance JSON and its edge-list file next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    edge_path = path.with_suffix(".edges")
    write_edgelist(graph, edge_path)
    data = dict(data, graph=edge_path.name)
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    return path


def read_instance(path):
    path = Path(path)
    data = json.loads(path.read_text())
    graph = read_edgelist(path.parent / data["graph"])
    if graph.n != data["n"]:
        raise ConfigError(f"graph has {graph.n} nodes, instance has {data['n']}")
    return data, graph


def build_problem(data, graph):
    """ConsensusProblem or CoupledProblem from an instance dictionary."""
    gossip = laplacian(graph)
    atoms = [atom_from_name(a) for a in data["atoms"]]
    A = [np.asarray(Ai, dtype=float) for Ai in data["A"]]
    b = [np.asarray(bi, dtype=float) for bi in data["b"]]
    fset = FeasibleSet.from_dict(data.get("set", "full_space"))
    lam = float(data["lambda"])
    if data["type"] == "coupled":
        return CoupledProblem(atoms, A, b, gossip, lam, sets=[fset] * data["n"])
    if data["type"] == "consensus":
        return ConsensusProblem(atoms, A, b, gossip, lam, fset=fset)
    raise ConfigError(f"unknown instance type {data['type']!r}")
