import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualsmooth.graphs import (
    GRAPH_KINDS,
    GossipOperator,
    Graph,
    GraphError,
    build_graph,
    laplacian,
    lift_apply,
    read_edgelist,
    spectral_constants,
    validate_gossip,
    write_edgelist,
)


def eig_oracle(W):
    """Eigenvalues from a general (non-symmetric) solver, sorted."""
    return np.sort(np.linalg.eigvals(W).real)


@pytest.mark.parametrize("kind,n,expected", [
    ("path", 3, (3.0, 1.0, 3.0)),
    ("complete", 2, (2.0, 2.0, 1.0)),
    ("ring", 4, (4.0, 2.0, 2.0)),
])
def test_spectral_constants_examples(kind, n, expected):
    W = laplacian(build_graph(kind, n)).W
    assert spectral_constants(W) == pytest.approx(expected, rel=1e-12)
    eig = eig_oracle(W)
    pos = eig[eig > 1e-10 * eig[-1]]
    assert (eig[-1], pos[0]) == pytest.approx(expected[:2], rel=1e-10)


def test_spectral_constants_zero_matrix():
    with pytest.raises(ValueError):
        spectral_constants(np.zeros((3, 3)))


def test_lift_apply_examples():
    op = laplacian(build_graph("complete", 2)).lifted(2)
    assert np.allclose(lift_apply(op, [1, 0, 0, 0]), [1, 0, -1, 0])
    op3 = laplacian(build_graph("path", 4)).lifted(3)
    assert np.allclose(lift_apply(op3, np.tile([1.0, -2.0, 0.5], 4)), 0)
    op1 = laplacian(build_graph("ring", 5))
    x = np.arange(5.0)
    assert np.array_equal(lift_apply(op1, x), op1.W @ x)
    with pytest.raises(ValueError):
        lift_apply(op3, np.ones(5))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 6), d=st.integers(1, 3), kind=st.sampled_from(GRAPH_KINDS),
       seed=st.integers(0, 10_000))
def test_lift_apply_matches_kron(n, d, kind, seed):
    g = build_graph(kind, n, p=0.5, seed=seed)
    op = laplacian(g).lifted(d)
    x = np.random.default_rng(seed).standard_normal(n * d)
    ref = np.kron(op.W, np.eye(d)) @ x
    assert np.linalg.norm(lift_apply(op, x) - ref) <= 1e-12 * max(1.0, np.linalg.norm(ref))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), kind=st.sampled_from(GRAPH_KINDS), seed=st.integers(0, 10_000))
def test_generated_laplacians_are_valid(n, kind, seed):
    op = laplacian(build_graph(kind, n, p=0.3, seed=seed))
    assert validate_gossip(op.W, op.graph) == []
    assert op.kappa_W >= 1.0
    eig = np.linalg.eigvalsh(op.W)
    assert abs(eig.sum() - np.trace(op.W)) <= 1e-9 * max(1.0, np.trace(op.W))


def test_validate_gossip_violations():
    p3 = build_graph("path", 3)
    assert any("kernel" in v for v in validate_gossip(np.eye(3), p3))
    k3 = laplacian(build_graph("complete", 3)).W
    assert "nonzero entry at (1,3) which is not an edge" in validate_gossip(k3, p3)
    bad = laplacian(p3).W.copy()
    bad[0, 1] += 0.5
    assert "not symmetric" in validate_gossip(bad, p3)
    assert any("semi-definite" in v for v in validate_gossip(-laplacian(p3).W, p3))
    assert validate_gossip(np.eye(2), p3)[0].startswith("shape")


def test_complete_graph_kappa_one():
    for n in (2, 3, 6):
        assert laplacian(build_graph("complete", n)).kappa_W == pytest.approx(1.0)


def test_graph_validation_errors():
    with pytest.raises(GraphError):
        Graph(3, frozenset({(1, 2)}))
    with pytest.raises(GraphError):
        Graph(2, frozenset({(1, 1)}))
    with pytest.raises(GraphError):
        Graph(2, frozenset({(1, 3)}))
    with pytest.raises(GraphError):
        build_graph("hypercube", 4)
    with pytest.raises(GraphError):
        build_graph("erdos_renyi", 4, p=0.0)


def test_erdos_renyi_deterministic_and_connected():
    a = build_graph("erdos_renyi", 12, p=0.15, seed=3)
    b = build_graph("erdos_renyi", 12, p=0.15, seed=3)
    assert a == b
    assert a.is_connected()


def test_edgelist_roundtrip(tmp_path):
    g = build_graph("star", 5)
    path = tmp_path / "g.edges"
    write_edgelist(g, path)
    assert path.read_text().splitlines()[0] == "n 5"
    assert read_edgelist(path) == g
    (tmp_path / "bad.edges").write_text("1 2\n")
    with pytest.raises(GraphError):
        read_edgelist(tmp_path / "bad.edges")


def test_gossip_operator_is_read_only():
    op = GossipOperator.from_matrix(laplacian(build_graph("path", 3)).W)
    with pytest.raises(ValueError):
        op.W[0, 0] = 5.0
