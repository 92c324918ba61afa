"""Shared desk instances for the test suite."""

import numpy as np

from dualsmooth.operators import MatrixOperator, QuadraticObjective
from dualsmooth.problems import AffineConstrainedProblem


def random_quadratic(seed, d=None, m=None, cond=30.0):
    """
    Strongly convex quadratic under a random rank-deficient-free constraint.

    ``P(u) = u'Hu/2 + g'u`` with eigenvalues of H spread over ``[1, cond]``;
    ``K`` is ``m x d`` Gaussian and ``c = K u0`` for a random ``u0``.
    """
    rng = np.random.default_rng(seed)
    d = d or int(rng.integers(4, 21))
    m = m or int(rng.integers(1, d))
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    H = Q @ np.diag(np.geomspace(1.0, cond, d)) @ Q.T
    g = rng.standard_normal(d)
    K = rng.standard_normal((m, d))
    c = K @ rng.standard_normal(d)
    return AffineConstrainedProblem(QuadraticObjective(H, g), MatrixOperator(K), c)


def singular_quadratic(seed=0, d=6, rank=3, m=2):
    """``||B u||^2 / 2`` with a rank-deficient ``B`` under ``K u = c``."""
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((rank, d))
    K = rng.standard_normal((m, d))
    c = K @ rng.standard_normal(d)
    return AffineConstrainedProblem(QuadraticObjective(B.T @ B), MatrixOperator(K), c)


def edge_quadratic():
    """``|u|^2 / 2`` subject to ``u_1 = u_2``."""
    return AffineConstrainedProblem(QuadraticObjective(np.eye(2)), MatrixOperator([[1.0, -1.0]]),
                                    np.zeros(1))


def unit_ball_singular_quadratic(seed=0, norm=0.8):
    """`singular_quadratic` with ``c`` rescaled so the min-norm solution has norm `norm`."""
    from dualsmooth.reference import kkt_direct

    prob = singular_quadratic(seed)
    scale = norm / np.linalg.norm(kkt_direct(prob).point)
    return AffineConstrainedProblem(prob.objective, prob.K, scale * prob.c)
