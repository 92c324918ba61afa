"""
Node-partitioned linear operators and separable objectives.

Every vector handled by the solver is a concatenation of per-node blocks
described by a :class:`Layout`. Operators and objectives expose one *view*
per node that touches only that node's data. A gossip term is the only
coupling between nodes: a view hands its gossip input to a ``mix``
function (``W`` applied across nodes) and combines the mixed result with
its local part. Centralized and simulated execution share these views and
differ only in how ``mix`` is carried out.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Layout:
    sizes: tuple

    @property
    def n(self):
        return len(self.sizes)

    @property
    def size(self):
        return int(sum(self.sizes))

    @cached_property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)

    def split(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.size,):
            raise ValueError(f"expected vector of length {self.size}, got shape {x.shape}")
        o = self.offsets
        return [x[o[i]:o[i + 1]] for i in range(self.n)]

    def join(self, blocks):
        if len(blocks) != self.n:
            raise ValueError(f"expected {self.n} blocks, got {len(blocks)}")
        if self.size == 0:
            return np.zeros(0)
        return np.concatenate([np.ravel(b) for b in blocks])

    @classmethod
    def uniform(cls, n, d):
        return cls((int(d),) * int(n))


def central_mix(gossip, blocks):
    """``W`` applied across node blocks in one dense product."""
    X = np.stack(blocks)
    return list(gossip.W @ X)


# --------------------------------------------------------------------------
# linear operators

class LinearOperator:
    """
    Node-partitioned linear map ``K``.

    Subclasses set ``in_layout``, ``out_layout``, ``gossip`` (a
    GossipOperator or None) and implement ``views``.
    """

    gossip = None

    def apply(self, x, mix=central_mix):
        return self.out_layout.join(self.apply_blocks(self.in_layout.split(x), mix))

    def apply_t(self, y, mix=central_mix):
        return self.in_layout.join(self.apply_blocks(self.out_layout.split(y), mix, transpose=True))

    def apply_blocks(self, blocks, mix=central_mix, transpose=False):
        views = self.views
        mixed = [None] * len(views)
        if self.gossip is not None:
            mixed = mix(self.gossip, [v.gossip_input(b, transpose) for v, b in zip(views, blocks)])
        return [v.output(b, m, transpose) for v, b, m in zip(views, blocks, mixed)]

    @property
    def shape(self):
        return self.out_layout.size, self.in_layout.size

    @property
    def gossip_terms(self):
        """Gossip products needed by one application of K (or of its transpose)."""
        return 0 if self.gossip is None else 1

    def to_dense(self):
        m, k = self.shape
        out = np.zeros((m, k))
        for j in range(k):
            e = np.zeros(k)
            e[j] = 1.0
            out[:, j] = self.apply(e)
        return out


class _MatrixView:
    def __init__(self, M):
        self.M = M

    def gossip_input(self, x, transpose):
        return None

    def output(self, x, mixed, transpose):
        return self.M.T @ x if transpose else self.M @ x


class MatrixOperator(LinearOperator):
    """A dense matrix owned by a single node."""

    def __init__(self, M):
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        self.in_layout = Layout((self.M.shape[1],))
        self.out_layout = Layout((self.M.shape[0],))
        self.views = [_MatrixView(self.M)]

    def to_dense(self):
        return self.M.copy()


class _GossipView:
    def gossip_input(self, x, transpose):
        return x

    def output(self, x, mixed, transpose):
        return mixed


class GossipLift(LinearOperator):
    """``W kron I_d``; symmetric, so the transpose is the same map."""

    def __init__(self, gossip, d=None):
        d = gossip.d if d is None else d
        self.gossip = gossip.lifted(d)
        self.in_layout = self.out_layout = Layout.uniform(gossip.n, d)
        self.views = [_GossipView() for _ in range(gossip.n)]


class _SplitView:
    """Node view of ``x_i = (a_i, s_i) -> B_i a_i + (W s)_i``."""

    def __init__(self, B, k):
        self.B = B
        self.k = k  # length of the local segment a_i

    def gossip_input(self, x, transpose):
        return x if transpose else x[self.k:]

    def output(self, x, mixed, transpose):
        if transpose:
            return np.concatenate([self.B.T @ x, mixed])
        return self.B @ x[:self.k] + mixed


class LocalPlusGossip(LinearOperator):
    """
    ``K(a, s) = diag(B_1, ..., B_n) a + (W kron I_p) s``.

    Node ``i`` holds the local input ``(a_i, s_i)`` with ``B_i`` of shape
    ``(p, k_i)``. This is the constraint of the (z, u) dual of the
    consensus problem and of the coupled problem written with a gossip
    slack.
    """

    def __init__(self, blocks, gossip):
        self.blocks = [np.atleast_2d(np.asarray(B, dtype=float)) for B in blocks]
        p = self.blocks[0].shape[0]
        if any(B.shape[0] != p for B in self.blocks):
            raise ValueError("local blocks must share their row count")
        if len(self.blocks) != gossip.n:
            raise ValueError("need one local block per node")
        self.gossip = gossip.lifted(p)
        self.local_sizes = tuple(B.shape[1] for B in self.blocks)
        self.in_layout = Layout(tuple(k + p for k in self.local_sizes))
        self.out_layout = Layout.uniform(gossip.n, p)
        self.views = [_SplitView(B, B.shape[1]) for B in self.blocks]


# --------------------------------------------------------------------------
# objectives

class Objective:
    """
    Smooth convex objective that splits as a sum of per-node terms.

    ``L`` and ``mu`` are smoothness and strong-convexity constants of the
    whole sum; ``lower_bound`` is a known lower bound on its infimum, or
    None.
    """

    layout: Layout
    views: list
    L: float
    mu: float
    lower_bound = None

    def value(self, x):
        return float(sum(v.value(b) for v, b in zip(self.views, self.layout.split(x))))

    def grad(self, x):
        return self.layout.join([v.grad(b) for v, b in zip(self.views, self.layout.split(x))])


class LocalTerm:
    def __init__(self, value, grad):
        self.value = value
        self.grad = grad


class SeparableObjective(Objective):
    def __init__(self, layout, terms, L, mu=0.0, lower_bound=None):
        if len(terms) != layout.n:
            raise ValueError("need one term per node")
        self.layout = layout
        self.views = list(terms)
        self.L = float(L)
        self.mu = float(mu)
        self.lower_bound = lower_bound


class QuadraticObjective(Objective):
    """``0.5 x'Hx + g'x + const`` on a single node."""

    def __init__(self, H, g=None, const=0.0):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        self.H = 0.5 * (H + H.T)
        self.g = np.zeros(H.shape[0]) if g is None else np.asarray(g, dtype=float)
        self.const = float(const)
        self.layout = Layout((H.shape[0],))
        eig = np.linalg.eigvalsh(self.H)
        self.L = float(eig[-1])
        self.mu = float(max(eig[0], 0.0))
        if eig[0] < -1e-12 * max(1.0, abs(eig[-1])):
            raise ValueError("quadratic is not convex")
        self.lower_bound = self._infimum()
        self.views = [LocalTerm(self._value, self._grad)]

    def _value(self, x):
        return 0.5 * float(x @ self.H @ x) + float(self.g @ x) + self.const

    def _grad(self, x):
        return self.H @ x + self.g

    def _infimum(self):
        sol, *_ = np.linalg.lstsq(self.H, -self.g, rcond=None)
        if np.linalg.norm(self.H @ sol + self.g) > 1e-9 * (1 + np.linalg.norm(self.g)):
            return None
        return self._value(sol)


class _RegularizedView:
    def __init__(self, base, mu, anchor):
        self.base, self.mu, self.anchor = base, mu, anchor

    def value(self, x):
        r = x - self.anchor
        return self.base.value(x) + 0.5 * self.mu * float(r @ r)

    def grad(self, x):
        return self.base.grad(x) + self.mu * (x - self.anchor)


class RegularizedObjective(Objective):
    """``P(x) + (mu/2) ||x - anchor||^2``."""

    def __init__(self, base, mu, anchor):
        self.base = base
        self.reg = float(mu)
        self.anchor = np.asarray(anchor, dtype=float)
        self.layout = base.layout
        self.views = [_RegularizedView(v, self.reg, a)
                      for v, a in zip(base.views, self.layout.split(self.anchor))]
        self.L = base.L + self.reg
        self.mu = max(base.mu, 0.0) + self.reg
        self.lower_bound = base.lower_bound
