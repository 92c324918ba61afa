"""
Consensus and coupled-constraint problems with their smoothed duals, in
the affinely constrained form consumed by the solver.

Stacked vectors are node-major: node ``i`` owns one contiguous block. For
the dual of the consensus problem the block of node ``i`` is ``(z_i, u_i)``
with ``z_i`` the multiplier of its residual and ``u_i`` its share of the
gossip slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .atoms import FULL_SPACE, ConvexAtom, FeasibleSet, atom_linear, atom_sq_l2
from .conjugate import SmoothedConjugate, conjugate_grad, conjugate_value
from .graphs import GossipOperator, ZERO_TOL
from .operators import (GossipLift, Layout, LinearOperator, LocalPlusGossip, LocalTerm,
                        Objective, RegularizedObjective, SeparableObjective)

IMAGE_TOL = 1e-9


class ProblemError(ValueError):
    pass


def _as_blocks(arrays, ndim):
    out = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        out.append(np.atleast_2d(a) if ndim == 2 else np.atleast_1d(a))
    return out


@dataclass(frozen=True)
class ConsensusProblem:
    """
    ``min sum_i f_i(A_i x_i - b_i) + lam * G(A_i x_i - b_i)`` subject to
    ``x_1 = ... = x_n`` (``W x = 0``), every ``x_i`` in ``fset``.
    """

    atoms: tuple
    A: tuple
    b: tuple
    gossip: GossipOperator
    lam: float
    mu: float = 0.0
    fset: FeasibleSet = FULL_SPACE
    regularizer: ConvexAtom = field(default_factory=atom_sq_l2)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "A", tuple(_as_blocks(self.A, 2)))
        object.__setattr__(self, "b", tuple(_as_blocks(self.b, 1)))
        n = self.gossip.n
        if not (len(self.atoms) == len(self.A) == len(self.b) == n):
            raise ProblemError(f"need {n} blocks of each input (one per node)")
        d = self.A[0].shape[1]
        for i, (A, b) in enumerate(zip(self.A, self.b)):
            if A.shape[1] != d:
                raise ProblemError(f"A_{i + 1} has {A.shape[1]} columns, expected {d}")
            if b.shape != (A.shape[0],):
                raise ProblemError(f"b_{i + 1} has length {b.size}, expected {A.shape[0]}")

    @property
    def n(self):
        return self.gossip.n

    @property
    def d(self):
        return self.A[0].shape[1]

    @property
    def rows(self):
        return tuple(A.shape[0] for A in self.A)

    def residuals(self, x):
        xs = Layout.uniform(self.n, self.d).split(x)
        return [A @ xi - b for A, b, xi in zip(self.A, self.b, xs)]

    def primal_value(self, x):
        total = 0.0
        for f, r in zip(self.atoms, self.residuals(x)):
            total += f.value(r) + self.lam * self.regularizer.value(r)
        return total


@dataclass(frozen=True)
class CoupledProblem:
    """
    ``min sum_i f_i(x_i) + lam * G(x_i)`` subject to
    ``sum_i (A_i x_i - b_i) = 0``, every ``x_i`` in ``sets[i]``.
    """

    atoms: tuple
    A: tuple
    b: tuple
    gossip: GossipOperator
    lam: float
    mu: float = 0.0
    sets: Optional[tuple] = None
    regularizer: ConvexAtom = field(default_factory=atom_sq_l2)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "A", tuple(_as_blocks(self.A, 2)))
        object.__setattr__(self, "b", tuple(_as_blocks(self.b, 1)))
        n = self.gossip.n
        if self.sets is None:
            object.__setattr__(self, "sets", (FULL_SPACE,) * n)
        object.__setattr__(self, "sets", tuple(self.sets))
        if not (len(self.atoms) == len(self.A) == len(self.b) == len(self.sets) == n):
            raise ProblemError(f"need {n} atoms, matrices, vectors and sets (one per node)")
        p = self.A[0].shape[0]
        for i, (A, b) in enumerate(zip(self.A, self.b)):
            if A.shape[0] != p:
                raise ProblemError(f"A_{i + 1} has {A.shape[0]} rows, expected {p}")
            if b.shape != (p,):
                raise ProblemError(f"b_{i + 1} has length {b.size}, expected {p}")

    @property
    def n(self):
        return self.gossip.n

    @property
    def p(self):
        return self.A[0].shape[0]

    @property
    def dims(self):
        return tuple(A.shape[1] for A in self.A)

    def primal_value(self, x):
        xs = Layout(self.dims).split(x)
        return float(sum(f.value(xi) + self.lam * self.regularizer.value(xi)
                         for f, xi in zip(self.atoms, xs)))

    def coupling_residual(self, x):
        xs = Layout(self.dims).split(x)
        return sum(A @ xi - b for A, b, xi in zip(self.A, self.b, xs))


@dataclass(frozen=True, eq=False)
class AffineConstrainedProblem:
    """
    ``min P(u)`` subject to ``K u = c``.

    ``kind`` records which construction produced the problem; ``meta``
    carries construction data (regularization weight, inner tolerance, ...).
    """

    objective: Objective
    K: LinearOperator
    c: np.ndarray
    kind: str = "generic"
    meta: dict = field(default_factory=dict)
    check_image: bool = True

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        if self.objective.layout.size != self.K.in_layout.size:
            raise ProblemError("objective and constraint operator disagree on the variable size")
        if c.shape != (self.K.out_layout.size,):
            raise ProblemError(f"c must have length {self.K.out_layout.size}")
        if self.check_image and np.any(c):
            Kd = self.K.to_dense()
            sol, *_ = np.linalg.lstsq(Kd, c, rcond=None)
            if np.linalg.norm(Kd @ sol - c) > IMAGE_TOL * np.linalg.norm(c):
                raise ProblemError("c is not in the image of K")

    @property
    def layout(self):
        return self.objective.layout

    @property
    def L_P(self):
        return self.objective.L

    @property
    def mu_P(self):
        return self.objective.mu

    @cached_property
    def spectrum(self):
        """``(lambda_max(K'K), lambda_min+(K'K))``."""
        Kd = self.K.to_dense()
        s = np.linalg.svd(Kd, compute_uv=False)
        eig = s ** 2
        top = eig[0]
        if top <= 0:
            raise ProblemError("constraint operator is zero")
        return float(top), float(eig[eig > ZERO_TOL * top][-1])

    @property
    def kappa_K(self):
        top, bottom = self.spectrum
        return top / bottom

    def value(self, u):
        return self.objective.value(u)

    def grad(self, u):
        return self.objective.grad(u)

    def residual(self, u):
        return self.K.apply(u) - self.c


# --------------------------------------------------------------------------
# spectral constants of the constraint blocks

def constraint_constants(As):
    """``(L_A, mu_A, kappa_A)`` for matrices sharing a row count."""
    As = _as_blocks(As, 2)
    rows = As[0].shape[0]
    if any(A.shape[0] != rows for A in As):
        raise ProblemError("constraint blocks must share a row count")
    grams = [A @ A.T for A in As]
    L = max(float(np.linalg.eigvalsh(G)[-1]) for G in grams)
    eig = np.linalg.eigvalsh(sum(grams) / len(grams))
    if eig[-1] <= 0:
        raise ProblemError("all constraint blocks are zero")
    mu = float(eig[eig > ZERO_TOL * eig[-1]][0])
    return L, mu, L / mu


def _max_gram(As):
    return max(float(np.linalg.norm(A, 2)) ** 2 for A in As)


# --------------------------------------------------------------------------
# duals

def _conjugates(atoms, regularizer, lam, sets):
    if not lam > 0:
        raise ProblemError("lam must be positive to smooth the dual; regularize the problem first")
    out = []
    for f, Q in zip(atoms, sets):
        c = SmoothedConjugate(f, regularizer, lam, Q)
        c.family  # surfaces unsupported regularizers
        out.append(c)
    return out


class _CoupledDualTerm(LocalTerm):
    def __init__(self, conj, A, b):
        self.conj, self.A, self.b = conj, A, b

    def value(self, z):
        return conjugate_value(self.conj, self.A.T @ z) - float(z @ self.b)

    def grad(self, z):
        return self.A @ conjugate_grad(self.conj, self.A.T @ z) - self.b


def dualize_coupled(p):
    """
    Smoothed dual of the coupled problem.

    Variable: one multiplier block ``z_i`` of size ``p`` per node, with
    ``W z = 0`` forcing agreement.
    Objective: ``sum_i F_i*(A_i' z_i) - <z_i, b_i>``.
    """
    conjs = _conjugates(p.atoms, p.regularizer, p.lam, p.sets)
    terms = [_CoupledDualTerm(c, A, b) for c, A, b in zip(conjs, p.A, p.b)]
    layout = Layout.uniform(p.n, p.p)
    for t, z in zip(terms, layout.split(np.zeros(layout.size))):
        t.grad(z)  # surfaces unsupported closed forms before solving
    L = _max_gram(p.A) * conjs[0].smoothness_bound
    obj = SeparableObjective(layout, terms, L=L, mu=0.0)
    K = GossipLift(p.gossip, p.p)
    return AffineConstrainedProblem(obj, K, np.zeros(layout.size), kind="coupled_dual",
                                    meta={"source": p})


class _ConsensusDualTerm(LocalTerm):
    def __init__(self, conj, b, d):
        self.conj, self.b, self.k, self.d = conj, b, b.size, d

    def value(self, w):
        z = w[:self.k]
        return conjugate_value(self.conj, z) + float(z @ self.b)

    def grad(self, w):
        z = w[:self.k]
        return np.concatenate([conjugate_grad(self.conj, z) + self.b, np.zeros(self.d)])


def dualize_consensus(p):
    """
    Smoothed dual of the consensus problem.

    Variable: node blocks ``(z_i, u_i)`` with ``z_i`` of size ``rows_i`` and
    ``u_i`` of size ``d``.
    Objective: ``sum_i F_i*(z_i) + <z_i, b_i>`` (independent of ``u``).
    Constraint: ``A' z + W u = 0``.
    """
    if p.fset.kind != "full_space":
        raise ProblemError("the consensus dual is affinely constrained only for x in the full space")
    conjs = _conjugates(p.atoms, p.regularizer, p.lam, [FULL_SPACE] * p.n)
    terms = [_ConsensusDualTerm(c, b, p.d) for c, b in zip(conjs, p.b)]
    K = LocalPlusGossip([A.T for A in p.A], p.gossip)
    for t, w in zip(terms, K.in_layout.split(np.zeros(K.in_layout.size))):
        t.grad(w)
    obj = SeparableObjective(K.in_layout, terms, L=conjs[0].smoothness_bound, mu=0.0)
    return AffineConstrainedProblem(obj, K, np.zeros(K.out_layout.size), kind="consensus_dual",
                                    meta={"source": p})


def split_consensus_dual(p, w):
    """Split a stacked ``(z_i, u_i)`` vector into the ``z`` and ``u`` stacks."""
    layout = Layout(tuple(r + p.d for r in p.rows))
    blocks = layout.split(w)
    z = np.concatenate([blk[:r] for blk, r in zip(blocks, p.rows)])
    u = np.concatenate([blk[r:] for blk, r in zip(blocks, p.rows)])
    return z, u


class _HuberTerm(LocalTerm):
    """``x -> F*(M x)`` for a box-linear smoothed conjugate ``F*`` (Huber type)."""

    def __init__(self, conj, M, pad=0):
        self.conj, self.M, self.k, self.pad = conj, M, M.shape[1], pad

    def value(self, w):
        return conjugate_value(self.conj, self.M @ w[:self.k])

    def grad(self, w):
        g = self.M.T @ conjugate_grad(self.conj, self.M @ w[:self.k])
        return np.concatenate([g, np.zeros(self.pad)]) if self.pad else g


def _box_conjugate(shift, lam):
    return SmoothedConjugate(atom_linear(shift), atom_sq_l2(), lam, FeasibleSet("inf_ball"))


def _require_l1(atoms, what):
    bad = [f.name for f in atoms if f.name != "l1"]
    if bad:
        raise ProblemError(f"{what} needs l1 atoms, got {sorted(set(bad))}")


def double_dual_mse(p):
    """
    Dual of the regularized dual of the absolute-error consensus problem.

    The first dual has box-constrained multipliers; smoothing it with
    ``(lam/2)||z||^2`` and dualizing again gives a Huber loss of the
    residuals::

        min_x sum_i hub_lam(A_i x_i - b_i)   s.t.   W x = 0

    with ``hub_lam(w) = sum_j w_j^2/(2 lam)`` for ``|w_j| <= lam`` and
    ``|w_j| - lam/2`` otherwise.
    """
    _require_l1(p.atoms, "double_dual_mse")
    if not p.lam > 0:
        raise ProblemError("lam must be positive")
    if p.fset.kind != "full_space":
        raise ProblemError("double_dual_mse supports x in the full space only")
    terms = [_HuberTerm(_box_conjugate(b, p.lam), A) for A, b in zip(p.A, p.b)]
    layout = Layout.uniform(p.n, p.d)
    obj = SeparableObjective(layout, terms, L=_max_gram(p.A) / p.lam, mu=0.0, lower_bound=0.0)
    return AffineConstrainedProblem(obj, GossipLift(p.gossip, p.d), np.zeros(layout.size),
                                    kind="consensus_primal", meta={"source": p})


def double_dual_basis_pursuit(p):
    """
    Dual of the regularized dual of decentralized basis pursuit.

    Regularizing the basis-pursuit dual with ``(lam/2)||z||^2`` and
    dualizing again smooths the 1-norm into a Huber function while the
    coupling stays exact::

        min_{x,u} sum_i hub_lam(x_i)   s.t.   A x + W u = b

    Node ``i`` holds ``(x_i, u_i)``; ``u`` is the gossip slack that makes
    ``sum_i (A_i x_i - b_i) = 0`` local.
    """
    _require_l1(p.atoms, "double_dual_basis_pursuit")
    if not p.lam > 0:
        raise ProblemError("lam must be positive")
    if any(Q.kind != "full_space" for Q in p.sets):
        raise ProblemError("double_dual_basis_pursuit supports full-space variables only")
    K = LocalPlusGossip(p.A, p.gossip)
    terms = [_HuberTerm(_box_conjugate(np.zeros(d), p.lam), np.eye(d), pad=p.p) for d in p.dims]
    obj = SeparableObjective(K.in_layout, terms, L=1.0 / p.lam, mu=0.0, lower_bound=0.0)
    c = np.concatenate(p.b)
    return AffineConstrainedProblem(obj, K, c, kind="coupled_primal", meta={"source": p})


def split_coupled_primal(p, w):
    """Split stacked ``(x_i, u_i)`` blocks into the ``x`` and ``u`` stacks."""
    layout = Layout(tuple(d + p.p for d in p.dims))
    blocks = layout.split(w)
    x = np.concatenate([blk[:d] for blk, d in zip(blocks, p.dims)])
    u = np.concatenate([blk[d:] for blk, d in zip(blocks, p.dims)])
    return x, u


# --------------------------------------------------------------------------
# regularization

def default_gap_bound(objective, anchor, R):
    """
    Estimate of ``h(x*) - min h`` from first-order information at the anchor.

    The optimum lies within ``R`` of the anchor, so smoothness bounds
    ``h(x*)`` from above; the objective's known lower bound is used when
    available, otherwise the linearization over the same ball.
    """
    h = objective.value(anchor)
    gnorm = float(np.linalg.norm(objective.grad(anchor)))
    upper = h + gnorm * R + 0.5 * objective.L * R * R
    lower = objective.lower_bound if objective.lower_bound is not None else h - gnorm * R
    return max(upper - lower, 0.0)


def regularize(problem, eps, R, anchor=None, M_hat=None):
    """
    Add ``(mu/2)||u - anchor||^2`` with ``mu = eps / R^2``.

    The returned problem records ``mu``, the inner accuracy
    ``delta = eps^2 / (64 (L_P + mu) max(M_hat, 1))`` (a squared distance
    to the regularized optimum that keeps the objective gap below eps),
    and the inputs.
    """
    if not eps > 0:
        raise ProblemError(f"eps must be positive, got {eps}")
    if not R > 0:
        raise ProblemError(f"R must be positive, got {R}")
    anchor = np.zeros(problem.layout.size) if anchor is None else np.asarray(anchor, dtype=float)
    mu = eps / R ** 2
    if M_hat is None:
        M_hat = default_gap_bound(problem.objective, anchor, R)
    obj = RegularizedObjective(problem.objective, mu, anchor)
    delta = eps ** 2 / (64.0 * obj.L * max(M_hat, 1.0))
    meta = dict(problem.meta, reg_mu=mu, delta=delta, eps=eps, R=R, M_hat=M_hat,
                anchor=anchor, unregularized=problem)
    out = AffineConstrainedProblem(obj, problem.K, problem.c, kind=problem.kind, meta=meta,
                                   check_image=False)
    if "spectrum" in problem.__dict__:
        out.__dict__["spectrum"] = problem.spectrum
    return out


# --------------------------------------------------------------------------
# primal recovery

def recover_primal(p, z, multiplier=None):
    """
    Primal point from a dual solution.

    Coupled problems: ``x_i = grad F_i*(A_i' z_i)``, the maximizer in the
    dual function. Consensus problems: the primal variable is the
    multiplier of the dual constraint ``A' z + W u = 0``; pass the solver's
    constraint multiplier as `multiplier` (``x = -multiplier``). Without it
    the common ``x`` is fitted by least squares to the residuals
    ``grad F_i*(z_i)``.
    """
    if isinstance(p, CoupledProblem):
        conjs = _conjugates(p.atoms, p.regularizer, p.lam, p.sets)
        zs = Layout.uniform(p.n, p.p).split(z)
        return np.concatenate([conjugate_grad(c, A.T @ zi) for c, A, zi in zip(conjs, p.A, zs)])
    if isinstance(p, ConsensusProblem):
        if multiplier is not None:
            return -np.asarray(multiplier, dtype=float)
        conjs = _conjugates(p.atoms, p.regularizer, p.lam, [FULL_SPACE] * p.n)
        zs = Layout(p.rows).split(z)
        res = [conjugate_grad(c, zi) for c, zi in zip(conjs, zs)]
        A = np.vstack(p.A)
        rhs = np.concatenate([r + b for r, b in zip(res, p.b)])
        x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        return np.tile(x, p.n)
    raise TypeError(f"cannot recover a primal point for {type(p).__name__}")
