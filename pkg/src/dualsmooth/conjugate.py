"""
Conjugates smoothed by a strongly convex regularizer.

For a base atom ``phi`` and a regularizer ``psi`` weighted by ``gamma``::

    phi*_{gamma psi, S}(v) = max_{u in S} <u, v> - phi(u) - gamma * psi(u)

With ``psi = 0.5 ||.||^2`` the maximizer is ``prox_{phi/gamma}^S(v/gamma)``
and it is also the gradient, which is ``1/gamma``-Lipschitz.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atoms import FULL_SPACE, ConvexAtom, FeasibleSet, UnsupportedAtomError, prox


class UnsupportedConjugateError(UnsupportedAtomError):
    pass


@dataclass(frozen=True)
class SmoothedConjugate:
    base: ConvexAtom
    regularizer: ConvexAtom
    gamma: float
    fset: FeasibleSet = field(default=FULL_SPACE)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.regularizer.strong_convexity > 0:
            raise ValueError(f"regularizer {self.regularizer.name} is not strongly convex")

    @property
    def smoothness_bound(self):
        return 1.0 / (self.gamma * self.regularizer.strong_convexity)

    @property
    def family(self):
        """Closed-form family tag, or ``"prox"`` for the generic route."""
        if self.regularizer.name != "sq_l2":
            raise UnsupportedConjugateError(
                f"no closed form for regularizer {self.regularizer.name!r}; "
                "only sq_l2 smoothing is available outside the grid oracle")
        if self.base.name == "l1" and self.fset.kind == "full_space":
            return "l1"
        if self.base.name == "linear" and self.fset.kind == "inf_ball":
            return "linear_box"
        if self.base.name == "zero":
            return "projection"
        return "prox"

    def __call__(self, v):
        return conjugate_value(self, v)

    def grad(self, v):
        return conjugate_grad(self, v)


def _linear_box_parts(c, v):
    b = c.base.params["b"]
    lo, hi = c.fset.bounds(np.asarray(v, dtype=float))
    return v - b, lo, hi


def conjugate_value(c, v):
    """Value of the smoothed conjugate at `v`."""
    v = np.asarray(v, dtype=float)
    g = c.gamma
    fam = c.family
    if fam == "l1":
        t = np.maximum(np.abs(v) - 1.0, 0.0)
        return float(t @ t) / (2.0 * g) if t.ndim else float(t * t) / (2.0 * g)
    if fam == "linear_box" and c.fset.center is None and c.fset.radius == 1.0:
        w = np.ravel(v - c.base.params["b"])
        excess = np.maximum(np.abs(w) / g - 1.0, 0.0)
        return float(w @ w) / (2.0 * g) - 0.5 * g * float(excess @ excess)
    u = conjugate_grad(c, v)
    return _inner_objective(c, u, v)


def conjugate_grad(c, v):
    """Maximizer of the inner problem, which is the gradient of the conjugate."""
    v = np.asarray(v, dtype=float)
    g = c.gamma
    fam = c.family
    if fam == "l1":
        return np.sign(v) * np.maximum(np.abs(v) - 1.0, 0.0) / g
    if fam == "linear_box":
        w, lo, hi = _linear_box_parts(c, v)
        return np.clip(w / g, lo, hi)
    if fam == "projection":
        return c.fset.project(v / g)
    try:
        return prox(c.base, 1.0 / g, c.fset, v / g)
    except UnsupportedAtomError as exc:
        raise UnsupportedConjugateError(
            f"no closed form for the conjugate of {c.base.name} over {c.fset.kind}: {exc}") from exc


def _inner_objective(c, u, v):
    return float(np.ravel(u) @ np.ravel(v)) - c.base.value(u) - c.gamma * c.regularizer.value(u)


# --------------------------------------------------------------------------
# brute-force oracle

def _grid(radius, step):
    k = int(np.ceil(radius / step))
    return np.arange(-k, k + 1) * step


def brute_force_conjugate(base, regularizer, gamma, fset, v, grid_radius, grid_step,
                          full_grid=False):
    """
    Maximize ``<u, v> - base(u) - gamma * regularizer(u)`` over a grid.

    Separable atoms over a box (or the full space) are maximized one
    coordinate at a time, in any dimension. With ``full_grid=True`` the
    tensor grid is searched instead, which is limited to dimension 2.

    Returns
    -------
    value : float
    argmax : ndarray
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    fset = fset or FULL_SPACE
    mu = regularizer.strong_convexity
    if not mu > 0:
        raise ValueError("oracle needs a strongly convex regularizer")
    shift = np.zeros_like(v)
    if base.name == "linear":
        shift = np.broadcast_to(base.params["b"], v.shape)
    needed = np.max(np.abs(v - shift)) / (gamma * mu) + 1.0
    if fset.kind == "inf_ball":
        c = fset._center(v)
        needed = min(needed, float(np.max(np.abs(c))) + fset.radius + 1.0)
    if not grid_radius > needed:
        raise ValueError(f"grid radius {grid_radius} must exceed {needed:.6g}")
    if base.elementwise is None or regularizer.elementwise is None:
        raise ValueError("oracle needs elementwise atoms")
    t = _grid(grid_radius, grid_step)
    box = fset.bounds(v)
    if fset.kind == "simplex":
        raise ValueError("oracle does not grid the simplex")
    lo, hi = box

    def objective(points):
        # points: (..., dim)
        return (points * v).sum(-1) - base.elementwise(points).sum(-1) \
            - gamma * regularizer.elementwise(points).sum(-1)

    if not full_grid:
        U = np.repeat(t[:, None], v.size, axis=1)
        vals = U * v - base.elementwise(U) - gamma * regularizer.elementwise(U)
        vals = np.where((U >= lo - 1e-15) & (U <= hi + 1e-15), vals, -np.inf)
        idx = np.argmax(vals, axis=0)
        cols = np.arange(v.size)
        return float(vals[idx, cols].sum()), t[idx]

    if v.size > 2:
        raise ValueError("full grid search is limited to dimension 2")
    if v.size == 1:
        P = t[:, None]
        vals = np.where((P[:, 0] >= lo[0]) & (P[:, 0] <= hi[0]), objective(P), -np.inf)
        k = int(np.argmax(vals))
        return float(vals[k]), P[k].copy()
    # elementwise atoms: the objective at (t_a, t_b) is a row term plus a column term
    U = np.repeat(t[:, None], 2, axis=1)
    G = U * v - base.elementwise(U) - gamma * regularizer.elementwise(U)
    inside = [(t >= lo[j]) & (t <= hi[j]) for j in range(2)]
    row_t, row_g = t[inside[0]], G[inside[0], 0]
    col_t, col_g = t[inside[1]], G[inside[1], 1]
    best, arg = -np.inf, None
    for start in range(0, row_t.size, 256):
        vals = row_g[start:start + 256, None] + col_g[None, :]
        a, b = np.unravel_index(int(np.argmax(vals)), vals.shape)
        if vals[a, b] > best:
            best, arg = float(vals[a, b]), np.array([row_t[start + a], col_t[b]])
    return best, arg
