"""
Convex atoms, feasible sets, prox and prox-value operators.

All atoms are separable sums of a scalar function over coordinates unless
``separable`` is False (the set indicators). ``prox`` dispatches to closed
forms where they exist and falls back to coordinatewise bisection on the
subgradient for separable atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ATOM_NAMES = ("l1", "sq_l2", "huber", "linear", "zero", "ind_simplex", "ind_inf_ball")


class UnsupportedAtomError(ValueError):
    pass


# --------------------------------------------------------------------------
# feasible sets

@dataclass(frozen=True)
class FeasibleSet:
    """
    A closed convex set with an exact Euclidean projection.

    ``kind`` is ``full_space``, ``simplex`` (unit simplex) or
    ``inf_ball`` (sup-norm ball around ``center`` with ``radius``).
    """

    kind: str = "full_space"
    dimension: Optional[int] = None
    center: Optional[np.ndarray] = field(default=None, compare=False)
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("full_space", "simplex", "inf_ball"):
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.kind == "inf_ball" and not self.radius > 0:
            raise ValueError("inf_ball radius must be positive")

    def _center(self, x):
        if self.center is None:
            return np.zeros_like(x)
        return np.broadcast_to(np.asarray(self.center, dtype=float), x.shape)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "full_space":
            return x.copy()
        if self.kind == "inf_ball":
            c = self._center(x)
            return np.clip(x, c - self.radius, c + self.radius)
        return project_simplex(x)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        if self.kind == "full_space":
            return bool(np.all(np.isfinite(x)))
        if self.kind == "inf_ball":
            return bool(np.max(np.abs(x - self._center(x)), initial=0.0) <= self.radius + tol)
        return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol * max(1, x.size))

    def bounds(self, x):
        """Coordinatewise box ``(lo, hi)`` when the set is a box, else None."""
        if self.kind == "full_space":
            return np.full(x.shape, -np.inf), np.full(x.shape, np.inf)
        if self.kind == "inf_ball":
            c = self._center(x)
            return c - self.radius, c + self.radius
        return None

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "inf_ball":
            out["radius"] = self.radius
            if self.center is not None:
                out["center"] = np.asarray(self.center, dtype=float).tolist()
        return out

    @classmethod
    def from_dict(cls, data, dimension=None):
        if isinstance(data, str):
            data = {"kind": data}
        center = data.get("center")
        return cls(
            kind=data.get("kind", "full_space"),
            dimension=dimension,
            center=None if center is None else np.asarray(center, dtype=float),
            radius=float(data.get("radius", 1.0)),
        )


FULL_SPACE = FeasibleSet("full_space")


def project_simplex(x):
    """Euclidean projection onto the unit simplex (sort and threshold)."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, x.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(x - theta, 0.0)


# --------------------------------------------------------------------------
# atoms

@dataclass(frozen=True)
class ConvexAtom:
    """
    A convex function descriptor.

    ``value`` and ``subgradient`` act on whole vectors. For separable atoms
    ``elementwise`` maps an array whose last axis is the coordinate axis to
    per-coordinate values (so batches of points evaluate in one call), and
    ``scalar_prox(x, lam)``, when present, is the unconstrained prox applied
    coordinatewise.
    """

    name: str
    value: Callable = field(compare=False)
    subgradient: Callable = field(compare=False)
    strong_convexity: float = 0.0
    smoothness: float = np.inf
    separable: bool = True
    dimension: Optional[int] = None
    scalar_prox: Optional[Callable] = field(default=None, compare=False)
    elementwise: Optional[Callable] = field(default=None, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def huber_scalar(t):
    a = np.abs(t)
    return np.where(a < 1.0, 0.5 * t * t, a - 0.5)


def atom_l1():
    return ConvexAtom(
        name="l1",
        value=lambda x: float(np.sum(np.abs(x))),
        subgradient=lambda x: np.sign(x).astype(float),
        scalar_prox=soft_threshold,
        elementwise=np.abs,
    )


def atom_sq_l2():
    return ConvexAtom(
        name="sq_l2",
        value=lambda x: 0.5 * float(np.dot(np.ravel(x), np.ravel(x))),
        subgradient=lambda x: np.array(x, dtype=float),
        strong_convexity=1.0,
        smoothness=1.0,
        scalar_prox=lambda x, lam: x / (1.0 + lam),
        elementwise=lambda x: 0.5 * np.square(x),
    )


def _huber_prox(x, lam):
    inside = np.abs(x) <= 1.0 + lam
    return np.where(inside, x / (1.0 + lam), x - lam * np.sign(x))


def atom_huber():
    """Sum of ``g(t) = t^2/2`` for ``|t| < 1`` and ``|t| - 1/2`` otherwise."""
    return ConvexAtom(
        name="huber",
        value=lambda x: float(np.sum(huber_scalar(np.asarray(x, dtype=float)))),
        subgradient=lambda x: np.clip(np.asarray(x, dtype=float), -1.0, 1.0),
        smoothness=1.0,
        scalar_prox=_huber_prox,
        elementwise=huber_scalar,
    )


def atom_linear(b):
    b = np.asarray(b, dtype=float)
    return ConvexAtom(
        name="linear",
        value=lambda x: float(np.dot(np.ravel(b), np.ravel(x))),
        subgradient=lambda x: np.broadcast_to(b, np.shape(x)).astype(float),
        smoothness=0.0,
        dimension=b.size,
        scalar_prox=lambda x, lam: x - lam * b,
        elementwise=lambda x: b * x,
        params={"b": b},
    )


def atom_zero():
    return ConvexAtom(
        name="zero",
        value=lambda x: 0.0,
        subgradient=lambda x: np.zeros(np.shape(x)),
        smoothness=0.0,
        scalar_prox=lambda x, lam: np.array(x, dtype=float),
        elementwise=np.zeros_like,
    )


def atom_indicator(fset):
    """Indicator of a feasible set: 0 inside, +inf outside."""
    name = {"simplex": "ind_simplex", "inf_ball": "ind_inf_ball", "full_space": "zero"}[fset.kind]
    return ConvexAtom(
        name=name,
        value=lambda x: 0.0 if fset.contains(x, tol=1e-12) else np.inf,
        subgradient=lambda x: np.zeros(np.shape(x)),
        smoothness=0.0 if fset.kind == "full_space" else np.inf,
        separable=fset.kind != "simplex",
        params={"set": fset},
    )


def atom_from_name(name, **kwargs):
    """Build an atom from its config string."""
    if name == "l1":
        return atom_l1()
    if name == "sq_l2":
        return atom_sq_l2()
    if name == "huber":
        return atom_huber()
    if name == "zero":
        return atom_zero()
    if name == "linear":
        return atom_linear(kwargs["b"])
    if name == "ind_simplex":
        return atom_indicator(FeasibleSet("simplex"))
    if name == "ind_inf_ball":
        return atom_indicator(FeasibleSet("inf_ball", center=kwargs.get("center"),
                                          radius=kwargs.get("radius", 1.0)))
    raise UnsupportedAtomError(f"unknown atom {name!r}; expected one of {ATOM_NAMES}")


# --------------------------------------------------------------------------
# prox

def _bisection_prox(atom, lam, x, lo=None, hi=None, iters=200):
    """Root of ``lam * g(y) + y - x`` for a separable atom, coordinatewise."""
    x = np.asarray(x, dtype=float)

    def h(y):
        return lam * atom.subgradient(y) + y - x

    width = np.ones_like(x)
    left = x - width
    right = x + width
    # expand the bracket until the monotone map changes sign
    for _ in range(200):
        bad = h(left) > 0
        if not bad.any():
            break
        width = np.where(bad, 2 * width, width)
        left = np.where(bad, x - width, left)
    for _ in range(200):
        bad = h(right) < 0
        if not bad.any():
            break
        width = np.where(bad, 2 * width, width)
        right = np.where(bad, x + width, right)
    for _ in range(iters):
        mid = 0.5 * (left + right)
        pos = h(mid) > 0
        right = np.where(pos, mid, right)
        left = np.where(pos, left, mid)
        if np.all(right - left <= 1e-15 * (1 + np.abs(mid))):
            break
    y = 0.5 * (left + right)
    if lo is not None:
        y = np.clip(y, lo, hi)
    return y


def prox(atom, lam, fset, x, method="auto"):
    """
    ``argmin_{y in fset} lam * atom(y) + 0.5 * ||y - x||^2``.

    Parameters
    ----------
    method : {"auto", "bisection"}
        ``bisection`` forces the generic route (separable atoms only).
    """
    if not lam > 0:
        raise ValueError(f"prox parameter must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    fset = fset or FULL_SPACE
    name = atom.name

    if method == "bisection":
        if not atom.separable:
            raise UnsupportedAtomError(f"bisection prox needs a separable atom, got {name}")
        box = fset.bounds(x)
        if box is None:
            raise UnsupportedAtomError(f"bisection prox of {name} over {fset.kind} is unsupported")
        return _bisection_prox(atom, lam, x, *box)

    # quadratic-in-y atoms: the prox is a projection of a shifted point
    if name == "zero":
        return fset.project(x)
    if name == "sq_l2":
        return fset.project(x / (1.0 + lam))
    if name == "linear":
        return fset.project(x - lam * atom.params["b"])
    if name in ("ind_simplex", "ind_inf_ball"):
        if fset.kind == "full_space":
            return atom.params["set"].project(x)
        raise UnsupportedAtomError(f"prox of {name} restricted to {fset.kind} is unsupported")

    if fset.kind == "simplex":
        if name == "l1":
            # ||y||_1 is constant on the simplex
            return project_simplex(x)
        raise UnsupportedAtomError(f"prox of {name} over the simplex has no closed form")

    if not atom.separable:
        raise UnsupportedAtomError(f"non-separable atom {name} has no prox closed form")
    lo, hi = fset.bounds(x)
    if atom.scalar_prox is not None:
        y = atom.scalar_prox(x, lam)
    else:
        y = _bisection_prox(atom, lam, x)
    # a 1-D convex problem restricted to an interval is solved by clipping
    return np.clip(y, lo, hi)


def proxv(atom, lam, fset, x, method="auto"):
    """Optimal value of the prox problem, evaluated at the prox output."""
    x = np.asarray(x, dtype=float)
    y = prox(atom, lam, fset, x, method=method)
    return prox_objective(atom, lam, x, y)


def prox_objective(atom, lam, x, y):
    r = np.ravel(y - x)
    return lam * atom.value(y) + 0.5 * float(r @ r)
