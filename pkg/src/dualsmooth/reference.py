"""Reference solutions: a direct KKT solve for quadratics and long solver runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import QuadraticObjective, RegularizedObjective

METHODS = ("kkt_direct", "long_run")


class UnsupportedReferenceError(ValueError):
    pass


@dataclass
class ReferenceSolution:
    method: str
    point: np.ndarray
    objective: float
    tolerance: float
    multiplier: np.ndarray = None
    feas_residual: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "method": self.method,
            "point": [float(t) for t in self.point],
            "objective": float(self.objective),
            "tolerance": float(self.tolerance),
            "feas_residual": float(self.feas_residual),
        }


def _quadratic_parts(objective):
    """``(H, g)`` with ``grad = H u + g``, or None for other objectives."""
    if isinstance(objective, QuadraticObjective):
        return objective.H, objective.g
    if isinstance(objective, RegularizedObjective):
        inner = _quadratic_parts(objective.base)
        if inner is None:
            return None
        H, g = inner
        return H + objective.reg * np.eye(H.shape[0]), g - objective.reg * objective.anchor
    return None


def kkt_direct(problem):
    """
    Solve ``H u + g + K' y = 0``, ``K u = c`` as one linear system.

    Only for quadratic objectives. The least-squares solve handles a
    rank-deficient K; the minimum-norm multiplier is returned.
    """
    parts = _quadratic_parts(problem.objective)
    if parts is None:
        raise UnsupportedReferenceError("kkt_direct needs a quadratic objective")
    H, g = parts
    K = problem.K.to_dense()
    m, n = K.shape
    M = np.block([[H, K.T], [K, np.zeros((m, m))]])
    rhs = np.concatenate([-g, problem.c])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    u, y = sol[:n], sol[n:]
    res = float(np.linalg.norm(M @ sol - rhs))
    return ReferenceSolution("kkt_direct", u, problem.value(u), res, multiplier=y,
                             feas_residual=float(np.linalg.norm(K @ u - problem.c)),
                             meta={"kkt_residual": res})


def long_run(problem, budget, tol, u0=None, **kwargs):
    """
    High-accuracy solver run on a strongly convex problem.

    Runs to the certified target ``1e-3 * tol`` within ``100 * budget``
    iterations, then continues for as many iterations again. Targets below
    the rounding floor stop on the floor rule. The returned tolerance is
    the larger of the target and the displacement over the continuation,
    which bounds the error of a linearly converging run once it has
    settled; the certified distance is kept in ``meta``.
    """
    from .apapc import ApapcParams, solve

    target = 1e-3 * tol
    max_iter = 100 * int(budget)
    check_every = kwargs.pop("check_every", 10)
    log_every = kwargs.pop("log_every", 1000)
    u, report = solve(problem, eps=target, max_iter=max_iter, u0=u0, check_every=check_every,
                      log_every=log_every, **kwargs)
    if not report.converged:
        raise RuntimeError(f"long run did not reach {target:g} within {max_iter} iterations")
    extra = max(report.iterations, 1000)
    u2, _ = solve(problem, params=ApapcParams(**report.params), max_iter=extra, state=report.final["state"],
                  tol_feas=0.0, tol_opt=0.0, log_every=extra)
    moved = float(np.linalg.norm(u2 - u))
    feas = float(np.linalg.norm(problem.residual(u2)))
    meta = {"iterations": report.iterations + extra, "report": report, "displacement": moved,
            "certified_distance": report.meta.get("certified_distance")}
    return ReferenceSolution("long_run", u2, problem.value(u2), max(target, moved),
                             multiplier=report.final["y"], feas_residual=feas, meta=meta)


def compute_reference(problem, method, budget=None, tol=None, u0=None):
    if method == "kkt_direct":
        return kkt_direct(problem)
    if method == "long_run":
        if budget is None or tol is None:
            raise ValueError("long_run needs the experiment budget and tolerance")
        return long_run(problem, budget, tol, u0=u0)
    raise ValueError(f"unknown reference method {method!r}; expected one of {METHODS}")
