"""
Accelerated primal-dual solver for ``min P(u)`` subject to ``K u = c``.

Each iteration evaluates one gradient of P plus one product each with K
and K'. The dual variable ``z`` lives in the primal space and stays in
the range of K'; the multiplier ``y`` with ``z = K' y`` is tracked as well
(it costs no extra products) because for dual problems it is the primal
solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .problems import regularize
from .report import RunReport


class DivergenceError(RuntimeError):
    def __init__(self, iteration, message="iterates diverged"):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class ApapcParams:
    tau: float
    eta: float
    theta: float
    alpha: float

    def __post_init__(self):
        if not (0 < self.tau <= 1):
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not (self.eta > 0 and self.theta > 0):
            raise ValueError("eta and theta must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")

    def as_dict(self):
        return {"tau": self.tau, "eta": self.eta, "theta": self.theta, "alpha": self.alpha}


SCHEDULES = ("verbatim", "reciprocal")


def default_params(L_P, mu_P, lam_max_KtK, lam_min_plus_KtK, schedule="verbatim"):
    """
    Step sizes from the problem constants.

    ``tau = min(1, sqrt(kappa_K / kappa_P) / 2)``, ``eta = 1 / (4 tau L_P)``,
    ``theta = 1 / (eta lambda_max(K'K))``, ``alpha = mu_P``. The
    ``reciprocal`` schedule swaps the ratio inside the root.
    """
    for name, v in (("L_P", L_P), ("mu_P", mu_P), ("lam_max_KtK", lam_max_KtK),
                    ("lam_min_plus_KtK", lam_min_plus_KtK)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    kappa_P = L_P / mu_P
    kappa_K = lam_max_KtK / lam_min_plus_KtK
    if schedule == "verbatim":
        ratio = kappa_K / kappa_P
    elif schedule == "reciprocal":
        ratio = kappa_P / kappa_K
    else:
        raise ValueError(f"unknown schedule {schedule!r}")
    tau = min(1.0, 0.5 * math.sqrt(ratio))
    eta = 1.0 / (4.0 * tau * L_P)
    theta = 1.0 / (eta * lam_max_KtK)
    return ApapcParams(tau=tau, eta=eta, theta=theta, alpha=mu_P)


def params_for(problem, schedule="verbatim"):
    top, bottom = problem.spectrum
    return default_params(problem.L_P, problem.mu_P, top, bottom, schedule=schedule)


@dataclass
class ApapcState:
    u: np.ndarray
    u_f: np.ndarray
    z: np.ndarray
    y: np.ndarray
    k: int = 0
    u_g: np.ndarray = None
    u_half: np.ndarray = None
    grad_g: np.ndarray = None
    residual_half: np.ndarray = None

    @classmethod
    def initial(cls, problem, u0=None):
        n = problem.layout.size
        u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
        return cls(u=u, u_f=u.copy(), z=np.zeros(n), y=np.zeros(problem.c.size))


@dataclass
class Counters:
    grad: int = 0
    K: int = 0
    Kt: int = 0

    def as_dict(self):
        return {"grad_calls": self.grad, "K_applications": self.K, "Kt_applications": self.Kt,
                "operator_applications": self.K + self.Kt}


def step(state, problem, params, counters=None):
    """One iteration; returns a new state."""
    tau, eta, theta, alpha = params.tau, params.eta, params.theta, params.alpha
    u, u_f, z = state.u, state.u_f, state.z
    u_g = tau * u + (1.0 - tau) * u_f
    grad_g = problem.grad(u_g)
    shrink = 1.0 / (1.0 + eta * alpha)
    base = grad_g - alpha * u_g
    u_half = shrink * (u - eta * (base + z))
    r = problem.K.apply(u_half) - problem.c
    z_new = z + theta * problem.K.apply_t(r)
    u_new = shrink * (u - eta * (base + z_new))
    u_f_new = u_g + (2.0 * tau / (2.0 - tau)) * (u_new - u)
    if counters is not None:
        counters.grad += 1
        counters.K += 1
        counters.Kt += 1
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(z_new))):
        raise DivergenceError(state.k + 1, "non-finite iterate")
    return ApapcState(u=u_new, u_f=u_f_new, z=z_new, y=state.y + theta * r, k=state.k + 1,
                      u_g=u_g, u_half=u_half, grad_g=grad_g, residual_half=r)


def distance_certificate(grad_residual, feas_residual, L, mu, sigma_min):
    """
    Upper bound on ``||u - u*||`` for a ``mu``-strongly convex, L-smooth P.

    `grad_residual` is ``||grad P(u) + z||`` for some ``z`` in range(K') and
    `feas_residual` is ``||K u - c||``; ``sigma_min`` is the smallest
    positive singular value of K.
    """
    r, e = float(grad_residual), float(feas_residual)
    B = r + L * e / sigma_min
    C = r * e / sigma_min
    return (B + math.sqrt(B * B + 4.0 * mu * C)) / (2.0 * mu)


@dataclass
class StopRule:
    """
    Convergence test shared by the centralized and simulated runs.

    With a `reference` the run stops on ``||u - reference|| <= eps``.
    With `eps` alone, on the distance certificate. Targets below what
    double precision can certify end the run once the certificate has not
    halved for `patience` checks and sits within 100x of its rounding floor
    (reason ``surrogate_floor``). Otherwise on both surrogate residuals
    falling below ``tol_feas`` and ``tol_opt``.
    """

    eps: float = None
    reference: np.ndarray = None
    tol_feas: float = None
    tol_opt: float = None
    check_every: int = 1
    fixed: bool = False  # run exactly max_iter iterations
    patience: int = 50  # certificate checks without halving before the floor test
    reference_stops: bool = True  # False: the reference is only logged

    def distance(self, u):
        return None if self.reference is None else float(np.linalg.norm(u - self.reference))


def _scale(problem, u0):
    g = problem.grad(u0)
    return max(1.0, float(np.linalg.norm(problem.c)), float(np.linalg.norm(g)))


def sigma_max(problem):
    return math.sqrt(problem.spectrum[0])


def _certify(problem, u, z, sigma_min, monitor):
    g = problem.grad(u)
    e = float(np.linalg.norm(problem.K.apply(u) - problem.c))
    r = float(np.linalg.norm(g + z))
    monitor["certificates"] += 1
    # residual sizes that rounding alone can produce at this iterate
    unit = 64 * np.finfo(float).eps
    nu = float(np.linalg.norm(u))
    e_floor = unit * (sigma_max(problem) * nu + float(np.linalg.norm(problem.c)))
    r_floor = unit * (problem.L_P * nu + float(np.linalg.norm(g)) + float(np.linalg.norm(z)))
    monitor["floor"] = distance_certificate(r_floor, e_floor, problem.L_P, problem.mu_P, sigma_min)
    return distance_certificate(r, e, problem.L_P, problem.mu_P, sigma_min)


def solve(problem, params="auto", eps=None, max_iter=10_000, reference=None, u0=None,
          tol_feas=None, tol_opt=None, check_every=10, log_every=1, schedule="verbatim",
          reference_stops=True, state=None):
    """
    Run the solver until a stopping rule fires or `max_iter` is reached.

    Parameters
    ----------
    problem : AffineConstrainedProblem
    params : ApapcParams or "auto"
        "auto" derives the step sizes from the problem constants.
    eps : float, optional
        Target ``||u - u*||``. Checked against `reference` when given,
        otherwise against a certified upper bound evaluated every
        `check_every` iterations (monitoring products are counted apart
        from the algorithm's).
    reference : ndarray, optional
        Known solution, used for ``dist_to_ref`` logging and, unless
        `reference_stops` is False, for stopping.
    tol_feas, tol_opt : float, optional
        Surrogate tolerances on ``||K u_half - c||`` and
        ``||grad P(u_g) + z||`` used when `eps` is None. Default
        ``1e-9 * scale``.
    state : ApapcState, optional
        Resume from a previous run's ``report.final["state"]``; overrides `u0`.

    Returns
    -------
    u : ndarray
    report : RunReport
        ``report.final`` holds the last ``z`` and constraint multiplier ``y``.
    """
    if params == "auto":
        params = params_for(problem, schedule)
    if state is None:
        state = ApapcState.initial(problem, u0)
    scale = _scale(problem, state.u)
    rule = StopRule(eps=eps, reference=reference,
                    tol_feas=tol_feas if tol_feas is not None else 1e-9 * scale,
                    tol_opt=tol_opt if tol_opt is not None else 1e-9 * scale,
                    check_every=check_every, reference_stops=reference_stops)
    return run_loop(problem, params, state, rule, max_iter, log_every)


def run_loop(problem, params, state, rule, max_iter, log_every, stepper=None, rounds_per_iter=None):
    """Iterate `stepper` (default: centralized `step`) under `rule`; shared with the simulator."""
    counters = Counters()
    if stepper is None:
        def stepper(s):
            return step(s, problem, params, counters)
    if rounds_per_iter is None:
        rounds_per_iter = 2 * problem.K.gossip_terms
    sigma_min = math.sqrt(problem.spectrum[1])
    u_start = state.u
    blowup = 1e12 * (1.0 + float(np.linalg.norm(u_start)))
    report = RunReport(params=params.as_dict(), meta={"kind": problem.kind})
    monitor = {"certificates": 0, "best": math.inf, "stalled": 0}
    report.log(0, 0, problem.value(state.u), float(np.linalg.norm(problem.residual(state.u))),
               rule.distance(state.u))
    converged, reason = False, "max_iter"
    for it in range(1, max_iter + 1):
        state = stepper(state)
        if float(np.linalg.norm(state.u)) > blowup:
            raise DivergenceError(it, "iterate norm exceeded the divergence bound")
        feas = float(np.linalg.norm(state.residual_half))
        dist = rule.distance(state.u)
        if it % log_every == 0:
            report.log(it, it * rounds_per_iter, problem.value(state.u), feas, dist)
        if rule.fixed:
            done, why = False, "iterations"
        elif rule.reference is not None and rule.eps is not None and rule.reference_stops:
            done = dist <= rule.eps
            why = "reference"
        elif rule.eps is not None:
            done, why = False, "certificate"
            if it % rule.check_every == 0:
                cert = _certify(problem, state.u, state.z, sigma_min, monitor)
                done = cert <= rule.eps
                if cert < 0.5 * monitor["best"]:
                    monitor["best"], monitor["stalled"] = cert, 0
                else:
                    monitor["stalled"] += 1
                    monitor["best"] = min(monitor["best"], cert)
                # the certificate can stall at rounding level above eps; accept there
                if (not done and monitor["stalled"] >= rule.patience
                        and cert <= 100 * monitor["floor"]):
                    done, why = True, "surrogate_floor"
        else:
            opt = float(np.linalg.norm(state.grad_g + state.z))
            done = feas <= rule.tol_feas and opt <= rule.tol_opt
            why = "surrogate"
        if done:
            converged, reason = True, why
            break
    else:
        it = max_iter
        if rule.fixed:
            converged, reason = True, "iterations"
    if not report.records or report.records[-1]["iter"] != it:
        report.log(it, it * rounds_per_iter, problem.value(state.u),
                   float(np.linalg.norm(state.residual_half)), rule.distance(state.u))
    report.converged = converged
    report.reason = reason
    report.iterations = it
    report.comm_rounds = it * rounds_per_iter
    report.counters = dict(counters.as_dict(), certificates=monitor["certificates"])
    if monitor["certificates"]:
        report.meta["certified_distance"] = monitor["best"]
    report.final = {"z": state.z, "y": state.y, "u": state.u, "state": state}
    return state.u, report


def solve_nonstrongly(problem, eps, R, anchor=None, M_hat=None, tol=None, mode="centralized",
                      **kwargs):
    """
    Solve a merely convex problem through regularization.

    Adds ``(mu/2)||u - anchor||^2`` with ``mu = eps / R^2`` and solves the
    result to squared distance ``delta`` from its optimum, which bounds the
    objective gap of the returned point by `eps`. The distance is certified
    unless it lies below the rounding floor (see :class:`StopRule`). `tol`, when
    given, tightens the distance target further. ``mode="decentralized"``
    runs the iterations on the simulated network.
    """
    reg = regularize(problem, eps, R, anchor=anchor, M_hat=M_hat)
    target = math.sqrt(reg.meta["delta"])
    if tol is not None:
        target = min(target, tol)
    kwargs.setdefault("max_iter", 200_000)
    if mode == "centralized":
        u, report = solve(reg, eps=target, **kwargs)
    elif mode == "decentralized":
        from .netsim import run_decentralized
        u, report = run_decentralized(reg, eps=target, **kwargs)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    report.meta.update(reg_mu=reg.meta["reg_mu"], delta=reg.meta["delta"], target=target,
                       M_hat=reg.meta["M_hat"], eps=eps, R=R, mode=mode)
    report.final["problem"] = reg
    return u, report


def solve_coupled_dual(p, eps, R, tol=None, mode="centralized", **kwargs):
    """
    Dualize a coupled problem, regularize the dual around ``z = 0`` and solve.

    Returns
    -------
    z : ndarray
    x : ndarray
        Primal point recovered from ``z``.
    report : RunReport
    """
    from .problems import dualize_coupled, recover_primal

    dual = dualize_coupled(p)
    z, report = _solve_dual(dual, eps, R, tol, mode, **kwargs)
    x = recover_primal(p, z)
    report.final["x"] = x
    report.final["coupling_residual"] = float(np.linalg.norm(p.coupling_residual(x)))
    return z, x, report


def solve_consensus_dual(p, eps, R, tol=None, mode="centralized", **kwargs):
    """
    Dualize a consensus problem, regularize the ``(z, u)`` dual and solve.

    Returns
    -------
    z, u : ndarray
        The two parts of the dual solution.
    x : ndarray
        Primal point: the negated multiplier of ``A' z + W u = 0``.
    report : RunReport
    """
    from .problems import dualize_consensus, recover_primal, split_consensus_dual
    from .graphs import lift_apply

    dual = dualize_consensus(p)
    w, report = _solve_dual(dual, eps, R, tol, mode, **kwargs)
    z, u = split_consensus_dual(p, w)
    x = recover_primal(p, z, multiplier=report.final["y"])
    report.final["x"] = x
    report.final["consensus_residual"] = float(np.linalg.norm(lift_apply(p.gossip.lifted(p.d), x)))
    return z, u, x, report


def _solve_dual(dual, eps, R, tol, mode, **kwargs):
    return solve_nonstrongly(dual, eps, R, tol=tol, mode=mode, **kwargs)
