"""Convex QP solver for the SVQR duals.

``solve_qp`` returns a point together with the equality and inequality
multipliers and a KKT residual recomputed from scratch. The inequality is
handled by first solving with it held as an equality and checking the sign
of its multiplier; if the multiplier comes out negative the inequality is
slack at the optimum and the problem is re-solved without it.
"""

from __future__ import annotations

import numpy as np

from .active_set import solve_active_set
from .problem import (DenseQ, QpError, QpInfeasibleError, QpNonConvergenceError,
                      QpProblem, QpSolution, SignedGram, kkt_residual)
from .smo import smo

__all__ = [
    "DenseQ", "QpError", "QpInfeasibleError", "QpNonConvergenceError", "QpProblem",
    "QpSolution", "SignedGram", "kkt_residual", "solve_qp",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100000


def _parallel(u, v, rtol=1e-12):
    return abs(u[0] * v[1] - u[1] * v[0]) <= rtol * np.hypot(*u) * np.hypot(*v)


def _two_line_split(a, w):
    """Split indices by which of (at most) two lines ``(a_i, w_i)`` lies on.

    Returns ``(lines, members)`` or ``None`` when the pairs span more than
    two directions or some pair is zero.
    """
    pairs = np.column_stack([a, w])
    if np.any(np.all(pairs == 0, axis=1)):
        return None
    lines, members = [], []
    for i, p in enumerate(pairs):
        for k, v in enumerate(lines):
            if _parallel(p, v):
                members[k].append(i)
                break
        else:
            if len(lines) == 2:
                return None
            lines.append(p)
            members.append([i])
    return lines, members


class _Plan:
    """Scaled, grouped view of a problem that the SMO path can handle."""

    def __init__(self, problem, perm, t, groups, lines):
        self.problem = problem
        self.perm = perm
        self.inv = np.argsort(perm)
        self.t = t
        self.groups = groups
        self.lines = lines
        op = problem.operator
        self.op = op if perm is None else op.permuted(perm)

    def take(self, x):
        return x if self.perm is None else x[self.perm]

    def restore(self, x):
        return x if self.perm is None else x[self.inv]


def _plan_single(problem):
    a = problem.eq_coeffs
    if np.any(a == 0):
        return None
    return _Plan(problem, None, a.copy(), [slice(0, problem.size)], None)


def _plan_double(problem):
    split = _two_line_split(problem.eq_coeffs, problem.ineq_coeffs)
    if split is None or len(split[0]) != 2:
        return None
    lines, members = split
    perm = np.array(members[0] + members[1])
    if np.array_equal(perm, np.arange(problem.size)):
        perm = None
    pairs = np.column_stack([problem.eq_coeffs, problem.ineq_coeffs])
    if perm is not None:
        pairs = pairs[perm]
    n0 = len(members[0])
    t = np.empty(problem.size)
    for g, v in ((slice(0, n0), lines[0]), (slice(n0, problem.size), lines[1])):
        t[g] = pairs[g] @ v / (v @ v)
    return _Plan(problem, perm, t, [slice(0, n0), slice(n0, problem.size)], lines)


def _run(plan, sums, tol, max_iter):
    p = plan.problem
    res = smo(plan.op, plan.take(p.c), plan.take(p.lower), plan.take(p.upper),
              plan.t, plan.groups, sums, tol=tol, max_iter=max_iter)
    return res, plan.restore(res.z)


def _finish(problem, z, mu_eq, mu_in, iterations, **diag):
    res = kkt_residual(problem, z, mu_eq, mu_in)
    return QpSolution(z=z, eq_multiplier=float(mu_eq), ineq_multiplier=float(mu_in),
                      objective=problem.objective(z), kkt_residual=res,
                      iterations=int(iterations), diagnostics=diag)


def _solve_smo(problem, tol, max_iter):
    single = _plan_single(problem)
    used = 0
    candidate = None

    if problem.has_ineq:
        split = _two_line_split(problem.eq_coeffs, problem.ineq_coeffs)
        if split is not None and len(split[0]) == 1:
            # inequality parallel to the equality: it is either redundant or infeasible
            v = split[0][0]
            if v[0] == 0:
                return None
            # every (a_i, w_i) lies on v, so w = kappa * a
            kappa = v[1] / v[0]
            if kappa * problem.eq_rhs > problem.ineq_rhs + 1e-12 * (1 + abs(problem.ineq_rhs)):
                raise QpInfeasibleError("inequality contradicts the equality constraint")
        else:
            plan = _plan_double(problem)
            if plan is None:
                return None
            (la, lb) = plan.lines
            M = np.array([[la[0], lb[0]], [la[1], lb[1]]])
            sums = np.linalg.solve(M, [problem.eq_rhs, problem.ineq_rhs])
            try:
                res, z = _run(plan, sums, tol, max_iter)
            except QpInfeasibleError:
                res = None
            if res is not None:
                used += res.iterations
                # rho_g = mu_eq * a_line - mu_in * w_line
                R = np.array([[la[0], -la[1]], [lb[0], -lb[1]]])
                mu_eq, mu_in = np.linalg.solve(R, res.rho)
                candidate = (z, mu_eq, mu_in)
                if mu_in >= -tol:
                    return _finish(problem, z, mu_eq, max(mu_in, 0.0), used,
                                   phase="ineq-active", max_violation=res.max_violation)

    if single is None:
        return None
    res, z = _run(single, [problem.eq_rhs], tol, max(max_iter - used, 0))
    used += res.iterations
    mu_eq = float(res.rho[0])
    if problem.has_ineq:
        slack = problem.ineq_rhs - problem.ineq_coeffs @ z
        if slack < -1e-10 * (1.0 + abs(problem.ineq_rhs)):
            if candidate is None:
                raise QpInfeasibleError("no point satisfies both constraints")
            z, mu_eq, mu_in = candidate
            return _finish(problem, z, mu_eq, max(mu_in, 0.0), used, phase="ineq-active")
    return _finish(problem, z, mu_eq, 0.0, used, phase="ineq-inactive",
                   max_violation=res.max_violation)


def solve_qp(problem: QpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
             method: str = "auto") -> QpSolution:
    """Solve ``problem`` and certify the result.

    ``method`` is ``"auto"`` (SMO whenever the constraint structure allows it,
    otherwise the dense active-set method), ``"smo"`` or ``"active_set"``.
    Raises :class:`QpNonConvergenceError` if the certificate cannot be brought
    below ``tol`` within ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method not in ("auto", "smo", "active_set"):
        raise ValueError(f"unknown method {method!r}")

    sol = None
    if method in ("auto", "smo"):
        inner_tol = tol
        for _ in range(4):
            sol = _solve_smo(problem, inner_tol, max_iter)
            if sol is None or sol.kkt_residual <= tol:
                break
            inner_tol /= 10.0
        if sol is None and method == "smo":
            raise ValueError("constraint structure is not supported by the SMO path")
    if sol is None:
        z, mu_eq, mu_in, it = solve_active_set(problem, max_iter)
        sol = _finish(problem, z, mu_eq, mu_in, it, phase="active-set")
    if sol.kkt_residual > tol:
        raise QpNonConvergenceError(
            f"KKT residual {sol.kkt_residual:.3e} exceeds tolerance {tol:.1e}",
            z=sol.z, residual=sol.kkt_residual, iterations=sol.iterations)
    return sol
