"""Dense primal active-set method for small general problems.

Used when the constraint coefficients do not have the block structure the
SMO path needs. Cost is cubic in the problem size per iteration, so this is
meant for problems with at most a few hundred variables.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .problem import QpError, QpInfeasibleError, QpNonConvergenceError, QpProblem


def _constraint_rows(problem: QpProblem):
    m = problem.size
    rows, rhs, kind = [], [], []
    eye = np.eye(m)
    for i in range(m):
        if np.isfinite(problem.upper[i]):
            rows.append(eye[i])
            rhs.append(problem.upper[i])
            kind.append(("upper", i))
        if np.isfinite(problem.lower[i]):
            rows.append(-eye[i])
            rhs.append(-problem.lower[i])
            kind.append(("lower", i))
    if problem.has_ineq:
        rows.append(problem.ineq_coeffs)
        rhs.append(problem.ineq_rhs)
        kind.append(("ineq", -1))
    return np.array(rows).reshape(-1, m), np.array(rhs, dtype=float), kind


def feasible_point(problem: QpProblem) -> np.ndarray:
    z = np.zeros(problem.size)
    ok = (np.all(problem.lower <= 0) and np.all(problem.upper >= 0)
          and abs(problem.eq_rhs) <= 1e-14
          and (not problem.has_ineq or problem.ineq_rhs >= 0))
    if ok:
        return z
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in zip(problem.lower, problem.upper)]
    res = linprog(np.zeros(problem.size),
                  A_ub=None if not problem.has_ineq else problem.ineq_coeffs[None, :],
                  b_ub=None if not problem.has_ineq else [problem.ineq_rhs],
                  A_eq=problem.eq_coeffs[None, :], b_eq=[problem.eq_rhs],
                  bounds=bounds, method="highs")
    if res.status == 2:
        raise QpInfeasibleError("the feasible set is empty")
    if not res.success:
        raise QpError(f"could not find a feasible starting point: {res.message}")
    return np.clip(res.x, problem.lower, problem.upper)


def _independent(A: np.ndarray, row: np.ndarray) -> bool:
    if A.shape[0] == 0:
        return bool(np.any(row != 0))
    stacked = np.vstack([A, row])
    return np.linalg.matrix_rank(stacked) > np.linalg.matrix_rank(A)


def solve_active_set(problem: QpProblem, max_iter: int = 100000):
    """Return ``(z, mu_eq, mu_ineq, iterations)`` for ``problem``."""
    Q = problem.operator.toarray()
    c = problem.c
    m = problem.size
    G, h, kind = _constraint_rows(problem)
    # an all-zero equality row constrains nothing (feasible_point checks its rhs)
    a_eq = problem.eq_coeffs[None, :] if np.any(problem.eq_coeffs) else np.zeros((0, m))
    n_eq = a_eq.shape[0]
    z = feasible_point(problem)
    scale = 1.0 + float(np.max(np.abs(h), initial=0.0))

    working: list[int] = []
    for k in range(G.shape[0]):
        if abs(G[k] @ z - h[k]) <= 1e-12 * scale:
            A = np.vstack([a_eq] + [G[w][None, :] for w in working]).reshape(-1, m)
            if _independent(A, G[k]):
                working.append(k)

    for it in range(max_iter + 1):
        g = Q @ z + c
        A = np.vstack([a_eq] + [G[w][None, :] for w in working]).reshape(-1, m)
        Z = null_space(A) if A.shape[0] < m else np.zeros((m, 0))
        unbounded = False
        if Z.shape[1] == 0:
            p = np.zeros(m)
        else:
            H = Z.T @ Q @ Z
            r = Z.T @ g
            lam, V = np.linalg.eigh(0.5 * (H + H.T))
            pos = lam > 1e-10 * max(1.0, float(np.max(np.abs(lam))))
            rv = V.T @ r
            flat = rv[~pos]
            if flat.size and np.linalg.norm(flat) > 1e-12 * (1.0 + np.linalg.norm(g)):
                p = -Z @ (V[:, ~pos] @ flat)
                unbounded = True
            else:
                p = -Z @ (V[:, pos] @ (rv[pos] / lam[pos]))

        if np.max(np.abs(p)) <= 1e-13 * (1.0 + np.max(np.abs(z))):
            lam_all = np.linalg.lstsq(A.T, -g, rcond=None)[0]
            lam_w = lam_all[n_eq:]
            if not working or lam_w.min() >= -1e-12 * (1.0 + np.max(np.abs(g))):
                mu_eq = -float(lam_all[0]) if n_eq else 0.0
                mu_in = 0.0
                for w, lw in zip(working, lam_w):
                    if kind[w][0] == "ineq":
                        mu_in = max(float(lw), 0.0)
                return z, mu_eq, mu_in, it
            working.pop(int(np.argmin(lam_w)))
            continue

        if it == max_iter:
            break
        others = [k for k in range(G.shape[0]) if k not in working]
        step, block = (np.inf if unbounded else 1.0), None
        for k in others:
            gp = G[k] @ p
            if gp > 1e-14 * (1.0 + np.abs(G[k]).sum()):
                ratio = max((h[k] - G[k] @ z) / gp, 0.0)
                if ratio < step:
                    step, block = ratio, k
        if not np.isfinite(step):
            raise QpError("objective is unbounded below on the feasible set")
        z = z + step * p
        if block is not None:
            working.append(block)
            name, i = kind[block]
            if name == "upper":
                z[i] = problem.upper[i]
            elif name == "lower":
                z[i] = problem.lower[i]

    raise QpNonConvergenceError(
        f"active-set method did not terminate within {max_iter} iterations",
        z=z, iterations=max_iter)
