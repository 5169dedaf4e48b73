"""Pairwise decomposition (SMO) for box QPs with block sum constraints.

Variables are scaled as ``u_i = t_i * z_i`` and split into contiguous groups
whose scaled sums are held fixed::

    sum_{i in g} u_i = S_g        for every group g

A single equality constraint is one group with ``t = eq_coeffs``. An equality
plus an active inequality whose coefficient pairs fall on two lines (as in the
nu-dual, where the alpha block and the beta block each have their own pair)
become two groups. Each step moves one pair inside a group, chosen by the
second-order working-set rule of Fan, Chen and Lin (2005).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import QpInfeasibleError, QpNonConvergenceError

# curvature floor for pairs along which Q is flat
_TAU = 1e-12
# pair steps between free-set Newton phases, and steps per phase
_NEWTON_EVERY = 200
_NEWTON_STEPS = 100


@dataclass
class SmoResult:
    z: np.ndarray
    rho: np.ndarray  # one multiplier per group, in scaled units
    iterations: int
    max_violation: float


def _fill_group(u, ulo, uhi, target):
    """Move ``u`` (in place) towards ``target`` sum, filling variables in index order."""
    d = target - u.sum()
    if d > 0:
        room = uhi - u
    else:
        room = u - ulo
    total = room.sum()
    if abs(d) > total + 1e-12 * (1.0 + abs(target) + total):
        raise QpInfeasibleError(
            f"group sum {target!r} is outside the reachable range of its box")
    before = np.cumsum(room) - room
    take = np.clip(abs(d) - before, 0.0, room)
    u += np.sign(d) * take


def initial_point(ulo, uhi, groups, sums):
    u = np.clip(0.0, ulo, uhi)
    for g, s in zip(groups, sums):
        seg = u[g]
        _fill_group(seg, ulo[g], uhi[g], s)
        u[g] = seg
    return u


def _group_multiplier(gg, ug, lo, hi):
    movable = lo < hi
    free = movable & (ug > lo) & (ug < hi)
    if free.any():
        return float(np.mean(gg[free]))
    at_hi = movable & (ug >= hi)
    at_lo = movable & (ug <= lo)
    left = np.max(gg[at_hi]) if at_hi.any() else None
    right = np.min(gg[at_lo]) if at_lo.any() else None
    if left is None and right is None:
        return 0.0
    if left is None:
        return float(right)
    if right is None:
        return float(left)
    return 0.5 * float(left + right)


def _newton_step(op, u, t, G, ulo, uhi, groups):
    """Move towards the minimiser over the currently free variables.

    Variables at a bound stay fixed and each group sum is preserved. The step
    is cut at the first bound it meets, so ``u`` stays feasible and the
    objective does not increase. Returns ``(u, status)`` with status 0 (no
    move), 1 (blocked by a bound) or 2 (reached the face minimiser).
    """
    free = np.flatnonzero((u > ulo) & (u < uhi))
    nf = free.size
    if nf < 2 or nf > 2000:
        return u, 0
    gid = np.empty(u.size, dtype=np.intp)
    for k, g in enumerate(groups):
        gid[g] = k
    ng = len(groups)
    tf = t[free]
    E = np.zeros((nf, ng))
    E[np.arange(nf), gid[free]] = tf
    A = np.zeros((nf + ng, nf + ng))
    A[:nf, :nf] = op.submatrix(free)
    A[:nf, nf:] = -E
    A[nf:, :nf] = E.T
    rhs = np.concatenate([-G[free], np.zeros(ng)])
    sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    dz = sol[:nf]
    if np.max(np.abs(E.T @ dz)) > 1e-12 * (1.0 + np.max(np.abs(tf * dz))):
        return u, 0
    descent = float(G[free] @ dz)
    if not descent < 0:
        return u, 0
    du = tf * dz
    room = np.where(du > 0, (uhi[free] - u[free]) / np.where(du > 0, du, 1.0),
                    np.where(du < 0, (ulo[free] - u[free]) / np.where(du < 0, du, 1.0), np.inf))
    curv = float(dz @ A[:nf, :nf] @ dz)
    step = 1.0 if curv <= 0 else min(1.0, -descent / curv)
    k = int(np.argmin(room))
    alpha = min(step, float(room[k]))
    if alpha <= 0:
        return u, 0
    u = u.copy()
    u[free] += alpha * du
    blocked = alpha == room[k]
    if blocked:
        u[free[k]] = uhi[free[k]] if du[k] > 0 else ulo[free[k]]
    np.clip(u, ulo, uhi, out=u)
    return u, 1 if blocked else 2


def smo(op, c, lower, upper, t, groups, sums, tol=1e-8, max_iter=100000, u0=None):
    """Minimise ``0.5 z'Qz + c'z`` over the box with fixed scaled group sums.

    ``groups`` is a list of slices that partition ``range(n)``. ``u0`` may
    supply a feasible warm start in scaled units.
    """
    c = np.asarray(c, dtype=float)
    t = np.asarray(t, dtype=float)
    ulo = np.minimum(t * lower, t * upper)
    uhi = np.maximum(t * lower, t * upper)
    u = initial_point(ulo, uhi, groups, sums) if u0 is None else np.array(u0, dtype=float)
    z = u / t
    G = op.matvec(z) + c
    qdiag = op.diagonal() / (t * t)

    it = 0
    while True:
        gt = G / t
        best_gain, best = -1.0, None
        max_viol = -np.inf
        for g in groups:
            gg, ug = gt[g], u[g]
            up = ug < uhi[g]
            low = ug > ulo[g]
            if not (up.any() and low.any()):
                continue
            masked = np.where(up, gg, np.inf)
            i_loc = int(np.argmin(masked))
            gmin = masked[i_loc]
            gmax = float(np.max(gg[low]))
            viol = gmax - gmin
            max_viol = max(max_viol, viol)
            if viol <= tol:
                continue
            i = g.start + i_loc
            col = op.column(i)[g] / (t[i] * t[g])
            b = gg - gmin
            a = qdiag[i] + qdiag[g] - 2.0 * col
            a = np.where(a > _TAU, a, _TAU)
            gain = np.where(low & (b > 0), b * b / a, -np.inf)
            j_loc = int(np.argmax(gain))
            if gain[j_loc] > best_gain:
                best_gain = float(gain[j_loc])
                best = (i, g.start + j_loc, float(a[j_loc]))
        if best is None:
            break
        if it >= max_iter:
            raise QpNonConvergenceError(
                f"SMO stopped after {it} iterations with violation {max_viol:.3e}",
                z=u / t, residual=max_viol, iterations=it)

        i, j, a = best
        step = (gt[j] - gt[i]) / a
        room_i = uhi[i] - u[i]
        room_j = u[j] - ulo[j]
        old_i, old_j = u[i], u[j]
        if step >= room_i and room_i <= room_j:
            u[i] = uhi[i]
            u[j] = old_j - room_i if room_i < room_j else ulo[j]
        elif step >= room_j:
            u[j] = ulo[j]
            u[i] = old_i + room_j
        else:
            u[i] = old_i + step
            u[j] = old_j - step
        dzi = (u[i] - old_i) / t[i]
        dzj = (u[j] - old_j) / t[j]
        G += dzi * op.column(i) + dzj * op.column(j)
        it += 1
        if it % _NEWTON_EVERY == 0:
            for _ in range(_NEWTON_STEPS):
                u, status = _newton_step(op, u, t, G, ulo, uhi, groups)
                if status:
                    G = op.matvec(u / t) + c
                if status != 1:
                    break

    rho = np.array([_group_multiplier((G / t)[g], u[g], ulo[g], uhi[g]) for g in groups])
    return SmoResult(z=u / t, rho=rho, iterations=it, max_violation=max(max_viol, 0.0))
