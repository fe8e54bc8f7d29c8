"""Goldfarb-Idnani dual active-set method for strictly convex QPs.

Solves ``min 0.5 w'Gw + c'w  s.t.  C w >= d`` with ``G`` positive definite.
The active-set factorisation is rebuilt from scratch each iteration, which
is cheap at planner sizes (a few hundred variables at most).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import InfeasibleError, IterationLimitError


@dataclass
class DualActiveSetResult:
    w: np.ndarray
    active: list[int]
    multipliers: np.ndarray
    iterations: int


def solve_dual_active_set(
    G: np.ndarray,
    c: np.ndarray,
    C: np.ndarray,
    d: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> DualActiveSetResult:
    n = G.shape[0]
    m = C.shape[0]
    if max_iter is None:
        max_iter = 20 * (n + m) + 100

    L = cholesky(G, lower=True)
    J0 = solve_triangular(L, np.eye(n), lower=True).T  # J0 J0' = G^-1
    w = -(J0 @ (J0.T @ c))

    row_scale = 1.0 + np.abs(d)
    active: list[int] = []
    u: list[float] = []
    iterations = 0

    while True:
        s = C @ w - d
        viol = s / row_scale
        if active:
            viol[active] = np.inf
        p = int(np.argmin(viol)) if m else -1
        if m == 0 or viol[p] >= -tol:
            return DualActiveSetResult(w, active, np.asarray(u), iterations)

        u_p = 0.0
        n_p = C[p]
        while True:
            iterations += 1
            if iterations > max_iter:
                raise IterationLimitError(f"no convergence after {max_iter} iterations")
            q = len(active)
            if q:
                Q, R = np.linalg.qr(J0.T @ C[active].T, mode="complete")
                J = J0 @ Q
                dv = J.T @ n_p
                r = solve_triangular(R[:q, :q], dv[:q])
                z = J[:, q:] @ dv[q:]
            else:
                dv = J0.T @ n_p
                r = np.zeros(0)
                z = J0 @ dv

            # dual step limit: an active multiplier reaches zero
            t1, drop = np.inf, -1
            for k in range(q):
                if r[k] > 0:
                    ratio = u[k] / r[k]
                    if ratio < t1:
                        t1, drop = ratio, k

            zn = float(z @ n_p)
            if zn > 1e-14 * (1.0 + float(n_p @ n_p)):
                t2 = -(float(n_p @ w) - d[p]) / zn
            else:
                t2 = np.inf

            t = min(t1, t2)
            if not np.isfinite(t):
                raise InfeasibleError("constraints are inconsistent", step=p)

            if np.isfinite(t2):
                w = w + t * z
            for k in range(q):
                u[k] -= t * r[k]
            u_p += t

            if t2 <= t1:
                active.append(p)
                u.append(u_p)
                break
            active.pop(drop)
            u.pop(drop)
