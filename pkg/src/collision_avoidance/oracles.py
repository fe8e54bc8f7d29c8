"""Reference computations used to cross-check the production code paths.

Nothing here is imported by the simulator. Each routine reaches the same
quantity by a different route: brute-force kinematics, quadrature, a
primal-dual interior-point QP method, and active-set enumeration.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import lsq_linear


def hazard_time_by_integration(v_ego: float, v_obj: float, a_obj: float, L: float,
                               dt: float = 1e-4, t_max: float = 60.0) -> float | None:
    """Step both bodies until the gap closes; ``None`` if it never does."""
    if a_obj < 0 and v_obj <= 0:
        a_obj = 0.0  # nothing to brake: a body at rest stays at rest
    x_e, x_o, v_o = 0.0, L, v_obj
    t = 0.0
    while t < t_max:
        v_next = v_o + a_obj * dt
        if a_obj < 0 and v_next < 0:
            # obstacle stops inside this step, or is already at rest
            t_stop = v_o / -a_obj
            x_o_next = x_o + v_o * t_stop / 2
            v_next = 0.0
        else:
            x_o_next = x_o + (v_o + v_next) * dt / 2
        x_e_next = x_e + v_ego * dt
        g0, g1 = x_o - x_e, x_o_next - x_e_next
        if g1 <= 0:
            return t + dt * g0 / (g0 - g1)
        x_e, x_o, v_o = x_e_next, x_o_next, v_next
        t += dt
    return None


def ramp_stop_distance(v0: float, a_target: float, tau1: float, tau2: float) -> float:
    """Stopping distance under dead time + linear build-up, by adaptive quadrature of v(t)."""

    def decel(t: float) -> float:
        if t < tau1:
            return 0.0
        if tau2 > 0 and t < tau1 + tau2:
            return a_target * (t - tau1) / tau2
        return a_target

    def speed(t: float) -> float:
        lost, _ = quad(decel, 0.0, t, points=[tau1, tau1 + tau2], limit=200)
        return max(v0 - lost, 0.0)

    # time of standstill: the build-up sheds a*tau2/2 of speed
    lost_in_ramp = a_target * tau2 / 2
    if v0 <= lost_in_ramp:
        lo, hi = tau1, tau1 + tau2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if speed(mid) > 0:
                lo = mid
            else:
                hi = mid
        t_stop = hi
    else:
        t_stop = tau1 + tau2 + (v0 - lost_in_ramp) / a_target
    dist, _ = quad(speed, 0.0, t_stop, points=[tau1, tau1 + tau2], limit=400,
                   epsabs=1e-12, epsrel=1e-12)
    return dist


class _Inconsistent(Exception):
    pass


def _eliminate_fixed(H, F, A, b, lo, hi, tol=1e-12):
    fixed = np.abs(hi - lo) <= tol
    free = ~fixed
    x_fix = lo[fixed]
    H_ff = H[np.ix_(free, free)]
    f_f = F[free] + H[np.ix_(free, fixed)] @ x_fix
    A_f = A[:, free]
    b_f = b - A[:, fixed] @ x_fix
    # drop redundant equality rows (fixed values can make rows dependent)
    if A_f.size:
        U, s, Vt = np.linalg.svd(A_f, full_matrices=True)
        r = int((s > 1e-12 * max(s[0], 1.0)).sum()) if s.size else 0
        proj = U.T @ b_f
        if np.max(np.abs(proj[r:]), initial=0.0) > 1e-9 * (1 + np.max(np.abs(b_f), initial=0.0)):
            raise _Inconsistent()
        A_f = s[:r, None] * Vt[:r]
        b_f = proj[:r]
    const = 0.5 * x_fix @ H[np.ix_(fixed, fixed)] @ x_fix + F[fixed] @ x_fix
    return free, fixed, H_ff, f_f, A_f, b_f, lo[free], hi[free], const


def _assemble_full(n, free, fixed, x_free, lo):
    x = np.empty(n)
    x[fixed] = lo[fixed]
    x[free] = x_free
    return x


def qp_interior_point(H, F, A, b, lo, hi, tol=1e-12, max_iter=200):
    """Mehrotra predictor-corrector for ``min .5x'Hx + F'x, Ax=b, lo<=x<=hi``.

    Returns ``(x, objective)`` or ``None`` when it fails to converge, which
    for these bounded problems means the constraints are inconsistent.
    The interior solution is polished by one equality-constrained solve on
    the bounds it identifies as active.
    """
    H, F, A, b = (np.asarray(v, dtype=float) for v in (H, F, A, b))
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if np.any(lo > hi + 1e-12):
        return None
    n_all = H.shape[0]
    try:
        free, fixed, Hf, f, Af, bf, l, u, _ = _eliminate_fixed(H, F, A, b, lo, hi)
    except _Inconsistent:
        return None
    n, m = Hf.shape[0], Af.shape[0]
    if not (np.all(np.isfinite(l)) and np.all(np.isfinite(u))):
        raise ValueError("reference solver expects finite bounds")

    x = 0.5 * (l + u)
    sl = np.maximum(x - l, 1.0)
    su = np.maximum(u - x, 1.0)
    zl = np.ones(n)
    zu = np.ones(n)
    lam = np.zeros(m)

    def residuals(x, lam, zl, zu, sl, su):
        rd = Hf @ x + f + Af.T @ lam - zl + zu
        rp = Af @ x - bf
        rl = x - sl - l
        ru = x + su - u
        return rd, rp, rl, ru

    def solve_newton(x, sl, su, zl, zu, rd, rp, rl, ru, rcl, rcu):
        with np.errstate(over="raise", divide="raise", invalid="raise"):
            try:
                D = zl / sl + zu / su
            except FloatingPointError as exc:
                raise np.linalg.LinAlgError(str(exc)) from exc
        K = np.block([[Hf + np.diag(D), Af.T], [Af, np.zeros((m, m))]])
        rhs1 = -rd - (rcl + zl * rl) / sl + (rcu - zu * ru) / su
        # symmetric equilibration: barrier terms of nearly active bounds grow
        # without limit and would otherwise swamp the rest of the system
        s = np.ones(n + m)
        s[:n] = 1.0 / np.sqrt(np.maximum(1.0, np.diag(Hf) + D))
        sol = s * np.linalg.solve(K * np.outer(s, s), s * np.concatenate([rhs1, -rp]))
        dx, dlam = sol[:n], sol[n:]
        dsl = dx + rl
        dsu = -ru - dx
        dzl = -(rcl + zl * dsl) / sl
        dzu = -(rcu + zu * dsu) / su
        return dx, dlam, dsl, dsu, dzl, dzu

    def max_step(v, dv):
        neg = dv < 0
        return min(1.0, float(np.min(-v[neg] / dv[neg]))) if neg.any() else 1.0

    scale = 1.0 + max(np.max(np.abs(f), initial=0.0), np.max(np.abs(bf), initial=0.0),
                      np.max(np.abs(l), initial=0.0), np.max(np.abs(u), initial=0.0))
    # dual residuals carry the magnitude of H times x
    scale_d = scale + float(np.max(np.abs(Hf), initial=0.0)) * scale
    converged = False
    best, best_merit = (x, zl, zu), np.inf
    for _ in range(max_iter):
        rd, rp, rl, ru = residuals(x, lam, zl, zu, sl, su)
        mu = (sl @ zl + su @ zu) / (2 * n) if n else 0.0
        res_p = max(np.max(np.abs(rp), initial=0), np.max(np.abs(rl), initial=0),
                    np.max(np.abs(ru), initial=0)) / scale
        res_d = float(np.max(np.abs(rd), initial=0)) / scale_d
        gap = max(np.max(sl * zl, initial=0.0), np.max(su * zu, initial=0.0))
        merit = max(res_p, res_d, gap / scale_d)
        if np.isfinite(merit) and merit < best_merit:
            best, best_merit = (x.copy(), zl.copy(), zu.copy()), merit
        if merit <= tol:
            converged = True
            break
        if n == 0:
            converged = np.max(np.abs(rp), initial=0) <= 1e-9
            break
        # predictor; a singular system this late means the iterate has converged
        try:
            aff = solve_newton(x, sl, su, zl, zu, rd, rp, rl, ru, sl * zl, su * zu)
        except np.linalg.LinAlgError:
            break
        dx, dlam, dsl, dsu, dzl, dzu = aff
        ap = min(max_step(sl, dsl), max_step(su, dsu))
        ad = min(max_step(zl, dzl), max_step(zu, dzu))
        mu_aff = ((sl + ap * dsl) @ (zl + ad * dzl) + (su + ap * dsu) @ (zu + ad * dzu)) / (2 * n)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        rcl = sl * zl + dsl * dzl - sigma * mu
        rcu = su * zu + dsu * dzu - sigma * mu
        try:
            dx, dlam, dsl, dsu, dzl, dzu = solve_newton(x, sl, su, zl, zu, rd, rp, rl, ru, rcl, rcu)
        except np.linalg.LinAlgError:
            break
        ap = 0.995 * min(max_step(sl, dsl), max_step(su, dsu))
        ad = 0.995 * min(max_step(zl, dzl), max_step(zu, dzu))
        x = x + ap * dx
        sl = sl + ap * dsl
        su = su + ap * dsu
        lam = lam + ad * dlam
        zl = zl + ad * dzl
        zu = zu + ad * dzu
    if not converged:
        # fall back to the best iterate if it is close to optimal
        if best_merit > 1e-6:
            return None
        x, zl, zu = best

    x_free = np.clip(x, l, u)
    # polish on the identified active set
    act_lo = (x - l) < zl
    act_lo &= (x - l) < 1e-6 * (1 + np.abs(l))
    act_hi = (u - x) < zu
    act_hi &= (u - x) < 1e-6 * (1 + np.abs(u))
    polished = _eqp(Hf, f, Af, bf, act_lo, act_hi, l, u)
    if polished is not None:
        xp = polished
        if np.all(xp >= l - 1e-9) and np.all(xp <= u + 1e-9):
            if _obj(Hf, f, xp) <= _obj(Hf, f, x_free) + 1e-9 * (1 + abs(_obj(Hf, f, x_free))):
                x_free = np.clip(xp, l, u)
    x_full = _assemble_full(n_all, free, fixed, x_free, lo)
    return x_full, float(0.5 * x_full @ H @ x_full + F @ x_full)


def _obj(H, f, x):
    return float(0.5 * x @ H @ x + f @ x)


def _eqp(Hf, f, Af, bf, act_lo, act_hi, l, u):
    """Equality-constrained QP with the flagged bounds held active.

    Null-space method: a minimum-norm particular solution plus a step in
    the null space of the constraints, which stays accurate when the full
    KKT matrix is badly conditioned. Returns ``x`` or ``None``.
    """
    n = Hf.shape[0]
    idx = np.nonzero(act_lo | act_hi)[0]
    vals = np.where(act_lo[idx], l[idx], u[idx])
    E = np.zeros((len(idx), n))
    E[np.arange(len(idx)), idx] = 1.0
    C = np.vstack([Af, E])
    d = np.concatenate([bf, vals])
    if C.shape[0] == 0:
        Z, x0 = np.eye(n), np.zeros(n)
    else:
        U, sv, Vt = np.linalg.svd(C)
        r = int(np.sum(sv > 1e-10 * sv[0])) if sv.size else 0
        proj = U.T @ d
        if np.max(np.abs(proj[r:]), initial=0.0) > 1e-9 * (1 + np.max(np.abs(d), initial=0.0)):
            return None
        x0 = Vt[:r].T @ (proj[:r] / sv[:r])
        Z = Vt[r:].T
    if Z.shape[1] == 0:
        return x0
    G = Z.T @ Hf @ Z
    g = Z.T @ (Hf @ x0 + f)
    w = np.linalg.eigvalsh(G)
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        return None  # unbounded or non-unique along the free directions
    return x0 - Z @ np.linalg.solve(G, g)

def _dual_feasible(Hf, f, Af, x, l, u, act_tol=1e-9, res_tol=1e-9):
    """True when sign-correct multipliers make ``x`` stationary.

    Multipliers are found by bounded least squares over every bound active
    at ``x``, so degenerate points with non-unique multipliers still pass.
    """
    g = Hf @ x + f
    lo_act = np.nonzero(np.abs(x - l) <= act_tol)[0]
    hi_act = np.nonzero(np.abs(u - x) <= act_tol)[0]
    n, m = Hf.shape[0], Af.shape[0]
    cols = [Af.T, -np.eye(n)[:, lo_act], np.eye(n)[:, hi_act]]
    M = np.hstack(cols)
    if M.shape[1] == 0:
        return float(np.max(np.abs(g), initial=0.0)) <= res_tol * (1 + np.max(np.abs(f), initial=0.0))
    lb = np.concatenate([np.full(m, -np.inf), np.zeros(len(lo_act) + len(hi_act))])
    ub = np.full(M.shape[1], np.inf)
    res = lsq_linear(M, -g, bounds=(lb, ub), method="bvls", tol=1e-14)
    r = M @ res.x + g
    return float(np.max(np.abs(r))) <= res_tol * (1 + float(np.max(np.abs(f), initial=0.0)))


def qp_enumerate(H, F, A, b, lo, hi, max_active: int | None = None):
    """Exhaustive active-set search over every candidate KKT point.

    Feasible only for tiny problems. Returns ``(x, objective)`` or ``None``
    when no candidate active set yields a KKT point (infeasible problem).
    """
    H, F, A, b = (np.asarray(v, dtype=float) for v in (H, F, A, b))
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    n_all = H.shape[0]
    try:
        free, fixed, Hf, f, Af, bf, l, u, _ = _eliminate_fixed(H, F, A, b, lo, hi)
    except _Inconsistent:
        return None
    n = Hf.shape[0]
    rank = np.linalg.matrix_rank(Af) if Af.size else 0
    dof = n - rank
    if max_active is None:
        max_active = dof
    tol = 1e-9
    best = None
    for size in range(0, max_active + 1):
        for vars_ in itertools.combinations(range(n), size):
            for sides in itertools.product((0, 1), repeat=size):
                act_lo = np.zeros(n, bool)
                act_hi = np.zeros(n, bool)
                for v, s in zip(vars_, sides):
                    (act_lo if s == 0 else act_hi)[v] = True
                out = _eqp(Hf, f, Af, bf, act_lo, act_hi, l, u)
                if out is None:
                    continue
                x = out
                if np.any(x < l - tol) or np.any(x > u + tol):
                    continue
                if not _dual_feasible(Hf, f, Af, x, l, u):
                    continue
                x_full = _assemble_full(n_all, free, fixed, np.clip(x, l, u), lo)
                obj = float(0.5 * x_full @ H @ x_full + F @ x_full)
                # tolerance lets near-KKT points through; keep the lowest
                if best is None or obj < best[1]:
                    best = (x_full, obj)
    return best


def random_lateral_instance(rng: np.random.Generator, N_end: int, T_s: float = 0.1):
    """Random planner instance that is feasible by construction.

    A random jerk sequence is rolled out; bounds are drawn around that
    witness, some of them tight, so the optimum touches several bounds.
    Returns ``(y_min, y_max, limits_lo, limits_hi, weights, init)`` with
    per-step arrays.
    """
    j = rng.uniform(-3, 3, N_end)
    Y = np.zeros((N_end, 4))
    Y[0, :3] = rng.uniform([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5])
    for t in range(N_end - 1):
        y, v, a = Y[t, :3]
        Y[t + 1, 0] = y + v * T_s + a * T_s**2 / 2
        Y[t + 1, 1] = v + a * T_s
        Y[t + 1, 2] = a + j[t] * T_s
    Y[:, 3] = j

    def around(vals):
        slack_lo = rng.choice([0.0, 0.02, 0.3, 1.0], size=vals.shape, p=[0.15, 0.15, 0.35, 0.35])
        slack_hi = rng.choice([0.0, 0.02, 0.3, 1.0], size=vals.shape, p=[0.15, 0.15, 0.35, 0.35])
        return vals - slack_lo, vals + slack_hi

    lo = np.empty_like(Y)
    hi = np.empty_like(Y)
    for c in range(4):
        lo[:, c], hi[:, c] = around(Y[:, c])
    weights = rng.uniform(0.1, 10.0, size=3)
    init = Y[0, :3].copy()
    return lo, hi, weights, init
