"""Lane-change trajectory QP: assembly, solution and independent validation.

Decision vector ``Y`` stacks ``[y, v_y, a_y, j_y]`` for every planner step.
Cost is ``sum p v^2 + q a^2 + r j^2`` and consecutive steps are tied by

    y' = y + v T + a T^2 / 2,   v' = v + a T,   a' = a + j T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from ._dual_active_set import solve_dual_active_set
from .errors import InfeasibleError

NX = 4  # state size per step

EQ_TOL = 1e-8
BOUND_TOL = 1e-8
STATIONARITY_TOL = 1e-6


@dataclass(frozen=True)
class LateralState:
    y: float = 0.0
    v_y: float = 0.0
    a_y: float = 0.0
    j_y: float = 0.0


@dataclass(frozen=True)
class KinematicLimits:
    v_max: float = 2.0
    a_max: float = 2.7468  # 0.4 * mu * g at mu = 0.7
    j_max: float = 10.0
    v_min: float | None = None  # defaults to -v_max
    a_min: float | None = None
    j_min: float | None = None

    @classmethod
    def from_adhesion(cls, mu: float, g: float = 9.81, frac: float = 0.4, v_max: float = 2.0,
                      j_max: float = 10.0) -> "KinematicLimits":
        return cls(v_max=v_max, a_max=frac * mu * g, j_max=j_max)

    def lower(self) -> tuple[float, float, float]:
        return (
            -self.v_max if self.v_min is None else self.v_min,
            -self.a_max if self.a_min is None else self.a_min,
            -self.j_max if self.j_min is None else self.j_min,
        )

    def upper(self) -> tuple[float, float, float]:
        return self.v_max, self.a_max, self.j_max


@dataclass(frozen=True)
class Weights:
    p: float | np.ndarray = 1.0
    q: float | np.ndarray = 10.0
    r: float | np.ndarray = 100.0


@dataclass(frozen=True)
class QPProblem:
    N_end: int
    T_s: float
    H: np.ndarray
    F: np.ndarray
    A: np.ndarray
    b: np.ndarray
    B_min: np.ndarray
    B_max: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.H, self.F, self.A, self.b, self.B_min, self.B_max):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return NX * self.N_end

    def objective(self, Y: np.ndarray) -> float:
        Y = np.ravel(Y)
        return float(0.5 * Y @ self.H @ Y + self.F @ Y)

    def pinned(self, init: LateralState) -> "QPProblem":
        """Copy with the first step's position, velocity and acceleration fixed to ``init``."""
        lo = self.B_min.copy()
        hi = self.B_max.copy()
        lo[:3] = hi[:3] = (init.y, init.v_y, init.a_y)
        return QPProblem(self.N_end, self.T_s, self.H, self.F, self.A, self.b, lo, hi)


@dataclass(frozen=True)
class LateralTrajectory:
    Y: np.ndarray  # shape (N_end, 4)
    objective: float
    iterations: int
    kkt_residual: float
    T_s: float

    @property
    def states(self) -> list[LateralState]:
        return [LateralState(*row) for row in self.Y]

    @property
    def y(self) -> np.ndarray:
        return self.Y[:, 0]

    @property
    def v_y(self) -> np.ndarray:
        return self.Y[:, 1]

    @property
    def a_y(self) -> np.ndarray:
        return self.Y[:, 2]

    @property
    def j_y(self) -> np.ndarray:
        return self.Y[:, 3]

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.Y)) * self.T_s


def a_nb(T_s: float) -> np.ndarray:
    """3x8 block coupling step ``t`` to step ``t+1``."""
    return np.array(
        [
            [1.0, T_s, T_s**2 / 2, 0.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, T_s, 0.0, 0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, T_s, 0.0, 0.0, -1.0, 0.0],
        ]
    )


def _per_step(value, N_end: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (N_end,)).copy()
    if arr.shape != (N_end,):
        raise ValueError(f"{name}: expected {N_end} values")
    return arr


def assemble(
    envelope,
    limits: KinematicLimits,
    weights: Weights,
    T_s: float,
    N_end: int | None = None,
) -> QPProblem:
    """Build the standard-form QP; ``envelope`` provides ``y_min`` / ``y_max`` arrays."""
    y_min = np.asarray(envelope.y_min, dtype=float)
    y_max = np.asarray(envelope.y_max, dtype=float)
    if N_end is None:
        N_end = len(y_min)
    if len(y_min) != N_end or len(y_max) != N_end:
        raise ValueError(f"envelope length {len(y_min)} does not match N_end={N_end}")
    if N_end < 2:
        raise ValueError("N_end must be >= 2")
    if T_s <= 0:
        raise ValueError("T_s must be > 0")

    p = _per_step(weights.p, N_end, "p")
    q = _per_step(weights.q, N_end, "q")
    r = _per_step(weights.r, N_end, "r")
    if (p < 0).any() or (q < 0).any() or (r < 0).any():
        raise ValueError("weights must be non-negative")

    n = NX * N_end
    diag = np.zeros(n)
    diag[1::NX] = 2 * p
    diag[2::NX] = 2 * q
    diag[3::NX] = 2 * r
    H = np.diag(diag)
    F = np.zeros(n)

    blk = a_nb(T_s)
    A = np.zeros((3 * (N_end - 1), n))
    for t in range(N_end - 1):
        A[3 * t : 3 * t + 3, NX * t : NX * t + 8] = blk
    b = np.zeros(3 * (N_end - 1))

    lo_k, hi_k = limits.lower(), limits.upper()
    B_min = np.empty(n)
    B_max = np.empty(n)
    B_min[0::NX], B_max[0::NX] = y_min, y_max
    for i in range(3):
        B_min[i + 1 :: NX] = lo_k[i]
        B_max[i + 1 :: NX] = hi_k[i]
    return QPProblem(N_end, T_s, H, F, A, b, B_min, B_max)


def _svd_rank(M: np.ndarray, rtol: float = 1e-12):
    U, s, Vt = np.linalg.svd(M)
    rank = int((s > rtol * (s[0] if s.size else 1.0)).sum())
    return U, s, Vt, rank


def solve_qp(problem: QPProblem) -> tuple[np.ndarray, int]:
    """Solve ``problem`` as given (no pinning). Returns ``(Y, iterations)``."""
    return _solve_core(problem, certify=True)


def _solve_core(problem: QPProblem, certify: bool = False) -> tuple[np.ndarray, int]:
    H, F, A, b = problem.H, problem.F, problem.A, problem.b
    lo, hi = problem.B_min, problem.B_max
    n = problem.n

    crossed = np.nonzero(lo > hi + 1e-12)[0]
    if crossed.size:
        raise InfeasibleError("lower bound above upper bound", step=int(crossed[0]) // NX)

    fixed = np.abs(hi - lo) <= 1e-12
    free = ~fixed
    x = np.zeros(n)
    x[fixed] = lo[fixed]
    fi = np.nonzero(free)[0]

    A_F = A[:, free]
    rhs = b - A[:, fixed] @ x[fixed]
    U, s, Vt, rank = _svd_rank(A_F)
    x_p = Vt[:rank].T @ ((U[:, :rank].T @ rhs) / s[:rank])
    if np.max(np.abs(A_F @ x_p - rhs), initial=0.0) > 1e-9 * (1 + np.max(np.abs(rhs), initial=0.0)):
        raise InfeasibleError("equality constraints inconsistent with fixed values")
    Z = Vt[rank:].T

    H_FF = H[np.ix_(free, free)]
    g0 = H_FF @ x_p + H[np.ix_(free, fixed)] @ x[fixed] + F[free]
    G = Z.T @ H_FF @ Z
    c = Z.T @ g0
    G = 0.5 * (G + G.T)
    k = G.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(G)), initial=0.0)))
    if k and np.linalg.eigvalsh(G)[0] <= 1e-10 * scale:
        # semidefinite: pick the minimum-norm point among optimal ones
        G = G + 1e-10 * scale * np.eye(k)

    rows, rhs_in, var_of_row = [], [], []
    for j, i in enumerate(fi):
        if np.isfinite(lo[i]):
            rows.append(Z[j])
            rhs_in.append(lo[i] - x_p[j])
            var_of_row.append(i)
        if np.isfinite(hi[i]):
            rows.append(-Z[j])
            rhs_in.append(-(hi[i] - x_p[j]))
            var_of_row.append(i)
    C = np.array(rows).reshape(len(rows), k)
    d = np.array(rhs_in)

    try:
        res = solve_dual_active_set(G, c, C, d)
    except InfeasibleError:
        if not certify:
            raise
        step = _first_infeasible_step(problem)
        raise InfeasibleError(
            f"bounds at step {step} cannot be met under the kinematic limits", step=step
        ) from None

    x[free] = x_p + Z @ res.w
    x = np.clip(x, lo, hi)
    return x, res.iterations


def _prefix(problem: QPProblem, steps: int) -> QPProblem:
    n = NX * steps
    return QPProblem(
        steps, problem.T_s, problem.H[:n, :n], problem.F[:n], problem.A[: 3 * (steps - 1), :n],
        problem.b[: 3 * (steps - 1)], problem.B_min[:n], problem.B_max[:n],
    )


def _first_infeasible_step(problem: QPProblem) -> int:
    """Earliest step whose bounds cannot be met given all the steps before it.

    Prefix feasibility is monotone, so a bisection over horizon lengths
    finds the shortest infeasible prefix.
    """
    lo, hi = 1, problem.N_end  # prefix of ``lo`` steps feasible, ``hi`` steps infeasible
    if not _feasible(_prefix(problem, 1)):
        return 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _feasible(_prefix(problem, mid)):
            lo = mid
        else:
            hi = mid
    return hi - 1


def _feasible(problem: QPProblem) -> bool:
    if problem.N_end < 2:
        return bool(np.all(problem.B_min <= problem.B_max + 1e-12))
    probe = QPProblem(problem.N_end, problem.T_s, np.eye(problem.n), np.zeros_like(problem.F),
                     problem.A, problem.b, problem.B_min, problem.B_max)
    try:
        _solve_core(probe)
    except InfeasibleError:
        return False
    return True


def solve(problem: QPProblem, init: LateralState) -> LateralTrajectory:
    """Plan from ``init`` (its position, velocity and acceleration are pinned)."""
    pinned = problem.pinned(init)
    Y, iterations = solve_qp(pinned)
    report = validate_vector(Y, pinned)
    traj = LateralTrajectory(
        Y.reshape(problem.N_end, NX),
        problem.objective(Y),
        iterations,
        report.max_residual,
        problem.T_s,
    )
    return traj


@dataclass(frozen=True)
class ValidationReport:
    equality: float
    bounds: float
    stationarity: float
    rollout: float
    worst_equality_row: int | None = None
    worst_bound_index: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.equality, self.bounds, self.stationarity)

    def ok(self, eq_tol: float = EQ_TOL, bound_tol: float = BOUND_TOL,
           stat_tol: float = STATIONARITY_TOL) -> bool:
        return (
            self.equality <= eq_tol
            and self.bounds <= bound_tol
            and self.stationarity <= stat_tol
            and self.rollout <= eq_tol
        )


def rollout(Y: np.ndarray, T_s: float) -> np.ndarray:
    """Integrate the jerk sequence forward from the first state."""
    Y = np.asarray(Y).reshape(-1, NX)
    out = np.empty_like(Y)
    out[0] = Y[0]
    for t in range(len(Y) - 1):
        y, v, a = out[t, :3]
        j = Y[t, 3]
        out[t + 1, 0] = y + v * T_s + a * T_s**2 / 2
        out[t + 1, 1] = v + a * T_s
        out[t + 1, 2] = a + j * T_s
        out[t + 1, 3] = Y[t + 1, 3]
    return out


def validate_vector(Y: np.ndarray, problem: QPProblem, active_tol: float = 1e-7) -> ValidationReport:
    """Residuals of ``Y`` against ``problem``, recomputed from scratch.

    Bound multipliers are recovered by sign-constrained least squares over
    the active bounds, so ``stationarity`` is the smallest KKT gradient
    residual achievable with dual-feasible multipliers at this point.
    """
    Y = np.ravel(np.asarray(Y, dtype=float))
    lo, hi = problem.B_min, problem.B_max
    eq_res = problem.A @ Y - problem.b
    eq = float(np.max(np.abs(eq_res), initial=0.0))
    over = np.maximum(lo - Y, Y - hi)
    bnd = float(max(0.0, np.max(over, initial=0.0)))

    grad = problem.H @ Y + problem.F
    near_lo = (Y - lo) <= active_tol * (1 + np.abs(lo))
    near_hi = (hi - Y) <= active_tol * (1 + np.abs(hi))
    act = np.nonzero(near_lo | near_hi)[0]
    m = problem.A.shape[0]
    M = np.hstack([problem.A.T, -np.eye(problem.n)[:, act]])
    lb = np.full(M.shape[1], -np.inf)
    ub = np.full(M.shape[1], np.inf)
    for k, i in enumerate(act):
        if near_lo[i] and not near_hi[i]:
            lb[m + k] = 0.0
        elif near_hi[i] and not near_lo[i]:
            ub[m + k] = 0.0
    if M.shape[1]:
        sol = lsq_linear(M, -grad, bounds=(lb, ub), method="bvls", tol=1e-14, lsmr_tol=None)
        stat_res = M @ sol.x + grad
    else:
        stat_res = grad
    stat = float(np.max(np.abs(stat_res), initial=0.0))

    roll = rollout(Y, problem.T_s)
    roll_err = float(np.max(np.abs(roll - Y.reshape(-1, NX)), initial=0.0))

    return ValidationReport(
        equality=eq,
        bounds=bnd,
        stationarity=stat,
        rollout=roll_err,
        worst_equality_row=int(np.argmax(np.abs(eq_res))) if eq_res.size else None,
        worst_bound_index=int(np.argmax(over)) if bnd > 0 else None,
    )


def validate(traj: LateralTrajectory, problem: QPProblem, init: LateralState | None = None) -> ValidationReport:
    """Validate a trajectory; with ``init`` the first step is checked against the pinned values."""
    if init is not None:
        problem = problem.pinned(init)
    return validate_vector(traj.Y, problem)
