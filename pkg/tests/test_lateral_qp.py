from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collision_avoidance import lateral_qp as qp
from collision_avoidance.drivable_area import EgoGeometry, ObstacleSnapshot, build_envelope
from collision_avoidance.errors import InfeasibleError
from collision_avoidance.oracles import qp_enumerate, qp_interior_point, random_lateral_instance


@dataclass(frozen=True)
class Band:
    y_min: np.ndarray
    y_max: np.ndarray


def band(N, lo=-10.0, hi=10.0):
    return Band(np.full(N, lo), np.full(N, hi))


def random_problem(seed, N=None):
    rng = np.random.default_rng(seed)
    N = N or int(rng.integers(3, 11))
    lo, hi, w, init = random_lateral_instance(rng, N)
    base = qp.assemble(band(N), qp.KinematicLimits(), qp.Weights(*w), 0.1)
    prob = qp.QPProblem(N, 0.1, base.H, base.F, base.A, base.b, lo.ravel().copy(), hi.ravel().copy())
    return prob, qp.LateralState(*init)


def test_two_step_equality_block_is_a_nb():
    T_s = 0.05
    prob = qp.assemble(band(2), qp.KinematicLimits(), qp.Weights(), T_s)
    assert prob.A.shape == (3, 8)
    np.testing.assert_array_equal(prob.A, qp.a_nb(T_s))
    assert prob.A[2, 3] == T_s


def test_dimensions_and_cost_blocks():
    prob = qp.assemble(band(6), qp.KinematicLimits(), qp.Weights(1, 2, 3), 0.1)
    assert prob.A.shape == (15, 24)
    np.testing.assert_array_equal(np.diag(prob.H)[:4], [0, 2, 4, 6])
    assert not prob.F.any() and not prob.b.any()
    assert np.linalg.matrix_rank(prob.A) == 15


@pytest.mark.parametrize("kwargs", [dict(weights=qp.Weights(-1, 0, 0)), dict(T_s=0.0), dict(N_end=5)])
def test_assemble_rejects_bad_input(kwargs):
    args = dict(envelope=band(4), limits=qp.KinematicLimits(), weights=qp.Weights(), T_s=0.1)
    args.update(kwargs)
    with pytest.raises(ValueError):
        qp.assemble(**args)


def test_zero_weights_give_zero_objective():
    prob = qp.assemble(band(6), qp.KinematicLimits(), qp.Weights(0, 0, 0), 0.1)
    traj = qp.solve(prob, qp.LateralState(0.2, 0.5, 0.1))
    assert traj.objective == pytest.approx(0.0, abs=1e-12)
    assert qp.validate(traj, prob, qp.LateralState(0.2, 0.5, 0.1)).ok()


def test_rest_start_gives_zero_trajectory():
    prob = qp.assemble(band(5, -np.inf, np.inf), qp.KinematicLimits(), qp.Weights(1, 1, 1), 0.1)
    traj = qp.solve(prob, qp.LateralState())
    np.testing.assert_allclose(traj.Y, 0.0, atol=1e-12)
    assert traj.objective == pytest.approx(0.0, abs=1e-14)


def test_unreachable_band_is_infeasible():
    y_min = np.array([0.0, 0.0, 3.0])
    env = Band(y_min, np.full(3, 3.7))
    prob = qp.assemble(env, qp.KinematicLimits(), qp.Weights(), 0.05)
    with pytest.raises(InfeasibleError) as info:
        qp.solve(prob, qp.LateralState())
    assert info.value.step == 2


def test_front_car_plan_is_comfortable():
    geom = EgoGeometry()
    obs = ObstacleSnapshot(gap=26.0, length=4.5, width=1.9, v=16.7, a=-7.0)
    env, tm = build_envelope(obs, 25.0, geom)
    prob = qp.assemble(env, qp.KinematicLimits.from_adhesion(0.7), qp.Weights(), env.T_s)
    traj = qp.solve(prob, qp.LateralState())
    assert np.max(np.abs(traj.a_y)) <= 3.0
    assert traj.y[tm.N_obj1] >= env.W_obj + env.d_lat - 1e-8
    assert qp.validate(traj, prob, qp.LateralState()).ok()


def test_validator_flags_corrupted_trajectory():
    prob, init = random_problem(3, N=8)
    traj = qp.solve(prob, init)
    Y = traj.Y.copy()
    Y[3, 0] += 0.1
    rep = qp.validate_vector(Y, prob.pinned(init))
    assert rep.equality == pytest.approx(0.1, abs=1e-9)
    assert not rep.ok()


def test_zero_trajectory_on_zero_problem_is_clean():
    prob = qp.assemble(band(4), qp.KinematicLimits(), qp.Weights(0, 0, 0), 0.1)
    rep = qp.validate_vector(np.zeros(16), prob)
    assert rep.ok() and rep.max_residual == 0.0


def test_limits_from_adhesion():
    lim = qp.KinematicLimits.from_adhesion(0.7)
    assert lim.a_max == pytest.approx(2.7468)
    assert lim.lower() == (-2.0, pytest.approx(-2.7468), -10.0)


@pytest.mark.parametrize("seed", range(200))
def test_oracle_equivalence(seed):
    prob, init = random_problem(seed)
    pp = prob.pinned(init)
    ref = qp_interior_point(pp.H, pp.F, pp.A, pp.b, pp.B_min, pp.B_max)
    assert ref is not None
    traj = qp.solve(prob, init)
    assert abs(traj.objective - ref[1]) <= 1e-6 * (1 + abs(ref[1]))
    assert qp.validate(traj, prob, init).ok()


@pytest.mark.parametrize("seed", range(8))
def test_enumeration_oracle_on_tiny_instances(seed):
    prob, init = random_problem(1000 + seed, N=3)
    pp = prob.pinned(init)
    ref = qp_enumerate(pp.H, pp.F, pp.A, pp.b, pp.B_min, pp.B_max)
    assert ref is not None
    traj = qp.solve(prob, init)
    assert abs(traj.objective - ref[1]) <= 1e-6 * (1 + abs(ref[1]))


@settings(max_examples=30)
@given(seed=st.integers(0, 10_000), c=st.floats(0.01, 100.0))
def test_scaling_covariance(seed, c):
    prob, init = random_problem(seed)
    traj = qp.solve(prob, init)
    scaled = qp.QPProblem(prob.N_end, prob.T_s, c * prob.H, prob.F, prob.A, prob.b, prob.B_min, prob.B_max)
    traj_c = qp.solve(scaled, init)
    np.testing.assert_allclose(traj_c.Y, traj.Y, atol=1e-6)
    assert traj_c.objective == pytest.approx(c * traj.objective, rel=1e-6, abs=1e-9)


@settings(max_examples=30)
@given(seed=st.integers(0, 10_000), bump=st.floats(0.0, 50.0), frac=st.floats(0.0, 1.0))
def test_monotone_comfort(seed, bump, frac):
    prob, init = random_problem(seed)
    traj = qp.solve(prob, init)
    H2 = prob.H.copy()
    steps = np.arange(prob.N_end)
    mask = steps < max(1, int(frac * prob.N_end))
    idx = 4 * steps[mask] + 3
    H2[idx, idx] += 2 * bump
    traj2 = qp.solve(qp.QPProblem(prob.N_end, prob.T_s, H2, prob.F, prob.A, prob.b, prob.B_min, prob.B_max), init)
    assert np.sum(traj2.j_y[mask] ** 2) <= np.sum(traj.j_y[mask] ** 2) + 1e-6


@settings(max_examples=30)
@given(seed=st.integers(0, 10_000))
def test_dynamics_exactness(seed):
    prob, init = random_problem(seed)
    traj = qp.solve(prob, init)
    np.testing.assert_allclose(qp.rollout(traj.Y, prob.T_s)[:, 0], traj.y, atol=1e-8)
    assert traj.Y[0, :3] == pytest.approx([init.y, init.v_y, init.a_y])
