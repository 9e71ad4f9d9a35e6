import numpy as np
import pytest

from conftest import simulate_plant
from pushdob.data import ForcePlan, PushTrajectory, subsample_plan
from pushdob.dynamics import ObjectParams, PlanarState, moment_arm_torque
from pushdob.identify import with_values, zero_models
from pushdob.predict import (
    PipelineConfig,
    PushPosePredictor,
    ScheduleError,
    SimpleFrictionPredictor,
    build_schedule,
    coulomb_force,
    predict_pose,
    predict_simple,
    run_pipeline,
)

DT = 1 / 250
P = ObjectParams()


def _models(beta, eps):
    return tuple(with_values(m, b, e) for m, b, e in zip(zero_models(), beta, eps))


def _constant_force_traj(n=1000, f=(0.8, -0.3), tip=(-0.05, 0.01)):
    rows = np.zeros((n, 10))
    rows[:, 0] = DT * np.arange(n)
    rows[:, 1:3] = tip
    rows[:, 7:9] = f
    return PushTrajectory.from_rows(rows)


def test_schedule_quarters(friction_traj):
    s = build_schedule(friction_traj)
    n = len(friction_traj)
    assert s.kinds == ("identify", "predict", "identify", "predict")
    assert s.indices[0] == 0 and s.indices[-1] == n - 1
    assert np.all(np.diff(s.boundaries) > 0)
    assert np.ptp(np.diff(s.indices)) <= 1
    phases = list(s.phases())
    assert [p[2] for p in phases[1:]] == [p[3] for p in phases[:-1]]


def test_schedule_errors(friction_traj):
    with pytest.raises(ScheduleError):
        build_schedule(friction_traj, n_intervals=1)
    with pytest.raises(ScheduleError):
        build_schedule(PushTrajectory.from_rows(np.c_[DT * np.arange(3), np.zeros((3, 9))]), n_intervals=4)


def test_zero_plan_stays_put():
    plan = ForcePlan(t=[0.0, 0.5], wrench=np.zeros((2, 3)))
    track = predict_pose([0.1, 0.2, 0.3], plan, zero_models(), P, t_grid=DT * np.arange(200))
    np.testing.assert_array_equal(track.pose, np.tile([0.1, 0.2, 0.3], (200, 1)))


def test_full_cancellation_stays_put():
    plan = ForcePlan(t=[0.0], wrench=[[1.0, -0.5, 0.002]])
    track = predict_pose([0.0, 0.0, 0.0], plan, _models([-1, -1, -1], [0, 0, 0]), P, t_grid=DT * np.arange(100))
    np.testing.assert_allclose(track.pose, 0.0, atol=1e-15)


def test_matches_plant_simulation():
    rng = np.random.default_rng(0)
    wrench = rng.normal(size=(300, 3)) * [1, 1, 0.002]
    beta, eps = np.array([-0.6, -0.4, -0.3]), np.array([0.05, -0.02, 0.0003])
    grid = DT * np.arange(300)
    track = predict_pose([0, 0, 0], ForcePlan(t=grid, wrench=wrench), _models(beta, eps), P, t_grid=grid)
    expected = simulate_plant(wrench * (1 + beta) + eps)
    np.testing.assert_allclose(track.pose, expected, atol=1e-12)


def test_velocity_starts_at_zero():
    start = PlanarState(pos=[0.1, 0.0], vel=[1.0, 1.0], omega=2.0)
    plan = ForcePlan(t=[0.0], wrench=[[0.0, 0.0, 0.0]])
    track = predict_pose(start, plan, zero_models(), P, t_grid=DT * np.arange(10))
    np.testing.assert_array_equal(track.vel[0], 0.0)
    np.testing.assert_array_equal(track.pose[-1], [0.1, 0.0, 0.0])


def test_models_count_checked():
    with pytest.raises(ValueError):
        predict_pose([0, 0, 0], ForcePlan(t=[0.0], wrench=[[0, 0, 0]]), zero_models()[:2], P)


def test_coulomb_force():
    np.testing.assert_allclose(coulomb_force(np.array([0.1, 0.0]), np.zeros(2), 1.4), [-1.4, 0.0])
    np.testing.assert_allclose(coulomb_force(np.zeros(2), np.array([0.5, 0.0]), 1.4), [-0.5, 0.0])
    np.testing.assert_allclose(coulomb_force(np.zeros(2), np.array([3.0, 4.0]), 1.0), [-0.6, -0.8])


def test_simple_predictor_sticks_below_limit():
    limit = 0.14 * P.mass * 9.81
    plan = ForcePlan(t=[0.0], wrench=[[0.9 * limit, 0.0, 0.0]])
    track = predict_simple([0, 0, 0], plan, P, t_grid=DT * np.arange(100))
    np.testing.assert_array_equal(track.pose[:, :2], 0.0)


def test_simple_predictor_slides_above_limit():
    limit = 0.14 * P.mass * 9.81
    plan = ForcePlan(t=[0.0], wrench=[[limit + 1.0, 0.0, 0.0]])
    track = predict_simple([0, 0, 0], plan, P, t_grid=DT * np.arange(251))
    assert track.pose[-1, 0] == pytest.approx(0.5 * 1.0 / P.mass * 1.0**2, rel=1e-9)


def test_simple_predictor_friction_never_reverses():
    grid = DT * np.arange(500)
    wrench = np.zeros((500, 3))
    wrench[:50, 0] = 5.0
    track = predict_simple([0, 0, 0], ForcePlan(t=grid, wrench=wrench), P, t_grid=grid)
    assert np.all(track.vel[:, 0] >= 0)
    assert np.all(np.diff(track.pose[:, 0]) >= 0)
    assert track.vel[-1, 0] == 0.0


@pytest.mark.invariant
def test_phase_continuity(friction_traj):
    result = run_pipeline(friction_traj)
    assert len(result.tracks) == 4
    for track in result.tracks:
        np.testing.assert_array_equal(track.pose[0], friction_traj.pose[track.start_index])
        np.testing.assert_array_equal(track.vel[0], 0.0)


@pytest.mark.invariant
def test_plan_rate_robustness():
    traj = _constant_force_traj()
    models = _models([-0.5, -0.4, -0.3], [0.1, -0.1, 0.0])
    grid = traj.t
    fast = predict_pose([0, 0, 0], subsample_plan(traj, 250.0), models, P, t_grid=grid)
    slow = predict_pose([0, 0, 0], subsample_plan(traj, 10.0), models, P, t_grid=grid)
    np.testing.assert_allclose(slow.pose, fast.pose, rtol=0, atol=1e-9)


@pytest.mark.invariant
def test_nominal_models_coincide():
    rng = np.random.default_rng(2)
    grid = DT * np.arange(400)
    plan = ForcePlan(t=grid, wrench=rng.normal(size=(400, 3)) * [1, 1, 0.002])
    a = predict_pose([0.1, -0.2, 0.3], plan, zero_models(), P, t_grid=grid)
    b = predict_simple([0.1, -0.2, 0.3], plan, P, mu=0.0, t_grid=grid)
    np.testing.assert_allclose(a.pose, b.pose, rtol=0, atol=1e-12)


@pytest.mark.invariant
def test_moment_arm_term():
    tip, f = np.array([-0.05, 0.01]), np.array([0.8, -0.3])
    traj = _constant_force_traj(n=251, f=f, tip=tip)
    plan = subsample_plan(traj, 10.0)
    arm = moment_arm_torque(tip, [0.0, 0.0], f)
    assert arm != 0.0
    stripped = ForcePlan(t=plan.t, wrench=plan.wrench - [0.0, 0.0, arm])
    with_arm = predict_pose([0, 0, 0], plan, zero_models(), P, t_grid=traj.t)
    without = predict_pose([0, 0, 0], stripped, zero_models(), P, t_grid=traj.t)
    dtheta_acc = np.diff(with_arm.vel[:, 2] - without.vel[:, 2]) / DT
    np.testing.assert_allclose(dtheta_acc, arm / P.inertia, rtol=1e-9)


def test_pipeline_defaults_and_outputs(friction_traj):
    result = run_pipeline(friction_traj, PipelineConfig())
    assert {t.phase_index for t in result.tracks} == {1, 3}
    assert set(result.models) == {1, 3}
    assert {r.algorithm for r in result.report.rows} == {"proposed", "simple"}
    for track in result.tracks:
        j = track.phase_index
        i0, i1 = result.schedule.indices[j], result.schedule.indices[j + 1]
        assert track.start_index == i0
        np.testing.assert_array_equal(track.t, friction_traj.t[i0 : i1 + 1])


def test_pipeline_rejects_short_trajectory():
    rows = np.zeros((50, 10))
    rows[:, 0] = DT * np.arange(50)
    with pytest.raises(ValueError, match="100"):
        run_pipeline(PushTrajectory.from_rows(rows))


def test_noiseless_prediction_submillimetre(friction_traj_clean):
    """Without measurement noise the identified dynamics predict to within 1 mm."""
    result = run_pipeline(friction_traj_clean)
    for row in result.report.rows:
        if row.algorithm == "proposed":
            assert max(row.mean_abs_err_x, row.mean_abs_err_y) < 1e-3, row


def test_push_pose_predictor(friction_traj_clean):
    traj = friction_traj_clean
    u, pose = traj.applied_wrench(), traj.pose
    half = len(traj) // 2
    est = PushPosePredictor().fit(u[:half], pose[:half])
    assert est.coef_.shape == (3,) and est.intercept_.shape == (3,)
    np.testing.assert_array_equal(est.last_pose_, pose[half - 1])
    pred = est.predict(u[half - 1 : half + 250])
    assert pred.shape == (251, 3)
    assert np.abs(pred[:, :2] - pose[half - 1 : half + 250, :2]).mean() < 5e-3
    base = SimpleFrictionPredictor().fit(u[:half], pose[:half]).predict(u[half - 1 : half + 250])
    assert base.shape == pred.shape
