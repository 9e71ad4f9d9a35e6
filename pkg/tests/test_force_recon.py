import numpy as np
import pytest

from conftest import simulate_plant
from pushdob.data import PushTrajectory
from pushdob.dynamics import ObjectParams
from pushdob.force_recon import (
    GainFailureError,
    PidForceReconstructor,
    PidGains,
    derivative_of_error,
    reconstruct,
    track_pose,
)

DT = 1 / 250
P = ObjectParams()
INERTIA = np.array([P.mass, P.mass, P.inertia])


def _traj_from_pose(pose, force=None):
    n = len(pose)
    rows = np.zeros((n, 10))
    rows[:, 0] = DT * np.arange(n)
    rows[:, 4:7] = pose
    if force is not None:
        rows[:, 7:9] = force
    return PushTrajectory.from_rows(rows)


def test_default_gains():
    assert PidGains() == PidGains(46.6, 34.6, 15.4, 117.2, 137.8, 24.5)
    with pytest.raises(ValueError):
        PidGains(kp=-1.0)


def test_derivative_examples():
    np.testing.assert_array_equal(derivative_of_error(np.full(10, 3.0), DT), np.zeros(10))
    d = derivative_of_error(2.0 * DT * np.arange(20), DT)
    assert d[0] == 0.0
    np.testing.assert_allclose(d[1:], 2.0, rtol=1e-12)
    with pytest.raises(ValueError):
        derivative_of_error([1.0], DT)


def test_derivative_of_sine():
    t = DT * np.arange(250)
    d = derivative_of_error(np.sin(2 * np.pi * t), DT)
    assert np.abs(d[1:] - 2 * np.pi * np.cos(2 * np.pi * t[1:])).max() < 1e-3


def test_derivative_of_sine_midpoint():
    """The backward difference is second-order accurate at the interval midpoint."""
    t = DT * np.arange(250)
    d = derivative_of_error(np.sin(2 * np.pi * t), DT)
    mid = t[1:] - DT / 2
    assert np.abs(d[1:] - 2 * np.pi * np.cos(2 * np.pi * mid)).max() < 1e-3


def test_constant_wrench_recovered():
    w = np.array([0.6, -0.4, 0.002])
    n = int(3 / DT)
    pose = simulate_plant(np.tile(w, (n, 1)))
    res = reconstruct(_traj_from_pose(pose))
    late = res.total[int(1 / DT) : -1]
    rmse = np.sqrt(np.mean((late - w) ** 2, axis=0))
    assert np.all(rmse < 0.05 * np.abs(w))
    assert res.tracking_rmse_pos >= 0 and res.tracking_rmse_theta >= 0
    assert len(res.f_total) == n


def test_stationary_object_zero_force():
    res = reconstruct(_traj_from_pose(np.tile([0.1, 0.2, 0.3], (300, 1))))
    np.testing.assert_allclose(res.total, 0.0, atol=1e-12)
    np.testing.assert_allclose(res.unknown, 0.0, atol=1e-12)


def test_unknown_is_total_minus_applied(friction_traj_clean):
    res = reconstruct(friction_traj_clean)
    np.testing.assert_allclose(res.unknown, res.total - friction_traj_clean.applied_wrench(), atol=1e-12)


def test_synthetic_friction_recovered(friction_traj_clean):
    res = reconstruct(friction_traj_clean)
    truth = friction_traj_clean.disturbance_truth
    sl = slice(int(1 / DT), -1)
    err = np.abs(res.unknown[sl, :2] - truth[sl, :2])
    assert err.max() < 0.05 * np.abs(truth[:, :2]).max()
    assert res.tracking_rmse_pos < 2e-3


def test_divergence_raises():
    pose = np.zeros((50, 3))
    pose[25:, 0] = 10.0
    with pytest.raises(GainFailureError, match="sample"):
        track_pose(pose, PidGains(), INERTIA, DT, max_error=np.array([1.0, 1.0, np.inf]))


@pytest.mark.invariant
def test_closed_loop_bounded():
    rng = np.random.default_rng(0)
    n = int(20 / DT)
    t = DT * np.arange(n)
    pose = np.column_stack(
        [0.05 * np.sin(0.7 * t), 0.03 * np.cos(1.3 * t), 0.4 * np.sin(0.5 * t)]
    ) + rng.normal(scale=[1e-4, 1e-4, 1e-3], size=(n, 3))
    _, sim = track_pose(pose, PidGains(), INERTIA, DT)
    assert np.abs(pose[:, :2] - sim[:, :2]).max() < 0.1


@pytest.mark.invariant
@pytest.mark.parametrize("c", [-2.0, 0.3, 5.0])
def test_superposition(c):
    rng = np.random.default_rng(1)
    pose = np.cumsum(rng.normal(scale=1e-4, size=(400, 3)), axis=0)
    e1, _ = track_pose(pose, PidGains(), INERTIA, DT)
    e2, _ = track_pose(c * pose, PidGains(), INERTIA, DT)
    np.testing.assert_allclose(e2, c * e1, rtol=1e-9, atol=1e-9 * np.abs(c * e1).max())


def test_transformer_interface():
    w = np.array([0.5, 0.2, 0.001])
    pose = simulate_plant(np.tile(w, (600, 1)))
    effort = PidForceReconstructor().fit().transform(pose)
    np.testing.assert_allclose(effort, track_pose(pose, PidGains(), INERTIA, DT)[0])
