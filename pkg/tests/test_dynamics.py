import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pushdob.dynamics import (
    IntegrationDivergedError,
    ObjectParams,
    PlanarState,
    Wrench,
    accel_from_wrench,
    integrate_step,
    moment_arm_torque,
    rotate,
    rotation_matrix,
    simulate,
    states_to_arrays,
)

angles = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


def test_rotation_identity_and_quarter_turn():
    np.testing.assert_array_equal(rotation_matrix(0.0), np.eye(2))
    np.testing.assert_allclose(rotation_matrix(np.pi / 2) @ [1.0, 0.0], [0.0, 1.0], atol=1e-15)


@given(angles)
def test_rotation_orthogonal(a):
    m = rotation_matrix(a)
    np.testing.assert_allclose(m.T @ m, np.eye(2), atol=1e-12)
    assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.invariant
def test_rotation_inverse_random():
    rng = np.random.default_rng(0)
    for a in rng.uniform(-10, 10, 100):
        np.testing.assert_allclose(rotation_matrix(a) @ rotation_matrix(-a), np.eye(2), atol=1e-12)


def test_rotate_vectorised_matches_matrix():
    rng = np.random.default_rng(1)
    v = rng.normal(size=(20, 2))
    a = rng.uniform(-3, 3, 20)
    expected = np.array([rotation_matrix(ai) @ vi for ai, vi in zip(a, v)])
    np.testing.assert_allclose(rotate(v, a), expected, atol=1e-14)


def test_accel_from_wrench_examples():
    p = ObjectParams()
    acc, alpha = accel_from_wrench(Wrench([1.045, 0.0], 0.0), p)
    np.testing.assert_allclose(acc, [1.0, 0.0])
    assert alpha == 0.0
    _, alpha = accel_from_wrench(Wrench([0.0, 0.0], 0.0018), p)
    assert alpha == pytest.approx(1.0)
    acc, alpha = accel_from_wrench(Wrench(), p)
    assert np.all(acc == 0) and alpha == 0


@pytest.mark.invariant
def test_doubling_mass_halves_acceleration():
    w = Wrench([0.7, -1.3], 0.01)
    a1, al1 = accel_from_wrench(w, ObjectParams(mass=1.0, inertia=0.002))
    a2, al2 = accel_from_wrench(w, ObjectParams(mass=2.0, inertia=0.004))
    np.testing.assert_array_equal(a1, 2 * a2)
    assert al1 == 2 * al2


def test_moment_arm_examples():
    assert moment_arm_torque([1.0, 0.0], [0.0, 0.0], [0.0, 1.0]) == 1.0
    assert moment_arm_torque([0.3, 0.2], [0.3, 0.2], [5.0, -2.0]) == 0.0
    assert moment_arm_torque([0.05, 0.02], [0.0, 0.0], [2.0, -1.0]) == pytest.approx(-0.09, abs=1e-15)


def test_zero_wrench_is_equilibrium():
    s = PlanarState(pos=[0.1, -0.2], theta=0.3)
    s2 = integrate_step(s, lambda t: Wrench(), ObjectParams(), 0.0, 0.004)
    np.testing.assert_array_equal(s2.pose(), s.pose())
    np.testing.assert_array_equal(s2.vel, [0, 0])


@pytest.mark.invariant
def test_constant_wrench_quadratic():
    p = ObjectParams()
    f = np.array([0.8, -0.25])
    tau = 0.003
    n = 250
    states = simulate(PlanarState(), np.tile([f[0], f[1], tau], (n, 1)), p, dt=0.004)
    pose, vel = states_to_arrays(states)
    t = 0.004 * n
    np.testing.assert_allclose(pose[-1, :2], 0.5 * f / p.mass * t**2, rtol=1e-10)
    assert pose[-1, 2] == pytest.approx(0.5 * tau / p.inertia * t**2, rel=1e-10)
    np.testing.assert_allclose(vel[-1, :2], f / p.mass * t, rtol=1e-10)


def test_integrate_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        integrate_step(PlanarState(), lambda t: Wrench(), ObjectParams(), 0.0, 0.0)


def test_integrate_step_divergence():
    p = ObjectParams(mass=1e-300, inertia=1e-300)
    with pytest.raises(IntegrationDivergedError):
        with np.errstate(over="ignore", invalid="ignore"):
            integrate_step(PlanarState(), lambda t: Wrench([1e300, 0.0], 0.0), p, 0.0, 0.004)


def test_wrench_is_sampled_once_per_step():
    calls = []

    def fn(t):
        calls.append(t)
        return Wrench([1.0, 0.0], 0.0)

    integrate_step(PlanarState(), fn, ObjectParams(), 0.5, 0.004)
    assert calls == [0.5]


@pytest.mark.parametrize("field", ["mass", "inertia", "width", "length"])
def test_object_params_positive(field):
    with pytest.raises(ValueError):
        ObjectParams(**{field: 0.0})


def test_object_params_json_round_trip(tmp_path):
    p = ObjectParams(mass=2.0, inertia=0.01)
    p.to_json(tmp_path / "p.json")
    assert ObjectParams.from_json(tmp_path / "p.json") == p
    assert ObjectParams().to_dict() == {"mass": 1.045, "inertia": 0.0018, "width": 0.090, "length": 0.1125}


def test_non_finite_state_rejected():
    with pytest.raises(ValueError):
        PlanarState(pos=[np.nan, 0.0])
    with pytest.raises(ValueError):
        Wrench([0.0, np.inf], 0.0)
