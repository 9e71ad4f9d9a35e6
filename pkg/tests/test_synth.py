import numpy as np
import pytest

from conftest import simulate_plant
from pushdob.data import PushTrajectory, load_trajectory, save_trajectory
from pushdob.observer import realize_filters, run
from pushdob.synth import SynthScenario, generate, kinematic_plan, save_truth, stroke_profile

DT = 1 / 250


def test_zero_law_constant_force_is_quadratic():
    s = SynthScenario(true_beta=(0, 0, 0), true_epsilon=(0, 0, 0), acceleration=0.2, angular_acceleration=6.0, duration=1.0, stroke_duration=1.0, duty=1.0).noiseless()
    traj = generate(s)
    u = traj.applied_wrench()
    np.testing.assert_allclose(traj.pose, simulate_plant(u), rtol=1e-10, atol=1e-15)


def test_cruise_is_linear():
    # cruise phase of a long stroke: zero acceleration, so the pose is linear there
    s = SynthScenario(stroke_duration=20.0, duty=1.0, duration=5.0).noiseless()
    traj = generate(s)
    ramp_end = int(round(3 * s.speed / s.acceleration / DT)) + 2
    x = traj.pose[ramp_end:, 0]
    np.testing.assert_allclose(np.diff(x, 2), 0.0, atol=1e-14)


@pytest.mark.invariant
def test_truth_is_linear_law():
    s = SynthScenario()
    clean = generate(s.noiseless())
    expected = np.array(s.true_beta) * clean.applied_wrench() + np.array(s.true_epsilon)
    np.testing.assert_allclose(clean.disturbance_truth, expected, rtol=0, atol=1e-15)


@pytest.mark.invariant
def test_seed_determinism(tmp_path):
    a = generate(SynthScenario(seed=7, duration=2.0))
    b = generate(SynthScenario(seed=7, duration=2.0))
    save_trajectory(a, tmp_path / "a.csv")
    save_trajectory(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    c = generate(SynthScenario(seed=8, duration=2.0))
    assert not np.array_equal(a.pose, c.pose)


@pytest.mark.invariant
def test_noise_free_passes_schema(tmp_path, friction_traj_clean):
    save_trajectory(friction_traj_clean, tmp_path / "s.csv")
    back = load_trajectory(tmp_path / "s.csv")
    assert len(back) == len(friction_traj_clean)
    assert isinstance(back, PushTrajectory)


def test_observer_agrees_with_truth(friction_traj_clean):
    traj = friction_traj_clean
    d_hat = run(realize_filters(), traj.applied_wrench(), traj.pose)
    truth = traj.disturbance_truth
    k = int(0.1 / DT)
    err = np.abs(d_hat[k:] - truth[k:]).max(axis=0)
    assert np.all(err <= 0.02 * np.abs(truth).max(axis=0)), err


def test_stroke_profile_reaches_speed():
    t = np.arange(0, 5, DT) + DT / 2
    a = stroke_profile(t, 0.05, 0.05, 5.0, 0.8)
    v = np.cumsum(a) * DT
    assert v.max() == pytest.approx(0.05, rel=1e-3)
    assert abs(v[-1]) < 1e-3
    assert np.all(v >= -1e-12)


def test_alternate_flips_direction():
    s = SynthScenario.rich_excitation(duration=2.0, stroke_duration=1.0)
    acc = kinematic_plan(s, int(2.0 / DT))
    n = int(s.stroke_duration / DT)
    np.testing.assert_allclose(acc[n : 2 * n, 0], -acc[:n, 0], atol=1e-12)


@pytest.mark.parametrize(
    "kw",
    [
        dict(duration=0.0),
        dict(noise_sigma_pos=-1.0),
        dict(duty=0.0),
        dict(true_beta=(-1.0, 0.0, 0.0)),
        dict(true_beta=(0.0, 0.0)),
        dict(speed=0.5, acceleration=0.1),
    ],
)
def test_scenario_validation(kw):
    with pytest.raises(ValueError):
        SynthScenario(**kw)


def test_table_case_presets():
    s = SynthScenario.from_table_case(4)
    assert s.speed == 0.05 and s.acceleration == pytest.approx(0.1) and s.case_id == "case4"
    assert SynthScenario.from_table_case(1).speed == 0.01
    assert SynthScenario.from_table_case(5).heading == pytest.approx(np.pi)


def test_mass_scale_changes_true_plant():
    s = SynthScenario(duration=2.0).noiseless()
    a = generate(s)
    b = generate(SynthScenario(duration=2.0, mass_scale=2.0).noiseless())
    np.testing.assert_allclose(b.pose, a.pose, atol=1e-12)
    np.testing.assert_allclose(b.applied_wrench()[:, :2], 2 * a.applied_wrench()[:, :2] + np.array(s.true_epsilon[:2]) / (1 + np.array(s.true_beta[:2])), atol=1e-9)


def test_save_truth(tmp_path, friction_traj):
    save_truth(friction_traj, tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,d_fx,d_fy,d_tau"
    assert len(lines) == len(friction_traj) + 1
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)[:, 1:], friction_traj.disturbance_truth)
