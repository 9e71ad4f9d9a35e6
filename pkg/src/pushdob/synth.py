"""Synthetic pushes with a known linear disturbance law.

The object follows scripted rest-to-rest strokes (trapezoidal speed
profile). The pusher wrench that realises them under the true law
``d = beta * u + eps`` is solved for per sample, the dynamics are integrated
with the shared RK4 integrator, and Gaussian noise is added to what a
sensor would record. The injected disturbance is kept as ground truth.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .data import PushTrajectory
from .dynamics import ObjectParams, PlanarState, Wrench, integrate_step, moment_arm_torque, rotate
from .validation import check_nonnegative, check_positive

#: Reference pusher profiles: case -> (acceleration m/s^2, velocity m/s).
REFERENCE_CASES = {
    1: (0.0, 0.01),
    2: (0.0, 0.01),
    3: (0.0, 0.01),
    4: (0.0, 0.05),
    5: (0.2, -0.001),
    6: (2.5, -0.001),
}


@dataclass(frozen=True)
class SynthScenario:
    """Scripted push with a per-channel linear disturbance law.

    The defaults describe a friction-dominated push on a surface grippier
    than the table average: about 3 N of pushing at cruise is cancelled by
    the disturbance. :meth:`rich_excitation` gives quick back-and-forth
    strokes that make ``beta`` identifiable.
    """

    true_beta: tuple = (-0.5, -0.5, -0.5)
    true_epsilon: tuple = (-1.06, -1.06, -0.001)
    speed: float = 0.05
    acceleration: float = 0.05
    heading: float = np.pi / 4
    angular_speed: float = 0.5
    angular_acceleration: float = 0.5
    stroke_duration: float = 5.0
    duty: float = 0.8
    duration: float = 20.0
    sample_rate: float = 250.0
    noise_sigma_pos: float = 1e-4
    noise_sigma_theta: float = 1e-3
    noise_sigma_force: float = 0.01
    noise_sigma_torque: float = 5e-4
    alternate: bool = False
    mass_scale: float = 1.0
    tip_theta: float = 0.0
    seed: int = 0
    case_id: str = "synth"

    def __post_init__(self):
        beta = tuple(float(b) for b in self.true_beta)
        eps = tuple(float(e) for e in self.true_epsilon)
        if len(beta) != 3 or len(eps) != 3:
            raise ValueError("true_beta and true_epsilon need one value per channel")
        if any(abs(1.0 + b) < 1e-9 for b in beta):
            raise ValueError("beta = -1 leaves no net input; the stroke cannot be scripted")
        object.__setattr__(self, "true_beta", beta)
        object.__setattr__(self, "true_epsilon", eps)
        check_positive(self.duration, "duration")
        check_positive(self.sample_rate, "sample_rate")
        check_positive(self.stroke_duration, "stroke_duration")
        check_positive(self.mass_scale, "mass_scale")
        for name in (
            "speed",
            "acceleration",
            "angular_speed",
            "angular_acceleration",
            "noise_sigma_pos",
            "noise_sigma_theta",
            "noise_sigma_force",
            "noise_sigma_torque",
        ):
            check_nonnegative(getattr(self, name), name)
        if not 0 < self.duty <= 1:
            raise ValueError(f"duty must lie in (0, 1], got {self.duty}")
        for v, a, what in (
            (self.speed, self.acceleration, "translation"),
            (self.angular_speed, self.angular_acceleration, "rotation"),
        ):
            if v > 0 and a == 0:
                raise ValueError(f"{what}: a non-zero speed needs a non-zero ramp acceleration")
            if v > 0 and 3 * v / a > self.duty * self.stroke_duration + 1e-12:
                raise ValueError(f"{what}: ramps do not fit in the moving part of a stroke")

    @classmethod
    def from_table_case(cls, case, ramp_time=0.5, **overrides):
        """Scenario shaped like one of the six reference cases; zero acceleration means constant speed with short ramps."""
        accel, velocity = REFERENCE_CASES[case]
        speed = abs(velocity)
        ramp = accel if accel > 0 else speed / ramp_time
        kw = dict(speed=speed, acceleration=ramp, heading=np.pi if velocity < 0 else 0.0)
        kw["case_id"] = f"case{case}"
        kw.update(overrides)
        return cls(**kw)

    @classmethod
    def rich_excitation(cls, **overrides):
        """Back-and-forth 1.25 s strokes with strong force variation."""
        kw = dict(
            true_beta=(-0.9, -0.85, -0.7),
            true_epsilon=(0.05, -0.02, 0.001),
            speed=0.05,
            acceleration=0.2,
            angular_speed=1.5,
            angular_acceleration=6.0,
            stroke_duration=1.25,
            duty=1.0,
            alternate=True,
            case_id="rich",
        )
        kw.update(overrides)
        return cls(**kw)

    def noiseless(self):
        return replace(
            self, noise_sigma_pos=0.0, noise_sigma_theta=0.0, noise_sigma_force=0.0, noise_sigma_torque=0.0
        )


def stroke_profile(t, speed, accel, stroke, duty):
    """Signed acceleration of a rest-to-rest stroke repeated every ``stroke`` s.

    Speed-up and slow-down are trapezoidal pulses peaking at ``accel``; each
    ramps in and out over half of ``speed / accel`` so the force is
    continuous. The stroke coasts at ``speed`` in between and rests for the
    final ``1 - duty`` of the period.
    """
    t = np.asarray(t, dtype=float)
    if speed == 0:
        return np.zeros_like(t)
    ramp = 0.5 * speed / accel
    pulse = 3.0 * ramp
    moving = duty * stroke
    tau = np.mod(t, stroke)
    out = _trapezoid(tau, ramp, pulse) - _trapezoid(tau - (moving - pulse), ramp, pulse)
    return accel * out


def _trapezoid(tau, ramp, pulse):
    up = np.clip(tau / ramp, 0.0, 1.0)
    down = np.clip((pulse - tau) / ramp, 0.0, 1.0)
    return np.where((tau > 0) & (tau < pulse), np.minimum(up, down), 0.0)


def kinematic_plan(s, n):
    """Per-sample accelerations ``(n, 3)`` held over each sample interval."""
    dt = 1.0 / s.sample_rate
    t_mid = (np.arange(n) + 0.5) * dt
    lin = stroke_profile(t_mid, s.speed, s.acceleration, s.stroke_duration, s.duty)
    if s.alternate:
        lin = lin * np.where(np.mod(np.floor(t_mid / s.stroke_duration), 2) == 0, 1.0, -1.0)
    ang = stroke_profile(t_mid, s.angular_speed, s.angular_acceleration, s.stroke_duration, s.duty)
    ang = ang * np.where(np.mod(np.floor(t_mid / s.stroke_duration), 2) == 0, 1.0, -1.0)
    heading = np.array([np.cos(s.heading), np.sin(s.heading)])
    return np.column_stack([lin * heading[0], lin * heading[1], ang])


def generate(s=None, p=None):
    """Integrate the scenario and return a noisy trajectory with ground truth attached."""
    s = SynthScenario() if s is None else s
    p = ObjectParams() if p is None else p
    dt = 1.0 / s.sample_rate
    n = int(round(s.duration * s.sample_rate)) + 1
    true_params = ObjectParams(
        mass=p.mass * s.mass_scale, inertia=p.inertia * s.mass_scale, width=p.width, length=p.length
    )
    inertia = np.array([true_params.mass, true_params.mass, true_params.inertia])
    beta = np.array(s.true_beta)
    eps = np.array(s.true_epsilon)
    accel = kinematic_plan(s, n)
    contact_body = np.array([-p.length / 2.0, 0.0])

    pose = np.empty((n, 3))
    applied = np.empty((n, 3))  # [fx, fy, T_C + r_m x f] actually exerted
    tip_torque = np.empty(n)
    tip_pos = np.empty((n, 2))
    state = PlanarState()
    for k in range(n):
        pose[k] = state.pose()
        u = (inertia * accel[k] - eps) / (1.0 + beta)
        r_m = rotate(contact_body, state.theta)
        tip_pos[k] = state.pos + r_m
        f = u[:2]
        tip_torque[k] = u[2] - moment_arm_torque(tip_pos[k], state.pos, f)
        applied[k] = u
        total = u + beta * u + eps
        w = Wrench(force=total[:2], torque=total[2])
        if k < n - 1:
            state = integrate_step(state, lambda _t, w=w: w, true_params, k * dt, dt)
    truth = beta * applied + eps

    rng = np.random.default_rng(s.seed)
    t = np.arange(n) * dt
    obj_pos = pose[:, :2] + rng.normal(0.0, s.noise_sigma_pos, (n, 2))
    obj_theta = pose[:, 2] + rng.normal(0.0, s.noise_sigma_theta, n)
    tip_meas = tip_pos + rng.normal(0.0, s.noise_sigma_pos, (n, 2))
    force_meas = applied[:, :2] + rng.normal(0.0, s.noise_sigma_force, (n, 2))
    torque_meas = tip_torque + rng.normal(0.0, s.noise_sigma_torque, n)
    tip_theta = np.full(n, float(s.tip_theta))
    return PushTrajectory(
        t=t,
        tip_pos_rbt=rotate(tip_meas, -tip_theta),
        tip_theta=tip_theta,
        obj_pos=obj_pos,
        obj_theta=obj_theta,
        tip_force_rbt=rotate(force_meas, -tip_theta),
        tip_torque=torque_meas,
        sample_rate=s.sample_rate,
        params=p,
        case_id=s.case_id,
        disturbance_truth=truth,
    )


def save_truth(traj, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "d_fx", "d_fy", "d_tau"))
        for tk, d in zip(traj.t, traj.disturbance_truth):
            w.writerow([repr(float(tk))] + [repr(float(v)) for v in d])
