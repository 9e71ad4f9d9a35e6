"""Total force/torque reconstruction by PID tracking of the measured pose.

A simulated copy of the object (nominal mass and inertia) is driven by one
PID controller per axis so that it follows the measured pose. The control
effort is the total wrench that must have acted on the object; subtracting
the applied wrench leaves the unknown (friction) part. The result is only
used as an independent reference for the disturbance observer.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dynamics import DEFAULT_DT, ObjectParams
from .validation import check_channels, check_nonnegative, check_positive

#: Tracking error beyond this multiple of the object length means the gains failed.
DIVERGENCE_FACTOR = 10.0


class GainFailureError(RuntimeError):
    """The PID tracker diverged from the measured trajectory."""


@dataclass(frozen=True)
class PidGains:
    kp: float = 46.6
    ki: float = 34.6
    kd: float = 15.4
    lp: float = 117.2
    li: float = 137.8
    ld: float = 24.5

    def __post_init__(self):
        for name in ("kp", "ki", "kd", "lp", "li", "ld"):
            check_nonnegative(getattr(self, name), name)

    def per_axis(self):
        """``(3, 3)`` array of ``[p, i, d]`` rows for x, y, theta."""
        lin = [self.kp, self.ki, self.kd]
        rot = [self.lp, self.li, self.ld]
        return np.array([lin, lin, rot])


@dataclass(frozen=True, eq=False)
class ReconResult:
    f_total: np.ndarray  # (n, 2)
    t_total: np.ndarray  # (n,)
    f_frt: np.ndarray  # (n, 2)
    t_frt: np.ndarray  # (n,)
    tracking_rmse_pos: float
    tracking_rmse_theta: float
    sim_pose: np.ndarray  # (n, 3)

    @property
    def total(self):
        return np.column_stack([self.f_total, self.t_total])

    @property
    def unknown(self):
        return np.column_stack([self.f_frt, self.t_frt])


def derivative_of_error(e, dt):
    """Backward difference with a zero first element."""
    e = np.asarray(e, dtype=float)
    if len(e) < 2:
        raise ValueError("need at least two samples to differentiate")
    out = np.zeros_like(e)
    out[1:] = (e[1:] - e[:-1]) / dt
    return out


def track_pose(pose, gains, inertia, dt, max_error=np.inf):
    """Run the three PID trackers over a measured ``(n, 3)`` pose.

    ``inertia`` is ``[m, m, I]``. Returns ``(effort (n, 3), sim_pose (n, 3))``;
    ``effort[k]`` is held over ``[t_k, t_k+1)`` and the last row repeats the
    one before it. The integral is trapezoidal and the derivative a backward
    difference, both evaluated at the end of the step: the effort is solved
    for implicitly, since the rotational gains make an explicit update
    unstable at millisecond steps. The simulated body advances exactly over
    each step under the held effort.
    """
    pose = np.asarray(pose, dtype=float)
    n = len(pose)
    g = gains.per_axis()
    kp, ki, kd = g[:, 0], g[:, 1], g[:, 2]
    c = 0.5 * dt**2 / inertia
    gain = kp + 0.5 * ki * dt + kd / dt
    pos = pose[0].copy()
    vel = np.zeros(3)
    integ = np.zeros(3)
    e = np.zeros(3)
    effort = np.empty((n, 3))
    sim = np.empty((n, 3))
    sim[0] = pos
    for k in range(n - 1):
        # e_next = r - c * u, linear in the effort u of this step
        r = pose[k + 1] - pos - vel * dt
        h = ki * (integ + 0.5 * dt * e) - kd * e / dt
        u = (gain * r + h) / (1.0 + gain * c)
        e_next = r - c * u
        if np.any(np.abs(e_next) > max_error) or not np.all(np.isfinite(e_next)):
            raise GainFailureError(
                f"PID tracker diverged at sample {k + 1}: |error| = {np.abs(e_next).max():.3g}"
            )
        integ = integ + 0.5 * dt * (e + e_next)
        acc = u / inertia
        # RK4 on a double integrator with held input reduces to this update
        pos = pos + vel * dt + 0.5 * acc * dt**2
        vel = vel + acc * dt
        e = e_next
        effort[k] = u
        sim[k + 1] = pos
    effort[n - 1] = effort[n - 2] if n > 1 else 0.0
    return effort, sim


def reconstruct(traj, gains=None):
    """Total and unknown wrench of a trajectory via PID tracking."""
    gains = PidGains() if gains is None else gains
    p = traj.params
    pose = traj.pose
    inertia = np.array([p.mass, p.mass, p.inertia])
    limit = DIVERGENCE_FACTOR * p.length
    max_err = np.array([limit, limit, np.inf])
    effort, sim = track_pose(pose, gains, inertia, traj.dt, max_error=max_err)
    applied = traj.applied_wrench()
    unknown = effort - applied
    err = pose - sim
    return ReconResult(
        f_total=effort[:, :2],
        t_total=effort[:, 2],
        f_frt=unknown[:, :2],
        t_frt=unknown[:, 2],
        tracking_rmse_pos=float(np.sqrt(np.mean(np.sum(err[:, :2] ** 2, axis=1)))),
        tracking_rmse_theta=float(np.sqrt(np.mean(err[:, 2] ** 2))),
        sim_pose=sim,
    )


class PidForceReconstructor(TransformerMixin, BaseEstimator):
    """Transformer from a measured ``(n, 3)`` pose to the ``(n, 3)`` total wrench."""

    def __init__(
        self,
        kp=46.6,
        ki=34.6,
        kd=15.4,
        lp=117.2,
        li=137.8,
        ld=24.5,
        mass=1.045,
        inertia=0.0018,
        dt=DEFAULT_DT,
    ):
        self.kp = kp
        self.ki = ki
        self.kd = kd
        self.lp = lp
        self.li = li
        self.ld = ld
        self.mass = mass
        self.inertia = inertia
        self.dt = dt

    def fit(self, X=None, y=None):
        self.gains_ = PidGains(self.kp, self.ki, self.kd, self.lp, self.li, self.ld)
        self.params_ = ObjectParams(mass=self.mass, inertia=self.inertia)
        check_positive(self.dt, "dt")
        return self

    def transform(self, X):
        check_is_fitted(self, "gains_")
        X = check_channels(X, name="pose", min_samples=2)
        inertia = np.array([self.mass, self.mass, self.inertia])
        effort, self.sim_pose_ = track_pose(X, self.gains_, inertia, self.dt)
        return effort
