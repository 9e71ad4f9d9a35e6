"""Phase scheduling, pose prediction under the identified law, and the friction baseline."""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import ForcePlan, subsample_plan
from .dynamics import DEFAULT_DT, ObjectParams, PlanarState, Wrench, integrate_step
from .identify import ChannelRLS, CHANNELS, identify_channels, zero_models
from .observer import QFilterParams, realize_filters, reset as reset_observer, run as run_observer
from .validation import check_channels, check_nonnegative

GRAVITY = 9.81
#: Below this speed (m/s) the baseline treats the object as possibly sticking.
STICK_SPEED = 1e-6
#: Shortest trajectory the full pipeline accepts.
MIN_PIPELINE_SAMPLES = 100

PROPOSED = "proposed"
SIMPLE = "simple"


class ScheduleError(ValueError):
    """The trajectory cannot be split into the requested phases."""


@dataclass(frozen=True, eq=False)
class PhaseSchedule:
    boundaries: np.ndarray  # times, n_intervals + 1
    indices: np.ndarray  # sample indices of the boundaries
    kinds: tuple

    def phases(self):
        """Yield ``(phase_number, kind, first_index, last_index)``; boundaries are shared."""
        for j, kind in enumerate(self.kinds):
            yield j, kind, int(self.indices[j]), int(self.indices[j + 1])


def build_schedule(traj, n_intervals=4):
    """Equal intervals alternating identify / predict, starting with identify."""
    n = len(traj)
    if n_intervals < 2:
        raise ScheduleError("at least one identification and one prediction interval are needed")
    if n < max(4, n_intervals + 1):
        raise ScheduleError(f"{n} samples are too few for {n_intervals} intervals")
    indices = np.round(np.linspace(0, n - 1, n_intervals + 1)).astype(int)
    kinds = tuple("identify" if j % 2 == 0 else "predict" for j in range(n_intervals))
    return PhaseSchedule(boundaries=traj.t[indices], indices=indices, kinds=kinds)


@dataclass(frozen=True, eq=False)
class PredictedTrack:
    t: np.ndarray
    pose: np.ndarray  # (n, 3)
    vel: np.ndarray  # (n, 3)
    phase_index: int = 0
    algorithm: str = PROPOSED
    start_index: int = 0

    def __len__(self):
        return len(self.t)

    @property
    def states(self):
        return [
            PlanarState(pos=p[:2], theta=p[2], vel=v[:2], omega=v[2]) for p, v in zip(self.pose, self.vel)
        ]


def _start_state(start):
    if isinstance(start, PlanarState):
        return PlanarState(pos=start.pos, theta=start.theta)
    start = np.asarray(start, dtype=float).reshape(3)
    return PlanarState(pos=start[:2], theta=start[2])


def _grid(plan, t_grid, dt):
    if t_grid is None:
        n = int(round((plan.t[-1] - plan.t[0]) / dt)) + 1
        t_grid = plan.t[0] + dt * np.arange(n)
    return np.asarray(t_grid, dtype=float)


def _integrate(start, held, grid, p, wrench_of, post_step=None):
    s = _start_state(start) if not isinstance(start, PlanarState) else start
    pose = np.empty((len(grid), 3))
    vel = np.empty((len(grid), 3))
    for k in range(len(grid)):
        pose[k] = s.pose()
        vel[k] = [s.vel[0], s.vel[1], s.omega]
        if k == len(grid) - 1:
            break
        w = wrench_of(s, held[k])
        h = grid[k + 1] - grid[k]
        s_next = integrate_step(s, lambda _t, w=w: w, p, grid[k], h)
        if post_step is not None:
            s_next = post_step(s, s_next, held[k], h)
        s = s_next
    return pose, vel


def predict_pose(start, plan, models, p, t_grid=None, dt=DEFAULT_DT, phase_index=0, start_index=0):
    """Integrate ``m a = f_plan + diag(beta) f_plan + eps`` (and its torque twin).

    ``start`` is a ``PlanarState`` or ``[x, y, theta]``; velocities always
    start at zero. ``models`` are the three ``LinearModel`` (fx, fy, tau).
    """
    if len(models) != 3:
        raise ValueError("need one model per channel (fx, fy, tau)")
    grid = _grid(plan, t_grid, dt)
    held = plan.hold(grid)
    beta = np.array([m.beta for m in models])
    eps = np.array([m.epsilon for m in models])

    def wrench_of(_s, u):
        total = u + beta * u + eps
        return Wrench(force=total[:2], torque=total[2])

    pose, vel = _integrate(_start_state(start), held, grid, p, wrench_of)
    return PredictedTrack(
        t=grid, pose=pose, vel=vel, phase_index=phase_index, algorithm=PROPOSED, start_index=start_index
    )


def coulomb_force(vel, f, limit):
    """Friction opposing motion, or holding the object while ``|f| <= limit``."""
    speed = np.hypot(*vel)
    if speed >= STICK_SPEED:
        return -limit * vel / speed
    fmag = np.hypot(*f)
    if fmag <= limit:
        return -f
    return -limit * f / fmag


def predict_simple(
    start, plan, p, mu=0.14, t_grid=None, dt=DEFAULT_DT, g=GRAVITY, phase_index=0, start_index=0
):
    """Baseline: nominal dynamics plus Coulomb friction of magnitude ``mu m g``; rotation uncorrected."""
    check_nonnegative(mu, "mu")
    grid = _grid(plan, t_grid, dt)
    held = plan.hold(grid)
    limit = mu * p.mass * g

    def wrench_of(s, u):
        return Wrench(force=u[:2] + coulomb_force(s.vel, u[:2], limit), torque=u[2])

    def post_step(s, s_next, u, h):
        # friction alone never reverses the direction of travel
        holding = np.hypot(*u[:2]) <= limit
        if np.hypot(*s.vel) < STICK_SPEED and holding:
            return PlanarState(pos=s_next.pos, theta=s_next.theta, vel=np.zeros(2), omega=s_next.omega)
        v0 = np.dot(s.vel, s.vel)
        v1 = np.dot(s.vel, s_next.vel)
        if v1 < 0 and holding:
            # velocity is linear within the held step: stop where it crosses zero
            frac = v0 / (v0 - v1)
            pos = s.pos + 0.5 * s.vel * frac * h
            return PlanarState(pos=pos, theta=s_next.theta, vel=np.zeros(2), omega=s_next.omega)
        return s_next

    pose, vel = _integrate(_start_state(start), held, grid, p, wrench_of, post_step)
    return PredictedTrack(
        t=grid, pose=pose, vel=vel, phase_index=phase_index, algorithm=SIMPLE, start_index=start_index
    )


@dataclass(frozen=True)
class PipelineConfig:
    omega_n: float = 300.0
    zeta: float = 1.0 / np.sqrt(2.0)
    discretization: str = "matched"
    plan_rate: float = 10.0
    n_intervals: int = 4
    mu: float = 0.14
    gravity: float = GRAVITY
    window: int = 125
    settle_time: float = 0.1
    history_time: float = 0.1


@dataclass(eq=False)
class PipelineResult:
    case_id: str
    schedule: PhaseSchedule
    tracks: list
    models: dict = field(default_factory=dict)  # phase -> models used for that prediction
    estimates: dict = field(default_factory=dict)  # phase -> (index array, d_hat (n, 3))
    report: object = None


def motion_history(pose, end, n_hist, dt):
    """Rate and acceleration at sample ``end`` from a quadratic fit to the preceding samples."""
    start = max(0, end - n_hist)
    if end - start < 3:
        return np.zeros(3), np.zeros(3)
    tt = (np.arange(start, end + 1) - end) * dt
    coef = np.polyfit(tt, pose[start : end + 1], 2)
    return coef[1], 2.0 * coef[0]


def run_pipeline(traj, config=None):
    """Alternate identification and prediction over a trajectory and score both predictors."""
    from .metrics import summarize

    config = PipelineConfig() if config is None else config
    if len(traj) < MIN_PIPELINE_SAMPLES:
        raise ScheduleError(f"trajectory has {len(traj)} samples; at least {MIN_PIPELINE_SAMPLES} are needed")
    p = traj.params
    dt = traj.dt
    schedule = build_schedule(traj, config.n_intervals)
    filters = realize_filters(QFilterParams(config.omega_n, config.zeta), p, dt, config.discretization)
    u_all = traj.applied_wrench()
    pose_all = traj.pose
    n_skip = int(round(config.settle_time / dt))
    n_hist = int(round(config.history_time / dt))

    accumulators = [ChannelRLS(name) for name in CHANNELS]
    result = PipelineResult(case_id=traj.case_id, schedule=schedule, tracks=[])
    for j, kind, i0, i1 in schedule.phases():
        if kind == "identify":
            rate, accel = motion_history(pose_all, i0, n_hist, dt)
            state = reset_observer(
                filters, u_all[i0], pose_all[i0, :2], pose_all[i0, 2], rate=rate, accel=accel, t=traj.t[i0]
            )
            seg = slice(i0, i1 + 1)
            d_hat = run_observer(filters, u_all[seg], pose_all[seg], state=state)
            result.estimates[j] = (np.arange(i0, i1 + 1), d_hat)
            keep = slice(min(n_skip, len(d_hat) - 2), None)
            identify_channels(
                u_all[seg][keep], d_hat[keep], window=config.window, t=traj.t[seg][keep], accumulators=accumulators
            )
            continue
        models = tuple(a.model for a in accumulators)
        if any(m is None for m in models):
            models = zero_models()
        result.models[j] = models
        plan = subsample_plan(traj, config.plan_rate, start=i0, stop=i1 + 1)
        grid = traj.t[i0 : i1 + 1]
        start = pose_all[i0]
        result.tracks.append(predict_pose(start, plan, models, p, t_grid=grid, phase_index=j, start_index=i0))
        result.tracks.append(
            predict_simple(
                start, plan, p, mu=config.mu, g=config.gravity, t_grid=grid, phase_index=j, start_index=i0
            )
        )
    result.report = summarize(result.tracks, traj)
    return result


class PushPosePredictor(BaseEstimator):
    """Identify-then-predict estimator.

    ``fit(X, y)`` takes the applied wrench ``X`` (n, 3; torque including the
    moment arm) and the measured pose ``y`` (n, 3) of one identification
    phase; ``partial_fit`` adds later phases. ``predict(X)`` integrates the
    identified dynamics under a wrench held on the sample grid, starting from
    the last pose seen in fitting unless ``start_pose`` is given.
    """

    def __init__(
        self,
        omega_n=300.0,
        zeta=1.0 / np.sqrt(2.0),
        mass=1.045,
        inertia=0.0018,
        dt=DEFAULT_DT,
        discretization="matched",
        window=125,
        settle_time=0.1,
    ):
        self.omega_n = omega_n
        self.zeta = zeta
        self.mass = mass
        self.inertia = inertia
        self.dt = dt
        self.discretization = discretization
        self.window = window
        self.settle_time = settle_time

    def _params(self):
        return ObjectParams(mass=self.mass, inertia=self.inertia)

    def fit(self, X, y):
        self.accumulators_ = None
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        X = check_channels(X, name="X", min_samples=2)
        y = check_channels(y, name="y", min_samples=2)
        if len(X) != len(y):
            raise ValueError("X and y must have the same number of rows")
        filters = realize_filters(QFilterParams(self.omega_n, self.zeta), self._params(), self.dt, self.discretization)
        d_hat = run_observer(filters, X, y)
        n_skip = min(int(round(self.settle_time / self.dt)), len(X) - 2)
        models, self.accumulators_ = identify_channels(
            X[n_skip:], d_hat[n_skip:], window=self.window, accumulators=getattr(self, "accumulators_", None)
        )
        self.models_ = models
        self.coef_ = np.array([m.beta for m in models])
        self.intercept_ = np.array([m.epsilon for m in models])
        self.last_pose_ = y[-1].copy()
        self.disturbance_ = d_hat
        return self

    def predict(self, X, start_pose=None):
        check_is_fitted(self, "models_")
        X = check_channels(X, name="X")
        start = self.last_pose_ if start_pose is None else start_pose
        grid = self.dt * np.arange(len(X))
        plan = ForcePlan(t=grid, wrench=X)
        return predict_pose(start, plan, self.models_, self._params(), t_grid=grid).pose


class SimpleFrictionPredictor(BaseEstimator):
    """Coulomb-friction baseline with the same ``fit``/``predict`` shape as :class:`PushPosePredictor`."""

    def __init__(self, mu=0.14, mass=1.045, inertia=0.0018, dt=DEFAULT_DT, gravity=GRAVITY):
        self.mu = mu
        self.mass = mass
        self.inertia = inertia
        self.dt = dt
        self.gravity = gravity

    def fit(self, X, y):
        y = check_channels(y, name="y")
        self.last_pose_ = y[-1].copy()
        return self

    def predict(self, X, start_pose=None):
        check_is_fitted(self, "last_pose_")
        X = check_channels(X, name="X")
        start = self.last_pose_ if start_pose is None else start_pose
        grid = self.dt * np.arange(len(X))
        plan = ForcePlan(t=grid, wrench=X)
        p = ObjectParams(mass=self.mass, inertia=self.inertia)
        return predict_simple(start, plan, p, mu=self.mu, t_grid=grid, g=self.gravity).pose
