"""Q-filter disturbance observer for the three planar channels (x, y, theta).

Per channel the estimate is

    d_hat = G_y(z) y - Q_A(z) u,      G_y ~ Q_B(s) / P_n(s) = inertia * w^2 s^2 / (s^2 + 2 zeta w s + w^2)

with ``Q_A = Q_B = w^2 / (s^2 + 2 zeta w s + w^2)`` and ``P_n`` the nominal
double integrator. Both branches are second-order discrete systems realised
in observable canonical form; ``G_y`` carries an explicit feedthrough so the
measured pose is never differentiated numerically outside the filter.

Two discretisations are available:

``"matched"`` (default)
    Coefficients fitted so the discrete frequency response tracks the
    continuous one up to 64 % of Nyquist, starting from Tustin. ``Q_A`` keeps
    unit DC gain exactly; ``G_y`` keeps a double zero at ``z = 1`` and the
    exact curvature gain, so constant-acceleration motion is differentiated
    without bias; its magnitude is fitted so that ``G_y`` times the sampled
    plant tracks ``|Q|``.
``"tustin"``
    Plain bilinear transform. At 250 Hz with ``w = 300 rad/s`` it warps the
    response badly above ~150 rad/s.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dynamics import DEFAULT_DT, ObjectParams, Wrench
from .validation import as_vec2, check_channels, check_positive

DISCRETIZATIONS = ("matched", "tustin")

#: Upper edge of the fitted band, as a fraction of the Nyquist frequency.
FIT_BAND_FRACTION = 0.64


class ObserverConfigError(ValueError):
    """Filter parameters that cannot be discretised stably."""


@dataclass(frozen=True)
class QFilterParams:
    omega_n: float = 300.0
    zeta: float = 1.0 / np.sqrt(2.0)

    def __post_init__(self):
        check_positive(self.omega_n, "omega_n")
        if not 0 < self.zeta < 2:
            raise ObserverConfigError(f"zeta must lie in (0, 2), got {self.zeta}")

    def q_continuous(self, s):
        w = self.omega_n
        return w**2 / (s**2 + 2 * self.zeta * w * s + w**2)


@dataclass(frozen=True)
class DisturbanceEstimate:
    t: float
    d_fx: float
    d_fy: float
    d_tau: float

    def as_array(self):
        return np.array([self.d_fx, self.d_fy, self.d_tau])


class DiscreteFilter:
    """SISO ``b(z^-1) / a(z^-1)`` with ``a[0] == 1`` in observable canonical form."""

    def __init__(self, b, a):
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        if a[0] == 0:
            raise ObserverConfigError("leading denominator coefficient is zero")
        b, a = b / a[0], a / a[0]
        n = max(len(a), len(b))
        self.b = np.pad(b, (0, n - len(b)))
        self.a = np.pad(a, (0, n - len(a)))
        order = n - 1
        self.A = np.zeros((order, order))
        self.A[:, 0] = -self.a[1:]
        self.A[:-1, 1:] = np.eye(order - 1)
        self.B = self.b[1:] - self.a[1:] * self.b[0]
        self.C = np.zeros(order)
        self.C[0] = 1.0
        self.D = float(self.b[0])
        self._I_minus_A = np.eye(order) - self.A

    @property
    def order(self):
        return len(self.a) - 1

    @property
    def poles(self):
        return np.roots(self.a)

    def is_stable(self, margin=0.0):
        return bool(np.all(np.abs(self.poles) < 1.0 - margin))

    @property
    def dc_gain(self):
        return float(self.b.sum() / self.a.sum())

    def freq_response(self, w, dt):
        zinv = np.exp(-1j * np.asarray(w, dtype=float) * dt)
        return npoly.polyval(zinv, self.b) / npoly.polyval(zinv, self.a)

    def scaled(self, k):
        return DiscreteFilter(self.b * k, self.a)

    def steady_state(self, x):
        """State that keeps the output constant for an input held at ``x``."""
        return np.linalg.solve(self._I_minus_A, self.B * x)

    def polynomial_state(self, c0, c1=0.0, c2=0.0):
        """State consistent with an input history ``c0 + c1 k + c2 k^2`` (k <= 0)."""
        r = np.linalg.solve(self._I_minus_A, self.B * c2)
        q = np.linalg.solve(self._I_minus_A, self.B * c1 - 2 * r)
        return np.linalg.solve(self._I_minus_A, self.B * c0 - q - r)

    def filter(self, x, state=None):
        """Run the filter over a 1-d sequence; returns (outputs, final state)."""
        s = np.zeros(self.order) if state is None else np.array(state, dtype=float)
        out = np.empty(len(x))
        for k, xk in enumerate(x):
            out[k] = s[0] + self.D * xk
            s = self.A @ s + self.B * xk
        return out, s


def bilinear(num_s, den_s, dt):
    """Tustin transform of ``num_s(s) / den_s(s)`` (coefficients, highest power first).

    Returns ``(b, a)`` in ascending powers of ``z^-1`` with ``a[0] == 1``.
    """
    num_s = np.atleast_1d(np.asarray(num_s, dtype=float))
    den_s = np.atleast_1d(np.asarray(den_s, dtype=float))
    n = max(len(num_s), len(den_s)) - 1
    k = 2.0 / dt
    minus = np.array([1.0, -1.0])  # 1 - z^-1
    plus = np.array([1.0, 1.0])  # 1 + z^-1

    def transform(p):
        p = np.pad(p, (n + 1 - len(p), 0))
        out = np.zeros(n + 1)
        for i, coef in enumerate(p[::-1]):  # coef of s^i
            term = npoly.polymul(npoly.polypow(minus, i), npoly.polypow(plus, n - i))
            out[: len(term)] += coef * k**i * term
        return out

    b, a = transform(num_s), transform(den_s)
    return b / a[0], a / a[0]


def _fit_band(q, dt):
    w_hi = FIT_BAND_FRACTION * np.pi / dt
    w = np.logspace(0, np.log10(w_hi), 240)
    weight = np.where(w < q.omega_n / 3.0, 5.0, 1.0)
    return w, weight


def _minimax(cost, x0):
    res = minimize(
        cost, x0, method="Nelder-Mead", options={"maxiter": 4000, "xatol": 1e-10, "fatol": 1e-12}
    )
    return res.x, res.fun


def _stability_penalty(a):
    return 1e3 * max(0.0, np.max(np.abs(np.roots(a))) - 0.98)


def _match_q(q, dt):
    w, weight = _fit_band(q, dt)
    target = q.q_continuous(1j * w)
    zinv = np.exp(-1j * w * dt)

    def build(p):
        b0, b1, a1, a2 = p
        a = np.array([1.0, a1, a2])
        return np.array([b0, b1, a.sum() - b0 - b1]), a

    def cost(p):
        b, a = build(p)
        h = npoly.polyval(zinv, b) / npoly.polyval(zinv, a)
        err = np.abs(h - target) / np.abs(target)
        return np.max(weight * err) + _stability_penalty(a)

    b_t, a_t = bilinear([q.omega_n**2], [1, 2 * q.zeta * q.omega_n, q.omega_n**2], dt)
    x0 = np.array([b_t[0], b_t[1], a_t[1], a_t[2]])
    p, fun = _minimax(cost, x0)
    if fun < cost(x0):
        return build(p)
    return b_t, a_t


def _match_inverse_plant(q, dt):
    """Unit-inertia ``Q / P`` with a double zero at z = 1 and exact curvature gain.

    ``P`` is the double integrator sampled under a zero-order hold, so the
    noise-free ``d -> d_hat`` magnitude tracks ``|Q|``.
    """
    w, weight = _fit_band(q, dt)
    zinv = np.exp(-1j * w * dt)
    plant = np.abs(0.5 * dt**2 * zinv * (1 + zinv) / (1 - zinv) ** 2)
    target = np.abs(q.q_continuous(1j * w)) / plant

    def build(p):
        a = np.array([1.0, p[0], p[1]])
        k = a.sum() / dt**2
        return k * np.array([1.0, -2.0, 1.0]), a

    def cost(p):
        b, a = build(p)
        h = npoly.polyval(zinv, b) / npoly.polyval(zinv, a)
        err = np.abs(np.abs(h) - target) / target
        return np.max(weight * err) + _stability_penalty(a)

    b_t, a_t = bilinear([q.omega_n**2, 0, 0], [1, 2 * q.zeta * q.omega_n, q.omega_n**2], dt)
    x0 = a_t[1:].copy()
    p, fun = _minimax(cost, x0)
    if fun < cost(x0):
        return build(p)
    return b_t, a_t


@lru_cache(maxsize=32)
def _unit_filters(omega_n, zeta, dt, method):
    q = QFilterParams(omega_n, zeta)
    if method == "tustin":
        qa = bilinear([omega_n**2], [1, 2 * zeta * omega_n, omega_n**2], dt)
        gy = bilinear([omega_n**2, 0, 0], [1, 2 * zeta * omega_n, omega_n**2], dt)
    else:
        qa = _match_q(q, dt)
        gy = _match_inverse_plant(q, dt)
    return qa, gy


@dataclass(frozen=True, eq=False)
class ObserverFilters:
    """Discrete filter pair per channel. ``y_branch[i]`` includes the channel inertia."""

    q: QFilterParams
    dt: float
    method: str
    u_branch: DiscreteFilter
    y_branch: tuple

    @property
    def y_gain(self):
        return np.array([f.D for f in self.y_branch])


def realize_filters(q=None, p=None, dt=DEFAULT_DT, method="matched"):
    q = QFilterParams() if q is None else q
    p = ObjectParams() if p is None else p
    check_positive(dt, "dt")
    if method not in DISCRETIZATIONS:
        raise ObserverConfigError(f"unknown discretisation {method!r}; use one of {DISCRETIZATIONS}")
    if q.omega_n * dt >= 2.0:
        raise ObserverConfigError(
            f"omega_n * dt = {q.omega_n * dt:.3g} >= 2: the sample rate is too low for this Q-filter"
        )
    (bq, aq), (by, ay) = _unit_filters(float(q.omega_n), float(q.zeta), float(dt), method)
    u_branch = DiscreteFilter(bq, aq)
    unit_y = DiscreteFilter(by, ay)
    y_branch = (unit_y.scaled(p.mass), unit_y.scaled(p.mass), unit_y.scaled(p.inertia))
    for f in (u_branch,) + y_branch:
        if not f.is_stable():
            raise ObserverConfigError("discretised observer branch is unstable")
    return ObserverFilters(q=q, dt=float(dt), method=method, u_branch=u_branch, y_branch=y_branch)


@dataclass(frozen=True, eq=False)
class ObserverState:
    """Internal states of both branches, one row per channel (x, y, theta)."""

    xu: np.ndarray  # (3, order) of the -Q_A u branch
    xy: np.ndarray  # (3, order) of the G_y y branch
    t: float = 0.0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.xu)) and np.all(np.isfinite(self.xy))):
            raise FloatingPointError("observer state became non-finite")


def _pack_inputs(u, y_pos, y_theta):
    if isinstance(u, Wrench):
        u = u.as_array()
    u = np.asarray(u, dtype=float).reshape(3)
    y = np.r_[as_vec2(y_pos, "y_pos"), float(y_theta)]
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
        raise ValueError("observer inputs must be finite")
    return u, y


def reset(filters, current_u, current_y_pos, current_y_theta, rate=None, accel=None, t=0.0):
    """Steady-state-consistent initial state for the held current inputs.

    With ``rate``/``accel`` (pose derivatives, shape (3,)) the y-branch is
    initialised as if the pose had been following that quadratic, so a
    moving object does not produce a start-up spike either.
    """
    u, y = _pack_inputs(current_u, current_y_pos, current_y_theta)
    rate = np.zeros(3) if rate is None else np.asarray(rate, dtype=float).reshape(3)
    accel = np.zeros(3) if accel is None else np.asarray(accel, dtype=float).reshape(3)
    dt = filters.dt
    xu = np.array([filters.u_branch.steady_state(ui) for ui in u])
    xy = np.array(
        [
            f.polynomial_state(y[i], rate[i] * dt, 0.5 * accel[i] * dt**2)
            for i, f in enumerate(filters.y_branch)
        ]
    )
    return ObserverState(xu=xu, xy=xy, t=t)


def zero_state(filters, t=0.0):
    n = filters.u_branch.order
    return ObserverState(xu=np.zeros((3, n)), xy=np.zeros((3, n)), t=t)


def step(filters, state, u, y_pos, y_theta):
    """Advance all channels one sample; returns ``(new_state, estimate)``."""
    u, y = _pack_inputs(u, y_pos, y_theta)
    fu = filters.u_branch
    out_u = state.xu[:, 0] + fu.D * u
    xu = state.xu @ fu.A.T + np.outer(u, fu.B)
    out_y = np.empty(3)
    xy = np.empty_like(state.xy)
    for i, f in enumerate(filters.y_branch):
        out_y[i] = state.xy[i, 0] + f.D * y[i]
        xy[i] = f.A @ state.xy[i] + f.B * y[i]
    d = out_y - out_u
    new_state = ObserverState(xu=xu, xy=xy, t=state.t + filters.dt)
    return new_state, DisturbanceEstimate(t=state.t, d_fx=d[0], d_fy=d[1], d_tau=d[2])


def run(filters, u, y, state=None, t0=0.0):
    """Filter whole series. ``u``, ``y`` are (n, 3); returns (n, 3) estimates.

    Without an explicit ``state`` the observer is reset on the first sample.
    """
    u = check_channels(u, name="u")
    y = check_channels(y, name="y")
    if len(u) != len(y):
        raise ValueError("u and y must have the same length")
    if state is None:
        state = reset(filters, u[0], y[0, :2], y[0, 2], t=t0)
    out = np.empty((len(u), 3))
    out_u = np.empty((len(u), 3))
    for i in range(3):
        out_u[:, i], _ = filters.u_branch.filter(u[:, i], state.xu[i])
        out[:, i], _ = filters.y_branch[i].filter(y[:, i], state.xy[i])
    d = out - out_u
    if not np.all(np.isfinite(d)):
        raise FloatingPointError("disturbance estimate became non-finite")
    return d


class DisturbanceObserver(TransformerMixin, BaseEstimator):
    """Q-filter disturbance observer with a scikit-learn transformer interface.

    ``X`` has six columns ``[u_fx, u_fy, u_tau, x, y, theta]``: the applied
    wrench (torque including the moment-arm term) and the measured pose.
    ``transform`` returns the ``(n, 3)`` disturbance estimate, resetting the
    filter on the first row. ``reset``/``step`` give a streaming interface.
    """

    def __init__(
        self,
        omega_n=300.0,
        zeta=1.0 / np.sqrt(2.0),
        mass=1.045,
        inertia=0.0018,
        dt=DEFAULT_DT,
        discretization="matched",
    ):
        self.omega_n = omega_n
        self.zeta = zeta
        self.mass = mass
        self.inertia = inertia
        self.dt = dt
        self.discretization = discretization

    def fit(self, X=None, y=None):
        if X is not None:
            check_channels(X, n_channels=6)
        self.filters_ = realize_filters(
            QFilterParams(self.omega_n, self.zeta),
            ObjectParams(mass=self.mass, inertia=self.inertia),
            dt=self.dt,
            method=self.discretization,
        )
        self.state_ = None
        return self

    def transform(self, X):
        check_is_fitted(self, "filters_")
        X = check_channels(X, n_channels=6)
        return run(self.filters_, X[:, :3], X[:, 3:])

    def reset(self, u, pose, rate=None, accel=None):
        check_is_fitted(self, "filters_")
        pose = np.asarray(pose, dtype=float)
        self.state_ = reset(self.filters_, u, pose[:2], pose[2], rate=rate, accel=accel)
        return self

    def step(self, u, pose):
        check_is_fitted(self, "filters_")
        if self.state_ is None:
            self.reset(u, pose)
        pose = np.asarray(pose, dtype=float)
        self.state_, est = step(self.filters_, self.state_, u, pose[:2], pose[2])
        return est.as_array()
