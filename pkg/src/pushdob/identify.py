"""Recursive least squares for the per-channel law ``d_hat = beta * u + eps``.

The recursion runs in information form: the first well-conditioned window
gives the batch solution, every further window adds ``H^T H`` to the
information matrix and corrects the estimate with the gain
``K = P H^T``. Nothing is forgotten, so after any number of windows the
estimate equals ordinary least squares over every absorbed sample.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_channels

#: ``cond(H^T H)`` above this marks a window (or channel) as degenerate.
CONDITION_LIMIT = 1e10

CHANNELS = ("fx", "fy", "tau")


class DegenerateWindowError(ValueError):
    """The regressor ``[u 1]`` of a window is rank deficient."""


class ConditioningError(FloatingPointError):
    """The information matrix lost positive definiteness."""


@dataclass(frozen=True)
class IdentWindow:
    u: np.ndarray
    d: np.ndarray
    t_start: float = 0.0
    t_end: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if len(u) != len(d):
            raise ValueError(f"window u and d lengths differ ({len(u)} vs {len(d)})")
        if len(u) < 2:
            raise ValueError("an identification window needs at least two samples")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(d))):
            raise ValueError("identification window contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "d", d)

    def __len__(self):
        return len(self.u)

    @property
    def regressor(self):
        return np.column_stack([self.u, np.ones(len(self.u))])

    def label(self):
        return f"[{self.t_start:.4g} s, {self.t_end:.4g} s]"


@dataclass(frozen=True)
class LinearModel:
    """Identified law with its RLS bookkeeping.

    ``info_matrix_inv`` is ``P_k``; ``info_matrix`` (``P_k^-1``) is kept too
    because the update accumulates in information form. ``degenerate`` models
    are the bias-only fallback ``beta = 0, eps = mean(d)``.
    """

    beta: float
    epsilon: float
    info_matrix_inv: np.ndarray
    info_matrix: np.ndarray
    n_samples_absorbed: int
    degenerate: bool = False
    d_sum: float = field(default=0.0, repr=False)

    @property
    def x(self):
        return np.array([self.beta, self.epsilon])

    def predict(self, u):
        return self.beta * np.asarray(u, dtype=float) + self.epsilon

    def to_dict(self):
        return {
            "beta": self.beta,
            "eps": self.epsilon,
            "n": self.n_samples_absorbed,
            "degenerate": self.degenerate,
        }


def _symmetrize(m):
    return 0.5 * (m + m.T)


def _is_degenerate(info):
    return not np.isfinite(np.linalg.cond(info)) or np.linalg.cond(info) > CONDITION_LIMIT


def rls_initialize(w):
    """Batch least squares on the first window: ``P^-1 = H^T H``, ``x = P H^T d``."""
    H = w.regressor
    info = _symmetrize(H.T @ H)
    if _is_degenerate(info):
        raise DegenerateWindowError(f"regressor [u 1] is rank deficient on window {w.label()}")
    P = _symmetrize(np.linalg.inv(info))
    x = P @ (H.T @ w.d)
    return LinearModel(
        beta=float(x[0]),
        epsilon=float(x[1]),
        info_matrix_inv=P,
        info_matrix=info,
        n_samples_absorbed=len(w),
        d_sum=float(w.d.sum()),
    )


def rls_update(model, w):
    """Absorb one more window; the returned model is the re-initialised one."""
    if model.degenerate:
        raise ValueError("cannot run the recursive update on a degenerate (bias-only) model")
    H = w.regressor
    info = _symmetrize(model.info_matrix + H.T @ H)
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise ConditioningError("information matrix is no longer positive definite") from None
    P = _symmetrize(np.linalg.inv(info))
    K = P @ H.T
    x = model.x + K @ (w.d - H @ model.x)
    if not np.all(np.isfinite(x)):
        raise ConditioningError("RLS estimate became non-finite")
    return LinearModel(
        beta=float(x[0]),
        epsilon=float(x[1]),
        info_matrix_inv=P,
        info_matrix=info,
        n_samples_absorbed=model.n_samples_absorbed + len(w),
        d_sum=model.d_sum + float(w.d.sum()),
    )


def batch_least_squares(u, d):
    """Normal-equations solution ``(beta, eps)`` on pooled data (reference route)."""
    H = np.column_stack([np.asarray(u, dtype=float), np.ones(len(u))])
    return np.linalg.solve(H.T @ H, H.T @ np.asarray(d, dtype=float))


class ChannelRLS:
    """Accumulates windows for one channel, tolerating a degenerate start.

    Windows are pooled in information form until the pooled regressor is
    well conditioned (that pooled solve is the Initialise step); later
    windows go through :func:`rls_update`.
    """

    def __init__(self, name="channel"):
        self.name = name
        self.model = None
        self._info = np.zeros((2, 2))
        self._rhs = np.zeros(2)
        self._n = 0
        self._d_sum = 0.0

    def absorb(self, w):
        if self.model is not None and not self.model.degenerate:
            self.model = rls_update(self.model, w)
            return self.model
        H = w.regressor
        self._info = _symmetrize(self._info + H.T @ H)
        self._rhs = self._rhs + H.T @ w.d
        self._n += len(w)
        self._d_sum += float(w.d.sum())
        if _is_degenerate(self._info):
            self.model = _bias_model(self._info, self._n, self._d_sum)
        else:
            P = _symmetrize(np.linalg.inv(self._info))
            x = P @ self._rhs
            self.model = LinearModel(
                beta=float(x[0]),
                epsilon=float(x[1]),
                info_matrix_inv=P,
                info_matrix=self._info.copy(),
                n_samples_absorbed=self._n,
                d_sum=self._d_sum,
            )
        return self.model


def _bias_model(info, n, d_sum):
    eps = d_sum / n if n else 0.0
    return LinearModel(
        beta=0.0,
        epsilon=float(eps),
        info_matrix_inv=np.linalg.pinv(info) if n else np.zeros((2, 2)),
        info_matrix=info.copy(),
        n_samples_absorbed=n,
        degenerate=True,
        d_sum=d_sum,
    )


def iter_windows(u, d, window, t=None):
    """Consecutive windows of ``window`` samples; a short tail joins the last one."""
    n = len(u)
    if window < 2:
        raise ValueError("window must be at least 2 samples")
    t = np.arange(n, dtype=float) if t is None else np.asarray(t, dtype=float)
    starts = list(range(0, n, window))
    if len(starts) > 1 and n - starts[-1] < 2:
        starts.pop()
    for i, s in enumerate(starts):
        e = starts[i + 1] if i + 1 < len(starts) else n
        if e - s >= 2:
            yield IdentWindow(u=u[s:e], d=d[s:e], t_start=t[s], t_end=t[e - 1])


def identify_channels(u_series, d_series, window=125, t=None, accumulators=None):
    """One model per channel (fx, fy, tau), windows fed sequentially.

    Pass the ``accumulators`` returned by a previous call to carry the
    information from earlier identification phases forward.
    """
    u = check_channels(u_series, name="u_series", min_samples=2)
    d = check_channels(d_series, name="d_series", min_samples=2)
    if len(u) != len(d):
        raise ValueError("u_series and d_series must be aligned")
    if accumulators is None:
        accumulators = [ChannelRLS(name) for name in CHANNELS]
    for i, acc in enumerate(accumulators):
        for w in iter_windows(u[:, i], d[:, i], window, t):
            acc.absorb(w)
    return tuple(acc.model for acc in accumulators), accumulators


class RecursiveLinearFit(RegressorMixin, BaseEstimator):
    """Per-channel ``d = beta * u + eps`` fitted by recursive least squares.

    ``X`` and ``y`` are ``(n, 3)`` arrays of applied input and disturbance
    estimate. ``fit`` starts afresh; ``partial_fit`` adds data to what was
    already absorbed. ``coef_`` holds the three betas, ``intercept_`` the
    three epsilons.
    """

    def __init__(self, window=125):
        self.window = window

    def fit(self, X, y):
        self.accumulators_ = None
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        acc = getattr(self, "accumulators_", None)
        models, self.accumulators_ = identify_channels(X, y, window=self.window, accumulators=acc)
        self.models_ = models
        self.coef_ = np.array([m.beta for m in models])
        self.intercept_ = np.array([m.epsilon for m in models])
        self.degenerate_ = np.array([m.degenerate for m in models])
        return self

    def predict(self, X):
        check_is_fitted(self, "models_")
        X = check_channels(X)
        return X * self.coef_ + self.intercept_


def zero_models():
    """Nominal-dynamics models (beta = eps = 0) for every channel."""
    return tuple(
        LinearModel(
            beta=0.0,
            epsilon=0.0,
            info_matrix_inv=np.eye(2),
            info_matrix=np.eye(2),
            n_samples_absorbed=0,
        )
        for _ in CHANNELS
    )


def with_values(model, beta, epsilon):
    return replace(model, beta=float(beta), epsilon=float(epsilon))
