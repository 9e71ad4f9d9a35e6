"""Canonical push-trajectory schema, CSV I/O, frame transforms and plan subsampling.

The CSV stores the force *applied to the object* by the pusher tip (the
sign of the sensor's reaction reading is flipped at conversion time).
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ObjectParams, Wrench, moment_arm_torque, rotate, rotation_matrix
from .validation import as_vec2, check_positive

CSV_HEADER = (
    "t",
    "tip_x_rbt",
    "tip_y_rbt",
    "tip_theta",
    "obj_x",
    "obj_y",
    "obj_theta",
    "fx_rbt",
    "fy_rbt",
    "tau",
)

#: Allowed relative deviation of any sample spacing from the nominal period.
SPACING_TOLERANCE = 0.01


class TrajectoryParseError(ValueError):
    """A row of a trajectory file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrajectorySchemaError(ValueError):
    """A trajectory violates the timing or shape rules of the schema."""


@dataclass(frozen=True)
class RawSample:
    t: float
    tip_pos_rbt: np.ndarray
    tip_theta: float
    obj_pos_ref: np.ndarray
    obj_theta: float
    tip_force_rbt: np.ndarray
    tip_torque: float


@dataclass(frozen=True)
class RefSample:
    t: float
    tip_pos: np.ndarray
    obj_pos: np.ndarray
    obj_theta: float
    tip_force: np.ndarray
    tip_torque: float


@dataclass(frozen=True, eq=False)
class PushTrajectory:
    """Column-oriented record of one push, sampled at a fixed rate.

    ``disturbance_truth`` is only populated by the synthetic generator and
    holds the injected ``[d_fx, d_fy, d_tau]`` per sample.
    """

    t: np.ndarray
    tip_pos_rbt: np.ndarray
    tip_theta: np.ndarray
    obj_pos: np.ndarray
    obj_theta: np.ndarray
    tip_force_rbt: np.ndarray
    tip_torque: np.ndarray
    sample_rate: float
    params: ObjectParams = field(default_factory=ObjectParams)
    case_id: str = "case"
    disturbance_truth: np.ndarray = None

    def __post_init__(self):
        n = len(self.t)
        shapes = {
            "t": (n,),
            "tip_pos_rbt": (n, 2),
            "tip_theta": (n,),
            "obj_pos": (n, 2),
            "obj_theta": (n,),
            "tip_force_rbt": (n, 2),
            "tip_torque": (n,),
        }
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise TrajectorySchemaError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise TrajectorySchemaError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.disturbance_truth is not None:
            truth = np.asarray(self.disturbance_truth, dtype=float)
            if truth.shape != (n, 3):
                raise TrajectorySchemaError("disturbance_truth must be (n, 3)")
            truth.setflags(write=False)
            object.__setattr__(self, "disturbance_truth", truth)
        object.__setattr__(self, "sample_rate", check_positive(self.sample_rate, "sample_rate"))
        check_timing(self.t, self.sample_rate)

    def __len__(self):
        return len(self.t)

    @property
    def dt(self):
        return 1.0 / self.sample_rate

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def samples(self):
        return [self.sample(i) for i in range(len(self))]

    def sample(self, i):
        return RawSample(
            t=float(self.t[i]),
            tip_pos_rbt=self.tip_pos_rbt[i].copy(),
            tip_theta=float(self.tip_theta[i]),
            obj_pos_ref=self.obj_pos[i].copy(),
            obj_theta=float(self.obj_theta[i]),
            tip_force_rbt=self.tip_force_rbt[i].copy(),
            tip_torque=float(self.tip_torque[i]),
        )

    # reference-frame views -------------------------------------------------

    @property
    def tip_pos(self):
        """Tip position in the reference frame, (n, 2)."""
        return rotate(self.tip_pos_rbt, self.tip_theta)

    @property
    def tip_force(self):
        """Applied force in the reference frame, (n, 2)."""
        return rotate(self.tip_force_rbt, self.tip_theta)

    @property
    def pose(self):
        """Measured object pose ``[x, y, theta]``, (n, 3)."""
        return np.column_stack([self.obj_pos, self.obj_theta])

    def applied_wrench(self):
        """Observer input ``[f_x, f_y, T_C + r_m x f_C]`` in the reference frame."""
        f = self.tip_force
        torque = self.tip_torque + moment_arm_torque(self.tip_pos, self.obj_pos, f)
        return np.column_stack([f, torque])

    def slice(self, start, stop):
        """Samples ``start`` to ``stop`` (exclusive), times kept absolute."""
        truth = None if self.disturbance_truth is None else self.disturbance_truth[start:stop]
        return PushTrajectory(
            t=self.t[start:stop],
            tip_pos_rbt=self.tip_pos_rbt[start:stop],
            tip_theta=self.tip_theta[start:stop],
            obj_pos=self.obj_pos[start:stop],
            obj_theta=self.obj_theta[start:stop],
            tip_force_rbt=self.tip_force_rbt[start:stop],
            tip_torque=self.tip_torque[start:stop],
            sample_rate=self.sample_rate,
            params=self.params,
            case_id=self.case_id,
            disturbance_truth=truth,
        )

    def to_rows(self):
        return np.column_stack(
            [
                self.t,
                self.tip_pos_rbt,
                self.tip_theta,
                self.obj_pos,
                self.obj_theta,
                self.tip_force_rbt,
                self.tip_torque,
            ]
        )

    @classmethod
    def from_rows(cls, rows, sample_rate=None, params=None, case_id="case", **kw):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(CSV_HEADER):
            raise TrajectorySchemaError(
                f"expected {len(CSV_HEADER)} columns, got array of shape {rows.shape}"
            )
        t = rows[:, 0]
        if sample_rate is None:
            sample_rate = infer_sample_rate(t)
        return cls(
            t=t,
            tip_pos_rbt=rows[:, 1:3],
            tip_theta=rows[:, 3],
            obj_pos=rows[:, 4:6],
            obj_theta=rows[:, 6],
            tip_force_rbt=rows[:, 7:9],
            tip_torque=rows[:, 9],
            sample_rate=sample_rate,
            params=params if params is not None else ObjectParams(),
            case_id=case_id,
            **kw,
        )


def infer_sample_rate(t):
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        raise TrajectorySchemaError("at least two samples are needed to infer the sample rate")
    spacing = np.median(np.diff(t))
    if not spacing > 0:
        raise TrajectorySchemaError("time stamps must be strictly increasing")
    return 1.0 / spacing


def check_timing(t, sample_rate, tol=SPACING_TOLERANCE):
    """Strictly increasing, uniformly spaced time stamps."""
    if len(t) < 2:
        raise TrajectorySchemaError("a trajectory needs at least two samples")
    d = np.diff(t)
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise TrajectorySchemaError(
            f"time stamps not strictly increasing at sample {bad[0] + 1} (t={t[bad[0] + 1]!r})"
        )
    period = 1.0 / sample_rate
    dev = np.abs(d - period) / period
    bad = np.flatnonzero(dev > tol)
    if bad.size:
        raise TrajectorySchemaError(
            f"irregular sampling at sample {bad[0] + 1}: spacing {d[bad[0]]:.6g} s "
            f"vs nominal {period:.6g} s"
        )


def load_trajectory(path, params=None, case_id=None, sample_rate=None):
    """Read a canonical CSV; time stamps are shifted to start at zero."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrajectoryParseError("empty file", line=1) from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise TrajectoryParseError(
                f"bad header {header!r}, expected {','.join(CSV_HEADER)}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(CSV_HEADER):
                raise TrajectoryParseError(
                    f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=lineno
                )
            try:
                values = [float(c) for c in row]
            except ValueError as exc:
                raise TrajectoryParseError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in values):
                raise TrajectoryParseError("non-finite value", line=lineno)
            rows.append(values)
    if not rows:
        raise TrajectorySchemaError(f"{path}: no samples")
    rows = np.array(rows)
    rows[:, 0] -= rows[0, 0]
    if case_id is None:
        case_id = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if len(rows) >= 2:
        check_timing_order(rows[:, 0])
    return PushTrajectory.from_rows(rows, sample_rate=sample_rate, params=params, case_id=case_id)


def check_timing_order(t):
    d = np.diff(t)
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise TrajectorySchemaError(
            f"time stamps not strictly increasing at data row {bad[0] + 2}"
        )


def save_trajectory(traj, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for row in traj.to_rows():
            w.writerow([repr(float(v)) for v in row])


def load_params(path):
    return ObjectParams.from_json(path)


def to_reference_frame(raw):
    c = rotation_matrix(raw.tip_theta)
    return RefSample(
        t=raw.t,
        tip_pos=c @ as_vec2(raw.tip_pos_rbt, "tip_pos_rbt"),
        obj_pos=as_vec2(raw.obj_pos_ref, "obj_pos_ref"),
        obj_theta=raw.obj_theta,
        tip_force=c @ as_vec2(raw.tip_force_rbt, "tip_force_rbt"),
        tip_torque=raw.tip_torque,
    )


@dataclass(frozen=True, eq=False)
class ForcePlan:
    """Sparse wrench samples held (zero-order) until the next plan time."""

    t: np.ndarray
    wrench: np.ndarray  # (k, 3): fx, fy, total torque

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        w = np.asarray(self.wrench, dtype=float).reshape(len(t), 3)
        if len(t) == 0:
            raise ValueError("a force plan needs at least one sample")
        if np.any(np.diff(t) <= 0):
            raise ValueError("plan time stamps must be increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "wrench", w)

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for tk, wk in zip(self.t, self.wrench):
            yield float(tk), Wrench(force=wk[:2], torque=wk[2])

    def hold(self, t_grid, rtol=1e-9):
        """Zero-order-hold values of the plan on ``t_grid``, (n, 3)."""
        t_grid = np.asarray(t_grid, dtype=float)
        eps = rtol * max(1.0, float(np.max(np.abs(self.t))))
        idx = np.searchsorted(self.t, t_grid + eps, side="right") - 1
        return self.wrench[np.clip(idx, 0, len(self.t) - 1)]


def subsample_plan(traj, plan_rate, start=0, stop=None):
    """Every ``sample_rate / plan_rate``-th applied wrench from ``start``.

    The torque column already contains the moment-arm term ``r_m x f_C``.
    """
    if not plan_rate > 0:
        raise ValueError(f"plan_rate must be > 0, got {plan_rate}")
    if plan_rate > traj.sample_rate * (1 + 1e-9):
        raise ValueError(
            f"plan_rate {plan_rate} Hz exceeds the sample rate {traj.sample_rate} Hz"
        )
    stop = len(traj) if stop is None else stop
    stride = max(1, int(round(traj.sample_rate / plan_rate)))
    idx = np.arange(start, stop, stride)
    wrench = traj.applied_wrench()[idx]
    return ForcePlan(t=traj.t[idx], wrench=wrench)
