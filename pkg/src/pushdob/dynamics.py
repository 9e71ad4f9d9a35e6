"""Planar rigid-body types, equations of motion and a fixed-step RK4 integrator.

Vectors are plain ``numpy`` arrays of shape (2,). Angles are kept unwrapped.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .validation import as_vec2, check_finite_scalar, check_positive

#: 250 Hz logging period of the push data.
DEFAULT_DT = 1.0 / 250.0


class IntegrationDivergedError(FloatingPointError):
    """Raised when the integrator produces a non-finite state."""


@dataclass(frozen=True)
class ObjectParams:
    """Nominal inertia and footprint of the pushed object (SI units)."""

    mass: float = 1.045
    inertia: float = 0.0018
    width: float = 0.090
    length: float = 0.1125

    def __post_init__(self):
        for name in ("mass", "inertia", "width", "length"):
            object.__setattr__(self, name, check_positive(getattr(self, name), name))

    def to_dict(self):
        return {
            "mass": self.mass,
            "inertia": self.inertia,
            "width": self.width,
            "length": self.length,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            mass=d["mass"], inertia=d["inertia"], width=d["width"], length=d["length"]
        )

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


@dataclass(frozen=True)
class Wrench:
    force: np.ndarray = field(default_factory=lambda: np.zeros(2))
    torque: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "force", as_vec2(self.force, "force"))
        object.__setattr__(self, "torque", check_finite_scalar(float(self.torque), "torque"))

    def as_array(self):
        return np.array([self.force[0], self.force[1], self.torque])

    @classmethod
    def from_array(cls, a):
        return cls(force=a[:2], torque=float(a[2]))


@dataclass(frozen=True)
class PlanarState:
    pos: np.ndarray = field(default_factory=lambda: np.zeros(2))
    theta: float = 0.0
    vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pos", as_vec2(self.pos, "pos"))
        object.__setattr__(self, "vel", as_vec2(self.vel, "vel"))
        object.__setattr__(self, "theta", check_finite_scalar(float(self.theta), "theta"))
        object.__setattr__(self, "omega", check_finite_scalar(float(self.omega), "omega"))

    def pose(self):
        """Return ``[x, y, theta]``."""
        return np.array([self.pos[0], self.pos[1], self.theta])


def rotation_matrix(alpha):
    """Direction cosine matrix rotating a vector by ``alpha`` radians."""
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]])


def rotate(vectors, alpha):
    """Rotate (n, 2) ``vectors`` by per-row angles ``alpha`` (vectorised C(alpha) v)."""
    vectors = np.asarray(vectors, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    c, s = np.cos(alpha), np.sin(alpha)
    x, y = vectors[..., 0], vectors[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)


def accel_from_wrench(w, p):
    """Newton-Euler for a free planar body: returns (linear accel, angular accel)."""
    return w.force / p.mass, w.torque / p.inertia


def moment_arm_torque(tip_pos, obj_pos, f):
    """z-component of ``(tip_pos - obj_pos) x f``; broadcasts over leading axes."""
    r = np.asarray(tip_pos, dtype=float) - np.asarray(obj_pos, dtype=float)
    f = np.asarray(f, dtype=float)
    return r[..., 0] * f[..., 1] - r[..., 1] * f[..., 0]


def _derivative(y, accel, alpha):
    # y = [x, y, theta, vx, vy, omega]
    return np.array([y[3], y[4], y[5], accel[0], accel[1], alpha])


def integrate_step(s, wrench_fn, p, t, dt):
    """Advance ``s`` by one RK4 step of the double-integrator dynamics.

    ``wrench_fn(t)`` is sampled once at the start of the step and held over
    it (zero-order hold), as the inputs are sampled signals.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    accel, alpha = accel_from_wrench(wrench_fn(t), p)
    y = np.array([s.pos[0], s.pos[1], s.theta, s.vel[0], s.vel[1], s.omega])
    k1 = _derivative(y, accel, alpha)
    k2 = _derivative(y + 0.5 * dt * k1, accel, alpha)
    k3 = _derivative(y + 0.5 * dt * k2, accel, alpha)
    k4 = _derivative(y + dt * k3, accel, alpha)
    y_next = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y_next)):
        raise IntegrationDivergedError(f"non-finite state at t={t + dt:.6g} s")
    return PlanarState(pos=y_next[0:2], theta=y_next[2], vel=y_next[3:5], omega=y_next[5])


def simulate(start, wrenches, p, dt=DEFAULT_DT, t0=0.0):
    """Integrate from ``start`` under a sampled wrench sequence.

    ``wrenches`` is (n, 3) ``[fx, fy, tau]`` held over each step. Returns a
    list of ``n + 1`` states, the first being ``start``.
    """
    wrenches = np.asarray(wrenches, dtype=float)
    states = [start]
    s = start
    for k, row in enumerate(wrenches):
        w = Wrench(force=row[:2], torque=row[2])
        s = integrate_step(s, lambda _t, w=w: w, p, t0 + k * dt, dt)
        states.append(s)
    return states


def states_to_arrays(states):
    """Stack states into (pose (n, 3), velocity (n, 3)) arrays."""
    pose = np.array([[s.pos[0], s.pos[1], s.theta] for s in states])
    vel = np.array([[s.vel[0], s.vel[1], s.omega] for s in states])
    return pose, vel
