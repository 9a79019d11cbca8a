"""Free-flight rigid object dynamics with linear drag and a ground plane.

The integrator is velocity-Verlet with the drag term treated trapezoidally:

    v' (1 + c dt/2) = v (1 - c dt/2) + g dt
    x' = x + (v + v') dt / 2

For c = 0 this is exactly classical velocity-Verlet. For any c the map is
exactly invertible by stepping from (x', -v') with c -> -c, which is what
makes reverse simulation with inverted damping reproduce forward flights to
rounding error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import quat
from .motion import Pose


class GroundContactError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class SimParams:
    gravity: tuple = (0.0, 0.0, -9.81)
    linear_damping: float = 0.0
    angular_damping: float = 0.0
    restitution: float = 0.6
    ground_height: float = 0.0
    dt: float = 1e-3
    # distance from the tracked centre to the object's lowest point; the ground
    # test is applied to (z - collision_radius)
    collision_radius: float = 0.0
    # set only by inverted(): backward integration runs with negated damping
    backward: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))
        if len(self.gravity) != 3:
            raise ValueError("gravity must be a 3-vector")
        if not 0 < self.dt <= 0.02:
            raise ValueError(f"dt must lie in (0, 0.02], got {self.dt}")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")
        if not self.backward and (self.linear_damping < 0 or self.angular_damping < 0):
            raise ValueError("damping coefficients must be non-negative")
        if self.collision_radius < 0:
            raise ValueError("collision_radius must be non-negative")

    def inverted(self) -> "SimParams":
        """Same parameters with damping signs flipped, for backward integration."""
        return replace(self, linear_damping=-self.linear_damping,
                       angular_damping=-self.angular_damping, backward=not self.backward)

    def to_dict(self):
        return {
            "gravity": list(self.gravity), "linear_damping": self.linear_damping,
            "angular_damping": self.angular_damping, "restitution": self.restitution,
            "ground_height": self.ground_height, "dt": self.dt,
            "collision_radius": self.collision_radius,
        }

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - (set(cls.__dataclass_fields__) - {"backward"})
        if unknown:
            raise ValueError(f"unknown simulation keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class BodyState:
    pose: Pose
    lin_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ang_vel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "lin_vel", np.asarray(self.lin_vel, dtype=float).reshape(3))
        object.__setattr__(self, "ang_vel", np.asarray(self.ang_vel, dtype=float).reshape(3))

    @property
    def position(self):
        return self.pose.position

    @classmethod
    def at(cls, position, lin_vel=(0, 0, 0), orientation=quat.IDENTITY, ang_vel=(0, 0, 0)):
        return cls(Pose(position, orientation), lin_vel, ang_vel)


def _advance(p, q, v, w, params, dt, ground=True):
    g = np.asarray(params.gravity)
    c = params.linear_damping
    ca = params.angular_damping
    h = 0.5 * c * dt
    v_new = (v * (1.0 - h) + g * dt) / (1.0 + h)
    p_new = p + 0.5 * (v + v_new) * dt
    ha = 0.5 * ca * dt
    w_new = w * (1.0 - ha) / (1.0 + ha)
    q_new = quat.normalize(quat.mul(quat.exp_map(0.5 * (w + w_new) * dt), q))
    bounced = False
    if ground:
        floor = params.ground_height + params.collision_radius
        if p_new[2] < floor:
            p_new = p_new.copy()
            v_new = v_new.copy()
            p_new[2] = 2.0 * floor - p_new[2]
            v_new[2] = -params.restitution * v_new[2]
            bounced = True
    return p_new, q_new, v_new, w_new, bounced


def step(state: BodyState, params: SimParams, dt=None) -> BodyState:
    dt = params.dt if dt is None else dt
    p, q, v, w, _ = _advance(state.pose.position, state.pose.orientation,
                             state.lin_vel, state.ang_vel, params, dt)
    return BodyState(Pose(p, q), v, w)


def _run(state0, params, n_steps, dt, ground=True, on_bounce=None):
    """Same update as `_advance`, unrolled on plain floats for speed.

    Angular velocity never depends on the pose, so its sequence and the
    per-step rotation increments are computed up front, vectorised.
    """
    P = np.empty((n_steps + 1, 3))
    Q = np.empty((n_steps + 1, 4))
    V = np.empty((n_steps + 1, 3))
    W = np.empty((n_steps + 1, 3))
    P[0], Q[0] = state0.pose.position, state0.pose.orientation
    V[0], W[0] = state0.lin_vel, state0.ang_vel
    ha = 0.5 * params.angular_damping * dt
    decay = (1.0 - ha) / (1.0 + ha)
    w = W[0].copy()
    for i in range(1, n_steps + 1):
        w = w * decay
        W[i] = w
    inc = quat.exp_map(0.5 * (W[:-1] + W[1:]) * dt).tolist() if n_steps else []

    gx, gy, gz = (float(x) for x in params.gravity)
    h = 0.5 * params.linear_damping * dt
    keep, div = 1.0 - h, 1.0 + h
    floor = params.ground_height + params.collision_radius
    e = params.restitution
    px, py, pz = P[0].tolist()
    vx, vy, vz = V[0].tolist()
    qw, qx, qy, qz = Q[0].tolist()
    for i in range(1, n_steps + 1):
        nvx = (vx * keep + gx * dt) / div
        nvy = (vy * keep + gy * dt) / div
        nvz = (vz * keep + gz * dt) / div
        px += 0.5 * (vx + nvx) * dt
        py += 0.5 * (vy + nvy) * dt
        pz += 0.5 * (vz + nvz) * dt
        vx, vy, vz = nvx, nvy, nvz
        if ground and pz < floor:
            pz = 2.0 * floor - pz
            vz = -e * vz
            if on_bounce is not None:
                on_bounce(i)
        aw, ax, ay, az = inc[i - 1]
        qw, qx, qy, qz = (aw * qw - ax * qx - ay * qy - az * qz,
                          aw * qx + ax * qw + ay * qz - az * qy,
                          aw * qy - ax * qz + ay * qw + az * qx,
                          aw * qz + ax * qy - ay * qx + az * qw)
        nq = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        qw, qx, qy, qz = qw / nq, qx / nq, qy / nq, qz / nq
        P[i] = px, py, pz
        V[i] = vx, vy, vz
        Q[i] = qw, qx, qy, qz
    return P, Q, V, W


@dataclass
class Trajectory:
    """States sampled every `dt` seconds; index 0 is the initial state."""

    dt: float
    positions: np.ndarray
    orientations: np.ndarray
    lin_vel: np.ndarray
    ang_vel: np.ndarray

    def __len__(self):
        return len(self.positions)

    def state(self, i) -> BodyState:
        return BodyState(Pose(self.positions[i], self.orientations[i]),
                         self.lin_vel[i], self.ang_vel[i])

    @property
    def times(self):
        return np.arange(len(self)) * self.dt

    def subsample(self, every: int) -> "Trajectory":
        sl = slice(None, None, every)
        return Trajectory(self.dt * every, self.positions[sl], self.orientations[sl],
                          self.lin_vel[sl], self.ang_vel[sl])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for i in range(len(self)):
            row = [i * self.dt, *self.positions[i], *self.orientations[i],
                   *self.lin_vel[i], *self.ang_vel[i]]
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


TRAJECTORY_COLUMNS = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz",
                      "vx", "vy", "vz", "wx", "wy", "wz"]


def simulate_forward(state0: BodyState, params: SimParams, n_steps: int, dt=None) -> Trajectory:
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    dt = params.dt if dt is None else dt
    return Trajectory(dt, *_run(state0, params, n_steps, dt))


def simulate_reverse(state_end: BodyState, params: SimParams, n_steps: int, dt=None) -> Trajectory:
    """Trajectory in forward time order that ends exactly at `state_end`.

    Integrates backward from the end state with velocities negated and
    damping inverted, then reverses the record. Bounces cannot be undone, so
    reaching the ground during the backward pass is an error.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    dt = params.dt if dt is None else dt
    back = BodyState(state_end.pose, -state_end.lin_vel, -state_end.ang_vel)

    def hit(i):
        raise GroundContactError(
            f"reverse simulation reached the ground {i} step(s) before the end state")

    P, Q, V, W = _run(back, params.inverted(), n_steps, dt, ground=True, on_bounce=hit)
    P, Q, V, W = P[::-1].copy(), Q[::-1].copy(), -V[::-1], -W[::-1]
    P[-1] = state_end.pose.position
    Q[-1] = state_end.pose.orientation
    V[-1] = state_end.lin_vel
    W[-1] = state_end.ang_vel
    return Trajectory(dt, P, Q, V, W)


def substeps_for(frame_dt: float, params: SimParams) -> int:
    return max(1, math.ceil(frame_dt / params.dt - 1e-9))


def solve_initial_velocity(p0, target, flight_time, params: SimParams, max_iter=20, tol=1e-10):
    """Launch velocity that carries a body from p0 to target in flight_time.

    Damped Newton shooting on the landing-position residual, starting from the
    drag-free closed form. The flight must stay above the ground.
    """
    p0 = np.asarray(p0, dtype=float).reshape(3)
    target = np.asarray(target, dtype=float).reshape(3)
    if not flight_time > 0:
        raise ValueError("flight_time must be positive")
    n = max(1, math.ceil(flight_time / params.dt - 1e-9))
    dt = flight_time / n
    g = np.asarray(params.gravity)

    def landing(v0):
        P, _, _, _ = _run(BodyState.at(p0, v0), params, n, dt, ground=False)
        return P

    def residual(v0):
        return landing(v0)[-1] - target

    v = (target - p0 - 0.5 * g * flight_time**2) / flight_time
    r = residual(v)
    eps = 1e-6
    for _ in range(max_iter):
        if np.linalg.norm(r) < tol:
            break
        J = np.empty((3, 3))
        for j in range(3):
            dv = np.zeros(3)
            dv[j] = eps
            J[:, j] = (residual(v + dv) - r) / eps
        delta = np.linalg.solve(J, -r)
        alpha = 1.0
        while True:
            v_try = v + alpha * delta
            r_try = residual(v_try)
            if np.linalg.norm(r_try) < np.linalg.norm(r) or alpha < 1e-4:
                break
            alpha *= 0.5
        v, r = v_try, r_try
    if np.linalg.norm(r) > 1e-6:
        raise ConvergenceError(
            f"shooting did not converge; residual {np.linalg.norm(r):.3e} m", residual=r)
    P = landing(v)
    floor = params.ground_height + params.collision_radius
    if np.min(P[:, 2]) < floor:
        raise GroundContactError("solved flight passes below the ground")
    return v
