"""Fixed-base planar revolute chains: inverse/forward dynamics and joint-torque residual estimation.

Joint i rotates link i about the z axis; absolute link angles accumulate along
the chain. With the default gravity (0, -g) in the x-y plane, q = 0 points the
whole chain horizontally along +x.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

STANDARD_GRAVITY = 9.81


@dataclass(frozen=True)
class Link:
    mass: float
    length: float
    com_offset: float
    inertia_about_com: float = 0.0

    def __post_init__(self):
        if self.mass <= 0 or self.length <= 0:
            raise ValueError("link mass and length must be positive")
        if self.inertia_about_com < 0:
            raise ValueError("link inertia must be non-negative")


@dataclass(frozen=True)
class KinematicChain:
    links: tuple
    gravity: tuple = (0.0, -STANDARD_GRAVITY)

    def __post_init__(self):
        links = tuple(l if isinstance(l, Link) else Link(**l) for l in self.links)
        if not links:
            raise ValueError("a chain needs at least one link")
        object.__setattr__(self, "links", links)
        g = np.atleast_1d(np.asarray(self.gravity, dtype=float))
        if g.size == 1:
            g = np.array([0.0, -g[0]])
        if g.shape != (2,) or not np.all(np.isfinite(g)):
            raise ValueError("gravity must be a magnitude or an in-plane 2-vector")
        object.__setattr__(self, "gravity", (float(g[0]), float(g[1])))

    @property
    def n(self):
        return len(self.links)

    def to_dict(self):
        return {"links": [{"mass": l.mass, "length": l.length, "com_offset": l.com_offset,
                           "inertia_about_com": l.inertia_about_com} for l in self.links],
                "gravity": list(self.gravity)}

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"links", "gravity"}
        if unknown:
            raise ValueError(f"unknown chain keys: {sorted(unknown)}")
        for l in d["links"]:
            bad = set(l) - {"mass", "length", "com_offset", "inertia_about_com"}
            if bad:
                raise ValueError(f"unknown link keys: {sorted(bad)}")
        return cls(tuple(Link(**l) for l in d["links"]), d.get("gravity", STANDARD_GRAVITY))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FrictionModel:
    viscous: tuple = ()
    coulomb: tuple = ()

    def __post_init__(self):
        for name in ("viscous", "coulomb"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(v < 0):
                raise ValueError(f"{name} friction must be non-negative")
            object.__setattr__(self, name, tuple(float(x) for x in v))

    def torque(self, qd):
        qd = np.asarray(qd, dtype=float)
        tau = np.zeros_like(qd)
        if self.viscous:
            tau = tau + np.broadcast_to(self.viscous, qd.shape) * qd
        if self.coulomb:
            tau = tau + np.broadcast_to(self.coulomb, qd.shape) * np.sign(qd)
        return tau


NO_FRICTION = FrictionModel()


@dataclass
class ChainState:
    q: np.ndarray
    qd: np.ndarray
    qdd: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.q.shape != self.qd.shape:
            raise ValueError("q and qd must have the same shape")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qd))):
            raise ValueError("chain state must be finite")


def _vec(chain, x, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (chain.n,):
        raise ValueError(f"{name} must have shape ({chain.n},), got {x.shape}")
    return x


def _cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def inverse_dynamics(chain: KinematicChain, q, qd, qdd, gravity=True):
    """Recursive Newton-Euler joint torques for a free (unloaded, frictionless) chain."""
    q = _vec(chain, q, "q")
    qd = _vec(chain, qd, "qd")
    qdd = _vec(chain, qdd, "qdd")
    theta = np.cumsum(q)
    omega = np.cumsum(qd)
    alpha = np.cumsum(qdd)
    # gravity enters as an upward acceleration of the fixed base
    a_joint = -np.array(chain.gravity) if gravity else np.zeros(2)
    r_com, r_tip, a_com = [], [], []
    for i, link in enumerate(chain.links):
        u = np.array([np.cos(theta[i]), np.sin(theta[i])])
        perp = np.array([-u[1], u[0]])
        def accel(r):
            return a_joint + alpha[i] * r * perp - omega[i] ** 2 * r * u
        r_com.append(link.com_offset * u)
        r_tip.append(link.length * u)
        a_com.append(accel(link.com_offset))
        a_joint = accel(link.length)
    tau = np.empty(chain.n)
    f_next = np.zeros(2)
    n_next = 0.0
    for i in reversed(range(chain.n)):
        link = chain.links[i]
        ma = link.mass * a_com[i]
        n_i = (link.inertia_about_com * alpha[i] + n_next + _cross2(r_com[i], ma)
               + _cross2(r_tip[i], f_next))
        f_next = ma + f_next
        n_next = n_i
        tau[i] = n_i
    return tau


def mass_matrix(chain: KinematicChain, q):
    """Joint-space inertia by the unit-acceleration method."""
    q = _vec(chain, q, "q")
    zero = np.zeros(chain.n)
    base = inverse_dynamics(chain, q, zero, zero)
    M = np.empty((chain.n, chain.n))
    for j in range(chain.n):
        e = np.zeros(chain.n)
        e[j] = 1.0
        M[:, j] = inverse_dynamics(chain, q, zero, e) - base
    return 0.5 * (M + M.T)


def bias_torque(chain: KinematicChain, q, qd):
    """C(q, qd) qd + G(q)."""
    return inverse_dynamics(chain, q, qd, np.zeros(chain.n))


def gravity_torque(chain: KinematicChain, q):
    zero = np.zeros(chain.n)
    return inverse_dynamics(chain, q, zero, zero)


def forward_acceleration(chain, q, qd, tau_applied, tau_external=None, friction=NO_FRICTION):
    q = _vec(chain, q, "q")
    qd = _vec(chain, qd, "qd")
    tau = _vec(chain, tau_applied, "tau_applied")
    if tau_external is not None:
        tau = tau + _vec(chain, tau_external, "tau_external")
    rhs = tau - bias_torque(chain, q, qd) - friction.torque(qd)
    return np.linalg.solve(mass_matrix(chain, q), rhs)


def forward_dynamics_step(chain: KinematicChain, state: ChainState, tau_applied, tau_external=None,
                          friction: FrictionModel = NO_FRICTION, dt=1e-3) -> ChainState:
    """Semi-implicit Euler step; the returned state carries the acceleration used."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    qdd = forward_acceleration(chain, state.q, state.qd, tau_applied, tau_external, friction)
    qd = state.qd + dt * qdd
    return ChainState(state.q + dt * qd, qd, qdd)


def link_frames(chain: KinematicChain, q):
    """Joint origins (n+1, 2) and centre-of-mass positions (n, 2)."""
    q = _vec(chain, q, "q")
    theta = np.cumsum(q)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    lengths = np.array([l.length for l in chain.links])
    coms = np.array([l.com_offset for l in chain.links])
    joints = np.vstack([np.zeros(2), np.cumsum(lengths[:, None] * u, axis=0)])
    return joints, joints[:-1] + coms[:, None] * u


def tip_jacobian(chain: KinematicChain, q):
    """2 x n Jacobian of the chain tip position."""
    joints, _ = link_frames(chain, q)
    tip = joints[-1]
    r = tip - joints[:-1]
    return np.stack([-r[:, 1], r[:, 0]])


def pd_torque(kp, kd, q_target, q, qd, limit=None):
    tau = (np.asarray(kp, float) * (np.asarray(q_target, float) - np.asarray(q, float))
           - np.asarray(kd, float) * np.asarray(qd, float))
    if limit is not None:
        limit = np.asarray(limit, dtype=float)
        if np.any(limit < 0):
            raise ValueError("torque limits must be non-negative")
        tau = np.clip(tau, -limit, limit)
    return tau


def estimate_accel(qd_history, dt, smoothing=None):
    """Joint accelerations for every row of a velocity history.

    Interior rows use central differences and the end rows second-order
    one-sided differences (first order when only two rows exist). The last row
    is the causal estimate for the newest sample. ``smoothing`` in (0, 1] is an
    exponential filter weight on the newest value.
    """
    v = np.asarray(qd_history, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if len(v) < 2:
        raise ValueError("acceleration estimate needs at least two velocity frames")
    if dt <= 0:
        raise ValueError("dt must be positive")
    acc = np.gradient(v, dt, axis=0, edge_order=2 if len(v) >= 3 else 1)
    if smoothing is not None:
        if not 0 < smoothing <= 1:
            raise ValueError("smoothing weight must lie in (0, 1]")
        for i in range(1, len(acc)):
            acc[i] = smoothing * acc[i] + (1 - smoothing) * acc[i - 1]
    return acc


def estimate_external_torque(chain: KinematicChain, q, qd, qdd_est, tau_cmd,
                             friction: FrictionModel = NO_FRICTION):
    """Joint-space residual tau_cmd - (M qdd + C qd + G + tau_f).

    This is the projected contact term J^T F with F the force the chain exerts
    on its surroundings; it is the negative of the tau_external fed to
    forward_dynamics_step. Only the product is recoverable, not J or F alone.
    """
    tau_cmd = _vec(chain, tau_cmd, "tau_cmd")
    return tau_cmd - inverse_dynamics(chain, q, qd, qdd_est) - friction.torque(_vec(chain, qd, "qd"))


def estimate_external_torque_log(chain, q_log, qd_log, tau_log, rate_hz, friction=NO_FRICTION,
                                 smoothing=None):
    """Residuals for a whole log sampled at rate_hz, accelerations differenced from qd."""
    q_log = np.asarray(q_log, float)
    qd_log = np.asarray(qd_log, float)
    tau_log = np.asarray(tau_log, float)
    if not (q_log.shape == qd_log.shape == tau_log.shape) or q_log.ndim != 2:
        raise ValueError("q, qd and tau logs must share shape (T, n)")
    acc = estimate_accel(qd_log, 1.0 / rate_hz, smoothing)
    return np.array([estimate_external_torque(chain, q, qd, a, t, friction)
                     for q, qd, a, t in zip(q_log, qd_log, acc, tau_log)])
