"""Quaternion helpers. Convention: (w, x, y, z), right-handed, z-up world.

All functions accept single quaternions of shape (4,) or stacks of shape (..., 4).
"""

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])
UNIT_TOL = 1e-6


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def check_unit(q, name="quaternion", tol=UNIT_TOL):
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != 4:
        raise ValueError(f"{name} must have 4 components, got shape {q.shape}")
    err = np.abs(np.linalg.norm(q, axis=-1) - 1.0)
    if np.any(err > tol):
        raise ValueError(f"{name} is not unit length (norm error {np.max(err):.3g})")
    return q


def tidy(q, name="quaternion"):
    """Validate unit length, renormalising only rows that are measurably off.

    Leaves exactly-normalised data bit-for-bit untouched so serialisation
    round trips are stable.
    """
    q = check_unit(q, name)
    err = np.abs(np.linalg.norm(q, axis=-1, keepdims=True) - 1.0)
    return np.where(err > 1e-12, normalize(q), q)


def conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def mul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def rotate(q, v):
    """Rotate vector(s) v by quaternion(s) q."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., :1]
    u = q[..., 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def to_matrix(q):
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    m = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return m.reshape(m.shape[:-1] + (3, 3))


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, dtype=float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def exp_map(rotvec):
    """Quaternion for a rotation vector (axis * angle)."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = np.linalg.norm(rotvec, axis=-1, keepdims=True)
    half = 0.5 * angle
    # sin(half)/angle -> 0.5 as angle -> 0
    small = angle < 1e-8
    safe = np.where(small, 1.0, angle)
    k = np.where(small, 0.5 - angle**2 / 48.0, np.sin(half) / safe)
    return np.concatenate([np.cos(half), k * rotvec], axis=-1)


def log_map(q):
    """Rotation vector of q, taking the shortest arc (|angle| <= pi)."""
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0, -q, q)
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    angle = 2.0 * np.arctan2(s, q[..., :1])
    small = s < 1e-12
    k = np.where(small, 2.0, angle / np.where(small, 1.0, s))
    return k * v


def angle_between(a, b):
    """Geodesic angle between orientations, robust near identity and double-cover aware."""
    d = mul(conj(a), b)
    s = np.linalg.norm(np.asarray(d)[..., 1:], axis=-1)
    return 2.0 * np.arcsin(np.minimum(1.0, s))


def slerp(q0, q1, u):
    """Spherical interpolation on the shortest arc between unit quaternions."""
    q0 = check_unit(q0, "q0")
    q1 = check_unit(q1, "q1")
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"interpolation parameter must lie in [0, 1], got {u}")
    d = mul(conj(q0), q1)
    if d[0] < 0:
        d = -d
    return normalize(mul(q0, exp_map(u * log_map(d))))
