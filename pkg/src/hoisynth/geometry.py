"""Analytic primitive shapes: signed distance, closest surface point, normals.

Shapes are expressed in their own object frame, centred at the origin.
Cylinders are aligned with the local z axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quat

SHAPES = ("sphere", "box", "cylinder")


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    dims: tuple          # sphere: (r,), box: (lx, ly, lz), cylinder: (r, h)
    mass: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown geometry {self.shape!r}; expected one of {SHAPES}")
        dims = tuple(float(d) for d in np.atleast_1d(self.dims))
        expected = {"sphere": 1, "box": 3, "cylinder": 2}[self.shape]
        if len(dims) != expected:
            raise ValueError(f"{self.shape} needs {expected} dimension(s), got {len(dims)}")
        if any(d <= 0 for d in dims):
            raise ValueError("object dimensions must be positive")
        if not self.mass > 0:
            raise ValueError("object mass must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "mass", float(self.mass))

    def scaled(self, s: float) -> "ObjectSpec":
        if not s > 0:
            raise ValueError(f"scale must be positive, got {s}")
        return ObjectSpec(self.shape, tuple(d * s for d in self.dims), self.mass)

    @property
    def characteristic_length(self) -> float:
        """Largest bounding dimension."""
        if self.shape == "sphere":
            return 2 * self.dims[0]
        if self.shape == "box":
            return max(self.dims)
        r, h = self.dims
        return max(2 * r, h)

    def to_dict(self):
        return {"shape": self.shape, "dims": list(self.dims), "mass": self.mass}

    @classmethod
    def from_dict(cls, d):
        return cls(d["shape"], tuple(d["dims"]), d.get("mass", 1.0))


def signed_distance(spec: ObjectSpec, p):
    """Signed distance from local point(s) p to the surface (negative inside)."""
    p = np.asarray(p, dtype=float)
    if spec.shape == "sphere":
        return np.linalg.norm(p, axis=-1) - spec.dims[0]
    if spec.shape == "box":
        h = 0.5 * np.array(spec.dims)
        d = np.abs(p) - h
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(np.max(d, axis=-1), 0.0)
        return outside + inside
    r, hh = spec.dims[0], 0.5 * spec.dims[1]
    rho = np.linalg.norm(p[..., :2], axis=-1)
    d = np.stack([rho - r, np.abs(p[..., 2]) - hh], axis=-1)
    return np.minimum(np.max(d, axis=-1), 0.0) + np.linalg.norm(np.maximum(d, 0.0), axis=-1)


def _sphere_closest(r, p):
    n = np.linalg.norm(p)
    direction = np.array([1.0, 0.0, 0.0]) if n < 1e-12 else p / n
    return r * direction, direction


def _box_closest(dims, p):
    h = 0.5 * np.array(dims)
    inside = np.all(np.abs(p) <= h)
    if not inside:
        c = np.clip(p, -h, h)
        # outward normal of the face/edge/corner region the point projects onto
        diff = p - c
        return c, diff / np.linalg.norm(diff)
    # interior: push out through the nearest face; ties go to +x, then +y, +z
    gaps = []
    for axis in range(3):
        gaps.append((h[axis] - p[axis], axis, 1.0))
        gaps.append((h[axis] + p[axis], axis, -1.0))
    best = min(gaps, key=lambda g: (round(g[0], 12), g[1], -g[2]))
    _, axis, sign = best
    c = p.copy()
    c[axis] = sign * h[axis]
    n = np.zeros(3)
    n[axis] = sign
    return c, n


def _cylinder_closest(dims, p):
    r, hh = dims[0], 0.5 * dims[1]
    rho = np.hypot(p[0], p[1])
    radial = np.array([1.0, 0.0]) if rho < 1e-12 else p[:2] / rho
    if rho <= r and abs(p[2]) <= hh:
        side_gap = r - rho
        cap_gap = hh - abs(p[2])
        if side_gap <= cap_gap:
            c = np.array([radial[0] * r, radial[1] * r, p[2]])
            return c, np.array([radial[0], radial[1], 0.0])
        sign = 1.0 if p[2] >= 0 else -1.0
        return np.array([p[0], p[1], sign * hh]), np.array([0.0, 0.0, sign])
    cr = min(rho, r)
    cz = np.clip(p[2], -hh, hh)
    c = np.array([radial[0] * cr, radial[1] * cr, cz])
    diff = p - c
    return c, diff / np.linalg.norm(diff)


def closest_surface_point(spec: ObjectSpec, p):
    """Nearest surface point and outward unit normal there, for a local point p.

    Degenerate interior points (sphere centre, medial axis) resolve
    deterministically toward +x.
    """
    p = np.asarray(p, dtype=float).reshape(3)
    if spec.shape == "sphere":
        return _sphere_closest(spec.dims[0], p)
    if spec.shape == "box":
        return _box_closest(spec.dims, p)
    return _cylinder_closest(spec.dims, p)


def lowest_point(spec: ObjectSpec, position, orientation):
    """World height of the lowest point of the oriented shape."""
    z = float(np.asarray(position)[2])
    if spec.shape == "sphere":
        return z - spec.dims[0]
    R = quat.to_matrix(orientation)
    if spec.shape == "box":
        h = 0.5 * np.array(spec.dims)
        return z - float(np.sum(np.abs(R[2, :]) * h))
    r, hh = spec.dims[0], 0.5 * spec.dims[1]
    c = abs(R[2, 2])
    return z - (c * hh + r * np.sqrt(max(0.0, 1.0 - c * c)))
