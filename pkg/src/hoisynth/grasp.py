"""Force-closure testing and contact projection onto primitive surfaces.

Contacts are soft fingers: each contributes its linearised friction cone plus
a bounded torsional moment about the contact normal. Without the torsional
part no two-contact grasp can resist torque about the line joining the
contacts, which would rule out the classic antipodal pinch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from . import quat
from .geometry import ObjectSpec, closest_surface_point, signed_distance
from .motion import AnchorSpec, Pose

DEFAULT_PATCH_RADIUS = 0.01  # m, soft-finger contact patch used for torsional friction


class ClosureSolverError(RuntimeError):
    pass


@dataclass
class ContactSet:
    points: np.ndarray          # (C, 3) object frame
    normals: np.ndarray         # (C, 3) inward unit normals
    friction_mu: float = 0.5
    cone_edges: int = 8
    patch_radius: float = DEFAULT_PATCH_RADIUS
    characteristic_length: float = 1.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
        if len(self.points) < 1:
            raise ValueError("a contact set needs at least one contact")
        if len(self.points) != len(self.normals):
            raise ValueError("points and normals differ in length")
        if np.any(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0) > 1e-9):
            raise ValueError("contact normals must be unit vectors")
        if self.friction_mu < 0:
            raise ValueError("friction coefficient must be non-negative")
        if self.patch_radius < 0 or self.characteristic_length <= 0:
            raise ValueError("invalid patch radius or characteristic length")

    def transformed(self, pose: Pose) -> "ContactSet":
        return ContactSet(
            pose.position + quat.rotate(pose.orientation, self.points),
            quat.rotate(pose.orientation, self.normals),
            self.friction_mu, self.cone_edges, self.patch_radius, self.characteristic_length,
        )


def _tangent_basis(n):
    helper = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([0.0, 0.0, 1.0])
    t1 = np.cross(helper, n)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def friction_cone_discretize(normal, mu, m_edges):
    n = np.asarray(normal, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("normal must be a unit vector")
    if mu > 0 and m_edges < 3:
        raise ValueError("a friction cone needs at least 3 edges")
    if mu == 0:
        return np.tile(n, (max(m_edges, 1), 1))
    t1, t2 = _tangent_basis(n)
    az = 2 * np.pi * np.arange(m_edges) / m_edges
    e = n + mu * (np.cos(az)[:, None] * t1 + np.sin(az)[:, None] * t2)
    return e / np.linalg.norm(e, axis=1, keepdims=True)


def contact_wrenches(contacts: ContactSet):
    """Generators of the contact wrench cone, shape (W, 6) = [force, torque / L]."""
    L = contacts.characteristic_length
    gamma = contacts.friction_mu * contacts.patch_radius
    rows = []
    for p, n in zip(contacts.points, contacts.normals):
        for f in friction_cone_discretize(n, contacts.friction_mu, contacts.cone_edges):
            tau = np.cross(p, f)
            if gamma > 0:
                spin = gamma * np.dot(n, f) * n
                rows.append(np.concatenate([f, (tau + spin) / L]))
                rows.append(np.concatenate([f, (tau - spin) / L]))
            else:
                rows.append(np.concatenate([f, tau / L]))
    return np.array(rows)


_EPS = 1e-9


def _interior_lp(W):
    """max t s.t. W^T k = 0, sum k = 1, k >= t. Returns t (None if infeasible)."""
    m = len(W)
    # variables: k (m), t
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.zeros((7, m + 1))
    A_eq[:6, :m] = W.T
    A_eq[6, :m] = 1.0
    b_eq = np.zeros(7)
    b_eq[6] = 1.0
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    b_ub = np.zeros(m)
    # sum k = 1 already implies t <= 1/m; stating an explicit bound keeps HiGHS
    # from reporting an unknown status on nearly degenerate generator sets
    bounds = [(0, None)] * m + [(None, 1.0)]
    for method in ("highs", "highs-ipm"):
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method=method)
        if res.status == 2:
            return None
        if res.status == 0:
            return -res.fun
    raise ClosureSolverError(f"closure LP failed: {res.message}")


def _inscribed_radius(W):
    """Radius of the largest origin-centred ball inside conv(W), from hull facets."""
    try:
        hull = ConvexHull(W)
    except QhullError:
        return 0.0
    return float(np.min(-hull.equations[:, -1]))


def _distance_to_hull(W):
    # min ||W^T k|| with k >= 0, sum k = 1 (sum enforced by a heavy penalty row)
    big = 1e4
    A = np.vstack([W.T, big * np.ones((1, len(W)))])
    b = np.zeros(7)
    b[-1] = big
    k, _ = nnls(A, b)
    return float(np.linalg.norm(W.T @ k))


@dataclass
class ClosureResult:
    closure: bool
    margin: float

    def __bool__(self):
        return self.closure


def force_closure_test(contacts: ContactSet, with_margin=True) -> ClosureResult:
    """Decide whether the wrench generators surround the origin of wrench space.

    Closure holds iff the generators span R^6 and some strictly positive
    convex combination of them vanishes (one LP). The margin is the radius of
    the largest origin-centred ball inside the wrench hull; 0 on the boundary
    and minus the origin's distance to the hull when it lies outside.
    """
    W = contact_wrenches(contacts)
    rank = np.linalg.matrix_rank(W, tol=1e-9)
    t = _interior_lp(W)
    if t is None:
        return ClosureResult(False, -_distance_to_hull(W))
    if rank < 6 or t <= _EPS:
        return ClosureResult(False, 0.0)
    return ClosureResult(True, _inscribed_radius(W) if with_margin else float("nan"))


def project_contacts_to_surface(palm_points, object_pose: Pose, spec: ObjectSpec):
    """Move each world point onto the nearest object surface point.

    Returns (adjusted world points, mean correction, inward normals in the
    object frame, adjusted points in the object frame).
    """
    pts = np.asarray(palm_points, dtype=float).reshape(-1, 3)
    inv = object_pose.inverse()
    local = inv.position + quat.rotate(inv.orientation, pts)
    surf = np.empty_like(local)
    normals = np.empty_like(local)
    for i, p in enumerate(local):
        c, n_out = closest_surface_point(spec, p)
        surf[i] = c
        normals[i] = -n_out
    world = object_pose.position + quat.rotate(object_pose.orientation, surf)
    offset = np.mean(world - pts, axis=0)
    return world, offset, normals, surf


@dataclass
class RefinementResult:
    kp_pos: np.ndarray
    contacts: ContactSet
    closure: Optional[ClosureResult]
    mean_offset: np.ndarray

    def report(self):
        checked = self.closure is not None
        return {
            "closure": bool(self.closure.closure) if checked else None,
            "margin": float(self.closure.margin) if checked else None,
            "num_contacts": int(len(self.contacts.points)),
            "mean_offset": [float(x) for x in self.mean_offset],
        }


def refine_contact_frame(kp_names: Sequence[str], kp_pos, object_pose: Pose, spec: ObjectSpec,
                         anchor: AnchorSpec, contact_keypoints: Optional[Sequence[str]] = None,
                         follow_keypoints: Optional[Sequence[str]] = None,
                         mu=0.5, cone_edges=8, patch_radius=DEFAULT_PATCH_RADIUS,
                         check_closure=True) -> RefinementResult:
    """Snap one frame's contact keypoints onto the object surface.

    Contact keypoints default to the anchor's keypoints. `follow_keypoints`
    (default: every other keypoint) are shifted by the same mean correction so
    the hand keeps its shape.
    """
    names = list(kp_names)
    contact_keypoints = list(anchor.keypoint_names if contact_keypoints is None else contact_keypoints)
    idx = []
    for n in contact_keypoints:
        if n not in names:
            raise KeyError(f"contact keypoint {n!r} not found")
        idx.append(names.index(n))
    if follow_keypoints is None:
        follow = [i for i in range(len(names)) if i not in idx]
    else:
        follow = [names.index(n) for n in follow_keypoints if names.index(n) not in idx]
    kp = np.array(kp_pos, dtype=float, copy=True)
    world, offset, normals, surf = project_contacts_to_surface(kp[idx], object_pose, spec)
    kp[idx] = world
    kp[follow] += offset
    contacts = ContactSet(surf, normals, mu, cone_edges, patch_radius, spec.characteristic_length)
    closure = force_closure_test(contacts) if check_closure else None
    return RefinementResult(kp, contacts, closure, offset)


def surface_distances(points_world, object_pose: Pose, spec: ObjectSpec):
    inv = object_pose.inverse()
    local = inv.position + quat.rotate(inv.orientation, np.asarray(points_world, dtype=float))
    return signed_distance(spec, local)
