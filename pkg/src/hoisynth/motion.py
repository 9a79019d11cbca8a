"""Poses, motion clips, anchors and numerical differentiation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import quat
from .quat import slerp  # noqa: F401  (re-exported as part of the motion API)

DEFAULT_FPS = 30.0


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        q = quat.tidy(np.asarray(self.orientation, dtype=float).reshape(4), "orientation")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    @classmethod
    def identity(cls):
        return cls(np.zeros(3), quat.IDENTITY)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` expressed in this pose's frame."""
        return Pose(self.position + quat.rotate(self.orientation, other.position),
                    quat.mul(self.orientation, other.orientation))

    def inverse(self) -> "Pose":
        qi = quat.conj(self.orientation)
        return Pose(-quat.rotate(qi, self.position), qi)

    def to_dict(self):
        return {"p": self.position.tolist(), "q": self.orientation.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["p"], d["q"])


def compose_arrays(pa, qa, pb, qb):
    """Vectorised pose composition on (T, 3)/(T, 4) stacks."""
    return pa + quat.rotate(qa, pb), quat.normalize(quat.mul(qa, qb))


def invert_arrays(p, q):
    qi = quat.conj(q)
    return -quat.rotate(qi, p), qi


@dataclass
class PoseSeries:
    fps: float
    positions: np.ndarray          # (T, 3)
    orientations: np.ndarray       # (T, 4)
    lin_vel: Optional[np.ndarray] = None
    ang_vel: Optional[np.ndarray] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.orientations = quat.tidy(
            np.asarray(self.orientations, dtype=float).reshape(-1, 4), "orientations")
        if len(self.positions) != len(self.orientations):
            raise ValueError("positions and orientations differ in length")
        if self.fps <= 0:
            raise ValueError("fps must be positive")

    def __len__(self):
        return len(self.positions)

    def pose(self, i) -> Pose:
        return Pose(self.positions[i], self.orientations[i])

    def slice(self, start, stop) -> "PoseSeries":
        sl = slice(start, stop)
        return PoseSeries(
            self.fps, self.positions[sl], self.orientations[sl],
            None if self.lin_vel is None else self.lin_vel[sl],
            None if self.ang_vel is None else self.ang_vel[sl],
        )


@dataclass
class MotionClip:
    """Humanoid motion sampled at a fixed rate.

    Stored as arrays rather than per-frame records: root pose (T,3)/(T,4),
    joint angles (T,N), keypoint poses (T,K,3)/(T,K,4).
    """

    fps: float
    joint_names: list
    keypoint_names: list
    root_pos: np.ndarray
    root_quat: np.ndarray
    dof: np.ndarray
    kp_pos: np.ndarray
    kp_quat: np.ndarray
    dof_vel: Optional[np.ndarray] = None

    def __post_init__(self):
        self.joint_names = list(self.joint_names)
        self.keypoint_names = list(self.keypoint_names)
        self.root_pos = np.asarray(self.root_pos, dtype=float).reshape(-1, 3)
        self.root_quat = quat.tidy(
            np.asarray(self.root_quat, dtype=float).reshape(-1, 4), "root orientation")
        T = len(self.root_pos)
        K = len(self.keypoint_names)
        self.dof = np.asarray(self.dof, dtype=float).reshape(T, len(self.joint_names))
        self.kp_pos = np.asarray(self.kp_pos, dtype=float).reshape(T, K, 3)
        self.kp_quat = quat.tidy(
            np.asarray(self.kp_quat, dtype=float).reshape(T, K, 4), "keypoint orientation")
        if self.dof_vel is not None:
            self.dof_vel = np.asarray(self.dof_vel, dtype=float).reshape(self.dof.shape)
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        if T < 2:
            raise ValueError(f"a motion clip needs at least 2 frames, got {T}")
        if len(set(self.keypoint_names)) != K:
            raise ValueError("duplicate keypoint names")

    def __len__(self):
        return len(self.root_pos)

    @property
    def dt(self):
        return 1.0 / self.fps

    def keypoint_index(self, name, frame=None):
        try:
            return self.keypoint_names.index(name)
        except ValueError:
            where = "" if frame is None else f" at frame {frame}"
            raise KeyError(f"keypoint {name!r} not found{where}") from None

    def keypoint_series(self, name) -> PoseSeries:
        k = self.keypoint_index(name, frame=0)
        return PoseSeries(self.fps, self.kp_pos[:, k], self.kp_quat[:, k])

    def copy(self) -> "MotionClip":
        return MotionClip(
            self.fps, list(self.joint_names), list(self.keypoint_names),
            self.root_pos.copy(), self.root_quat.copy(), self.dof.copy(),
            self.kp_pos.copy(), self.kp_quat.copy(),
            None if self.dof_vel is None else self.dof_vel.copy(),
        )

    # -- JSON ---------------------------------------------------------------

    def to_dict(self):
        frames = []
        for t in range(len(self)):
            fr = {
                "root": {"p": self.root_pos[t].tolist(), "q": self.root_quat[t].tolist()},
                "dof": self.dof[t].tolist(),
                "keypoints": {
                    name: {"p": self.kp_pos[t, k].tolist(), "q": self.kp_quat[t, k].tolist()}
                    for k, name in enumerate(self.keypoint_names)
                },
            }
            if self.dof_vel is not None:
                fr["dof_vel"] = self.dof_vel[t].tolist()
            frames.append(fr)
        return {
            "fps": self.fps,
            "joint_names": self.joint_names,
            "keypoint_names": self.keypoint_names,
            "frames": frames,
        }

    @classmethod
    def from_dict(cls, d):
        for key in ("fps", "joint_names", "keypoint_names", "frames"):
            if key not in d:
                raise ValueError(f"motion clip is missing {key!r}")
        names = list(d["keypoint_names"])
        frames = d["frames"]
        if len(frames) < 2:
            raise ValueError(f"a motion clip needs at least 2 frames, got {len(frames)}")
        n_dof = len(d["joint_names"])
        has_vel = "dof_vel" in frames[0]
        root_p, root_q, dof, kp_p, kp_q, dof_vel = [], [], [], [], [], []
        for t, fr in enumerate(frames):
            if len(fr["dof"]) != n_dof:
                raise ValueError(f"frame {t}: expected {n_dof} dof values, got {len(fr['dof'])}")
            kps = fr["keypoints"]
            if set(kps) != set(names):
                missing = sorted(set(names) - set(kps))
                extra = sorted(set(kps) - set(names))
                raise ValueError(f"frame {t}: keypoint set mismatch (missing {missing}, extra {extra})")
            if ("dof_vel" in fr) != has_vel:
                raise ValueError(f"frame {t}: dof_vel present on some frames only")
            root_p.append(fr["root"]["p"])
            root_q.append(fr["root"]["q"])
            dof.append(fr["dof"])
            kp_p.append([kps[n]["p"] for n in names])
            kp_q.append([kps[n]["q"] for n in names])
            if has_vel:
                dof_vel.append(fr["dof_vel"])
        return cls(float(d["fps"]), d["joint_names"], names, np.array(root_p), np.array(root_q),
                   np.array(dof, dtype=float).reshape(len(frames), n_dof), np.array(kp_p),
                   np.array(kp_q), np.array(dof_vel) if has_vel else None)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MotionClip":
        return cls.from_dict(json.loads(text))


ANCHOR_KINDS = ("midpoint", "single")
ORIENTATION_RULES = ("keypoint-a", "averaged", "constructed-frame")


@dataclass(frozen=True)
class AnchorSpec:
    kind: str = "midpoint"
    keypoint_names: tuple = ("left_palm", "right_palm")
    orientation_rule: str = "keypoint-a"

    def __post_init__(self):
        object.__setattr__(self, "keypoint_names", tuple(self.keypoint_names))
        if self.kind not in ANCHOR_KINDS:
            raise ValueError(f"unknown anchor kind {self.kind!r}")
        if self.orientation_rule not in ORIENTATION_RULES:
            raise ValueError(f"unknown orientation rule {self.orientation_rule!r}")
        need = 2 if self.kind == "midpoint" else 1
        if len(self.keypoint_names) != need:
            raise ValueError(f"{self.kind} anchor needs {need} keypoint name(s)")

    def to_dict(self):
        return {"kind": self.kind, "keypoint_names": list(self.keypoint_names),
                "orientation_rule": self.orientation_rule}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", "midpoint"), tuple(d["keypoint_names"]),
                   d.get("orientation_rule", "keypoint-a"))


def _constructed_frame(pa, pb, qa):
    # x: palm a -> palm b, z: keypoint a's up axis orthogonalised against x.
    x = pb - pa
    x = x / np.linalg.norm(x, axis=-1, keepdims=True)
    up = quat.rotate(qa, np.array([0.0, 0.0, 1.0]))
    z = up - np.sum(up * x, axis=-1, keepdims=True) * x
    bad = np.linalg.norm(z, axis=-1) < 1e-9
    if np.any(bad):
        alt = np.cross(x[bad], np.array([0.0, 1.0, 0.0]))
        z[bad] = alt
    z = z / np.linalg.norm(z, axis=-1, keepdims=True)
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=-1)
    return _matrix_to_quat(R)


def _matrix_to_quat(R):
    from scipy.spatial.transform import Rotation

    xyzw = Rotation.from_matrix(R).as_quat()
    return quat.normalize(np.concatenate([xyzw[..., 3:], xyzw[..., :3]], axis=-1))


def anchor_from_keypoints(names, kp_pos, kp_quat, spec: AnchorSpec):
    """Anchor position/orientation from keypoint arrays of shape (..., K, 3|4)."""
    names = list(names)
    idx = []
    for n in spec.keypoint_names:
        if n not in names:
            raise KeyError(f"anchor keypoint {n!r} not found")
        idx.append(names.index(n))
    if spec.kind == "single":
        return kp_pos[..., idx[0], :].copy(), kp_quat[..., idx[0], :].copy()
    pa, pb = kp_pos[..., idx[0], :], kp_pos[..., idx[1], :]
    qa, qb = kp_quat[..., idx[0], :], kp_quat[..., idx[1], :]
    pos = 0.5 * (pa + pb)
    if spec.orientation_rule == "keypoint-a":
        q = qa.copy()
    elif spec.orientation_rule == "averaged":
        flat_a, flat_b = qa.reshape(-1, 4), qb.reshape(-1, 4)
        q = np.array([quat.slerp(a, b, 0.5) for a, b in zip(flat_a, flat_b)]).reshape(qa.shape)
    else:
        q = _constructed_frame(pa.reshape(-1, 3), pb.reshape(-1, 3),
                               qa.reshape(-1, 4)).reshape(qa.shape)
    return pos, q


def anchor_arrays(clip: MotionClip, spec: AnchorSpec):
    """Anchor positions (T,3) and orientations (T,4) for every frame of `clip`."""
    for n in spec.keypoint_names:
        clip.keypoint_index(n, frame=0)
    return anchor_from_keypoints(clip.keypoint_names, clip.kp_pos, clip.kp_quat, spec)


def derive_anchor_trajectory(clip: MotionClip, spec: AnchorSpec) -> PoseSeries:
    pos, q = anchor_arrays(clip, spec)
    return PoseSeries(clip.fps, pos, q)


def finite_difference_velocities(series: PoseSeries) -> PoseSeries:
    """Linear and world-frame angular velocities by finite differences.

    Central differences in the interior, one-sided at the two ends.
    """
    n = len(series)
    if n < 2:
        raise ValueError("need at least 2 poses to differentiate")
    dt = 1.0 / series.fps
    lin = np.gradient(series.positions, dt, axis=0)
    q = series.orientations
    ang = np.empty((n, 3))
    if n == 2:
        w = quat.log_map(quat.mul(q[1], quat.conj(q[0]))) / dt
        ang[:] = w
    else:
        ang[1:-1] = quat.log_map(quat.mul(q[2:], quat.conj(q[:-2]))) / (2 * dt)
        ang[0] = quat.log_map(quat.mul(q[1], quat.conj(q[0]))) / dt
        ang[-1] = quat.log_map(quat.mul(q[-1], quat.conj(q[-2]))) / dt
    return PoseSeries(series.fps, series.positions.copy(), q.copy(), lin, ang)


def make_clip(fps, joint_names: Sequence[str], keypoint_names: Sequence[str], T: int):
    """Zero-initialised clip (identity orientations), handy for fixtures."""
    K = len(keypoint_names)
    return MotionClip(
        fps, joint_names, keypoint_names,
        np.zeros((T, 3)), np.tile(quat.IDENTITY, (T, 1)), np.zeros((T, len(joint_names))),
        np.zeros((T, K, 3)), np.tile(quat.IDENTITY, (T, K, 1)),
    )
