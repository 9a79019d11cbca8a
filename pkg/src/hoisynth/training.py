"""Deterministic ingredients for an external policy trainer.

Covers distillation loss, disturbed initialization, probabilistic interaction
termination, domain randomization and observation assembly. Every sampler
takes a seed and is a pure function of its inputs.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import quat
from .augment import rng_for
from .motion import Pose


@dataclass(frozen=True)
class GaussianPolicyOutput:
    mean: np.ndarray
    diag_std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        std = np.asarray(self.diag_std, dtype=float).reshape(-1)
        if mean.shape != std.shape:
            raise ValueError("mean and std must have the same length")
        if np.any(std <= 0):
            raise ValueError("policy standard deviations must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "diag_std", std)


def bc_loss(stu: GaussianPolicyOutput, tea: GaussianPolicyOutput) -> float:
    """Squared distance between student and teacher action means; the stds do not enter."""
    if stu.mean.shape != tea.mean.shape:
        raise ValueError(f"action dimension mismatch: {stu.mean.shape} vs {tea.mean.shape}")
    d = stu.mean - tea.mean
    return float(d @ d)


def _check_nonneg(obj, names):
    for n in names:
        v = np.asarray(getattr(obj, n), dtype=float)
        if np.any(v < 0):
            raise ValueError(f"{n} must be non-negative")


@dataclass(frozen=True)
class DisturbConfig:
    root_rot_range: float = 0.0     # rad, about the vertical axis
    root_pos_range: float = 0.0     # m, per horizontal axis
    joint_range: float = 0.0        # rad, per joint
    object_pos_range: float = 0.0   # m, per axis
    object_rot_range: float = 0.0   # rad, about the vertical axis

    def __post_init__(self):
        _check_nonneg(self, [f.name for f in fields(self)])

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown disturbance keys: {sorted(unknown)}")
        return cls(**d)


def sample_disturbed_init(nominal: dict, cfg: DisturbConfig, seed):
    """Uniformly perturbed copy of {"root": Pose, "joints": array, "object": Pose}."""
    rng = rng_for(seed)
    z = np.array([0.0, 0.0, 1.0])
    root: Pose = nominal["root"]
    d_yaw = rng.uniform(-cfg.root_rot_range, cfg.root_rot_range)
    d_xy = rng.uniform(-cfg.root_pos_range, cfg.root_pos_range, size=2)
    joints = np.asarray(nominal["joints"], dtype=float)
    d_joint = rng.uniform(-cfg.joint_range, cfg.joint_range, size=joints.shape)
    out = {
        "root": Pose(root.position + np.array([d_xy[0], d_xy[1], 0.0]),
                     quat.mul(quat.from_axis_angle(z, d_yaw), root.orientation)),
        "joints": joints + d_joint,
    }
    if nominal.get("object") is not None:
        obj: Pose = nominal["object"]
        d_obj = rng.uniform(-cfg.object_pos_range, cfg.object_pos_range, size=3)
        d_obj_yaw = rng.uniform(-cfg.object_rot_range, cfg.object_rot_range)
        out["object"] = Pose(obj.position + d_obj,
                             quat.mul(quat.from_axis_angle(z, d_obj_yaw), obj.orientation))
    return out


def interaction_termination_check(rel_error, threshold, p_terminate, in_contact_ref, draw) -> bool:
    """Terminate when the reference is in contact, the relative error is too large and the draw hits."""
    if not 0.0 <= p_terminate <= 1.0:
        raise ValueError(f"termination probability must lie in [0, 1], got {p_terminate}")
    return bool(in_contact_ref and rel_error > threshold and draw < p_terminate)


def relative_position_error(kp_pos, obj_pos, ref_kp_pos, ref_obj_pos):
    """Deviation of the key-body-to-object distance from the reference, averaged over bodies."""
    d = np.linalg.norm(np.asarray(kp_pos) - np.asarray(obj_pos), axis=-1)
    d_ref = np.linalg.norm(np.asarray(ref_kp_pos) - np.asarray(ref_obj_pos), axis=-1)
    return float(np.mean(np.abs(d - d_ref)))


def _range(v, name, nonneg=True):
    lo, hi = (float(x) for x in v)
    if lo > hi:
        raise ValueError(f"{name} range must be ordered, got [{lo}, {hi}]")
    if nonneg and lo < 0:
        raise ValueError(f"{name} range must be non-negative")
    return lo, hi


@dataclass(frozen=True)
class DRConfig:
    object_scale: tuple = (1.0, 1.0)
    object_mass: tuple = (1.0, 1.0)
    restitution: tuple = (0.5, 0.5)
    robot_friction: tuple = (1.0, 1.0)
    com_offset: tuple = (0.0, 0.0)          # m, per axis, may be negative
    perception_noise_std: float = 0.0       # m
    force_magnitude: tuple = (0.0, 0.0)     # N
    force_duration: tuple = (0.0, 0.0)      # s
    force_interval: tuple = (1.0, 1.0)      # s, gap between pushes
    episode_length: float = 10.0            # s

    def __post_init__(self):
        for n in ("object_scale", "object_mass", "restitution", "robot_friction",
                  "force_magnitude", "force_duration", "force_interval"):
            object.__setattr__(self, n, _range(getattr(self, n), n))
        object.__setattr__(self, "com_offset", _range(self.com_offset, "com_offset", nonneg=False))
        if self.restitution[1] > 1:
            raise ValueError("restitution must not exceed 1")
        if self.perception_noise_std < 0 or self.episode_length <= 0:
            raise ValueError("noise std must be non-negative and episode length positive")
        if self.force_magnitude[1] > 0 and self.force_duration[1] + self.force_interval[1] <= 0:
            raise ValueError("force schedule needs a positive duration or interval")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown domain randomization keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def _random_direction(rng):
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.array([1.0, 0.0, 0.0])


def sample_domain_randomization(cfg: DRConfig, seed):
    """One physical parameter draw plus a push schedule [(start, duration, force)] for an episode."""
    rng = rng_for(seed)
    params = {
        "object_scale": float(rng.uniform(*cfg.object_scale)),
        "object_mass": float(rng.uniform(*cfg.object_mass)),
        "restitution": float(rng.uniform(*cfg.restitution)),
        "robot_friction": float(rng.uniform(*cfg.robot_friction)),
        "com_offset": [float(x) for x in rng.uniform(*cfg.com_offset, size=3)],
        "perception_noise_std": cfg.perception_noise_std,
    }
    schedule = []
    t = float(rng.uniform(*cfg.force_interval))
    while cfg.force_magnitude[1] > 0 and t < cfg.episode_length:
        duration = float(rng.uniform(*cfg.force_duration))
        force = float(rng.uniform(*cfg.force_magnitude)) * _random_direction(rng)
        schedule.append((t, min(duration, cfg.episode_length - t), [float(x) for x in force]))
        step = duration + float(rng.uniform(*cfg.force_interval))
        if step <= 0:
            break
        t += step
    params["force_schedule"] = schedule
    return params


# ----------------------------------------------------------------------------
# observations

CURRENT_TERMS = ("base_ang_vel", "projected_gravity", "dof_pos", "dof_vel", "last_action",
                 "pd_error")
PRIVILEGED_TERMS = ("ref_body_pos", "delta_body_pos")
OBJECT_TERMS = ("object_pos", "object_rot", "target_object_pos", "target_object_rot")
HISTORY_TERMS = ("base_ang_vel", "projected_gravity", "dof_pos", "dof_vel", "last_action")


@dataclass(frozen=True)
class ObservationConfig:
    base_ang_vel: bool = True
    projected_gravity: bool = True
    dof_pos: bool = True
    dof_vel: bool = True
    last_action: bool = True
    pd_error: bool = True
    ref_body_pos: bool = False
    delta_body_pos: bool = False
    object_pos: bool = True
    object_rot: bool = True
    target_object_pos: bool = False
    target_object_rot: bool = False
    skill_label: bool = False
    history_depth: int = 0
    student: bool = False

    def __post_init__(self):
        if self.history_depth < 0:
            raise ValueError("history depth must be non-negative")
        if self.student and (self.ref_body_pos or self.delta_body_pos):
            raise ValueError("student observations cannot include privileged body terms")

    @classmethod
    def teacher(cls, **kw):
        return cls(ref_body_pos=True, delta_body_pos=True, **kw)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown observation keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ObservationInput:
    """Robot-side quantities available at one control step."""

    base_quat: np.ndarray
    base_ang_vel: np.ndarray
    dof_pos: np.ndarray
    dof_vel: np.ndarray
    last_action: np.ndarray
    dof_target: np.ndarray
    body_pos: np.ndarray = None
    object_pos: np.ndarray = None
    object_quat: np.ndarray = None
    skill_label: np.ndarray = None


def _current_parts(x: ObservationInput):
    inv = quat.conj(np.asarray(x.base_quat, float))
    return {
        "base_ang_vel": np.asarray(x.base_ang_vel, float),
        "projected_gravity": quat.rotate(inv, np.array([0.0, 0.0, -1.0])),
        "dof_pos": np.asarray(x.dof_pos, float),
        "dof_vel": np.asarray(x.dof_vel, float),
        "last_action": np.asarray(x.last_action, float),
        "pd_error": np.asarray(x.dof_target, float) - np.asarray(x.dof_pos, float),
    }


def build_observation(frame: ObservationInput, cfg: ObservationConfig, ref=None, history=(),
                      target=None):
    """Flat observation vector and its layout [(name, start, stop)].

    Order: current proprioception, privileged reference terms, object and target
    terms, skill label, then history frames newest first. ``ref`` supplies
    reference body positions (K, 3); ``target`` a (position, quaternion) pair.
    """
    parts = []
    cur = _current_parts(frame)
    for name in CURRENT_TERMS:
        if getattr(cfg, name):
            parts.append((name, cur[name]))
    if cfg.ref_body_pos or cfg.delta_body_pos:
        if ref is None:
            raise ValueError("privileged body terms need reference data")
        ref_pos = np.asarray(ref, float)
        if cfg.ref_body_pos:
            parts.append(("ref_body_pos", ref_pos.reshape(-1)))
        if cfg.delta_body_pos:
            if frame.body_pos is None:
                raise ValueError("delta body position needs current body positions")
            parts.append(("delta_body_pos", (ref_pos - np.asarray(frame.body_pos, float)).reshape(-1)))
    if cfg.object_pos or cfg.object_rot:
        if frame.object_pos is None or frame.object_quat is None:
            raise ValueError("object terms enabled but no object observation given")
        if cfg.object_pos:
            parts.append(("object_pos", np.asarray(frame.object_pos, float)))
        if cfg.object_rot:
            parts.append(("object_rot", np.asarray(frame.object_quat, float)))
    if cfg.target_object_pos or cfg.target_object_rot:
        if target is None:
            raise ValueError("target object terms need a target pose")
        if cfg.target_object_pos:
            parts.append(("target_object_pos", np.asarray(target[0], float)))
        if cfg.target_object_rot:
            parts.append(("target_object_rot", np.asarray(target[1], float)))
    if cfg.skill_label:
        if frame.skill_label is None:
            raise ValueError("skill label enabled but not provided")
        parts.append(("skill_label", np.asarray(frame.skill_label, float)))
    if cfg.history_depth > len(history):
        raise ValueError(f"history depth {cfg.history_depth} exceeds buffer of {len(history)}")
    for h in range(cfg.history_depth):
        past = _current_parts(history[-1 - h])
        for name in HISTORY_TERMS:
            if getattr(cfg, name):
                parts.append((f"hist{h + 1}.{name}", past[name]))
    layout = []
    pos = 0
    for name, v in parts:
        v = np.atleast_1d(v).reshape(-1)
        layout.append((name, pos, pos + v.size))
        pos += v.size
    vec = np.concatenate([np.atleast_1d(v).reshape(-1) for _, v in parts]) if parts else np.zeros(0)
    return vec, layout


def config_to_json(cfg) -> str:
    """Deterministic JSON for DisturbConfig, DRConfig or ObservationConfig."""
    return json.dumps(asdict(cfg), sort_keys=True, indent=2)


def config_from_json(cls, text):
    return cls.from_dict(json.loads(text))


def layout_to_json(layout) -> str:
    """Layout descriptor as a list of {"name", "start", "stop"} records."""
    return json.dumps([{"name": n, "start": a, "stop": b} for n, a, b in layout], indent=2)
