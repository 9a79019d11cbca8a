"""Interaction-imitation reward terms, regularization penalties and tracking metrics.

Reward terms are exponential kernels gamma * exp(-lambda * error). Errors are
means over keypoints or dofs so the sensitivities do not depend on how many
bodies a robot exposes. The relative-position error is the exception: it is
the norm of the stacked keypoint-to-object vectors.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import quat
from .motion import PoseSeries, finite_difference_velocities

BODY_TERMS = ("p", "r", "d", "v", "rv", "dv")
OBJECT_TERMS = ("op", "or")
RELATIVE_TERMS = ("rel_p", "rel_r")
TERMS = BODY_TERMS + OBJECT_TERMS + RELATIVE_TERMS
REG_TERMS = ("torque", "action_rate", "dof_limit", "torque_limit", "waist", "feet_orientation",
             "feet_slippage", "termination")

# Illustrative defaults only; no published weights exist for these terms.
DEFAULT_LAMBDA = {"p": 10.0, "r": 2.0, "d": 1.0, "v": 0.5, "rv": 0.1, "dv": 0.1,
                  "op": 10.0, "or": 2.0, "rel_p": 5.0, "rel_r": 0.5}
DEFAULT_REG = {"torque": 1e-5, "action_rate": 1e-2, "dof_limit": 1.0, "torque_limit": 1e-2,
               "waist": 0.1, "feet_orientation": 0.5, "feet_slippage": 0.1, "termination": 10.0}

HOOP_RADIUS = 0.20       # m, catch-shot success radius around the hoop centre
CARGO_HEIGHT_TOL = 0.10  # m, cargo placement height tolerance


class RolloutFormatError(ValueError):
    """A rollout file lacks required columns or has malformed values."""


def exp_kernel(error, gamma=1.0, lam=1.0):
    if error < 0:
        raise ValueError(f"error must be non-negative, got {error}")
    if gamma < 0 or lam < 0:
        raise ValueError("gamma and lambda must be non-negative")
    return gamma * np.exp(-lam * error)


@dataclass(frozen=True)
class RewardWeights:
    """Sensitivities (lam), scales (gamma), contact edge weights and penalty coefficients."""

    lam: dict = field(default_factory=lambda: dict(DEFAULT_LAMBDA))
    gamma: dict = field(default_factory=lambda: {k: 1.0 for k in TERMS})
    contact_lambda: object = 1.0
    regularization: dict = field(default_factory=lambda: dict(DEFAULT_REG))
    enabled: tuple = TERMS
    object_rotation: bool = True
    contact: bool = True

    def __post_init__(self):
        for name in ("lam", "gamma"):
            d = dict(getattr(self, name))
            unknown = set(d) - set(TERMS)
            if unknown:
                raise ValueError(f"unknown reward terms in {name}: {sorted(unknown)}")
            base = DEFAULT_LAMBDA if name == "lam" else {k: 1.0 for k in TERMS}
            merged = {k: float(d.get(k, base[k])) for k in TERMS}
            if any(v < 0 for v in merged.values()):
                raise ValueError(f"{name} values must be non-negative")
            object.__setattr__(self, name, merged)
        reg = dict(self.regularization)
        unknown = set(reg) - set(REG_TERMS)
        if unknown:
            raise ValueError(f"unknown regularization terms: {sorted(unknown)}")
        reg = {k: float(reg.get(k, DEFAULT_REG[k])) for k in REG_TERMS}
        if any(v < 0 for v in reg.values()):
            raise ValueError("regularization coefficients must be non-negative")
        object.__setattr__(self, "regularization", reg)
        enabled = tuple(self.enabled)
        bad = set(enabled) - set(TERMS)
        if bad:
            raise ValueError(f"unknown enabled terms: {sorted(bad)}")
        if not self.object_rotation:
            enabled = tuple(t for t in enabled if t != "or")
        object.__setattr__(self, "enabled", enabled)
        cl = np.asarray(self.contact_lambda, dtype=float)
        if np.any(cl < 0):
            raise ValueError("contact edge weights must be non-negative")

    def kernel(self, term, error):
        return exp_kernel(error, self.gamma[term], self.lam[term])

    def scaled_lambda(self, factor) -> "RewardWeights":
        return RewardWeights({k: v * factor for k, v in self.lam.items()}, self.gamma,
                             self.contact_lambda, self.regularization, self.enabled,
                             self.object_rotation, self.contact)

    def max_total(self, contact_enabled=None):
        """Total reward of a perfect frame with no penalties."""
        contact = self.contact if contact_enabled is None else contact_enabled
        return sum(self.gamma[t] for t in self.enabled) + (1.0 if contact else 0.0)

    def to_dict(self):
        cl = self.contact_lambda
        return {"lambda": self.lam, "gamma": self.gamma,
                "contact_lambda": cl if np.isscalar(cl) else list(np.asarray(cl, float)),
                "regularization": self.regularization, "enabled": list(self.enabled),
                "object_rotation": self.object_rotation, "contact": self.contact}

    @classmethod
    def from_dict(cls, d):
        keys = {"lambda", "gamma", "contact_lambda", "regularization", "enabled",
                "object_rotation", "contact"}
        unknown = set(d) - keys
        if unknown:
            raise ValueError(f"unknown reward config keys: {sorted(unknown)}")
        kw = {}
        if "lambda" in d:
            kw["lam"] = d["lambda"]
        for k in keys - {"lambda"}:
            if k in d:
                kw[k] = tuple(d[k]) if k == "enabled" else d[k]
        return cls(**kw)


@dataclass
class RolloutFrame:
    """One simulated (or reference) step. Optional fields disable the terms that need them."""

    kp_pos: np.ndarray
    kp_quat: np.ndarray
    dof: np.ndarray
    obj_pos: np.ndarray
    obj_quat: np.ndarray
    kp_lin_vel: Optional[np.ndarray] = None
    kp_ang_vel: Optional[np.ndarray] = None
    dof_vel: Optional[np.ndarray] = None
    torque: Optional[np.ndarray] = None
    action: Optional[np.ndarray] = None
    prev_action: Optional[np.ndarray] = None
    contact: Optional[np.ndarray] = None
    foot_contact: Optional[np.ndarray] = None
    foot_quat: Optional[np.ndarray] = None
    foot_lin_vel: Optional[np.ndarray] = None
    amp: Optional[float] = None
    terminated: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and f.name not in ("amp", "terminated"):
                setattr(self, f.name, np.asarray(v, dtype=float))
        if self.kp_pos.ndim != 2 or self.kp_pos.shape[1] != 3:
            raise ValueError("kp_pos must have shape (K, 3)")
        if self.kp_quat.shape != (len(self.kp_pos), 4):
            raise ValueError("kp_quat must have shape (K, 4)")

    def translated(self, offset) -> "RolloutFrame":
        offset = np.asarray(offset, dtype=float)
        out = RolloutFrame(**{f.name: getattr(self, f.name) for f in fields(self)})
        out.kp_pos = self.kp_pos + offset
        out.obj_pos = self.obj_pos + offset
        return out


def _check_same(a, b, name):
    if a.shape != b.shape:
        raise ValueError(f"{name} shape mismatch: {a.shape} vs {b.shape}")


def _mean_norm(a, b, name):
    _check_same(a, b, name)
    return float(np.mean(np.linalg.norm(a - b, axis=-1)))


def _mean_abs(a, b, name):
    _check_same(a, b, name)
    return float(np.mean(np.abs(a - b))) if a.size else 0.0


def body_errors(frame: RolloutFrame, ref: RolloutFrame):
    err = {"p": _mean_norm(frame.kp_pos, ref.kp_pos, "kp_pos")}
    _check_same(frame.kp_quat, ref.kp_quat, "kp_quat")
    err["r"] = float(np.mean(quat.angle_between(frame.kp_quat, ref.kp_quat)))
    err["d"] = _mean_abs(frame.dof, ref.dof, "dof")
    if frame.kp_lin_vel is not None and ref.kp_lin_vel is not None:
        err["v"] = _mean_norm(frame.kp_lin_vel, ref.kp_lin_vel, "kp_lin_vel")
    if frame.kp_ang_vel is not None and ref.kp_ang_vel is not None:
        err["rv"] = _mean_norm(frame.kp_ang_vel, ref.kp_ang_vel, "kp_ang_vel")
    if frame.dof_vel is not None and ref.dof_vel is not None:
        err["dv"] = _mean_abs(frame.dof_vel, ref.dof_vel, "dof_vel")
    return err


def body_reward(frame: RolloutFrame, ref: RolloutFrame, w: RewardWeights):
    """Kernels on keypoint position/rotation, dof and their velocities, plus the injected amp channel."""
    err = body_errors(frame, ref)
    out = {t: w.kernel(t, e) for t, e in err.items() if t in w.enabled}
    out["amp"] = 0.0 if frame.amp is None else float(frame.amp)
    return out


def object_reward(frame: RolloutFrame, ref: RolloutFrame, w: RewardWeights):
    out = {}
    if "op" in w.enabled:
        out["op"] = w.kernel("op", float(np.linalg.norm(frame.obj_pos - ref.obj_pos)))
    if "or" in w.enabled:
        out["or"] = w.kernel("or", float(quat.angle_between(frame.obj_quat, ref.obj_quat)))
    return out


def relative_errors(frame: RolloutFrame, ref: RolloutFrame, keypoints=None):
    idx = slice(None) if keypoints is None else np.asarray(keypoints)
    _check_same(frame.kp_pos, ref.kp_pos, "kp_pos")
    u = frame.kp_pos[idx] - frame.obj_pos
    u_ref = ref.kp_pos[idx] - ref.obj_pos
    e_p = float(np.linalg.norm(u - u_ref))
    rel = quat.mul(frame.obj_quat, quat.conj(frame.kp_quat[idx]))
    rel_ref = quat.mul(ref.obj_quat, quat.conj(ref.kp_quat[idx]))
    e_r = float(np.sum(quat.angle_between(rel, rel_ref)))
    return e_p, e_r


def relative_reward(frame: RolloutFrame, ref: RolloutFrame, w: RewardWeights, keypoints=None):
    e_p, e_r = relative_errors(frame, ref, keypoints)
    out = {}
    if "rel_p" in w.enabled:
        out["rel_p"] = w.kernel("rel_p", e_p)
    if "rel_r" in w.enabled:
        out["rel_r"] = w.kernel("rel_r", e_r)
    return out


def contact_reward(s_cg, ref_cg, lam_cg=1.0):
    s = np.asarray(s_cg, dtype=float)
    r = np.asarray(ref_cg, dtype=float)
    if s.shape != r.shape:
        raise ValueError(f"contact graph length mismatch: {s.shape} vs {r.shape}")
    if not (np.all(np.isin(s, (0, 1))) and np.all(np.isin(r, (0, 1)))):
        raise ValueError("contact graph entries must be 0 or 1")
    lam = np.broadcast_to(np.asarray(lam_cg, dtype=float), s.shape)
    return float(np.exp(-np.sum(lam * np.abs(s - r))))


def _limit_excess(x, limit):
    return float(np.sum(np.maximum(0.0, np.abs(x) - limit) ** 2))


def regularization_penalties(frame: RolloutFrame, limits=None, coeffs=None):
    """Signed (non-positive) penalty terms.

    limits may hold "dof" and "torque" magnitudes (scalar or per joint) and
    "waist" as a list of dof indices.
    """
    limits = limits or {}
    c = dict(DEFAULT_REG)
    c.update(coeffs or {})
    out = {k: 0.0 for k in REG_TERMS}
    if frame.torque is not None:
        out["torque"] = -c["torque"] * float(frame.torque @ frame.torque)
        if "torque" in limits:
            out["torque_limit"] = -c["torque_limit"] * _limit_excess(frame.torque, limits["torque"])
    if frame.action is not None and frame.prev_action is not None:
        da = frame.action - frame.prev_action
        out["action_rate"] = -c["action_rate"] * float(da @ da)
    if "dof" in limits:
        out["dof_limit"] = -c["dof_limit"] * _limit_excess(frame.dof, limits["dof"])
    if limits.get("waist"):
        wd = frame.dof[np.asarray(limits["waist"], dtype=int)]
        out["waist"] = -c["waist"] * float(wd @ wd)
    if frame.foot_contact is not None:
        if frame.foot_quat is not None:
            up = quat.rotate(frame.foot_quat, np.array([0.0, 0.0, 1.0]))
            tilt = np.arccos(np.clip(up[..., 2], -1.0, 1.0))
            out["feet_orientation"] = -c["feet_orientation"] * float(np.sum(tilt ** 2))
        if frame.foot_lin_vel is not None:
            speed2 = np.sum(frame.foot_lin_vel ** 2, axis=-1)
            out["feet_slippage"] = -c["feet_slippage"] * float(np.sum(speed2 * frame.foot_contact))
    if frame.terminated:
        out["termination"] = -c["termination"]
    for k in out:
        out[k] = float(out[k]) + 0.0  # normalise -0.0
    return out


def total_reward(frame: RolloutFrame, ref: RolloutFrame, w: RewardWeights, limits=None,
                 keypoints=None):
    """One report row: every term, keyed 'body.p', 'obj.op', 'reg.torque' and so on, plus total."""
    row = {}
    for group, terms in (("body", body_reward(frame, ref, w)), ("obj", object_reward(frame, ref, w)),
                         ("rel", relative_reward(frame, ref, w, keypoints))):
        row.update({f"{group}.{k}": float(v) for k, v in terms.items()})
    if w.contact and frame.contact is not None and ref.contact is not None:
        row["contact"] = contact_reward(frame.contact, ref.contact, w.contact_lambda)
    row.update({f"reg.{k}": v for k, v in
                regularization_penalties(frame, limits, w.regularization).items()})
    row["total"] = float(sum(row.values()))
    return row


@dataclass
class RewardReport:
    rows: list

    @property
    def columns(self):
        cols = []
        for r in self.rows:
            for k in r:
                if k not in cols:
                    cols.append(k)
        cols.remove("total")
        return ["frame"] + cols + ["total"]

    def means(self):
        cols = self.columns[1:]
        return {c: float(np.mean([r.get(c, 0.0) for r in self.rows])) for c in cols}

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = self.columns
        writer.writerow(cols)
        for i, r in enumerate(self.rows):
            writer.writerow([i] + [repr(float(r.get(c, 0.0))) for c in cols[1:]])
        return buf.getvalue()


def score_rollout(rollout, reference, w: RewardWeights, limits=None, keypoints=None):
    if len(rollout) != len(reference):
        raise ValueError(f"rollout has {len(rollout)} frames, reference {len(reference)}")
    return RewardReport([total_reward(f, r, w, limits, keypoints)
                         for f, r in zip(rollout, reference)])


def tracking_errors(rollout, reference, units="m", keypoints=None):
    """Mean object position error E_o and mean key-body position error E_h."""
    if units not in ("m", "cm"):
        raise ValueError(f"units must be 'm' or 'cm', got {units!r}")
    if len(rollout) != len(reference):
        raise ValueError(f"rollout has {len(rollout)} frames, reference {len(reference)}")
    idx = slice(None) if keypoints is None else np.asarray(keypoints)
    e_o = np.mean([np.linalg.norm(f.obj_pos - r.obj_pos) for f, r in zip(rollout, reference)])
    e_h = np.mean([_mean_norm(f.kp_pos[idx], r.kp_pos[idx], "kp_pos")
                   for f, r in zip(rollout, reference)])
    k = 100.0 if units == "cm" else 1.0
    return {"E_o": float(e_o) * k, "E_h": float(e_h) * k, "units": units}


def hoop_success(landing_point, hoop_center, radius=HOOP_RADIUS):
    d = np.linalg.norm(np.asarray(landing_point, float) - np.asarray(hoop_center, float))
    return bool(d <= radius)


def cargo_success(final_height, target_height, tol=CARGO_HEIGHT_TOL):
    return bool(abs(float(final_height) - float(target_height)) <= tol)


def badminton_success(hit_flags):
    """Success when the racket registers a hit on any frame."""
    return bool(np.any(np.asarray(hit_flags, dtype=bool)))


def success_rate(rollouts, predicate):
    rollouts = list(rollouts)
    if not rollouts:
        raise ValueError("success rate needs at least one rollout")
    return sum(bool(predicate(r)) for r in rollouts) / len(rollouts)


# ----------------------------------------------------------------------------
# reference frames and rollout files

def reference_frames(clip):
    """Per-frame reference quantities of an interaction clip, velocities by finite differences."""
    m = clip.motion
    T, K = m.kp_pos.shape[:2]
    lin = np.empty_like(m.kp_pos)
    ang = np.empty_like(m.kp_pos)
    for k in range(K):
        s = finite_difference_velocities(PoseSeries(m.fps, m.kp_pos[:, k], m.kp_quat[:, k]))
        lin[:, k] = s.lin_vel
        ang[:, k] = s.ang_vel
    # differenced the same way as rollouts so a replayed reference scores exactly
    dof_vel = np.gradient(m.dof, 1.0 / m.fps, axis=0)
    cg = clip.contact_graph
    return [RolloutFrame(m.kp_pos[t], m.kp_quat[t], m.dof[t], clip.object.positions[t],
                         clip.object.orientations[t], lin[t], ang[t], dof_vel[t],
                         contact=cg[t]) for t in range(T)]


def rollout_columns(keypoints, joints, bodies=()):
    cols = ["frame"]
    for n in keypoints:
        cols += [f"{n}_{c}" for c in ("px", "py", "pz", "qw", "qx", "qy", "qz")]
    cols += [f"dof_{j}" for j in joints]
    cols += [f"obj_{c}" for c in ("px", "py", "pz", "qw", "qx", "qy", "qz")]
    cols += [f"contact_{b}" for b in bodies]
    return cols


def clip_to_rollout_csv(clip, offset=(0.0, 0.0, 0.0), object_offset=(0.0, 0.0, 0.0)):
    """Write a clip's own trajectory as a rollout file, optionally offset."""
    m = clip.motion
    bodies = clip.key_bodies
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rollout_columns(m.keypoint_names, m.joint_names, bodies))
    off = np.asarray(offset, float)
    ooff = np.asarray(object_offset, float)
    for t in range(len(m)):
        row = [t]
        for k in range(len(m.keypoint_names)):
            row += list(m.kp_pos[t, k] + off) + list(m.kp_quat[t, k])
        row += list(m.dof[t])
        row += list(clip.object.positions[t] + off + ooff) + list(clip.object.orientations[t])
        row += list(clip.contact_graph[t])
        writer.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v)
                         for v in row])
    return buf.getvalue()


def read_rollout_csv(text, keypoints, joints, fps, bodies=()):
    """Parse a rollout file into frames; velocities are finite-differenced at fps."""
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    need = rollout_columns(keypoints, joints)[1:]
    missing = [c for c in need if c not in header]
    if missing:
        raise RolloutFormatError(f"rollout is missing columns: {missing[:5]}"
                                 + (" ..." if len(missing) > 5 else ""))
    has_contact = all(f"contact_{b}" in header for b in bodies) and len(bodies) > 0
    rows = list(reader)
    if len(rows) < 2:
        raise RolloutFormatError("rollout needs at least two frames")
    try:
        data = np.array([[float(r[c]) for c in need] for r in rows])
        contact = (np.array([[float(r[f"contact_{b}"]) for b in bodies] for r in rows])
                   if has_contact else None)
    except (TypeError, ValueError) as exc:
        raise RolloutFormatError(f"non-numeric rollout value: {exc}") from None
    K, D = len(keypoints), len(joints)
    kp = data[:, :7 * K].reshape(-1, K, 7)
    dof = data[:, 7 * K:7 * K + D]
    obj = data[:, 7 * K + D:]
    kp_q = quat.tidy(kp[..., 3:], "keypoint orientation")
    obj_q = quat.tidy(obj[:, 3:], "object orientation")
    lin = np.empty_like(kp[..., :3])
    ang = np.empty_like(kp[..., :3])
    for k in range(K):
        s = finite_difference_velocities(PoseSeries(fps, kp[:, k, :3], kp_q[:, k]))
        lin[:, k] = s.lin_vel
        ang[:, k] = s.ang_vel
    dof_vel = np.gradient(dof, 1.0 / fps, axis=0)
    return [RolloutFrame(kp[t, :, :3], kp_q[t], dof[t], obj[t, :3], obj_q[t], lin[t], ang[t],
                         dof_vel[t], contact=None if contact is None else contact[t])
            for t in range(len(rows))]


def landing_point(obj_positions, height):
    """Where the object first crosses ``height`` while descending (linear interpolation), else None."""
    p = np.asarray(obj_positions, dtype=float)
    z = p[:, 2] - height
    for t in range(1, len(p)):
        if z[t - 1] > 0 >= z[t]:
            u = z[t - 1] / (z[t - 1] - z[t])
            return p[t - 1] + u * (p[t] - p[t - 1])
    return None
