"""Interaction clip synthesis: contact phase by rigid attachment to an anchor,
free phases by ballistic simulation, transitions blended, contacts annotated.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import quat
from .ballistic import BodyState, SimParams, simulate_forward, simulate_reverse, substeps_for
from .geometry import ObjectSpec, lowest_point, signed_distance
from .grasp import DEFAULT_PATCH_RADIUS, force_closure_test, refine_contact_frame
from .motion import (AnchorSpec, MotionClip, Pose, PoseSeries, anchor_arrays,
                     anchor_from_keypoints, compose_arrays, derive_anchor_trajectory,
                     finite_difference_velocities, invert_arrays)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PHI_TOLERANCE = 1e-9
STITCH_TOLERANCE = 1e-6


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class PhaseAnnotation:
    t_s: int
    t_e: int
    anchor: AnchorSpec = field(default_factory=AnchorSpec)
    blend_window_k: int = 0

    def validate(self, clip_len: int):
        if not 0 <= self.t_s <= self.t_e < clip_len:
            raise SynthesisError(
                f"invalid phase bounds t_s={self.t_s}, t_e={self.t_e} for a clip of {clip_len} frames")
        limit = min(self.t_s, clip_len - 1 - self.t_e)
        if not 0 <= self.blend_window_k <= limit:
            raise SynthesisError(f"blend window k={self.blend_window_k} must lie in [0, {limit}]")
        return self

    def to_dict(self):
        return {"t_s": self.t_s, "t_e": self.t_e, "blend_window_k": self.blend_window_k,
                "anchor": self.anchor.to_dict()}

    @classmethod
    def from_dict(cls, d):
        anchor = AnchorSpec.from_dict(d["anchor"]) if "anchor" in d else AnchorSpec()
        return cls(int(d["t_s"]), int(d["t_e"]), anchor, int(d.get("blend_window_k", 0)))


@dataclass(frozen=True)
class RelativeTransform:
    translation: tuple = (0.0, 0.0, 0.0)
    rotation: tuple = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        t = tuple(float(x) for x in self.translation)
        r = tuple(float(x) for x in quat.tidy(np.asarray(self.rotation, dtype=float), "rotation"))
        if len(t) != 3:
            raise ValueError("translation must be a 3-vector")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", r)

    def as_pose(self) -> Pose:
        return Pose(self.translation, self.rotation)

    def scaled(self, s) -> "RelativeTransform":
        return RelativeTransform(tuple(s * x for x in self.translation), self.rotation)

    def to_dict(self):
        return {"translation": list(self.translation), "rotation": list(self.rotation)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d.get("translation", (0, 0, 0))), tuple(d.get("rotation", (1, 0, 0, 0))))


def segment_phases(annotation: PhaseAnnotation, clip_len: int):
    """Pre-contact, contact and post-contact frame ranges."""
    annotation.validate(clip_len)
    return (range(0, annotation.t_s), range(annotation.t_s, annotation.t_e + 1),
            range(annotation.t_e + 1, clip_len))


def estimate_relative_pose(anchor_at_ts: Pose, object_at_ts: Pose) -> RelativeTransform:
    rel = anchor_at_ts.inverse().compose(object_at_ts)
    return RelativeTransform(tuple(rel.position), tuple(rel.orientation))


def propagate_contact_trajectory(anchor: PoseSeries, phi: RelativeTransform, index_range=None):
    """Object poses rigidly attached to the anchor, with finite-difference velocities.

    Velocities are differentiated over the whole anchor series before slicing,
    so they stay defined for a single-frame range and match the hand's motion
    at the phase edges.
    """
    n = len(anchor)
    index_range = range(n) if index_range is None else index_range
    if len(index_range) and (index_range[0] < 0 or index_range[-1] >= n):
        raise IndexError("range exceeds the anchor series")
    ph = phi.as_pose()
    p, q = compose_arrays(anchor.positions, anchor.orientations,
                          np.broadcast_to(ph.position, (n, 3)),
                          np.broadcast_to(ph.orientation, (n, 4)))
    full = finite_difference_velocities(PoseSeries(anchor.fps, p, q))
    if len(index_range) == 0:
        return full.slice(0, 0)
    return full.slice(index_range[0], index_range[-1] + 1)


def _blend_window(out: MotionClip, a: int, c: int):
    for i in range(a + 1, c):
        u = (i - a) / (c - a)
        out.root_pos[i] = (1 - u) * out.root_pos[a] + u * out.root_pos[c]
        out.root_quat[i] = quat.slerp(out.root_quat[a], out.root_quat[c], u)
        out.dof[i] = (1 - u) * out.dof[a] + u * out.dof[c]
        out.kp_pos[i] = (1 - u) * out.kp_pos[a] + u * out.kp_pos[c]
        for k in range(out.kp_quat.shape[1]):
            out.kp_quat[i, k] = quat.slerp(out.kp_quat[a, k], out.kp_quat[c, k], u)
        if out.dof_vel is not None:
            out.dof_vel[i] = (1 - u) * out.dof_vel[a] + u * out.dof_vel[c]


def blend_windows(phases: PhaseAnnotation, clip_len: int):
    """Blend windows [b-k, b+k] around each boundary; overlapping windows merge."""
    k = phases.blend_window_k
    if k == 0:
        return []
    wins = [(phases.t_s - k, phases.t_s + k), (phases.t_e - k, phases.t_e + k)]
    if wins[0][1] >= wins[1][0]:
        wins = [(wins[0][0], wins[1][1])]
    return wins


def blend_transitions(motion: MotionClip, phases: PhaseAnnotation) -> MotionClip:
    """Interpolate body poses across each phase boundary.

    Frames strictly inside a window are replaced by linear interpolation
    (slerp for orientations) between the window's end frames; nothing outside
    the windows changes.
    """
    phases.validate(len(motion))
    out = motion.copy()
    for a, c in blend_windows(phases, len(motion)):
        _blend_window(out, a, c)
    return out


def annotate_contact_graph(motion: MotionClip, object_series: PoseSeries, spec: ObjectSpec,
                           key_bodies, threshold=0.02):
    """(T, J) binary matrix: body j within `threshold` of the object surface."""
    if spec.shape not in ("sphere", "box", "cylinder"):
        raise ValueError(f"unknown geometry {spec.shape!r}")
    idx = [motion.keypoint_index(n) for n in key_bodies]
    if len(object_series) != len(motion):
        raise SynthesisError("object series and motion differ in length")
    pts = motion.kp_pos[:, idx]                                        # (T, J, 3)
    inv_p, inv_q = invert_arrays(object_series.positions, object_series.orientations)
    local = inv_p[:, None, :] + quat.rotate(inv_q[:, None, :], pts)
    d = signed_distance(spec, local)
    return (d <= threshold).astype(np.int8)


@dataclass
class ProvenanceRecord:
    """Append-only lineage: parent clip and the transforms applied since."""

    parent: Optional[str] = None
    transforms: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    def appended(self, name, **params) -> "ProvenanceRecord":
        rec = copy.deepcopy(self)
        rec.transforms.append({"op": name, **params})
        return rec

    def to_dict(self):
        return {"parent": self.parent, "transforms": self.transforms,
                "warnings": self.warnings, "checks": self.checks}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("parent"), list(d.get("transforms", [])), list(d.get("warnings", [])),
                   dict(d.get("checks", {})))


PRE_MODES = ("reverse", "static")
POST_MODES = ("forward", "static")


@dataclass(frozen=True)
class SynthConfig:
    phases: PhaseAnnotation
    object_spec: ObjectSpec
    relative_pose: RelativeTransform = field(default_factory=RelativeTransform)
    sim: SimParams = field(default_factory=SimParams)
    pre_mode: str = "reverse"
    post_mode: str = "forward"
    # overrides for the boundary velocities handed to the simulator
    pre_velocity: Optional[tuple] = None
    post_velocity: Optional[tuple] = None
    key_bodies: Optional[tuple] = None
    contact_threshold: float = 0.02
    refine: bool = True
    contact_keypoints: Optional[tuple] = None
    follow_keypoints: Optional[tuple] = None
    friction_mu: float = 0.5
    cone_edges: int = 8
    patch_radius: float = DEFAULT_PATCH_RADIUS
    check_closure: bool = True
    refine_iterations: int = 20
    velocity_tolerance: float = 0.05

    def __post_init__(self):
        if self.pre_mode not in PRE_MODES:
            raise ValueError(f"pre_mode must be one of {PRE_MODES}")
        if self.post_mode not in POST_MODES:
            raise ValueError(f"post_mode must be one of {POST_MODES}")
        for name in ("key_bodies", "contact_keypoints", "follow_keypoints",
                     "pre_velocity", "post_velocity"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(v))

    @property
    def bodies(self):
        return tuple(self.key_bodies) if self.key_bodies is not None else self.phases.anchor.keypoint_names

    def to_dict(self):
        return {
            "phases": self.phases.to_dict(),
            "object_spec": self.object_spec.to_dict(),
            "relative_pose": self.relative_pose.to_dict(),
            "sim": self.sim.to_dict(),
            "pre_mode": self.pre_mode,
            "post_mode": self.post_mode,
            "pre_velocity": None if self.pre_velocity is None else list(self.pre_velocity),
            "post_velocity": None if self.post_velocity is None else list(self.post_velocity),
            "key_bodies": None if self.key_bodies is None else list(self.key_bodies),
            "contact_threshold": self.contact_threshold,
            "refine": self.refine,
            "contact_keypoints": None if self.contact_keypoints is None else list(self.contact_keypoints),
            "follow_keypoints": None if self.follow_keypoints is None else list(self.follow_keypoints),
            "friction_mu": self.friction_mu,
            "cone_edges": self.cone_edges,
            "patch_radius": self.patch_radius,
            "check_closure": self.check_closure,
            "refine_iterations": self.refine_iterations,
            "velocity_tolerance": self.velocity_tolerance,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synthesis keys: {sorted(unknown)}")
        d["phases"] = PhaseAnnotation.from_dict(d["phases"])
        d["object_spec"] = ObjectSpec.from_dict(d["object_spec"])
        if "relative_pose" in d:
            d["relative_pose"] = RelativeTransform.from_dict(d["relative_pose"])
        if "sim" in d:
            d["sim"] = SimParams.from_dict(d["sim"])
        return cls(**d)


@dataclass
class InteractionClip:
    motion: MotionClip
    object: PoseSeries               # with lin_vel / ang_vel
    contact_graph: np.ndarray        # (T, J) in {0, 1}
    config: SynthConfig
    closure_report: list = field(default_factory=list)
    provenance: ProvenanceRecord = field(default_factory=ProvenanceRecord)
    clip_id: str = "clip"

    def __post_init__(self):
        T = len(self.motion)
        if len(self.object) != T or len(self.contact_graph) != T:
            raise SynthesisError("motion, object and contact graph lengths differ")
        if self.object.lin_vel is None or self.object.ang_vel is None:
            raise SynthesisError("object series needs velocities")
        cg = np.asarray(self.contact_graph)
        if not np.all((cg == 0) | (cg == 1)):
            raise SynthesisError("contact graph entries must be 0 or 1")
        self.contact_graph = cg.astype(np.int8)

    def __len__(self):
        return len(self.motion)

    @property
    def phases(self):
        return self.config.phases

    @property
    def object_spec(self):
        return self.config.object_spec

    @property
    def key_bodies(self):
        return list(self.config.bodies)

    def phi_residual(self):
        """Largest deviation (m, rad) of inverse(anchor)∘object from φ over the contact phase."""
        return phi_residual(self.motion, self.object, self.config)

    def to_dict(self):
        d = {"schema_version": SCHEMA_VERSION, "id": self.clip_id}
        d.update(self.motion.to_dict())
        d["object"] = {"frames": [
            {"p": self.object.positions[t].tolist(), "q": self.object.orientations[t].tolist(),
             "v": self.object.lin_vel[t].tolist(), "w": self.object.ang_vel[t].tolist()}
            for t in range(len(self))
        ]}
        d["contact_graph"] = {"bodies": self.key_bodies,
                              "threshold": self.config.contact_threshold,
                              "frames": self.contact_graph.tolist()}
        d["phases"] = self.config.phases.to_dict()
        d["object_spec"] = self.config.object_spec.to_dict()
        synth = self.config.to_dict()
        del synth["phases"], synth["object_spec"]
        d["synthesis"] = synth
        d["closure_report"] = self.closure_report
        d["provenance"] = self.provenance.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {version!r}")
        motion = MotionClip.from_dict(d)
        frames = d["object"]["frames"]
        obj = PoseSeries(motion.fps, [f["p"] for f in frames], [f["q"] for f in frames],
                         np.array([f["v"] for f in frames], dtype=float).reshape(-1, 3),
                         np.array([f["w"] for f in frames], dtype=float).reshape(-1, 3))
        synth = dict(d["synthesis"])
        synth["phases"] = d["phases"]
        synth["object_spec"] = d["object_spec"]
        cfg = SynthConfig.from_dict(synth)
        if list(d["contact_graph"]["bodies"]) != list(cfg.bodies):
            raise ValueError("contact graph bodies disagree with the synthesis key bodies")
        cg = np.array(d["contact_graph"]["frames"], dtype=np.int8).reshape(len(motion), -1)
        return cls(motion, obj, cg, cfg, list(d.get("closure_report", [])),
                   ProvenanceRecord.from_dict(d.get("provenance", {})), d.get("id", "clip"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "InteractionClip":
        return cls.from_dict(json.loads(text))


def phi_residual(motion: MotionClip, obj: PoseSeries, cfg: SynthConfig):
    ph = cfg.phases
    sl = slice(ph.t_s, ph.t_e + 1)
    a_p, a_q = anchor_arrays(motion, ph.anchor)
    ip, iq = invert_arrays(a_p[sl], a_q[sl])
    rel_p, rel_q = compose_arrays(ip, iq, obj.positions[sl], obj.orientations[sl])
    phi = cfg.relative_pose
    dp = float(np.max(np.linalg.norm(rel_p - np.array(phi.translation), axis=1)))
    dr = float(np.max(quat.angle_between(rel_q, np.array(phi.rotation))))
    return dp, dr


# -- synthesis steps ----------------------------------------------------------

def refine_contact_phase(motion: MotionClip, cfg: SynthConfig):
    """Snap contact keypoints onto the attached object, frame by frame.

    Moving the hands moves the anchor and hence the object, so each frame is
    iterated to a fixed point. Frames that fail to settle are left untouched
    and reported.
    """
    out = motion.copy()
    ph = cfg.phases
    phi = cfg.relative_pose.as_pose()
    names = out.keypoint_names
    report, warnings = [], []
    contact_kps = cfg.contact_keypoints or ph.anchor.keypoint_names
    cidx = [out.keypoint_index(n) for n in contact_kps]
    single_self = ph.anchor.kind == "single" and set(ph.anchor.keypoint_names) <= set(contact_kps)
    for t in range(ph.t_s, ph.t_e + 1):
        original = out.kp_pos[t].copy()
        converged = single_self  # a lone anchor keypoint drags the object along; nothing to do
        if not single_self:
            for _ in range(cfg.refine_iterations):
                a_p, a_q = anchor_from_keypoints(names, out.kp_pos[t], out.kp_quat[t], ph.anchor)
                res = refine_contact_frame(names, out.kp_pos[t], Pose(a_p, a_q).compose(phi),
                                           cfg.object_spec, ph.anchor, contact_kps,
                                           cfg.follow_keypoints, check_closure=False)
                delta = np.max(np.abs(res.kp_pos - out.kp_pos[t]))
                out.kp_pos[t] = res.kp_pos
                if delta < 1e-10:
                    converged = True
                    break
        if not converged:
            out.kp_pos[t] = original
            warnings.append(f"contact refinement did not converge at frame {t}")
        a_p, a_q = anchor_from_keypoints(names, out.kp_pos[t], out.kp_quat[t], ph.anchor)
        obj = Pose(a_p, a_q).compose(phi)
        res = refine_contact_frame(names, out.kp_pos[t], obj, cfg.object_spec, ph.anchor,
                                   contact_kps, cfg.follow_keypoints, cfg.friction_mu,
                                   cfg.cone_edges, cfg.patch_radius, check_closure=False)
        entry = {"frame": t}
        if cfg.check_closure:
            closure = force_closure_test(res.contacts)
            entry.update(closure=bool(closure.closure), margin=float(closure.margin))
        else:
            entry.update(closure=None, margin=None)
        entry.update(num_contacts=int(len(res.contacts.points)),
                     mean_offset=[float(x) for x in (out.kp_pos[t] - original)[cidx].mean(axis=0)])
        report.append(entry)
    return out, report, warnings


def _boundary_state(series: PoseSeries, i: int, override) -> BodyState:
    v = series.lin_vel[i] if override is None else np.asarray(override, dtype=float)
    return BodyState(series.pose(i), v, series.ang_vel[i])


def simulate_free_phases(contact_full: PoseSeries, cfg: SynthConfig, clip_len: int):
    """Object series for the pre- and post-contact phases.

    Returns (pre, post): `pre` has t_s + 1 frames ending at the contact-start
    pose, `post` has len - t_e frames starting at the contact-end pose; either
    is None when its phase is empty.
    """
    ph = cfg.phases
    fps = contact_full.fps
    n_sub = substeps_for(1.0 / fps, cfg.sim)
    dt = 1.0 / fps / n_sub
    pre = post = None
    if ph.t_s > 0:
        state = _boundary_state(contact_full, ph.t_s, cfg.pre_velocity)
        if cfg.pre_mode == "static":
            pre = _static_series(state.pose, ph.t_s + 1, fps)
        else:
            params = _with_collision_radius(cfg, state)
            traj = simulate_reverse(state, params, ph.t_s * n_sub, dt).subsample(n_sub)
            pre = PoseSeries(fps, traj.positions, traj.orientations, traj.lin_vel, traj.ang_vel)
    if ph.t_e < clip_len - 1:
        state = _boundary_state(contact_full, ph.t_e, cfg.post_velocity)
        n = clip_len - 1 - ph.t_e
        if cfg.post_mode == "static":
            post = _static_series(state.pose, n + 1, fps)
        else:
            params = _with_collision_radius(cfg, state)
            traj = simulate_forward(state, params, n * n_sub, dt).subsample(n_sub)
            post = PoseSeries(fps, traj.positions, traj.orientations, traj.lin_vel, traj.ang_vel)
    return pre, post


def _with_collision_radius(cfg: SynthConfig, state: BodyState) -> SimParams:
    if cfg.sim.collision_radius > 0:
        return cfg.sim
    drop = float(state.pose.position[2] - lowest_point(cfg.object_spec, state.pose.position,
                                                       state.pose.orientation))
    return replace(cfg.sim, collision_radius=max(drop, 0.0))


def _static_series(pose: Pose, n: int, fps: float) -> PoseSeries:
    return PoseSeries(fps, np.tile(pose.position, (n, 1)), np.tile(pose.orientation, (n, 1)),
                      np.zeros((n, 3)), np.zeros((n, 3)))


def assemble_interaction_clip(motion: MotionClip, cfg: SynthConfig, contact: PoseSeries,
                              pre: Optional[PoseSeries], post: Optional[PoseSeries],
                              closure_report=None, provenance=None, clip_id="clip",
                              warnings=()) -> InteractionClip:
    """Stitch phase segments into one clip, checking lengths, seams and φ."""
    ph = cfg.phases
    T = len(motion)
    pre_r, con_r, post_r = segment_phases(ph, T)
    if len(contact) != len(con_r):
        raise SynthesisError(f"contact segment has {len(contact)} frames, expected {len(con_r)}")
    if len(pre_r) and (pre is None or len(pre) != len(pre_r) + 1):
        raise SynthesisError(f"pre-contact segment must have {len(pre_r) + 1} frames")
    if len(post_r) and (post is None or len(post) != len(post_r) + 1):
        raise SynthesisError(f"post-contact segment must have {len(post_r) + 1} frames")
    checks = {}
    warns = list(warnings)
    parts_p, parts_q, parts_v, parts_w = [], [], [], []
    if len(pre_r):
        seam = float(np.linalg.norm(pre.positions[-1] - contact.positions[0]))
        if seam > STITCH_TOLERANCE:
            raise SynthesisError(f"pre-contact segment misses the contact start by {seam:.3e} m")
        jump = float(np.linalg.norm(pre.lin_vel[-1] - contact.lin_vel[0]))
        checks["pre_seam_position"] = seam
        checks["pre_velocity_jump"] = jump
        if jump > cfg.velocity_tolerance:
            warns.append(f"object velocity jumps {jump:.3f} m/s entering contact")
        parts_p.append(pre.positions[:-1])
        parts_q.append(pre.orientations[:-1])
        parts_v.append(pre.lin_vel[:-1])
        parts_w.append(pre.ang_vel[:-1])
    parts_p.append(contact.positions)
    parts_q.append(contact.orientations)
    parts_v.append(contact.lin_vel)
    parts_w.append(contact.ang_vel)
    if len(post_r):
        seam = float(np.linalg.norm(post.positions[0] - contact.positions[-1]))
        if seam > STITCH_TOLERANCE:
            raise SynthesisError(f"post-contact segment misses the contact end by {seam:.3e} m")
        jump = float(np.linalg.norm(post.lin_vel[0] - contact.lin_vel[-1]))
        checks["post_seam_position"] = seam
        checks["post_velocity_jump"] = jump
        if jump > cfg.velocity_tolerance:
            warns.append(f"object velocity jumps {jump:.3f} m/s leaving contact")
        parts_p.append(post.positions[1:])
        parts_q.append(post.orientations[1:])
        parts_v.append(post.lin_vel[1:])
        parts_w.append(post.ang_vel[1:])
    obj = PoseSeries(motion.fps, np.concatenate(parts_p), np.concatenate(parts_q),
                     np.concatenate(parts_v), np.concatenate(parts_w))
    if len(obj) != T:
        raise SynthesisError("assembled object series length differs from the motion")
    dp, dr = phi_residual(motion, obj, cfg)
    if dp > PHI_TOLERANCE or dr > PHI_TOLERANCE:
        raise SynthesisError(f"relative pose drifts from φ by {dp:.3e} m / {dr:.3e} rad in contact")
    checks.update(phi_tolerance=PHI_TOLERANCE, phi_position_residual=dp, phi_rotation_residual=dr,
                  velocity_tolerance=cfg.velocity_tolerance)
    cg = annotate_contact_graph(motion, obj, cfg.object_spec, cfg.bodies, cfg.contact_threshold)
    prov = copy.deepcopy(provenance) if provenance is not None else ProvenanceRecord()
    prov.checks = checks
    prov.warnings = list(prov.warnings) + [w for w in warns if w not in prov.warnings]
    for w in warns:
        log.warning(w)
    return InteractionClip(motion, obj, cg, cfg, list(closure_report or []), prov, clip_id)


def synthesize_contact(motion: MotionClip, cfg: SynthConfig):
    """Refine and blend the body motion, then attach the object to its anchor.

    Returns (final motion, full-length attached object series, closure report,
    warnings). Refinement runs before blending; blending windows reach into the
    contact phase, so the object is always derived from the final motion.
    """
    cfg.phases.validate(len(motion))
    report, warnings = [], []
    if cfg.refine:
        motion, report, warnings = refine_contact_phase(motion, cfg)
    motion = blend_transitions(motion, cfg.phases)
    anchor = derive_anchor_trajectory(motion, cfg.phases.anchor)
    attached = propagate_contact_trajectory(anchor, cfg.relative_pose)
    return motion, attached, report, warnings


def finish_clip(motion, attached, cfg, report=(), warnings=(), provenance=None, clip_id="clip"):
    pre, post = simulate_free_phases(attached, cfg, len(motion))
    ph = cfg.phases
    contact = attached.slice(ph.t_s, ph.t_e + 1)
    return assemble_interaction_clip(motion, cfg, contact, pre, post, report, provenance,
                                     clip_id, warnings)


def synthesize(motion: MotionClip, cfg: SynthConfig, clip_id="clip",
               provenance: Optional[ProvenanceRecord] = None) -> InteractionClip:
    """Full pipeline: contact refinement, blending, attachment, free-flight phases."""
    motion, attached, report, warnings = synthesize_contact(motion, cfg)
    return finish_clip(motion, attached, cfg, report, warnings, provenance, clip_id)
