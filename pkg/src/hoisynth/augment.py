"""Augmentation of synthesized interaction clips.

Every randomized operation derives its generator from (seed, index) so any
output can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import lowest_point
from .motion import PoseSeries, anchor_arrays
from .synth import (InteractionClip, SynthesisError, finish_clip, propagate_contact_trajectory,
                    synthesize)

TASKS = ("catch_shot", "badminton", "cargo")
GENERALIZATION_OFFSET = 0.3   # m, uniform per-axis ball/shuttle start perturbation
CARGO_RADIUS = 3.0            # m, forward semicircle for cargo placement


def rng_for(seed, index=0):
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])


@dataclass(frozen=True)
class DropoutModel:
    p_loss: float = 0.0
    mean_burst_len: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_loss <= 1.0:
            raise ValueError("p_loss must lie in [0, 1]")
        if self.mean_burst_len < 1.0:
            raise ValueError("mean_burst_len must be at least one frame")

    @property
    def transition_probs(self):
        """(P(valid -> lost), P(lost -> valid)) for the two-state chain."""
        if self.p_loss >= 1.0:
            return 1.0, 0.0
        exit_p = 1.0 / self.mean_burst_len
        enter_p = self.p_loss * exit_p / (1.0 - self.p_loss)
        if enter_p > 1.0:
            raise ValueError("p_loss too high for this burst length")
        return enter_p, exit_p


@dataclass(frozen=True)
class AugmentationConfig:
    geometry_scale_range: tuple = (1.0, 1.0)
    contact_translation_range: tuple = (0.0, 0.0, 0.0)
    contact_scale_range: tuple = (1.0, 1.0)
    velocity_perturbation: tuple = (0.0, 0.0, 0.0)
    mocap_dropout: DropoutModel = field(default_factory=DropoutModel)
    seed: int = 0

    def __post_init__(self):
        for name in ("geometry_scale_range", "contact_scale_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < lo <= hi")
            object.__setattr__(self, name, (float(lo), float(hi)))
        for name in ("contact_translation_range", "velocity_perturbation"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3 or any(x < 0 for x in v):
                raise ValueError(f"{name} must be three non-negative half-widths")
            object.__setattr__(self, name, v)
        if isinstance(self.mocap_dropout, dict):
            object.__setattr__(self, "mocap_dropout", DropoutModel(**self.mocap_dropout))

    def to_dict(self):
        return {
            "geometry_scale_range": list(self.geometry_scale_range),
            "contact_translation_range": list(self.contact_translation_range),
            "contact_scale_range": list(self.contact_scale_range),
            "velocity_perturbation": list(self.velocity_perturbation),
            "mocap_dropout": {"p_loss": self.mocap_dropout.p_loss,
                              "mean_burst_len": self.mocap_dropout.mean_burst_len},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown augmentation keys: {sorted(unknown)}")
        d = dict(d)
        if "mocap_dropout" in d:
            d["mocap_dropout"] = DropoutModel(**d["mocap_dropout"])
        return cls(**d)


def _resynth(clip: InteractionClip, motion, cfg, op, **params):
    prov = clip.provenance.appended(op, **params)
    prov.parent = clip.provenance.parent or clip.clip_id
    return synthesize(motion, cfg, clip.clip_id, prov)


def scale_object(clip: InteractionClip, s: float) -> InteractionClip:
    """Scale the object geometry and the anchor-to-object offset by s, then rebuild."""
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    cfg = replace(clip.config, object_spec=clip.object_spec.scaled(s),
                  relative_pose=clip.config.relative_pose.scaled(s))
    out = _resynth(clip, clip.motion, cfg, "scale_object", s=float(s))
    lost = [r["frame"] for r in out.closure_report if r.get("closure") is False]
    if lost:
        out.provenance.warnings.append(f"force closure lost after scaling at frames {lost}")
    return out


def transform_contact_trajectory(clip: InteractionClip, translation=(0.0, 0.0, 0.0),
                                 s: float = 1.0) -> InteractionClip:
    """Translate/scale the contact-phase anchor path about its centroid.

    The body follows in keypoint space: every keypoint and the root take the
    anchor's per-frame displacement during contact, and the re-run transition
    blending ramps that offset to zero across each blend window. Joint angles
    are left alone.
    """
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    translation = np.asarray(translation, dtype=float).reshape(3)
    cfg = clip.config
    ph = cfg.phases
    motion = clip.motion.copy()
    a_p, _ = anchor_arrays(motion, ph.anchor)
    con = slice(ph.t_s, ph.t_e + 1)
    centroid = a_p[con].mean(axis=0)
    new = s * (a_p[con] - centroid) + centroid + translation
    disp = np.zeros_like(a_p)
    disp[con] = new - a_p[con]
    # frames outside contact keep their pose; re-blending during synthesis
    # interpolates between the window ends, which ramps the offset to zero
    motion.kp_pos += disp[:, None, :]
    motion.root_pos += disp
    # the object must stay above ground along the new contact path
    a_p2, a_q2 = anchor_arrays(motion, ph.anchor)
    attached = propagate_contact_trajectory(PoseSeries(motion.fps, a_p2, a_q2), cfg.relative_pose)
    for t in range(ph.t_s, ph.t_e + 1):
        low = lowest_point(cfg.object_spec, attached.positions[t], attached.orientations[t])
        if low < cfg.sim.ground_height - 1e-9:
            raise SynthesisError(f"transformed contact trajectory goes below ground at frame {t}")
    out = _resynth(clip, motion, cfg, "transform_contact_trajectory",
                   translation=[float(x) for x in translation], s=float(s),
                   caveat="body warped in keypoint space; joint angles unchanged")
    return out


def _has_free_phase(clip):
    ph = clip.phases
    cfg = clip.config
    pre = ph.t_s > 0 and cfg.pre_mode == "reverse"
    post = ph.t_e < len(clip) - 1 and cfg.post_mode == "forward"
    return pre, post


def randomize_initial_velocity(clip: InteractionClip, config: AugmentationConfig, n: int,
                               seed=None):
    """n clips whose simulated free phases start from perturbed velocities.

    Perturbations are uniform per axis within ±config.velocity_perturbation,
    drawn from the generator for (seed, index). The contact phase is reused.
    """
    pre, post = _has_free_phase(clip)
    if not (pre or post):
        raise SynthesisError("clip has no simulated non-contact phase to perturb")
    seed = config.seed if seed is None else seed
    cfg = clip.config
    ph = cfg.phases
    a_p, a_q = anchor_arrays(clip.motion, ph.anchor)
    attached = propagate_contact_trajectory(PoseSeries(clip.motion.fps, a_p, a_q), cfg.relative_pose)
    half = np.array(config.velocity_perturbation)
    out = []
    for i in range(n):
        rng = rng_for(seed, i)
        params = {"seed": int(seed), "index": i}
        new_cfg = cfg
        if post:
            nominal = attached.lin_vel[ph.t_e] if cfg.post_velocity is None else np.array(cfg.post_velocity)
            dv = rng.uniform(-half, half)
            new_cfg = replace(new_cfg, post_velocity=tuple(float(x) for x in nominal + dv))
            params["post_delta"] = [float(x) for x in dv]
        if pre:
            nominal = attached.lin_vel[ph.t_s] if cfg.pre_velocity is None else np.array(cfg.pre_velocity)
            dv = rng.uniform(-half, half)
            new_cfg = replace(new_cfg, pre_velocity=tuple(float(x) for x in nominal + dv))
            params["pre_delta"] = [float(x) for x in dv]
        prov = clip.provenance.appended("randomize_initial_velocity", **params)
        prov.parent = clip.provenance.parent or clip.clip_id
        out.append(finish_clip(clip.motion, attached, new_cfg, clip.closure_report, (),
                               prov, clip.clip_id))
    return out


def simulate_mocap_dropout(object_obs: PoseSeries, model: DropoutModel, seed=0):
    """Degrade an observed pose stream with bursty frame loss.

    Loss follows a two-state Markov chain whose stationary loss fraction is
    p_loss and whose bursts are geometric with mean mean_burst_len. Lost frames
    repeat the last valid pose; frame 0 is always valid. Returns (series, mask)
    with mask True on lost frames.
    """
    n = len(object_obs)
    enter_p, exit_p = model.transition_probs
    rng = rng_for(seed)
    draws = rng.random(n)
    mask = np.zeros(n, dtype=bool)
    lost = False
    for t in range(1, n):
        lost = draws[t] >= exit_p if lost else draws[t] < enter_p
        mask[t] = lost
    src = np.arange(n)
    src[mask] = 0
    src = np.maximum.accumulate(src)
    out = PoseSeries(object_obs.fps, object_obs.positions[src], object_obs.orientations[src],
                     None if object_obs.lin_vel is None else object_obs.lin_vel[src],
                     None if object_obs.ang_vel is None else object_obs.ang_vel[src])
    return out, mask


def run_lengths(mask):
    """Lengths of consecutive True runs."""
    mask = np.asarray(mask, dtype=np.int8)
    edges = np.diff(np.concatenate([[0], mask, [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return ends - starts


def sample_generalization_case(task: str, seed) -> dict:
    """Initial condition for generalization testing of one task."""
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    rng = rng_for(seed)
    if task in ("catch_shot", "badminton"):
        off = rng.uniform(-GENERALIZATION_OFFSET, GENERALIZATION_OFFSET, size=3)
        return {"task": task, "seed": int(seed), "object_offset": [float(x) for x in off]}
    # area-uniform over the half disc in front of the robot (+x heading)
    r = CARGO_RADIUS * np.sqrt(rng.random())
    heading = rng.uniform(-np.pi / 2, np.pi / 2)
    return {"task": task, "seed": int(seed), "radius": float(r), "heading": float(heading),
            "object_position": [float(r * np.cos(heading)), float(r * np.sin(heading)), 0.0]}


def augment_batch(clip: InteractionClip, config: AugmentationConfig, n: int, seed=None):
    """n clips, each drawing geometry scale, contact transform and launch velocity
    perturbations from its own (seed, index) stream."""
    seed = config.seed if seed is None else seed
    pre, post = _has_free_phase(clip)
    out = []
    for i in range(n):
        rng = rng_for(seed, 1_000_003 + i)
        s_geo = float(rng.uniform(*config.geometry_scale_range))
        trans = rng.uniform(-np.array(config.contact_translation_range),
                            np.array(config.contact_translation_range))
        s_con = float(rng.uniform(*config.contact_scale_range))
        cur = clip
        if s_geo != 1.0:
            cur = scale_object(cur, s_geo)
        if np.any(trans != 0) or s_con != 1.0:
            cur = transform_contact_trajectory(cur, trans, s_con)
        if (pre or post) and any(config.velocity_perturbation):
            cur = randomize_initial_velocity(cur, config, 1, seed=_child_seed(seed, i))[0]
        cur = _with_id(cur, f"{clip.clip_id}_aug_{i}")
        cur.provenance.transforms.append({"op": "batch_member", "seed": int(seed), "index": i})
        out.append(cur)
    return out


def _child_seed(seed, index):
    return int(rng_for(seed, index).integers(0, 2**63 - 1))


def _with_id(clip, clip_id):
    return InteractionClip(clip.motion, clip.object, clip.contact_graph, clip.config,
                           clip.closure_report, clip.provenance, clip_id)
