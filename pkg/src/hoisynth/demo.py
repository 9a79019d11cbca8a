"""Small hand-authored motions for examples and tests."""

import numpy as np

from .geometry import ObjectSpec
from .motion import AnchorSpec, MotionClip, make_clip
from .synth import PhaseAnnotation, RelativeTransform, SynthConfig
from .ballistic import SimParams

KEYPOINTS = ["pelvis", "head", "left_palm", "right_palm", "left_foot", "right_foot"]
JOINTS = ["waist_yaw", "left_shoulder", "left_elbow", "right_shoulder", "right_elbow", "left_knee",
          "right_knee"]


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3 - 2 * u)


def _body(T, fps):
    clip = make_clip(fps, JOINTS, KEYPOINTS, T)
    clip.root_pos[:] = [0.0, 0.0, 0.8]
    k = {n: i for i, n in enumerate(KEYPOINTS)}
    clip.kp_pos[:, k["pelvis"]] = [0.0, 0.0, 0.8]
    clip.kp_pos[:, k["head"]] = [0.0, 0.0, 1.5]
    clip.kp_pos[:, k["left_foot"]] = [0.0, 0.12, 0.05]
    clip.kp_pos[:, k["right_foot"]] = [0.0, -0.12, 0.05]
    return clip, k


def lift_motion(T=60, fps=30.0, table_height=0.8, box_half_width=0.15, t_s=20, t_e=45):
    """Both palms close on a box resting on a table, lift it 0.3 m, then let go."""
    clip, k = _body(T, fps)
    t = np.arange(T)
    approach = _smoothstep(t / t_s)
    lift = _smoothstep((t - t_s) / (t_e - t_s))
    release = _smoothstep((t - t_e) / max(1, T - 1 - t_e))
    half = box_half_width + 0.2 * (1 - approach) + 0.2 * release
    z = table_height + 0.3 * lift
    x = 0.35 + 0.1 * lift
    clip.kp_pos[:, k["left_palm"]] = np.stack([x, half, z], axis=1)
    clip.kp_pos[:, k["right_palm"]] = np.stack([x, -half, z], axis=1)
    clip.dof[:, 1] = 0.5 * lift
    clip.dof[:, 3] = 0.5 * lift
    clip.dof[:, 2] = -0.3 * approach
    clip.dof[:, 4] = -0.3 * approach
    return MotionClip(clip.fps, clip.joint_names, clip.keypoint_names, clip.root_pos,
                      clip.root_quat, clip.dof, clip.kp_pos, clip.kp_quat)


def lift_config(t_s=20, t_e=45, k=3, table_height=0.8):
    box = ObjectSpec("box", (0.3, 0.3, 0.3), mass=2.0)
    return SynthConfig(
        phases=PhaseAnnotation(t_s, t_e, AnchorSpec("midpoint", ("left_palm", "right_palm")), k),
        object_spec=box,
        relative_pose=RelativeTransform((0.0, 0.0, 0.0)),
        sim=SimParams(restitution=0.2, ground_height=0.0),
        pre_mode="static", post_mode="forward",
        key_bodies=("left_palm", "right_palm"),
    )


def catch_throw_motion(T=45, fps=30.0, t_s=10, t_e=30, radius=0.12):
    """Palms receive a ball at chest height, hold it, and push it forward and up."""
    clip, k = _body(T, fps)
    t = np.arange(T)
    windup = _smoothstep((t - t_s) / (t_e - t_s))
    x = 0.3 - 0.1 * np.sin(np.pi * windup) + 0.25 * windup
    z = 1.1 + 0.3 * windup
    clip.kp_pos[:, k["left_palm"]] = np.stack([x, np.full(T, radius), z], axis=1)
    clip.kp_pos[:, k["right_palm"]] = np.stack([x, np.full(T, -radius), z], axis=1)
    clip.dof[:, 1] = 0.8 * windup
    clip.dof[:, 3] = 0.8 * windup
    return MotionClip(clip.fps, clip.joint_names, clip.keypoint_names, clip.root_pos,
                      clip.root_quat, clip.dof, clip.kp_pos, clip.kp_quat)


def catch_throw_config(t_s=10, t_e=30, k=2, radius=0.12):
    return SynthConfig(
        phases=PhaseAnnotation(t_s, t_e, AnchorSpec("midpoint", ("left_palm", "right_palm")), k),
        object_spec=ObjectSpec("sphere", (radius,), mass=0.6),
        relative_pose=RelativeTransform((0.0, 0.0, 0.0)),
        sim=SimParams(linear_damping=0.05, restitution=0.7),
        pre_mode="reverse", post_mode="forward",
        pre_velocity=(-3.0, 0.0, -1.0),
        key_bodies=("left_palm", "right_palm", "head"),
    )


def two_link_chain():
    from .dynamics import KinematicChain, Link
    return KinematicChain((Link(1.5, 0.4, 0.2, 0.02), Link(1.0, 0.35, 0.17, 0.012)))


def tip_force_log(chain=None, force=(3.0, -4.0), duration=2.0, rate_hz=100.0, sim_dt=1e-3,
                  q0=(0.3, 0.5)):
    """Joint log of a PD-tracked chain pushed by a constant tip force.

    Integrates at sim_dt and samples every 1/rate_hz seconds. Returns a dict
    with q, qd, tau (commanded), qdd (exact accelerations used by the
    integrator) and tau_contact = J^T F (the torque the force induces).
    """
    from .dynamics import ChainState, forward_dynamics_step, pd_torque, tip_jacobian
    chain = two_link_chain() if chain is None else chain
    n = chain.n
    every = int(round(1.0 / (rate_hz * sim_dt)))
    if abs(every * sim_dt * rate_hz - 1.0) > 1e-9:
        raise ValueError("rate_hz must divide the simulation rate")
    force = np.asarray(force, dtype=float)
    q0 = np.resize(np.asarray(q0, dtype=float), n)
    # alternating-sign sinusoids about q0, starting on the reference (no transient)
    amp = 0.4 * (-1.0) ** np.arange(n)
    omega = np.pi
    state = ChainState(q0, amp * omega)
    kp, kd = np.full(n, 60.0), np.full(n, 4.0)
    rows = {"q": [], "qd": [], "tau": [], "qdd": [], "tau_contact": []}
    steps = int(round(duration / sim_dt))
    for k in range(steps + 1):
        t = k * sim_dt
        target = q0 + amp * np.sin(omega * t)
        tau = pd_torque(kp, kd, target, state.q, state.qd - amp * omega * np.cos(omega * t))
        ext = tip_jacobian(chain, state.q).T @ force
        nxt = forward_dynamics_step(chain, state, tau, ext, dt=sim_dt)
        if k % every == 0:
            rows["q"].append(state.q)
            rows["qd"].append(state.qd)
            rows["tau"].append(tau)
            rows["qdd"].append(nxt.qdd)
            rows["tau_contact"].append(ext)
        state = nxt
    return {k: np.array(v) for k, v in rows.items()}
