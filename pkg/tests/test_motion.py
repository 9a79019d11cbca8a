import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hoisynth import quat
from hoisynth.motion import (AnchorSpec, MotionClip, Pose, PoseSeries, derive_anchor_trajectory,
                             finite_difference_velocities, make_clip)

from conftest import random_quat

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


def slerp_oracle(q0, q1, u):
    """Textbook sin-weighted formula."""
    d = float(np.dot(q0, q1))
    if d < 0:
        q1, d = -q1, -d
    th = np.arccos(min(1.0, d))
    if th < 1e-12:
        return q0
    return (np.sin((1 - u) * th) * q0 + np.sin(u * th) * q1) / np.sin(th)


def same_rotation(a, b, tol=1e-12):
    return abs(abs(np.dot(a, b)) - 1.0) < tol


# ---------------------------------------------------------------- quaternions

def test_slerp_identity_case(rng):
    q = random_quat(rng)
    assert same_rotation(quat.slerp(q, q, 0.5), q)


def test_slerp_half_of_half_turn():
    q1 = quat.from_axis_angle(Z, np.pi)
    out = quat.slerp(quat.IDENTITY, q1, 0.5)
    assert same_rotation(out, quat.from_axis_angle(Z, np.pi / 2))


def test_slerp_quarter_of_right_angle():
    out = quat.slerp(quat.IDENTITY, quat.from_axis_angle(X, np.pi / 2), 0.25)
    assert np.allclose(out, [np.cos(np.pi / 16), np.sin(np.pi / 16), 0, 0], atol=1e-12)


def test_slerp_endpoints(rng):
    q0, q1 = random_quat(rng), random_quat(rng)
    assert same_rotation(quat.slerp(q0, q1, 0.0), q0)
    assert same_rotation(quat.slerp(q0, q1, 1.0), q1)


def test_slerp_rejects_non_unit():
    with pytest.raises(ValueError):
        quat.slerp(np.array([1.0, 0.1, 0, 0]), quat.IDENTITY, 0.5)
    with pytest.raises(ValueError):
        quat.slerp(quat.IDENTITY, quat.IDENTITY, 1.5)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_slerp_matches_formula_and_angle_fraction(seed, u):
    r = np.random.default_rng(seed)
    q0, q1 = random_quat(r), random_quat(r)
    out = quat.slerp(q0, q1, u)
    assert abs(np.linalg.norm(out) - 1) < 1e-12
    assert same_rotation(out, quat.normalize(slerp_oracle(q0, q1, u)), 1e-9)
    total = quat.angle_between(q0, q1)
    assert abs(quat.angle_between(q0, out) - u * total) < 1e-9


def test_geodesic_against_arccos_form(rng):
    a, b = random_quat(rng, 500), random_quat(rng, 500)
    ref = np.arccos(np.clip(2 * np.sum(a * b, axis=1) ** 2 - 1, -1, 1))
    assert np.allclose(quat.angle_between(a, b), ref, atol=1e-7)
    assert np.allclose(quat.angle_between(a, -a), 0.0)


def test_rotate_matches_matrix(rng):
    q = random_quat(rng, 20)
    v = rng.normal(size=(20, 3))
    assert np.allclose(quat.rotate(q, v), np.einsum("nij,nj->ni", quat.to_matrix(q), v))


def test_exp_log_round_trip(rng):
    v = rng.normal(size=(100, 3))
    v *= (np.pi * 0.99 / np.maximum(np.linalg.norm(v, axis=1), np.pi))[:, None]
    assert np.allclose(quat.log_map(quat.exp_map(v)), v, atol=1e-12)


# ---------------------------------------------------------------- poses

def test_pose_compose_inverse(rng):
    a = Pose(rng.normal(size=3), random_quat(rng))
    b = Pose(rng.normal(size=3), random_quat(rng))
    ident = a.compose(a.inverse())
    assert np.allclose(ident.position, 0, atol=1e-12)
    assert same_rotation(ident.orientation, quat.IDENTITY)
    c = a.compose(b)
    back = a.inverse().compose(c)
    assert np.allclose(back.position, b.position) and same_rotation(back.orientation, b.orientation)


def test_pose_norm_invariant(rng):
    p = Pose(np.zeros(3), random_quat(rng) * (1 + 5e-7))
    assert abs(np.linalg.norm(p.orientation) - 1) < 1e-9
    with pytest.raises(ValueError):
        Pose(np.zeros(3), [1.0, 0.2, 0.0, 0.0])


# ---------------------------------------------------------------- clips and anchors

def two_palm_clip(pa, pb, T=3):
    clip = make_clip(30.0, ["j0"], ["left_palm", "right_palm", "right_foot"], T)
    clip.kp_pos[:, 0] = pa
    clip.kp_pos[:, 1] = pb
    clip.kp_pos[:, 2] = [0.0, -0.1, 0.05]
    return clip


def test_midpoint_anchor_symmetric():
    clip = two_palm_clip([0.1, 0, 1], [-0.1, 0, 1])
    a = derive_anchor_trajectory(clip, AnchorSpec())
    assert np.allclose(a.positions, [0, 0, 1])


def test_midpoint_anchor_mean_of_endpoints():
    clip = two_palm_clip([0, 0, 1], [0.2, 0, 1.2])
    a = derive_anchor_trajectory(clip, AnchorSpec())
    assert np.allclose(a.positions, [0.1, 0, 1.1])


def test_single_anchor_is_keypoint_series(rng):
    clip = two_palm_clip([0, 0, 1], [0.2, 0, 1.2], T=5)
    clip.kp_quat[:, 2] = random_quat(rng, 5)
    a = derive_anchor_trajectory(clip, AnchorSpec("single", ("right_foot",)))
    s = clip.keypoint_series("right_foot")
    assert np.array_equal(a.positions, s.positions)
    assert np.array_equal(a.orientations, s.orientations)


def test_anchor_missing_keypoint_named():
    clip = two_palm_clip([0, 0, 1], [0.2, 0, 1.2])
    with pytest.raises(KeyError, match="left_hand"):
        derive_anchor_trajectory(clip, AnchorSpec("single", ("left_hand",)))


@pytest.mark.parametrize("rule", ["keypoint-a", "averaged", "constructed-frame"])
def test_anchor_rigid_equivariance(rng, rule):
    clip = two_palm_clip([0.1, 0.2, 1.0], [-0.15, 0.25, 1.1], T=4)
    clip.kp_quat[:, :2] = random_quat(rng, 8).reshape(4, 2, 4)
    spec = AnchorSpec("midpoint", ("left_palm", "right_palm"), rule)
    g = Pose(rng.normal(size=3), random_quat(rng))
    moved = clip.copy()
    moved.kp_pos = g.position + quat.rotate(g.orientation, clip.kp_pos)
    moved.kp_quat = quat.mul(np.broadcast_to(g.orientation, clip.kp_quat.shape), clip.kp_quat)
    a = derive_anchor_trajectory(clip, spec)
    b = derive_anchor_trajectory(moved, spec)
    assert np.allclose(b.positions, g.position + quat.rotate(g.orientation, a.positions))
    expected = quat.mul(np.broadcast_to(g.orientation, a.orientations.shape), a.orientations)
    assert np.all(quat.angle_between(b.orientations, expected) < 1e-7)


def test_clip_json_round_trip(lift_clip):
    m = lift_clip.motion
    text = m.to_json()
    back = MotionClip.from_json(text)
    assert back.to_json() == text
    d = json.loads(text)
    assert set(d) >= {"fps", "joint_names", "keypoint_names", "frames"}
    assert set(d["frames"][0]) >= {"root", "dof", "keypoints"}


def test_clip_validation():
    with pytest.raises(ValueError):
        make_clip(30.0, ["j"], ["k"], 1)
    with pytest.raises(ValueError):
        make_clip(0.0, ["j"], ["k"], 3)


# ---------------------------------------------------------------- differentiation

def test_constant_series_zero_velocity(rng):
    q = np.tile(random_quat(rng), (6, 1))
    s = finite_difference_velocities(PoseSeries(30.0, np.ones((6, 3)), q))
    assert np.allclose(s.lin_vel, 0) and np.allclose(s.ang_vel, 0)


def test_linear_ramp_velocity():
    t = np.arange(50) / 100.0
    pos = np.stack([t, np.zeros_like(t), np.zeros_like(t)], axis=1)
    s = finite_difference_velocities(PoseSeries(100.0, pos, np.tile(quat.IDENTITY, (50, 1))))
    assert np.allclose(s.lin_vel[:, 0], 1.0, atol=1e-12)


def test_constant_rate_rotation():
    fps = 30.0
    t = np.arange(31) / fps
    q = quat.from_axis_angle(np.tile(Z, (31, 1)), np.pi / 2 * t)
    s = finite_difference_velocities(PoseSeries(fps, np.zeros((31, 3)), q))
    assert np.allclose(s.ang_vel[:, 2], np.pi / 2, atol=1e-9)
    assert np.allclose(s.ang_vel[:, :2], 0, atol=1e-12)


def test_constant_velocity_recovered(rng):
    v = rng.normal(size=3)
    w = rng.normal(size=3)
    t = np.arange(40) / 60.0
    q = quat.mul(quat.exp_map(np.outer(t, w)), np.tile(random_quat(rng), (40, 1)))
    s = finite_difference_velocities(PoseSeries(60.0, np.outer(t, v), q))
    assert np.allclose(s.lin_vel, v, atol=1e-6)
    assert np.allclose(s.ang_vel, w, atol=1e-6)


def test_single_frame_rejected():
    with pytest.raises(ValueError):
        finite_difference_velocities(PoseSeries(30.0, np.zeros((1, 3)), quat.IDENTITY[None]))
