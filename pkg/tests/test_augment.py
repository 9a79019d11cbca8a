from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from hoisynth import demo
from hoisynth.augment import (CARGO_RADIUS, AugmentationConfig, DropoutModel, augment_batch,
                              randomize_initial_velocity, run_lengths, sample_generalization_case,
                              scale_object, simulate_mocap_dropout, transform_contact_trajectory)
from hoisynth.motion import PoseSeries, derive_anchor_trajectory
from hoisynth.synth import InteractionClip, SynthesisError, synthesize

from conftest import random_quat


@pytest.fixture(scope="module")
def short_catch():
    """A 16-frame catch clip; cheap enough to re-simulate a thousand times."""
    cfg = replace(demo.catch_throw_config(t_s=4, t_e=10, k=1), check_closure=False)
    return synthesize(demo.catch_throw_motion(T=16, t_s=4, t_e=10), cfg, "short")


def _strip_provenance(clip):
    d = clip.to_dict()
    d.pop("provenance")
    d.pop("id")
    return d


# ---------------------------------------------------------------- geometry scaling

def test_scale_one_is_identity(catch_clip):
    out = scale_object(catch_clip, 1.0)
    assert _strip_provenance(out) == _strip_provenance(catch_clip)
    assert out.provenance.transforms[-1] == {"op": "scale_object", "s": 1.0}
    assert out.provenance.parent == "catch"


def test_scale_sphere_similarity(catch_clip):
    phi = replace(catch_clip.config.relative_pose, translation=(0.0, 0.02, 0.03))
    clip = synthesize(catch_clip.motion, replace(catch_clip.config, relative_pose=phi, refine=False),
                      "catch")
    out = scale_object(clip, 1.25)
    assert out.object_spec.dims == pytest.approx((0.15,))
    assert np.linalg.norm(out.config.relative_pose.translation) == pytest.approx(
        1.25 * np.linalg.norm(phi.translation))
    assert max(out.phi_residual()) <= 1e-9


@pytest.mark.parametrize("s", [0.0, -1.0])
def test_scale_must_be_positive(catch_clip, s):
    with pytest.raises(ValueError):
        scale_object(catch_clip, s)


def test_scale_records_closure_loss(lift_clip):
    # frictionless palms never close a grasp: the scaled clip is still emitted,
    # flagged in its provenance
    slippery = synthesize(lift_clip.motion, replace(lift_clip.config, friction_mu=0.0), "lift")
    out = scale_object(slippery, 0.8)
    assert any("force closure lost" in w for w in out.provenance.warnings)
    assert len(out) == len(lift_clip)


# ---------------------------------------------------------------- contact transforms

def test_transform_identity(lift_clip):
    out = transform_contact_trajectory(lift_clip, (0, 0, 0), 1.0)
    assert _strip_provenance(out) == _strip_provenance(lift_clip)


def _held(ph):
    """Contact frames untouched by the blend windows."""
    k = ph.blend_window_k
    return slice(ph.t_s + k, ph.t_e - k + 1)


def test_transform_lowers_lift(lift_clip):
    ph = lift_clip.phases
    out = transform_contact_trajectory(lift_clip, (0, 0, -0.3), 1.0)
    held = _held(ph)
    dz = out.object.positions[held, 2] - lift_clip.object.positions[held, 2]
    assert np.allclose(dz, -0.3, atol=1e-9)
    kz = out.motion.kp_pos[held, :, 2] - lift_clip.motion.kp_pos[held, :, 2]
    assert np.allclose(kz, -0.3, atol=1e-9)
    # outside the blend windows the body is untouched
    k = ph.blend_window_k
    assert np.array_equal(out.motion.kp_pos[:ph.t_s - k + 1],
                          lift_clip.motion.kp_pos[:ph.t_s - k + 1])
    assert max(out.phi_residual()) <= 1e-9
    assert "caveat" in out.provenance.transforms[-1]


def test_transform_offset_ramps_through_blend_window(lift_clip):
    ph = lift_clip.phases
    k = ph.blend_window_k
    out = transform_contact_trajectory(lift_clip, (0.1, 0, 0), 1.0)
    shift = out.motion.root_pos[:, 0] - lift_clip.motion.root_pos[:, 0]
    ramp = shift[ph.t_s - k:ph.t_s + k + 1]
    assert np.allclose(ramp, np.linspace(0, 0.1, 2 * k + 1), atol=1e-12)
    tail = shift[ph.t_e - k:ph.t_e + k + 1]
    assert np.allclose(tail, np.linspace(0.1, 0, 2 * k + 1), atol=1e-12)
    assert np.max(np.abs(np.diff(shift))) <= 0.1 / (2 * k) + 1e-12


def test_transform_scale_about_centroid(lift_clip):
    ph = lift_clip.phases
    con, held = slice(ph.t_s, ph.t_e + 1), _held(ph)
    out = transform_contact_trajectory(lift_clip, (0, 0, 0), 1.5)
    a0 = derive_anchor_trajectory(lift_clip.motion, ph.anchor).positions
    a1 = derive_anchor_trajectory(out.motion, ph.anchor).positions
    c = a0[con].mean(axis=0)
    assert np.allclose(a1[held], 1.5 * (a0[held] - c) + c, atol=1e-9)
    assert max(out.phi_residual()) <= 1e-9


def test_transform_below_ground_rejected(lift_clip):
    with pytest.raises(SynthesisError, match="below ground"):
        transform_contact_trajectory(lift_clip, (0, 0, -1.0), 1.0)


# ---------------------------------------------------------------- launch velocity

def test_zero_range_gives_identical_clips(short_catch):
    clips = randomize_initial_velocity(short_catch, AugmentationConfig(), 4, seed=5)
    texts = {c.to_json().split('"provenance"')[0] for c in clips}
    assert len(texts) == 1


def test_velocity_randomization_deterministic(short_catch):
    cfg = AugmentationConfig(velocity_perturbation=(0.3, 0.3, 0.3))
    a = [c.to_json() for c in randomize_initial_velocity(short_catch, cfg, 3, seed=11)]
    b = [c.to_json() for c in randomize_initial_velocity(short_catch, cfg, 3, seed=11)]
    c = [c.to_json() for c in randomize_initial_velocity(short_catch, cfg, 3, seed=12)]
    assert a == b and a != c


def test_velocity_perturbation_statistics(short_catch):
    cfg = AugmentationConfig(velocity_perturbation=(0.3, 0.3, 0.3))
    clips = randomize_initial_velocity(short_catch, cfg, 1000, seed=2)
    ph = short_catch.phases
    nominal = short_catch.object.lin_vel[ph.t_e]
    dv = np.array([c.config.post_velocity for c in clips]) - nominal
    assert np.all(dv.min(axis=0) >= -0.3) and np.all(dv.min(axis=0) <= -0.27)
    assert np.all(dv.max(axis=0) <= 0.3) and np.all(dv.max(axis=0) >= 0.27)
    # the simulated post phase actually starts from the perturbed velocity
    assert np.allclose(clips[0].object.lin_vel[ph.t_e + 1] - nominal, dv[0], atol=0.5)
    assert max(clips[0].phi_residual()) <= 1e-9


def test_velocity_randomization_needs_free_phase(lift_clip):
    static = synthesize(lift_clip.motion, replace(lift_clip.config, post_mode="static",
                                                  check_closure=False), "s")
    with pytest.raises(SynthesisError):
        randomize_initial_velocity(static, AugmentationConfig(), 1)


# ---------------------------------------------------------------- dropout

def _obs(n, rng):
    return PoseSeries(100.0, rng.normal(size=(n, 3)), random_quat(rng, n))


def test_dropout_zero_is_identity(rng):
    obs = _obs(200, rng)
    out, mask = simulate_mocap_dropout(obs, DropoutModel(0.0, 5.0), seed=1)
    assert not mask.any()
    assert np.array_equal(out.positions, obs.positions)


def test_dropout_one_holds_first_frame(rng):
    obs = _obs(50, rng)
    out, mask = simulate_mocap_dropout(obs, DropoutModel(1.0, 5.0), seed=1)
    assert not mask[0] and mask[1:].all()
    assert np.array_equal(out.positions, np.tile(obs.positions[0], (50, 1)))


def test_dropout_holds_last_valid_pose(rng):
    obs = _obs(2000, rng)
    out, mask = simulate_mocap_dropout(obs, DropoutModel(0.3, 4.0), seed=9)
    last = 0
    for t in range(len(obs)):
        if not mask[t]:
            last = t
        assert np.array_equal(out.positions[t], obs.positions[last])
        assert np.array_equal(out.orientations[t], obs.orientations[last])


def test_dropout_statistics():
    obs = PoseSeries(100.0, np.zeros((100_000, 3)), np.tile([1.0, 0, 0, 0], (100_000, 1)))
    _, mask = simulate_mocap_dropout(obs, DropoutModel(0.1, 5.0), seed=2024)
    assert abs(mask.mean() - 0.1) <= 0.01
    assert abs(run_lengths(mask).mean() - 5.0) <= 0.5


def test_dropout_deterministic(rng):
    obs = _obs(500, rng)
    _, a = simulate_mocap_dropout(obs, DropoutModel(0.2, 3.0), seed=4)
    _, b = simulate_mocap_dropout(obs, DropoutModel(0.2, 3.0), seed=4)
    assert np.array_equal(a, b)


def test_dropout_model_validation():
    with pytest.raises(ValueError):
        DropoutModel(1.2, 5.0)
    with pytest.raises(ValueError):
        DropoutModel(0.1, 0.5)
    with pytest.raises(ValueError):
        DropoutModel(0.9, 1.0).transition_probs


def test_run_lengths():
    assert run_lengths([0, 1, 1, 0, 1, 0, 0, 1, 1, 1]).tolist() == [2, 1, 3]
    assert run_lengths([0, 0]).tolist() == []


# ---------------------------------------------------------------- generalization sampling

def test_generalization_deterministic():
    for task in ("catch_shot", "badminton", "cargo"):
        assert sample_generalization_case(task, 17) == sample_generalization_case(task, 17)


def test_generalization_unknown_task():
    with pytest.raises(ValueError):
        sample_generalization_case("juggling", 0)


def test_catch_offsets_uniform_cube():
    off = np.array([sample_generalization_case("catch_shot", s)["object_offset"]
                    for s in range(10_000)])
    assert np.all(np.abs(off) <= 0.3)
    assert np.all(np.abs(off.mean(axis=0)) <= 0.01)
    for axis in range(3):
        assert stats.kstest(off[:, axis], stats.uniform(-0.3, 0.6).cdf).statistic <= 0.02


def test_cargo_area_uniform_semicircle():
    cases = [sample_generalization_case("cargo", s) for s in range(10_000)]
    r = np.array([c["radius"] for c in cases])
    head = np.array([c["heading"] for c in cases])
    assert np.all(r <= CARGO_RADIUS) and np.all(np.abs(head) <= np.pi / 2)
    # radial CDF of an area-uniform disc is (r / R)^2
    assert stats.kstest(r, lambda x: np.clip(x / CARGO_RADIUS, 0, 1) ** 2).statistic <= 0.02
    xy = np.array([c["object_position"][:2] for c in cases])
    assert np.all(xy[:, 0] >= 0) and np.allclose(np.hypot(*xy.T), r)


# ---------------------------------------------------------------- batches and config

def test_batch_mixed_axes(catch_clip):
    cfg = AugmentationConfig(geometry_scale_range=(0.9, 1.1),
                             contact_translation_range=(0.05, 0.05, 0.05),
                             velocity_perturbation=(0.2, 0.2, 0.2), seed=3)
    clips = augment_batch(catch_clip, cfg, 3)
    assert [c.clip_id for c in clips] == ["catch_aug_0", "catch_aug_1", "catch_aug_2"]
    for i, c in enumerate(clips):
        ops = [t["op"] for t in c.provenance.transforms]
        assert ops == ["scale_object", "transform_contact_trajectory",
                       "randomize_initial_velocity", "batch_member"]
        assert c.provenance.transforms[-1]["index"] == i
        assert c.provenance.parent == "catch"
        assert max(c.phi_residual()) <= 1e-9
        assert InteractionClip.from_json(c.to_json()).to_json() == c.to_json()
    again = augment_batch(catch_clip, cfg, 3)
    assert [c.to_json() for c in clips] == [c.to_json() for c in again]


def test_batch_members_independent_of_batch_size(catch_clip):
    cfg = AugmentationConfig(geometry_scale_range=(0.9, 1.1), seed=8)
    two = augment_batch(catch_clip, cfg, 2)
    one = augment_batch(catch_clip, cfg, 1)
    assert one[0].to_json() == two[0].to_json()


def test_provenance_replays_to_same_clip(catch_clip):
    cfg = AugmentationConfig(geometry_scale_range=(0.9, 1.1),
                             contact_translation_range=(0.05, 0.05, 0.05), seed=21)
    clip = augment_batch(catch_clip, cfg, 1)[0]
    steps = clip.provenance.transforms
    replay = scale_object(catch_clip, steps[0]["s"])
    replay = transform_contact_trajectory(replay, steps[1]["translation"], steps[1]["s"])
    assert np.array_equal(replay.object.positions, clip.object.positions)


def test_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        AugmentationConfig(geometry_scale_range=(1.2, 0.8))
    with pytest.raises(ValueError):
        AugmentationConfig(velocity_perturbation=(-0.1, 0, 0))
    with pytest.raises(ValueError):
        AugmentationConfig.from_dict({"bogus": 1})
    cfg = AugmentationConfig(mocap_dropout=DropoutModel(0.1, 5.0), seed=4)
    assert AugmentationConfig.from_dict(cfg.to_dict()) == cfg
