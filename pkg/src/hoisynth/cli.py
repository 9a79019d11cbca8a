"""Command-line entry points.

Each subcommand reads a JSON manifest, validates and computes everything in
memory, then writes its outputs atomically. Exit codes: 0 success, 2 input or
parse error, 3 semantic validation failure, 4 numerical failure, 5 I/O error.
Paths inside a manifest are resolved relative to the manifest's directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import augment as aug
from . import ballistic, dynamics, grasp, report, reward
from .geometry import ObjectSpec
from .motion import MotionClip, PoseSeries
from .synth import InteractionClip, SynthConfig, synthesize

EXIT_OK, EXIT_INPUT, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5
SCHEMA_VERSION = 1
DEFAULT_AUGMENT_COUNT = 50

log = logging.getLogger("hoisynth")


class InputError(Exception):
    """Malformed manifest or input file (exit 2)."""


class NumericalError(Exception):
    """Solver failure (exit 4)."""


# ----------------------------------------------------------------------------
# manifest and file helpers

def _load_json(path: Path, what="manifest"):
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"{what} not found: {path}") from None
    except OSError as exc:
        raise OSError(f"cannot read {what} {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None


def _check_keys(d, required, optional, where):
    if not isinstance(d, dict):
        raise InputError(f"{where} must be a JSON object")
    missing = [k for k in required if k not in d]
    if missing:
        raise InputError(f"{where} is missing keys: {missing}")
    unknown = sorted(set(d) - set(required) - set(optional) - {"schema_version"})
    if unknown:
        raise InputError(f"{where} has unknown keys: {unknown}")
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InputError(f"{where}: unsupported schema_version {version}")


def _vector(v, n, name):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise InputError(f"{name} must be numeric") from None
    if arr.shape != (n,):
        raise InputError(f"{name} must have {n} entries")
    return arr


def _read_text(path: Path, what):
    try:
        return path.read_text()
    except FileNotFoundError:
        raise InputError(f"{what} not found: {path}") from None


def _load_clip(path: Path):
    text = _read_text(path, "clip")
    try:
        return InteractionClip.from_json(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed interaction clip ({exc})") from None


def _load_motion(path: Path):
    text = _read_text(path, "motion clip")
    try:
        return MotionClip.from_json(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed motion clip ({exc})") from None


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sim_params(d):
    return ballistic.SimParams.from_dict(d or {})


# ----------------------------------------------------------------------------
# commands; each returns {filename: str | bytes} and a one-line summary

def cmd_synth(m, base: Path, args):
    _check_keys(m, ["motion", "config"], ["id", "figures"], "synth manifest")
    motion = _load_motion(base / m["motion"])
    cfg = SynthConfig.from_dict(m["config"])
    clip_id = m.get("id", Path(m["motion"]).stem)
    clip = synthesize(motion, cfg, clip_id)
    out = {f"{clip_id}.json": clip.to_json()}
    if m.get("figures", True):
        out[f"{clip_id}.png"] = report.figure_bytes(report.clip_figure(clip))
    closed = [r.get("closure") for r in clip.closure_report]
    summary = (f"synthesized {clip_id}: {len(clip)} frames, phi residual "
               f"{max(clip.phi_residual()):.3g}, closure on "
               f"{sum(c is True for c in closed)}/{len(closed)} contact frames")
    return out, summary


def cmd_augment(m, base: Path, args):
    _check_keys(m, ["parent", "n", "config"], ["seed"], "augment manifest")
    parent = _load_clip(base / m["parent"])
    n = m["n"]
    if not isinstance(n, int) or n < 1:
        raise InputError("n must be a positive integer")
    cfg = aug.AugmentationConfig.from_dict(m["config"])
    seed = args.seed if args.seed is not None else m.get("seed", cfg.seed)
    clips = aug.augment_batch(parent, cfg, n, seed=seed)
    out, index = {}, []
    for i, c in enumerate(clips):
        name = f"{parent.clip_id}_aug_{i}.json"
        text = c.to_json()
        out[name] = text
        entry = {"index": i, "file": name, "sha256": hashlib.sha256(text.encode()).hexdigest(),
                 "transforms": c.provenance.transforms, "warnings": c.provenance.warnings}
        if cfg.mocap_dropout.p_loss > 0:
            obs_name = f"{parent.clip_id}_aug_{i}_obs.csv"
            obs, mask = aug.simulate_mocap_dropout(c.object, cfg.mocap_dropout,
                                                   seed=aug._child_seed(seed, n + i))
            out[obs_name] = _observation_csv(obs, mask)
            entry["observations"] = obs_name
            entry["loss_fraction"] = float(mask.mean())
        index.append(entry)
    out[f"{parent.clip_id}_aug_index.json"] = _dumps({
        "parent": parent.clip_id, "seed": int(seed), "n": n, "config": cfg.to_dict(),
        "clips": index})
    return out, f"wrote {n} augmented clips of {parent.clip_id} (seed {seed})"


def _observation_csv(obs: PoseSeries, mask):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["frame", "lost", "px", "py", "pz", "qw", "qx", "qy", "qz"])
    for t in range(len(obs)):
        w.writerow([t, int(mask[t])] + [repr(float(v)) for v in obs.positions[t]]
                   + [repr(float(v)) for v in obs.orientations[t]])
    return buf.getvalue()


def _success(rule, frames, bodies):
    kind = rule.get("rule")
    if kind == "hoop":
        center = _vector(rule.get("center"), 3, "success.center")
        land = reward.landing_point([f.obj_pos for f in frames], center[2])
        return land is not None and reward.hoop_success(land, center,
                                                        rule.get("radius", reward.HOOP_RADIUS))
    if kind == "cargo":
        return reward.cargo_success(frames[-1].obj_pos[2], float(rule["target_height"]),
                                    rule.get("tolerance", reward.CARGO_HEIGHT_TOL))
    if kind == "badminton":
        body = rule.get("hit_body")
        if body not in bodies or frames[0].contact is None:
            raise InputError("badminton rule needs a hit_body listed among the contact columns")
        j = list(bodies).index(body)
        return reward.badminton_success([f.contact[j] for f in frames])
    raise InputError(f"unknown success rule {kind!r}")


def cmd_score(m, base: Path, args):
    _check_keys(m, ["rollouts", "reference"],
                ["reward", "limits", "units", "relative_keypoints", "success", "generalization",
                 "figures"], "score manifest")
    ref_clip = _load_clip(base / m["reference"])
    weights = reward.RewardWeights.from_dict(m.get("reward", {}))
    ref = reward.reference_frames(ref_clip)
    mo = ref_clip.motion
    kp_idx = None
    if m.get("relative_keypoints"):
        kp_idx = [mo.keypoint_index(k) for k in m["relative_keypoints"]]
    rollouts = m["rollouts"]
    if isinstance(rollouts, str):
        rollouts = [rollouts]
    out, errs, wins, totals = {}, [], [], []
    for path in rollouts:
        text = _read_text(base / path, "rollout")
        try:
            frames = reward.read_rollout_csv(text, mo.keypoint_names, mo.joint_names, mo.fps,
                                             ref_clip.key_bodies)
        except reward.RolloutFormatError as exc:
            raise InputError(f"{path}: {exc}") from None
        rep = reward.score_rollout(frames, ref, weights, m.get("limits"), kp_idx)
        stem = Path(path).stem
        out[f"{stem}_reward.csv"] = rep.to_csv()
        if m.get("figures", True):
            out[f"{stem}_reward.png"] = report.figure_bytes(report.reward_figure(rep))
        errs.append(reward.tracking_errors(frames, ref, m.get("units", "m")))
        totals.append(rep.means()["total"])
        if "success" in m:
            wins.append(_success(m["success"], frames, ref_clip.key_bodies))
    metrics = {
        "n": len(rollouts),
        "E_o": float(np.mean([e["E_o"] for e in errs])),
        "E_h": float(np.mean([e["E_h"] for e in errs])),
        "units": errs[0]["units"],
        "mean_total_reward": float(np.mean(totals)),
        "max_total_reward": weights.max_total(),
    }
    rate_key = "GSR" if m.get("generalization") else "SR"
    metrics[rate_key] = float(np.mean(wins)) if wins else None
    out["metrics.json"] = _dumps(metrics)
    return out, (f"scored {len(rollouts)} rollout(s): E_o={metrics['E_o']:.4g} "
                 f"E_h={metrics['E_h']:.4g} {metrics['units']}")


def _initial_state(d):
    _check_keys(d, ["position"], ["lin_vel", "orientation", "ang_vel"], "initial state")
    return ballistic.BodyState.at(_vector(d["position"], 3, "position"),
                                  _vector(d.get("lin_vel", [0, 0, 0]), 3, "lin_vel"),
                                  _vector(d.get("orientation", [1, 0, 0, 0]), 4, "orientation"),
                                  _vector(d.get("ang_vel", [0, 0, 0]), 3, "ang_vel"))


def cmd_simulate(m, base: Path, args):
    _check_keys(m, ["initial"], ["sim", "n_steps", "duration", "direction", "output_every",
                                 "figures"], "simulate manifest")
    params = _sim_params(m.get("sim"))
    state = _initial_state(m["initial"])
    if "n_steps" in m:
        n = m["n_steps"]
    elif "duration" in m:
        n = int(round(float(m["duration"]) / params.dt))
    else:
        raise InputError("simulate manifest needs n_steps or duration")
    if not isinstance(n, int) or n < 1:
        raise InputError("n_steps must be a positive integer")
    direction = m.get("direction", "forward")
    if direction == "forward":
        traj = ballistic.simulate_forward(state, params, n)
    elif direction == "reverse":
        traj = ballistic.simulate_reverse(state, params, n)
    else:
        raise InputError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    every = m.get("output_every", 1)
    traj = traj.subsample(every)
    out = {"trajectory.csv": traj.to_csv()}
    if m.get("figures", True):
        out["trajectory.png"] = report.figure_bytes(report.trajectory_figure(traj))
    p = traj.positions[-1]
    return out, f"simulated {n} steps {direction}; final position {p[0]:.4f} {p[1]:.4f} {p[2]:.4f}"


def cmd_solve_v0(m, base: Path, args):
    _check_keys(m, ["p0", "target", "flight_time"], ["sim", "figures"], "solve-v0 manifest")
    params = _sim_params(m.get("sim"))
    p0 = _vector(m["p0"], 3, "p0")
    target = _vector(m["target"], 3, "target")
    tf = float(m["flight_time"])
    v0 = ballistic.solve_initial_velocity(p0, target, tf, params)
    n = int(round(tf / params.dt))
    traj = ballistic.simulate_forward(ballistic.BodyState.at(p0, v0), params, n)
    residual = float(np.linalg.norm(traj.positions[-1] - target))
    out = {"solution.json": _dumps({"v0": [float(x) for x in v0], "residual": residual,
                                    "flight_time": tf, "sim": params.to_dict()}),
           "solved_trajectory.csv": traj.to_csv()}
    if m.get("figures", True):
        out["solved_trajectory.png"] = report.figure_bytes(
            report.trajectory_figure(traj, "solved flight"))
    return out, f"v0 = {v0[0]:.6f} {v0[1]:.6f} {v0[2]:.6f} m/s (residual {residual:.2e} m)"


def _read_log(text, n):
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    cols = ([f"q{j}" for j in range(n)] + [f"qd{j}" for j in range(n)]
            + [f"tau{j}" for j in range(n)])
    missing = [c for c in cols if c not in header]
    if missing:
        raise InputError(f"joint log is missing columns: {missing}")
    try:
        data = np.array([[float(r[c]) for c in cols] for r in reader])
    except (TypeError, ValueError) as exc:
        raise InputError(f"non-numeric joint log value: {exc}") from None
    if len(data) < 2:
        raise InputError("joint log needs at least two rows")
    return data[:, :n], data[:, n:2 * n], data[:, 2 * n:]


def cmd_estimate_force(m, base: Path, args):
    _check_keys(m, ["chain", "log", "rate_hz"], ["friction", "smoothing", "figures"],
                "estimate-force manifest")
    chain_d = m["chain"]
    if isinstance(chain_d, str):
        chain_d = _load_json(base / chain_d, "chain definition")
    chain = dynamics.KinematicChain.from_dict(chain_d)
    friction = dynamics.FrictionModel(**m.get("friction", {}))
    rate = float(m["rate_hz"])
    if rate <= 0:
        raise ValueError("rate_hz must be positive")
    q, qd, tau = _read_log(_read_text(base / m["log"], "joint log"), chain.n)
    est = dynamics.estimate_external_torque_log(chain, q, qd, tau, rate, friction,
                                                m.get("smoothing"))
    t = np.arange(len(q)) / rate
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"tau_ext{j}" for j in range(chain.n)])
    for ti, row in zip(t, est):
        w.writerow([repr(float(ti))] + [repr(float(v)) for v in row])
    out = {"tau_ext.csv": buf.getvalue()}
    if m.get("figures", True):
        out["tau_ext.png"] = report.figure_bytes(report.torque_figure(t, est))
    rms = np.sqrt(np.mean(est ** 2, axis=0))
    return out, "external torque RMS per joint: " + " ".join(f"{v:.4g}" for v in rms)


def cmd_grasp_check(m, base: Path, args):
    _check_keys(m, ["points", "normals"],
                ["friction_mu", "cone_edges", "patch_radius", "object_spec"], "grasp-check manifest")
    char_len = 1.0
    if "object_spec" in m:
        char_len = ObjectSpec.from_dict(m["object_spec"]).characteristic_length
    contacts = grasp.ContactSet(np.asarray(m["points"], float), np.asarray(m["normals"], float),
                                m.get("friction_mu", 0.5), m.get("cone_edges", 8),
                                m.get("patch_radius", grasp.DEFAULT_PATCH_RADIUS), char_len)
    res = grasp.force_closure_test(contacts)
    out = {"closure.json": _dumps({"closure": bool(res.closure), "margin": float(res.margin),
                                   "num_contacts": len(contacts.points),
                                   "friction_mu": contacts.friction_mu,
                                   "cone_edges": contacts.cone_edges})}
    return out, f"force closure: {bool(res.closure)} (margin {res.margin:.4g})"


COMMANDS = {
    "synth": (cmd_synth, "synthesize an interaction clip from a motion clip"),
    "augment": (cmd_augment, "write n augmented clips plus a provenance index"),
    "score": (cmd_score, "score rollouts against a reference clip"),
    "simulate": (cmd_simulate, "integrate a free rigid-body flight"),
    "solve-v0": (cmd_solve_v0, "solve the launch velocity for a target and flight time"),
    "estimate-force": (cmd_estimate_force, "estimate external joint torques from a joint log"),
    "grasp-check": (cmd_grasp_check, "test a contact set for force closure"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="hoisynth", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--manifest", required=True, type=Path, help="JSON manifest")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override the manifest seed")
        s.add_argument("--quiet", action="store_true", help="print errors only")
    return p


def run(argv=None):
    """Parse argv and execute; returns (exit_code, message)."""
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        return EXIT_INPUT, "--seed must be an unsigned 64-bit integer"
    func = COMMANDS[args.command][0]
    try:
        manifest = _load_json(args.manifest)
        outputs, summary = func(manifest, args.manifest.parent, args)
    except InputError as exc:
        return EXIT_INPUT, f"input error: {exc}"
    except (ballistic.ConvergenceError, ballistic.GroundContactError, grasp.ClosureSolverError,
            np.linalg.LinAlgError, NumericalError, FloatingPointError) as exc:
        return EXIT_NUMERICAL, f"numerical failure: {exc}"
    except OSError as exc:
        return EXIT_IO, f"I/O error: {exc}"
    except (ValueError, KeyError, TypeError) as exc:
        return EXIT_VALIDATION, f"validation error: {exc}"
    try:
        for name in sorted(outputs):
            _write_atomic(args.out / name, outputs[name])
    except OSError as exc:
        return EXIT_IO, f"I/O error: {exc}"
    return EXIT_OK, summary


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    quiet = "--quiet" in argv
    logging.basicConfig(level=logging.ERROR if quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        code, message = run(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    if code != EXIT_OK:
        print(message, file=sys.stderr)
    elif not quiet:
        print(message)
    return code


if __name__ == "__main__":
    sys.exit(main())
