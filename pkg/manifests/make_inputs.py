"""Regenerate the input files the example manifests refer to.

    python manifests/make_inputs.py

Writes the two demo motion clips, the two-link chain definition, a 100 Hz
joint log of that chain pushed by a constant 5 N tip force, and a rollout
file that replays the lift clip with the box displaced 2 cm along x.
"""

import csv
import io
from pathlib import Path

from hoisynth import demo, reward
from hoisynth.synth import synthesize

HERE = Path(__file__).resolve().parent


def write(name, text):
    (HERE / name).write_text(text)
    print("wrote", HERE / name)


def joint_log_csv(log):
    n = log["q"].shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"q{j}" for j in range(n)] + [f"qd{j}" for j in range(n)]
               + [f"tau{j}" for j in range(n)])
    for q, qd, tau in zip(log["q"], log["qd"], log["tau"]):
        w.writerow([repr(float(x)) for x in (*q, *qd, *tau)])
    return buf.getvalue()


def main():
    write("lift_motion.json", demo.lift_motion().to_json())
    write("catch_motion.json", demo.catch_throw_motion().to_json())
    write("two_link.json", demo.two_link_chain().to_json() + "\n")
    write("joint_log.csv", joint_log_csv(demo.tip_force_log(force=(3.0, -4.0))))
    lift = synthesize(demo.lift_motion(), demo.lift_config(), "lift")
    write("lift_rollout.csv", reward.clip_to_rollout_csv(lift, object_offset=(0.02, 0.0, 0.0)))


if __name__ == "__main__":
    main()
