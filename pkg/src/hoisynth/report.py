"""PNG figures written next to the CLI's CSV/JSON outputs.

Figures are built on bare Agg canvases (no pyplot state) and saved without
software metadata so identical inputs give identical bytes.
"""

import io

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

PNG_METADATA = {"Software": None}


def _figure(nrows=1, ncols=1, size=(7.0, 4.5)):
    fig = Figure(figsize=size, dpi=100)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def figure_bytes(fig) -> bytes:
    buf = io.BytesIO()
    fig.tight_layout()
    fig.savefig(buf, format="png", metadata=PNG_METADATA)
    return buf.getvalue()


def trajectory_figure(traj, title="object flight"):
    fig, ax = _figure(1, 2, (9.0, 3.8))
    t = traj.times
    ax[0, 0].plot(t, traj.positions[:, 2], color="tab:blue")
    ax[0, 0].set_xlabel("t [s]")
    ax[0, 0].set_ylabel("height [m]")
    ax[0, 1].plot(traj.positions[:, 0], traj.positions[:, 2], color="tab:orange")
    ax[0, 1].plot(*traj.positions[[0, -1]][:, [0, 2]].T, "k.", ms=6)
    ax[0, 1].set_xlabel("x [m]")
    ax[0, 1].set_ylabel("z [m]")
    ax[0, 1].set_aspect("equal", adjustable="datalim")
    fig.suptitle(title)
    return fig


def clip_figure(clip):
    """Object height, anchor height and the contact graph over the clip."""
    from .motion import anchor_arrays

    ph = clip.phases
    frames = np.arange(len(clip))
    anchor_p, _ = anchor_arrays(clip.motion, ph.anchor)
    fig, ax = _figure(2, 1, (7.5, 5.0))
    top = ax[0, 0]
    top.axvspan(ph.t_s, ph.t_e, color="0.9", label="contact")
    top.plot(frames, clip.object.positions[:, 2], label="object z")
    top.plot(frames, anchor_p[:, 2], "--", label="anchor z")
    top.set_ylabel("height [m]")
    top.legend(loc="best", fontsize=8)
    bottom = ax[1, 0]
    cg = np.asarray(clip.contact_graph, dtype=float).T
    bottom.imshow(cg, aspect="auto", interpolation="nearest", cmap="Greys", vmin=0, vmax=1,
                  extent=(-0.5, len(clip) - 0.5, len(cg) - 0.5, -0.5))
    bottom.set_yticks(range(len(cg)))
    bottom.set_yticklabels(clip.key_bodies, fontsize=8)
    bottom.set_xlabel("frame")
    top.set_xlim(-0.5, len(clip) - 0.5)
    bottom.set_xlim(-0.5, len(clip) - 0.5)
    fig.suptitle(clip.clip_id)
    return fig


def reward_figure(report):
    cols = [c for c in report.columns[1:] if c != "total"]
    fig, ax = _figure(1, 1, (8.0, 4.0))
    a = ax[0, 0]
    for c in cols:
        vals = [r.get(c, 0.0) for r in report.rows]
        if any(vals):
            a.plot(vals, lw=1, label=c)
    a.plot([r["total"] for r in report.rows], "k", lw=2, label="total")
    a.set_xlabel("frame")
    a.set_ylabel("reward")
    a.legend(loc="center left", bbox_to_anchor=(1.0, 0.5), fontsize=7)
    return fig


def torque_figure(times, estimate, names=None):
    estimate = np.asarray(estimate)
    fig, ax = _figure(1, 1, (7.0, 3.8))
    a = ax[0, 0]
    for j in range(estimate.shape[1]):
        a.plot(times, estimate[:, j], label=names[j] if names else f"joint {j}")
    a.set_xlabel("t [s]")
    a.set_ylabel("external torque [N m]")
    a.legend(fontsize=8)
    return fig
