"""Figure helpers for the report command. Figures go to PNG next to their CSVs."""

import math

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "axes.labelsize": 10,
    "font.size": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
}


def figsize(scale=1.0, ratio=None):
    width = 6.4 * scale
    ratio = ratio or (math.sqrt(5.0) - 1.0) / 2.0
    return (width, width * ratio)


def save(fig, path):
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_objective(t, J, path):
    with mpl.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(t, J, color="k", lw=1.2)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("J")
        ax.set_ylim(bottom=0)
        return save(fig, path)


def plot_speed_jnear(t, speed, jnear, path):
    """Drone 1 speed (left axis, red) against J_near (right axis, black)."""
    with mpl.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(t, speed, color="tab:red", lw=0.8, label="|u_1|")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("speed [m/s]", color="tab:red")
        ax2 = ax.twinx()
        ax2.plot(t, jnear, color="k", lw=0.8, label="J_near")
        ax2.set_ylabel("J_near")
        ax2.grid(False)
        return save(fig, path)


def plot_trajectories(positions, extent, path, d_ca=None):
    """``positions`` has shape (steps, N, 2)."""
    with mpl.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(0.8, ratio=1.2))
        for i in range(positions.shape[1]):
            line, = ax.plot(positions[:, i, 0], positions[:, i, 1], lw=0.6, label=f"drone {i + 1}")
            ax.plot(*positions[0, i], "o", color=line.get_color(), ms=4)
        if extent is not None:
            x0, x1, y0, y1 = extent
            ax.add_patch(plt.Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, ls="--", color="grey"))
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend(loc="upper right")
        return save(fig, path)


def plot_snapshots(snaps, path, extent=None, ncols=4):
    """Grid of psi rasters; ``snaps`` is a list of (t, array)."""
    n = len(snaps)
    ncols = min(ncols, n)
    nrows = int(math.ceil(n / ncols))
    vmax = max(float(np.max(a)) for _, a in snaps) or 1.0
    with mpl.rc_context(STYLE):
        fig, axes = plt.subplots(nrows, ncols, figsize=(2.2 * ncols, 3.2 * nrows), squeeze=False)
        for ax in axes.ravel():
            ax.axis("off")
        for ax, (t, a) in zip(axes.ravel(), snaps):
            im = ax.imshow(a, origin="lower", extent=extent, vmin=0, vmax=vmax, cmap="viridis")
            ax.set_title(f"t = {t:.0f} s", fontsize=8)
        fig.colorbar(im, ax=axes.ravel().tolist(), shrink=0.6, label="psi")
        return save(fig, path)
