"""Figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def training_figures(metrics: list[dict], out_dir: Path) -> list[Path]:
    if not metrics:
        return []
    ep = np.array([m["episode"] for m in metrics])
    paths = []
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(ep, [m["rolling_win_rate"] for m in metrics], color="tab:blue", label="win rate")
        ax.plot(ep, [m["mu"] for m in metrics], color="tab:orange", ls="--", label="curriculum centre")
        ax.set_xlabel("episode")
        ax.set_ylabel("rolling-100 win rate")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(loc="lower right")
        paths.append(out_dir / "win_rate.png")
        fig.savefig(paths[-1], dpi=120, bbox_inches="tight")
        plt.close(fig)

        fig, ax = plt.subplots()
        ax.plot(ep, [m["team_return"] for m in metrics], color="0.7", lw=0.8, label="episode")
        ax.plot(ep, [m["rolling_reward"] for m in metrics], color="tab:blue", label="rolling-100 mean")
        inj = [m["episode"] for m in metrics if m.get("injected")]
        for x in inj:
            ax.axvline(x, color="tab:green", lw=0.6, alpha=0.5)
        ax.set_xlabel("episode")
        ax.set_ylabel("team return")
        ax.legend(loc="lower right")
        paths.append(out_dir / "reward.png")
        fig.savefig(paths[-1], dpi=120, bbox_inches="tight")
        plt.close(fig)
    return paths


def winrate_heatmap(names: list[str], matrix: np.ndarray, path: Path) -> Path:
    with plt.rc_context({**STYLE, "axes.grid": False,
                         "figure.figsize": (1.2 * len(names) + 2, 1.0 * len(names) + 1.5)}):
        fig, ax = plt.subplots()
        im = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="Blues")
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), names)
        for i in range(len(names)):
            for j in range(len(names)):
                ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                        color="white" if matrix[i, j] > 0.6 else "black", fontsize=9)
        ax.set_xlabel("opponent")
        ax.set_ylabel("policy")
        fig.colorbar(im, ax=ax, label="win rate")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
    return Path(path)
