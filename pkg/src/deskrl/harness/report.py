"""Run reports: mean±std curve plot (SVG) and a text summary."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .curves import read_learning_curve_csv, steps_to_threshold  # noqa: E402


def load_run(run_dir) -> dict:
    run_dir = Path(run_dir)
    cfg = json.loads((run_dir / "config.json").read_text())
    header, rows = read_learning_curve_csv(run_dir / "curve.csv")
    steps = [int(r[0]) for r in rows]
    means = [r[1] for r in rows]
    stds = [r[2] for r in rows]
    label = cfg["variant"]
    if cfg.get("pretrain_mode"):
        label += f"+{cfg['pretrain_mode']}/{cfg['transfer']}"
    return {"name": cfg["name"], "label": label, "env": cfg["env_id"],
            "steps": steps, "means": means, "stds": stds}


def emit_report(run_dirs, out_dir, threshold: float | None = None) -> tuple[Path, Path]:
    """One line + shaded std band per run directory; summary lists final
    means and steps-to-threshold."""
    runs = [load_run(d) for d in run_dirs]
    if not runs:
        raise ValueError("no runs to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for run in runs:
        steps, means, stds = run["steps"], run["means"], run["stds"]
        (line,) = ax.plot(steps, means, label=run["label"])
        lo = [m - s for m, s in zip(means, stds)]
        hi = [m + s for m, s in zip(means, stds)]
        ax.fill_between(steps, lo, hi, alpha=0.2, color=line.get_color())
    if threshold is not None:
        ax.axhline(threshold, color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("environment steps (actor threads)")
    ax.set_ylabel("mean evaluation score")
    ax.set_title(runs[0]["env"])
    ax.legend()
    fig.tight_layout()
    svg = out_dir / "report.svg"
    fig.savefig(svg)
    plt.close(fig)

    lines = [f"env: {runs[0]['env']}"]
    if threshold is not None:
        lines.append(f"threshold: {threshold:.6g}")
    for run in runs:
        final = run["means"][-1]
        final_std = run["stds"][-1]
        lines.append(f"{run['label']}: final mean {final:.2f} +/- {final_std:.2f}")
        if threshold is not None:
            hit = steps_to_threshold(run["steps"], run["means"], threshold)
            lines.append(f"  steps to threshold: "
                         f"{hit if hit is not None else 'not reached'}")
    summary = out_dir / "summary.txt"
    summary.write_text("\n".join(lines) + "\n")
    return svg, summary
