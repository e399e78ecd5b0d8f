"""Learning-curve bookkeeping and CSV output (6 significant digits)."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _fmt(x: float) -> str:
    return f"{x:.6g}"


@dataclass
class LearningCurve:
    """Aggregate over seeds: one row per evaluation step."""

    seeds: list[int]
    steps: list[int] = field(default_factory=list)
    by_seed: dict[int, list[float]] = field(default_factory=dict)

    def add_seed_curve(self, seed: int, steps: list[int], means: list[float]):
        if self.steps and steps != self.steps:
            raise ValueError(f"seed {seed}: eval steps {steps} do not match {self.steps}")
        self.steps = list(steps)
        self.by_seed[seed] = list(means)

    def row(self, i: int) -> tuple[int, float, float, list[float]]:
        vals = [self.by_seed[s][i] for s in self.seeds]
        return self.steps[i], float(np.mean(vals)), float(np.std(vals)), vals

    def rows(self):
        return [self.row(i) for i in range(len(self.steps))]


def write_learning_curve_csv(curve: LearningCurve, path):
    if not curve.steps:
        raise ValueError("empty curve")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["step", "mean", "std"] + [f"seed{s}" for s in curve.seeds]
    lines = [",".join(header)]
    for step, _, _, vals in curve.rows():
        # aggregate over the values as written, so the file is self-consistent
        rounded = [float(_fmt(v)) for v in vals]
        lines.append(",".join(
            [str(step), _fmt(float(np.mean(rounded))), _fmt(float(np.std(rounded)))]
            + [_fmt(v) for v in rounded]))
    path.write_text("\n".join(lines) + "\n")


def read_learning_curve_csv(path) -> tuple[list[str], list[list[float]]]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return header, rows


def write_eval_csv(path, rows, episodes: int):
    """Per-seed evaluation log: step, mean, std, then per-episode scores."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["step", "mean", "std"] + [f"ep{i}" for i in range(episodes)]
    lines = [",".join(header)]
    for step, scores in rows:
        scores = list(scores)
        lines.append(",".join(
            [str(step), _fmt(float(np.mean(scores))), _fmt(float(np.std(scores)))]
            + [_fmt(s) for s in scores]))
    path.write_text("\n".join(lines) + "\n")


def steps_to_threshold(steps: list[int], means: list[float], threshold: float):
    """First evaluation step whose mean reaches the threshold, else None."""
    for step, mean in zip(steps, means):
        if mean >= threshold:
            return step
    return None
