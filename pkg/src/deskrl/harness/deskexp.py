"""The desk-scale directional experiment (speedup study).

Three arms on the pacman-like game, shared seeds and step budget:
scratch clipped actor-critic, scratch transformed-Bellman + self-
imitation, and demonstration-pretrained (joint supervised/value/
reconstruction) with full transfer feeding the same TB+SIL trainer.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..fixtures import ensure_fixture, threshold
from .config import ExperimentConfig
from .curves import read_learning_curve_csv, steps_to_threshold
from .report import emit_report
from .run import run_experiment

ENV = "minipacman"
SEEDS = [1, 2, 3, 4, 5]
T_MAX = 130_000
EVAL_EVERY = 26_000
PRETRAIN_UPDATES = 4000


def arm_configs(archive: str, seeds=None, t_max=T_MAX, eval_every=EVAL_EVERY,
                k: int = 2, pretrain_updates: int = PRETRAIN_UPDATES):
    seeds = list(seeds or SEEDS)
    common = dict(env_id=ENV, seeds=seeds, k=k, T_max=t_max, eval_every=eval_every,
                  eval_episodes=10)
    return {
        "scratch_a3c": ExperimentConfig(name="scratch_a3c", variant="a3c", **common),
        "scratch_a3ctb_sil": ExperimentConfig(
            name="scratch_a3ctb_sil", variant="a3ctb_sil", **common),
        "pretrained_sl_v_ae_full": ExperimentConfig(
            name="pretrained_sl_v_ae_full", variant="a3ctb_sil",
            pretrain_mode="sl_v_ae", transfer="full", demo_archive=str(archive),
            pretrain_updates=pretrain_updates, **common),
    }


@dataclass
class DeskResult:
    run_dirs: dict
    finals: dict            # arm -> final mean over seeds
    step0: dict             # arm -> step-0 mean over seeds
    hits: dict              # arm -> per-seed steps-to-threshold (None = not reached)
    threshold: float

    def faster_seeds(self, fast_arm: str, slow_arm: str) -> int:
        """Seeds where fast_arm crossed the threshold strictly earlier."""
        wins = 0
        for fast, slow in zip(self.hits[fast_arm], self.hits[slow_arm]):
            if fast is not None and (slow is None or fast < slow):
                wins += 1
        return wins


def run_desk_experiment(run_root, fixtures_root=None, seeds=None, t_max=T_MAX,
                        eval_every=EVAL_EVERY, k: int = 2,
                        pretrain_updates: int = PRETRAIN_UPDATES) -> DeskResult:
    archive = ensure_fixture(ENV, fixtures_root)
    configs = arm_configs(archive, seeds, t_max, eval_every, k, pretrain_updates)
    run_dirs = {}
    for name, cfg in configs.items():
        run_dirs[name] = run_experiment(cfg, run_root)

    thr = threshold(ENV)
    finals, step0, hits = {}, {}, {}
    for name, run_dir in run_dirs.items():
        header, rows = read_learning_curve_csv(Path(run_dir) / "curve.csv")
        steps = [int(r[0]) for r in rows]
        finals[name] = rows[-1][1]
        step0[name] = rows[0][1]
        per_seed = []
        for col in range(3, len(header)):
            per_seed.append(steps_to_threshold(steps, [r[col] for r in rows], thr))
        hits[name] = per_seed
    emit_report(list(run_dirs.values()), Path(run_root) / "report", threshold=thr)
    return DeskResult(run_dirs, finals, step0, hits, thr)
