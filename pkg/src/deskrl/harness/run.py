"""Experiment runner: per-seed pipeline and cross-seed aggregation.

Per seed: (optional) pre-train on the demo archive and transfer, seed
the self-imitation buffer (SIL variants with an archive), then run k
actor-learner threads (+1 SIL-learner) until the step budget, evaluating
the frozen policy on a fixed cadence. Strict mode (k=1) runs everything
inline on one thread so reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..a3c import ActorLearner, GlobalCounter, evaluate_policy
from ..demos import load_demo_archive
from ..envs import env_spec
from ..nets import PolicyValueNet, make_store
from ..pretrain import build_pretrain_dataset, run_pretraining, save_pretrained, transfer_weights
from ..sil import ReplayBuffer, SilLearner, make_episode_queue, seed_buffer_from_demos
from .config import ExperimentConfig
from .curves import LearningCurve, write_eval_csv, write_learning_curve_csv

log = logging.getLogger(__name__)


def _eval_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence((seed, 0xEA1, index))
    return int(ss.generate_state(1)[0] % (2 ** 31))


class SeedRun:
    def __init__(self, cfg: ExperimentConfig, seed: int, out_dir: Path):
        self.cfg = cfg
        self.seed = seed
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.eval_rows: list[tuple[int, list[float]]] = []
        self.sil_rows: list[tuple[int, int, int]] = []  # step, buffer, updates
        self.lines: list[str] = []

    def note(self, msg: str):
        log.info("[%s seed %d] %s", self.cfg.name, self.seed, msg)
        self.lines.append(msg)

    def run(self):
        cfg = self.cfg
        spec = env_spec(cfg.env_id)
        net_cfg = cfg.net_config(spec.n_actions)
        net = PolicyValueNet(net_cfg)
        store = make_store(net_cfg, self.seed, strict=cfg.strict)
        t0 = time.monotonic()

        archive = None
        if cfg.demo_archive:
            archive = load_demo_archive(cfg.demo_archive)

        if cfg.pretrain_mode:
            self._pretrain(store, archive, spec)

        train_cfg = cfg.train_config()
        counter = GlobalCounter()
        stop = threading.Event()
        queue = make_episode_queue() if train_cfg.sil else None
        buffer = ReplayBuffer(train_cfg.buffer_capacity) if train_cfg.sil else None
        sil_learner = None
        if train_cfg.sil:
            if archive is not None:
                n = seed_buffer_from_demos(
                    buffer, archive, cfg.gamma, train_cfg.transform(),
                    clip_rewards=train_cfg.reward_mode == "clipped")
                self.note(f"seeded SIL buffer with {n} demo transitions")
            sil_opt = cfg.rmsprop()
            sil_opt.state_scope = "sil"
            sil_learner = SilLearner(net, store, sil_opt, queue, buffer,
                                     train_cfg, seed=self.seed)
        threads = cfg.k + (1 if train_cfg.sil else 0)
        self.note(f"threads: {cfg.k} actors" +
                  (" + 1 SIL-learner" if train_cfg.sil else "") + f" = {threads}")

        boundaries = list(range(cfg.eval_every, cfg.T_max + 1, cfg.eval_every))
        if not boundaries or boundaries[-1] != cfg.T_max:
            boundaries.append(cfg.T_max)

        def run_eval(at_step: int):
            blocks = store.snapshot()
            mean, scores = evaluate_policy(net, blocks, cfg.env_id, cfg.eval_episodes,
                                           _eval_seed(self.seed, len(self.eval_rows)))
            self.eval_rows.append((at_step, scores))
            if buffer is not None:
                self.sil_rows.append((at_step, len(buffer),
                                      sil_learner.updates if sil_learner else 0))
            self.note(f"eval @ {at_step}: mean {mean:.2f}")

        run_eval(0)
        actors = [
            ActorLearner(i, cfg.env_id, net, store, cfg.rmsprop(), train_cfg,
                         counter, seed=self.seed, episode_queue=queue, stop_event=stop)
            for i in range(cfg.k)
        ]

        if cfg.strict:
            self._run_strict(actors[0], sil_learner, counter, boundaries, run_eval)
        else:
            self._run_async(actors, sil_learner, counter, stop, boundaries, run_eval)

        self.note(f"trained {counter.read()} env steps in {time.monotonic() - t0:.1f}s")
        if sil_learner is not None:
            self.note(f"SIL updates: {sil_learner.updates}, episodes drained: "
                      f"{sil_learner.episodes_in}, buffer: {len(buffer)}")

        write_eval_csv(self.dir / "eval.csv", self.eval_rows, cfg.eval_episodes)
        if self.sil_rows:
            header = "step,buffer,sil_updates\n"
            body = "".join(f"{s},{b},{u}\n" for s, b, u in self.sil_rows)
            (self.dir / "sil.csv").write_text(header + body)
        ad.save_checkpoint(self.dir / "final.ckpt", store,
                           meta={"kind": "final", "env_id": cfg.env_id,
                                 "variant": cfg.variant, "seed": self.seed})
        (self.dir / "log.txt").write_text("\n".join(self.lines) + "\n")
        return self

    # -- phases ---------------------------------------------------------
    def _pretrain(self, store, archive, spec):
        cfg = self.cfg
        pre_cfg = cfg.pretrain_config()
        pnet_cfg = cfg.net_config(spec.n_actions, decoder=pre_cfg.has_ae)
        train, hold = build_pretrain_dataset(
            archive, cfg.gamma, cfg.tb_epsilon, cfg.holdout_fraction, self.seed)
        self.note(f"pretrain {pre_cfg.mode}: {len(train)} train / {len(hold)} holdout samples")
        t0 = time.monotonic()
        blocks, trace = run_pretraining(train, hold, pnet_cfg, pre_cfg, self.seed)
        self.note(f"pretrain done in {time.monotonic() - t0:.1f}s; "
                  f"last: {trace[-1]}")
        ckpt = self.dir / "pretrained.ckpt"
        save_pretrained(ckpt, blocks, pnet_cfg, pre_cfg, cfg.env_id)
        manifest = transfer_weights(blocks, {"pretrain_mode": pre_cfg.mode},
                                    store, cfg.transfer)
        self.note(f"transferred {cfg.transfer}: {len(manifest.blocks)} blocks")
        (self.dir / "pretrain_trace.json").write_text(json.dumps(trace, indent=1))

    def _run_strict(self, actor, sil_learner, counter, boundaries, run_eval):
        pending = list(boundaries)

        def hook(_actor):
            if sil_learner is not None:
                sil_learner.step(counter)
            while pending and counter.read() >= pending[0]:
                run_eval(pending.pop(0))

        actor.post_update_hook = hook
        actor.run()
        while pending:
            run_eval(pending.pop(0))

    def _run_async(self, actors, sil_learner, counter, stop, boundaries, run_eval):
        cfg = self.cfg
        threads = [threading.Thread(target=a.run, name=f"actor-{a.actor_id}", daemon=True)
                   for a in actors]
        if sil_learner is not None:
            threads.append(threading.Thread(
                target=sil_learner.run, args=(counter, stop), name="sil", daemon=True))
        for t in threads:
            t.start()
        pending = list(boundaries)
        while counter.read() < cfg.T_max and any(t.is_alive() for t in threads):
            while pending and counter.read() >= pending[0]:
                run_eval(pending.pop(0))
            time.sleep(0.02)
        stop.set()
        for t in threads:
            t.join(timeout=60)
        while pending:
            run_eval(pending.pop(0))


def run_experiment(cfg: ExperimentConfig, run_root=None) -> Path:
    """Run every seed sequentially; write the resolved config, per-seed
    artifacts and the aggregate learning curve. Returns the run directory."""
    import os

    root = Path(run_root or os.environ.get("DESKRL_RUNS", "runs"))
    run_dir = root / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    if cfg.demo_archive and not Path(cfg.demo_archive).exists():
        raise FileNotFoundError(f"demo archive {cfg.demo_archive} is missing")
    if cfg.pretrain_mode and not cfg.demo_archive:
        raise ValueError("pretraining requires a demo archive")
    cfg.save(run_dir / "config.json")

    curve = LearningCurve(seeds=list(cfg.seeds))
    for seed in cfg.seeds:
        result = SeedRun(cfg, seed, run_dir / f"seed{seed}").run()
        steps = [s for s, _ in result.eval_rows]
        means = [float(np.mean(scores)) for _, scores in result.eval_rows]
        curve.add_seed_curve(seed, steps, means)
    write_learning_curve_csv(curve, run_dir / "curve.csv")
    log.info("experiment %s complete -> %s", cfg.name, run_dir)
    return run_dir
