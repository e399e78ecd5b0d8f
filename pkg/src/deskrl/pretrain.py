"""Demonstration pre-training: the four modes and weight transfer.

Modes: sl (action cross-entropy), sl_v (advantage-weighted cross-entropy
plus return regression), sl_v_ae (adds input reconstruction), ae
(reconstruction only). The value head regresses transformed returns so
it lands in the same target space the downstream learner trains in.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .a3c import HTransform
from .demos import DemoArchive
from .envs import stack_episode_frames
from .nets import DECODER_BLOCKS, ENCODER_BLOCKS, NetConfig, PolicyValueNet
from .sil import Episode, compute_transformed_returns

log = logging.getLogger(__name__)

MODES = ("sl", "sl_v", "sl_v_ae", "ae")


class PretrainDivergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class PretrainConfig:
    mode: str = "sl_v_ae"
    w_s: float = 1.0
    w_v: float = 1.0
    w_ae: float = 1.0
    updates: int = 50_000
    batch: int = 32
    holdout_fraction: float = 0.2
    gamma: float = 0.99
    tb_epsilon: float = 1e-2
    eval_every: int = 1000
    optimizer: ad.OptimizerConfig = field(default_factory=ad.OptimizerConfig.pretrain_adam)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown pretrain mode {self.mode!r}; known: {MODES}")
        required = {"sl": ("w_s",), "sl_v": ("w_s", "w_v"),
                    "sl_v_ae": ("w_s", "w_v", "w_ae"), "ae": ("w_ae",)}[self.mode]
        for name in required:
            if getattr(self, name) <= 0:
                raise ValueError(f"mode {self.mode!r} requires {name} > 0")

    @property
    def has_sl(self):
        return self.mode in ("sl", "sl_v", "sl_v_ae")

    @property
    def has_v(self):
        return self.mode in ("sl_v", "sl_v_ae")

    @property
    def has_ae(self):
        return self.mode in ("sl_v_ae", "ae")


class DemoDataset:
    """Flattened (stack, human action, transformed return) samples.

    Stacks are materialized lazily from shared per-episode frame arrays;
    the first three steps of each episode pad by repeating frame 0.
    """

    def __init__(self, samples, n_actions: int):
        self.samples = samples  # (frames_ref, t, action, g)
        self.n_actions = n_actions

    def __len__(self):
        return len(self.samples)

    def _gather(self, idx):
        stacks = np.stack([stack_episode_frames(self.samples[i][0], self.samples[i][1])
                           for i in idx])
        actions = np.array([self.samples[i][2] for i in idx], np.int64)
        returns = np.array([self.samples[i][3] for i in idx])
        return stacks, actions, returns

    def sample_batch(self, batch: int, rng: np.random.Generator):
        return self._gather(rng.integers(0, len(self.samples), size=batch))

    def batches(self, batch: int):
        for lo in range(0, len(self.samples), batch):
            yield self._gather(range(lo, min(lo + batch, len(self.samples))))


def build_pretrain_dataset(archive: DemoArchive, gamma: float, epsilon: float,
                           holdout_fraction: float, seed: int
                           ) -> tuple[DemoDataset, DemoDataset]:
    """Per-episode split into (train, holdout); returns computed by the
    same backward recursion the self-imitation buffer uses."""
    if not archive.episodes:
        raise ValueError("archive holds no episodes")
    if not 0.0 <= holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in [0, 1)")
    transform = HTransform(epsilon)
    per_episode = []
    for demo in archive.episodes:
        ep = Episode(demo.frames, demo.actions, demo.rewards, demo.terminal)
        tep = compute_transformed_returns(ep, gamma, transform)
        per_episode.append([(tep.frames, t, int(tep.actions[t]), float(tep.returns[t]))
                            for t in range(len(tep))])

    order = np.random.default_rng(np.random.SeedSequence((seed, 0xDA7A))).permutation(
        len(per_episode))
    n_hold = int(round(holdout_fraction * len(per_episode)))
    n_hold = min(n_hold, len(per_episode) - 1)
    hold_ids = set(order[:n_hold].tolist())
    train, hold = [], []
    for i, samples in enumerate(per_episode):
        (hold if i in hold_ids else train).extend(samples)
    n_actions = len(archive.actions)
    return DemoDataset(train, n_actions), DemoDataset(hold, n_actions)


def joint_pretrain_loss(net: PolicyValueNet, params: dict[str, ad.Tensor],
                        batch, cfg: PretrainConfig, gate: np.ndarray | None = None):
    """Mode-selected sum of supervised, value-return and reconstruction
    terms (means over the batch). For sl_v and sl_v_ae the supervised
    term is weighted per sample by max(G - V, 0), detached; pass `gate`
    to pin that constant (the finite-difference oracle does)."""
    stacks, actions, returns = batch
    if cfg.has_ae and "dec_fc_w" not in params:
        raise ValueError(f"mode {cfg.mode!r} needs decoder blocks in the network")
    x = ad.Tensor(stacks)
    out = net.forward(params, x, decoder=cfg.has_ae)
    parts = {}
    loss = None

    if cfg.has_sl:
        ls = ad.log_softmax(out.logits)
        ce = -ad.gather_rows(ls, actions)
        if cfg.has_v:
            if gate is None:
                gate = np.maximum(returns - out.value.data, 0.0)
            sup = ad.tmean(ce * ad.Tensor(gate.astype(ce.data.dtype)))
        else:
            sup = ad.tmean(ce)
        parts["sl"] = float(sup.data)
        loss = cfg.w_s * sup

    if cfg.has_v:
        err = ad.Tensor(returns.astype(out.value.data.dtype)) - out.value
        vloss = ad.tmean(0.5 * ad.square(err))
        parts["v"] = float(vloss.data)
        loss = cfg.w_v * vloss if loss is None else loss + cfg.w_v * vloss

    if cfg.has_ae:
        recon = ad.tmean(ad.square(out.recon - x))
        parts["ae"] = float(recon.data)
        loss = cfg.w_ae * recon if loss is None else loss + cfg.w_ae * recon

    return loss, parts


def trained_blocks(mode: str, net_cfg: NetConfig) -> list[str]:
    groups = list(ENCODER_BLOCKS)
    if mode in ("sl", "sl_v", "sl_v_ae"):
        groups.append("fc2")
    if mode in ("sl_v", "sl_v_ae"):
        groups.append("fc3")
    if mode in ("sl_v_ae", "ae"):
        groups.extend(DECODER_BLOCKS)
    return [f"{g}_{suffix}" for g in groups for suffix in ("w", "b")]


def holdout_metrics(net: PolicyValueNet, blocks: dict[str, np.ndarray],
                    dataset: DemoDataset, cfg: PretrainConfig, batch: int = 128) -> dict:
    """Cross-entropy, action accuracy and (in ae modes) reconstruction MSE."""
    params = net.as_tensors(blocks, trainable=False)
    tot_ce = tot_acc = tot_mse = 0.0
    n = 0
    with ad.no_grad():
        for stacks, actions, returns in dataset.batches(batch):
            out = net.forward(params, ad.Tensor(stacks), decoder=cfg.has_ae)
            ls = ad.log_softmax(out.logits).data
            tot_ce += float(-ls[np.arange(len(actions)), actions].sum())
            tot_acc += float((ls.argmax(axis=1) == actions).sum())
            if cfg.has_ae:
                tot_mse += float(((out.recon.data - stacks) ** 2).mean() * len(actions))
            n += len(actions)
    metrics = {"ce": tot_ce / n, "accuracy": tot_acc / n}
    if cfg.has_ae:
        metrics["recon_mse"] = tot_mse / n
    return metrics


def run_pretraining(train: DemoDataset, holdout: DemoDataset, net_cfg: NetConfig,
                    cfg: PretrainConfig, seed: int):
    """Adam minibatch loop. Returns (blocks, trace); the trace holds one
    row per evaluation point (and the initial state)."""
    if len(train) == 0:
        raise ValueError("empty training dataset")
    if cfg.has_ae and not net_cfg.decoder:
        raise ValueError(f"mode {cfg.mode!r} needs NetConfig(decoder=True)")
    from .nets import make_store

    net = PolicyValueNet(net_cfg)
    store = make_store(net_cfg, seed)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x9E7)))
    train_names = set(trained_blocks(cfg.mode, net_cfg))
    trace = []

    def evaluate(update, loss_value):
        row = {"update": update, "train_loss": loss_value}
        if len(holdout):
            row.update({f"holdout_{k}": v
                        for k, v in holdout_metrics(net, store.snapshot(), holdout, cfg).items()})
        trace.append(row)
        log.info("pretrain %s update %d: %s", cfg.mode, update,
                 " ".join(f"{k}={v:.4f}" for k, v in row.items()
                          if k != "update" and v is not None))

    last_loss = None
    for update in range(cfg.updates):
        if update % cfg.eval_every == 0:
            evaluate(update, last_loss)
        batch = train.sample_batch(cfg.batch, rng)
        snapshot = store.snapshot()
        params = {n: ad.Tensor(v, requires_grad=n in train_names)
                  for n, v in snapshot.items()}
        loss, _ = joint_pretrain_loss(net, params, batch, cfg)
        last_loss = float(loss.data)
        if not np.isfinite(last_loss):
            raise PretrainDivergenceError(
                f"loss diverged at update {update}", trace)
        ad.backward(loss)
        grads = {n: g for n, g in ad.collect_grads(params).items() if n in train_names}
        ad.optimizer_step(store, grads, cfg.optimizer)
    evaluate(cfg.updates, last_loss)
    return store.snapshot(), trace


# ---------------------------------------------------------------------------
# transfer
# ---------------------------------------------------------------------------

@dataclass
class TransferManifest:
    policy: str  # full | no_fc
    blocks: list[str]


def transfer_blocks(policy: str) -> list[str]:
    groups = list(ENCODER_BLOCKS) + (["fc2", "fc3"] if policy == "full" else [])
    return [f"{g}_{s}" for g in groups for s in ("w", "b")]


def transfer_weights(ckpt_blocks: dict[str, np.ndarray], ckpt_meta: dict,
                     target: "ad.ParameterStore", policy: str) -> TransferManifest:
    """Copy pre-trained blocks into a freshly initialized store.

    full copies the trunk and both output heads; no_fc leaves fc2/fc3 at
    the target's own initialization. Decoder blocks never transfer.
    Reconstruction-only checkpoints cannot be transferred full (their
    heads were never trained).
    """
    if policy not in ("full", "no_fc"):
        raise ValueError(f"unknown transfer policy {policy!r}")
    mode = ckpt_meta.get("pretrain_mode")
    if policy == "full" and mode == "ae":
        raise ValueError("ae checkpoints train no output heads; use no_fc transfer")
    names = transfer_blocks(policy)
    for name in names:
        if name not in ckpt_blocks:
            raise ValueError(f"checkpoint lacks block {name!r}")
        if tuple(ckpt_blocks[name].shape) != tuple(target.shape(name)):
            raise ValueError(
                f"block {name!r}: checkpoint shape {ckpt_blocks[name].shape} "
                f"does not match target {target.shape(name)}")
    for name in names:
        target.set_block(name, ckpt_blocks[name].astype(ad.default_dtype()))
    return TransferManifest(policy=policy, blocks=names)


def save_pretrained(path, blocks: dict[str, np.ndarray], net_cfg: NetConfig,
                    cfg: PretrainConfig, env_id: str, extra: dict | None = None):
    meta = {
        "kind": "pretrained",
        "pretrain_mode": cfg.mode,
        "env_id": env_id,
        "trained_blocks": trained_blocks(cfg.mode, net_cfg),
        "net": {
            "n_actions": net_cfg.n_actions,
            "conv_filters": list(net_cfg.conv_filters),
            "conv_kernels": list(net_cfg.conv_kernels),
            "conv_strides": list(net_cfg.conv_strides),
            "fc1": net_cfg.fc1,
            "decoder": net_cfg.decoder,
        },
    }
    meta.update(extra or {})
    ad.save_checkpoint(path, blocks, meta=meta)
