"""Randomized gradient verification battery.

Checks the actor-critic loss, the self-imitation loss and all four
pre-training losses against central finite differences on small random
instances. Used by the `gradcheck` CLI command and the acceptance suite.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .a3c import RolloutSegment, TrainConfig, a3c_loss, compute_targets
from .nets import NetConfig, PolicyValueNet, init_params
from .pretrain import MODES, PretrainConfig, joint_pretrain_loss
from .sil import sil_loss

_NET = NetConfig(n_actions=3, conv_filters=(2, 3, 3), conv_kernels=(8, 4, 3),
                 conv_strides=(4, 2, 1), fc1=8, in_shape=(24, 24, 4), decoder=True)


def _params(rng):
    # jitter the zero biases so no relu rests exactly on its kink
    return {n: ad.Tensor(v + rng.normal(scale=0.02, size=v.shape), requires_grad=True)
            for n, v in init_params(_NET, int(rng.integers(1 << 30))).items()}


def a3c_builder(seed: int):
    def builder():
        net = PolicyValueNet(_NET)
        rng = np.random.default_rng(seed)
        params = _params(rng)
        n = int(rng.integers(2, 6))
        seg = RolloutSegment(
            stacks=rng.random((n, 24, 24, 4)), actions=rng.integers(0, 3, n),
            rewards=rng.uniform(-2, 2, n), bootstrap=float(rng.uniform(-1, 1)),
            episode_ended=False, values=np.zeros(n), log_probs=np.zeros(n))
        cfg = TrainConfig(k=1, reward_mode="raw_tb")
        targets = compute_targets(seg.rewards, seg.bootstrap, cfg.gamma,
                                  cfg.reward_mode, cfg.transform())
        values0 = net.forward(params, ad.Tensor(seg.stacks)).value.data
        adv = targets - values0

        def loss_fn():
            loss, _ = a3c_loss(net, params, seg, targets, cfg, advantages=adv)
            return loss

        return params, loss_fn

    return builder


def sil_builder(seed: int):
    def builder():
        net = PolicyValueNet(_NET)
        rng = np.random.default_rng(seed)
        params = _params(rng)
        n = int(rng.integers(2, 6))
        stacks = rng.random((n, 24, 24, 4))
        actions = rng.integers(0, 3, n)
        returns = rng.uniform(-1, 3, n)
        values0 = net.forward(params, ad.Tensor(stacks)).value.data
        gate = np.maximum(returns - values0, 0.0)

        def loss_fn():
            loss, _, _ = sil_loss(net, params, stacks, actions, returns, 0.5, gate=gate)
            return loss

        return params, loss_fn

    return builder


def pretrain_builder(mode: str, seed: int):
    def builder():
        net = PolicyValueNet(_NET)
        rng = np.random.default_rng(seed)
        params = _params(rng)
        cfg = PretrainConfig(mode=mode)
        n = int(rng.integers(2, 5))
        stacks = rng.random((n, 24, 24, 4))
        batch = (stacks, rng.integers(0, 3, n), rng.uniform(-1, 3, n))
        gate = None
        if cfg.has_v:
            values0 = net.forward(params, ad.Tensor(stacks)).value.data
            gate = np.maximum(batch[2] - values0, 0.0)

        def loss_fn():
            loss, _ = joint_pretrain_loss(net, params, batch, cfg, gate=gate)
            return loss

        return params, loss_fn

    return builder


def battery(seeds: int = 20):
    """Yields (loss name, seed, builder) over the whole battery."""
    for seed in range(seeds):
        yield "a3c", seed, a3c_builder(seed)
        yield "sil", seed, sil_builder(seed)
        for mode in MODES:
            yield f"pretrain[{mode}]", seed, pretrain_builder(mode, seed)


def run_battery(seeds: int = 20, tolerance: float = 1e-4, max_entries: int = 12,
                progress=None):
    """Run every check; returns (all_passed, results list)."""
    results = []
    ok = True
    for name, seed, builder in battery(seeds):
        report = ad.grad_check(builder, tolerance=tolerance, max_entries=max_entries,
                               seed=seed)
        results.append((name, seed, report))
        ok &= report.passed
        if progress is not None:
            progress(name, seed, report)
    return ok, results
