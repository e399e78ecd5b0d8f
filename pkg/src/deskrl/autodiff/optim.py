"""RMSProp and Adam applied to a ParameterStore, with global-norm clipping.

Gradient clipping runs first when configured, then the L2 penalty is
added as a loss-gradient term, then the per-block update rule. A step
with any non-finite gradient is skipped (and logged) instead of
poisoning a long run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .. import kernels
from .params import ParameterStore

log = logging.getLogger(__name__)


@dataclass
class OptimizerConfig:
    kind: str = "rmsprop"  # rmsprop | adam
    learning_rate: float = 7e-4
    epsilon: float = 1e-5
    decay: float = 0.99
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    l2_weight: float = 0.0
    max_grad_norm: float | None = 0.5
    # accumulator namespace inside each block: callers with structurally
    # different gradients (e.g. the SIL-learner) can keep their own
    # running statistics instead of polluting the actors'
    state_scope: str = "default"

    def __post_init__(self):
        if self.kind not in ("rmsprop", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")

    @classmethod
    def a3c_rmsprop(cls, learning_rate=7e-4, epsilon=1e-5, decay=0.99,
                    momentum=0.0, max_grad_norm=0.5):
        return cls(kind="rmsprop", learning_rate=learning_rate, epsilon=epsilon,
                   decay=decay, momentum=momentum, max_grad_norm=max_grad_norm)

    @classmethod
    def pretrain_adam(cls, learning_rate=5e-4, epsilon=1e-5, beta1=0.9,
                      beta2=0.999, l2_weight=1e-5):
        return cls(kind="adam", learning_rate=learning_rate, epsilon=epsilon,
                   beta1=beta1, beta2=beta2, l2_weight=l2_weight,
                   max_grad_norm=None)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(kernels.sq_sum(g) for g in grads.values()))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float):
    """Scale all gradients by max_norm/norm when norm exceeds max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        grads = {n: g * scale for n, g in grads.items()}
    return grads, norm


def _rmsprop(value, state, g, scale, cfg):
    ms = state.get("ms")
    if ms is None:
        ms = state["ms"] = np.zeros_like(value)
    if cfg.momentum == 0:
        kernels.rmsprop_update(value, ms, g, scale, cfg.learning_rate,
                               cfg.decay, cfg.epsilon)
        return
    g = g * scale if scale != 1.0 else g
    ms *= cfg.decay
    ms += (1.0 - cfg.decay) * g * g
    mom = state.get("mom")
    if mom is None:
        mom = state["mom"] = np.zeros_like(value)
    mom *= cfg.momentum
    mom += cfg.learning_rate * g / np.sqrt(ms + cfg.epsilon)
    value -= mom


def _adam(value, state, g, scale, cfg):
    if "m" not in state:
        state["m"] = np.zeros_like(value)
        state["v"] = np.zeros_like(value)
        state["t"] = 0
    state["t"] += 1
    kernels.adam_update(value, state["m"], state["v"], g, scale,
                        cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon,
                        state["t"])


def optimizer_step(store: ParameterStore, grads: dict[str, np.ndarray],
                   cfg: OptimizerConfig) -> bool:
    """Apply one update. Returns False (and leaves the store untouched)
    when any gradient is non-finite."""
    for name, g in grads.items():
        if name not in store:
            raise KeyError(f"gradient for unknown block {name!r}")
        if g.shape != store.shape(name):
            raise ValueError(
                f"gradient shape {g.shape} does not match block {name!r} {store.shape(name)}"
            )
        if not np.all(np.isfinite(g)):
            log.warning("skipping update: non-finite gradient in block %r", name)
            return False

    scale = 1.0
    if cfg.max_grad_norm is not None:
        norm = global_norm(grads)
        if norm > cfg.max_grad_norm > 0:
            scale = cfg.max_grad_norm / norm

    rule = _rmsprop if cfg.kind == "rmsprop" else _adam
    for name, g in grads.items():
        def apply(value, state, g=g):
            scoped = state.setdefault(cfg.state_scope, {})
            s = scale
            if cfg.l2_weight > 0:
                # clip first, then add the penalty term's gradient
                g = g * s + cfg.l2_weight * value
                s = 1.0
            rule(value, scoped, g, s, cfg)

        store.update_block(name, apply)
    store.bump_version()
    return True
