"""Policy/value network and the mirrored reconstruction decoder.

Encoder trunk: three SAME-padded conv layers and one dense layer, then a
policy head (fc2) and a value head (fc3). The optional decoder mirrors
the trunk with transposed convolutions back to the 88x88x4 input, and
its weight arrays have exactly the shapes of the layers they mirror.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels


@dataclass(frozen=True)
class NetConfig:
    n_actions: int
    conv_filters: tuple[int, int, int] = (16, 32, 32)
    conv_kernels: tuple[int, int, int] = (8, 4, 3)
    conv_strides: tuple[int, int, int] = (4, 2, 1)
    fc1: int = 256
    in_shape: tuple[int, int, int] = (88, 88, 4)
    decoder: bool = False

    @property
    def conv_out_hw(self) -> tuple[int, int]:
        h, w = self.in_shape[0], self.in_shape[1]
        for s in self.conv_strides:
            h, w = kernels.same_out(h, s), kernels.same_out(w, s)
        return h, w

    @property
    def flat_dim(self) -> int:
        h, w = self.conv_out_hw
        return h * w * self.conv_filters[-1]


ENCODER_BLOCKS = ("conv1", "conv2", "conv3", "fc1")
HEAD_BLOCKS = ("fc2", "fc3")
DECODER_BLOCKS = ("dec_fc", "dec3", "dec2", "dec1")


def block_shapes(cfg: NetConfig) -> dict[str, tuple]:
    f1, f2, f3 = cfg.conv_filters
    k1, k2, k3 = cfg.conv_kernels
    cin = cfg.in_shape[2]
    shapes = {
        "conv1_w": (k1, k1, cin, f1), "conv1_b": (f1,),
        "conv2_w": (k2, k2, f1, f2), "conv2_b": (f2,),
        "conv3_w": (k3, k3, f2, f3), "conv3_b": (f3,),
        "fc1_w": (cfg.flat_dim, cfg.fc1), "fc1_b": (cfg.fc1,),
        "fc2_w": (cfg.fc1, cfg.n_actions), "fc2_b": (cfg.n_actions,),
        "fc3_w": (cfg.fc1, 1), "fc3_b": (1,),
    }
    if cfg.decoder:
        shapes.update({
            "dec_fc_w": (cfg.fc1, cfg.flat_dim), "dec_fc_b": (cfg.flat_dim,),
            "dec3_w": (k3, k3, f2, f3), "dec3_b": (f2,),
            "dec2_w": (k2, k2, f1, f2), "dec2_b": (f1,),
            "dec1_w": (k1, k1, cin, f1), "dec1_b": (cin,),
        })
    return shapes


def _fan_in(name: str, shape: tuple) -> int:
    if name.endswith("_b"):
        return 1
    if len(shape) == 4:
        if name.startswith("dec"):
            # transposed conv: input channels sit in the last axis
            return shape[0] * shape[1] * shape[3]
        return shape[0] * shape[1] * shape[2]
    return shape[0]


def init_params(cfg: NetConfig, seed: int) -> dict[str, np.ndarray]:
    """Fan-in-scaled uniform weights, zero biases, deterministic per seed."""
    dtype = ad.default_dtype()
    shapes = block_shapes(cfg)
    ss = np.random.SeedSequence(seed)
    children = ss.spawn(len(shapes))
    out = {}
    for (name, shape), child in zip(shapes.items(), children):
        if name.endswith("_b"):
            out[name] = np.zeros(shape, dtype=dtype)
        else:
            limit = 1.0 / np.sqrt(_fan_in(name, shape))
            rng = np.random.default_rng(child)
            out[name] = rng.uniform(-limit, limit, size=shape).astype(dtype)
    return out


def make_store(cfg: NetConfig, seed: int, strict: bool = False) -> ad.ParameterStore:
    store = ad.ParameterStore(strict=strict)
    for name, value in init_params(cfg, seed).items():
        store.add(name, value)
    return store


@dataclass
class Forward:
    logits: ad.Tensor  # [B, A]
    value: ad.Tensor   # [B]
    recon: ad.Tensor | None = None  # [B, 88, 88, 4]


class PolicyValueNet:
    def __init__(self, cfg: NetConfig):
        self.cfg = cfg

    def as_tensors(self, blocks: dict[str, np.ndarray], trainable=True) -> dict[str, ad.Tensor]:
        return {n: ad.Tensor(v, requires_grad=trainable) for n, v in blocks.items()}

    def forward(self, p: dict[str, ad.Tensor], x: ad.Tensor, decoder: bool = False) -> Forward:
        s1, s2, s3 = self.cfg.conv_strides
        h = ad.relu(ad.conv2d_same(x, p["conv1_w"], p["conv1_b"], s1))
        h = ad.relu(ad.conv2d_same(h, p["conv2_w"], p["conv2_b"], s2))
        h = ad.relu(ad.conv2d_same(h, p["conv3_w"], p["conv3_b"], s3))
        batch = h.shape[0]
        flat = ad.reshape(h, (batch, self.cfg.flat_dim))
        trunk = ad.relu(ad.dense(flat, p["fc1_w"], p["fc1_b"]))
        logits = ad.dense(trunk, p["fc2_w"], p["fc2_b"])
        value = ad.reshape(ad.dense(trunk, p["fc3_w"], p["fc3_b"]), (batch,))
        recon = None
        if decoder:
            if "dec_fc_w" not in p:
                raise ValueError("decoder requested but decoder blocks are absent")
            ch, cw = self.cfg.conv_out_hw
            d = ad.relu(ad.dense(trunk, p["dec_fc_w"], p["dec_fc_b"]))
            d = ad.reshape(d, (batch, ch, cw, self.cfg.conv_filters[2]))
            d = ad.relu(ad.conv2d_transpose_same(d, p["dec3_w"], p["dec3_b"], s3))
            d = ad.relu(ad.conv2d_transpose_same(d, p["dec2_w"], p["dec2_b"], s2))
            recon = ad.conv2d_transpose_same(d, p["dec1_w"], p["dec1_b"], s1)
        return Forward(logits, value, recon)

    def act(self, blocks: dict[str, np.ndarray], stack: np.ndarray) -> tuple[np.ndarray, float]:
        """Tape-free single-observation forward: (action probs, value)."""
        s1, s2, s3 = self.cfg.conv_strides
        x = stack[None].astype(blocks["conv1_w"].dtype, copy=False)
        h = np.maximum(kernels.conv2d_fwd(x, blocks["conv1_w"], blocks["conv1_b"], s1), 0)
        h = np.maximum(kernels.conv2d_fwd(h, blocks["conv2_w"], blocks["conv2_b"], s2), 0)
        h = np.maximum(kernels.conv2d_fwd(h, blocks["conv3_w"], blocks["conv3_b"], s3), 0)
        trunk = np.maximum(h.reshape(1, -1) @ blocks["fc1_w"] + blocks["fc1_b"], 0)
        logits = (trunk @ blocks["fc2_w"])[0] + blocks["fc2_b"]
        value = float((trunk @ blocks["fc3_w"])[0, 0] + blocks["fc3_b"][0])
        z = logits - logits.max()
        p = np.exp(z)
        p /= p.sum()
        return p, value
