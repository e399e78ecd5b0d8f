"""Shared trainable parameters.

A ParameterStore maps block names to numpy arrays. Readers take per-block
consistent snapshots; writers apply updates atomically per block. Torn
reads ACROSS blocks are allowed by design — that is the asynchronous
update model the actor-learners rely on. Strict mode serializes all
access behind one lock for deterministic single-threaded tests.
"""

from __future__ import annotations

import threading

import numpy as np


class _Block:
    __slots__ = ("value", "lock", "opt_state")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.lock = threading.Lock()
        self.opt_state: dict = {}


class ParameterStore:
    def __init__(self, strict: bool = False):
        self._blocks: dict[str, _Block] = {}
        self._strict = strict
        self._global_lock = threading.RLock()
        self._version = 0
        self._version_lock = threading.Lock()

    # construction -----------------------------------------------------
    def add(self, name: str, value: np.ndarray):
        if name in self._blocks:
            raise ValueError(f"duplicate parameter block {name!r}")
        self._blocks[name] = _Block(np.array(value, copy=True))

    def names(self) -> list[str]:
        return list(self._blocks)

    def __contains__(self, name):
        return name in self._blocks

    def shape(self, name: str):
        return self._blocks[name].value.shape

    @property
    def strict(self) -> bool:
        return self._strict

    @property
    def version(self) -> int:
        return self._version

    def bump_version(self):
        with self._version_lock:
            self._version += 1

    # access -----------------------------------------------------------
    def read(self, name: str) -> np.ndarray:
        blk = self._blocks[name]
        with blk.lock:
            return blk.value.copy()

    def snapshot(self) -> dict[str, np.ndarray]:
        """Copy every block. Per-block consistent; cross-block tearing allowed."""
        if self._strict:
            with self._global_lock:
                return {n: b.value.copy() for n, b in self._blocks.items()}
        return {n: self.read(n) for n in self._blocks}

    def set_block(self, name: str, value: np.ndarray):
        blk = self._blocks[name]
        if blk.value.shape != value.shape:
            raise ValueError(
                f"block {name!r}: shape {value.shape} does not match {blk.value.shape}"
            )
        with blk.lock:
            blk.value[...] = value

    def load(self, values: dict[str, np.ndarray]):
        for name, v in values.items():
            self.set_block(name, v)

    def update_block(self, name: str, fn):
        """Apply fn(value, opt_state) in place under the block lock."""
        blk = self._blocks[name]
        if self._strict:
            with self._global_lock:
                fn(blk.value, blk.opt_state)
        else:
            with blk.lock:
                fn(blk.value, blk.opt_state)

    def locked(self):
        """Global lock context (strict-mode update batching)."""
        return self._global_lock
