"""Self-imitation learning: replay buffer, episode queue, SIL-learner.

Actor-learners push finished episodes (with transformed returns already
attached) through a bounded queue; the single SIL-learner thread owns
the replay buffer, performs M minibatch updates per iteration against
the shared parameters, then drains the queue into the buffer. Samples
only contribute when their stored return exceeds the current value
estimate — the max(.,0) gate.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .envs import stack_episode_frames

log = logging.getLogger(__name__)


@dataclass
class Episode:
    """Recorded trajectory: pre-action frames, actions, raw rewards."""

    frames: np.ndarray   # uint8 [T, 88, 88]
    actions: np.ndarray  # int64 [T]
    rewards: np.ndarray  # float32 [T]
    terminal: bool       # False when the step cap ended the episode

    def __len__(self):
        return len(self.actions)


@dataclass
class TransformedEpisode:
    frames: np.ndarray
    actions: np.ndarray
    returns: np.ndarray  # float64 [T], transformed-space G_t
    values: np.ndarray | None = None  # V(s_t) at recording time, for priorities

    def __len__(self):
        return len(self.actions)


def compute_transformed_returns(episode: Episode, gamma: float, transform,
                                bootstrap: float = 0.0, clip_rewards: bool = False,
                                values: np.ndarray | None = None) -> TransformedEpisode:
    """Backward recursion G_t = h(r_t + gamma * h_inv(G_{t+1})).

    `bootstrap` (transformed space) seeds the recursion past the last step;
    it stays 0 for terminal episodes. Cap-ended episodes pass the current
    value estimate of the final observation.
    """
    if len(episode) == 0:
        raise ValueError("empty episode")
    rewards = np.asarray(episode.rewards, dtype=np.float64)
    if clip_rewards:
        rewards = np.clip(rewards, -1.0, 1.0)
    returns = np.empty_like(rewards)
    nxt = float(bootstrap)
    for t in range(len(rewards) - 1, -1, -1):
        nxt = float(transform.h(rewards[t] + gamma * transform.h_inv(nxt)))
        returns[t] = nxt
    return TransformedEpisode(episode.frames, episode.actions, returns, values)


@dataclass
class Transition:
    frames: np.ndarray  # shared per-episode frame array
    t: int
    action: int
    g: float
    priority: float = 1.0

    def stack(self) -> np.ndarray:
        return stack_episode_frames(self.frames, self.t)


PRIORITY_FLOOR = 1e-3


def transitions(tep: TransformedEpisode):
    for t in range(len(tep)):
        g = float(tep.returns[t])
        if tep.values is not None:
            prio = max(g - float(tep.values[t]), PRIORITY_FLOOR)
        else:
            prio = max(g, PRIORITY_FLOOR)
        yield Transition(tep.frames, t, int(tep.actions[t]), g, prio)


class ReplayBuffer:
    """FIFO ring over transitions; oldest evicted at capacity.

    Sampling is uniform by default. With alpha > 0 it draws proportionally
    to stored priority^alpha (positive-advantage prioritization), and the
    learner refreshes priorities of sampled slots as values catch up.
    """

    def __init__(self, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items = [None] * capacity
        self._prio = np.zeros(capacity)
        self._head = 0  # next write slot
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, item, priority: float = 1.0):
        self._items[self._head] = item
        self._prio[self._head] = priority
        self._head = (self._head + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def extend(self, items):
        n = 0
        for item in items:
            prio = getattr(item, "priority", 1.0)
            self.push(item, prio)
            n += 1
        return n

    def sample(self, n: int, rng: np.random.Generator, alpha: float = 0.0):
        """Returns (items, slot indices). alpha=0 is uniform."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        if alpha <= 0:
            idx = rng.integers(0, self._size, size=n)
        else:
            weights = self._prio[:self._size] ** alpha
            total = weights.sum()
            if total <= 0:
                idx = rng.integers(0, self._size, size=n)
            else:
                u = rng.random(n) * total
                idx = np.searchsorted(np.cumsum(weights), u).clip(0, self._size - 1)
        if self._size == self.capacity:
            idx = (self._head + idx) % self.capacity
        return [self._items[i] for i in idx], idx

    def set_priorities(self, idx, priorities):
        self._prio[idx] = priorities

    def oldest(self):
        if self._size == 0:
            raise ValueError("empty buffer")
        if self._size < self.capacity:
            return self._items[0]
        return self._items[self._head]


def make_episode_queue(maxsize: int = 1024) -> "queue.Queue[TransformedEpisode]":
    return queue.Queue(maxsize=maxsize)


def sil_loss(net, params: dict[str, ad.Tensor], stacks: np.ndarray,
             actions: np.ndarray, returns: np.ndarray, beta_sil: float,
             gate: np.ndarray | None = None):
    """Gated off-policy actor-critic loss over one minibatch.

    policy: -sum log pi(a|s) * max(G - V, 0), advantage detached;
    value: 0.5 * sum max(G - V, 0)^2. Samples with G <= V contribute
    exactly zero to both terms. The policy weight is a constant, by
    default recomputed from the current value head; passing `gate`
    makes that constant explicit (the finite-difference oracle does).
    """
    out = net.forward(params, ad.Tensor(stacks))
    g = ad.Tensor(np.asarray(returns, dtype=out.value.data.dtype))
    gap = g - out.value
    if gate is None:
        gate = np.maximum(gap.data, 0.0)  # detached policy weight
    ls = ad.log_softmax(out.logits)
    logp = ad.gather_rows(ls, np.asarray(actions, dtype=np.int64))
    policy = -ad.tsum(logp * ad.Tensor(gate.astype(ls.data.dtype)))
    value = 0.5 * ad.tsum(ad.square(ad.relu(gap)))
    loss = policy + beta_sil * value
    return loss, int((gate > 0).sum()), np.asarray(gate, dtype=np.float64)


class SilLearner:
    """Asynchronous learner of Algorithm-style SIL iterations.

    Each iteration: sync a parameter snapshot, run M minibatch updates
    (skipped while the buffer holds fewer than one batch), then drain
    every queued episode into the buffer. Owns no environment.
    """

    def __init__(self, net, store: ad.ParameterStore, opt_cfg: ad.OptimizerConfig,
                 episode_queue, buffer: ReplayBuffer, cfg, seed: int = 0,
                 update_fn=None):
        self.net = net
        self.store = store
        self.opt_cfg = opt_cfg
        self.queue = episode_queue
        self.buffer = buffer
        self.cfg = cfg
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 0x51C)))
        self.update_fn = update_fn  # test hook replacing the real update
        self.updates = 0
        self.skipped = 0
        self.episodes_in = 0
        self.positive_samples = 0

    def iteration(self):
        snapshot = self.store.snapshot()
        alpha = getattr(self.cfg, "sil_priority_alpha", 0.0)
        for _ in range(self.cfg.sil_updates_per_iter):
            if len(self.buffer) < self.cfg.sil_batch:
                self.skipped += 1
                continue
            batch, slots = self.buffer.sample(self.cfg.sil_batch, self.rng, alpha)
            if self.update_fn is not None:
                self.update_fn(batch)
                self.updates += 1
                continue
            stacks = np.stack([tr.stack() for tr in batch])
            actions = np.array([tr.action for tr in batch], dtype=np.int64)
            returns = np.array([tr.g for tr in batch])
            params = self.net.as_tensors(snapshot, trainable=True)
            loss, npos, gate = sil_loss(self.net, params, stacks, actions, returns,
                                        self.cfg.beta_sil)
            self.positive_samples += npos
            self.buffer.set_priorities(slots, np.maximum(gate, PRIORITY_FLOOR))
            ad.backward(loss)
            grads = ad.collect_grads(params)
            if ad.optimizer_step(self.store, grads, self.opt_cfg):
                self.updates += 1
        self.drain()

    def drain(self):
        while True:
            try:
                tep = self.queue.get_nowait()
            except queue.Empty:
                return
            self.buffer.extend(transitions(tep))
            self.episodes_in += 1

    def step(self, counter):
        """Run as many iterations as the pacing ratio allows right now."""
        ratio = self.cfg.sil_updates_per_step
        if ratio is None:
            self.iteration()
            return
        while self.updates < counter.read() * ratio:
            before = self.updates
            self.iteration()
            if self.updates == before:
                break
        self.drain()

    def run(self, counter, stop_event: threading.Event):
        while not stop_event.is_set() and counter.read() < self.cfg.T_max:
            before = self.updates
            self.step(counter)
            if self.updates == before:
                time.sleep(0.002)


def seed_buffer_from_demos(buffer: ReplayBuffer, archive, gamma: float, transform,
                           clip_rewards: bool = False) -> int:
    """Convert every archived episode to transformed-return transitions and
    insert them. Returns the number of transitions inserted."""
    total = 0
    for i, demo in enumerate(archive.episodes):
        episode = Episode(frames=demo.frames, actions=demo.actions,
                          rewards=demo.rewards, terminal=demo.terminal)
        try:
            tep = compute_transformed_returns(episode, gamma, transform,
                                              clip_rewards=clip_rewards)
        except ValueError as e:
            raise ValueError(f"demo episode {i}: {e}") from None
        total += buffer.extend(transitions(tep))
    return total
