"""Advantage actor-critic with asynchronous actor-learners.

Two reward regimes: `clipped` (rewards clipped to [-1,1], plain n-step
targets) and `raw_tb` (raw rewards, targets compressed through the
square-root value transform and built by the nested backward recursion
target_t = h(r_t + gamma * h_inv(target_{t+1}))).
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import envs
from .nets import PolicyValueNet

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# value transform
# ---------------------------------------------------------------------------

class Identity:
    """Bypass transform: h(z) = z. Makes transformed targets plain n-step."""

    def h(self, z):
        return np.asarray(z, dtype=np.float64)

    def h_inv(self, z):
        return np.asarray(z, dtype=np.float64)


@dataclass(frozen=True)
class HTransform:
    """h(z) = sign(z)(sqrt(|z|+1) - 1) + eps*z, and its closed-form inverse."""

    epsilon: float = 1e-2

    def h(self, z):
        z = np.asarray(z, dtype=np.float64)
        return np.sign(z) * (np.sqrt(np.abs(z) + 1.0) - 1.0) + self.epsilon * z

    def h_inv(self, z):
        z = np.asarray(z, dtype=np.float64)
        e = self.epsilon
        u = (np.sqrt(1.0 + 4.0 * e * (np.abs(z) + 1.0 + e)) - 1.0) / (2.0 * e)
        return np.sign(z) * (u * u - 1.0)


def h_transform(z: float, epsilon: float) -> float:
    return float(HTransform(epsilon).h(z))


def h_inverse(z: float, epsilon: float) -> float:
    return float(HTransform(epsilon).h_inv(z))


# ---------------------------------------------------------------------------
# rollouts and targets
# ---------------------------------------------------------------------------

@dataclass
class RolloutSegment:
    stacks: np.ndarray      # float32 [n, 88, 88, 4]
    actions: np.ndarray     # int64 [n]
    rewards: np.ndarray     # float64 [n], raw scale
    bootstrap: float        # V(s_{t+n}) in target space; 0 when the episode ended
    episode_ended: bool
    values: np.ndarray      # per-step V(s_t) from the rollout forward passes
    log_probs: np.ndarray   # per-step log pi(a_t|s_t)

    def __len__(self):
        return len(self.actions)


@dataclass
class TrainConfig:
    gamma: float = 0.99
    alpha: float = 0.5          # value-loss weight
    beta_a3c: float = 0.01      # entropy weight
    reward_mode: str = "clipped"  # clipped | raw_tb
    tb_epsilon: float = 1e-2
    t_max: int = 20
    k: int = 16
    T_max: int = 1_000_000
    # self-imitation
    sil: bool = False
    sil_batch: int = 32
    sil_updates_per_iter: int = 4  # M
    beta_sil: float = 0.5
    buffer_capacity: int = 1_000_000
    # pacing: the reference setup runs one SIL-learner beside 16 actors,
    # i.e. M updates per 16*t_max env steps. Free-running on a small k
    # multiplies SIL's relative weight several-fold, so the learner holds
    # this ratio regardless of k. None = unpaced.
    sil_updates_per_step: float | None = 4 / (16 * 20)
    # replay sampling: 0 = uniform; >0 draws proportionally to the stored
    # positive advantage raised to this exponent, refreshed when sampled
    sil_priority_alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.reward_mode not in ("clipped", "raw_tb"):
            raise ValueError(f"unknown reward_mode {self.reward_mode!r}")

    def transform(self):
        return HTransform(self.tb_epsilon) if self.reward_mode == "raw_tb" else Identity()


def compute_targets(rewards, bootstrap: float, gamma: float, reward_mode: str,
                    transform=None) -> np.ndarray:
    """Per-step targets for a rollout segment.

    clipped: rewards clipped to [-1,1], plain discounted n-step sum seeded
    with the bootstrap value. raw_tb: raw rewards through the nested
    transform recursion, seeded with the bootstrap already in transformed
    space.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.size == 0:
        raise ValueError("empty segment")
    targets = np.empty_like(rewards)
    nxt = float(bootstrap)
    if reward_mode == "clipped":
        r = np.clip(rewards, -1.0, 1.0)
        for t in range(len(r) - 1, -1, -1):
            nxt = r[t] + gamma * nxt
            targets[t] = nxt
    elif reward_mode == "raw_tb":
        tr = transform or HTransform()
        for t in range(len(rewards) - 1, -1, -1):
            nxt = float(tr.h(rewards[t] + gamma * tr.h_inv(nxt)))
            targets[t] = nxt
    else:
        raise ValueError(f"unknown reward_mode {reward_mode!r}")
    return targets


def a3c_loss(net: PolicyValueNet, params: dict[str, ad.Tensor],
             segment: RolloutSegment, targets: np.ndarray, cfg: TrainConfig,
             advantages: np.ndarray | None = None):
    """Policy loss with detached advantage and entropy bonus, plus
    alpha-weighted squared value error. The advantage is a constant by
    definition (no gradient flows through it); by default it is
    recomputed from the current value head, and the finite-difference
    oracle passes it explicitly. Returns (loss, diagnostics)."""
    out = net.forward(params, ad.Tensor(segment.stacks))
    ls = ad.log_softmax(out.logits)
    logp = ad.gather_rows(ls, segment.actions)
    if advantages is None:
        advantages = targets - out.value.data
    policy = -ad.tsum(logp * ad.Tensor(advantages.astype(ls.data.dtype)))
    p = ad.texp(ls)
    entropy = -ad.tsum(p * ls)
    value_err = ad.Tensor(targets.astype(out.value.data.dtype)) - out.value
    value = ad.tsum(ad.square(value_err))
    loss = policy - cfg.beta_a3c * entropy + cfg.alpha * value
    diags = {
        "policy": float(policy.data),
        "entropy": float(entropy.data),
        "value": float(value.data),
    }
    return loss, diags


# ---------------------------------------------------------------------------
# asynchronous training plumbing
# ---------------------------------------------------------------------------

class GlobalCounter:
    def __init__(self):
        self._value = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> int:
        with self._lock:
            self._value += n
            return self._value

    def read(self) -> int:
        with self._lock:
            return self._value


@dataclass
class ActorStats:
    episodes: int = 0
    steps: int = 0
    updates: int = 0
    skipped_updates: int = 0
    env_faults: int = 0
    scores: list = field(default_factory=list)


class EpisodeRecorder:
    """Collects one episode's pre-action frames, actions, raw rewards and
    the rollout's value estimates (used for replay priorities)."""

    def __init__(self, first_frame: np.ndarray):
        self.frames = [first_frame.copy()]
        self.actions: list[int] = []
        self.rewards: list[float] = []
        self.values: list[float] = []
        self.last_frame = first_frame

    def record(self, action: int, result: envs.StepResult, value: float = 0.0):
        self.actions.append(action)
        self.rewards.append(result.reward)
        self.values.append(value)
        self.last_frame = result.frame
        if not result.terminal:
            self.frames.append(result.frame.copy())

    def episode(self, terminal: bool = True):
        from .sil import Episode

        return Episode(
            frames=np.stack(self.frames),
            actions=np.asarray(self.actions, dtype=np.int64),
            rewards=np.asarray(self.rewards, dtype=np.float32),
            terminal=terminal,
        )


class ActorLearner:
    """One actor-learner: owns an env, reads/writes the shared store."""

    def __init__(self, actor_id: int, env_id: str, net: PolicyValueNet,
                 store: ad.ParameterStore, opt_cfg: ad.OptimizerConfig,
                 cfg: TrainConfig, counter: GlobalCounter, seed: int,
                 episode_queue=None, stop_event: threading.Event | None = None,
                 post_update_hook=None):
        self.actor_id = actor_id
        self.env = envs.make_env(env_id)
        self.net = net
        self.store = store
        self.opt_cfg = opt_cfg
        self.cfg = cfg
        self.counter = counter
        self.queue = episode_queue
        self.stop = stop_event or threading.Event()
        self.post_update_hook = post_update_hook
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, actor_id)))
        self.stats = ActorStats()
        self._base_seed = seed
        self._episode_index = 0
        self._recorder = None
        self._stack = None

    # -- episode lifecycle --------------------------------------------
    def _next_seed(self) -> int:
        self._episode_index += 1
        ss = np.random.SeedSequence((self._base_seed, self.actor_id, self._episode_index))
        return int(ss.generate_state(1)[0] % (2 ** 31))

    def _begin_episode(self):
        frame = self.env.reset(self._next_seed())
        self._stack = envs.FrameStack(frame)
        self._recorder = EpisodeRecorder(frame)

    def _sample_action(self, probs: np.ndarray) -> int:
        u = self.rng.random()
        acc = 0.0
        last = len(probs) - 1
        for a in range(last):
            acc += probs[a]
            if u < acc:
                return a
        return last

    def _finish_episode(self, snapshot):
        from .sil import compute_transformed_returns

        self.stats.episodes += 1
        self.stats.scores.append(self.env.score)
        if self.queue is not None:
            episode = self._recorder.episode(terminal=not self.env.truncated)
            bootstrap = 0.0
            if self.env.truncated:
                # cap-ended: seed the return recursion with the current
                # value estimate of the final observation
                final_stack = np.concatenate(
                    [self._stack.stack()[:, :, 1:],
                     envs.preprocess(self._recorder.last_frame)[:, :, None]], axis=-1)
                _, bootstrap = self.net.act(snapshot, final_stack)
            tep = compute_transformed_returns(
                episode, self.cfg.gamma, self.cfg.transform(), bootstrap=bootstrap,
                clip_rewards=self.cfg.reward_mode == "clipped",
                values=np.asarray(self._recorder.values))
            self.queue.put(tep)
        self._begin_episode()

    # -- main loop ------------------------------------------------------
    def run(self):
        try:
            self._begin_episode()
            while not self.stop.is_set() and self.counter.read() < self.cfg.T_max:
                self.step_segment()
        except Exception:
            log.exception("actor %d crashed", self.actor_id)
            raise

    def step_segment(self) -> int:
        """Collect up to t_max steps, apply one asynchronous update.
        Returns the number of environment steps consumed."""
        snapshot = self.store.snapshot()
        stacks, actions, rewards, values, logps = [], [], [], [], []
        episode_ended = False
        for _ in range(self.cfg.t_max):
            stack = self._stack.stack()
            probs, value = self.net.act(snapshot, stack)
            action = self._sample_action(probs)
            try:
                result = self.env.step(action)
            except Exception:
                # env fault: drop the episode, keep the loop alive
                log.exception("actor %d: env fault, episode discarded", self.actor_id)
                self.stats.env_faults += 1
                self._begin_episode()
                stacks = []
                break
            stacks.append(stack)
            actions.append(action)
            rewards.append(result.reward)
            values.append(value)
            logps.append(math.log(max(probs[action], 1e-12)))
            self._recorder.record(action, result, value)
            if result.terminal:
                episode_ended = True
                break
            self._stack.push(result.frame)

        n = len(stacks)
        if n == 0:
            return 0

        if episode_ended:
            bootstrap = 0.0
        else:
            # the value head already lives in target space (transformed for
            # raw_tb, clipped-return scale otherwise), so V seeds directly
            _, bootstrap = self.net.act(snapshot, self._stack.stack())
        segment = RolloutSegment(
            stacks=np.stack(stacks), actions=np.asarray(actions, dtype=np.int64),
            rewards=np.asarray(rewards, dtype=np.float64), bootstrap=float(bootstrap),
            episode_ended=episode_ended, values=np.asarray(values),
            log_probs=np.asarray(logps),
        )
        targets = compute_targets(segment.rewards, segment.bootstrap, self.cfg.gamma,
                                  self.cfg.reward_mode, self.cfg.transform())

        params = self.net.as_tensors(snapshot, trainable=True)
        loss, _ = a3c_loss(self.net, params, segment, targets, self.cfg)
        ad.backward(loss)
        grads = ad.collect_grads(params)
        if ad.optimizer_step(self.store, grads, self.opt_cfg):
            self.stats.updates += 1
        else:
            self.stats.skipped_updates += 1
        self.stats.steps += n
        self.counter.add(n)

        if episode_ended:
            self._finish_episode(snapshot)
        if self.post_update_hook is not None:
            self.post_update_hook(self)
        return n


def evaluate_policy(net: PolicyValueNet, blocks: dict[str, np.ndarray], env_id: str,
                    episodes: int, seed: int) -> tuple[float, list[float]]:
    """Frozen-policy evaluation; actions are sampled from pi; raw scores."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    env = envs.make_env(env_id)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE7A1)))
    scores = []
    for ep in range(episodes):
        frame = env.reset(seed * 1000 + ep)
        stack = envs.FrameStack(frame)
        while not env.terminal:
            probs, _ = net.act(blocks, stack.stack())
            u = rng.random()
            action = int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, len(probs) - 1))
            result = env.step(action)
            if not result.terminal:
                stack.push(result.frame)
        scores.append(env.score)
    return float(np.mean(scores)), scores
