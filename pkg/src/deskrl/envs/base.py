"""Env interface shared by the toy pixel games.

Frames are native 88x88 grayscale uint8 — no resizing or color
conversion anywhere in the pipeline. Each agent step repeats the chosen
action for four internal ticks and sums the rewards; the observation is
the frame after the last tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FRAME_SHAPE = (88, 88)
FRAME_SKIP = 4
STACK_DEPTH = 4


@dataclass(frozen=True)
class EnvSpec:
    id: str
    version: str
    actions: tuple[str, ...]
    max_episode_steps: int
    frame_shape: tuple[int, int] = FRAME_SHAPE
    frame_skip: int = FRAME_SKIP

    @property
    def n_actions(self) -> int:
        return len(self.actions)


@dataclass
class StepResult:
    frame: np.ndarray  # uint8 [88, 88]
    reward: float
    terminal: bool
    score: float


class Env:
    """Base class: subclasses implement _reset_state, _tick and _render."""

    spec: EnvSpec

    def __init__(self):
        self._terminal = True
        self._truncated = False
        self._steps = 0
        self._score = 0.0

    @property
    def terminal(self) -> bool:
        return self._terminal

    @property
    def truncated(self) -> bool:
        """True when the episode ended only because of the step cap."""
        return self._truncated

    @property
    def score(self) -> float:
        return self._score

    @property
    def steps(self) -> int:
        return self._steps

    def reset(self, seed: int) -> np.ndarray:
        self._terminal = False
        self._truncated = False
        self._steps = 0
        self._score = 0.0
        self._reset_state(int(seed))
        return self._render()

    def step(self, action: int) -> StepResult:
        if self._terminal:
            raise RuntimeError(f"{self.spec.id}: step() after terminal; reset() first")
        if not 0 <= action < self.spec.n_actions:
            raise ValueError(f"{self.spec.id}: action {action} out of range 0..{self.spec.n_actions - 1}")
        reward = 0.0
        for _ in range(self.spec.frame_skip):
            reward += self._tick(action)
            if self._terminal:
                break
        self._steps += 1
        self._score += reward
        if self._steps >= self.spec.max_episode_steps and not self._terminal:
            self._terminal = True
            self._truncated = True
        return StepResult(self._render(), reward, self._terminal, self._score)

    # subclass hooks
    def _reset_state(self, seed: int):
        raise NotImplementedError

    def _tick(self, action: int) -> float:
        raise NotImplementedError

    def _render(self) -> np.ndarray:
        raise NotImplementedError


def preprocess(frame: np.ndarray) -> np.ndarray:
    """uint8 [88,88] -> float32 in [0,1]."""
    if frame.shape != FRAME_SHAPE or frame.dtype != np.uint8:
        raise ValueError(f"expected uint8 {FRAME_SHAPE} frame, got {frame.dtype} {frame.shape}")
    return frame.astype(np.float32) / 255.0


class FrameStack:
    """Last four preprocessed frames; reset repeats the initial frame."""

    def __init__(self, first_frame: np.ndarray):
        f = preprocess(first_frame)
        self._buf = np.repeat(f[:, :, None], STACK_DEPTH, axis=2)

    def push(self, frame: np.ndarray):
        self._buf[:, :, :-1] = self._buf[:, :, 1:]
        self._buf[:, :, -1] = preprocess(frame)

    def stack(self) -> np.ndarray:
        """[88, 88, 4], oldest frame in channel 0."""
        return self._buf.copy()

    def __len__(self):
        return STACK_DEPTH


def stack_episode_frames(frames: np.ndarray, t: int) -> np.ndarray:
    """Rebuild the runtime frame stack for step t of a recorded episode.

    frames: uint8 [T, 88, 88]. Early steps pad by repeating frame 0, matching
    FrameStack's reset behavior.
    """
    idx = [max(0, t - k) for k in range(STACK_DEPTH - 1, -1, -1)]
    return np.stack([frames[i] for i in idx], axis=-1).astype(np.float32) / 255.0
