"""Toy pixel environments and frame preprocessing."""

from .base import (
    FRAME_SHAPE,
    FRAME_SKIP,
    STACK_DEPTH,
    Env,
    EnvSpec,
    FrameStack,
    StepResult,
    preprocess,
    stack_episode_frames,
)
from .minipacman import MiniPacman
from .minipong import MiniPong

_REGISTRY = {
    MiniPong.spec.id: MiniPong,
    MiniPacman.spec.id: MiniPacman,
}


def make_env(env_id: str) -> Env:
    try:
        return _REGISTRY[env_id]()
    except KeyError:
        raise ValueError(f"unknown env id {env_id!r}; known: {sorted(_REGISTRY)}") from None


def env_spec(env_id: str) -> EnvSpec:
    try:
        return _REGISTRY[env_id].spec
    except KeyError:
        raise ValueError(f"unknown env id {env_id!r}; known: {sorted(_REGISTRY)}") from None


__all__ = [
    "Env", "EnvSpec", "FrameStack", "StepResult", "MiniPong", "MiniPacman",
    "make_env", "env_spec", "preprocess", "stack_episode_frames",
    "FRAME_SHAPE", "FRAME_SKIP", "STACK_DEPTH",
]
