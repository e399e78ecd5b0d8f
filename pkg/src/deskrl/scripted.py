"""Scripted near-greedy players.

These stand in for human demonstrators in automated tests: competent but
deliberately imperfect (seeded mistakes), deterministic per seed, and
played through the same env API a human session uses.
"""

from __future__ import annotations

import random
from collections import deque

import numpy as np

from .demos import DemoArchive, DemoEpisode, new_archive, write_demo_archive
from .envs import make_env
from .envs.minipacman import _BONUS_TILE as BONUS_TILE
from .envs.minipacman import _PLAYER_START as _START
from .envs.minipacman import DIRS, GHOST_REGION, MiniPacman, _open
from .envs.minipong import PAD_H, MiniPong

PACMAN_MISTAKE = 0.2
PONG_MISTAKE = 0.1


def _bfs_move(start, targets, blocked):
    """First move of a shortest path from start to any target, or None.
    Target tiles are never treated as blocked."""
    blocked = set(blocked) - set(targets)
    first_move = {}
    q = deque([start])
    seen = {start}
    while q:
        r, c = q.popleft()
        if (r, c) in targets and (r, c) != start:
            return first_move[(r, c)]
        for a, (dr, dc) in DIRS.items():
            nr, nc = r + dr, c + dc
            if (nr, nc) in seen or not _open(nr, nc) or (nr, nc) in blocked:
                continue
            seen.add((nr, nc))
            first_move[(nr, nc)] = first_move.get((r, c), a)
            q.append((nr, nc))
    return None


def pacman_policy(env: MiniPacman, rng: random.Random,
                  mistake_rate: float = PACMAN_MISTAKE) -> int:
    """Sweep the (safe) dots around the guarded room, then collect the
    bonus through whichever entrance the guard is away from; the last dot
    waits until the bonus is taken. Seeded mistakes keep it non-expert."""
    if rng.random() < mistake_rate:
        return rng.randrange(4)
    pr, pc = env.player.tile()
    gtile = env.ghost.tile()
    near_ghost = {(gtile[0] + dr, gtile[1] + dc)
                  for dr in (-1, 0, 1) for dc in (-1, 0, 1)}

    go_bonus = env.bonus_alive and (len(env.dots) <= 1 or (pr, pc) in GHOST_REGION)
    if go_bonus:
        move = _bfs_move((pr, pc), {BONUS_TILE}, near_ghost)
        if move is not None:
            return move
        # guard in the way: retreat to the start area without touching the
        # remaining dot, then stall against a wall until a gap opens
        move = _bfs_move((pr, pc), {_START},
                         near_ghost | set(env.dots) | {BONUS_TILE})
        if move is not None:
            return move
        for a, (dr, dc) in DIRS.items():
            if not _open(pr + dr, pc + dc):
                return a  # press into a wall: stay put
        return 0

    targets = set(env.dots)
    if not targets:
        return 0
    # route dot sweeps around the guard's room
    blocked = set(GHOST_REGION) | {BONUS_TILE} | near_ghost
    move = _bfs_move((pr, pc), targets, blocked)
    if move is None:
        move = _bfs_move((pr, pc), targets, near_ghost)
    if move is None:
        move = _bfs_move((pr, pc), targets, set())
    return 0 if move is None else move


def pong_policy(env: MiniPong, rng: random.Random,
                mistake_rate: float = PONG_MISTAKE) -> int:
    """Track the ball with the paddle center, with seeded mistakes."""
    if rng.random() < mistake_rate:
        return rng.randrange(3)
    center = env.player_y + PAD_H // 2
    if env.ball_y < center - 2:
        return 1  # up
    if env.ball_y > center + 2:
        return 2  # down
    return 0


_POLICIES = {"minipacman": pacman_policy, "minipong": pong_policy}


def play_episode(env_id: str, seed: int, mistake_rate: float | None = None,
                 max_steps: int | None = None) -> DemoEpisode:
    env = make_env(env_id)
    policy = _POLICIES[env_id]
    rng = random.Random(seed ^ 0x5EED)
    frame = env.reset(seed)
    frames, actions, rewards = [], [], []
    kwargs = {} if mistake_rate is None else {"mistake_rate": mistake_rate}
    while not env.terminal:
        action = policy(env, rng, **kwargs)
        frames.append(frame.copy())
        result = env.step(action)
        actions.append(action)
        rewards.append(result.reward)
        frame = result.frame
        if max_steps is not None and len(actions) >= max_steps:
            break
    return DemoEpisode(
        frames=np.stack(frames),
        actions=np.asarray(actions, np.int64),
        rewards=np.asarray(rewards, np.float32),
        terminal=env.terminal and not env.truncated,
        seed=seed,
    )


def generate_fixture_archive(path, env_id: str, n_episodes: int,
                             base_seed: int = 1000) -> DemoArchive:
    """Deterministic demonstration fixture written by the scripted player."""
    archive = new_archive(make_env(env_id).spec)
    for i in range(n_episodes):
        archive.episodes.append(play_episode(env_id, base_seed + i))
    write_demo_archive(path, archive)
    return archive
