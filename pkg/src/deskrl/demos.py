"""On-disk demonstration archives.

Single file: one JSON manifest line (env identity, action names, and
per-episode step counts / scores / seeds / checksums), then fixed-size
binary records back to back. Each record is one step: 7744 frame bytes,
action byte, little-endian float32 reward, terminal byte.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .envs import EnvSpec, env_spec

MAGIC = "deskrl-demo-v1"
FRAME_BYTES = 88 * 88
RECORD_BYTES = FRAME_BYTES + 1 + 4 + 1
_STEP = struct.Struct("<BfB")


class DemoArchiveError(ValueError):
    pass


@dataclass
class DemoEpisode:
    frames: np.ndarray   # uint8 [T, 88, 88], pre-action frames
    actions: np.ndarray  # int64 [T]
    rewards: np.ndarray  # float32 [T]
    terminal: bool       # False when the player stopped before a terminal
    seed: int            # env seed used, for bit-exact replay

    def __post_init__(self):
        if not (len(self.frames) == len(self.actions) == len(self.rewards)):
            raise DemoArchiveError("episode arrays disagree in length")

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def score(self) -> float:
        return float(np.sum(self.rewards, dtype=np.float64))

    def record_bytes(self) -> bytes:
        out = bytearray()
        last = self.steps - 1
        for t in range(self.steps):
            out += self.frames[t].tobytes()
            out += _STEP.pack(int(self.actions[t]), float(self.rewards[t]),
                              1 if (self.terminal and t == last) else 0)
        return bytes(out)


@dataclass
class DemoArchive:
    env_id: str
    env_version: str
    actions: tuple[str, ...]
    episodes: list[DemoEpisode]

    @property
    def total_steps(self) -> int:
        return sum(ep.steps for ep in self.episodes)

    def scores(self) -> list[float]:
        return [ep.score for ep in self.episodes]


def _manifest(archive: DemoArchive, blobs: list[bytes]) -> dict:
    return {
        "magic": MAGIC,
        "env_id": archive.env_id,
        "env_version": archive.env_version,
        "frame_shape": [88, 88],
        "actions": list(archive.actions),
        "episodes": [
            {
                "steps": ep.steps,
                "score": ep.score,
                "seed": int(ep.seed),
                "terminal": bool(ep.terminal),
                "crc32": zlib.crc32(blob),
            }
            for ep, blob in zip(archive.episodes, blobs)
        ],
    }


def write_demo_archive(path, archive: DemoArchive):
    """Full atomic rewrite (manifest precedes the records)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blobs = [ep.record_bytes() for ep in archive.episodes]
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(json.dumps(_manifest(archive, blobs), sort_keys=True).encode() + b"\n")
        for blob in blobs:
            f.write(blob)
    os.replace(tmp, path)


def new_archive(spec: EnvSpec) -> DemoArchive:
    return DemoArchive(env_id=spec.id, env_version=spec.version,
                       actions=tuple(spec.actions), episodes=[])


def append_episode(path, spec: EnvSpec, episode: DemoEpisode) -> dict:
    """Append one episode (load-modify-rewrite) and return its manifest row."""
    path = Path(path)
    archive = load_demo_archive(path) if path.exists() else new_archive(spec)
    if archive.env_id != spec.id:
        raise DemoArchiveError(
            f"archive holds {archive.env_id!r} episodes, refusing {spec.id!r}")
    archive.episodes.append(episode)
    write_demo_archive(path, archive)
    return {"episodes": len(archive.episodes), "states": archive.total_steps,
            "score": episode.score}


def load_demo_archive(path) -> DemoArchive:
    path = Path(path)
    with open(path, "rb") as f:
        header = f.readline()
        try:
            manifest = json.loads(header)
        except json.JSONDecodeError as e:
            raise DemoArchiveError(f"{path}: bad manifest: {e}") from None
        if manifest.get("magic") != MAGIC:
            raise DemoArchiveError(f"{path}: not a demo archive")
        episodes = []
        for i, row in enumerate(manifest["episodes"]):
            steps = int(row["steps"])
            blob = f.read(steps * RECORD_BYTES)
            if len(blob) != steps * RECORD_BYTES:
                raise DemoArchiveError(
                    f"{path}: truncated inside episode {i}; "
                    f"last complete episode is {i - 1}")
            if zlib.crc32(blob) != row["crc32"]:
                raise DemoArchiveError(f"{path}: checksum mismatch in episode {i}")
            episodes.append(_decode_episode(blob, steps, row, i))
        if f.read(1):
            raise DemoArchiveError(f"{path}: trailing bytes after last episode")
    return DemoArchive(env_id=manifest["env_id"], env_version=manifest["env_version"],
                       actions=tuple(manifest["actions"]), episodes=episodes)


def _decode_episode(blob: bytes, steps: int, row: dict, index: int) -> DemoEpisode:
    frames = np.empty((steps, 88, 88), np.uint8)
    actions = np.empty(steps, np.int64)
    rewards = np.empty(steps, np.float32)
    terminal = False
    for t in range(steps):
        off = t * RECORD_BYTES
        frames[t] = np.frombuffer(blob, np.uint8, FRAME_BYTES, off).reshape(88, 88)
        a, r, term = _STEP.unpack_from(blob, off + FRAME_BYTES)
        actions[t] = a
        rewards[t] = r
        if term:
            if t != steps - 1:
                raise DemoArchiveError(f"episode {index}: terminal flag before last step")
            terminal = True
    ep = DemoEpisode(frames, actions, rewards, terminal=terminal, seed=int(row["seed"]))
    if ep.terminal != bool(row["terminal"]):
        raise DemoArchiveError(f"episode {index}: terminal flag disagrees with manifest")
    if ep.score != float(row["score"]):
        raise DemoArchiveError(
            f"episode {index}: manifest score {row['score']} != stored rewards {ep.score}")
    return ep


def replay_episode(archive: DemoArchive, index: int):
    """Re-step a fresh env with the recorded seed and actions.

    Returns (rewards, final_score). Raises when the env version moved on.
    """
    if not 0 <= index < len(archive.episodes):
        raise IndexError(f"episode {index} out of range 0..{len(archive.episodes) - 1}")
    spec = env_spec(archive.env_id)
    if spec.version != archive.env_version:
        raise DemoArchiveError(
            f"archive recorded {archive.env_version}, env is now {spec.version}")
    from .envs import make_env

    ep = archive.episodes[index]
    env = make_env(archive.env_id)
    env.reset(ep.seed)
    rewards = np.empty(ep.steps, np.float32)
    for t in range(ep.steps):
        result = env.step(int(ep.actions[t]))
        rewards[t] = result.reward
    return rewards, env.score
