import json

import numpy as np
import pytest

from deskrl.demos import (
    DemoArchive,
    DemoArchiveError,
    DemoEpisode,
    append_episode,
    load_demo_archive,
    new_archive,
    replay_episode,
    write_demo_archive,
)
from deskrl.envs import env_spec
from deskrl.scripted import play_episode


def _synthetic_episode(steps=5, seed=3, terminal=True):
    rng = np.random.default_rng(seed)
    return DemoEpisode(
        frames=rng.integers(0, 256, (steps, 88, 88)).astype(np.uint8),
        actions=rng.integers(0, 4, steps).astype(np.int64),
        rewards=(rng.integers(0, 2, steps) * 10.0).astype(np.float32),
        terminal=terminal,
        seed=seed,
    )


def _write(tmp_path, episodes, env="minipacman"):
    archive = new_archive(env_spec(env))
    archive.episodes.extend(episodes)
    path = tmp_path / "demo.demo"
    write_demo_archive(path, archive)
    return path


def test_roundtrip_bit_exact(tmp_path):
    eps = [_synthetic_episode(5, 1), _synthetic_episode(9, 2, terminal=False)]
    path = _write(tmp_path, eps)
    loaded = load_demo_archive(path)
    assert loaded.env_id == "minipacman"
    assert len(loaded.episodes) == 2
    for orig, got in zip(eps, loaded.episodes):
        np.testing.assert_array_equal(orig.frames, got.frames)
        np.testing.assert_array_equal(orig.actions, got.actions)
        np.testing.assert_array_equal(orig.rewards, got.rewards)
        assert orig.terminal == got.terminal
        assert orig.seed == got.seed


def test_empty_archive_valid(tmp_path):
    path = _write(tmp_path, [])
    loaded = load_demo_archive(path)
    assert loaded.episodes == []


def test_truncated_file_names_last_complete_episode(tmp_path):
    path = _write(tmp_path, [_synthetic_episode(4, 1), _synthetic_episode(4, 2)])
    raw = path.read_bytes()
    path.write_bytes(raw[:-100])
    with pytest.raises(DemoArchiveError, match="episode 1.*episode is 0"):
        load_demo_archive(path)


def test_corrupted_records_fail_checksum(tmp_path):
    path = _write(tmp_path, [_synthetic_episode(4, 1)])
    raw = bytearray(path.read_bytes())
    raw[-50] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(DemoArchiveError, match="checksum.*episode 0"):
        load_demo_archive(path)


def test_manifest_score_mismatch_rejected(tmp_path):
    path = _write(tmp_path, [_synthetic_episode(4, 1)])
    raw = path.read_bytes()
    head, _, body = raw.partition(b"\n")
    manifest = json.loads(head)
    manifest["episodes"][0]["score"] = 1234.5
    path.write_bytes(json.dumps(manifest, sort_keys=True).encode() + b"\n" + body)
    with pytest.raises(DemoArchiveError, match="score"):
        load_demo_archive(path)


def test_append_updates_manifest(tmp_path):
    path = tmp_path / "grow.demo"
    spec = env_spec("minipacman")
    row = append_episode(path, spec, _synthetic_episode(4, 1))
    assert row == {"episodes": 1, "states": 4, "score": pytest.approx(row["score"])}
    row = append_episode(path, spec, _synthetic_episode(7, 2))
    assert row["episodes"] == 2 and row["states"] == 11
    assert load_demo_archive(path).total_steps == 11


def test_append_rejects_wrong_env(tmp_path):
    path = tmp_path / "grow.demo"
    append_episode(path, env_spec("minipacman"), _synthetic_episode(4, 1))
    with pytest.raises(DemoArchiveError, match="minipong"):
        append_episode(path, env_spec("minipong"), _synthetic_episode(4, 1))


@pytest.mark.parametrize("env_id", ["minipacman", "minipong"])
def test_scripted_episode_replays_bit_exact(tmp_path, env_id):
    ep = play_episode(env_id, seed=42)
    path = _write(tmp_path, [ep], env=env_id)
    archive = load_demo_archive(path)
    rewards, score = replay_episode(archive, 0)
    np.testing.assert_array_equal(rewards, archive.episodes[0].rewards)
    assert score == archive.episodes[0].score


def test_replay_out_of_range(tmp_path):
    archive = load_demo_archive(_write(tmp_path, [_synthetic_episode(3, 1)]))
    with pytest.raises(IndexError):
        replay_episode(archive, 5)


def test_replay_rejects_env_version_mismatch(tmp_path):
    archive = load_demo_archive(_write(tmp_path, [_synthetic_episode(3, 1)]))
    archive.env_version = "minipacman-v0"
    with pytest.raises(DemoArchiveError, match="version|recorded"):
        replay_episode(archive, 0)
