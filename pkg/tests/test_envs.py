import random

import numpy as np
import pytest

from deskrl import envs


@pytest.mark.parametrize("env_id", ["minipong", "minipacman"])
def test_reset_determinism(env_id):
    a, b = envs.make_env(env_id), envs.make_env(env_id)
    fa, fb = a.reset(123), b.reset(123)
    np.testing.assert_array_equal(fa, fb)
    assert fa.dtype == np.uint8 and fa.shape == (88, 88)


@pytest.mark.parametrize("env_id", ["minipong", "minipacman"])
def test_trajectory_determinism(env_id):
    def run(seed):
        env = envs.make_env(env_id)
        rng = random.Random(seed + 7)
        env.reset(seed)
        frames, rewards = [], []
        while not env.terminal and env.steps < 200:
            r = env.step(rng.randrange(env.spec.n_actions))
            frames.append(r.frame.tobytes())
            rewards.append(r.reward)
        return frames, rewards

    f1, r1 = run(5)
    f2, r2 = run(5)
    assert f1 == f2
    assert r1 == r2


def test_unknown_env_rejected():
    with pytest.raises(ValueError, match="unknown env"):
        envs.make_env("atari")


def test_minipacman_reset_state():
    env = envs.make_env("minipacman")
    env.reset(0)
    assert env.score == 0
    assert len(env.dots) == 9
    assert env.bonus_alive


def test_minipacman_dot_and_bonus_rewards():
    env = envs.make_env("minipacman")
    env.reset(0)
    rewards = set()
    rng = random.Random(3)
    for _ in range(400):
        if env.terminal:
            env.reset(rng.randrange(1000))
        r = env.step(rng.randrange(4))
        rewards.add(r.reward)
    assert rewards <= {0.0, 10.0, 100.0}
    assert 10.0 in rewards


def test_minipacman_score_accounting():
    env = envs.make_env("minipacman")
    rng = random.Random(11)
    for seed in range(5):
        env.reset(seed)
        while not env.terminal:
            env.step(rng.randrange(4))
        assert env.score == env.dots_eaten * 10 + env.bonus_taken * 100


def test_minipong_reward_range_and_noop():
    env = envs.make_env("minipong")
    env.reset(4)
    r = env.step(0)
    assert r.reward == 0.0 and not r.terminal
    rng = random.Random(9)
    seen = set()
    while not env.terminal:
        seen.add(env.step(rng.randrange(3)).reward)
    assert seen <= {-1.0, 0.0, 1.0}


@pytest.mark.parametrize("env_id", ["minipong", "minipacman"])
def test_episode_terminates_within_cap(env_id):
    env = envs.make_env(env_id)
    env.reset(1)
    while not env.terminal:
        env.step(0)
        assert env.steps <= env.spec.max_episode_steps
    assert env.terminal


def test_step_after_terminal_rejected():
    env = envs.make_env("minipacman")
    env.reset(2)
    while not env.terminal:
        env.step(0)
    with pytest.raises(RuntimeError, match="terminal"):
        env.step(0)


def test_bad_action_rejected():
    env = envs.make_env("minipong")
    env.reset(0)
    with pytest.raises(ValueError, match="out of range"):
        env.step(3)


def test_preprocess_scaling():
    f = np.zeros((88, 88), np.uint8)
    f[0, 0] = 255
    f[1, 1] = 0
    x = envs.preprocess(f)
    assert x[0, 0] == 1.0
    assert x[1, 1] == 0.0
    assert x.dtype == np.float32


def test_preprocess_rejects_wrong_size():
    with pytest.raises(ValueError, match="88"):
        envs.preprocess(np.zeros((84, 84), np.uint8))


def test_frame_stack_window():
    frames = [np.full((88, 88), i, np.uint8) for i in range(6)]
    fs = envs.FrameStack(frames[0])
    assert len(fs) == 4
    s = fs.stack()
    assert s.shape == (88, 88, 4)
    assert np.all(s == 0)
    for f in frames[1:]:
        fs.push(f)
    s = fs.stack()
    # pushed frames 1..5 into [f0 x4]; window now holds 2,3,4,5
    np.testing.assert_allclose(s[0, 0, :] * 255, [2, 3, 4, 5])


def test_stack_episode_frames_padding():
    frames = np.stack([np.full((88, 88), i, np.uint8) for i in range(5)])
    s0 = envs.stack_episode_frames(frames, 0)
    np.testing.assert_allclose(s0[0, 0, :] * 255, [0, 0, 0, 0])
    s2 = envs.stack_episode_frames(frames, 2)
    np.testing.assert_allclose(s2[0, 0, :] * 255, [0, 0, 1, 2])
    s4 = envs.stack_episode_frames(frames, 4)
    np.testing.assert_allclose(s4[0, 0, :] * 255, [1, 2, 3, 4])
