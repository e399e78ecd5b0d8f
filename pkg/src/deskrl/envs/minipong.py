"""Pong-like game with sparse ±1 rewards.

The agent owns the right paddle; a ball-tracking opponent owns the left.
+1 when the ball passes the opponent, -1 when it passes the agent.
First to 5 points (either side) or the step cap ends the episode. All
state is integer pixels, so play is bit-reproducible from the seed.
"""

import random

import numpy as np

from .base import Env, EnvSpec

SPEC = EnvSpec(
    id="minipong",
    version="minipong-v1",
    actions=("noop", "up", "down"),
    max_episode_steps=1000,
)

H = W = 88
WALL = 2             # top/bottom wall thickness
PAD_H = 12
PAD_SPEED = 2
OPP_SPEED = 1
BALL_VX = 2
PLAYER_X = 84        # left edge of the 2px agent paddle
OPP_X = 2
WIN_POINTS = 5
SERVE_DELAY = 10     # ticks of freeze after a point (one scoring event per step)


class MiniPong(Env):
    spec = SPEC

    def _reset_state(self, seed):
        self._rng = random.Random(seed)
        self.player_y = self.opp_y = (H - PAD_H) // 2
        self.points_for = 0
        self.points_against = 0
        self._serve(direction=1)

    def _serve(self, direction):
        self.ball_x = W // 2
        self.ball_y = self._rng.randrange(WALL + 10, H - WALL - 10)
        self.vx = BALL_VX * direction
        self.vy = self._rng.choice((-2, -1, 1, 2))
        self.freeze = SERVE_DELAY

    def _tick(self, action):
        if action == 1:
            self.player_y -= PAD_SPEED
        elif action == 2:
            self.player_y += PAD_SPEED
        self.player_y = min(max(self.player_y, WALL), H - WALL - PAD_H)

        # opponent tracks the ball center with a dead zone
        target = self.ball_y - PAD_H // 2
        if abs(target - self.opp_y) > 2:
            self.opp_y += OPP_SPEED if target > self.opp_y else -OPP_SPEED
        self.opp_y = min(max(self.opp_y, WALL), H - WALL - PAD_H)

        if self.freeze > 0:
            self.freeze -= 1
            return 0.0

        self.ball_x += self.vx
        self.ball_y += self.vy

        if self.ball_y <= WALL:
            self.ball_y = WALL
            self.vy = abs(self.vy)
        elif self.ball_y >= H - WALL - 2:
            self.ball_y = H - WALL - 2
            self.vy = -abs(self.vy)

        # paddle bounces; deflection depends on where the ball hits
        if self.vx > 0 and PLAYER_X - 2 <= self.ball_x < PLAYER_X + 2:
            if self.player_y - 2 <= self.ball_y <= self.player_y + PAD_H:
                self.ball_x = PLAYER_X - 2
                self.vx = -BALL_VX
                self.vy = self._deflect(self.ball_y - self.player_y)
        elif self.vx < 0 and OPP_X <= self.ball_x < OPP_X + 4:
            if self.opp_y - 2 <= self.ball_y <= self.opp_y + PAD_H:
                self.ball_x = OPP_X + 4
                self.vx = BALL_VX
                self.vy = self._deflect(self.ball_y - self.opp_y)

        if self.ball_x < 0:
            self.points_for += 1
            if self.points_for >= WIN_POINTS:
                self._terminal = True
            else:
                self._serve(direction=-1)
            return 1.0
        if self.ball_x >= W:
            self.points_against += 1
            if self.points_against >= WIN_POINTS:
                self._terminal = True
            else:
                self._serve(direction=1)
            return -1.0
        return 0.0

    def _deflect(self, offset):
        # offset in [-2, PAD_H]; map to vy in {-2,-1,1,2}
        third = PAD_H // 3
        if offset < third:
            return -2 if offset < third // 2 else -1
        if offset >= 2 * third:
            return 2 if offset > 2 * third + third // 2 else 1
        return 1 if self.vy >= 0 else -1

    def _render(self):
        f = np.zeros((H, W), np.uint8)
        f[:WALL, :] = 64
        f[H - WALL:, :] = 64
        f[self.opp_y:self.opp_y + PAD_H, OPP_X:OPP_X + 2] = 255
        f[self.player_y:self.player_y + PAD_H, PLAYER_X:PLAYER_X + 2] = 255
        by, bx = int(self.ball_y), int(self.ball_x)
        if 0 <= bx < W - 1:
            f[max(by, 0):by + 2, bx:bx + 2] = 255
        return f
