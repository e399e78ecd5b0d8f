"""Pacman-like maze game with heterogeneous reward scales.

Dots pay 10, the single bonus item pays 100, ghost contact ends the
episode with reward 0, and clearing every dot also ends it. Entities
move one pixel per tick along an 11x11 tile grid (8px tiles), turning
only at tile boundaries; the ghost patrols by seeded random choices at
intersections, independent of the player.
"""

import random

import numpy as np

from .base import Env, EnvSpec

SPEC = EnvSpec(
    id="minipacman",
    version="minipacman-v2",
    actions=("up", "down", "left", "right"),
    max_episode_steps=1500,
)

TILE = 8
# '.' open corridor, '*' corridor with a dot, 'B' bonus item, 'P' player
# start, '#' wall. Dots are sparse and safe; the single bonus is worth
# half the attainable score and sits in a room the ghost patrols, so
# telling reward sizes apart is what makes the risk worth taking. Eating
# the last dot before collecting the bonus forfeits it.
MAZE = (
    "###########",
    "#*...*...*#",
    "#.#.###.#.#",
    "#.#..*..#.#",
    "#.#.....#.#",
    "#*...B...*#",
    "#.#.....#.#",
    "#.#..*..#.#",
    "#.#.###.#.#",
    "#*...P...*#",
    "###########",
)
N = len(MAZE)

DOT_REWARD = 10.0
BONUS_REWARD = 100.0
GHOST_START = (4, 5)
# the guard walks the ring of tiles around the bonus and nothing else
GHOST_REGION = frozenset(
    (r, c) for r in (4, 5, 6) for c in (4, 5, 6) if (r, c) != (5, 5))
CONTACT_DIST = 6  # pixels, Chebyshev

# action index -> (drow, dcol)
DIRS = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1)}

WALL_SHADE = 64
DOT_SHADE = 160
BONUS_SHADE = 220
PLAYER_SHADE = 255
GHOST_SHADE = 110


def _walls():
    img = np.zeros((88, 88), np.uint8)
    for r, row in enumerate(MAZE):
        for c, ch in enumerate(row):
            if ch == "#":
                img[r * TILE:(r + 1) * TILE, c * TILE:(c + 1) * TILE] = WALL_SHADE
    return img


_WALL_IMG = _walls()
_OPEN = {(r, c) for r in range(N) for c in range(N) if MAZE[r][c] != "#"}
_DOT_TILES = frozenset((r, c) for r in range(N) for c in range(N) if MAZE[r][c] == "*")
_PLAYER_START = next((r, c) for r in range(N) for c in range(N) if MAZE[r][c] == "P")
_BONUS_TILE = next((r, c) for r in range(N) for c in range(N) if MAZE[r][c] == "B")


def _open(r, c):
    return (r, c) in _OPEN


class _Walker:
    """Pixel-position entity walking the tile grid, 1px per tick."""

    def __init__(self, tile):
        self.r, self.c = tile            # current tile
        self.py = tile[0] * TILE         # sprite top-left pixels
        self.px = tile[1] * TILE
        self.dir = None                  # (dr, dc) or None when stopped

    @property
    def aligned(self):
        return self.px % TILE == 0 and self.py % TILE == 0

    def tile(self):
        return self.py // TILE, self.px // TILE

    def advance(self):
        if self.dir is not None:
            self.py += self.dir[0]
            self.px += self.dir[1]


class MiniPacman(Env):
    spec = SPEC

    def _reset_state(self, seed):
        self._rng = random.Random(seed)
        self.dots = set(_DOT_TILES)
        self.bonus_alive = True
        self.player = _Walker(_PLAYER_START)
        self.ghost = _Walker(GHOST_START)
        self.ghost.dir = (0, -1)
        self.dots_eaten = 0
        self.bonus_taken = 0
        self._dot_layer = np.zeros((88, 88), np.uint8)
        for (r, c) in self.dots:
            self._dot_layer[r * TILE + 3:r * TILE + 5, c * TILE + 3:c * TILE + 5] = DOT_SHADE

    def _tick(self, action):
        reward = 0.0
        p = self.player
        if p.aligned:
            r, c = p.tile()
            want = DIRS[action]
            if _open(r + want[0], c + want[1]):
                p.dir = want
            elif p.dir is None or not _open(r + p.dir[0], c + p.dir[1]):
                p.dir = None
        p.advance()

        if p.aligned:
            tile = p.tile()
            if tile in self.dots:
                self.dots.remove(tile)
                self.dots_eaten += 1
                rr, cc = tile
                self._dot_layer[rr * TILE + 3:rr * TILE + 5, cc * TILE + 3:cc * TILE + 5] = 0
                reward += DOT_REWARD
            elif self.bonus_alive and tile == _BONUS_TILE:
                self.bonus_alive = False
                self.bonus_taken += 1
                reward += BONUS_REWARD
            if not self.dots:
                self._terminal = True

        g = self.ghost
        if g.aligned:
            r, c = g.tile()
            options = [d for d in DIRS.values() if (r + d[0], c + d[1]) in GHOST_REGION]
            back = (-g.dir[0], -g.dir[1]) if g.dir else None
            fwd = [d for d in options if d != back]
            g.dir = self._rng.choice(fwd) if fwd else back
        g.advance()

        if abs(p.px - g.px) < CONTACT_DIST and abs(p.py - g.py) < CONTACT_DIST:
            self._terminal = True

        return reward

    def _render(self):
        f = (_WALL_IMG + self._dot_layer).astype(np.uint8)
        if self.bonus_alive:
            r, c = _BONUS_TILE
            f[r * TILE + 2:r * TILE + 6, c * TILE + 2:c * TILE + 6] = BONUS_SHADE
        f[self.ghost.py + 1:self.ghost.py + 7, self.ghost.px + 1:self.ghost.px + 7] = GHOST_SHADE
        f[self.player.py + 1:self.player.py + 7, self.player.px + 1:self.player.px + 7] = PLAYER_SHADE
        return f
