"""Four-rooms navigation environment with pixel observations.

A 7x7 grid split into four 3x3 rooms by a wall cross (row 3 / column 3)
with one passage per wall arm. The agent must reach a key in the top-left
room, then a car in the bottom-right room. Each step costs -1; reaching a
subgoal pays back its shortest-path distance (car pays one extra), so an
optimal episode returns exactly 1.0.

Observations are 4x32x32 float arrays: 4x4-pixel RGB cell blocks on a
28x28 render centered in a 32x32 canvas (2-pixel wall border), plus a
constant key-possession flag plane.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import UsageError

GRID = 7
WALL_INDEX = 3
PASSAGES = frozenset({(3, 1), (1, 3), (3, 5), (5, 3)})
EPISODE_CAP = 100
CELL_PIXELS = 4
BORDER_PIXELS = 2
CANVAS = GRID * CELL_PIXELS + 2 * BORDER_PIXELS  # 32
OBS_CHANNELS = 4

COLOR_WALL = (0.5, 0.5, 0.5)
COLOR_FLOOR = (0.0, 0.0, 0.0)
COLOR_AGENT = (1.0, 0.0, 0.0)
COLOR_KEY = (1.0, 1.0, 0.0)
COLOR_CAR = (0.0, 1.0, 0.0)

Cell = tuple[int, int]


class Action(IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


ACTION_DELTAS: dict[int, Cell] = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


def _is_wall_cell(cell: Cell) -> bool:
    r, c = cell
    if r == WALL_INDEX or c == WALL_INDEX:
        return cell not in PASSAGES
    return False


class GridLayout:
    """The fixed four-rooms geometry plus precomputed BFS distances."""

    def __init__(self):
        self.width = GRID
        self.height = GRID
        self.passages = PASSAGES
        self.wall_cells = frozenset(
            (r, c) for r in range(GRID) for c in range(GRID) if _is_wall_cell((r, c))
        )
        self.free_cells: tuple[Cell, ...] = tuple(
            (r, c)
            for r in range(GRID)
            for c in range(GRID)
            if (r, c) not in self.wall_cells
        )
        self.top_left_room: tuple[Cell, ...] = tuple(
            (r, c) for r in range(3) for c in range(3)
        )
        self.bottom_right_room: tuple[Cell, ...] = tuple(
            (r, c) for r in range(4, 7) for c in range(4, 7)
        )
        self._distances = self._all_pairs_bfs()
        # geometry sanity: one connected component over all free cells
        origin = self.free_cells[0]
        n_reachable = sum(1 for (a, _b) in self._distances if a == origin)
        if n_reachable != len(self.free_cells):
            raise AssertionError("four-rooms layout is not fully connected")

    def is_wall(self, cell: Cell) -> bool:
        r, c = cell
        if not (0 <= r < GRID and 0 <= c < GRID):
            return True
        return cell in self.wall_cells

    def neighbors(self, cell: Cell):
        r, c = cell
        for dr, dc in ACTION_DELTAS.values():
            nxt = (r + dr, c + dc)
            if not self.is_wall(nxt):
                yield nxt

    def _all_pairs_bfs(self) -> dict[tuple[Cell, Cell], int]:
        dist: dict[tuple[Cell, Cell], int] = {}
        for start in self.free_cells:
            seen = {start: 0}
            queue = deque([start])
            while queue:
                cur = queue.popleft()
                for nxt in self.neighbors(cur):
                    if nxt not in seen:
                        seen[nxt] = seen[cur] + 1
                        queue.append(nxt)
            for cell, d in seen.items():
                dist[(start, cell)] = d
        return dist

    def distance(self, a: Cell, b: Cell) -> int:
        try:
            return self._distances[(a, b)]
        except KeyError:
            raise ValueError(f"no path between {a} and {b} (wall cell?)") from None


_LAYOUT: GridLayout | None = None


def default_layout() -> GridLayout:
    global _LAYOUT
    if _LAYOUT is None:
        _LAYOUT = GridLayout()
    return _LAYOUT


def shortest_distance(a: Cell, b: Cell, layout: GridLayout | None = None) -> int:
    """BFS geodesic step count between two non-wall cells."""
    layout = layout or default_layout()
    if layout.is_wall(a) or layout.is_wall(b):
        raise ValueError(f"shortest_distance requires non-wall cells, got {a}, {b}")
    return layout.distance(a, b)


@dataclass(frozen=True, slots=True)
class EnvState:
    agent: Cell
    key: Cell
    car: Cell
    has_key: bool
    t: int
    d1: int  # BFS distance spawn -> key, fixed at reset
    d2: int  # BFS distance key -> car, fixed at reset


def reset(seed: int, layout: GridLayout | None = None) -> EnvState:
    """Sample a fresh episode: key in the top-left room, car in the
    bottom-right room, agent anywhere else that is not a wall."""
    layout = layout or default_layout()
    rng = np.random.default_rng(seed)
    key = layout.top_left_room[rng.integers(len(layout.top_left_room))]
    car = layout.bottom_right_room[rng.integers(len(layout.bottom_right_room))]
    spawn_cells = [c for c in layout.free_cells if c != key]
    agent = spawn_cells[rng.integers(len(spawn_cells))]
    return EnvState(
        agent=agent,
        key=key,
        car=car,
        has_key=False,
        t=0,
        d1=layout.distance(agent, key),
        d2=layout.distance(key, car),
    )


def is_success(state: EnvState) -> bool:
    """Goal reached: car entered while carrying the key."""
    return state.has_key and state.agent == state.car


def is_done(state: EnvState) -> bool:
    return state.t >= EPISODE_CAP or is_success(state)


def step(
    state: EnvState, action: int, layout: GridLayout | None = None
) -> tuple[EnvState, float, bool]:
    """Advance one step. Blocked moves keep the position and still cost -1."""
    layout = layout or default_layout()
    if is_done(state):
        raise UsageError("step() called on a finished episode")
    dr, dc = ACTION_DELTAS[int(action)]
    nxt = (state.agent[0] + dr, state.agent[1] + dc)
    if layout.is_wall(nxt):
        nxt = state.agent
    reward = -1.0
    has_key = state.has_key
    if not has_key and nxt == state.key:
        has_key = True
        reward += state.d1
    elif has_key and nxt == state.car:
        reward += state.d2 + 1
    new_state = replace(state, agent=nxt, has_key=has_key, t=state.t + 1)
    return new_state, reward, is_done(new_state)


# ---------------------------------------------------------------------------
# rendering

_BASE_CANVAS: np.ndarray | None = None


def _cell_block(cell: Cell) -> tuple[slice, slice]:
    r, c = cell
    top = BORDER_PIXELS + r * CELL_PIXELS
    left = BORDER_PIXELS + c * CELL_PIXELS
    return slice(top, top + CELL_PIXELS), slice(left, left + CELL_PIXELS)


def _paint(canvas: np.ndarray, cell: Cell, color: tuple[float, float, float]) -> None:
    rows, cols = _cell_block(cell)
    for ch in range(3):
        canvas[ch, rows, cols] = color[ch]


def _base_canvas(layout: GridLayout) -> np.ndarray:
    global _BASE_CANVAS
    if _BASE_CANVAS is None:
        base = np.empty((3, CANVAS, CANVAS), dtype=np.float32)
        for ch in range(3):
            base[ch] = COLOR_WALL[ch]  # border and default fill
        for r in range(GRID):
            for c in range(GRID):
                color = COLOR_WALL if (r, c) in layout.wall_cells else COLOR_FLOOR
                _paint(base, (r, c), color)
        _BASE_CANVAS = base
    return _BASE_CANVAS


def render_cells(
    agent: Cell,
    key: Cell,
    car: Cell,
    has_key: bool,
    layout: GridLayout | None = None,
) -> np.ndarray:
    """Pixel observation for a logical state: (4, 32, 32) float32 in [0, 1].

    The key disappears once taken; channel 3 is a constant plane carrying
    the key-possession flag.
    """
    layout = layout or default_layout()
    obs = np.empty((OBS_CHANNELS, CANVAS, CANVAS), dtype=np.float32)
    obs[:3] = _base_canvas(layout)
    if not has_key:
        _paint(obs, key, COLOR_KEY)
    _paint(obs, car, COLOR_CAR)
    _paint(obs, agent, COLOR_AGENT)  # agent drawn on top
    obs[3] = 1.0 if has_key else 0.0
    return obs


def render(state: EnvState, layout: GridLayout | None = None) -> np.ndarray:
    """Pixel observation of an EnvState; a pure function of the state."""
    return render_cells(state.agent, state.key, state.car, state.has_key, layout)


def write_observation_csv(obs: np.ndarray, path) -> None:
    """Debug dump: 4096 values, row-major within each channel, channels
    in order, 32 values per line."""
    flat = np.asarray(obs, dtype=np.float64).reshape(OBS_CHANNELS * CANVAS, CANVAS)
    lines = [",".join(repr(float(v)) for v in row) for row in flat]
    Path(path).write_text("\n".join(lines) + "\n")


def cell_index(cell: Cell) -> int:
    """Flat 0..48 index of a cell (row-major)."""
    return cell[0] * GRID + cell[1]
