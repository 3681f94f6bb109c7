"""Shortest-path expert policy and demonstration datasets.

Records store the compact logical state (cells + key flag) plus the expert
action; observations are re-rendered on demand. Dataset files carry the
magic "MAILDEMO" and round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import navenv
from .errors import FormatError
from .navenv import Action, EnvState, GridLayout, default_layout

DEMO_MAGIC = b"MAILDEMO"
DEMO_VERSION = 1
RECORD_WIDTH = 8  # agent r,c, key r,c, car r,c, has_key, action -- all u8


def expert_action(state: EnvState, layout: GridLayout | None = None) -> int:
    """First move of a shortest path to the current subgoal.

    Ties are broken in the fixed order Up < Down < Left < Right.
    """
    layout = layout or default_layout()
    target = state.car if state.has_key else state.key
    d = layout.distance(state.agent, target)
    for action in (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT):
        dr, dc = navenv.ACTION_DELTAS[action]
        nxt = (state.agent[0] + dr, state.agent[1] + dc)
        if layout.is_wall(nxt):
            continue
        if layout.distance(nxt, target) == d - 1:
            return int(action)
    raise RuntimeError(f"no distance-decreasing move from {state.agent} to {target}")


@dataclass
class DemoDataset:
    """Expert state-action pairs, stored as whole episodes."""

    records: np.ndarray  # (n, 8) uint8
    episode_starts: np.ndarray  # (n_episodes,) int64
    seed: int

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def n_episodes(self) -> int:
        return len(self.episode_starts)

    def episode_bounds(self, e: int) -> tuple[int, int]:
        start = int(self.episode_starts[e])
        end = (
            int(self.episode_starts[e + 1])
            if e + 1 < self.n_episodes
            else self.count
        )
        return start, end

    def logical_state(self, i: int) -> tuple:
        """(agent, key, car, has_key) of record i."""
        r = self.records[i]
        return (
            (int(r[0]), int(r[1])),
            (int(r[2]), int(r[3])),
            (int(r[4]), int(r[5])),
            bool(r[6]),
        )

    def action(self, i: int) -> int:
        return int(self.records[i][7])

    def observation(self, i: int) -> np.ndarray:
        agent, key, car, has_key = self.logical_state(i)
        return navenv.render_cells(agent, key, car, has_key)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DemoDataset):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.records, other.records)
            and np.array_equal(self.episode_starts, other.episode_starts)
        )


def _record_row(state: EnvState, action: int) -> tuple:
    return (
        state.agent[0],
        state.agent[1],
        state.key[0],
        state.key[1],
        state.car[0],
        state.car[1],
        int(state.has_key),
        action,
    )


def generate(n_pairs: int, seed: int, layout: GridLayout | None = None) -> DemoDataset:
    """Roll full expert episodes from seeded resets until >= n_pairs records."""
    if n_pairs <= 0:
        raise ValueError(f"n_pairs must be positive, got {n_pairs}")
    layout = layout or default_layout()
    rng = np.random.default_rng(seed)
    rows: list[tuple] = []
    starts: list[int] = []
    while len(rows) < n_pairs:
        starts.append(len(rows))
        state = navenv.reset(int(rng.integers(0, 2**62)), layout)
        done = False
        while not done:
            action = expert_action(state, layout)
            rows.append(_record_row(state, action))
            state, _reward, done = navenv.step(state, action, layout)
    return DemoDataset(
        records=np.array(rows, dtype=np.uint8),
        episode_starts=np.array(starts, dtype=np.int64),
        seed=seed,
    )


def initial_env_state(ds: DemoDataset, e: int, layout: GridLayout | None = None) -> EnvState:
    """Reconstruct the full EnvState at the start of episode e."""
    layout = layout or default_layout()
    start, _ = ds.episode_bounds(e)
    agent, key, car, has_key = ds.logical_state(start)
    if has_key:
        raise FormatError(f"episode {e} starts with the key already taken")
    return EnvState(
        agent=agent,
        key=key,
        car=car,
        has_key=False,
        t=0,
        d1=layout.distance(agent, key),
        d2=layout.distance(key, car),
    )


def replay_episode(
    ds: DemoDataset, e: int, layout: GridLayout | None = None
) -> tuple[float, int]:
    """Re-run episode e through the environment, checking every stored state.

    Returns (total return, episode length).
    """
    layout = layout or default_layout()
    start, end = ds.episode_bounds(e)
    state = initial_env_state(ds, e, layout)
    total = 0.0
    for i in range(start, end):
        stored = ds.logical_state(i)
        actual = (state.agent, state.key, state.car, state.has_key)
        if stored != actual:
            raise AssertionError(
                f"episode {e} record {i}: stored state {stored} != replayed {actual}"
            )
        state, reward, done = navenv.step(state, ds.action(i), layout)
        total += reward
    if not done:
        raise AssertionError(f"episode {e} did not terminate at its last record")
    return total, end - start


def save(ds: DemoDataset, path) -> None:
    chunks = [
        DEMO_MAGIC,
        struct.pack("<I", DEMO_VERSION),
        struct.pack("<Q", ds.seed),
        struct.pack("<Q", ds.count),
        struct.pack("<Q", ds.n_episodes),
        np.ascontiguousarray(ds.episode_starts, dtype="<i8").tobytes(),
        np.ascontiguousarray(ds.records, dtype=np.uint8).tobytes(),
    ]
    Path(path).write_bytes(b"".join(chunks))


def load(path) -> DemoDataset:
    blob = Path(path).read_bytes()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"truncated demo file while reading {what}", pos)
        out = blob[pos : pos + n]
        pos += n
        return out

    magic = take(len(DEMO_MAGIC), "magic")
    if magic != DEMO_MAGIC:
        raise FormatError(f"bad demo magic {magic!r}, expected {DEMO_MAGIC!r}", 0)
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != DEMO_VERSION:
        raise FormatError(f"unsupported demo version {version}", pos - 4)
    (seed,) = struct.unpack("<Q", take(8, "seed"))
    (count,) = struct.unpack("<Q", take(8, "record count"))
    (n_episodes,) = struct.unpack("<Q", take(8, "episode count"))
    starts = np.frombuffer(
        take(8 * n_episodes, "episode offsets"), dtype="<i8"
    ).astype(np.int64)
    records = np.frombuffer(
        take(RECORD_WIDTH * count, "records"), dtype=np.uint8
    ).reshape(count, RECORD_WIDTH)
    if pos != len(blob):
        raise FormatError(f"{len(blob) - pos} trailing bytes after records", pos)
    if count and (
        starts[0] != 0
        or np.any(np.diff(starts) <= 0)
        or starts[-1] >= count
    ):
        raise FormatError("episode offsets are not strictly increasing from 0", pos)
    return DemoDataset(records=records.copy(), episode_starts=starts, seed=int(seed))
