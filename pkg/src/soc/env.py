"""Continuous 2-D mazes built from unit grid cells.

The agent observes its own position and moves by a displacement of at most 1.0
per axis. Walls reject a move outright; the outer border clamps it per axis so
the agent can slide along it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

GOAL_REWARD = 1000.0
OBSTACLE_REWARD = -20.0
STEP_REWARD = -10.0
MAX_STEP = 1.0

PRESETS = {
    "empty-room": "empty_room.txt",
    "one-wall": "one_wall.txt",
}


class MazeParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Maze:
    """Rectangular world of ``width x height`` unit cells.

    Cells are addressed ``(x, y)`` with ``y`` growing upward; cell ``(i, j)``
    covers ``[i, i+1) x [j, j+1)`` except that the outer border is closed.
    """

    width: int
    height: int
    obstacles: frozenset = field(default_factory=frozenset)
    goal: tuple = (0, 0)
    goal_reward: float = GOAL_REWARD
    obstacle_reward: float = OBSTACLE_REWARD
    step_reward: float = STEP_REWARD
    max_step: float = MAX_STEP

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("maze must be at least 1x1")
        for c in (*self.obstacles, self.goal):
            if not (0 <= c[0] < self.width and 0 <= c[1] < self.height):
                raise ValueError(f"cell {c} outside a {self.width}x{self.height} maze")
        if self.goal in self.obstacles:
            raise ValueError("goal cell cannot be an obstacle")
        if len(self.obstacles) + 1 >= self.width * self.height:
            raise ValueError("maze has no free cell to start from")
        blocked = np.zeros((self.width, self.height), dtype=np.int8)
        for i, j in self.obstacles:
            blocked[i, j] = 1
        blocked[self.goal] = 2
        # 0 free, 1 wall, 2 goal; indexed [x, y]
        object.__setattr__(self, "_kind", blocked)

    def cell_of(self, pos) -> tuple[int, int]:
        i = min(int(np.floor(pos[0])), self.width - 1)
        j = min(int(np.floor(pos[1])), self.height - 1)
        return i, j

    def kind(self, pos) -> int:
        i = int(pos[0])
        j = int(pos[1])
        if i >= self.width:
            i = self.width - 1
        if j >= self.height:
            j = self.height - 1
        return int(self._kind[i, j])

    def is_obstacle(self, pos) -> bool:
        return self.kind(pos) == 1

    def is_goal(self, pos) -> bool:
        return self.kind(pos) == 2

    def free_cells(self) -> list[tuple[int, int]]:
        return [
            (i, j)
            for i in range(self.width)
            for j in range(self.height)
            if self._kind[i, j] == 0
        ]

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform random start position outside walls and the goal."""
        lo = np.zeros(2)
        hi = np.array([self.width, self.height], dtype=float)
        while True:
            pos = lo + rng.random(2) * hi
            if self.kind(pos) == 0:
                return pos

    def step(self, pos, action) -> tuple[np.ndarray, float, bool]:
        """Apply ``action`` at ``pos``; returns ``(new_pos, reward, terminal)``."""
        m = self.max_step
        ax = min(max(float(action[0]), -m), m)
        ay = min(max(float(action[1]), -m), m)
        x = min(max(float(pos[0]) + ax, 0.0), float(self.width))
        y = min(max(float(pos[1]) + ay, 0.0), float(self.height))
        k = self.kind((x, y))
        if k == 1:
            return np.array(pos, dtype=float), self.obstacle_reward, False
        cand = np.array((x, y))
        if k == 2:
            return cand, self.goal_reward, True
        return cand, self.step_reward, False

    def to_text(self) -> str:
        rows = []
        for j in range(self.height - 1, -1, -1):
            rows.append("".join(".#G"[self._kind[i, j]] for i in range(self.width)))
        return "\n".join(rows) + "\n"


def load_maze(text: str) -> Maze:
    """Parse a maze drawn with '.', '#' and exactly one 'G'.

    The first text line is the top row of the world.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MazeParseError("empty maze")
    width = len(lines[0])
    height = len(lines)
    obstacles = set()
    goals = []
    for r, line in enumerate(lines):
        if len(line) != width:
            raise MazeParseError(
                f"row has {len(line)} characters, expected {width}", line=r + 1
            )
        y = height - 1 - r
        for c, ch in enumerate(line):
            if ch == "#":
                obstacles.add((c, y))
            elif ch == "G":
                goals.append((r + 1, c + 1, (c, y)))
            elif ch != ".":
                raise MazeParseError(f"unknown character {ch!r}", line=r + 1, column=c + 1)
    if not goals:
        raise MazeParseError("no goal cell 'G'")
    if len(goals) > 1:
        where = ", ".join(f"line {ln} column {col}" for ln, col, _ in goals)
        raise MazeParseError(f"{len(goals)} goal cells found ({where}); exactly one allowed",
                             line=goals[1][0], column=goals[1][1])
    try:
        return Maze(width, height, frozenset(obstacles), goals[0][2])
    except ValueError as e:
        raise MazeParseError(str(e)) from None


def load_maze_file(path) -> Maze:
    return load_maze(Path(path).read_text(encoding="utf-8"))


def preset_maze(name: str) -> Maze:
    try:
        fname = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown maze preset {name!r}; choose from {sorted(PRESETS)}") from None
    return load_maze(resources.files("soc.mazes").joinpath(fname).read_text(encoding="utf-8"))


def resolve_maze(spec) -> Maze:
    """Accept a Maze, a preset name, or a path to a maze file."""
    if isinstance(spec, Maze):
        return spec
    if spec in PRESETS:
        return preset_maze(spec)
    return load_maze_file(spec)
