from __future__ import annotations

from collections import deque
from collections.abc import Callable, Collection, Iterable
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import partial
from typing import NamedTuple

OFFICE_PROPS: tuple[str, ...] = ("c", "m", "o", "d", "A", "B", "C", "D")
# wood, grass, iron, toolshed, workbench, factory, bridge, axe, gold, gem
CRAFT_PROPS: tuple[str, ...] = ("w", "g", "i", "t", "b", "f", "r", "x", "G", "M")

WALL = "X"
EMPTY = "."
START = "S"


class GridAction(IntEnum):
    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3


ACTIONS: tuple[GridAction, ...] = tuple(GridAction)

_DELTA = {
    GridAction.NORTH: (0, -1),
    GridAction.SOUTH: (0, 1),
    GridAction.EAST: (1, 0),
    GridAction.WEST: (-1, 0),
}


class GridState(NamedTuple):
    x: int
    y: int


class MapErrorKind(str, Enum):
    NOT_RECTANGULAR = "NotRectangular"
    NO_START = "NoStart"
    MULTIPLE_STARTS = "MultipleStarts"
    OPEN_BORDER = "OpenBorder"
    UNKNOWN_GLYPH = "UnknownGlyph"


class MapError(Exception):
    """Malformed ASCII map; row and column are 1-based positions in the map text."""

    def __init__(self, kind: MapErrorKind, row: int, column: int, message: str) -> None:
        super().__init__(f"{row}:{column}: {kind.value}: {message}")
        self.kind = kind
        self.row = row
        self.column = column


class GridMap:
    """Immutable gridworld layout with precomputed dynamics and labels."""

    def __init__(self, rows: Iterable[str], props: Collection[str]) -> None:
        self.rows: tuple[str, ...] = tuple(rows)
        self.props: tuple[str, ...] = tuple(props)
        self.height = len(self.rows)
        self.width = len(self.rows[0]) if self.rows else 0

        states: list[GridState] = []
        locations: dict[str, list[GridState]] = {}
        start: GridState | None = None
        for y, row in enumerate(self.rows):
            for x, glyph in enumerate(row):
                if glyph == WALL:
                    continue
                pos = GridState(x, y)
                states.append(pos)
                if glyph == START:
                    start = pos
                elif glyph != EMPTY:
                    locations.setdefault(glyph, []).append(pos)
        if start is None:
            raise MapError(MapErrorKind.NO_START, 1, 1, "no start cell")
        self.start = start
        self.states: tuple[GridState, ...] = tuple(states)
        self.index: dict[GridState, int] = {s: i for i, s in enumerate(states)}
        self.locations = {p: tuple(cells) for p, cells in locations.items()}

        # successor[i][a] is the index reached from state i under action a
        self.successor: tuple[tuple[int, ...], ...] = tuple(
            tuple(self.index[self._move(s, a)] for a in ACTIONS) for s in states
        )
        self.labels: tuple[frozenset[str], ...] = tuple(
            frozenset({g}) if (g := self.glyph(s)) not in (EMPTY, START) else frozenset() for s in states
        )

    def glyph(self, s: GridState) -> str:
        return self.rows[s.y][s.x]

    def is_wall(self, s: GridState) -> bool:
        return not (0 <= s.y < self.height and 0 <= s.x < self.width) or self.rows[s.y][s.x] == WALL

    def location(self, s: GridState) -> str | None:
        g = self.glyph(s)
        return None if g in (EMPTY, START) else g

    def _move(self, s: GridState, a: GridAction) -> GridState:
        dx, dy = _DELTA[a]
        nxt = GridState(s.x + dx, s.y + dy)
        return s if self.is_wall(nxt) else nxt

    @property
    def start_candidates(self) -> tuple[GridState, ...]:
        """Open cells without a location; used for randomized episode starts."""
        return tuple(s for s in self.states if self.location(s) is None)

    @property
    def text(self) -> str:
        return "\n".join(self.rows) + "\n"

    def __repr__(self) -> str:
        return f"GridMap({self.width}x{self.height}, open={len(self.states)})"


def load_map(text: str, props: Collection[str]) -> GridMap:
    """Parse an ASCII map. X wall, . empty, S start, any letter in props a location."""
    rows = [line.rstrip("\r") for line in text.split("\n")]
    while rows and not rows[-1].strip():
        rows.pop()
    while rows and not rows[0].strip():
        rows.pop(0)
    if not rows:
        raise MapError(MapErrorKind.NO_START, 1, 1, "empty map")

    width = len(rows[0])
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MapError(
                MapErrorKind.NOT_RECTANGULAR, y + 1, min(len(row), width) + 1,
                f"row has {len(row)} cells, expected {width}",
            )

    allowed = set(props)
    starts: list[tuple[int, int]] = []
    for y, row in enumerate(rows):
        for x, glyph in enumerate(row):
            if glyph == START:
                starts.append((y, x))
            elif glyph not in (WALL, EMPTY) and glyph not in allowed:
                raise MapError(MapErrorKind.UNKNOWN_GLYPH, y + 1, x + 1, f"unknown glyph {glyph!r}")

    height = len(rows)
    for y, row in enumerate(rows):
        for x, glyph in enumerate(row):
            on_border = y in (0, height - 1) or x in (0, width - 1)
            if on_border and glyph != WALL:
                raise MapError(MapErrorKind.OPEN_BORDER, y + 1, x + 1, "border cell must be a wall")

    if not starts:
        raise MapError(MapErrorKind.NO_START, 1, 1, "no start cell")
    if len(starts) > 1:
        y, x = starts[1]
        raise MapError(MapErrorKind.MULTIPLE_STARTS, y + 1, x + 1, "second start cell")
    return GridMap(rows, props)


def env_step(m: GridMap, s: GridState, a: GridAction) -> GridState:
    """Move one cell in direction a; walls block and leave the agent in place."""
    return m.states[m.successor[m.index[s]][a]]


def label(m: GridMap, s: GridState, a: GridAction, s_next: GridState) -> frozenset[str]:
    """Propositions true after the move: the location of the arrival cell, if any."""
    return m.labels[m.index[s_next]]


@dataclass(frozen=True)
class LabellingFn:
    id: str
    props: tuple[str, ...]
    rule: Callable[[GridState, GridAction, GridState], frozenset[str]]

    def __call__(self, s: GridState, a: GridAction, s_next: GridState) -> frozenset[str]:
        return self.rule(s, a, s_next)


def grid_labelling(m: GridMap, env_id: str) -> LabellingFn:
    return LabellingFn(f"{env_id}-arrival", m.props, partial(label, m))


def bfs_distances(
    m: GridMap,
    start: GridState,
    avoid: Collection[str] = (),
) -> dict[GridState, int]:
    """Shortest step counts from start; cells whose location is in avoid are never entered."""
    dist = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for a in ACTIONS:
            nxt = env_step(m, s, a)
            if nxt in dist:
                continue
            loc = m.location(nxt)
            if loc is not None and loc in avoid:
                continue
            dist[nxt] = dist[s] + 1
            queue.append(nxt)
    return dist
