from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, field_validator

from .grid import CRAFT_PROPS, EMPTY, START, WALL, GridMap, bfs_distances, load_map

logger = logging.getLogger(__name__)


class GenerationFailed(Exception):
    """Raised when no valid craft map could be produced within the retry budget."""


def _default_counts() -> dict[str, int]:
    return {"w": 5, "g": 5, "i": 5, "t": 2, "b": 2, "f": 2, "r": 1, "x": 1, "G": 1, "M": 1}


class CraftGenParams(BaseModel):
    width: int = 21
    height: int = 21
    counts: dict[str, int] = _default_counts()
    walls: int = 0
    max_attempts: int = 100

    @field_validator("counts")
    @classmethod
    def check_counts(cls, v: dict[str, int]) -> dict[str, int]:
        for glyph, n in v.items():
            if glyph not in CRAFT_PROPS:
                raise ValueError(f"unknown craft location {glyph!r}")
            if n < 0:
                raise ValueError(f"negative count for {glyph!r}")
        return v

    @field_validator("width", "height")
    @classmethod
    def check_size(cls, v: int) -> int:
        if v < 3:
            raise ValueError("map must be at least 3x3")
        return v


def generate_craft_map(seed: int, params: CraftGenParams | None = None) -> GridMap:
    """Seeded random craft map with every location reachable from the start."""
    params = params or CraftGenParams()
    rng = np.random.default_rng(seed)
    interior = [(x, y) for y in range(1, params.height - 1) for x in range(1, params.width - 1)]
    glyphs = [g for g in CRAFT_PROPS for _ in range(params.counts.get(g, 0))]
    need = 1 + len(glyphs) + params.walls
    if need > len(interior):
        raise GenerationFailed(f"{need} cells requested but only {len(interior)} are free")

    for attempt in range(params.max_attempts):
        picks = rng.permutation(len(interior))[:need]
        grid = [
            [WALL if y in (0, params.height - 1) or x in (0, params.width - 1) else EMPTY
             for x in range(params.width)]
            for y in range(params.height)
        ]
        placed = [START, *glyphs, *([WALL] * params.walls)]
        for k, glyph in zip(picks.tolist(), placed):
            x, y = interior[k]
            grid[y][x] = glyph
        m = load_map("\n".join("".join(row) for row in grid), CRAFT_PROPS)
        reach = bfs_distances(m, m.start)
        if all(cell in reach for cells in m.locations.values() for cell in cells):
            logger.debug("Generated craft map for seed %d on attempt %d", seed, attempt + 1)
            return m
    raise GenerationFailed(f"seed {seed}: no connected map after {params.max_attempts} attempts")
