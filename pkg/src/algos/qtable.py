from __future__ import annotations

import numpy as np

from ..envs.grid import ACTIONS, GridState


class QTable:
    """Tabular q̃(s, u, a) stored as values[u, s_index, a], initialised to q0."""

    def __init__(self, index: dict[GridState, int], n_u: int, q0: float, n_actions: int = len(ACTIONS)) -> None:
        self.index = index
        self.q0 = q0
        self.values = np.full((n_u, len(index), n_actions), q0, dtype=np.float64)

    def row(self, s: GridState, u: int) -> np.ndarray:
        return self.values[u, self.index[s]]


def epsilon_greedy(row: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Random index with probability epsilon, otherwise an argmax with ties broken at random."""
    if rng.random() < epsilon:
        return int(rng.integers(len(row)))
    best = np.flatnonzero(row == row.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])
