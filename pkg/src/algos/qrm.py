from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..config import LearnerConfig
from ..envs.grid import ACTIONS, GridAction, GridState
from ..mdprm import Experience, Mdprm
from .base import Learner


class QrmTables:
    """One q̃_u(s, a) array per interior machine state."""

    def __init__(self, index: dict[GridState, int], n_u: int, q0: float) -> None:
        self.index = index
        self.by_state = [np.full((len(index), len(ACTIONS)), q0, dtype=np.float64) for _ in range(n_u)]

    def flatten(self) -> np.ndarray:
        """Stacked [u, s, a] view comparable to a cross-product QTable."""
        return np.stack(self.by_state)


def qrm_update(
    tables: QrmTables,
    t: Mdprm,
    s: GridState,
    a: GridAction,
    s_next: GridState,
    cfg: LearnerConfig,
) -> int:
    """Update every q̃_u from one shared transition, bootstrapping from q̃ of u's successor."""
    sigma = t.labelling(s, a, s_next)
    i, j = tables.index[s], tables.index[s_next]
    for u in t.rm.interior:
        u_next, r = t.transition(u, s, a, s_next, sigma)
        if t.rm.is_terminal(u_next):
            target = r
        else:
            target = r + cfg.gamma * float(tables.by_state[u_next][j].max())
        q = tables.by_state[u]
        cell = q[i, a]
        q[i, a] = cell + cfg.alpha * (target - cell)
    return t.rm.n_interior


class QrmLearner(Learner):
    name = "qrm"

    def __init__(self, tasks: Sequence[Mdprm], cfg: LearnerConfig) -> None:
        super().__init__(tasks, cfg)
        self.tables = [QrmTables(self.env.index, t.rm.n_interior, cfg.q0) for t in self.tasks]

    def _row(self, k: int, s: GridState, u: int) -> np.ndarray:
        tables = self.tables[k]
        return tables.by_state[u][tables.index[s]]

    def update(self, k: int, e: Experience) -> None:
        for j in self.update_targets(k):
            self.updates += qrm_update(self.tables[j], self.tasks[j], e.s, e.a, e.s_next, self.cfg)
