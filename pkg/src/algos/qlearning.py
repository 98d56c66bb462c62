from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..config import LearnerConfig
from ..envs.grid import GridState
from ..mdprm import Experience, Mdprm
from .base import Learner
from .qtable import QTable


def ql_update(q: QTable, e: Experience, cfg: LearnerConfig) -> None:
    """q(s,u,a) <-alpha r, plus gamma max q(s',u',.) unless u' is terminal."""
    i = q.index[e.s]
    if e.terminal:
        target = e.r
    else:
        target = e.r + cfg.gamma * float(q.values[e.u_next, q.index[e.s_next]].max())
    cell = q.values[e.u, i, e.a]
    q.values[e.u, i, e.a] = cell + cfg.alpha * (target - cell)


class QLearner(Learner):
    """Baseline q-learning over the cross-product state; learns only from the task being run."""

    name = "ql"

    def __init__(self, tasks: Sequence[Mdprm], cfg: LearnerConfig) -> None:
        super().__init__(tasks, cfg)
        self.tables = [QTable(self.env.index, t.rm.n_interior, cfg.q0) for t in self.tasks]

    def _row(self, k: int, s: GridState, u: int) -> np.ndarray:
        return self.tables[k].row(s, u)

    def update(self, k: int, e: Experience) -> None:
        ql_update(self.tables[k], e, self.cfg)
        self.updates += 1
