from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..config import LearnerConfig
from ..envs.grid import GridAction, GridState
from ..mdprm import Experience, Mdprm
from .base import Learner
from .qlearning import ql_update
from .qtable import QTable


def crm_experiences(
    t: Mdprm,
    s: GridState,
    a: GridAction,
    s_next: GridState,
    truncate: bool = False,
) -> list[Experience]:
    """Relabel one environment transition for every interior machine state, in index order."""
    sigma = t.labelling(s, a, s_next)
    out = []
    for u in t.rm.interior:
        u_next, r = t.transition(u, s, a, s_next, sigma)
        terminal = t.rm.is_terminal(u_next)
        out.append(Experience(
            s, u, a, r, s_next, u_next, terminal,
            truncated=truncate and not terminal,
            raw_r=t.raw_reward(u, sigma, r),
        ))
    return out


def crm_update(q: QTable, t: Mdprm, e: Experience, cfg: LearnerConfig) -> int:
    """Apply ql_update to each counterfactual of e; returns the number of cells updated."""
    experiences = crm_experiences(t, e.s, e.a, e.s_next, e.truncated)
    for x in experiences:
        ql_update(q, x, cfg)
    return len(experiences)


class CrmLearner(Learner):
    name = "crm"

    def __init__(self, tasks: Sequence[Mdprm], cfg: LearnerConfig) -> None:
        super().__init__(tasks, cfg)
        self.tables = [QTable(self.env.index, t.rm.n_interior, cfg.q0) for t in self.tasks]

    def _row(self, k: int, s: GridState, u: int) -> np.ndarray:
        return self.tables[k].row(s, u)

    def update(self, k: int, e: Experience) -> None:
        for j in self.update_targets(k):
            self.updates += crm_update(self.tables[j], self.tasks[j], e, self.cfg)
