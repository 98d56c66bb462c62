from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..config import LearnerConfig
from ..envs.grid import GridAction, GridState
from ..mdprm import Experience, Mdprm, Policy, check_shared_env, mdprm_step
from .qtable import epsilon_greedy


class Learner:
    """Shared episode plumbing for the tabular learners.

    Subclasses provide action values through _row and learning through update.
    One learner serves every task of a multitask run; k is the task index.
    """

    name = ""

    def __init__(self, tasks: Sequence[Mdprm], cfg: LearnerConfig) -> None:
        self.env = check_shared_env(tasks)
        self.tasks = list(tasks)
        self.cfg = cfg
        self.updates = 0

    def begin_episode(self, k: int) -> None:
        pass

    def _row(self, k: int, s: GridState, u: int) -> np.ndarray:
        raise NotImplementedError

    def act(self, k: int, s: GridState, u: int, rng: np.random.Generator, epsilon: float | None = None) -> GridAction:
        eps = self.cfg.epsilon if epsilon is None else epsilon
        return GridAction(epsilon_greedy(self._row(k, s, u), eps, rng))

    def update(self, k: int, e: Experience) -> None:
        raise NotImplementedError

    def step(
        self,
        k: int,
        s: GridState,
        u: int,
        rng: np.random.Generator,
        truncate: bool,
    ) -> Experience:
        e = mdprm_step(self.tasks[k], s, u, self.act(k, s, u, rng), truncate)
        self.update(k, e)
        return e

    def update_targets(self, k: int) -> list[int]:
        """Tasks whose tables learn from an environment step taken in task k."""
        if self.cfg.share_across_tasks:
            return list(range(len(self.tasks)))
        return [k]

    def greedy_policy(self, k: int) -> Policy:
        """Exploitation-only policy for task k; ties still break at random."""
        return lambda s, u, rng: self.act(k, s, u, rng, epsilon=0.0)
