"""Hierarchical learner: one option per connected pair of machine states.

Every option's policy learns off-policy from every environment step. A
high-level policy picks options per (s, u) and learns from SMDP returns.
An option ⟨ū, u_t⟩ terminates as soon as ū's own machine transition leaves ū.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..config import LearnerConfig
from ..envs.grid import ACTIONS, GridAction, GridState
from ..mdprm import Experience, Mdprm, Policy, mdprm_step
from ..rm.machine import Machine
from .base import Learner
from .qtable import epsilon_greedy

logger = logging.getLogger(__name__)


class EmptyOptionSet(Exception):
    """Raised when pruning leaves a reachable machine state with no option."""


@dataclass(frozen=True, slots=True, order=True)
class OptionId:
    source: int
    target: int


def hrm_option_set(rm: Machine, cfg: LearnerConfig) -> list[OptionId]:
    """Connected (u, δu(u, σ)) pairs over reachable interior states, after pruning."""
    options: list[OptionId] = []
    for u in rm.reachable_interior():
        targets = sorted(set(rm.next_table[u].tolist()))
        kept = [
            OptionId(u, v) for v in targets
            if not (cfg.prune_self_loops and v == u) and not (cfg.prune_bad and rm.states[v].bad)
        ]
        if not kept:
            raise EmptyOptionSet(f"machine {rm.name!r}: state {rm.states[u].name!r} has no option left")
        options.extend(kept)
    return options


def hrm_option_reward(
    t: Mdprm,
    opt: OptionId,
    s: GridState,
    a: GridAction,
    s_next: GridState,
    cfg: LearnerConfig,
) -> float:
    """Option reward: the machine's reward while staying in the source, rplus on reaching
    the target, rminus on reaching anything else."""
    sigma = t.labelling(s, a, s_next)
    u_next, r = t.transition(opt.source, s, a, s_next, sigma)
    return _option_reward(opt, u_next, r, cfg)


def _option_reward(opt: OptionId, u_next: int, r: float, cfg: LearnerConfig) -> float:
    if u_next == opt.source:
        return r
    if u_next == opt.target:
        return cfg.rplus
    return cfg.rminus


@dataclass(slots=True)
class ActiveOption:
    option: int
    s0: GridState
    u: int
    r_t: float = 0.0
    t: int = 0


@dataclass
class HrmState:
    """Per-task tables plus the option currently being executed."""

    options: list[OptionId]
    by_source: dict[int, np.ndarray]
    high_q: np.ndarray    # [s, option]
    option_q: np.ndarray  # [option, s, a]
    active: ActiveOption | None = None


def new_hrm_state(t: Mdprm, cfg: LearnerConfig) -> HrmState:
    options = hrm_option_set(t.rm, cfg)
    by_source: dict[int, list[int]] = {}
    for n, opt in enumerate(options):
        by_source.setdefault(opt.source, []).append(n)
    n_s = len(t.env.states)
    return HrmState(
        options=options,
        by_source={u: np.asarray(ns, dtype=np.int64) for u, ns in by_source.items()},
        high_q=np.full((n_s, len(options)), cfg.q0, dtype=np.float64),
        option_q=np.full((len(options), n_s, len(ACTIONS)), cfg.q0, dtype=np.float64),
    )


def update_options(st: HrmState, t: Mdprm, s: GridState, a: GridAction, s_next: GridState, cfg: LearnerConfig) -> int:
    """One q-learning update per option from a single environment transition."""
    index = t.env.index
    i, j = index[s], index[s_next]
    sigma = t.labelling(s, a, s_next)
    moves: dict[int, tuple[int, float]] = {}
    for n, opt in enumerate(st.options):
        step = moves.get(opt.source)
        if step is None:
            step = moves[opt.source] = t.transition(opt.source, s, a, s_next, sigma)
        u_next, r = step
        reward = _option_reward(opt, u_next, r, cfg)
        if u_next != opt.source:
            target = reward
        else:
            target = reward + cfg.gamma * float(st.option_q[n, j].max())
        cell = st.option_q[n, i, a]
        st.option_q[n, i, a] = cell + cfg.alpha * (target - cell)
    return len(st.options)


def choose_option(st: HrmState, i: int, u: int, epsilon: float, rng: np.random.Generator) -> int:
    candidates = st.by_source[u]
    return int(candidates[epsilon_greedy(st.high_q[i, candidates], epsilon, rng)])


def hrm_step(
    st: HrmState,
    t: Mdprm,
    s: GridState,
    u: int,
    rng: np.random.Generator,
    cfg: LearnerConfig,
    truncate: bool = False,
    learn_options: bool = True,
) -> Experience:
    """Advance one environment step under the hierarchical policy and learn from it."""
    index = t.env.index
    if st.active is None:
        st.active = ActiveOption(choose_option(st, index[s], u, cfg.epsilon, rng), s, u)
    active = st.active
    a = GridAction(epsilon_greedy(st.option_q[active.option, index[s]], cfg.epsilon, rng))
    e = mdprm_step(t, s, u, a, truncate)
    if learn_options:
        update_options(st, t, e.s, e.a, e.s_next, cfg)

    if e.u_next != u or e.done:
        target = active.r_t + cfg.gamma ** active.t * e.r
        if not e.terminal:
            nxt = st.high_q[index[e.s_next], st.by_source[e.u_next]]
            target += cfg.gamma ** (active.t + 1) * float(nxt.max())
        i0 = index[active.s0]
        cell = st.high_q[i0, active.option]
        st.high_q[i0, active.option] = cell + cfg.alpha * (target - cell)
        st.active = None
    else:
        active.r_t += cfg.gamma ** active.t * e.r
        active.t += 1
    return e


class HrmLearner(Learner):
    name = "hrm"

    def __init__(self, tasks: Sequence[Mdprm], cfg: LearnerConfig) -> None:
        super().__init__(tasks, cfg)
        self.states = [new_hrm_state(t, cfg) for t in self.tasks]
        logger.debug("HRM option counts: %s", [len(st.options) for st in self.states])

    def begin_episode(self, k: int) -> None:
        self.states[k].active = None

    def _row(self, k: int, s: GridState, u: int) -> np.ndarray:
        st = self.states[k]
        return st.high_q[self.env.index[s], st.by_source[u]]

    def step(
        self,
        k: int,
        s: GridState,
        u: int,
        rng: np.random.Generator,
        truncate: bool,
    ) -> Experience:
        e = hrm_step(self.states[k], self.tasks[k], s, u, rng, self.cfg, truncate, learn_options=False)
        self.update(k, e)
        return e

    def update(self, k: int, e: Experience) -> None:
        for j in self.update_targets(k):
            self.updates += update_options(self.states[j], self.tasks[j], e.s, e.a, e.s_next, self.cfg)

    def greedy_policy(self, k: int) -> Policy:
        """Greedy option choice and greedy option policies, re-choosing whenever u changes."""
        st = self.states[k]
        index = self.env.index
        current: list[int | None] = [None, None]  # [source state, option]

        def policy(s: GridState, u: int, rng: np.random.Generator) -> GridAction:
            if current[0] != u:
                current[0] = u
                current[1] = choose_option(st, index[s], u, 0.0, rng)
            return GridAction(epsilon_greedy(st.option_q[current[1], index[s]], 0.0, rng))

        return policy
