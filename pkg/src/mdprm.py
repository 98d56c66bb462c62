from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .envs.grid import ACTIONS, GridAction, GridMap, GridState, LabellingFn, env_step
from .rm.formula import OTHERWISE, eval_formula
from .rm.machine import Machine, RewardEvaluatorId, RewardMachine, SimpleRewardMachine, general_step, rm_step

logger = logging.getLogger(__name__)

EvaluatorFn = Callable[[GridState, GridAction, GridState], float]
Policy = Callable[[GridState, int, np.random.Generator], GridAction]


class AssemblyError(Exception):
    """Raised when an environment, labelling and machine cannot be combined."""


@dataclass(frozen=True, slots=True)
class Experience:
    s: GridState
    u: int
    a: GridAction
    r: float
    s_next: GridState
    u_next: int
    terminal: bool
    truncated: bool = False
    raw_r: float = 0.0

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated


# ── Reward evaluators ─────────────────────────────────────────

EvaluatorFactory = Callable[[tuple, GridMap, LabellingFn], EvaluatorFn]


def _constant(params: tuple, env: GridMap, labelling: LabellingFn) -> EvaluatorFn:
    value = float(params[0])
    return lambda s, a, s_next: value


def _guarded(params: tuple, env: GridMap, labelling: LabellingFn) -> EvaluatorFn:
    labelling_id, pairs = params
    if labelling_id != labelling.id:
        raise AssemblyError(f"evaluator built for labelling {labelling_id!r}, assembled with {labelling.id!r}")

    def evaluate(s: GridState, a: GridAction, s_next: GridState) -> float:
        sigma = labelling(s, a, s_next)
        for guard, reward in pairs:
            if guard is OTHERWISE or eval_formula(guard, sigma):
                return reward
        raise AssemblyError("guarded evaluator has no matching case")

    return evaluate


def _step_cost(params: tuple, env: GridMap, labelling: LabellingFn) -> EvaluatorFn:
    cost = float(params[0])
    bump = float(params[1]) if len(params) > 1 else 0.0
    return lambda s, a, s_next: -cost - (bump if s_next == s else 0.0)


class EvaluatorRegistry:
    """Maps evaluator names to factories producing (s, a, s') -> reward callables."""

    def __init__(self) -> None:
        self._factories: dict[str, EvaluatorFactory] = {}

    def register(self, name: str, factory: EvaluatorFactory) -> None:
        self._factories[name] = factory

    def resolve(self, eid: RewardEvaluatorId, env: GridMap, labelling: LabellingFn) -> EvaluatorFn:
        factory = self._factories.get(eid.name)
        if factory is None:
            raise AssemblyError(f"unknown reward evaluator {eid.name!r}")
        return factory(eid.params, env, labelling)


DEFAULT_REGISTRY = EvaluatorRegistry()
DEFAULT_REGISTRY.register("constant", _constant)
DEFAULT_REGISTRY.register("guarded", _guarded)
DEFAULT_REGISTRY.register("step_cost", _step_cost)


# ── MDPRM ─────────────────────────────────────────────────────


class Mdprm:
    """Environment, labelling function and reward machine combined into one decision process."""

    def __init__(
        self,
        env: GridMap,
        labelling: LabellingFn,
        rm: Machine,
        gamma: float,
        evaluators: dict[int, EvaluatorFn] | None = None,
        base: SimpleRewardMachine | None = None,
        random_start: bool = False,
        name: str = "",
    ) -> None:
        self.env = env
        self.labelling = labelling
        self.rm = rm
        self.gamma = gamma
        self.base = base
        self.random_start = random_start
        self.name = name or rm.name
        self._evaluators = evaluators or {}
        self._simple = isinstance(rm, SimpleRewardMachine)

    def transition(
        self,
        u: int,
        s: GridState,
        a: GridAction,
        s_next: GridState,
        sigma: frozenset[str],
    ) -> tuple[int, float]:
        """RM successor and reward for the environment transition (s, a, s') seen from u."""
        if self._simple:
            return rm_step(self.rm, u, sigma)  # type: ignore[arg-type]
        u_next = general_step(self.rm, u, sigma)  # type: ignore[arg-type]
        return u_next, self._evaluators[u](s, a, s_next)

    def raw_reward(self, u: int, sigma: frozenset[str], shaped: float) -> float:
        if self.base is None:
            return shaped
        return rm_step(self.base, u, sigma)[1]

    def __repr__(self) -> str:
        return f"Mdprm({self.name!r}, {self.env!r}, {self.rm!r}, gamma={self.gamma})"


def assemble(
    env: GridMap,
    rm: Machine,
    labelling: LabellingFn,
    gamma: float,
    registry: EvaluatorRegistry = DEFAULT_REGISTRY,
    base: SimpleRewardMachine | None = None,
    random_start: bool = False,
    name: str = "",
) -> Mdprm:
    """Check compatibility, resolve evaluators, and build an Mdprm."""
    if not rm.validated:
        raise AssemblyError(f"machine {rm.name!r} must be validated before assembly")
    extra = set(rm.props) - set(labelling.props)
    if extra:
        raise AssemblyError(f"machine propositions {sorted(extra)} are not produced by labelling {labelling.id!r}")
    if not 0 < gamma <= 1:
        raise AssemblyError(f"discount must lie in (0, 1], got {gamma}")
    evaluators: dict[int, EvaluatorFn] = {}
    if isinstance(rm, RewardMachine):
        for u, eid in rm.state_reward.items():
            evaluators[u] = registry.resolve(eid, env, labelling)
    if base is not None and (base.props != rm.props or len(base.states) != len(rm.states)):
        raise AssemblyError("scoring machine must share the learning machine's structure")
    return Mdprm(env, labelling, rm, gamma, evaluators, base, random_start, name)


def reset(t: Mdprm, rng: np.random.Generator) -> tuple[GridState, int]:
    if t.random_start:
        candidates = t.env.start_candidates
        s = candidates[int(rng.integers(len(candidates)))]
    else:
        s = t.env.start
    return s, t.rm.initial


def mdprm_step(
    t: Mdprm,
    s: GridState,
    u: int,
    a: GridAction,
    truncate: bool = False,
) -> Experience:
    """One environment step paired with the machine's response.

    truncate marks the step that hits the episode cap; it ends the episode
    without being treated as a terminal transition.
    """
    s_next = env_step(t.env, s, a)
    sigma = t.labelling(s, a, s_next)
    u_next, r = t.transition(u, s, a, s_next, sigma)
    terminal = t.rm.is_terminal(u_next)
    return Experience(
        s, u, a, r, s_next, u_next, terminal,
        truncated=truncate and not terminal,
        raw_r=t.raw_reward(u, sigma, r),
    )


def run_episode(
    t: Mdprm,
    policy: Policy,
    rng: np.random.Generator,
    cap: int,
    start: GridState | None = None,
) -> list[Experience]:
    """Roll out policy from the episode start until a terminal machine state or cap steps."""
    s, u = reset(t, rng)
    if start is not None:
        s = start
    trace: list[Experience] = []
    for k in range(cap):
        e = mdprm_step(t, s, u, policy(s, u, rng), truncate=k == cap - 1)
        trace.append(e)
        if e.done:
            break
        s, u = e.s_next, e.u_next
    return trace


# ── Cross product ─────────────────────────────────────────────


@dataclass(frozen=True)
class CrossProductMdp:
    """Explicit MDP over (environment state, machine state) pairs.

    Transitions are stored as flat arrays ordered by (state, action);
    offsets[i * n_actions + a] delimits the entries of row (i, a).
    """

    states: tuple[tuple[GridState, int], ...]
    index: dict[tuple[GridState, int], int]
    n_actions: int
    gamma: float
    src: np.ndarray
    act: np.ndarray
    dst: np.ndarray
    prob: np.ndarray
    reward: np.ndarray
    offsets: np.ndarray
    terminal: np.ndarray
    starts: tuple[int, ...]

    def row(self, i: int, a: int) -> list[tuple[int, float, float]]:
        lo, hi = self.offsets[i * self.n_actions + a], self.offsets[i * self.n_actions + a + 1]
        return [
            (int(self.dst[k]), float(self.prob[k]), float(self.reward[k]))
            for k in range(lo, hi)
        ]

    def step(self, i: int, a: int) -> tuple[int, float]:
        j, _, r = self.row(i, a)[0]
        return j, r


def build_cross_product(t: Mdprm) -> CrossProductMdp:
    """Enumerate the pairs reachable from the episode start(s) and their transitions."""
    env, rm = t.env, t.rm
    roots = env.start_candidates if t.random_start else (env.start,)
    states: list[tuple[GridState, int]] = []
    index: dict[tuple[GridState, int], int] = {}
    for s in roots:
        key = (s, rm.initial)
        if key not in index:
            index[key] = len(states)
            states.append(key)
    starts = tuple(range(len(states)))

    src: list[int] = []
    act: list[int] = []
    dst: list[int] = []
    reward: list[float] = []
    offsets = [0]
    queue = deque(range(len(states)))
    # rows are emitted in discovery order, which matches BFS pop order
    while queue:
        i = queue.popleft()
        s, u = states[i]
        for a in ACTIONS:
            s_next = env_step(env, s, a)
            if rm.is_terminal(u):
                u_next, r = u, 0.0
            else:
                u_next, r = t.transition(u, s, a, s_next, t.labelling(s, a, s_next))
            key = (s_next, u_next)
            j = index.get(key)
            if j is None:
                j = index[key] = len(states)
                states.append(key)
                queue.append(j)
            src.append(i)
            act.append(int(a))
            dst.append(j)
            reward.append(r)
            offsets.append(len(src))

    n = len(states)
    logger.debug("Cross product of %s has %d states", t.name, n)
    return CrossProductMdp(
        states=tuple(states),
        index=index,
        n_actions=len(ACTIONS),
        gamma=t.gamma,
        src=np.asarray(src, dtype=np.int64),
        act=np.asarray(act, dtype=np.int64),
        dst=np.asarray(dst, dtype=np.int64),
        prob=np.ones(len(src), dtype=np.float64),
        reward=np.asarray(reward, dtype=np.float64),
        offsets=np.asarray(offsets, dtype=np.int64),
        terminal=np.array([rm.is_terminal(u) for _, u in states], dtype=bool),
        starts=starts,
    )


# ── Multitask scheduling ──────────────────────────────────────


class StepLearner(Protocol):
    def begin_episode(self, k: int) -> None: ...

    def step(
        self,
        k: int,
        s: GridState,
        u: int,
        rng: np.random.Generator,
        truncate: bool,
    ) -> Experience: ...


@dataclass(frozen=True, slots=True)
class StepRecord:
    step: int
    task: int
    episode: int
    experience: Experience


def check_shared_env(tasks: Sequence[Mdprm]) -> GridMap:
    if not tasks:
        raise AssemblyError("no tasks given")
    env = tasks[0].env
    if any(t.env is not env for t in tasks):
        raise AssemblyError("all tasks must share one environment")
    return env


def multitask_loop(
    tasks: Sequence[Mdprm],
    learner: StepLearner,
    budget: int,
    rng: np.random.Generator,
    cap: int,
) -> Iterator[StepRecord]:
    """Round-robin episodes over tasks until budget environment steps have been taken."""
    check_shared_env(tasks)
    step = 0
    episode = 0
    while step < budget:
        k = episode % len(tasks)
        s, u = reset(tasks[k], rng)
        learner.begin_episode(k)
        for i in range(cap):
            if step >= budget:
                break
            e = learner.step(k, s, u, rng, i == cap - 1)
            step += 1
            yield StepRecord(step, k, episode, e)
            if e.done:
                break
            s, u = e.s_next, e.u_next
        episode += 1
