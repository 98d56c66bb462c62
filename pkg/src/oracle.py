from __future__ import annotations

import logging
from collections.abc import Collection, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .envs.grid import GridAction, GridMap, GridState, bfs_distances
from .mdprm import CrossProductMdp, Experience, Mdprm, Policy, build_cross_product, run_episode
from .rm.machine import SimpleRewardMachine, run_trace, validated

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
TIE_TOL = 1e-9
# Discount used to find the optimum of undiscounted tasks.
NORMALIZER_GAMMA = 0.9


class UnreachableGoal(Exception):
    """Raised when the optimal policy of a task never collects its reward."""


@dataclass(frozen=True)
class OracleSolution:
    cp: CrossProductMdp
    v: np.ndarray
    q: np.ndarray
    greedy: tuple[frozenset[int], ...]
    sweeps: int = 0

    def value(self, s: GridState, u: int) -> float:
        return float(self.v[self.cp.index[(s, u)]])

    def actions(self, s: GridState, u: int) -> frozenset[int]:
        return self.greedy[self.cp.index[(s, u)]]

    def policy(self) -> Policy:
        """Deterministic greedy policy: the lowest-numbered optimal action."""
        return lambda s, u, rng: GridAction(min(self.actions(s, u)))


def _q_values(cp: CrossProductMdp, v: np.ndarray) -> np.ndarray:
    n, na = len(cp.states), cp.n_actions
    backed = cp.prob * (cp.reward + cp.gamma * v[cp.dst])
    return np.bincount(cp.src * na + cp.act, weights=backed, minlength=n * na).reshape(n, na)


def cross_vi(cp: CrossProductMdp, tol: float = DEFAULT_TOL, max_sweeps: int = 1_000_000) -> OracleSolution:
    """Synchronous value iteration over the cross product."""
    v = np.zeros(len(cp.states), dtype=np.float64)
    for sweep in range(1, max_sweeps + 1):
        q = _q_values(cp, v)
        new = q.max(axis=1)
        change = float(np.abs(new - v).max()) if len(v) else 0.0
        v = new
        if change <= tol:
            break
    else:
        raise RuntimeError(f"value iteration did not converge in {max_sweeps} sweeps")
    q = _q_values(cp, v)
    best = q.max(axis=1)
    greedy = tuple(
        frozenset(np.flatnonzero(q[i] >= best[i] - TIE_TOL).tolist()) for i in range(len(v))
    )
    return OracleSolution(cp, v, q, greedy, sweep)


def bellman_residual(sol: OracleSolution) -> float:
    return float(np.abs(_q_values(sol.cp, sol.v).max(axis=1) - sol.v).max())


def greedy_rollout(
    t: Mdprm,
    source: OracleSolution | Policy,
    rng: np.random.Generator,
    cap: int,
    start: GridState | None = None,
) -> list[Experience]:
    policy = source.policy() if isinstance(source, OracleSolution) else source
    return run_episode(t, policy, rng, cap, start=start)


@dataclass(frozen=True)
class OptimumReport:
    names: tuple[str, ...]
    rewards: tuple[float, ...]
    lengths: tuple[int, ...]
    per_task: tuple[float, ...] = field(default=())

    @property
    def aggregate(self) -> float:
        """Reward per step over one round-robin cycle of the tasks."""
        return sum(self.rewards) / sum(self.lengths)


def optimal_avg_reward(tasks: Sequence[Mdprm], cap: int) -> OptimumReport:
    """Optimal reward per step of each task from the map's start cell, scored on the task's own reward."""
    rng = np.random.default_rng(0)
    rewards: list[float] = []
    lengths: list[int] = []
    for t in tasks:
        cp = build_cross_product(t)
        if cp.gamma >= 1.0:
            cp = replace(cp, gamma=NORMALIZER_GAMMA)
        sol = cross_vi(cp)
        trace = greedy_rollout(t, sol, rng, cap, start=t.env.start)
        total = sum(e.raw_r for e in trace)
        if not trace or not trace[-1].terminal or total <= 0:
            raise UnreachableGoal(f"task {t.name!r}: optimal policy collects no reward within {cap} steps")
        rewards.append(total)
        lengths.append(len(trace))
        logger.debug("Task %s optimum: reward %g in %d steps", t.name, total, len(trace))
    return OptimumReport(
        names=tuple(t.name for t in tasks),
        rewards=tuple(rewards),
        lengths=tuple(lengths),
        per_task=tuple(r / n for r, n in zip(rewards, lengths)),
    )


def accepts_trace(m: SimpleRewardMachine, labels: Sequence[Collection[str]]) -> tuple[int, float, bool]:
    result = run_trace(validated(m), labels)
    return result.final, result.total_reward, result.accepted


# ── Path oracles ──────────────────────────────────────────────


def _stage_cells(m: GridMap, stage: Collection[str]) -> list[GridState]:
    return sorted((c for p in stage for c in m.locations.get(p, ())), key=lambda c: (c.y, c.x))


def shortest_tour(
    m: GridMap,
    start: GridState,
    stages: Sequence[Collection[str]],
    avoid: Collection[str] = (),
) -> int | None:
    """Fewest steps visiting one location of each stage in order, never entering avoided locations."""
    frontier = {start: 0}
    for stage in stages:
        cells = _stage_cells(m, stage)
        nxt: dict[GridState, int] = {}
        for origin, cost in frontier.items():
            dist = bfs_distances(m, origin, avoid)
            for c in cells:
                if c in dist and cost + dist[c] < nxt.get(c, 1 << 62):
                    nxt[c] = cost + dist[c]
        if not nxt:
            return None
        frontier = nxt
    return min(frontier.values())


def nearest_first_tour(
    m: GridMap,
    start: GridState,
    stages: Sequence[Collection[str]],
    avoid: Collection[str] = (),
) -> int | None:
    """Length of the myopic tour that always heads for the closest location of the next stage."""
    here, total = start, 0
    for stage in stages:
        dist = bfs_distances(m, here, avoid)
        reachable = [c for c in _stage_cells(m, stage) if c in dist]
        if not reachable:
            return None
        here = min(reachable, key=lambda c: dist[c])
        total += dist[here]
    return total
