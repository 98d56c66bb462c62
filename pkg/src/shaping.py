from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from .rm.machine import SimpleRewardMachine, validated

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class RmPotential:
    """Optimal values of the machine viewed as an MDP over truth assignments.

    Terminal states are fixed at 0; the shaping potential is the negated value.
    """

    v_star: tuple[float, ...]
    gamma: float
    sweeps: int = 0

    def potential(self, u: int) -> float:
        return -self.v_star[u]


def iter_rm_value_sweeps(m: SimpleRewardMachine, gamma: float) -> Iterator[tuple[np.ndarray, float]]:
    """In-place sweeps over interior states starting from v = 0; yields (v, max change) per sweep."""
    validated(m)
    rewards, nexts = m.reward_table, m.next_table
    v = np.zeros(len(m.states), dtype=np.float64)
    while True:
        change = 0.0
        for u in m.interior:
            best = float(np.max(rewards[u] + gamma * v[nexts[u]]))
            change = max(change, abs(best - v[u]))
            v[u] = best
        yield v.copy(), change


def rm_value_iteration(m: SimpleRewardMachine, gamma: float, tol: float = DEFAULT_TOL) -> RmPotential:
    if not 0 < gamma < 1:
        raise ValueError(f"value iteration over a machine needs 0 < gamma < 1, got {gamma}")
    sweeps = iter_rm_value_sweeps(m, gamma)
    n = 0
    while True:
        v, change = next(sweeps)
        n += 1
        if change <= tol:
            logger.debug("Machine %r values converged after %d sweeps", m.name, n)
            return RmPotential(tuple(float(x) for x in v), gamma, n)


def shape_reward(r: float, phi_u: float, phi_u_next: float, gamma: float) -> float:
    return r + gamma * phi_u_next - phi_u


def shaped(m: SimpleRewardMachine, gamma: float, tol: float = DEFAULT_TOL) -> SimpleRewardMachine:
    """Same machine with every edge reward replaced by its potential-shaped value."""
    pot = rm_value_iteration(m, gamma, tol)

    def phi(u: int) -> float:
        return 0.0 if m.is_terminal(u) else pot.potential(u)

    rewards = [shape_reward(e.reward, phi(e.source), phi(e.target), gamma) for e in m.edges]
    return m.with_rewards(rewards, name=f"{m.name}+rs")
