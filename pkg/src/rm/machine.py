from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Collection, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import RmError
from .formula import (
    OTHERWISE,
    And,
    Atom,
    Const,
    Formula,
    Guard,
    Not,
    Or,
    TruthAssignment,
    atoms,
    eval_formula,
)

logger = logging.getLogger(__name__)

MAX_PROPS = 16


class SteppedTerminal(RmError):
    """Raised when a machine is asked to step out of a terminal state."""


class NondeterministicMachine(RmError):
    """Raised when an unvalidated machine has zero or several matching edges."""


class TooManyPropositions(RmError):
    """Raised when exhaustive enumeration over 2^|P| would exceed the configured bound."""


class InvalidMachine(RmError):
    """Raised when a machine fails validation; carries the full report."""

    def __init__(self, report: ValidationReport) -> None:
        super().__init__(str(report))
        self.report = report


# ── Structure ─────────────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class RmState:
    index: int
    name: str
    terminal: bool = False
    bad: bool = False

    @property
    def kind(self) -> str:
        return "terminal" if self.terminal else "interior"


@dataclass(frozen=True, slots=True)
class Transition:
    source: int
    guard: Guard
    target: int


@dataclass(frozen=True, slots=True)
class Edge(Transition):
    reward: float = 0.0


@dataclass(frozen=True, slots=True)
class RewardEvaluatorId:
    """Names an environment-reward function resolved when the machine is assembled."""

    name: str
    params: tuple = ()

    @classmethod
    def constant(cls, value: float) -> RewardEvaluatorId:
        return cls("constant", (float(value),))

    def __str__(self) -> str:
        if self.name == "constant":
            return f"constant({self.params[0]:g})"
        return self.name


# ── Validation report ─────────────────────────────────────────


@dataclass(frozen=True, slots=True)
class Overlap:
    state: int
    first: int
    second: int
    witness: TruthAssignment

    def __str__(self) -> str:
        return f"state {self.state}: edges {self.first} and {self.second} both match {_fmt(self.witness)}"


@dataclass(frozen=True, slots=True)
class Gap:
    state: int
    witness: TruthAssignment

    def __str__(self) -> str:
        return f"state {self.state}: no edge matches {_fmt(self.witness)}"


@dataclass(frozen=True, slots=True)
class DanglingTarget:
    edge: int
    target: int

    def __str__(self) -> str:
        return f"edge {self.edge}: target {self.target} is not a state"


@dataclass(frozen=True, slots=True)
class MultipleOtherwise:
    state: int

    def __str__(self) -> str:
        return f"state {self.state}: more than one otherwise edge"


@dataclass(frozen=True, slots=True)
class TerminalOutEdge:
    state: int
    edge: int

    def __str__(self) -> str:
        return f"edge {self.edge}: leaves terminal state {self.state}"


@dataclass(frozen=True, slots=True)
class UnknownAtom:
    edge: int
    name: str

    def __str__(self) -> str:
        return f"edge {self.edge}: guard mentions undeclared proposition {self.name!r}"


Violation = Union[Overlap, Gap, DanglingTarget, MultipleOtherwise, TerminalOutEdge, UnknownAtom]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_type(self, kind: type) -> list[Violation]:
        return [v for v in self.violations if isinstance(v, kind)]

    def __str__(self) -> str:
        if self.ok:
            return "OK"
        return "\n".join(str(v) for v in self.violations)


def _fmt(sigma: Iterable[str]) -> str:
    return "{" + ", ".join(sorted(sigma)) + "}"


# ── Machines ──────────────────────────────────────────────────


class _Machine:
    """Shared state set, alphabet, and transition structure of both machine kinds."""

    def __init__(
        self,
        props: Sequence[str],
        states: Sequence[RmState],
        initial: int,
        transitions: Sequence[Transition],
        name: str = "",
    ) -> None:
        if len(set(props)) != len(props):
            raise ValueError("duplicate proposition names")
        for i, st in enumerate(states):
            if st.index != i:
                raise ValueError(f"state {st.name!r} has index {st.index}, expected {i}")
        n_interior = sum(1 for st in states if not st.terminal)
        if any(st.terminal for st in states[:n_interior]):
            raise ValueError("interior states must precede terminal states")
        if not 0 <= initial < n_interior:
            raise ValueError("initial state must be interior")
        self.name = name
        self.props: tuple[str, ...] = tuple(props)
        self.states: tuple[RmState, ...] = tuple(states)
        self.initial = initial
        self.n_interior = n_interior
        self._transitions: tuple[Transition, ...] = tuple(transitions)
        self._bit = {p: 1 << i for i, p in enumerate(self.props)}
        self._masks: dict[frozenset[str], int] = {}
        self._next: np.ndarray | None = None
        self._next_rows: list[list[int]] | None = None

    @property
    def validated(self) -> bool:
        return self._next is not None

    @property
    def next_table(self) -> np.ndarray:
        """Dense successor table indexed [interior state, assignment mask]."""
        if self._next is None:
            raise NondeterministicMachine(f"machine {self.name!r} has not been validated")
        return self._next

    def is_terminal(self, u: int) -> bool:
        return u >= self.n_interior

    @property
    def interior(self) -> range:
        return range(self.n_interior)

    @property
    def terminals(self) -> range:
        return range(self.n_interior, len(self.states))

    def state_named(self, name: str) -> int:
        for st in self.states:
            if st.name == name:
                return st.index
        raise KeyError(name)

    def out_transitions(self, u: int) -> list[tuple[int, Transition]]:
        return [(i, t) for i, t in enumerate(self._transitions) if t.source == u]

    def mask(self, sigma: Collection[str]) -> int:
        """Project a truth assignment onto this machine's alphabet as a bitmask."""
        key = sigma if isinstance(sigma, frozenset) else frozenset(sigma)
        m = self._masks.get(key)
        if m is None:
            m = 0
            for p in key:
                m |= self._bit.get(p, 0)
            self._masks[key] = m
        return m

    def assignment(self, mask: int) -> TruthAssignment:
        return frozenset(p for p, bit in self._bit.items() if mask & bit)

    def next_state(self, u: int, sigma: Collection[str]) -> int:
        if self.is_terminal(u):
            raise SteppedTerminal(f"state {self.states[u].name!r} is terminal")
        if self._next_rows is not None:
            return self._next_rows[u][self.mask(sigma)]
        return self._match(u, sigma).target

    def _match(self, u: int, sigma: Collection[str]) -> Transition:
        otherwise: Transition | None = None
        matched: list[Transition] = []
        for _, t in self.out_transitions(u):
            if t.guard is OTHERWISE:
                otherwise = t
            elif eval_formula(t.guard, sigma):
                matched.append(t)
        if len(matched) > 1:
            raise NondeterministicMachine(
                f"state {self.states[u].name!r}: {len(matched)} edges match {_fmt(sigma)}"
            )
        if matched:
            return matched[0]
        if otherwise is None:
            raise NondeterministicMachine(
                f"state {self.states[u].name!r}: no edge matches {_fmt(sigma)}"
            )
        return otherwise

    def reachable_interior(self) -> list[int]:
        """Interior states reachable from the initial state under some assignment sequence."""
        table = self.next_table
        seen = {self.initial}
        queue = deque([self.initial])
        while queue:
            u = queue.popleft()
            for v in np.unique(table[u]).tolist():
                if v < self.n_interior and v not in seen:
                    seen.add(v)
                    queue.append(v)
        return sorted(seen)

    def _compile(self, chosen: np.ndarray) -> None:
        self._next = np.array(
            [[self._transitions[e].target for e in row] for row in chosen],
            dtype=np.int64,
        ).reshape(self.n_interior, 1 << len(self.props))
        self._next_rows = self._next.tolist()


class SimpleRewardMachine(_Machine):
    """Reward machine whose outputs are numbers attached to transitions."""

    def __init__(
        self,
        props: Sequence[str],
        states: Sequence[RmState],
        initial: int,
        edges: Sequence[Edge],
        name: str = "",
    ) -> None:
        super().__init__(props, states, initial, edges, name)
        self._reward: np.ndarray | None = None
        self._reward_rows: list[list[float]] | None = None

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._transitions  # type: ignore[return-value]

    @property
    def reward_table(self) -> np.ndarray:
        """Dense edge-reward table indexed [interior state, assignment mask]."""
        if self._reward is None:
            raise NondeterministicMachine(f"machine {self.name!r} has not been validated")
        return self._reward

    def _compile(self, chosen: np.ndarray) -> None:
        super()._compile(chosen)
        self._reward = np.array(
            [[self._transitions[e].reward for e in row] for row in chosen],  # type: ignore[attr-defined]
            dtype=np.float64,
        ).reshape(self.n_interior, 1 << len(self.props))
        self._reward_rows = self._reward.tolist()

    def with_rewards(self, rewards: Sequence[float], name: str | None = None) -> SimpleRewardMachine:
        """Copy of this machine with identical structure and the given per-edge rewards."""
        edges = [
            Edge(e.source, e.guard, e.target, float(r)) for e, r in zip(self.edges, rewards, strict=True)
        ]
        m = SimpleRewardMachine(self.props, self.states, self.initial, edges, name or self.name)
        return validated(m)

    def __repr__(self) -> str:
        return (
            f"SimpleRewardMachine({self.name!r}, |P|={len(self.props)}, "
            f"|U|={self.n_interior}, |F|={len(self.states) - self.n_interior}, edges={len(self.edges)})"
        )


class RewardMachine(_Machine):
    """Reward machine that outputs an environment-reward function per interior state."""

    def __init__(
        self,
        props: Sequence[str],
        states: Sequence[RmState],
        initial: int,
        transitions: Sequence[Transition],
        state_reward: dict[int, RewardEvaluatorId],
        name: str = "",
    ) -> None:
        super().__init__(props, states, initial, transitions, name)
        missing = [u for u in self.interior if u not in state_reward]
        if missing or len(state_reward) != self.n_interior:
            raise ValueError("every interior state needs exactly one reward evaluator")
        self.state_reward = dict(state_reward)

    @property
    def transitions(self) -> tuple[Transition, ...]:
        return self._transitions

    def __repr__(self) -> str:
        return f"RewardMachine({self.name!r}, |P|={len(self.props)}, |U|={self.n_interior})"


Machine = Union[SimpleRewardMachine, RewardMachine]


# ── Validation ────────────────────────────────────────────────


def _predicate(f: Formula, bit: dict[str, int]) -> Callable[[int], bool]:
    if isinstance(f, Atom):
        b = bit[f.name]
        return lambda m: bool(m & b)
    if isinstance(f, Const):
        value = f.value
        return lambda m: value
    if isinstance(f, Not):
        inner = _predicate(f.arg, bit)
        return lambda m: not inner(m)
    left, right = _predicate(f.left, bit), _predicate(f.right, bit)
    if isinstance(f, And):
        return lambda m: left(m) and right(m)
    if isinstance(f, Or):
        return lambda m: left(m) or right(m)
    raise TypeError(f"not a formula: {f!r}")


def validate(m: Machine, max_props: int = MAX_PROPS) -> ValidationReport:
    """Check determinism and exhaustiveness by enumerating every assignment.

    On success the machine is compiled into dense lookup tables.
    """
    if len(m.props) > max_props:
        raise TooManyPropositions(f"|P|={len(m.props)} exceeds enumeration bound {max_props}")

    violations: list[Violation] = []
    transitions = m._transitions
    n_states = len(m.states)
    for i, t in enumerate(transitions):
        if not 0 <= t.target < n_states:
            violations.append(DanglingTarget(i, t.target))
        if 0 <= t.source < n_states and m.is_terminal(t.source):
            violations.append(TerminalOutEdge(t.source, i))
        if t.guard is not OTHERWISE:
            for name in dict.fromkeys(atoms(t.guard)):
                if name not in m._bit:
                    violations.append(UnknownAtom(i, name))
    if violations:
        return ValidationReport(tuple(violations))

    n_masks = 1 << len(m.props)
    chosen = np.zeros((m.n_interior, n_masks), dtype=np.int64)
    for u in m.interior:
        guarded: list[tuple[int, Callable[[int], bool]]] = []
        otherwise: list[int] = []
        for i, t in m.out_transitions(u):
            if t.guard is OTHERWISE:
                otherwise.append(i)
            else:
                guarded.append((i, _predicate(t.guard, m._bit)))
        if len(otherwise) > 1:
            violations.append(MultipleOtherwise(u))
        overlaps: set[tuple[int, int]] = set()
        gap_reported = False
        for mask in range(n_masks):
            hits = [i for i, pred in guarded if pred(mask)]
            if len(hits) > 1:
                for a in range(len(hits)):
                    for b in range(a + 1, len(hits)):
                        pair = (hits[a], hits[b])
                        if pair not in overlaps:
                            overlaps.add(pair)
                            violations.append(Overlap(u, pair[0], pair[1], m.assignment(mask)))
            if hits:
                chosen[u, mask] = hits[0]
            elif otherwise:
                chosen[u, mask] = otherwise[0]
            elif not gap_reported:
                gap_reported = True
                violations.append(Gap(u, m.assignment(mask)))

    report = ValidationReport(tuple(violations))
    if report.ok:
        m._compile(chosen)
        logger.debug("Validated %r", m)
    return report


def validated(m: Machine, max_props: int = MAX_PROPS) -> Machine:
    """Validate m and return it, raising InvalidMachine on any violation."""
    if m.validated:
        return m
    report = validate(m, max_props)
    if not report.ok:
        raise InvalidMachine(report)
    return m


# ── Stepping ──────────────────────────────────────────────────


def rm_step(m: SimpleRewardMachine, u: int, sigma: Collection[str]) -> tuple[int, float]:
    """Advance a simple machine by one truth assignment, returning (next state, reward)."""
    if m.is_terminal(u):
        raise SteppedTerminal(f"state {m.states[u].name!r} is terminal")
    if m._next_rows is not None:
        k = m.mask(sigma)
        return m._next_rows[u][k], m._reward_rows[u][k]  # type: ignore[index]
    edge = m._match(u, sigma)
    return edge.target, edge.reward  # type: ignore[attr-defined]


def general_step(m: RewardMachine, u: int, sigma: Collection[str]) -> int:
    """Advance a general machine; its reward comes from the evaluator of state u."""
    return m.next_state(u, sigma)


# ── Constructions ─────────────────────────────────────────────


def simple_to_general(m: SimpleRewardMachine, labelling_id: str) -> RewardMachine:
    """Equivalent machine whose state u outputs r(s,a,s') = δr(u, L(s,a,s'))."""
    validated(m)
    state_reward: dict[int, RewardEvaluatorId] = {}
    for u in m.interior:
        out = [e for _, e in m.out_transitions(u)]
        rewards = {e.reward for e in out}  # type: ignore[attr-defined]
        if len(rewards) == 1:
            state_reward[u] = RewardEvaluatorId.constant(rewards.pop())
        else:
            # guarded edges first, the otherwise edge last, mirroring the matching rule
            ordered = sorted(out, key=lambda e: e.guard is OTHERWISE)
            state_reward[u] = RewardEvaluatorId(
                "guarded",
                (labelling_id, tuple((e.guard, e.reward) for e in ordered)),  # type: ignore[attr-defined]
            )
    transitions = [Transition(e.source, e.guard, e.target) for e in m.edges]
    general = RewardMachine(m.props, m.states, m.initial, transitions, state_reward, name=m.name)
    return validated(general)


def from_markovian_reward(
    evaluator: RewardEvaluatorId,
    props: Sequence[str] = (),
    name: str = "markovian",
) -> RewardMachine:
    """One-state never-ending machine that emits evaluator's reward every step."""
    states = [RmState(0, "u0")]
    transitions = [Transition(0, OTHERWISE, 0)]
    return validated(RewardMachine(props, states, 0, transitions, {0: evaluator}, name=name))


@dataclass(frozen=True)
class TraceResult:
    final: int
    total_reward: float
    accepted: bool
    states: tuple[int, ...] = field(default=())
    rewards: tuple[float, ...] = field(default=())


def run_trace(m: SimpleRewardMachine, labels: Iterable[Collection[str]]) -> TraceResult:
    """Step m through labels, stopping at the first terminal state."""
    u = m.initial
    states = [u]
    rewards: list[float] = []
    accepted = False
    for sigma in labels:
        if m.is_terminal(u):
            break
        u, r = rm_step(m, u, sigma)
        states.append(u)
        rewards.append(r)
        if m.is_terminal(u) and r > 0:
            accepted = True
    return TraceResult(u, float(sum(rewards)), accepted, tuple(states), tuple(rewards))
