from __future__ import annotations

from collections.abc import Collection, Iterator
from dataclasses import dataclass
from typing import Union

from . import RmError

TruthAssignment = frozenset[str]


class UnknownProposition(RmError):
    """Raised when a formula mentions a proposition outside the machine's alphabet."""


@dataclass(frozen=True, slots=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True, slots=True)
class Not:
    arg: Formula

    def __str__(self) -> str:
        return f"!{_wrap(self.arg, Not)}"


@dataclass(frozen=True, slots=True)
class And:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"{_wrap(self.left, And)} & {_wrap(self.right, And, right=True)}"


@dataclass(frozen=True, slots=True)
class Or:
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return f"{_wrap(self.left, Or)} | {_wrap(self.right, Or, right=True)}"


Formula = Union[Atom, Const, Not, And, Or]

# binding strength used by the printer; higher binds tighter
_PRECEDENCE = {Or: 1, And: 2, Not: 3, Atom: 4, Const: 4}


def _wrap(f: Formula, parent: type, right: bool = False) -> str:
    mine, theirs = _PRECEDENCE[type(f)], _PRECEDENCE[parent]
    # both binary operators associate left, so an equal-precedence right child needs parens
    if mine < theirs or (right and mine == theirs):
        return f"({f})"
    return str(f)


class Otherwise:
    """Guard marker that matches exactly when no guarded edge of the state does."""

    _instance: Otherwise | None = None

    def __new__(cls) -> Otherwise:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OTHERWISE"

    def __reduce__(self) -> str:
        return "OTHERWISE"


OTHERWISE = Otherwise()

Guard = Union[Formula, Otherwise]


def atoms(f: Formula) -> Iterator[str]:
    """Yield every proposition name mentioned in f (with repeats)."""
    stack: list[Formula] = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            yield node.name
        elif isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, (And, Or)):
            stack.append(node.right)
            stack.append(node.left)


def eval_formula(
    f: Formula,
    sigma: Collection[str],
    props: Collection[str] | None = None,
) -> bool:
    """Evaluate f under the truth assignment sigma.

    When props is given, every atom must belong to it.
    """
    if isinstance(f, Atom):
        if props is not None and f.name not in props:
            raise UnknownProposition(f"proposition {f.name!r} is not declared")
        return f.name in sigma
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not eval_formula(f.arg, sigma, props)
    if isinstance(f, And):
        # evaluate both sides so unknown atoms are reported regardless of short-circuiting
        left = eval_formula(f.left, sigma, props)
        right = eval_formula(f.right, sigma, props)
        return left and right
    if isinstance(f, Or):
        left = eval_formula(f.left, sigma, props)
        right = eval_formula(f.right, sigma, props)
        return left or right
    raise TypeError(f"not a formula: {f!r}")
