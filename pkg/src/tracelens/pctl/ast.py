"""rPCTL syntax tree. Nodes are immutable; ``str(node)`` gives concrete syntax."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

INF = math.inf


# -- state formulas -------------------------------------------------------

@dataclass(frozen=True)
class TrueF:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Atom:
    label: str

    def __str__(self) -> str:
        return f'"{self.label}"'


@dataclass(frozen=True)
class Not:
    arg: "StateFormula"

    def __str__(self) -> str:
        if isinstance(self.arg, TrueF):
            return "false"
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And:
    left: "StateFormula"
    right: "StateFormula"

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Bound:
    """Either ``=?`` (``op is None``) or a comparison against ``value``."""

    op: Optional[str] = None
    value: float = 0.0

    @property
    def is_query(self) -> bool:
        return self.op is None

    def test(self, x: float) -> bool:
        return {"<": x < self.value, "<=": x <= self.value,
                ">": x > self.value, ">=": x >= self.value}[self.op]

    def __str__(self) -> str:
        return "=?" if self.op is None else f"{self.op}{self.value!r}"


# -- path formulas ------------------------------------------------------

@dataclass(frozen=True)
class Next:
    arg: "StateFormula"

    def __str__(self) -> str:
        return f"X {_wrap(self.arg)}"


@dataclass(frozen=True)
class Until:
    left: "StateFormula"
    right: "StateFormula"
    bound: float = INF  # step bound, INF when unbounded

    def __str__(self) -> str:
        b = "" if math.isinf(self.bound) else f"<={int(self.bound)}"
        if isinstance(self.left, TrueF):
            return f"F{b} {_wrap(self.right)}"
        return f"{_wrap(self.left)} U{b} {_wrap(self.right)}"


def Eventually(arg: "StateFormula", bound: float = INF) -> Until:
    return Until(TrueF(), arg, bound)


PathFormula = Union[Next, Until]


@dataclass(frozen=True)
class ProbQuery:
    bound: Bound
    path: PathFormula

    def __str__(self) -> str:
        return f"P{self.bound} [ {self.path} ]"


@dataclass(frozen=True)
class Cumulative:
    steps: int

    def __str__(self) -> str:
        return f"C<={self.steps}"


@dataclass(frozen=True)
class Reachability:
    target: "StateFormula"

    def __str__(self) -> str:
        return f"F {_wrap(self.target)}"


@dataclass(frozen=True)
class RewardQuery:
    structure: str
    kind: Union[Cumulative, Reachability]
    bound: Bound = Bound()

    def __str__(self) -> str:
        return f'R{{"{self.structure}"}}{self.bound} [ {self.kind} ]'


@dataclass(frozen=True)
class Filter:
    """``filter(state, query, condition)``; ``op`` is always ``state``."""

    query: Union[ProbQuery, RewardQuery, "StateFormula"]
    condition: "StateFormula"
    op: str = "state"

    def __str__(self) -> str:
        return f"filter({self.op}, {self.query}, {self.condition})"


StateFormula = Union[TrueF, Atom, Not, And, ProbQuery, RewardQuery]
Property = Union[StateFormula, Filter]


def _wrap(node) -> str:
    text = str(node)
    if isinstance(node, (TrueF, Atom, And)) or text == "false":
        return text
    if isinstance(node, Not):
        return text
    return f"({text})"
