"""Abstract syntax for signal temporal logic formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Interval:
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or not (0.0 <= lo <= hi) or math.isinf(lo):
            raise ValueError(f"invalid time interval [{self.lower}, {self.upper}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.upper)

    def contains(self, dt: float) -> bool:
        return self.lower <= dt <= self.upper


UNBOUNDED = Interval(0.0, math.inf)


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Predicate:
    signal: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in (">", "<"):
            raise ValueError(f"unsupported comparison {self.op!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("predicate threshold must be finite")
        object.__setattr__(self, "threshold", float(self.threshold))


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"
    interval: Interval = UNBOUNDED


@dataclass(frozen=True)
class Always:
    arg: "Formula"
    interval: Interval = UNBOUNDED


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"
    interval: Interval = UNBOUNDED


Formula = Union[Top, Predicate, Not, And, Or, Eventually, Always, Until]


def children(f: Formula) -> tuple:
    if isinstance(f, (Not, Eventually, Always)):
        return (f.arg,)
    if isinstance(f, (And, Or, Until)):
        return (f.left, f.right)
    return ()


def walk(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def signals(f: Formula) -> set[str]:
    """Names of every signal referenced by a predicate in ``f``."""
    return {n.signal for n in walk(f) if isinstance(n, Predicate)}


def depth(f: Formula) -> int:
    kids = children(f)
    return 1 + max((depth(k) for k in kids), default=0)


# Convenience constructors, used by the scenario spec builders.
def F(arg: Formula, a: float = 0.0, b: float = math.inf) -> Eventually:
    return Eventually(arg, Interval(a, b))


def G(arg: Formula, a: float = 0.0, b: float = math.inf) -> Always:
    return Always(arg, Interval(a, b))


def gt(signal: str, c: float) -> Predicate:
    return Predicate(signal, ">", c)


def lt(signal: str, c: float) -> Predicate:
    return Predicate(signal, "<", c)
