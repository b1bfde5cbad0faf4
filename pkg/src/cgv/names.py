"""Globally unique names with user-facing display text.

Rewriting mints lots of fresh endpoints and binders; string gensym is
fragile, so every name carries a process-wide unique id. Display text is
only for parsing and printing. Two free occurrences parsed from the same
source text share one Name; binders always get fresh ones.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field


@dataclass(frozen=True, eq=True)
class Name:
    text: str
    uid: int = field(compare=True)

    def __repr__(self) -> str:
        return f"{self.text}#{self.uid}"

    def __str__(self) -> str:
        return self.text


class NameSupply:
    """Thread-safe fresh name source. One global instance is shared by the
    parser, the reduction engine and the translator so uids never collide."""

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def fresh(self, text: str = "a") -> Name:
        with self._lock:
            return Name(text, next(self._counter))

    def reset(self) -> None:
        with self._lock:
            self._counter = itertools.count(0)


SUPPLY = NameSupply()


def fresh(text: str = "a") -> Name:
    return SUPPLY.fresh(text)


def reset_supply() -> None:
    """Restart uid numbering. Used by the CLI so that identical invocations
    produce byte-identical output."""
    SUPPLY.reset()
