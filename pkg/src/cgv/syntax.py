"""Abstract syntax for the functional calculus: terms, runtime terms,
configurations with directed buffers, and the two type layers.

All values are immutable; every operation here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

from .names import Name, fresh

Label = str


# ---------------------------------------------------------------------------
# Types

class SessionType:
    pass


class FunType:
    pass


@dataclass(frozen=True)
class Out(SessionType):
    payload: FunType
    cont: SessionType


@dataclass(frozen=True)
class In(SessionType):
    payload: FunType
    cont: SessionType


@dataclass(frozen=True)
class Sel(SessionType):
    branches: tuple[tuple[Label, SessionType], ...]

    def branch_map(self) -> dict[Label, SessionType]:
        return dict(self.branches)


@dataclass(frozen=True)
class Bra(SessionType):
    branches: tuple[tuple[Label, SessionType], ...]

    def branch_map(self) -> dict[Label, SessionType]:
        return dict(self.branches)


@dataclass(frozen=True)
class EndType(SessionType):
    pass


END = EndType()


@dataclass(frozen=True)
class Prod(FunType):
    left: FunType
    right: FunType


@dataclass(frozen=True)
class Arrow(FunType):
    arg: FunType
    res: FunType


@dataclass(frozen=True)
class UnitType(FunType):
    pass


UNIT = UnitType()


@dataclass(frozen=True)
class Sess(FunType):
    session: SessionType


def sel(branches: dict[Label, SessionType]) -> Sel:
    return Sel(tuple(branches.items()))


def bra(branches: dict[Label, SessionType]) -> Bra:
    return Bra(tuple(branches.items()))


def dual_session(s: SessionType) -> SessionType:
    """Swap the two sides of a protocol. Only continuations of outputs and
    inputs are dualized, never the payload types."""
    if isinstance(s, Out):
        return In(s.payload, dual_session(s.cont))
    if isinstance(s, In):
        return Out(s.payload, dual_session(s.cont))
    if isinstance(s, Sel):
        return Bra(tuple((l, dual_session(t)) for l, t in s.branches))
    if isinstance(s, Bra):
        return Sel(tuple((l, dual_session(t)) for l, t in s.branches))
    if isinstance(s, EndType):
        return s
    raise TypeError(f"not a session type: {s!r}")


# ---------------------------------------------------------------------------
# Terms

Span = tuple[int, int]  # (line, col), 1-based


@dataclass(frozen=True)
class Term:
    span: Optional[Span] = field(default=None, compare=False, kw_only=True)


@dataclass(frozen=True)
class Var(Term):
    name: Name


@dataclass(frozen=True)
class Unit(Term):
    pass


@dataclass(frozen=True)
class Abs(Term):
    binder: Name
    body: Term
    ann: Optional[FunType] = None  # argument type; needed for synthesis


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Pair(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class LetPair(Term):
    binder1: Name
    binder2: Name
    scrutinee: Term
    body: Term


@dataclass(frozen=True)
class New(Term):
    ann: Optional[SessionType] = None  # protocol of the first endpoint


@dataclass(frozen=True)
class Spawn(Term):
    arg: Term


@dataclass(frozen=True)
class Send(Term):
    arg: Term


@dataclass(frozen=True)
class Recv(Term):
    arg: Term


@dataclass(frozen=True)
class Select(Term):
    label: Label
    arg: Term


@dataclass(frozen=True)
class Case(Term):
    scrutinee: Term
    branches: tuple[tuple[Label, Term], ...]

    def branch_map(self) -> dict[Label, Term]:
        return dict(self.branches)


@dataclass(frozen=True)
class ExplSub(Term):
    """Suspended substitution body{{subst/binder}}; runtime only."""
    body: Term
    subst: Term
    binder: Name


@dataclass(frozen=True)
class SendPrime(Term):
    """Intermediate send whose target may still reduce; runtime only."""
    payload: Term
    target: Term


# ---------------------------------------------------------------------------
# Configurations

MAIN = "main"
CHILD = "child"


def add_markers(a: str, b: str) -> str:
    """Marker addition; undefined (ValueError) on main + main."""
    if a == MAIN and b == MAIN:
        raise ValueError("two main threads")
    return MAIN if MAIN in (a, b) else CHILD


@dataclass(frozen=True)
class Message:
    pass


@dataclass(frozen=True)
class TermMsg(Message):
    term: Term


@dataclass(frozen=True)
class LabelMsg(Message):
    label: Label


@dataclass(frozen=True)
class Buffer:
    """Directed message queue, newest first. Writes prepend on the left
    (the x side), reads pop the rightmost element (the y side)."""
    messages: tuple[Message, ...] = ()

    def push(self, m: Message) -> "Buffer":
        return Buffer((m,) + self.messages)

    def pop(self) -> tuple[Message, "Buffer"]:
        if not self.messages:
            raise IndexError("empty buffer")
        return self.messages[-1], Buffer(self.messages[:-1])

    @property
    def empty(self) -> bool:
        return not self.messages

    def __len__(self) -> int:
        return len(self.messages)


@dataclass(frozen=True)
class Configuration:
    pass


@dataclass(frozen=True)
class Thread(Configuration):
    marker: str  # MAIN or CHILD
    term: Term


@dataclass(frozen=True)
class Par(Configuration):
    left: Configuration
    right: Configuration


@dataclass(frozen=True)
class Res(Configuration):
    """Buffered restriction (nu out [msgs] inp) body, binding both endpoints
    in the buffer and the body. ann is the outer protocol of the write end."""
    out_end: Name
    buffer: Buffer
    in_end: Name
    body: Configuration
    ann: Optional[SessionType] = None


@dataclass(frozen=True)
class ConfSub(Configuration):
    body: Configuration
    subst: Term
    binder: Name


Subject = Union[Term, Configuration]


# ---------------------------------------------------------------------------
# Free names, substitution, alpha equivalence

def is_source_term(t: Term) -> bool:
    """Source programs contain no runtime-only constructs."""
    if isinstance(t, (ExplSub, SendPrime)):
        return False
    return all(is_source_term(c) for c in _term_children(t))


def _term_children(t: Term) -> Iterator[Term]:
    if isinstance(t, Abs):
        yield t.body
    elif isinstance(t, App):
        yield t.fn
        yield t.arg
    elif isinstance(t, Pair):
        yield t.left
        yield t.right
    elif isinstance(t, LetPair):
        yield t.scrutinee
        yield t.body
    elif isinstance(t, (Spawn, Send, Recv, Select)):
        yield t.arg
    elif isinstance(t, Case):
        yield t.scrutinee
        for _, b in t.branches:
            yield b
    elif isinstance(t, ExplSub):
        yield t.body
        yield t.subst
    elif isinstance(t, SendPrime):
        yield t.payload
        yield t.target


def free_names(subject: Subject) -> set[Name]:
    if isinstance(subject, Term):
        return _fn_term(subject)
    return _fn_config(subject)


def _fn_term(t: Term) -> set[Name]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, (Unit, New)):
        return set()
    if isinstance(t, Abs):
        return _fn_term(t.body) - {t.binder}
    if isinstance(t, LetPair):
        return _fn_term(t.scrutinee) | (_fn_term(t.body) - {t.binder1, t.binder2})
    if isinstance(t, ExplSub):
        return (_fn_term(t.body) - {t.binder}) | _fn_term(t.subst)
    out: set[Name] = set()
    for c in _term_children(t):
        out |= _fn_term(c)
    return out


def _fn_msg(m: Message) -> set[Name]:
    return _fn_term(m.term) if isinstance(m, TermMsg) else set()


def _fn_config(c: Configuration) -> set[Name]:
    if isinstance(c, Thread):
        return _fn_term(c.term)
    if isinstance(c, Par):
        return _fn_config(c.left) | _fn_config(c.right)
    if isinstance(c, Res):
        out = _fn_config(c.body)
        for m in c.buffer.messages:
            out |= _fn_msg(m)
        return out - {c.out_end, c.in_end}
    if isinstance(c, ConfSub):
        return (_fn_config(c.body) - {c.binder}) | _fn_term(c.subst)
    raise TypeError(f"not a configuration: {c!r}")


def substitute(subject: Term, name: Name, replacement: Term) -> Term:
    """Capture-avoiding substitution subject{replacement/name}.

    Names are globally unique, so capture can only arise if a caller
    manufactures clashing uids by hand; binders are renamed in that case.
    """
    repl_free = _fn_term(replacement)
    return _subst(subject, name, replacement, repl_free)


def _rename_binder(binder: Name, body: Term) -> tuple[Name, Term]:
    nb = fresh(binder.text + "'")
    return nb, _subst(body, binder, Var(nb), {nb})


def _subst(t: Term, name: Name, repl: Term, repl_free: set[Name]) -> Term:
    if isinstance(t, Var):
        return repl if t.name == name else t
    if isinstance(t, (Unit, New)):
        return t
    if isinstance(t, Abs):
        binder, body = t.binder, t.body
        if binder == name:
            return t
        if binder in repl_free:
            binder, body = _rename_binder(binder, body)
        return Abs(binder, _subst(body, name, repl, repl_free), t.ann)
    if isinstance(t, App):
        return App(_subst(t.fn, name, repl, repl_free), _subst(t.arg, name, repl, repl_free))
    if isinstance(t, Pair):
        return Pair(_subst(t.left, name, repl, repl_free), _subst(t.right, name, repl, repl_free))
    if isinstance(t, LetPair):
        scrut = _subst(t.scrutinee, name, repl, repl_free)
        b1, b2, body = t.binder1, t.binder2, t.body
        if name in (b1, b2):
            return LetPair(b1, b2, scrut, body)
        if b1 in repl_free:
            b1, body = _rename_binder(b1, body)
        if b2 in repl_free:
            b2, body = _rename_binder(b2, body)
        return LetPair(b1, b2, scrut, _subst(body, name, repl, repl_free))
    if isinstance(t, Spawn):
        return Spawn(_subst(t.arg, name, repl, repl_free))
    if isinstance(t, Send):
        return Send(_subst(t.arg, name, repl, repl_free))
    if isinstance(t, Recv):
        return Recv(_subst(t.arg, name, repl, repl_free))
    if isinstance(t, Select):
        return Select(t.label, _subst(t.arg, name, repl, repl_free))
    if isinstance(t, Case):
        return Case(
            _subst(t.scrutinee, name, repl, repl_free),
            tuple((l, _subst(b, name, repl, repl_free)) for l, b in t.branches),
        )
    if isinstance(t, ExplSub):
        sub = _subst(t.subst, name, repl, repl_free)
        binder, body = t.binder, t.body
        if binder == name:
            return ExplSub(body, sub, binder)
        if binder in repl_free:
            binder, body = _rename_binder(binder, body)
        return ExplSub(_subst(body, name, repl, repl_free), sub, binder)
    if isinstance(t, SendPrime):
        return SendPrime(_subst(t.payload, name, repl, repl_free), _subst(t.target, name, repl, repl_free))
    raise TypeError(f"not a term: {t!r}")


def substitute_config(c: Configuration, name: Name, replacement: Term) -> Configuration:
    """Meta substitution lifted to configurations (used when a configuration
    level substitution dissolves)."""
    if isinstance(c, Thread):
        return Thread(c.marker, substitute(c.term, name, replacement))
    if isinstance(c, Par):
        return Par(substitute_config(c.left, name, replacement),
                   substitute_config(c.right, name, replacement))
    if isinstance(c, Res):
        if name in (c.out_end, c.in_end):
            return c
        msgs = tuple(
            TermMsg(substitute(m.term, name, replacement)) if isinstance(m, TermMsg) else m
            for m in c.buffer.messages
        )
        return Res(c.out_end, Buffer(msgs), c.in_end,
                   substitute_config(c.body, name, replacement), c.ann)
    if isinstance(c, ConfSub):
        sub = substitute(c.subst, name, replacement)
        if c.binder == name:
            return ConfSub(c.body, sub, c.binder)
        return ConfSub(substitute_config(c.body, name, replacement), sub, c.binder)
    raise TypeError(f"not a configuration: {c!r}")


# Alpha equivalence compares bound names positionally and free names by their
# display text: distinct parses of one source must be interchangeable.

class _AlphaEnv:
    __slots__ = ("left", "right", "depth")

    def __init__(self):
        self.left: dict[Name, int] = {}
        self.right: dict[Name, int] = {}
        self.depth = 0

    def bind(self, a: Name, b: Name) -> "_AlphaEnv":
        env = _AlphaEnv()
        env.left = dict(self.left)
        env.right = dict(self.right)
        env.left[a] = self.depth
        env.right[b] = self.depth
        env.depth = self.depth + 1
        return env

    def match(self, a: Name, b: Name) -> bool:
        la, lb = self.left.get(a), self.right.get(b)
        if la is None and lb is None:
            return a.text == b.text  # both free
        return la == lb


def alpha_eq(a: Subject, b: Subject) -> bool:
    if isinstance(a, Term) and isinstance(b, Term):
        return _alpha_term(a, b, _AlphaEnv())
    if isinstance(a, Configuration) and isinstance(b, Configuration):
        return _alpha_config(a, b, _AlphaEnv())
    return False


def _alpha_term(a: Term, b: Term, env: _AlphaEnv) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        return env.match(a.name, b.name)
    if isinstance(a, Unit):
        return True
    if isinstance(a, New):
        return a.ann == b.ann
    if isinstance(a, Abs):
        if a.ann != b.ann:
            return False
        return _alpha_term(a.body, b.body, env.bind(a.binder, b.binder))
    if isinstance(a, App):
        return _alpha_term(a.fn, b.fn, env) and _alpha_term(a.arg, b.arg, env)
    if isinstance(a, Pair):
        return _alpha_term(a.left, b.left, env) and _alpha_term(a.right, b.right, env)
    if isinstance(a, LetPair):
        if not _alpha_term(a.scrutinee, b.scrutinee, env):
            return False
        return _alpha_term(a.body, b.body, env.bind(a.binder1, b.binder1).bind(a.binder2, b.binder2))
    if isinstance(a, Spawn):
        return _alpha_term(a.arg, b.arg, env)
    if isinstance(a, Send):
        return _alpha_term(a.arg, b.arg, env)
    if isinstance(a, Recv):
        return _alpha_term(a.arg, b.arg, env)
    if isinstance(a, Select):
        return a.label == b.label and _alpha_term(a.arg, b.arg, env)
    if isinstance(a, Case):
        if not _alpha_term(a.scrutinee, b.scrutinee, env):
            return False
        if [l for l, _ in a.branches] != [l for l, _ in b.branches]:
            return False
        return all(_alpha_term(x, y, env) for (_, x), (_, y) in zip(a.branches, b.branches))
    if isinstance(a, ExplSub):
        if not _alpha_term(a.subst, b.subst, env):
            return False
        return _alpha_term(a.body, b.body, env.bind(a.binder, b.binder))
    if isinstance(a, SendPrime):
        return _alpha_term(a.payload, b.payload, env) and _alpha_term(a.target, b.target, env)
    raise TypeError(f"not a term: {a!r}")


def _alpha_config(a: Configuration, b: Configuration, env: _AlphaEnv) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Thread):
        return a.marker == b.marker and _alpha_term(a.term, b.term, env)
    if isinstance(a, Par):
        return _alpha_config(a.left, b.left, env) and _alpha_config(a.right, b.right, env)
    if isinstance(a, Res):
        if len(a.buffer) != len(b.buffer) or a.ann != b.ann:
            return False
        inner = env.bind(a.out_end, b.out_end).bind(a.in_end, b.in_end)
        for ma, mb in zip(a.buffer.messages, b.buffer.messages):
            if type(ma) is not type(mb):
                return False
            if isinstance(ma, LabelMsg):
                if ma.label != mb.label:
                    return False
            elif not _alpha_term(ma.term, mb.term, inner):
                return False
        return _alpha_config(a.body, b.body, inner)
    if isinstance(a, ConfSub):
        if not _alpha_term(a.subst, b.subst, env):
            return False
        return _alpha_config(a.body, b.body, env.bind(a.binder, b.binder))
    raise TypeError(f"not a configuration: {a!r}")


def refresh_term(t: Term) -> Term:
    """Alpha-rename every binder to a fresh name (used when a term is
    duplicated, e.g. into several exploration branches)."""
    if isinstance(t, Abs):
        nb = fresh(t.binder.text)
        return Abs(nb, refresh_term(substitute(t.body, t.binder, Var(nb))), t.ann)
    if isinstance(t, LetPair):
        n1, n2 = fresh(t.binder1.text), fresh(t.binder2.text)
        body = substitute(substitute(t.body, t.binder1, Var(n1)), t.binder2, Var(n2))
        return LetPair(n1, n2, refresh_term(t.scrutinee), refresh_term(body))
    if isinstance(t, ExplSub):
        nb = fresh(t.binder.text)
        return ExplSub(refresh_term(substitute(t.body, t.binder, Var(nb))),
                       refresh_term(t.subst), nb)
    if isinstance(t, Var):
        return t
    if isinstance(t, (Unit, New)):
        return t
    if isinstance(t, App):
        return App(refresh_term(t.fn), refresh_term(t.arg))
    if isinstance(t, Pair):
        return Pair(refresh_term(t.left), refresh_term(t.right))
    if isinstance(t, Spawn):
        return Spawn(refresh_term(t.arg))
    if isinstance(t, Send):
        return Send(refresh_term(t.arg))
    if isinstance(t, Recv):
        return Recv(refresh_term(t.arg))
    if isinstance(t, Select):
        return Select(t.label, refresh_term(t.arg))
    if isinstance(t, Case):
        return Case(refresh_term(t.scrutinee), tuple((l, refresh_term(b)) for l, b in t.branches))
    if isinstance(t, SendPrime):
        return SendPrime(refresh_term(t.payload), refresh_term(t.target))
    raise TypeError(f"not a term: {t!r}")
