"""Structural congruence, redex enumeration and small-step reduction for
terms and configurations, with schedulers, exhaustive state exploration
and a bounded congruence-equivalence check.

The congruence relation is handled by a terminating, directed normalizer
rather than congruence-closure search. Normal forms are wrapper stacks: a
chain of restrictions and configuration-level substitutions (raised as
high as scoping permits and canonically ordered) over a flat, canonically
sorted multiset of threads. Buffer flushes happen inside the normalizer
(asynchronous outputs and buffered messages are the same thing, so moving
a send' into its buffer is not a reduction step); when a flush or a
receive is blocked because the redex sits under the body of an explicit
substitution, the substitution is extruded on demand, exactly the move
forced in the variable-capture hazard scenario.

Every rewrite asserts free-name preservation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional

from .names import Name, fresh
from . import syntax as S
from .pretty import canon_subject, print_config, print_term


class FreeNameViolation(RuntimeError):
    pass


def _check_fn_preserved(before_fns: set[Name], after, what: str) -> None:
    after_fns = S.free_names(after)
    if after_fns != before_fns:
        gained = {n.text for n in after_fns - before_fns}
        lost = {n.text for n in before_fns - after_fns}
        raise FreeNameViolation(
            f"{what} changed free names (gained {gained or '{}'}, lost {lost or '{}'})")


# ---------------------------------------------------------------------------
# Trace machinery

@dataclass
class TraceEvent:
    kind: str  # "step" or "congruence"
    rule: str
    path: str
    summary: str

    def render(self, index: int) -> str:
        return f"step {index} | {self.rule} | {self.path} | {self.summary}"

    def to_json(self, index: int) -> dict:
        return {"step": index, "kind": self.kind, "rule": self.rule,
                "path": self.path, "summary": self.summary}


@dataclass
class Trace:
    initial: object
    events: list[TraceEvent] = field(default_factory=list)
    final: object = None
    fuel_exhausted: bool = False

    def rules(self) -> list[str]:
        return [e.rule for e in self.events]

    def step_rules(self) -> list[str]:
        return [e.rule for e in self.events if e.kind == "step"]

    def render(self) -> str:
        lines = [e.render(i) for i, e in enumerate(self.events, 1)]
        if self.fuel_exhausted:
            lines.append("fuel exhausted")
        return "\n".join(lines)


def _summary(subject) -> str:
    text = print_term(subject) if isinstance(subject, S.Term) else print_config(subject)
    return text if len(text) <= 120 else text[:117] + "..."


# ---------------------------------------------------------------------------
# Term-level reduction contexts

# Child indices used in redex paths, by node type:
#   App: fn=0 arg=1 | Pair: 0 1 | LetPair: scrutinee=0 body=1
#   Spawn/Send/Recv/Select: arg=0 | Case: scrutinee=0 branches 1..
#   ExplSub: body=0 subst=1 | SendPrime: payload=0 target=1 | Abs: body=0

def _r_positions(t: S.Term, path: tuple = (), under_sub: bool = False
                 ) -> Iterator[tuple[S.Term, tuple, bool]]:
    """All reduction-context positions. under_sub marks positions below the
    body of an explicit substitution (excluded from the restricted contexts
    used by spawn, send' flushing and receives)."""
    yield t, path, under_sub
    if isinstance(t, S.App):
        yield from _r_positions(t.fn, path + (0,), under_sub)
    elif isinstance(t, (S.Spawn, S.Send, S.Recv, S.Select)):
        yield from _r_positions(t.arg, path + (0,), under_sub)
    elif isinstance(t, (S.LetPair, S.Case)):
        yield from _r_positions(t.scrutinee, path + (0,), under_sub)
    elif isinstance(t, S.ExplSub):
        yield from _r_positions(t.body, path + (0,), True)
        yield from _r_positions(t.subst, path + (1,), under_sub)
    elif isinstance(t, S.SendPrime):
        yield from _r_positions(t.target, path + (1,), under_sub)


def _replace_at(t: S.Term, path: tuple, new: S.Term) -> S.Term:
    if not path:
        return new
    i, rest = path[0], path[1:]
    if isinstance(t, S.App):
        return S.App(_replace_at(t.fn, rest, new), t.arg) if i == 0 \
            else S.App(t.fn, _replace_at(t.arg, rest, new))
    if isinstance(t, S.Spawn):
        return S.Spawn(_replace_at(t.arg, rest, new))
    if isinstance(t, S.Send):
        return S.Send(_replace_at(t.arg, rest, new))
    if isinstance(t, S.Recv):
        return S.Recv(_replace_at(t.arg, rest, new))
    if isinstance(t, S.Select):
        return S.Select(t.label, _replace_at(t.arg, rest, new))
    if isinstance(t, S.LetPair):
        if i == 0:
            return S.LetPair(t.binder1, t.binder2, _replace_at(t.scrutinee, rest, new), t.body)
        return S.LetPair(t.binder1, t.binder2, t.scrutinee, _replace_at(t.body, rest, new))
    if isinstance(t, S.Case):
        if i == 0:
            return S.Case(_replace_at(t.scrutinee, rest, new), t.branches)
        branches = list(t.branches)
        lbl, b = branches[i - 1]
        branches[i - 1] = (lbl, _replace_at(b, rest, new))
        return S.Case(t.scrutinee, tuple(branches))
    if isinstance(t, S.ExplSub):
        if i == 0:
            return S.ExplSub(_replace_at(t.body, rest, new), t.subst, t.binder)
        return S.ExplSub(t.body, _replace_at(t.subst, rest, new), t.binder)
    if isinstance(t, S.SendPrime):
        if i == 0:
            return S.SendPrime(_replace_at(t.payload, rest, new), t.target)
        return S.SendPrime(t.payload, _replace_at(t.target, rest, new))
    if isinstance(t, S.Abs) and i == 0:
        return S.Abs(t.binder, _replace_at(t.body, rest, new), t.ann)
    raise IndexError(f"bad path {path} at {type(t).__name__}")


def _unwrap_substs(t: S.Term) -> tuple[list[tuple[S.Term, Name]], S.Term]:
    """Peels a chain of explicit substitutions, outermost first."""
    chain: list[tuple[S.Term, Name]] = []
    while isinstance(t, S.ExplSub):
        chain.append((t.subst, t.binder))
        t = t.body
    return chain, t


def _rewrap(chain: list[tuple[S.Term, Name]], core: S.Term) -> S.Term:
    for sub, binder in reversed(chain):
        core = S.ExplSub(core, sub, binder)
    return core


def _occurrences(t: S.Term, name: Name) -> int:
    if isinstance(t, S.Var):
        return 1 if t.name == name else 0
    return sum(_occurrences(c, name) for c in S._term_children(t))


def _sole_occurrence_in_r_position(body: S.Term, name: Name) -> bool:
    if _occurrences(body, name) != 1:
        return False
    return any(isinstance(u, S.Var) and u.name == name for u, _, _ in _r_positions(body))


@dataclass
class TermRedex:
    rule: str
    path: tuple
    result: S.Term  # whole rewritten term
    pre_events: tuple[tuple[str, str], ...] = ()  # (rule, path) congruences

    def sort_key(self):
        # leftmost-outermost: lexicographic on the path, then a stable rule
        # order (E-SUBSTNAME before E-NAMESUBST at the same node)
        order = {"E-SUBSTNAME": 0, "E-NAMESUBST": 1, "E-LAM": 2, "E-PAIR": 3,
                 "E-SEND": 4}.get(self.rule, 5)
        return (self.path, order)


def term_redexes(t: S.Term, both_orders: bool = False) -> list[TermRedex]:
    """All term-level reduction steps, modulo the substitution-scope
    congruence (recorded as pre-events when it is used)."""
    out: list[TermRedex] = []
    pstr = lambda p: ".".join(map(str, p)) or "root"
    for u, path, _ in _r_positions(t):
        if isinstance(u, S.App):
            chain, core = _unwrap_substs(u.fn)
            if isinstance(core, S.Abs):
                new = _rewrap(chain, S.ExplSub(core.body, u.arg, core.binder))
                pre = tuple(("SC-SUBEXT", pstr(path)) for _ in chain)
                out.append(TermRedex("E-LAM", path, _replace_at(t, path, new), pre))
        elif isinstance(u, S.LetPair):
            chain, core = _unwrap_substs(u.scrutinee)
            if isinstance(core, S.Pair):
                pre = tuple(("SC-SUBEXT", pstr(path)) for _ in chain)
                first = _rewrap(chain, S.ExplSub(
                    S.ExplSub(u.body, core.left, u.binder1), core.right, u.binder2))
                out.append(TermRedex("E-PAIR", path, _replace_at(t, path, first), pre))
                if both_orders:
                    second = _rewrap(chain, S.ExplSub(
                        S.ExplSub(u.body, core.right, u.binder2), core.left, u.binder1))
                    out.append(TermRedex("E-PAIR", path, _replace_at(t, path, second), pre))
        elif isinstance(u, S.Send):
            chain, core = _unwrap_substs(u.arg)
            if isinstance(core, S.Pair):
                new = _rewrap(chain, S.SendPrime(core.left, core.right))
                pre = tuple(("SC-SUBEXT", pstr(path)) for _ in chain)
                out.append(TermRedex("E-SEND", path, _replace_at(t, path, new), pre))
        elif isinstance(u, S.ExplSub):
            if isinstance(u.subst, S.Var):
                new = S.substitute(u.body, u.binder, u.subst)
                out.append(TermRedex("E-SUBSTNAME", path, _replace_at(t, path, new)))
            if isinstance(u.body, S.Var) and u.body.name == u.binder:
                out.append(TermRedex("E-NAMESUBST", path, _replace_at(t, path, u.subst)))
            elif _sole_occurrence_in_r_position(u.body, u.binder):
                # push the substitution down to the occurrence, then dissolve
                new = S.substitute(u.body, u.binder, u.subst)
                out.append(TermRedex("E-NAMESUBST", path, _replace_at(t, path, new),
                                     (("SC-SUBEXT", pstr(path)),)))
    return out


def run_term(term: S.Term, scheduler: str = "det", fuel: int = 1000,
             seed: int = 0, both_orders: bool = False) -> Trace:
    """Small-step evaluation of a bare term (the functional fragment)."""
    rng = random.Random(seed)
    trace = Trace(term)
    fns = S.free_names(term)
    current = term
    steps = 0
    while True:
        redexes = term_redexes(current, both_orders)
        if not redexes:
            break
        if steps >= fuel:
            trace.fuel_exhausted = True
            break
        if scheduler == "det":
            chosen = min(redexes, key=TermRedex.sort_key)
        else:
            chosen = rng.choice(sorted(redexes, key=TermRedex.sort_key))
        for rule, p in chosen.pre_events:
            trace.events.append(TraceEvent("congruence", rule, p, _summary(current)))
        _check_fn_preserved(fns, chosen.result, chosen.rule)
        trace.events.append(TraceEvent(
            "step", chosen.rule, ".".join(map(str, chosen.path)) or "root",
            _summary(chosen.result)))
        current = chosen.result
        steps += 1
    trace.final = current
    return trace


# ---------------------------------------------------------------------------
# Wrapper-stack view of configurations

@dataclass
class ResW:
    out_end: Name
    buffer: S.Buffer
    in_end: Name
    ann: Optional[S.SessionType]

    @property
    def binders(self) -> set[Name]:
        return {self.out_end, self.in_end}

    def content_fns(self) -> set[Name]:
        out: set[Name] = set()
        for m in self.buffer.messages:
            if isinstance(m, S.TermMsg):
                out |= S.free_names(m.term)
        return out

    def key(self) -> str:
        probe = S.Res(self.out_end, self.buffer, self.in_end,
                      S.Thread(S.CHILD, S.Unit()), self.ann)
        return "R" + canon_subject(probe)


@dataclass
class SubW:
    subst: S.Term
    binder: Name

    @property
    def binders(self) -> set[Name]:
        return {self.binder}

    def content_fns(self) -> set[Name]:
        return S.free_names(self.subst)

    def key(self) -> str:
        probe = S.ConfSub(S.Thread(S.CHILD, S.Unit()), self.subst, self.binder)
        return "S" + canon_subject(probe)


Wrapper = object  # ResW | SubW


@dataclass
class Stack:
    wrappers: list  # outermost first
    leaves: list[S.Thread]

    def rebuild(self) -> S.Configuration:
        body: S.Configuration
        if not self.leaves:
            body = S.Thread(S.CHILD, S.Unit())
        else:
            body = self.leaves[-1]
            for leaf in reversed(self.leaves[:-1]):
                body = S.Par(leaf, body)
        for w in reversed(self.wrappers):
            if isinstance(w, ResW):
                body = S.Res(w.out_end, w.buffer, w.in_end, body, w.ann)
            else:
                body = S.ConfSub(body, w.subst, w.binder)
        return body


def _gather(c: S.Configuration) -> Stack:
    """Flattens a configuration into a wrapper stack: restrictions and
    configuration substitutions rise out of parallel compositions (scope
    widening is harmless with globally unique names) and parallel leaves are
    collected into one list."""
    if isinstance(c, S.Thread):
        return Stack([], [c])
    if isinstance(c, S.Par):
        left = _gather(c.left)
        right = _gather(c.right)
        return Stack(left.wrappers + right.wrappers, left.leaves + right.leaves)
    if isinstance(c, S.Res):
        inner = _gather(c.body)
        return Stack([ResW(c.out_end, c.buffer, c.in_end, c.ann)] + inner.wrappers,
                     inner.leaves)
    if isinstance(c, S.ConfSub):
        inner = _gather(c.body)
        return Stack([SubW(c.subst, c.binder)] + inner.wrappers, inner.leaves)
    raise TypeError(f"not a configuration: {c!r}")


def _can_swap(outer, inner) -> bool:
    """True if wrapper `inner` may move directly above `outer` (adjacent
    exchange): neither may bind names free in the other's content."""
    return not (outer.binders & inner.content_fns()) and \
        not (inner.binders & outer.content_fns())


def _sort_wrappers(wrappers: list) -> list:
    # bounded bubble sort by canonical key, swapping only when scoping allows
    ws = list(wrappers)
    for _ in range(len(ws)):
        moved = False
        for i in range(len(ws) - 1):
            if ws[i].key() > ws[i + 1].key() and _can_swap(ws[i], ws[i + 1]):
                ws[i], ws[i + 1] = ws[i + 1], ws[i]
                moved = True
        if not moved:
            break
    return ws


# -- searching threads for restricted-context occurrences

@dataclass
class TermSite:
    """An occurrence of interest inside a term: where it is, and the explicit
    substitutions whose body it sits under (innermost last)."""
    node: S.Term
    path: tuple
    blockers: tuple[tuple[tuple, S.Term, Name], ...]  # (subst node path, subst, binder)


def _find_sites(t: S.Term, want: Callable[[S.Term], bool]) -> list[TermSite]:
    sites: list[TermSite] = []

    def walk(u: S.Term, path: tuple, blockers: tuple):
        if want(u):
            sites.append(TermSite(u, path, blockers))
        if isinstance(u, S.App):
            walk(u.fn, path + (0,), blockers)
        elif isinstance(u, (S.Spawn, S.Send, S.Recv, S.Select)):
            walk(u.arg, path + (0,), blockers)
        elif isinstance(u, (S.LetPair, S.Case)):
            walk(u.scrutinee, path + (0,), blockers)
        elif isinstance(u, S.ExplSub):
            walk(u.body, path + (0,), blockers + ((path, u.subst, u.binder),))
            walk(u.subst, path + (1,), blockers)
        elif isinstance(u, S.SendPrime):
            walk(u.target, path + (1,), blockers)

    walk(t, (), ())
    return sites


def _remove_blockers(t: S.Term, site: TermSite) -> S.Term:
    """Deletes the blocking substitution nodes (splicing their bodies) so the
    substitutions can be re-attached as configuration-level wrappers.
    Innermost first, so outer paths stay valid."""
    for sub_path, _, _ in sorted(site.blockers, key=lambda b: -len(b[0])):
        node = t
        for i in sub_path:
            node = _child_at(node, i)
        assert isinstance(node, S.ExplSub)
        t = _replace_at(t, sub_path, node.body)
    return t


def _child_at(t: S.Term, i: int) -> S.Term:
    if isinstance(t, S.App):
        return (t.fn, t.arg)[i]
    if isinstance(t, (S.Spawn, S.Send, S.Recv, S.Select)):
        return t.arg
    if isinstance(t, (S.LetPair, S.Case)):
        if i == 0:
            return t.scrutinee
        if isinstance(t, S.Case):
            return t.branches[i - 1][1]
        return t.body
    if isinstance(t, S.ExplSub):
        return (t.body, t.subst)[i]
    if isinstance(t, S.SendPrime):
        return (t.payload, t.target)[i]
    if isinstance(t, S.Abs):
        return t.body
    raise IndexError(i)


def _site_path_after_blocker_removal(site: TermSite) -> tuple:
    """Path of the site once its blocking substitution nodes are spliced out
    (each removed node drops one '0' body-step from the path)."""
    drop = {b[0] for b in site.blockers}
    path = []
    prefix: tuple = ()
    for i in site.path:
        if prefix in drop and i == 0:
            prefix = prefix + (i,)
            continue  # this step entered the removed substitution's body
        prefix = prefix + (i,)
        path.append(i)
    return tuple(path)


# ---------------------------------------------------------------------------
# The congruence normalizer

def congruence_normalize(config: S.Configuration, loose_contexts: bool = False,
                         record: Optional[list[TraceEvent]] = None) -> S.Configuration:
    """Directed normal form under the configuration congruence: buffers
    flushed (extruding substitutions when forced to), finished child threads
    and closed empty buffers collected, parallel components flattened and
    canonically sorted, wrappers raised and canonically ordered. The result
    is congruent to the input."""
    fns = S.free_names(config)
    stack = _gather(config)
    for _ in range(1000):
        if not (_flush_pass(stack, loose_contexts, record)
                or _push_in_pass(stack, record)
                or _gc_pass(stack, record)):
            break
    else:
        raise RuntimeError("normalizer did not terminate")
    stack.wrappers = _sort_wrappers(stack.wrappers)
    stack.leaves.sort(key=canon_subject)
    result = stack.rebuild()
    _check_fn_preserved(fns, result, "congruence normalization")
    return result


def _emit(record, rule: str, path: str, subject) -> None:
    if record is not None:
        record.append(TraceEvent("congruence", rule, path, _summary(subject)))


def _gc_pass(stack: Stack, record) -> bool:
    changed = False
    # SC-PARNIL: drop finished child threads (keep one leaf so the
    # configuration stays well formed)
    i = 0
    while len(stack.leaves) > 1 and i < len(stack.leaves):
        leaf = stack.leaves[i]
        if leaf.marker == S.CHILD and isinstance(leaf.term, S.Unit):
            del stack.leaves[i]
            _emit(record, "SC-PARNIL", f"leaf{i}", stack.rebuild())
            changed = True
        else:
            i += 1
    # SC-RESNIL: garbage-collect closed empty buffers
    i = 0
    while i < len(stack.wrappers):
        w = stack.wrappers[i]
        if isinstance(w, ResW) and w.buffer.empty:
            below = Stack(stack.wrappers[i + 1:], stack.leaves).rebuild()
            if not (w.binders & S.free_names(below)):
                del stack.wrappers[i]
                _emit(record, "SC-RESNIL", f"wrapper{i}", stack.rebuild())
                changed = True
                continue
        i += 1
    return changed


def _push_in_pass(stack: Stack, record) -> bool:
    """Sinks configuration-level substitutions back into a thread whenever
    their scope allows it: the bound name must not sit inside a buffer or
    another substituted term, and must occur in at most one thread. At term
    level the substitution can then dissolve through the term rules (or be
    flushed from a substituted-term position). Innermost wrappers first, so
    chains of substitutions sink in dependency order."""
    changed = False
    j = len(stack.wrappers) - 1
    while j >= 0:
        w = stack.wrappers[j]
        if not isinstance(w, SubW):
            j -= 1
            continue
        binder = w.binder
        blocked = False
        for v in stack.wrappers[j + 1:]:
            if binder in v.content_fns():
                blocked = True
                break
        if blocked:
            j -= 1
            continue
        occ = [i for i, leaf in enumerate(stack.leaves)
               if binder in S.free_names(leaf.term)]
        if len(occ) > 1:
            j -= 1
            continue
        target = occ[0] if occ else 0
        leaf = stack.leaves[target]
        stack.leaves[target] = S.Thread(leaf.marker,
                                        S.ExplSub(leaf.term, w.subst, binder))
        del stack.wrappers[j]
        _emit(record, "SC-CONFSUBST", f"leaf{target}", stack.rebuild())
        changed = True
        j -= 1
    return changed


def _flush_pass(stack: Stack, loose: bool, record) -> bool:
    """Performs one buffer flush if any is enabled; returns True if so."""
    for wi, w in enumerate(stack.wrappers):
        if not isinstance(w, ResW):
            continue
        if _try_flush(stack, wi, w.out_end, loose, record, swapped=False):
            return True
        if w.buffer.empty and _try_flush(stack, wi, w.in_end, loose, record,
                                         swapped=True):
            return True
    return False


def _flush_want(target: Name):
    def want(u: S.Term) -> bool:
        if isinstance(u, S.SendPrime) and isinstance(u.target, S.Var) \
                and u.target.name == target:
            return True
        if isinstance(u, S.Select) and isinstance(u.arg, S.Var) and u.arg.name == target:
            return True
        return False
    return want


def _try_flush(stack: Stack, wi: int, target: Name, loose: bool, record,
               swapped: bool) -> bool:
    w = stack.wrappers[wi]
    crossed_below: set[Name] = set()
    for v in stack.wrappers[wi + 1:]:
        crossed_below |= v.binders

    # candidate occurrences live in leaves or in the substituted terms of
    # deeper configuration substitutions (the restricted thread context
    # admits holes there)
    holders: list[tuple[str, int, S.Term]] = []
    for vj, v in enumerate(stack.wrappers):
        if vj > wi and isinstance(v, SubW):
            holders.append(("wrapper", vj, v.subst))
    for li, leaf in enumerate(stack.leaves):
        holders.append(("leaf", li, leaf.term))

    for kind, idx, term in holders:
        for site in _find_sites(term, _flush_want(target)):
            is_select = isinstance(site.node, S.Select)
            # labels carry no names, so the unrestricted reading of the
            # select flush is capture-safe; send' payloads are not
            blockers = () if (is_select and loose) else site.blockers
            if blockers and kind == "wrapper":
                continue  # nested substitutions inside a substituted term: leave it
            if kind == "leaf":
                crossing = crossed_below
            else:
                crossing = set()
                for v in stack.wrappers[wi + 1:idx]:
                    crossing |= v.binders
            payload_fns = set() if is_select else S.free_names(site.node.payload)
            if payload_fns & crossing:
                # names in the message are bound below the target restriction;
                # try to commute their binding wrappers above it
                holder_obj = stack.wrappers[idx] if kind == "wrapper" else None
                wi2 = _raise_wrappers(stack, wi, payload_fns, record)
                if wi2 is None:
                    continue
                wi = wi2
                w = stack.wrappers[wi]
                if holder_obj is not None:
                    idx = next(i for i, v in enumerate(stack.wrappers)
                               if v is holder_obj)
                crossed_below = set()
                for v in stack.wrappers[wi + 1:]:
                    crossed_below |= v.binders
                if kind == "leaf":
                    crossing = crossed_below
                else:
                    crossing = set()
                    for v in stack.wrappers[wi + 1:idx]:
                        crossing |= v.binders
                if payload_fns & crossing:
                    return False  # raise was insufficient; give up this pass
            # extrusion carries each blocking substitution above this
            # restriction; its term must not mention anything bound below
            if any(S.free_names(sub) & (crossed_below | w.binders)
                   for _, sub, _b in blockers):
                continue
            _do_flush(stack, wi, kind, idx, site, blockers, swapped, record)
            return True
    return False


def _raise_wrappers(stack: Stack, wi: int, needed_names: set[Name],
                    record) -> Optional[int]:
    """Moves every wrapper below position wi that binds one of needed_names
    (plus, transitively, the binders of their own content) to just above wi.
    Returns the new index of the target restriction, or None when some move
    is not scope-legal. Restriction exchange and scope extrusion justify
    each move."""
    required = set(needed_names)
    while True:
        picked = [k for k in range(wi + 1, len(stack.wrappers))
                  if stack.wrappers[k].binders & required]
        grown = required | set().union(
            *[stack.wrappers[k].content_fns() for k in picked]) if picked else required
        if grown == required:
            break
        required = grown
    picked = [k for k in range(wi + 1, len(stack.wrappers))
              if stack.wrappers[k].binders & required]
    if not picked:
        return wi
    moving = [stack.wrappers[k] for k in picked]
    crossed = [stack.wrappers[k] for k in range(wi, max(picked) + 1) if k not in picked]
    for m in moving:
        for c in crossed:
            if not _can_swap(c, m):
                return None
    for k in reversed(picked):
        del stack.wrappers[k]
    for offset, m in enumerate(moving):
        stack.wrappers.insert(wi + offset, m)
        _emit(record, "SC-RESCOMM" if isinstance(m, ResW) else "SC-CONFSUBSTEXT",
              f"wrapper{wi + offset}", stack.rebuild())
    return wi + len(moving)


def _do_flush(stack: Stack, wi: int, kind: str, idx: int, site: TermSite,
              blockers, swapped: bool, record) -> None:
    w = stack.wrappers[wi]
    assert isinstance(w, ResW)
    if swapped:
        w = ResW(w.in_end, w.buffer, w.out_end,
                 None if w.ann is None else S.dual_session(w.ann))
        stack.wrappers[wi] = w
        _emit(record, "SC-RESSWAP", f"wrapper{wi}", stack.rebuild())

    node = site.node
    if isinstance(node, S.SendPrime):
        msg: S.Message = S.TermMsg(node.payload)
        rule = "SC-SEND'"
    else:
        msg = S.LabelMsg(node.label)
        rule = "SC-SELECT"

    term = stack.leaves[idx].term if kind == "leaf" else stack.wrappers[idx].subst
    if blockers:
        # hoist each blocking substitution to the term root (one recorded
        # scope extrusion per non-root blocker), lift it to configuration
        # level, and later reinsert it above the restriction
        term = _remove_blockers(term, site)
        path = _site_path_after_blocker_removal(site)
        for bpath, _, _ in blockers:
            if bpath:  # already at the root otherwise
                _emit(record, "SC-SUBEXT", f"leaf{idx}", stack.rebuild())
            _emit(record, "SC-CONFSUBST", f"leaf{idx}", stack.rebuild())
    else:
        path = site.path

    term = _replace_at(term, path, S.Var(w.out_end))
    if kind == "leaf":
        stack.leaves[idx] = S.Thread(stack.leaves[idx].marker, term)
    else:
        stack.wrappers[idx] = SubW(term, stack.wrappers[idx].binder)

    if blockers:
        # outermost blocker becomes the outermost new wrapper
        new_wrappers = [SubW(sub, binder) for (_, sub, binder) in blockers]
        for offset, nw in enumerate(new_wrappers):
            stack.wrappers.insert(wi + offset, nw)
            _emit(record, "SC-CONFSUBSTEXT", f"wrapper{wi + offset}", stack.rebuild())
        wi += len(new_wrappers)
        w = stack.wrappers[wi]

    assert isinstance(w, ResW)
    stack.wrappers[wi] = ResW(w.out_end, w.buffer.push(msg), w.in_end, w.ann)
    _emit(record, rule, f"wrapper{wi}", stack.rebuild())


# ---------------------------------------------------------------------------
# Redex enumeration for configurations

@dataclass
class Step:
    rule: str
    path: str
    result: S.Configuration
    pre_events: tuple[TraceEvent, ...] = ()
    key: tuple = ()
    info: dict = field(default_factory=dict)


def _holder_term(stack: Stack, kind: str, idx: int) -> S.Term:
    return stack.leaves[idx].term if kind == "leaf" else stack.wrappers[idx].subst


def _with_holder_term(stack: Stack, kind: str, idx: int, term: S.Term,
                      extra_leaves=(), extruded=(), wrap_leaf=None) -> S.Configuration:
    """Rebuilds the whole configuration with one holder's term replaced.
    extruded substitutions are appended innermost (directly above the
    leaves); wrap_leaf optionally wraps the updated leaf itself."""
    wrappers = list(stack.wrappers)
    leaves = list(stack.leaves)
    if kind == "leaf":
        leaf: S.Configuration = S.Thread(leaves[idx].marker, term)
        if wrap_leaf is not None:
            leaf = wrap_leaf(leaf)
        leaves[idx] = leaf
    else:
        wrappers[idx] = SubW(term, wrappers[idx].binder)
    for sub, binder in extruded:
        wrappers.append(SubW(sub, binder))
    leaves.extend(extra_leaves)
    return Stack(wrappers, leaves).rebuild()


def _extrusion_events(kind: str, idx: int, blockers) -> tuple[TraceEvent, ...]:
    events = []
    for bpath, _, _ in blockers:
        if bpath:
            events.append(TraceEvent("congruence", "SC-SUBEXT", f"{kind}{idx}", ""))
        events.append(TraceEvent("congruence", "SC-CONFSUBST", f"{kind}{idx}", ""))
    return tuple(events)


_RULE_RANK = {"E-SUBSTNAME": 0, "E-NAMESUBST": 1, "E-LAM": 2, "E-PAIR": 3,
              "E-SEND": 4, "E-NEW": 5, "E-SPAWN": 6, "E-RECV": 7, "E-CASE": 8}


def enumerate_steps(config: S.Configuration, both_orders: bool = False,
                    loose_contexts: bool = False) -> list[Step]:
    """Every single reduction step available from a congruence-normalized
    configuration, deterministically ordered (outermost first within each
    thread, threads in canonical order)."""
    fns = S.free_names(config)
    stack = _gather(config)
    steps: list[Step] = []

    holders: list[tuple[str, int]] = []
    for j, w in enumerate(stack.wrappers):
        if isinstance(w, SubW):
            holders.append(("wrapper", j))
    for i in range(len(stack.leaves)):
        holders.append(("leaf", i))

    def rank(kind: str, idx: int) -> tuple:
        return (0, idx) if kind == "wrapper" else (1, idx)

    # term-level redexes, lifted pointwise
    for kind, idx in holders:
        term = _holder_term(stack, kind, idx)
        for red in term_redexes(term, both_orders):
            result = _with_holder_term(stack, kind, idx, red.result)
            pre = tuple(TraceEvent("congruence", r, f"{kind}{idx}/{p}", "")
                        for r, p in red.pre_events)
            steps.append(Step(red.rule, f"{kind}{idx}/" + (".".join(map(str, red.path)) or "root"),
                              result, pre,
                              key=rank(kind, idx) + (red.path, _RULE_RANK.get(red.rule, 9))))

    # channel creation: the new restriction wraps the whole thread (or the
    # whole substitution cluster when the redex sits in a substituted term)
    for kind, idx in holders:
        term = _holder_term(stack, kind, idx)
        for u, path, _ in _r_positions(term):
            if isinstance(u, S.New):
                x = fresh("x")
                y = fresh("y")
                new_term = _replace_at(term, path, S.Pair(S.Var(x), S.Var(y)))
                if kind == "leaf":
                    result = _with_holder_term(
                        stack, kind, idx, new_term,
                        wrap_leaf=lambda leaf: S.Res(x, S.Buffer(), y, leaf, u.ann))
                else:
                    wrappers = list(stack.wrappers)
                    wrappers[idx] = SubW(new_term, wrappers[idx].binder)
                    wrappers.insert(idx, ResW(x, S.Buffer(), y, u.ann))
                    result = Stack(wrappers, list(stack.leaves)).rebuild()
                steps.append(Step("E-NEW", f"{kind}{idx}/" + (".".join(map(str, path)) or "root"),
                                  result,
                                  key=rank(kind, idx) + (path, _RULE_RANK["E-NEW"]),
                                  info={"endpoints": (x, y)}))

    # spawning: needs a literal pair; substitutions around the pair or above
    # the redex are extruded to configuration level first
    for kind, idx in holders:
        term = _holder_term(stack, kind, idx)
        for site in _find_sites(term, lambda u: isinstance(u, S.Spawn)):
            chain, core = _unwrap_substs(site.node.arg)
            if not isinstance(core, S.Pair):
                continue
            chain_blockers = tuple(
                (site.path + (0,) + (0,) * k, sub, binder)
                for k, (sub, binder) in enumerate(chain))
            blockers = site.blockers + chain_blockers
            if blockers and kind == "wrapper":
                continue
            site2 = TermSite(site.node, site.path, blockers)
            stripped = _remove_blockers(term, site2)
            spath = _site_path_after_blocker_removal(site2)
            # after splicing, the argument of the spawn at spath is the pair
            new_term = _replace_at(stripped, spath, core.right)
            result = _with_holder_term(
                stack, kind, idx, new_term,
                extra_leaves=[S.Thread(S.CHILD, core.left)],
                extruded=[(sub, binder) for _, sub, binder in blockers])
            steps.append(Step("E-SPAWN", f"{kind}{idx}/" + (".".join(map(str, site.path)) or "root"),
                              result, _extrusion_events(kind, idx, blockers),
                              key=rank(kind, idx) + (site.path, _RULE_RANK["E-SPAWN"])))

    # receives and branches on buffered messages
    for wi, w in enumerate(stack.wrappers):
        if not isinstance(w, ResW) or w.buffer.empty:
            continue
        oldest = w.buffer.messages[-1]
        y = w.in_end
        if isinstance(oldest, S.TermMsg):
            want = lambda u: isinstance(u, S.Recv) and isinstance(u.arg, S.Var) \
                and u.arg.name == y
            rule = "E-RECV"
        else:
            want = lambda u: isinstance(u, S.Case) and isinstance(u.scrutinee, S.Var) \
                and u.scrutinee.name == y
            rule = "E-CASE"
        for kind, idx in holders:
            term = _holder_term(stack, kind, idx)
            for site in _find_sites(term, want):
                blockers = site.blockers
                if rule == "E-CASE" and loose_contexts:
                    blockers = ()  # nothing moves into the context; capture-safe
                if blockers and kind == "wrapper":
                    continue
                if rule == "E-CASE":
                    bm = site.node.branch_map()
                    if oldest.label not in bm:
                        continue
                site2 = TermSite(site.node, site.path, blockers)
                stripped = _remove_blockers(term, site2) if blockers else term
                spath = _site_path_after_blocker_removal(site2) if blockers else site.path
                _, new_buffer = w.buffer.pop()
                if rule == "E-RECV":
                    repl: S.Term = S.Pair(oldest.term, S.Var(y))
                    new_ann = w.ann.cont if isinstance(w.ann, S.Out) else None
                else:
                    repl = S.App(bm[oldest.label], S.Var(y))
                    new_ann = w.ann.branch_map().get(oldest.label) \
                        if isinstance(w.ann, S.Sel) else None
                new_term = _replace_at(stripped, spath, repl)
                wrappers = list(stack.wrappers)
                wrappers[wi] = ResW(w.out_end, new_buffer, y, new_ann)
                tmp = Stack(wrappers, list(stack.leaves))
                result = _with_holder_term(
                    tmp, kind, idx, new_term,
                    extruded=[(sub, binder) for _, sub, binder in blockers])
                steps.append(Step(rule, f"{kind}{idx}/" + (".".join(map(str, site.path)) or "root"),
                                  result, _extrusion_events(kind, idx, blockers),
                                  key=rank(kind, idx) + (site.path, _RULE_RANK[rule])))

    # dissolving configuration-level substitutions
    for j, w in enumerate(stack.wrappers):
        if not isinstance(w, SubW):
            continue
        steps.extend(_confsub_steps(stack, j, w))

    for s in steps:
        _check_fn_preserved(fns, s.result, s.rule)
    steps.sort(key=lambda s: s.key)
    return steps


def _confsub_steps(stack: Stack, j: int, w: SubW) -> list[Step]:
    """A configuration substitution dissolves through the term-level rules
    once pushed back into a thread; that is only derivable when the bound
    name does not occur in any buffer and occurs in at most one thread."""
    binder = w.binder
    for v in stack.wrappers[j + 1:]:
        if isinstance(v, ResW):
            if binder in v.content_fns():
                return []  # bound inside a buffer: cannot push the scope in
        elif binder in S.free_names(v.subst):
            return []  # occurs in another substituted term: leave it nested
    occ_leaves = [i for i, leaf in enumerate(stack.leaves)
                  if binder in S.free_names(leaf.term)]
    if len(occ_leaves) > 1:
        return []
    pre = (TraceEvent("congruence", "SC-CONFSUBST", f"wrapper{j}", ""),)
    out: list[Step] = []
    if isinstance(w.subst, S.Var):
        wrappers = stack.wrappers[:j] + stack.wrappers[j + 1:]
        leaves = list(stack.leaves)
        if occ_leaves:
            i = occ_leaves[0]
            leaves[i] = S.Thread(leaves[i].marker,
                                 S.substitute(leaves[i].term, binder, w.subst))
        out.append(Step("E-SUBSTNAME", f"wrapper{j}",
                        Stack(wrappers, leaves).rebuild(), pre,
                        key=(0, j, (), _RULE_RANK["E-SUBSTNAME"])))
    elif occ_leaves:
        i = occ_leaves[0]
        term = stack.leaves[i].term
        if _sole_occurrence_in_r_position(term, binder):
            wrappers = stack.wrappers[:j] + stack.wrappers[j + 1:]
            leaves = list(stack.leaves)
            leaves[i] = S.Thread(leaves[i].marker, S.substitute(term, binder, w.subst))
            pre2 = pre + (TraceEvent("congruence", "SC-SUBEXT", f"leaf{i}", ""),)
            out.append(Step("E-NAMESUBST", f"wrapper{j}",
                            Stack(wrappers, leaves).rebuild(), pre2,
                            key=(0, j, (), _RULE_RANK["E-NAMESUBST"])))
    return out


# ---------------------------------------------------------------------------
# Schedulers, exploration, equivalence

class FuelExhausted(Exception):
    def __init__(self, trace: Trace):
        super().__init__("fuel exhausted")
        self.trace = trace


def run(config: S.Configuration, scheduler: str = "det", fuel: int = 1000,
        seed: int = 0, both_orders: bool = False, loose_contexts: bool = False,
        on_state: Optional[Callable] = None) -> Trace:
    """Reduces a configuration to a terminal state (or until fuel runs out).
    det picks the first redex in canonical order; rand draws uniformly."""
    rng = random.Random(seed)
    trace = Trace(config)
    current = config
    steps_taken = 0
    while True:
        rec: list[TraceEvent] = []
        current = congruence_normalize(current, loose_contexts, rec)
        trace.events.extend(rec)
        if on_state is not None:
            on_state(current)
        options = enumerate_steps(current, both_orders, loose_contexts)
        if not options:
            break
        if steps_taken >= fuel:
            trace.fuel_exhausted = True
            break
        chosen = options[0] if scheduler == "det" else rng.choice(options)
        trace.events.extend(chosen.pre_events)
        trace.events.append(TraceEvent("step", chosen.rule, chosen.path,
                                       _summary(chosen.result)))
        current = chosen.result
        steps_taken += 1
    trace.final = current
    return trace


@dataclass
class Exploration:
    states: dict[str, S.Configuration]
    terminals: list[S.Configuration]
    edges: int
    truncated: bool

    @property
    def state_count(self) -> int:
        return len(self.states)


def explore(config: S.Configuration, bound: int = 10_000,
            both_orders: bool = False, loose_contexts: bool = False,
            on_state: Optional[Callable] = None) -> Exploration:
    """Breadth-first exploration of every reachable state (up to bound,
    deduplicated by canonical form). Terminal states have no redexes."""
    start = congruence_normalize(config, loose_contexts)
    states: dict[str, S.Configuration] = {canon_subject(start): start}
    terminals: list[S.Configuration] = []
    frontier = [start]
    edges = 0
    truncated = False
    if on_state is not None:
        on_state(start)
    while frontier:
        nxt: list[S.Configuration] = []
        for state in frontier:
            options = enumerate_steps(state, both_orders, loose_contexts)
            if not options:
                terminals.append(state)
                continue
            for step in options:
                edges += 1
                succ = congruence_normalize(step.result, loose_contexts)
                k = canon_subject(succ)
                if k in states:
                    continue
                if len(states) >= bound:
                    truncated = True
                    continue
                states[k] = succ
                if on_state is not None:
                    on_state(succ)
                nxt.append(succ)
        frontier = nxt
    return Exploration(states, terminals, edges, truncated)


def _swap_variants(config: S.Configuration) -> list[S.Configuration]:
    stack = _gather(config)
    out = []
    for i, w in enumerate(stack.wrappers):
        if isinstance(w, ResW) and w.buffer.empty:
            wrappers = list(stack.wrappers)
            wrappers[i] = ResW(w.in_end, w.buffer, w.out_end,
                               None if w.ann is None else S.dual_session(w.ann))
            out.append(Stack(wrappers, list(stack.leaves)).rebuild())
    return out


def equiv_config(a: S.Configuration, b: S.Configuration, depth: int = 4,
                 loose_contexts: bool = False) -> bool:
    """Bounded congruence check: canonical forms compared directly, then
    across up to `depth` buffer-direction swaps. Sound; incomplete beyond
    the bound."""
    ka = canon_subject(congruence_normalize(a, loose_contexts))
    kb = canon_subject(congruence_normalize(b, loose_contexts))
    if ka == kb:
        return True
    seen_a = {ka}
    seen_b = {kb}
    frontier_a = [congruence_normalize(a, loose_contexts)]
    frontier_b = [congruence_normalize(b, loose_contexts)]
    for _ in range(depth):
        nxt = []
        for c in frontier_a:
            for v in _swap_variants(c):
                vn = congruence_normalize(v, loose_contexts)
                k = canon_subject(vn)
                if k not in seen_a:
                    seen_a.add(k)
                    nxt.append(vn)
        frontier_a = nxt
        if seen_a & seen_b:
            return True
        frontier_a, frontier_b = frontier_b, frontier_a
        seen_a, seen_b = seen_b, seen_a
    return bool(seen_a & seen_b)
