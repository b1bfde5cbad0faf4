"""An asynchronous process calculus with priority-annotated session types.

Outputs and selections are unbound (no continuation), so nothing blocks on
them; inputs and branches are the only prefixes. The type system enforces
two laws: an input or branch prefix must have a priority strictly smaller
than everything else its continuation uses, and the two endpoints of a
channel carry equal priorities. Checking collects those requirements as a
constraint set over priority variables; a separate solver decides them.
In relaxed mode the priority requirements are erased and checking is the
plain linear discipline.

Reduction: a restriction synchronizes an output atom with an input prefix
on its two endpoints (likewise selection with branching); a forwarder
linking a restricted endpoint renames the other end. In the lazy mode,
forwarders fire only across restrictions created forwarder-enabled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .names import Name, fresh

Label = str


# ---------------------------------------------------------------------------
# Priorities and types

@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class OmegaTy:
    def __str__(self):
        return "w"


OMEGA = OmegaTy()


@dataclass(frozen=True)
class PVar:
    vid: int

    def __str__(self):
        return f"p{self.vid}"


Priority = Union[Const, OmegaTy, PVar]

_pvar_counter = itertools.count(0)


def fresh_pvar() -> PVar:
    return PVar(next(_pvar_counter))


class PTy:
    pass


@dataclass(frozen=True)
class Tensor(PTy):
    pri: Priority
    left: PTy
    right: PTy


@dataclass(frozen=True)
class ParT(PTy):
    pri: Priority
    left: PTy
    right: PTy


@dataclass(frozen=True)
class Plus(PTy):
    pri: Priority
    branches: tuple[tuple[Label, PTy], ...]

    def branch_map(self):
        return dict(self.branches)


@dataclass(frozen=True)
class With(PTy):
    pri: Priority
    branches: tuple[tuple[Label, PTy], ...]

    def branch_map(self):
        return dict(self.branches)


@dataclass(frozen=True)
class Bullet(PTy):
    pass


BULLET = Bullet()


def pdual(a: PTy) -> PTy:
    """Endpoint duality; priorities carry over unchanged."""
    if isinstance(a, Tensor):
        return ParT(a.pri, pdual(a.left), pdual(a.right))
    if isinstance(a, ParT):
        return Tensor(a.pri, pdual(a.left), pdual(a.right))
    if isinstance(a, Plus):
        return With(a.pri, tuple((l, pdual(b)) for l, b in a.branches))
    if isinstance(a, With):
        return Plus(a.pri, tuple((l, pdual(b)) for l, b in a.branches))
    if isinstance(a, Bullet):
        return a
    raise TypeError(f"not a process type: {a!r}")


def pr(a: PTy) -> Priority:
    """The priority of the outermost connective; the closed type has none
    and compares above everything."""
    if isinstance(a, Bullet):
        return OMEGA
    return a.pri


def same_shape(a: PTy, b: PTy) -> bool:
    """Structural equality ignoring priorities."""
    if isinstance(a, Bullet) and isinstance(b, Bullet):
        return True
    if type(a) is not type(b):
        return False
    if isinstance(a, (Tensor, ParT)):
        return same_shape(a.left, b.left) and same_shape(a.right, b.right)
    if isinstance(a, (Plus, With)):
        if [l for l, _ in a.branches] != [l for l, _ in b.branches]:
            return False
        return all(same_shape(x, y) for (_, x), (_, y) in zip(a.branches, b.branches))
    return False


def print_ptype(a: PTy, show_pri: bool = True,
                solution: Optional[dict] = None) -> str:
    def p(x: Priority) -> str:
        if solution is not None and isinstance(x, PVar):
            v = solution.get(x.vid)
            return "w" if v is None else str(v)
        return str(x)

    def atom(t: PTy) -> str:
        if isinstance(t, Bullet):
            return "o"
        if isinstance(t, (Plus, With)):
            sym = "+" if isinstance(t, Plus) else "&"
            pri = f"[{p(t.pri)}]" if show_pri else ""
            inner = ", ".join(f"{l}: {go(b)}" for l, b in t.branches)
            return f"{sym}{pri}{{{inner}}}"
        return f"({go(t)})"

    def go(t: PTy) -> str:
        if isinstance(t, (Tensor, ParT)):
            sym = "*" if isinstance(t, Tensor) else "%"
            pri = f"[{p(t.pri)}]" if show_pri else ""
            return f"{atom(t.left)} {sym}{pri} {atom(t.right)}"
        return atom(t)

    return go(a)


# ---------------------------------------------------------------------------
# Processes

class Process:
    pass


@dataclass(frozen=True)
class Inact(Process):
    pass


INACT = Inact()


@dataclass(frozen=True)
class Fwd(Process):
    left: Name
    right: Name


@dataclass(frozen=True)
class PPar(Process):
    left: Process
    right: Process


@dataclass(frozen=True)
class PRes(Process):
    left: Name
    right: Name
    body: Process
    fwd_enabled: bool = False
    ann: Optional[PTy] = None  # type of the left endpoint


@dataclass(frozen=True)
class Out(Process):
    subject: Name
    arg1: Name
    arg2: Name


@dataclass(frozen=True)
class PIn(Process):
    subject: Name
    binder1: Name
    binder2: Name
    body: Process


@dataclass(frozen=True)
class PSel(Process):
    subject: Name
    arg: Name
    label: Label


@dataclass(frozen=True)
class PBra(Process):
    subject: Name
    binder: Name
    branches: tuple[tuple[Label, Process], ...]

    def branch_map(self):
        return dict(self.branches)


def par(*ps: Process) -> Process:
    parts = [p for p in ps if not isinstance(p, Inact)]
    if not parts:
        return INACT
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = PPar(p, out)
    return out


def pfree_names(p: Process) -> set[Name]:
    if isinstance(p, Inact):
        return set()
    if isinstance(p, Fwd):
        return {p.left, p.right}
    if isinstance(p, PPar):
        return pfree_names(p.left) | pfree_names(p.right)
    if isinstance(p, PRes):
        return pfree_names(p.body) - {p.left, p.right}
    if isinstance(p, Out):
        return {p.subject, p.arg1, p.arg2}
    if isinstance(p, PIn):
        return {p.subject} | (pfree_names(p.body) - {p.binder1, p.binder2})
    if isinstance(p, PSel):
        return {p.subject, p.arg}
    if isinstance(p, PBra):
        out = {p.subject}
        for _, b in p.branches:
            out |= pfree_names(b) - {p.binder}
        return out
    raise TypeError(f"not a process: {p!r}")


def rename(p: Process, mapping: dict[Name, Name]) -> Process:
    """Simultaneous renaming. Names are globally unique, so binders never
    collide with the mapping."""
    if not mapping:
        return p
    m = mapping.get
    if isinstance(p, Inact):
        return p
    if isinstance(p, Fwd):
        return Fwd(m(p.left, p.left), m(p.right, p.right))
    if isinstance(p, PPar):
        return PPar(rename(p.left, mapping), rename(p.right, mapping))
    if isinstance(p, PRes):
        return PRes(p.left, p.right, rename(p.body, mapping), p.fwd_enabled, p.ann)
    if isinstance(p, Out):
        return Out(m(p.subject, p.subject), m(p.arg1, p.arg1), m(p.arg2, p.arg2))
    if isinstance(p, PIn):
        return PIn(m(p.subject, p.subject), p.binder1, p.binder2,
                   rename(p.body, mapping))
    if isinstance(p, PSel):
        return PSel(m(p.subject, p.subject), m(p.arg, p.arg), p.label)
    if isinstance(p, PBra):
        return PBra(m(p.subject, p.subject), p.binder,
                    tuple((l, rename(b, mapping)) for l, b in p.branches))
    raise TypeError(f"not a process: {p!r}")


# ---------------------------------------------------------------------------
# Constraints

@dataclass
class ConstraintSet:
    equalities: list[tuple[Priority, Priority]] = field(default_factory=list)
    stricts: list[tuple[Priority, Priority]] = field(default_factory=list)

    def eq(self, a: Priority, b: Priority) -> None:
        if a != b:
            self.equalities.append((a, b))

    def lt(self, a: Priority, b: Priority) -> None:
        self.stricts.append((a, b))

    def extend(self, other: "ConstraintSet") -> None:
        self.equalities.extend(other.equalities)
        self.stricts.extend(other.stricts)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for a, b in self.equalities + self.stricts:
            for x in (a, b):
                if isinstance(x, PVar):
                    out.add(x.vid)
        return out


class Unsatisfiable(Exception):
    def __init__(self, cycle: list):
        super().__init__(f"priority constraints unsatisfiable: cycle {cycle}")
        self.cycle = cycle


def solve_priorities(cs: ConstraintSet) -> dict[int, int]:
    """Union-find over equalities, then longest-path levels over the strict
    order between classes. Returns an assignment for every variable (vars
    forced to the top element are simply absent). Raises Unsatisfiable with
    a witness cycle."""
    parent: dict = {}

    def key(x: Priority):
        if isinstance(x, PVar):
            return ("v", x.vid)
        if isinstance(x, Const):
            return ("c", x.value)
        return ("w",)

    def find(k):
        while parent.get(k, k) != k:
            parent[k] = parent.get(parent[k], parent[k])
            k = parent[k]
        return k

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    members: dict = {}
    for a, b in cs.equalities:
        union(key(a), key(b))
    for a, b in cs.equalities + cs.stricts:
        for x in (a, b):
            members.setdefault(key(x), x)

    def cls_info(rep):
        consts = set()
        omega = False
        for k, v in list(members.items()):
            if find(k) == rep:
                if k[0] == "c":
                    consts.add(k[1])
                elif k[0] == "w":
                    omega = True
        return consts, omega

    reps = {find(key(a)) for pair in cs.equalities + cs.stricts for a in pair}
    info = {r: cls_info(r) for r in reps}
    for r, (consts, omega) in info.items():
        if len(consts) > 1 or (consts and omega):
            raise Unsatisfiable([members[k] for k in members if find(k) == r])

    edges: dict = {r: set() for r in reps}
    witness_edge: dict = {}
    for a, b in cs.stricts:
        ra, rb = find(key(a)), find(key(b))
        _, omega_b = info.get(rb, (set(), key(b)[0] == "w"))
        _, omega_a = info.get(ra, (set(), key(a)[0] == "w"))
        if omega_b or key(b)[0] == "w":
            if omega_a or key(a)[0] == "w":
                raise Unsatisfiable([a, b])  # w < w is impossible
            continue  # anything finite sits below the top element
        if omega_a or key(a)[0] == "w":
            raise Unsatisfiable([a, b])  # the top element is below nothing
        if ra == rb:
            raise Unsatisfiable([a, b])
        edges.setdefault(ra, set()).add(rb)
        edges.setdefault(rb, set())
        witness_edge[(ra, rb)] = (a, b)

    # cycle detection + topological order
    color: dict = {}
    order: list = []
    stack_path: list = []

    def dfs(u):
        color[u] = 1
        stack_path.append(u)
        for v in edges.get(u, ()):
            if color.get(v, 0) == 0:
                dfs(v)
            elif color.get(v) == 1:
                i = stack_path.index(v)
                cyc = stack_path[i:] + [v]
                pretty = []
                for a, b in zip(cyc, cyc[1:]):
                    pretty.append(witness_edge.get((a, b), (a, b))[0])
                raise Unsatisfiable(pretty or [v])
        stack_path.pop()
        color[u] = 2
        order.append(u)

    for u in list(edges):
        if color.get(u, 0) == 0:
            dfs(u)

    level: dict = {}
    for u in order:  # reverse topological: successors first
        succ = edges.get(u, ())
        level[u] = (max(level[v] for v in succ) + 1) if succ else 0
    top = max(level.values(), default=0)
    for u in level:
        level[u] = top - level[u]  # longest path from a source

    # respect pinned constants and verify
    value: dict = {}
    for r in reps:
        consts, omega = info.get(r, (set(), False))
        if omega:
            value[r] = None  # top
        elif consts:
            value[r] = next(iter(consts))
        else:
            value[r] = level.get(r, 0)
    for a, b in cs.stricts:
        va = value.get(find(key(a)), None if key(a)[0] == "w"
                       else key(a)[1] if key(a)[0] == "c" else 0)
        vb = value.get(find(key(b)), None if key(b)[0] == "w"
                       else key(b)[1] if key(b)[0] == "c" else 0)
        if vb is None:
            continue
        if va is None or not va < vb:
            raise Unsatisfiable([a, b])

    out: dict[int, int] = {}
    for vid in cs.variables():
        v = value.get(find(("v", vid)), 0)
        if v is not None:
            out[vid] = v
    return out


# ---------------------------------------------------------------------------
# Typechecking

class ProcessTypeError(Exception):
    pass


def _perr(msg: str) -> ProcessTypeError:
    return ProcessTypeError(msg)


def _unify(a: PTy, b: PTy, cs: Optional[ConstraintSet]) -> None:
    """Structural type equality; with a constraint set, corresponding
    priorities are equated rather than compared."""
    if isinstance(a, Bullet) and isinstance(b, Bullet):
        return
    if type(a) is not type(b):
        raise _perr(f"type mismatch: {print_ptype(a)} vs {print_ptype(b)}")
    if cs is not None:
        cs.eq(a.pri, b.pri)
    if isinstance(a, (Tensor, ParT)):
        _unify(a.left, b.left, cs)
        _unify(a.right, b.right, cs)
        return
    if [l for l, _ in a.branches] != [l for l, _ in b.branches]:
        raise _perr(f"label mismatch: {print_ptype(a)} vs {print_ptype(b)}")
    for (_, x), (_, y) in zip(a.branches, b.branches):
        _unify(x, y, cs)


PEnv = dict[Name, PTy]


def _is_bullet(t: PTy) -> bool:
    return isinstance(t, Bullet)


class _PChecker:
    def __init__(self, strict: bool):
        self.strict = strict
        self.cs = ConstraintSet()

    def _take(self, env: PEnv, n: Name, what: str) -> tuple[PTy, PEnv]:
        if n not in env:
            raise _perr(f"{what}: no linear resource for {n.text}")
        env2 = dict(env)
        ty = env2.pop(n)
        return ty, env2

    def check(self, p: Process, env: PEnv) -> PEnv:
        if isinstance(p, Inact):
            return env
        if isinstance(p, Fwd):
            ta, env = self._take(env, p.left, "forwarder")
            tb, env = self._take(env, p.right, "forwarder")
            _unify(ta, pdual(tb), self.cs if self.strict else None)
            return env
        if isinstance(p, PPar):
            return self.check(p.right, self.check(p.left, env))
        if isinstance(p, PRes):
            if p.ann is None:
                raise _perr(f"restriction (nu {p.left.text} {p.right.text}) "
                            "needs a type annotation")
            env2 = dict(env)
            env2[p.left] = p.ann
            env2[p.right] = pdual(p.ann)
            leftover = self.check(p.body, env2)
            for n in (p.left, p.right):
                if n in leftover:
                    if not _is_bullet(leftover[n]):
                        raise _perr(f"endpoint {n.text} : "
                                    f"{print_ptype(leftover[n])} is never used")
                    del leftover[n]
            return leftover
        if isinstance(p, Out):
            ts, env = self._take(env, p.subject, "output")
            if not isinstance(ts, Tensor):
                raise _perr(f"output on {p.subject.text} : {print_ptype(ts)}")
            ta, env = self._take(env, p.arg1, "output payload")
            tb, env = self._take(env, p.arg2, "output continuation")
            _unify(ta, pdual(ts.left), self.cs if self.strict else None)
            _unify(tb, pdual(ts.right), self.cs if self.strict else None)
            return env
        if isinstance(p, PIn):
            ts, env = self._take(env, p.subject, "input")
            if not isinstance(ts, ParT):
                raise _perr(f"input on {p.subject.text} : {print_ptype(ts)}")
            env2 = dict(env)
            env2[p.binder1] = ts.left
            env2[p.binder2] = ts.right
            leftover = self.check(p.body, env2)
            leftover = self._close_prefix(leftover, (p.binder1, p.binder2))
            if self.strict:
                # the prefix blocks the rest of the continuation's context,
                # received endpoints included
                self._blocking(ts.pri, env, leftover)
                for ty in (ts.left, ts.right):
                    if not _is_bullet(ty):
                        self.cs.lt(ts.pri, pr(ty))
            return leftover
        if isinstance(p, PSel):
            ts, env = self._take(env, p.subject, "selection")
            if not isinstance(ts, Plus):
                raise _perr(f"selection on {p.subject.text} : {print_ptype(ts)}")
            bm = ts.branch_map()
            if p.label not in bm:
                raise _perr(f"label {p.label!r} not in {print_ptype(ts)}")
            ta, env = self._take(env, p.arg, "selection continuation")
            _unify(ta, pdual(bm[p.label]), self.cs if self.strict else None)
            return env
        if isinstance(p, PBra):
            ts, env = self._take(env, p.subject, "branching")
            if not isinstance(ts, With):
                raise _perr(f"branching on {p.subject.text} : {print_ptype(ts)}")
            bm = ts.branch_map()
            if set(bm) != {l for l, _ in p.branches}:
                raise _perr("branch labels do not match the offered type")
            leftover: Optional[PEnv] = None
            for lbl, body in p.branches:
                env2 = dict(env)
                env2[p.binder] = bm[lbl]
                lb = self.check(body, env2)
                lb = self._close_prefix(lb, (p.binder,))
                if leftover is None:
                    leftover = lb
                elif set(leftover) != set(lb):
                    raise _perr("branches consume different resources")
            assert leftover is not None
            if self.strict:
                self._blocking(ts.pri, env, leftover)
                for _, ty in ts.branches:
                    if not _is_bullet(ty):
                        self.cs.lt(ts.pri, pr(ty))
            return leftover
        raise TypeError(f"not a process: {p!r}")

    def _close_prefix(self, leftover: PEnv, binders) -> PEnv:
        leftover = dict(leftover)
        for n in binders:
            if n in leftover:
                if not _is_bullet(leftover[n]):
                    raise _perr(f"received endpoint {n.text} : "
                                f"{print_ptype(leftover[n])} is never used")
                del leftover[n]
        return leftover

    def _blocking(self, pri: Priority, before: PEnv, leftover: PEnv) -> None:
        # the prefix priority must sit strictly below everything else its
        # continuation made use of
        for n, ty in before.items():
            if n not in leftover and not _is_bullet(ty):
                self.cs.lt(pri, pr(ty))


def check_process(p: Process, env: PEnv, mode: str = "strict") -> ConstraintSet:
    """Typechecks p against env (every free name must be assigned). In
    strict mode, returns the collected priority constraints; relaxed mode
    erases priority checks and returns an empty set."""
    ck = _PChecker(strict=(mode == "strict"))
    leftover = ck.check(p, dict(env))
    bad = [n for n, t in leftover.items() if not _is_bullet(t)]
    if bad:
        raise _perr("unused resources: " + ", ".join(n.text for n in bad))
    return ck.cs


# ---------------------------------------------------------------------------
# Reduction

@dataclass(frozen=True)
class PBind:
    left: Name
    right: Name
    fwd_enabled: bool
    ann: Optional[PTy]

    def other(self, n: Name) -> Name:
        return self.right if n == self.left else self.left


def _pgather(p: Process) -> tuple[list[PBind], list[Process]]:
    """Top-level region: restrictions and parallel atoms reachable without
    crossing a prefix. Inactive atoms are dropped."""
    bindings: list[PBind] = []
    atoms: list[Process] = []

    def walk(q: Process):
        if isinstance(q, Inact):
            return
        if isinstance(q, PPar):
            walk(q.left)
            walk(q.right)
            return
        if isinstance(q, PRes):
            bindings.append(PBind(q.left, q.right, q.fwd_enabled, q.ann))
            walk(q.body)
            return
        atoms.append(q)

    walk(p)
    return bindings, atoms


def _prebuild(bindings: list[PBind], atoms: list[Process]) -> Process:
    body = par(*atoms)
    for b in reversed(bindings):
        body = PRes(b.left, b.right, body, b.fwd_enabled, b.ann)
    return body


def step_process(p: Process, mode: str = "standard") -> list[tuple[str, Process]]:
    """All single reduction steps, modulo structural congruence. In lazy
    mode, forwarders fire only across forwarder-enabled restrictions."""
    bindings, atoms = _pgather(p)
    steps: list[tuple[str, Process]] = []

    def without(seq, *idxs):
        drop = set(idxs)
        return [v for i, v in enumerate(seq) if i not in drop]

    for bi, b in enumerate(bindings):
        for x, y in ((b.left, b.right), (b.right, b.left)):
            for oi, o in enumerate(atoms):
                if isinstance(o, Out) and o.subject == x:
                    for ii, inp in enumerate(atoms):
                        if isinstance(inp, PIn) and inp.subject == y:
                            body = rename(inp.body, {inp.binder1: o.arg1,
                                                     inp.binder2: o.arg2})
                            steps.append(("comm", _prebuild(
                                without(bindings, bi), without(atoms, oi, ii) + [body])))
                elif isinstance(o, PSel) and o.subject == x:
                    for ii, inp in enumerate(atoms):
                        if isinstance(inp, PBra) and inp.subject == y:
                            bm = inp.branch_map()
                            if o.label not in bm:
                                continue
                            body = rename(bm[o.label], {inp.binder: o.arg})
                            steps.append(("label", _prebuild(
                                without(bindings, bi), without(atoms, oi, ii) + [body])))
        if mode == "lazy" and not b.fwd_enabled:
            continue
        for ai, a in enumerate(atoms):
            if not isinstance(a, Fwd):
                continue
            for u, v in ((a.left, a.right), (a.right, a.left)):
                if u not in (b.left, b.right):
                    continue
                partner = b.other(u)
                rest = without(atoms, ai)
                if v == partner:  # the forwarder joins the two ends directly
                    steps.append(("fwd", _prebuild(without(bindings, bi), rest)))
                else:
                    renamed = [rename(q, {partner: v}) for q in rest]
                    steps.append(("fwd", _prebuild(without(bindings, bi), renamed)))
                break
    return steps


# ---------------------------------------------------------------------------
# Canonical rendering and bounded equivalence

def _gc_region(bindings: list[PBind], atoms: list[Process]
               ) -> tuple[list[PBind], list[Process]]:
    used: set[Name] = set()
    for a in atoms:
        used |= pfree_names(a)
    kept = [b for b in bindings if b.left in used or b.right in used]
    return kept, atoms


def canon_process(p: Process) -> str:
    """Alpha-invariant, order-invariant rendering. Equal strings imply
    structural congruence (flattening, restriction scope maximization,
    garbage collection of closed restrictions and inactive components)."""
    return _Canon().canon(p, {})


class _Canon:
    """Iterative refinement: atoms are sorted by their current rendering,
    then the region-bound names are renumbered in traversal order of the
    sorted sequence; repeated until the naming stabilizes. Inner prefix
    bodies canonicalize recursively against the enclosing resolution (with
    memoization, since the resolution of a body only depends on how its own
    free names resolve)."""

    def __init__(self):
        self.memo: dict = {}

    def canon(self, p: Process, outer: dict[Name, str]) -> str:
        bindings, atoms = _gc_region(*_pgather(p))
        fkey = tuple(sorted((n.uid, outer.get(n, "~" + n.text))
                            for n in pfree_names(p)))
        mkey = (id(p), fkey)
        if mkey in self.memo:
            return self.memo[mkey]
        bound: set[Name] = set()
        for b in bindings:
            bound |= {b.left, b.right}
        naming: dict[Name, str] = {}

        def resolve(n: Name, local: dict[Name, str]) -> str:
            if n in local:
                return local[n]
            if n in naming:
                return naming[n]
            if n in bound:
                return "?"
            return outer.get(n, "~" + n.text)

        def render(q: Process, local: dict[Name, str], counter: list[int]) -> str:
            nm = lambda n: resolve(n, local)
            if isinstance(q, Fwd):
                a, c = nm(q.left), nm(q.right)
                return f"fwd {min(a, c)} {max(a, c)}"  # forwarders are symmetric
            if isinstance(q, Out):
                return f"{nm(q.subject)}[{nm(q.arg1)}, {nm(q.arg2)}]"
            if isinstance(q, PSel):
                return f"{nm(q.subject)}[{nm(q.arg)}] <{q.label}"
            if isinstance(q, PIn):
                l2 = dict(local)
                b1, b2 = f"i{counter[0]}", f"i{counter[0] + 1}"
                counter[0] += 2
                l2[q.binder1] = b1
                l2[q.binder2] = b2
                inner = self.canon(q.body, scope_of(q.body, l2))
                return f"{nm(q.subject)}({b1}, {b2}).{inner}"
            if isinstance(q, PBra):
                l2 = dict(local)
                b1 = f"i{counter[0]}"
                counter[0] += 1
                l2[q.binder] = b1
                parts = []
                for lbl, body in sorted(q.branches):
                    inner = self.canon(body, scope_of(body, l2))
                    parts.append(f"{lbl}: {inner}")
                return f"{nm(q.subject)}({b1}) >{{{', '.join(parts)}}}"
            raise TypeError(f"unexpected atom: {q!r}")

        def scope_of(body: Process, local: dict[Name, str]) -> dict[Name, str]:
            return {n: resolve(n, local) for n in pfree_names(body)}

        def number_region(atoms_sorted, local: dict[Name, str], counter: list[int]):
            for a in atoms_sorted:
                number_atom(a, local, counter)

        def number_atom(q: Process, local: dict[Name, str], counter: list[int]):
            def touch(n: Name):
                if n in bound and n not in local and n not in naming:
                    naming[n] = f"r{len(naming)}"
            if isinstance(q, Fwd):
                # symmetric: touch in rendered order
                a, c = resolve(q.left, local), resolve(q.right, local)
                first, second = (q.left, q.right) if a <= c else (q.right, q.left)
                touch(first)
                touch(second)
            elif isinstance(q, Out):
                touch(q.subject)
                touch(q.arg1)
                touch(q.arg2)
            elif isinstance(q, PSel):
                touch(q.subject)
                touch(q.arg)
            elif isinstance(q, PIn):
                touch(q.subject)
                l2 = dict(local)
                l2[q.binder1] = "i"
                l2[q.binder2] = "i"
                number_body(q.body, l2, counter)
            elif isinstance(q, PBra):
                touch(q.subject)
                for _, body in sorted(q.branches):
                    l2 = dict(local)
                    l2[q.binder] = "i"
                    number_body(body, l2, counter)

        def number_body(body: Process, local: dict[Name, str], counter: list[int]):
            # enter the body region in its own canonical atom order; its
            # private bindings do not concern the outer numbering
            b2, a2 = _gc_region(*_pgather(body))
            for b in b2:
                local = dict(local)
                local[b.left] = "i"
                local[b.right] = "i"
            labels = sorted(a2, key=lambda a: render(a, local, [0]))
            number_region(labels, local, counter)

        ordered = list(atoms)
        for _ in range(4):
            ordered.sort(key=lambda a: render(a, {}, [0]))
            prev = dict(naming)
            naming.clear()
            number_region(ordered, {}, [0])
            if naming == prev:
                break

        final = sorted(render(a, {}, [0]) for a in ordered)
        binder_keys = []
        for b in bindings:
            ka = naming.get(b.left, "?")
            kb = naming.get(b.right, "?")
            flag = "+" if b.fwd_enabled else ""
            binder_keys.append(f"(nu{flag} {min(ka, kb)} {max(ka, kb)})")
        out = "".join(sorted(binder_keys)) + "(" + " | ".join(final) + ")"
        self.memo[mkey] = out
        return out


def is_inactive(p: Process) -> bool:
    """Structurally congruent to the empty process (inactive components and
    closed restrictions collected)."""
    _, atoms = _pgather(p)
    return not atoms


# a small backtracking matcher as a fallback where canonical renderings
# disagree on the numbering of symmetric components

def _skeleton(q: Process) -> str:
    if isinstance(q, Fwd):
        return "fwd"
    if isinstance(q, Out):
        return "out"
    if isinstance(q, PSel):
        return f"sel {q.label}"
    if isinstance(q, PIn):
        return "in " + _region_skeleton(q.body)
    if isinstance(q, PBra):
        return "bra " + ",".join(l + _region_skeleton(b) for l, b in sorted(q.branches))
    return "?"


def _region_skeleton(p: Process) -> str:
    bindings, atoms = _gc_region(*_pgather(p))
    return f"[{len(bindings)}|" + " ".join(sorted(_skeleton(a) for a in atoms)) + "]"


class _Budget:
    def __init__(self, n: int):
        self.n = n

    def spend(self) -> bool:
        self.n -= 1
        return self.n >= 0


def _match_regions(pa: Process, pb: Process, bij: dict[Name, Name],
                   budget: _Budget) -> bool:
    ba, aa = _gc_region(*_pgather(pa))
    bb, ab = _gc_region(*_pgather(pb))
    if len(ba) != len(bb) or len(aa) != len(ab):
        return False
    partners_a = {}
    partners_b = {}
    flags_a = {}
    flags_b = {}
    for b in ba:
        partners_a[b.left] = b.right
        partners_a[b.right] = b.left
        flags_a[b.left] = flags_a[b.right] = b.fwd_enabled
    for b in bb:
        partners_b[b.left] = b.right
        partners_b[b.right] = b.left
        flags_b[b.left] = flags_b[b.right] = b.fwd_enabled

    def unify_name(x: Name, y: Name, m: dict[Name, Name]) -> Optional[dict[Name, Name]]:
        if x in m:
            return m if m[x] == y else None
        if y in m.values():
            return None
        xa, yb = x in partners_a, y in partners_b
        if xa != yb:
            return None
        if not xa:
            # both free at this level: must already correspond or be equal
            return m if (bij.get(x, x) == y) else None
        if flags_a[x] != flags_b[y]:
            return None
        m2 = dict(m)
        m2[x] = y
        # partners must correspond too
        px, py = partners_a[x], partners_b[y]
        if px in m2:
            return m2 if m2[px] == py else None
        if py in m2.values():
            return None
        m2[px] = py
        return m2

    def unify_atom(x: Process, y: Process, m: dict[Name, Name]) -> Optional[dict[Name, Name]]:
        if not budget.spend():
            return None
        if isinstance(x, Fwd) and isinstance(y, Fwd):
            for xs, ys in (((x.left, x.right), (y.left, y.right)),
                           ((x.left, x.right), (y.right, y.left))):
                m2 = m
                for u, v in zip(xs, ys):
                    m2 = unify_name(u, v, m2) if m2 is not None else None
                if m2 is not None:
                    return m2
            return None
        if isinstance(x, Out) and isinstance(y, Out):
            m2 = m
            for u, v in ((x.subject, y.subject), (x.arg1, y.arg1), (x.arg2, y.arg2)):
                m2 = unify_name(u, v, m2) if m2 is not None else None
            return m2
        if isinstance(x, PSel) and isinstance(y, PSel) and x.label == y.label:
            m2 = unify_name(x.subject, y.subject, m)
            return unify_name(x.arg, y.arg, m2) if m2 is not None else None
        if isinstance(x, PIn) and isinstance(y, PIn):
            m2 = unify_name(x.subject, y.subject, m)
            if m2 is None:
                return None
            inner = dict(bij)
            inner.update(m2)
            inner[x.binder1] = y.binder1
            inner[x.binder2] = y.binder2
            if _match_regions(x.body, y.body, inner, budget):
                return m2
            return None
        if isinstance(x, PBra) and isinstance(y, PBra):
            if [l for l, _ in sorted(x.branches)] != [l for l, _ in sorted(y.branches)]:
                return None
            m2 = unify_name(x.subject, y.subject, m)
            if m2 is None:
                return None
            for (_, bx), (_, by) in zip(sorted(x.branches), sorted(y.branches)):
                inner = dict(bij)
                inner.update(m2)
                inner[x.binder] = y.binder
                if not _match_regions(bx, by, inner, budget):
                    return None
            return m2
        return None

    def backtrack(remaining_a: list[Process], remaining_b: list[Process],
                  m: dict[Name, Name]) -> bool:
        if not remaining_a:
            return True
        if not budget.spend():
            return False
        x = remaining_a[0]
        sk = _skeleton(x)
        for i, y in enumerate(remaining_b):
            if _skeleton(y) != sk:
                continue
            m2 = unify_atom(x, y, m)
            if m2 is not None and backtrack(remaining_a[1:],
                                            remaining_b[:i] + remaining_b[i + 1:], m2):
                return True
        return False

    return backtrack(aa, ab, {})


def equiv_process(a: Process, b: Process, depth: int = 6) -> bool:
    """Bounded structural-congruence check: canonical renderings first, a
    budgeted backtracking matcher as fallback. Sound; may miss equivalences
    past the budget."""
    if canon_process(a) == canon_process(b):
        return True
    return _match_regions(a, b, {}, _Budget(max(2000, depth * 5000)))


# ---------------------------------------------------------------------------
# Deadlock-freedom self-test

@dataclass
class DeadlockVerdict:
    progress: bool
    reason: str
    witness: Optional[Process] = None


class PreconditionError(Exception):
    pass


def deadlock_theorem_check(p: Process, mode: str = "standard") -> DeadlockVerdict:
    """Self-test of the engine: a closed, strictly typed process with
    satisfiable priorities must be inactive or able to step."""
    try:
        cs = check_process(p, {}, "strict")
        solve_priorities(cs)
    except (ProcessTypeError, Unsatisfiable) as e:
        raise PreconditionError(f"not strictly typable under the empty context: {e}")
    if is_inactive(p):
        return DeadlockVerdict(True, "inactive")
    if step_process(p, mode):
        return DeadlockVerdict(True, "a step exists")
    return DeadlockVerdict(False, "stuck", p)


# ---------------------------------------------------------------------------
# Textual format

def print_process(p: Process, unicode: bool = False) -> str:
    def nm(n: Name) -> str:
        return n.text

    def atom(q: Process) -> str:
        s = go(q)
        if isinstance(q, (PPar, PRes)):
            return f"({s})"
        return s

    def go(q: Process) -> str:
        if isinstance(q, Inact):
            return "0"
        if isinstance(q, Fwd):
            if unicode:
                return f"{nm(q.left)} ↔ {nm(q.right)}"
            return f"fwd {nm(q.left)} {nm(q.right)}"
        if isinstance(q, PPar):
            return f"{atom(q.left)} | {atom(q.right)}"
        if isinstance(q, PRes):
            tag = "nu+" if q.fwd_enabled else "nu"
            if unicode:
                tag = "ν↔" if q.fwd_enabled else "ν"
            ann = "" if q.ann is None else f" : {print_ptype(q.ann)}"
            return f"({tag} {nm(q.left)}{ann} {nm(q.right)}) {go(q.body)}"
        if isinstance(q, Out):
            return f"{nm(q.subject)}[{nm(q.arg1)}, {nm(q.arg2)}]"
        if isinstance(q, PIn):
            return f"{nm(q.subject)}({nm(q.binder1)}, {nm(q.binder2)}).{atom(q.body)}"
        if isinstance(q, PSel):
            sym = "◁" if unicode else "<"
            return f"{nm(q.subject)}[{nm(q.arg)}] {sym} {q.label}"
        if isinstance(q, PBra):
            sym = "▷" if unicode else ">"
            inner = ", ".join(f"{l}: {go(b)}" for l, b in q.branches)
            return f"{nm(q.subject)}({nm(q.binder)}) {sym} {{{inner}}}"
        raise TypeError(f"not a process: {q!r}")

    # display names must not collide; uniquify where needed
    texts: dict[str, Name] = {}
    clashes = False
    for n in sorted(_all_names(p), key=lambda n: n.uid):
        if n.text in texts and texts[n.text] != n:
            clashes = True
        texts.setdefault(n.text, n)
    if clashes:
        p = _uniquify_display(p)
    return go(p)


def _all_names(p: Process) -> set[Name]:
    out = set(pfree_names(p))

    def walk(q):
        if isinstance(q, PPar):
            walk(q.left)
            walk(q.right)
        elif isinstance(q, PRes):
            out.update((q.left, q.right))
            walk(q.body)
        elif isinstance(q, PIn):
            out.update((q.binder1, q.binder2))
            walk(q.body)
        elif isinstance(q, PBra):
            out.add(q.binder)
            for _, b in q.branches:
                walk(b)

    walk(p)
    return out


def _uniquify_display(p: Process) -> Process:
    used: set[str] = {n.text for n in pfree_names(p)}
    mapping: dict[Name, Name] = {}

    def freshen(n: Name) -> Name:
        text = n.text or "v"
        while text in used:
            text += "'"
        used.add(text)
        nn = Name(text, n.uid)
        mapping[n] = nn
        return nn

    def walk(q: Process) -> Process:
        if isinstance(q, Inact):
            return q
        if isinstance(q, Fwd):
            return Fwd(mapping.get(q.left, q.left), mapping.get(q.right, q.right))
        if isinstance(q, PPar):
            return PPar(walk(q.left), walk(q.right))
        if isinstance(q, PRes):
            l, r = freshen(q.left), freshen(q.right)
            return PRes(l, r, walk(q.body), q.fwd_enabled, q.ann)
        if isinstance(q, Out):
            return Out(mapping.get(q.subject, q.subject),
                       mapping.get(q.arg1, q.arg1), mapping.get(q.arg2, q.arg2))
        if isinstance(q, PIn):
            s = mapping.get(q.subject, q.subject)
            b1, b2 = freshen(q.binder1), freshen(q.binder2)
            return PIn(s, b1, b2, walk(q.body))
        if isinstance(q, PSel):
            return PSel(mapping.get(q.subject, q.subject),
                        mapping.get(q.arg, q.arg), q.label)
        if isinstance(q, PBra):
            s = mapping.get(q.subject, q.subject)
            b = freshen(q.binder)
            return PBra(s, b, tuple((l, walk(x)) for l, x in q.branches))
        raise TypeError(f"not a process: {q!r}")

    return walk(p)


# ---------------------------------------------------------------------------
# Textual parser (round-trips with print_process)

class ProcessParseError(Exception):
    pass


def _ptokens(text: str) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("--", i):
            while i < len(text) and text[i] != "\n":
                i += 1
            continue
        if ch.isalnum() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            out.append(text[i:j])
            i = j
            continue
        if text.startswith("nu+", i):
            out.append("nu+")
            i += 3
            continue
        if ch in "()[]{}<>.,:|*%&+":
            out.append(ch)
            i += 1
            continue
        raise ProcessParseError(f"unexpected character {ch!r}")
    return out


class _PParser:
    def __init__(self, toks: list[str]):
        self.toks = toks
        self.i = 0
        self.names: dict[str, Name] = {}

    def peek(self, k: int = 0) -> str:
        return self.toks[self.i + k] if self.i + k < len(self.toks) else ""

    def next(self) -> str:
        t = self.peek()
        self.i += 1
        return t

    def expect(self, t: str) -> None:
        got = self.next()
        if got != t:
            raise ProcessParseError(f"expected {t!r}, found {got!r}")

    def name(self) -> Name:
        t = self.next()
        if not t or not (t[0].isalpha() or t[0] == "_"):
            raise ProcessParseError(f"expected a name, found {t!r}")
        if t not in self.names:
            self.names[t] = fresh(t)
        return self.names[t]

    def bind(self, text: str) -> Name:
        n = fresh(text)
        self.names[text] = n
        return n

    # -- types

    def priority(self) -> Priority:
        t = self.next()
        if t == "w":
            return OMEGA
        if t.isdigit():
            return Const(int(t))
        if t.startswith("p") and t[1:].isdigit():
            return PVar(int(t[1:]))
        raise ProcessParseError(f"expected a priority, found {t!r}")

    def _opt_pri(self) -> Priority:
        if self.peek() == "[":
            self.next()
            p = self.priority()
            self.expect("]")
            return p
        return fresh_pvar()

    def ptype(self) -> PTy:
        left = self.ptype_atom()
        if self.peek() in ("*", "%"):
            op = self.next()
            pri = self._opt_pri()
            right = self.ptype_atom()
            return Tensor(pri, left, right) if op == "*" else ParT(pri, left, right)
        return left

    def ptype_atom(self) -> PTy:
        t = self.peek()
        if t == "o":
            self.next()
            return BULLET
        if t in ("+", "&"):
            self.next()
            pri = self._opt_pri()
            self.expect("{")
            branches = []
            while True:
                lbl = self.next()
                self.expect(":")
                branches.append((lbl, self.ptype()))
                if self.peek() == ",":
                    self.next()
                    continue
                break
            self.expect("}")
            mk = Plus if t == "+" else With
            return mk(pri, tuple(branches))
        if t == "(":
            self.next()
            inner = self.ptype()
            self.expect(")")
            return inner
        raise ProcessParseError(f"expected a type, found {t!r}")

    # -- processes

    def process(self) -> Process:
        left = self.prefixed()
        while self.peek() == "|":
            self.next()
            left = PPar(left, self.prefixed())
        return left

    def prefixed(self) -> Process:
        t = self.peek()
        if t == "0":
            self.next()
            return INACT
        if t == "fwd":
            self.next()
            return Fwd(self.name(), self.name())
        if t == "(":
            if self.peek(1) in ("nu", "nu+"):
                self.next()
                tag = self.next()
                xt = self.next()
                ann = None
                if self.peek() == ":":
                    self.next()
                    ann = self.ptype()
                x = self.bind(xt)
                y = self.bind(self.next())
                self.expect(")")
                body = self.process()  # maximal scope
                return PRes(x, y, body, fwd_enabled=(tag == "nu+"), ann=ann)
            self.next()
            inner = self.process()
            self.expect(")")
            return inner
        subject = self.name()
        t = self.next()
        if t == "[":
            a = self.name()
            if self.peek() == ",":
                self.next()
                b = self.name()
                self.expect("]")
                return Out(subject, a, b)
            self.expect("]")
            self.expect("<")
            label = self.next()
            return PSel(subject, a, label)
        if t == "(":
            b1t = self.next()
            if self.peek() == ",":
                self.next()
                b2t = self.next()
                self.expect(")")
                self.expect(".")
                b1, b2 = self.bind(b1t), self.bind(b2t)
                return PIn(subject, b1, b2, self.prefixed())
            self.expect(")")
            self.expect(">")
            self.expect("{")
            binder = self.bind(b1t)
            branches = []
            while True:
                lbl = self.next()
                self.expect(":")
                branches.append((lbl, self.process()))
                if self.peek() == ",":
                    self.next()
                    continue
                break
            self.expect("}")
            return PBra(subject, binder, tuple(branches))
        raise ProcessParseError(f"unexpected token {t!r}")


def parse_process(text: str) -> Process:
    p = _PParser(_ptokens(text))
    out = p.process()
    if p.peek():
        raise ProcessParseError(f"trailing input {p.peek()!r}")
    return out
