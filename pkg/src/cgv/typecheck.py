"""Algorithmic linear typechecker for terms, buffers and configurations.

Linearity is handled leftover-style: judgments thread the environment
through subterms left to right and return the unconsumed residue, instead
of guessing context splits. end-typed entries are non-linear (a variable
statically known at end may be used any number of times, including zero,
and leftover end entries are droppable); every other entry must be used
exactly once. Checking is bidirectional: introduction forms receive the
expected type, eliminators synthesize from the scrutinee. Successful
checks produce full derivation trees, which the process translation
consumes rule by rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .names import Name
from . import syntax as S
from .pretty import print_funtype, print_session

TypeEnv = dict[Name, S.FunType]


class TypeCheckError(Exception):
    def __init__(self, code: str, message: str, span: Optional[S.Span] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.span = span

    def structured(self) -> str:
        span = f"{self.span[0]}:{self.span[1]}" if self.span else "-"
        return f"error | {self.code} | {span} | {self.message}"


def _err(code: str, message: str, span=None) -> TypeCheckError:
    return TypeCheckError(code, message, span)


def is_end(ty: S.FunType) -> bool:
    return isinstance(ty, S.Sess) and isinstance(ty.session, S.EndType)


@dataclass
class Derivation:
    """One node of a typing derivation. env is the consumed context of the
    judgment (end-typed names are never consumed and never appear here)."""
    rule: str
    env: TypeEnv
    premises: tuple["Derivation", ...] = ()
    term: Optional[S.Term] = None
    config: Optional[S.Configuration] = None
    buffer: Optional[S.Buffer] = None
    ty: Optional[S.FunType] = None
    marker: Optional[str] = None
    cont: Optional[S.SessionType] = None   # buffer judgments: S'
    outer: Optional[S.SessionType] = None  # buffer judgments: S
    info: dict = field(default_factory=dict)


def _consumed(before: TypeEnv, after: TypeEnv) -> TypeEnv:
    return {n: t for n, t in before.items() if n not in after}


def _tyname(ty: S.FunType) -> str:
    return print_funtype(ty)


class Checker:
    """Carries the bookkeeping shared by one checking run (the set of names
    consumed so far, for use-twice diagnostics)."""

    def __init__(self):
        self.consumed: set[Name] = set()

    # ------------------------------------------------------------------
    # terms

    def synth(self, env: TypeEnv, t: S.Term) -> tuple[S.FunType, TypeEnv, Derivation]:
        if isinstance(t, S.Var):
            return self._use_var(env, t)
        if isinstance(t, S.Unit):
            return S.UNIT, env, Derivation("T-UNIT", {}, term=t, ty=S.UNIT)
        if isinstance(t, S.New):
            if t.ann is None:
                raise _err("annotation-required", "new requires a protocol annotation new[S]", t.span)
            ty = S.Prod(S.Sess(t.ann), S.Sess(S.dual_session(t.ann)))
            return ty, env, Derivation("T-NEW", {}, term=t, ty=ty, info={"session": t.ann})
        if isinstance(t, S.Abs):
            if t.ann is None:
                raise _err("annotation-required",
                           "cannot synthesize an unannotated lambda binder", t.span)
            return self._abs(env, t, t.ann, None)
        if isinstance(t, S.App):
            if isinstance(t.fn, S.Abs) and t.fn.ann is None:
                # let-style application: the bound term drives the binder type
                aty, l1, d2 = self.synth(env, t.arg)
                rty, l2, d1 = self._abs(l1, t.fn, aty, None)
                assert isinstance(rty, S.Arrow)
                return rty.res, l2, Derivation(
                    "T-APP", _consumed(env, l2), (d1, d2), term=t, ty=rty.res)
            fty, l1, d1 = self.synth(env, t.fn)
            if not isinstance(fty, S.Arrow):
                raise _err("type-mismatch",
                           f"application of a non-function of type {_tyname(fty)}", t.span)
            l2, d2 = self.check(l1, t.arg, fty.arg)
            return fty.res, l2, Derivation(
                "T-APP", _consumed(env, l2), (d1, d2), term=t, ty=fty.res)
        if isinstance(t, S.Pair):
            ta, l1, d1 = self.synth(env, t.left)
            tb, l2, d2 = self.synth(l1, t.right)
            ty = S.Prod(ta, tb)
            return ty, l2, Derivation("T-PAIR", _consumed(env, l2), (d1, d2), term=t, ty=ty)
        if isinstance(t, S.LetPair):
            return self._letpair(env, t, None)
        if isinstance(t, S.Spawn):
            aty, l1, d1 = self.synth(env, t.arg)
            if not (isinstance(aty, S.Prod) and aty.left == S.UNIT):
                raise _err("type-mismatch",
                           f"spawn needs a 1 * T pair, got {_tyname(aty)}", t.span)
            return aty.right, l1, Derivation(
                "T-SPAWN", _consumed(env, l1), (d1,), term=t, ty=aty.right)
        if isinstance(t, S.Send):
            aty, l1, d1 = self.synth(env, t.arg)
            ok = (isinstance(aty, S.Prod) and isinstance(aty.right, S.Sess)
                  and isinstance(aty.right.session, S.Out)
                  and aty.right.session.payload == aty.left)
            if not ok:
                raise _err("type-mismatch",
                           f"send needs a T * !T.S pair, got {_tyname(aty)}", t.span)
            ty = S.Sess(aty.right.session.cont)
            return ty, l1, Derivation("T-SEND", _consumed(env, l1), (d1,), term=t, ty=ty)
        if isinstance(t, S.Recv):
            aty, l1, d1 = self.synth(env, t.arg)
            if not (isinstance(aty, S.Sess) and isinstance(aty.session, S.In)):
                raise _err("type-mismatch",
                           f"recv needs a ?T.S endpoint, got {_tyname(aty)}", t.span)
            ty = S.Prod(aty.session.payload, S.Sess(aty.session.cont))
            return ty, l1, Derivation("T-RECV", _consumed(env, l1), (d1,), term=t, ty=ty)
        if isinstance(t, S.Select):
            aty, l1, d1 = self.synth(env, t.arg)
            if not (isinstance(aty, S.Sess) and isinstance(aty.session, S.Sel)):
                raise _err("type-mismatch",
                           f"select needs a +{{...}} endpoint, got {_tyname(aty)}", t.span)
            bm = aty.session.branch_map()
            if t.label not in bm:
                raise _err("label-missing", f"label {t.label!r} not offered by {_tyname(aty)}",
                           t.span)
            ty = S.Sess(bm[t.label])
            return ty, l1, Derivation("T-SELECT", _consumed(env, l1), (d1,), term=t, ty=ty,
                                      info={"label": t.label})
        if isinstance(t, S.Case):
            return self._case(env, t, None)
        if isinstance(t, S.ExplSub):
            sty, l1, dN = self.synth(env, t.subst)
            l1b = dict(l1)
            l1b[t.binder] = sty
            uty, l2, dM = self.synth(l1b, t.body)
            l2 = self._close_binder(l2, t.binder, t.span)
            return uty, l2, Derivation(
                "T-SUB", _consumed(env, l2), (dM, dN), term=t, ty=uty,
                info={"binder": t.binder, "binder_ty": sty})
        if isinstance(t, S.SendPrime):
            nty, l1, dN = self.synth(env, t.target)
            if not (isinstance(nty, S.Sess) and isinstance(nty.session, S.Out)):
                raise _err("type-mismatch",
                           f"send' needs a !T.S target, got {_tyname(nty)}", t.span)
            l2, dM = self.check(l1, t.payload, nty.session.payload)
            ty = S.Sess(nty.session.cont)
            return ty, l2, Derivation("T-SEND'", _consumed(env, l2), (dM, dN), term=t, ty=ty)
        raise _err("type-mismatch", f"cannot synthesize {type(t).__name__}", t.span)

    def check(self, env: TypeEnv, t: S.Term, expected: S.FunType) -> tuple[TypeEnv, Derivation]:
        if isinstance(t, S.Abs) and isinstance(expected, S.Arrow):
            if t.ann is not None and t.ann != expected.arg:
                raise _err("type-mismatch",
                           f"binder annotated {_tyname(t.ann)} where {_tyname(expected.arg)} "
                           "is required", t.span)
            _, leftover, d = self._abs(env, t, t.ann or expected.arg, expected.res)
            return leftover, d
        if isinstance(t, S.Pair) and isinstance(expected, S.Prod):
            l1, d1 = self.check(env, t.left, expected.left)
            l2, d2 = self.check(l1, t.right, expected.right)
            return l2, Derivation("T-PAIR", _consumed(env, l2), (d1, d2), term=t, ty=expected)
        if isinstance(t, S.LetPair):
            _, leftover, d = self._letpair(env, t, expected)
            return leftover, d
        if isinstance(t, S.Case):
            _, leftover, d = self._case(env, t, expected)
            return leftover, d
        if isinstance(t, S.App) and isinstance(t.fn, S.Abs) and t.fn.ann is None:
            aty, l1, d2 = self.synth(env, t.arg)
            _, l2, d1 = self._abs(l1, t.fn, aty, expected)
            return l2, Derivation("T-APP", _consumed(env, l2), (d1, d2),
                                  term=t, ty=expected)
        if isinstance(t, S.ExplSub):
            sty, l1, dN = self.synth(env, t.subst)
            l1b = dict(l1)
            l1b[t.binder] = sty
            l2, dM = self.check(l1b, t.body, expected)
            l2 = self._close_binder(l2, t.binder, t.span)
            return l2, Derivation("T-SUB", _consumed(env, l2), (dM, dN), term=t, ty=expected,
                                  info={"binder": t.binder, "binder_ty": sty})
        if isinstance(t, S.Var) and is_end(expected):
            return self._check_end_var(env, t)
        actual, leftover, d = self.synth(env, t)
        if actual != expected:
            raise _err("type-mismatch",
                       f"expected {_tyname(expected)}, got {_tyname(actual)}", t.span)
        return leftover, d

    def _use_var(self, env: TypeEnv, t: S.Var) -> tuple[S.FunType, TypeEnv, Derivation]:
        ty = env.get(t.name)
        if ty is None:
            if t.name in self.consumed:
                raise _err("linearity", f"{t.name.text} is used more than once", t.span)
            raise _err("unbound-variable", f"unbound variable {t.name.text}", t.span)
        if is_end(ty):
            # finished sessions are shareable; occurrences carry no context
            return ty, env, Derivation("T-ENDR", {}, term=t, ty=ty)
        leftover = dict(env)
        del leftover[t.name]
        self.consumed.add(t.name)
        return ty, leftover, Derivation("T-VAR", {t.name: ty}, term=t, ty=ty)

    def _check_end_var(self, env: TypeEnv, t: S.Var) -> tuple[TypeEnv, Derivation]:
        ty = env.get(t.name)
        if ty is None:
            if t.name in self.consumed:
                raise _err("linearity", f"{t.name.text} is used more than once", t.span)
            raise _err("unbound-variable", f"unbound variable {t.name.text}", t.span)
        if not is_end(ty):
            raise _err("type-mismatch",
                       f"expected end, got {_tyname(ty)}", t.span)
        return env, Derivation("T-ENDR", {}, term=t, ty=ty)

    def _abs(self, env: TypeEnv, t: S.Abs, binder_ty: S.FunType,
             expected_res: Optional[S.FunType]) -> tuple[S.FunType, TypeEnv, Derivation]:
        env2 = dict(env)
        env2[t.binder] = binder_ty
        if expected_res is None:
            res_ty, leftover, d_body = self.synth(env2, t.body)
        else:
            leftover, d_body = self.check(env2, t.body, expected_res)
            res_ty = expected_res
        leftover = self._close_binder(leftover, t.binder, t.span)
        ty = S.Arrow(binder_ty, res_ty)
        return ty, leftover, Derivation(
            "T-ABS", _consumed(env, leftover), (d_body,), term=t, ty=ty,
            info={"binder": t.binder, "binder_ty": binder_ty})

    def _letpair(self, env: TypeEnv, t: S.LetPair,
                 expected: Optional[S.FunType]) -> tuple[S.FunType, TypeEnv, Derivation]:
        sty, l1, d1 = self.synth(env, t.scrutinee)
        if not isinstance(sty, S.Prod):
            raise _err("type-mismatch",
                       f"let (x, y) needs a pair, got {_tyname(sty)}", t.span)
        env2 = dict(l1)
        env2[t.binder1] = sty.left
        env2[t.binder2] = sty.right
        if expected is None:
            ty, l2, d2 = self.synth(env2, t.body)
        else:
            l2, d2 = self.check(env2, t.body, expected)
            ty = expected
        l2 = self._close_binder(l2, t.binder1, t.span)
        l2 = self._close_binder(l2, t.binder2, t.span)
        return ty, l2, Derivation(
            "T-SPLIT", _consumed(env, l2), (d1, d2), term=t, ty=ty,
            info={"binder1": t.binder1, "binder2": t.binder2,
                  "ty1": sty.left, "ty2": sty.right})

    def _case(self, env: TypeEnv, t: S.Case,
              expected: Optional[S.FunType]) -> tuple[S.FunType, TypeEnv, Derivation]:
        sty, l1, d1 = self.synth(env, t.scrutinee)
        if not (isinstance(sty, S.Sess) and isinstance(sty.session, S.Bra)):
            raise _err("type-mismatch",
                       f"case needs a &{{...}} endpoint, got {_tyname(sty)}", t.span)
        bm = sty.session.branch_map()
        got = [l for l, _ in t.branches]
        if set(got) != set(bm) or len(got) != len(set(got)):
            raise _err("label-missing",
                       f"case branches {got} do not match offered labels {sorted(bm)}", t.span)
        # every branch must consume the same resources; check them from the
        # same residue and insist the leftovers agree
        branch_ds = []
        result_leftover: Optional[TypeEnv] = None
        res_ty = expected
        for lbl, body in t.branches:
            want: Optional[S.FunType] = None
            if res_ty is not None:
                want = S.Arrow(S.Sess(bm[lbl]), res_ty)
            snapshot = dict(l1)
            if want is None:
                bty, lb, db = self.synth(snapshot, body)
                if not (isinstance(bty, S.Arrow) and bty.arg == S.Sess(bm[lbl])):
                    raise _err("type-mismatch",
                               f"branch {lbl!r} must accept the {lbl} continuation", t.span)
                res_ty = bty.res
            else:
                lb, db = self.check(snapshot, body, want)
            if result_leftover is None:
                result_leftover = lb
            elif set(result_leftover) != set(lb):
                raise _err("linearity",
                           "case branches consume different resources", t.span)
            branch_ds.append(db)
        assert result_leftover is not None and res_ty is not None
        return res_ty, result_leftover, Derivation(
            "T-CASE", _consumed(env, result_leftover), tuple([d1] + branch_ds),
            term=t, ty=res_ty,
            info={"labels": got, "branch_sessions": bm})

    def _close_binder(self, leftover: TypeEnv, binder: Name, span) -> TypeEnv:
        if binder in leftover:
            if not is_end(leftover[binder]):
                raise _err("linearity",
                           f"{binder.text} : {_tyname(leftover[binder])} is never used", span)
            leftover = dict(leftover)
            del leftover[binder]  # droppable: finished session
        return leftover

    # ------------------------------------------------------------------
    # buffers

    def buffer_walk(self, env: TypeEnv, buf: S.Buffer, outer: S.SessionType
                    ) -> tuple[S.SessionType, TypeEnv, Derivation]:
        """Checks the messages of buf against the outer protocol of the write
        endpoint, oldest (rightmost) message first, and returns the remaining
        continuation. The derivation is rooted at the oldest message."""
        msgs = buf.messages
        if not msgs:
            return outer, env, Derivation("T-BUF", {}, buffer=buf, cont=outer, outer=outer)
        oldest = msgs[-1]
        rest = S.Buffer(msgs[:-1])
        if isinstance(oldest, S.TermMsg):
            if not isinstance(outer, S.Out):
                raise _err("buffer-mismatch",
                           f"buffered term where the protocol is {print_session(outer)}")
            l1, d_msg = self.check(env, oldest.term, outer.payload)
            cont, l2, d_rest = self.buffer_walk(l1, rest, outer.cont)
            return cont, l2, Derivation(
                "T-BUFSEND", _consumed(env, l2), (d_msg, d_rest), buffer=buf,
                cont=cont, outer=outer, info={"payload_ty": outer.payload})
        assert isinstance(oldest, S.LabelMsg)
        if not isinstance(outer, S.Sel):
            raise _err("buffer-mismatch",
                       f"buffered label where the protocol is {print_session(outer)}")
        bm = outer.branch_map()
        if oldest.label not in bm:
            raise _err("label-missing",
                       f"buffered label {oldest.label!r} not in {print_session(outer)}")
        cont, l1, d_rest = self.buffer_walk(env, rest, bm[oldest.label])
        return cont, l1, Derivation(
            "T-BUFSELECT", _consumed(env, l1), (d_rest,), buffer=buf,
            cont=cont, outer=outer, info={"label": oldest.label})

    def buffer_wrap(self, env: TypeEnv, buf: S.Buffer, continuation: S.SessionType
                    ) -> tuple[S.SessionType, TypeEnv, Derivation]:
        """Synthesizes the outer protocol from a given continuation by folding
        messages newest first; labels need the annotated walk instead."""
        def go(msgs: tuple[S.Message, ...]) -> tuple[S.SessionType, TypeEnv, Derivation]:
            # msgs is a newest-first prefix; recursion peels the newest
            nonlocal env
            if not msgs:
                return continuation, env, Derivation(
                    "T-BUF", {}, buffer=S.Buffer(()), cont=continuation, outer=continuation)
            newest, rest = msgs[0], msgs[1:]
            inner_outer, leftover, d_rest = go(rest)
            if isinstance(newest, S.LabelMsg):
                raise _err("annotation-required",
                           "a buffered label needs the restriction's protocol annotation")
            before = dict(leftover)
            mty, l2, d_msg = self.synth(leftover, newest.term)
            outer = S.Out(mty, inner_outer)
            env = l2
            return outer, l2, Derivation(
                "T-BUFSEND", _consumed(before, l2), (d_msg, d_rest),
                buffer=S.Buffer(msgs), cont=continuation, outer=outer,
                info={"payload_ty": mty})
        return go(buf.messages)

    # ------------------------------------------------------------------
    # configurations

    def config(self, env: TypeEnv, c: S.Configuration, expected: S.FunType
               ) -> tuple[str, TypeEnv, Derivation]:
        if isinstance(c, S.Thread):
            if c.marker == S.CHILD and expected != S.UNIT:
                raise _err("child-not-unit",
                           f"a child thread has type 1, not {_tyname(expected)}")
            leftover, d = self.check(env, c.term, expected)
            rule = "T-MAIN" if c.marker == S.MAIN else "T-CHILD"
            return c.marker, leftover, Derivation(
                rule, _consumed(env, leftover), (d,), config=c, ty=expected, marker=c.marker)
        if isinstance(c, S.Par):
            main_l, main_r = has_main(c.left), has_main(c.right)
            if main_l and main_r:
                raise _err("two-main-threads", "two main threads in parallel")
            if main_l:
                return self._par(env, c, expected, rule="T-PARR")
            if main_r:
                return self._par(env, c, expected, rule="T-PARL")
            try:
                return self._par(env, dict_copy_cfg(c), expected, rule="T-PARL")
            except TypeCheckError:
                if expected == S.UNIT:
                    raise
                return self._par(env, c, expected, rule="T-PARR")
        if isinstance(c, S.Res):
            return self._res(env, c, expected)
        if isinstance(c, S.ConfSub):
            sty, l1, dM = self.synth(env, c.subst)
            l1b = dict(l1)
            l1b[c.binder] = sty
            marker, l2, dC = self.config(l1b, c.body, expected)
            l2 = self._close_binder(l2, c.binder, None)
            return marker, l2, Derivation(
                "T-CONFSUB", _consumed(env, l2), (dC, dM), config=c, ty=expected,
                marker=marker, info={"binder": c.binder, "binder_ty": sty})
        raise _err("type-mismatch", f"not a configuration: {type(c).__name__}")

    def _par(self, env: TypeEnv, c: S.Par, expected: S.FunType, rule: str
             ) -> tuple[str, TypeEnv, Derivation]:
        if rule == "T-PARL":
            # left provides 1 without a main thread, right provides expected
            m1, l1, d1 = self.config(env, c.left, S.UNIT)
            if m1 == S.MAIN:
                raise _err("two-main-threads", "main thread on the unit side of a composition")
            m2, l2, d2 = self.config(l1, c.right, expected)
        else:
            m2, l2a, d2 = self.config(env, c.left, expected)
            m1, l2, d1 = self.config(l2a, c.right, S.UNIT)
            if m1 == S.MAIN:
                raise _err("two-main-threads", "main thread on the unit side of a composition")
            d1, d2 = d2, d1  # premises in source order: (left, right)
        marker = S.add_markers(m1, m2)
        return marker, l2, Derivation(
            rule, _consumed(env, l2), (d1, d2), config=c, ty=expected, marker=marker)

    def _res(self, env: TypeEnv, c: S.Res, expected: S.FunType
             ) -> tuple[str, TypeEnv, Derivation]:
        if c.ann is None:
            if not c.buffer.empty:
                raise _err("annotation-required",
                           "a restriction with a non-empty buffer needs a protocol annotation")
            raise _err("annotation-required",
                       f"restriction (nu {c.out_end.text} ... {c.in_end.text}) needs a "
                       "protocol annotation to be checked")
        outer = c.ann
        y_ty: S.FunType = S.Sess(S.dual_session(outer))
        env2 = dict(env)
        env2[c.in_end] = y_ty
        cont, l1, d_buf = self.buffer_walk(env2, c.buffer, outer)
        y_in_buffer = c.in_end not in l1
        env3 = dict(l1)
        env3[c.out_end] = S.Sess(cont)
        marker, l2, d_body = self.config(env3, c.body, expected)
        l2 = self._close_binder(l2, c.out_end, None)
        if not y_in_buffer:
            l2 = self._close_binder(l2, c.in_end, None)
        rule = "T-RESBUF" if y_in_buffer else "T-RES"
        return marker, l2, Derivation(
            rule, _consumed(env, l2), (d_buf, d_body), config=c, ty=expected, marker=marker,
            info={"out_end": c.out_end, "in_end": c.in_end,
                  "outer": outer, "cont": cont})


def dict_copy_cfg(c):
    return c  # configurations are immutable; alias for readability at call site


def has_main(c: S.Configuration) -> bool:
    if isinstance(c, S.Thread):
        return c.marker == S.MAIN
    if isinstance(c, S.Par):
        return has_main(c.left) or has_main(c.right)
    if isinstance(c, S.Res):
        return has_main(c.body)
    if isinstance(c, S.ConfSub):
        return has_main(c.body)
    raise TypeError(f"not a configuration: {c!r}")


# ---------------------------------------------------------------------------
# public entry points

def check_term(env: TypeEnv, term: S.Term, expected: S.FunType) -> TypeEnv:
    """Checks env |- term : expected; returns the leftover environment (which
    can only contain end-typed entries if the caller demands everything be
    consumed). Raises TypeCheckError."""
    leftover, _ = Checker().check(dict(env), term, expected)
    return leftover


def check_term_derivation(env: TypeEnv, term: S.Term, expected: S.FunType) -> Derivation:
    _, d = Checker().check(dict(env), term, expected)
    return d


def synth_term(env: TypeEnv, term: S.Term) -> tuple[S.FunType, TypeEnv]:
    ty, leftover, _ = Checker().synth(dict(env), term)
    return ty, leftover


def check_buffer(env: TypeEnv, buffer: S.Buffer, continuation: S.SessionType,
                 annotation: Optional[S.SessionType] = None,
                 require_empty: bool = True) -> S.SessionType:
    """Returns the outer protocol S with env |- buffer : continuation > S.
    With an annotation the messages are checked against it; without one their
    types are synthesized (labels then cannot be typed)."""
    ck = Checker()
    if annotation is not None:
        cont, leftover, _ = ck.buffer_walk(dict(env), buffer, annotation)
        if cont != continuation:
            raise _err("buffer-mismatch",
                       f"buffer leaves {print_session(cont)}, "
                       f"expected {print_session(continuation)}")
        outer = annotation
    else:
        outer, leftover, _ = ck.buffer_wrap(dict(env), buffer, continuation)
    if require_empty:
        bad = [n for n, t in leftover.items() if not is_end(t)]
        if bad:
            raise _err("linearity",
                       f"unused buffer resources: {', '.join(n.text for n in bad)}")
    return outer


def check_config(env: TypeEnv, config: S.Configuration, expected: S.FunType) -> str:
    """Checks env |-phi config : expected and returns the thread marker."""
    marker, leftover, _ = Checker().config(dict(env), config, expected)
    bad = [n for n, t in leftover.items() if not is_end(t)]
    if bad:
        raise _err("linearity",
                   f"unused resources: {', '.join(n.text for n in bad)}")
    return marker


def check_config_derivation(env: TypeEnv, config: S.Configuration,
                            expected: S.FunType) -> tuple[str, Derivation]:
    marker, leftover, d = Checker().config(dict(env), config, expected)
    bad = [n for n, t in leftover.items() if not is_end(t)]
    if bad:
        raise _err("linearity",
                   f"unused resources: {', '.join(n.text for n in bad)}")
    return marker, d
