"""Typing-derivation-directed translation of the functional calculus into
the process calculus.

The translation follows the derivation rule by rule. A term judgment
translates to a process providing the term's type on a chosen fresh
endpoint; every subterm is guarded by an extra input so that it cannot run
until the context activates it, which is what makes the translation respect
the source evaluation order even though outputs here never block. Buffered
messages become chained forwarded outputs, oldest outermost. Priorities are
not considered at all: every connective gets a fresh priority variable, and
the deadlock certifier solves the constraints the strict typechecker emits
afterwards.

Forwarder-enabled restrictions appear exactly at the four substitution-like
sites (lambda binders, pair-split binders, explicit substitutions at term
and configuration level).
"""

from __future__ import annotations

from typing import Optional

from .names import Name, fresh
from . import syntax as S
from . import apcp as A
from .typecheck import Derivation


def trans_type(t) -> A.PTy:
    """Types translate protocol-dualized (an endpoint typed for sending is
    used by a process that listens for the activation), with a fresh
    priority variable on every connective."""
    v = A.fresh_pvar
    if isinstance(t, S.UnitType):
        return A.BULLET
    if isinstance(t, S.Prod):
        return A.Tensor(v(),
                        A.ParT(v(), trans_type(t.left), A.BULLET),
                        A.ParT(v(), trans_type(t.right), A.BULLET))
    if isinstance(t, S.Arrow):
        return A.ParT(v(),
                      A.Tensor(v(), A.pdual(trans_type(t.arg)), A.BULLET),
                      trans_type(t.res))
    if isinstance(t, S.Sess):
        return trans_type(t.session)
    if isinstance(t, S.EndType):
        return A.BULLET
    if isinstance(t, S.Out):
        return A.ParT(v(),
                      A.Tensor(v(), A.pdual(trans_type(t.payload)), A.BULLET),
                      trans_type(t.cont))
    if isinstance(t, S.In):
        return A.Tensor(v(),
                        A.ParT(v(), trans_type(t.payload), A.BULLET),
                        trans_type(t.cont))
    if isinstance(t, S.Sel):
        return A.With(v(), tuple((l, trans_type(b)) for l, b in t.branches))
    if isinstance(t, S.Bra):
        return A.Plus(v(), tuple((l, trans_type(b)) for l, b in t.branches))
    raise TypeError(f"not a source type: {t!r}")


def trans_env_dual(env: dict[Name, S.FunType]) -> dict[Name, A.PTy]:
    """The context against which a translated judgment typechecks: each
    hypothesis dualized."""
    return {n: A.pdual(trans_type(ty)) for n, ty in env.items()}


def _sess(ty: S.FunType) -> S.SessionType:
    assert isinstance(ty, S.Sess)
    return ty.session


def _res(x: Name, y: Name, ann: A.PTy, *parts: A.Process,
         fwd: bool = False) -> A.Process:
    return A.PRes(x, y, A.par(*parts), fwd_enabled=fwd, ann=ann)


def _bullet_pair(out_subject: Name, arg1: Name) -> A.Process:
    """(nu e f) subject[arg1, e] with both fresh ends closed: the pattern
    used whenever a rule needs a throwaway endpoint in an output."""
    e, f = fresh("e"), fresh("f")
    return _res(e, f, A.BULLET, A.Out(out_subject, arg1, e))


def trans_term(d: Derivation, z: Name) -> A.Process:
    r = d.rule
    if r == "T-VAR":
        return A.Fwd(d.term.name, z)
    if r in ("T-UNIT", "T-ENDR"):
        return A.INACT
    if r == "T-ABS":
        x = d.info["binder"]
        t_arg = trans_type(d.info["binder_ty"])
        a, b, c = fresh("a"), fresh("b"), fresh("c")
        body = trans_term(d.premises[0], b)
        return A.PIn(z, a, b,
                     _res(c, x, t_arg, _bullet_pair(a, c), body, fwd=True))
    if r == "T-APP":
        dm, dn = d.premises
        a, b, c, dd, e, f = (fresh(t) for t in "abcdef")
        ann_cd = A.Tensor(A.fresh_pvar(), A.pdual(trans_type(dn.ty)), A.BULLET)
        inner = _res(c, dd, ann_cd,
                     A.Out(b, c, z),
                     A.PIn(dd, e, f, trans_term(dn, e)))
        return _res(a, b, trans_type(dm.ty), trans_term(dm, a), inner)
    if r == "T-PAIR":
        dm, dn = d.premises
        a, b, c, dd, e, f, g, h = (fresh(t) for t in "abcdefgh")
        ann_ab = A.Tensor(A.fresh_pvar(), A.pdual(trans_type(dm.ty)), A.BULLET)
        ann_cd = A.Tensor(A.fresh_pvar(), A.pdual(trans_type(dn.ty)), A.BULLET)
        return _res(a, b, ann_ab,
                    _res(c, dd, ann_cd,
                         A.Out(z, a, c),
                         A.PIn(b, e, f, trans_term(dm, e)),
                         A.PIn(dd, g, h, trans_term(dn, g))))
    if r == "T-SPLIT":
        dm, dn = d.premises
        x, y = d.info["binder1"], d.info["binder2"]
        t1, t2 = trans_type(d.info["ty1"]), trans_type(d.info["ty2"])
        a, b, c, dd, e, f = (fresh(t) for t in "abcdef")
        g, h, k, l = (fresh(t) for t in "ghkl")
        body = A.par(
            _res(g, h, A.BULLET, A.Out(c, e, g)),
            _res(k, l, A.BULLET, A.Out(dd, f, k)),
            trans_term(dn, z))
        inner = A.PIn(b, c, dd,
                      A.PRes(e, x, A.PRes(f, y, body, fwd_enabled=True, ann=t2),
                             fwd_enabled=True, ann=t1))
        return _res(a, b, trans_type(dm.ty), trans_term(dm, a), inner)
    if r == "T-NEW":
        sess = d.info["session"]
        t_s = trans_type(sess)
        t_sd = trans_type(S.dual_session(sess))
        a, b, c, dd, e, f = (fresh(t) for t in "abcdef")
        x, y = fresh("x"), fresh("y")
        pair = _pair_of_vars(z, x, t_s, y, t_sd)
        return _res(a, b, A.Tensor(A.fresh_pvar(), A.BULLET, A.BULLET),
                    _res(c, dd, A.BULLET, A.Out(a, c, dd)),
                    A.PIn(b, e, f, A.PRes(x, y, pair, ann=A.pdual(t_s))))
    if r == "T-SPAWN":
        dm = d.premises[0]
        a, b, c, dd = (fresh(t) for t in "abcd")
        e, f = fresh("e"), fresh("f")
        activate_child = _res(e, f, A.BULLET, A.Out(c, e, f))
        return _res(a, b, trans_type(dm.ty),
                    trans_term(dm, a),
                    A.PIn(b, c, dd, A.par(activate_child, _bullet_pair(dd, z))))
    if r == "T-SEND":
        dm = d.premises[0]
        chan = _sess(dm.ty.right)
        assert isinstance(chan, S.Out)
        a, b, c, dd, e, f, k, l = (fresh(t) for t in "abcdefkl")
        ann_ef = trans_type(dm.ty.right)
        ann_kl = trans_type(S.Sess(chan.cont))
        inner = A.PRes(e, f, A.par(
            _bullet_pair(dd, e),
            _res(k, l, ann_kl, A.Out(f, c, k), A.Fwd(l, z))), ann=ann_ef)
        return _res(a, b, trans_type(dm.ty),
                    trans_term(dm, a),
                    A.PIn(b, c, dd, inner))
    if r == "T-RECV":
        dm = d.premises[0]
        chan = _sess(dm.ty)
        assert isinstance(chan, S.In)
        a, b, c, dd, e, f, g, h = (fresh(t) for t in "abcdefgh")
        ann_ef = A.Tensor(A.fresh_pvar(),
                          A.pdual(trans_type(S.Sess(chan.cont))), A.BULLET)
        inner = _res(e, f, ann_ef,
                     A.Out(z, c, e),
                     A.PIn(f, g, h, A.Fwd(dd, g)))
        return _res(a, b, trans_type(dm.ty),
                    trans_term(dm, a),
                    A.PIn(b, c, dd, inner))
    if r == "T-SELECT":
        dm = d.premises[0]
        label = d.info["label"]
        chan = _sess(dm.ty)
        assert isinstance(chan, S.Sel)
        a, b, c, dd = (fresh(t) for t in "abcd")
        ann_cd = trans_type(S.Sess(chan.branch_map()[label]))
        return _res(a, b, trans_type(dm.ty),
                    trans_term(dm, a),
                    _res(c, dd, ann_cd, A.PSel(b, c, label), A.Fwd(dd, z)))
    if r == "T-CASE":
        dm = d.premises[0]
        branch_ds = d.premises[1:]
        labels = d.info["labels"]
        sessions = d.info["branch_sessions"]
        c = fresh("c")
        branches = []
        for lbl, dn in zip(labels, branch_ds):
            branches.append((lbl, _apply_to_endpoint(dn, c, S.Sess(sessions[lbl]), z)))
        branches.sort(key=lambda p: p[0])
        a, b = fresh("a"), fresh("b")
        return _res(a, b, trans_type(dm.ty),
                    trans_term(dm, a),
                    A.PBra(b, c, tuple(branches)))
    if r == "T-SUB":
        dm, dn = d.premises
        x = d.info["binder"]
        a = fresh("a")
        ann = A.pdual(trans_type(d.info["binder_ty"]))
        return A.PRes(x, a, A.par(trans_term(dm, z), trans_term(dn, a)),
                      fwd_enabled=True, ann=ann)
    if r == "T-SEND'":
        dm, dn = d.premises
        chan = _sess(dn.ty)
        assert isinstance(chan, S.Out)
        a, b, c, dd, e, f, g, h = (fresh(t) for t in "abcdefgh")
        ann_ab = A.ParT(A.fresh_pvar(), trans_type(dm.ty), A.BULLET)
        ann_gh = trans_type(S.Sess(chan.cont))
        return _res(a, b, ann_ab,
                    A.PIn(a, c, dd, trans_term(dm, c)),
                    _res(e, f, trans_type(dn.ty),
                         trans_term(dn, e),
                         _res(g, h, ann_gh, A.Out(f, b, g), A.Fwd(h, z))))
    raise ValueError(f"unexpected term rule {r}")


def _pair_of_vars(z: Name, x: Name, tx: A.PTy, y: Name, ty: A.PTy) -> A.Process:
    """The translation of a pair of two variables (used by channel creation:
    both components are endpoint references)."""
    a, b, c, dd = (fresh(t) for t in "abcd")
    e, f, g, h = (fresh(t) for t in "efgh")
    ann_ab = A.Tensor(A.fresh_pvar(), A.pdual(tx), A.BULLET)
    ann_cd = A.Tensor(A.fresh_pvar(), A.pdual(ty), A.BULLET)
    return _res(a, b, ann_ab,
                _res(c, dd, ann_cd,
                     A.Out(z, a, c),
                     A.PIn(b, e, f, A.Fwd(x, e)),
                     A.PIn(dd, g, h, A.Fwd(y, g))))


def _apply_to_endpoint(dn: Derivation, c: Name, cty: S.FunType, z: Name) -> A.Process:
    """The translation of the application of a branch body to the received
    continuation endpoint c (an inlined application whose argument is the
    endpoint reference)."""
    a, b, c2, d2, e, f = (fresh(t) for t in "abcdef")
    ann_cd = A.Tensor(A.fresh_pvar(), A.pdual(trans_type(cty)), A.BULLET)
    inner = _res(c2, d2, ann_cd,
                 A.Out(b, c2, z),
                 A.PIn(d2, e, f, A.Fwd(c, e)))
    return _res(a, b, trans_type(dn.ty), trans_term(dn, a), inner)


def trans_buffer(d: Derivation, x: Name, k: A.Process) -> A.Process:
    """Buffered messages become a chain of forwarded outputs on x, oldest
    outermost; the continuation k interacts with the last continuation
    endpoint (which keeps the name x)."""
    r = d.rule
    if r == "T-BUF":
        return k
    if r == "T-BUFSEND":
        d_msg, d_rest = d.premises
        outer = d.outer
        assert isinstance(outer, S.Out)
        a, b, c, dd, g, h = (fresh(t) for t in "abcdgh")
        ann_ab = A.Tensor(A.fresh_pvar(), A.pdual(trans_type(outer.payload)), A.BULLET)
        ann_cd = trans_type(S.Sess(outer.cont))
        ann_gh = trans_type(S.Sess(outer))
        e, f = fresh("e"), fresh("f")
        rest = trans_buffer(d_rest, dd, A.rename(k, {x: dd}))
        return _res(a, b, ann_ab,
                    _res(c, dd, ann_cd,
                         _res(g, h, ann_gh, A.Fwd(x, g), A.Out(h, a, c)),
                         A.PIn(b, e, f, trans_term(d_msg, e)),
                         rest))
    if r == "T-BUFSELECT":
        d_rest = d.premises[0]
        outer = d.outer
        assert isinstance(outer, S.Sel)
        label = d.info["label"]
        a, b, c, dd = (fresh(t) for t in "abcd")
        ann_ab = trans_type(S.Sess(outer.branch_map()[label]))
        ann_cd = trans_type(S.Sess(outer))
        rest = trans_buffer(d_rest, b, A.rename(k, {x: b}))
        return _res(a, b, ann_ab,
                    _res(c, dd, ann_cd, A.Fwd(x, c), A.PSel(dd, a, label)),
                    rest)
    raise ValueError(f"unexpected buffer rule {r}")


def trans_config(d: Derivation, z: Name) -> A.Process:
    r = d.rule
    if r in ("T-MAIN", "T-CHILD"):
        return trans_term(d.premises[0], z)
    if r == "T-PARL":
        d_unit, d_main = d.premises
        a, b = fresh("a"), fresh("b")
        return _res(a, b, A.BULLET, trans_config(d_unit, a), trans_config(d_main, z))
    if r == "T-PARR":
        d_main, d_unit = d.premises
        a, b = fresh("a"), fresh("b")
        return _res(a, b, A.BULLET, trans_config(d_unit, a), trans_config(d_main, z))
    if r in ("T-RES", "T-RESBUF"):
        d_buf, d_body = d.premises
        x, y = d.info["out_end"], d.info["in_end"]
        outer = d.info["outer"]
        body = trans_config(d_body, z)
        return A.PRes(x, y, trans_buffer(d_buf, x, body),
                      ann=A.pdual(trans_type(S.Sess(outer))))
    if r == "T-CONFSUB":
        d_body, d_msg = d.premises
        x = d.info["binder"]
        a = fresh("a")
        ann = A.pdual(trans_type(d.info["binder_ty"]))
        return A.PRes(x, a, A.par(trans_config(d_body, z), trans_term(d_msg, a)),
                      fwd_enabled=True, ann=ann)
    raise ValueError(f"unexpected configuration rule {r}")
