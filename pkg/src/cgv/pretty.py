"""Printers for terms, configurations and types.

ASCII output re-parses to an alpha-equivalent subject. Bound names whose
display text collides with anything already visible are renamed with
apostrophes, so printing never conflates two distinct names. A unicode
mode produces the compact on-paper notation (not re-parseable).
"""

from __future__ import annotations

from .names import Name
from . import syntax as S


class _Display:
    """Allocates collision-free display texts for bound names."""

    def __init__(self, used: set[str]):
        self.used = set(used)
        self.map: dict[Name, str] = {}

    def free(self, n: Name) -> str:
        return self.map.get(n, n.text)

    def bind(self, n: Name) -> str:
        text = n.text if n.text else "x"
        while text in self.used:
            text += "'"
        self.used.add(text)
        self.map[n] = text
        return text


def print_funtype(t: S.FunType, unicode: bool = False) -> str:
    return _ft(t, 0, unicode)


def print_session(s: S.SessionType, unicode: bool = False) -> str:
    return _st(s, unicode)


def _ft(t: S.FunType, prec: int, uni: bool) -> str:
    # prec 0: arrow position, 1: product operand, 2: atom
    if isinstance(t, S.Arrow):
        arrow = " ⊸ " if uni else " -o "
        s = _ft(t.arg, 1, uni) + arrow + _ft(t.res, 0, uni)
        return f"({s})" if prec > 0 else s
    if isinstance(t, S.Prod):
        times = " × " if uni else " * "
        s = _ft(t.left, 1, uni) + times + _ft(t.right, 2, uni)
        return f"({s})" if prec > 1 else s
    if isinstance(t, S.UnitType):
        return "1"
    if isinstance(t, S.Sess):
        return _st(t.session, uni)
    raise TypeError(f"not a funtype: {t!r}")


def _st(s: S.SessionType, uni: bool) -> str:
    if isinstance(s, S.EndType):
        return "end"
    if isinstance(s, S.Out):
        return "!" + _ft(s.payload, 2, uni) + "." + _st(s.cont, uni)
    if isinstance(s, S.In):
        return "?" + _ft(s.payload, 2, uni) + "." + _st(s.cont, uni)
    if isinstance(s, S.Sel):
        sym = "⊕" if uni else "+"
        inner = ", ".join(f"{l}: {_st(b, uni)}" for l, b in s.branches)
        return sym + "{" + inner + "}"
    if isinstance(s, S.Bra):
        inner = ", ".join(f"{l}: {_st(b, uni)}" for l, b in s.branches)
        return "&{" + inner + "}"
    raise TypeError(f"not a session type: {s!r}")


def print_term(t: S.Term, unicode: bool = False) -> str:
    disp = _Display({n.text for n in S.free_names(t)})
    return _term(t, disp, 0, unicode)


def print_config(c: S.Configuration, unicode: bool = False) -> str:
    disp = _Display({n.text for n in S.free_names(c)})
    return _config(c, disp, unicode, rightmost=True)


def _atomize(s: str, is_atom: bool) -> str:
    return s if is_atom else f"({s})"


def _term(t: S.Term, d: _Display, prec: int, uni: bool) -> str:
    # prec 0: open position (lambdas and lets may extend), 1: application
    # operand must be closed, 2: strict atom.
    if isinstance(t, S.Var):
        return d.free(t.name)
    if isinstance(t, S.Unit):
        return "()"
    if isinstance(t, S.New):
        ann = "" if t.ann is None else _st(t.ann, uni)
        return f"new[{ann}]"
    if isinstance(t, S.Abs):
        b = d.bind(t.binder)
        ann = "" if t.ann is None else (": " + _ft(t.ann, 0, uni))
        head = ("λ" if uni else "\\") + b + ann + ". "
        s = head + _term(t.body, d, 0, uni)
        return _atomize(s, prec == 0)
    if isinstance(t, S.LetPair):
        scrut = _term(t.scrutinee, d, 0, uni)
        b1, b2 = d.bind(t.binder1), d.bind(t.binder2)
        s = f"let ({b1}, {b2}) = {scrut} in " + _term(t.body, d, 0, uni)
        return _atomize(s, prec == 0)
    if isinstance(t, S.App):
        # sugar: (\x. N) M prints as let when it came from source let
        s = _term(t.fn, d, 1, uni) + " " + _term(t.arg, d, 2, uni)
        return _atomize(s, prec <= 1)
    if isinstance(t, S.Pair):
        return f"({_term(t.left, d, 0, uni)}, {_term(t.right, d, 0, uni)})"
    if isinstance(t, S.Spawn):
        return _atomize("spawn " + _term(t.arg, d, 2, uni), prec <= 1)
    if isinstance(t, S.Send):
        return _atomize("send " + _term(t.arg, d, 2, uni), prec <= 1)
    if isinstance(t, S.Recv):
        return _atomize("recv " + _term(t.arg, d, 2, uni), prec <= 1)
    if isinstance(t, S.Select):
        return _atomize(f"select {t.label} " + _term(t.arg, d, 2, uni), prec <= 1)
    if isinstance(t, S.Case):
        scrut = _term(t.scrutinee, d, 0, uni)
        inner = ", ".join(f"{l}: {_term(b, d, 0, uni)}" for l, b in t.branches)
        return f"case {scrut} of {{ {inner} }}"
    if isinstance(t, S.SendPrime):
        pay = _term(t.payload, d, 0, uni)
        tgt = _term(t.target, d, 0, uni)
        return _atomize(f"send' ({pay}, {tgt})", prec <= 1)
    if isinstance(t, S.ExplSub):
        b = d.bind(t.binder)  # binder occurs in the body, printed next
        body = _term(t.body, d, 2, uni)
        sub = _term(t.subst, d, 0, uni)
        if uni:
            s = f"{body}⦃{sub}/{b}⦄"
        else:
            s = f"{body}{{{{{sub}/{b}}}}}"
        return _atomize(s, prec <= 1)
    raise TypeError(f"not a term: {t!r}")


def _marker(m: str, uni: bool) -> str:
    if uni:
        return "♦" if m == S.MAIN else "◇"
    return m


def _config(c: S.Configuration, d: _Display, uni: bool, rightmost: bool) -> str:
    if isinstance(c, S.Thread):
        if uni:
            return _marker(c.marker, uni) + " " + _term(c.term, d, 0, uni)
        return f"{c.marker} " + _term(c.term, d, 0, uni)
    if isinstance(c, S.Par):
        left = _config(c.left, d, uni, rightmost=False)
        right = _config(c.right, d, uni, rightmost=rightmost)
        if isinstance(c.right, S.Par):  # keep shape through reparsing
            right = f"({right})"
        sep = " ∥ " if uni else " || "
        return left + sep + right
    if isinstance(c, S.Res):
        # buffer is inside the binders' scope: bind before printing messages
        x = d.bind(c.out_end)
        y = d.bind(c.in_end)
        if c.buffer.empty:
            buf = "ε" if uni else "eps"
        else:
            parts = []
            for m in c.buffer.messages:
                if isinstance(m, S.LabelMsg):
                    parts.append("#" + m.label)
                else:
                    parts.append(_term(m.term, d, 0, uni))
            buf = ", ".join(parts)
        ann = "" if c.ann is None else (" : " + _st(c.ann, uni))
        head = ("ν" if uni else "nu ")
        s = f"({head}{x}{ann} [{buf}] {y}) " + _config(c.body, d, uni, rightmost=True)
        return s if rightmost else f"({s})"
    if isinstance(c, S.ConfSub):
        b = d.bind(c.binder)
        body = _config(c.body, d, uni, rightmost=False)
        if isinstance(c.body, (S.Par, S.Res)):
            body = f"({body})"
        sub = _term(c.subst, d, 0, uni)
        if uni:
            return f"{body}⦃{sub}/{b}⦄"
        return f"{body}{{{{{sub}/{b}}}}}"
    raise TypeError(f"not a configuration: {c!r}")


# ---------------------------------------------------------------------------
# Canonical strings: alpha-invariant renderings used as sort and dedup keys.

def canon_subject(subject: S.Subject) -> str:
    d = _CanonDisplay()
    if isinstance(subject, S.Term):
        return _term(subject, d, 0, False)
    return _config(subject, d, False, rightmost=True)


class _CanonDisplay(_Display):
    """Renames every bound name to a serial b0, b1, ... in print order; free
    names keep their text (tagged so they cannot collide with the serials).
    Equal strings imply alpha-equivalent subjects."""

    def __init__(self):
        super().__init__(set())
        self.counter = 0

    def free(self, n: Name) -> str:
        return self.map.get(n, "~" + n.text)

    def bind(self, n: Name) -> str:
        text = f"b{self.counter}"
        self.counter += 1
        self.map[n] = text
        return text
