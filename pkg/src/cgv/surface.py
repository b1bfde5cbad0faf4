"""Concrete syntax: a hand-rolled lexer and recursive-descent parser for
.cgv files (UTF-8, line comments with --).

Source mode rejects the runtime-only constructs (send', {{M/x}} explicit
substitutions, non-empty buffers); runtime mode accepts them so test
fixtures can spell out mid-execution configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .names import Name, fresh
from . import syntax as S


@dataclass
class Diagnostic:
    line: int
    col: int
    message: str

    def render(self, path: str = "<input>") -> str:
        return f"{path}:{self.line}:{self.col}: {self.message}"


class ParseError(Exception):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(message)
        self.diagnostic = Diagnostic(line, col, message)


@dataclass
class SourceFile:
    path: str
    text: str
    parsed: Union[S.Term, S.Configuration, None]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics


KEYWORDS = {
    "let", "in", "new", "spawn", "send", "recv", "select", "case", "of",
    "main", "child", "nu", "eps", "end", "send'",
}


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'label', 'num', 'kw', or the symbol itself
    value: str
    line: int
    col: int


_SYMBOLS2 = ("||", "-o", "()")
_SYMBOLS1 = "()[]{},./:\\*+&!?|="


def lex(text: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "#":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            if j == i + 1:
                raise ParseError(line, col, "expected a label after '#'")
            toks.append(Token("label", text[i + 1:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("num", text[i:j], line, col))
            col += j - i
            i = j
            continue
        two = text[i:i + 2]
        if two in ("||", "-o"):
            toks.append(Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if ch == "-":
            raise ParseError(line, col, f"unexpected character sequence {text[i:i+2]!r}")
        if ch in _SYMBOLS1:
            toks.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(line, col, f"unexpected character {ch!r}")
    toks.append(Token("eof", "", line, col))
    return toks


class Parser:
    def __init__(self, tokens: list[Token], runtime: bool = False):
        self.toks = tokens
        self.pos = 0
        self.runtime = runtime
        # free occurrences of one spelling share a Name within a parse
        self.free: dict[str, Name] = {}
        # lexical scope for binders: text -> stack of Names
        self.scope: dict[str, list[Name]] = {}

    # -- token plumbing

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            want = what or repr(kind)
            raise ParseError(t.line, t.col, f"expected {want}, found {t.value!r}")
        return self.next()

    def at(self, kind: str, value: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (value is None or t.value == value)

    def at_kw(self, word: str) -> bool:
        return self.at("kw", word)

    def double_brace_open(self) -> bool:
        a, b = self.peek(), self.peek(1)
        return a.kind == "{" and b.kind == "{" and b.line == a.line and b.col == a.col + 1

    def eat_double(self, sym: str) -> None:
        a = self.expect(sym)
        b = self.peek()
        if not (b.kind == sym and b.line == a.line and b.col == a.col + 1):
            raise ParseError(b.line, b.col, f"expected {sym + sym!r}")
        self.next()

    # -- names and scope

    def lookup(self, text: str) -> Name:
        stack = self.scope.get(text)
        if stack:
            return stack[-1]
        if text not in self.free:
            self.free[text] = fresh(text)
        return self.free[text]

    def bind(self, text: str) -> Name:
        n = fresh(text)
        self.scope.setdefault(text, []).append(n)
        return n

    def unbind(self, text: str) -> None:
        self.scope[text].pop()

    # -- types

    def funtype(self) -> S.FunType:
        left = self.prodtype()
        if self.at("-o"):
            self.next()
            return S.Arrow(left, self.funtype())
        return left

    def prodtype(self) -> S.FunType:
        t = self.typeatom()
        while self.at("*"):
            self.next()
            t = S.Prod(t, self.typeatom())
        return t

    def typeatom(self) -> S.FunType:
        t = self.peek()
        if t.kind == "num" and t.value == "1":
            self.next()
            return S.UNIT
        if self.at_kw("end"):
            self.next()
            return S.Sess(S.END)
        if t.kind in ("!", "?"):
            self.next()
            payload = self.typeatom()
            self.expect(".")
            cont = self.sessiontype()
            return S.Sess(S.Out(payload, cont) if t.kind == "!" else S.In(payload, cont))
        if t.kind in ("+", "&"):
            self.next()
            self.expect("{")
            branches: list[tuple[str, S.SessionType]] = []
            seen: set[str] = set()
            while True:
                lbl = self.expect("ident", "a label").value
                if lbl in seen:
                    raise ParseError(t.line, t.col, f"duplicate label {lbl!r}")
                seen.add(lbl)
                self.expect(":")
                branches.append((lbl, self.sessiontype()))
                if self.at(","):
                    self.next()
                    continue
                break
            self.expect("}")
            if not branches:
                raise ParseError(t.line, t.col, "empty branch set")
            mk = S.Sel if t.kind == "+" else S.Bra
            return S.Sess(mk(tuple(branches)))
        if t.kind == "(":
            self.next()
            inner = self.funtype()
            self.expect(")")
            return inner
        raise ParseError(t.line, t.col, f"expected a type, found {t.value!r}")

    def sessiontype(self) -> S.SessionType:
        t = self.peek()
        ty = self.typeatom()
        if not isinstance(ty, S.Sess):
            raise ParseError(t.line, t.col, "expected a session type")
        return ty.session

    # -- terms

    def term(self) -> S.Term:
        t = self.peek()
        if t.kind == "\\":
            self.next()
            name = self.expect("ident", "a binder").value
            ann = None
            if self.at(":"):
                self.next()
                ann = self.funtype()
            self.expect(".")
            binder = self.bind(name)
            body = self.term()
            self.unbind(name)
            return S.Abs(binder, body, ann, span=(t.line, t.col))
        if self.at_kw("let"):
            self.next()
            if self.at("("):
                self.next()
                n1 = self.expect("ident", "a binder").value
                self.expect(",")
                n2 = self.expect("ident", "a binder").value
                if n1 == n2:
                    raise ParseError(t.line, t.col, "pair binders must be distinct")
                self.expect(")")
                self.expect("=")
                scrut = self.term()
                if not self._eat_kw("in"):
                    tok = self.peek()
                    raise ParseError(tok.line, tok.col, "expected 'in'")
                b1, b2 = self.bind(n1), self.bind(n2)
                body = self.term()
                self.unbind(n2)
                self.unbind(n1)
                return S.LetPair(b1, b2, scrut, body, span=(t.line, t.col))
            name = self.expect("ident", "a binder").value
            self.expect("=")
            bound = self.term()
            if not self._eat_kw("in"):
                tok = self.peek()
                raise ParseError(tok.line, tok.col, "expected 'in'")
            binder = self.bind(name)
            body = self.term()
            self.unbind(name)
            # sugar: let x = M in N is (\x. N) M
            return S.App(S.Abs(binder, body), bound, span=(t.line, t.col))
        return self.application()

    def _eat_kw(self, word: str) -> bool:
        if self.at_kw(word):
            self.next()
            return True
        return False

    def application(self) -> S.Term:
        t = self.postfixed()
        while self._starts_atom():
            arg = self.postfixed()
            t = S.App(t, arg)
        return t

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("ident", "("):
            return True
        if t.kind == "kw" and t.value in ("new", "spawn", "send", "recv", "select",
                                          "case", "send'"):
            return True
        return False

    def postfixed(self) -> S.Term:
        t = self.prefixterm()
        while self.double_brace_open():
            tok = self.peek()
            if not self.runtime:
                raise ParseError(tok.line, tok.col,
                                 "explicit substitution is a runtime form (use --runtime)")
            self.eat_double("{")
            sub = self.term()
            self.expect("/")
            name = self.expect("ident", "a binder").value
            binder = self.bind(name)
            self.unbind(name)
            self.eat_double("}")
            # the binder scopes over the already-parsed body: rebind occurrences
            t = self._rebind(t, name, binder)
            t = S.ExplSub(t, sub, binder, span=(tok.line, tok.col))
        return t

    def _rebind(self, t: S.Term, text: str, binder: Name) -> S.Term:
        """A postfix substitution binds name occurrences that were parsed as
        free; rewire every free occurrence spelled `text` to the binder."""
        target = self.free.get(text)
        if target is None:
            return t
        return S.substitute(t, target, S.Var(binder))

    def _rebind_config(self, c: S.Configuration, text: str, binder: Name) -> S.Configuration:
        target = self.free.get(text)
        if target is None:
            return c
        return S.substitute_config(c, target, S.Var(binder))

    def prefixterm(self) -> S.Term:
        t = self.peek()
        if self.at_kw("spawn"):
            self.next()
            return S.Spawn(self.postfixed(), span=(t.line, t.col))
        if self.at_kw("send"):
            self.next()
            return S.Send(self.postfixed(), span=(t.line, t.col))
        if self.at_kw("send'"):
            if not self.runtime:
                raise ParseError(t.line, t.col, "send' is a runtime form (use --runtime)")
            self.next()
            self.expect("(")
            payload = self.term()
            self.expect(",")
            target = self.term()
            self.expect(")")
            return S.SendPrime(payload, target, span=(t.line, t.col))
        if self.at_kw("recv"):
            self.next()
            return S.Recv(self.postfixed(), span=(t.line, t.col))
        if self.at_kw("select"):
            self.next()
            lbl = self.expect("ident", "a label").value
            return S.Select(lbl, self.postfixed(), span=(t.line, t.col))
        if self.at_kw("case"):
            self.next()
            scrut = self.term()
            if not self._eat_kw("of"):
                tok = self.peek()
                raise ParseError(tok.line, tok.col, "expected 'of'")
            self.expect("{")
            branches: list[tuple[str, S.Term]] = []
            seen: set[str] = set()
            while True:
                lbl = self.expect("ident", "a label").value
                if lbl in seen:
                    raise ParseError(t.line, t.col, f"duplicate label {lbl!r}")
                seen.add(lbl)
                self.expect(":")
                branches.append((lbl, self.term()))
                if self.at(","):
                    self.next()
                    continue
                break
            self.expect("}")
            return S.Case(scrut, tuple(branches), span=(t.line, t.col))
        return self.atom()

    def atom(self) -> S.Term:
        t = self.peek()
        if self.at_kw("new"):
            self.next()
            self.expect("[")
            ann = self.sessiontype()
            self.expect("]")
            return S.New(ann, span=(t.line, t.col))
        if t.kind == "ident":
            self.next()
            return S.Var(self.lookup(t.value), span=(t.line, t.col))
        if t.kind == "(":
            self.next()
            if self.at(")"):
                self.next()
                return S.Unit(span=(t.line, t.col))
            inner = self.term()
            if self.at(","):
                self.next()
                right = self.term()
                self.expect(")")
                return S.Pair(inner, right, span=(t.line, t.col))
            self.expect(")")
            return inner
        raise ParseError(t.line, t.col, f"expected a term, found {t.value!r}")

    # -- configurations

    def config(self) -> S.Configuration:
        left = self.paritem()
        while self.at("||"):
            self.next()
            right = self.paritem()
            left = S.Par(left, right)
        return left

    def paritem(self) -> S.Configuration:
        c = self.confatom()
        while self.double_brace_open():
            tok = self.peek()
            if not self.runtime:
                raise ParseError(tok.line, tok.col,
                                 "explicit substitution is a runtime form (use --runtime)")
            self.eat_double("{")
            sub = self.term()
            self.expect("/")
            name = self.expect("ident", "a binder").value
            binder = self.bind(name)
            self.unbind(name)
            self.eat_double("}")
            c = self._rebind_config(c, name, binder)
            c = S.ConfSub(c, sub, binder)
        return c

    def confatom(self) -> S.Configuration:
        t = self.peek()
        if self.at_kw("main") or self.at_kw("child"):
            marker = S.MAIN if t.value == "main" else S.CHILD
            self.next()
            return S.Thread(marker, self.term())
        if t.kind == "(":
            if self.peek(1).kind == "kw" and self.peek(1).value == "nu":
                self.next()
                return self.restriction()
            self.next()
            inner = self.config()
            self.expect(")")
            return inner
        raise ParseError(t.line, t.col, f"expected a configuration, found {t.value!r}")

    def restriction(self) -> S.Configuration:
        """Parses from after '(' of '(nu x : S [msgs] y) C'. The body extends
        as far right as possible."""
        self.expect("kw")  # nu
        xt = self.expect("ident", "an endpoint").value
        ann = None
        if self.at(":"):
            self.next()
            ann = self.sessiontype()
        x = self.bind(xt)
        # the read endpoint is also in scope inside the buffer
        self.expect("[")
        # peek for the binder of the other end: need it bound before messages
        # are parsed, so scan ahead for the matching ']' IDENT pattern is not
        # needed; instead bind a placeholder after parsing, then rebind.
        msgs: list[S.Message] = []
        if self.at_kw("eps"):
            self.next()
        else:
            if self.at("]"):
                tok = self.peek()
                raise ParseError(tok.line, tok.col, "expected 'eps' or messages")
            if not self.runtime:
                tok = self.peek()
                raise ParseError(tok.line, tok.col,
                                 "non-empty buffers are a runtime form (use --runtime)")
            while True:
                if self.at("label"):
                    msgs.append(S.LabelMsg(self.next().value))
                else:
                    msgs.append(S.TermMsg(self.term()))
                if self.at(","):
                    self.next()
                    continue
                break
        self.expect("]")
        yt = self.expect("ident", "an endpoint").value
        if yt == xt:
            tok = self.peek()
            raise ParseError(tok.line, tok.col, "restriction endpoints must be distinct")
        y = self.bind(yt)
        self.expect(")")
        body = self.config()
        self.unbind(yt)
        self.unbind(xt)
        # y was not in scope while the buffer was parsed: occurrences of its
        # spelling in messages were recorded as free; rewire them now.
        buf = S.Buffer(tuple(msgs))
        if any(isinstance(m, S.TermMsg) for m in msgs):
            target = self.free.get(yt)
            if target is not None:
                buf = S.Buffer(tuple(
                    S.TermMsg(S.substitute(m.term, target, S.Var(y)))
                    if isinstance(m, S.TermMsg) else m
                    for m in buf.messages))
        return S.Res(x, buf, y, body, ann)


def _parse(text: str, production: str, runtime: bool) -> tuple[Optional[object], list[Diagnostic]]:
    try:
        toks = lex(text)
        p = Parser(toks, runtime=runtime)
        if production == "term":
            out = p.term()
        else:
            out = p.config()
        t = p.peek()
        if t.kind != "eof":
            raise ParseError(t.line, t.col, f"unexpected trailing input {t.value!r}")
        return out, []
    except ParseError as e:
        return None, [e.diagnostic]
    except RecursionError:
        return None, [Diagnostic(1, 1, "input too deeply nested")]


def parse_term(text: str, runtime: bool = False) -> tuple[Optional[S.Term], list[Diagnostic]]:
    out, diags = _parse(text, "term", runtime)
    return out, diags


def parse_config(text: str, runtime: bool = False) -> tuple[Optional[S.Configuration], list[Diagnostic]]:
    out, diags = _parse(text, "config", runtime)
    return out, diags


def looks_like_config(text: str) -> bool:
    """Heuristic used by file loading: configurations start with a marker, a
    restriction, or a parenthesized configuration."""
    try:
        toks = lex(text)
    except ParseError:
        return False
    for t in toks:
        if t.kind == "kw" and t.value in ("main", "child", "nu"):
            return True
        if t.kind in ("eof",):
            return False
        if t.kind == "(":
            continue
        return False
    return False


def parse_source(text: str, runtime: bool = False) -> SourceFile:
    """Parse a .cgv file, auto-detecting term vs configuration."""
    if looks_like_config(text):
        parsed, diags = parse_config(text, runtime)
    else:
        parsed, diags = parse_term(text, runtime)
    return SourceFile("<input>", text, parsed, diags)


def load_file(path: str, runtime: bool = False) -> SourceFile:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    sf = parse_source(text, runtime)
    sf.path = path
    return sf
