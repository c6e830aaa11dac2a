"""Concrete syntax: tokenizer, recursive-descent parser, pretty printer.

Term grammar (loosest to tightest): parallel `||`, restriction `\\ c`,
sum `+`, prefixes. Prefix continuations are single prefixed terms;
parenthesize to continue with a parallel or conditional body. Conditional
branches parse maximally, so `(if e then P else Q) || R` needs the parens.

Program files are a sequence of declarations followed by process
definitions; earlier definitions may be referenced by name in later ones
(plain macro expansion, no recursion):

    channel c : qubit;
    channel m : nat * nat;
    var x : nat;
    qubit q0, q1;
    process Main = H(q0).M01(q0 |> x).((if x = 0 then c!q0 else c!q0) || nil);
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .syntax import (
    BOOL,
    NAT,
    QUBIT,
    ApplyOp,
    BinOp,
    BoolLit,
    Ite,
    Measure,
    NatLit,
    Nil,
    Not,
    Par,
    QubitLit,
    RandBit,
    Recv,
    Restrict,
    Send,
    Signature,
    Sum,
    Tau,
    Var,
    check_observer,
    check_process_sorts,
)

KEYWORDS = {
    "nil", "disc", "tau", "if", "then", "else", "randbit",
    "true", "false", "not", "and", "or",
    "channel", "var", "qubit", "process", "nat", "bool",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>\d+)
  | (?P<op>\|\||\|>|<=|[()!?.,+\-*=\\;:|])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = m.group(0)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers

    def peek(self, ahead=0) -> Token:
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}",
                             tok.line, tok.col)
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def fail(self, msg: str):
        tok = self.peek()
        raise ParseError(msg, tok.line, tok.col)

    # -- programs

    def parse_program(self):
        sig = Signature()
        defs = {}
        while not self.at(""):
            tok = self.peek()
            if tok.text == "channel":
                self.next()
                name = self.ident()
                self.expect(":")
                types = [self.base_type()]
                while self.at("*"):
                    self.next()
                    types.append(self.base_type())
                self.expect(";")
                sig.channels[name] = tuple(types)
            elif tok.text == "var":
                self.next()
                name = self.ident()
                self.expect(":")
                sig.variables[name] = self.base_type()
                self.expect(";")
            elif tok.text == "qubit":
                self.next()
                names = [self.ident()]
                while self.at(","):
                    self.next()
                    names.append(self.ident())
                self.expect(";")
                sig.qubits = sig.qubits + tuple(names)
            elif tok.text == "process":
                self.next()
                name = self.ident()
                self.expect("=")
                term = self.parse_par(sig, defs)
                self.expect(";")
                defs[name] = term
            else:
                self.fail(f"expected a declaration, found {tok.text!r}")
        if not defs:
            self.fail("program has no process definitions")
        return sig, defs

    def ident(self) -> str:
        tok = self.next()
        if tok.kind != "name" or tok.text in KEYWORDS:
            raise ParseError(f"expected an identifier, found {tok.text!r}", tok.line, tok.col)
        return tok.text

    def base_type(self) -> str:
        tok = self.next()
        if tok.text not in (QUBIT, NAT, BOOL):
            raise ParseError(f"expected a type, found {tok.text!r}", tok.line, tok.col)
        return tok.text

    # -- terms

    def parse_par(self, sig, defs):
        left = self.parse_restr(sig, defs)
        while self.at("||"):
            self.next()
            left = Par(left, self.parse_restr(sig, defs))
        return left

    def parse_restr(self, sig, defs):
        term = self.parse_sum(sig, defs)
        while self.at("\\"):
            self.next()
            term = Restrict(term, self.ident())
        return term

    def parse_sum(self, sig, defs):
        left = self.parse_prefix(sig, defs)
        while self.at("+"):
            self.next()
            left = Sum(left, self.parse_prefix(sig, defs))
        return left

    def parse_prefix(self, sig, defs):
        tok = self.peek()
        if tok.text == "(":
            self.next()
            inner = self.parse_par(sig, defs)
            self.expect(")")
            return inner
        if tok.text == "nil":
            self.next()
            return Nil()
        if tok.text == "disc":
            self.next()
            self.expect("(")
            args = self.expr_list(sig, close=")")
            self.expect(")")
            return Nil(tuple(args))
        if tok.text == "tau":
            self.next()
            self.expect(".")
            return Tau(self.parse_prefix(sig, defs))
        if tok.text == "randbit":
            self.next()
            self.expect("(")
            var = self.ident()
            self.expect(")")
            self.expect(".")
            return RandBit(var, self.parse_prefix(sig, defs))
        if tok.text == "if":
            self.next()
            cond = self.parse_expr(sig)
            self.expect("then")
            then = self.parse_par(sig, defs)
            self.expect("else")
            els = self.parse_par(sig, defs)
            return Ite(cond, then, els)
        if tok.kind == "name" and tok.text not in KEYWORDS:
            name = self.next().text
            follow = self.peek()
            if follow.text == "!":
                self.next()
                payload = self.send_payload(sig)
                return Send(name, payload)
            if follow.text == "?":
                self.next()
                vars_ = self.recv_pattern()
                self.expect(".")
                return Recv(name, vars_, self.parse_prefix(sig, defs))
            if follow.text == "(":
                self.next()
                args = self.expr_list(sig, close=None)
                if self.at("|>"):
                    self.next()
                    var = self.ident()
                    self.expect(")")
                    self.expect(".")
                    return Measure(name, tuple(args), var, self.parse_prefix(sig, defs))
                self.expect(")")
                self.expect(".")
                return ApplyOp(name, tuple(args), self.parse_prefix(sig, defs))
            if name in defs:
                return defs[name]
            raise ParseError(f"undefined process name {name!r}", tok.line, tok.col)
        self.fail(f"expected a process term, found {tok.text or 'end of input'!r}")

    def send_payload(self, sig) -> tuple:
        # unparenthesized payloads are atoms, so `c!q + d!q` is a process
        # sum; compound payload expressions need parens: c!(x + 1)
        if self.at("("):
            self.next()
            payload = self.expr_list(sig, close=")")
            self.expect(")")
            return tuple(payload)
        return (self.parse_atom(sig),)

    def recv_pattern(self) -> tuple:
        if self.at("("):
            self.next()
            names = [self.ident()]
            while self.at(","):
                self.next()
                names.append(self.ident())
            self.expect(")")
            return tuple(names)
        return (self.ident(),)

    def expr_list(self, sig, close):
        args = []
        if close is not None and self.at(close):
            return args
        args.append(self.parse_expr(sig))
        while self.at(","):
            self.next()
            args.append(self.parse_expr(sig))
        return args

    # -- expressions

    def parse_expr(self, sig):
        return self.parse_or(sig)

    def parse_or(self, sig):
        left = self.parse_and(sig)
        while self.at("or"):
            self.next()
            left = BinOp("or", left, self.parse_and(sig))
        return left

    def parse_and(self, sig):
        left = self.parse_cmp(sig)
        while self.at("and"):
            self.next()
            left = BinOp("and", left, self.parse_cmp(sig))
        return left

    def parse_cmp(self, sig):
        left = self.parse_add(sig)
        if self.peek().text in ("=", "<="):
            op = self.next().text
            return BinOp(op, left, self.parse_add(sig))
        return left

    def parse_add(self, sig):
        left = self.parse_mul(sig)
        while self.peek().text in ("+", "-"):
            op = self.next().text
            left = BinOp(op, left, self.parse_mul(sig))
        return left

    def parse_mul(self, sig):
        left = self.parse_atom(sig)
        while self.at("*"):
            self.next()
            left = BinOp("*", left, self.parse_atom(sig))
        return left

    def parse_atom(self, sig):
        tok = self.peek()
        if tok.text == "not":
            self.next()
            return Not(self.parse_atom(sig))
        if tok.text == "(":
            self.next()
            e = self.parse_expr(sig)
            self.expect(")")
            return e
        if tok.text == "true":
            self.next()
            return BoolLit(True)
        if tok.text == "false":
            self.next()
            return BoolLit(False)
        if tok.kind == "num":
            self.next()
            return NatLit(int(tok.text))
        if tok.kind == "name" and tok.text not in KEYWORDS:
            self.next()
            if sig is not None and tok.text in sig.qubits:
                return QubitLit(tok.text)
            return Var(tok.text)
        self.fail(f"expected an expression, found {tok.text!r}")


def _classify_free_names(term, sig: Signature):
    """Turn free Var leaves that denote declared register qubits into QubitLit."""
    from .rewrite import map_free_vars

    names = set(sig.qubits)
    return map_free_vars(term, lambda v: QubitLit(v.name) if v.name in names else v)


def parse_program(text: str):
    """Parse a full program file: (Signature, {name: term})."""
    sig, defs = _Parser(text).parse_program()
    defs = {name: _classify_free_names(t, sig) for name, t in defs.items()}
    for t in defs.values():
        check_process_sorts(t)
    return sig, defs


def parse_process(text: str, sig: Signature | None = None):
    """Parse a bare process term.

    Without a signature, free names used in operator, measurement, or
    discard argument positions are classified as qubit atoms.
    """
    p = _Parser(text)
    term = p.parse_par(sig, {})
    tok = p.peek()
    if tok.text != "":
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    if sig is not None:
        term = _classify_free_names(term, sig)
    else:
        from .rewrite import infer_free_qubits

        term = infer_free_qubits(term)
    check_process_sorts(term)
    return term


def parse_observer(text: str, sig: Signature | None = None):
    term = parse_process(text, sig)
    check_observer(term)
    return term


def parse(text: str):
    """Program text -> (Signature, main term); bare term -> (empty sig, term).

    Programs must start with a declaration keyword. The main term of a
    program is its last process definition.
    """
    stripped = text.lstrip()
    if stripped.split(None, 1) and stripped.split(None, 1)[0] in (
        "channel", "var", "qubit", "process",
    ):
        sig, defs = parse_program(text)
        main = list(defs.values())[-1]
        return sig, main
    return Signature(), parse_process(text)


# --- pretty printer ---------------------------------------------------------


def pretty_expr(e) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, QubitLit):
        return e.name
    if isinstance(e, NatLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Not):
        return f"not {pretty_expr(e.arg)}"
    if isinstance(e, BinOp):
        return f"({pretty_expr(e.left)} {e.op} {pretty_expr(e.right)})"
    raise TypeError(f"not an expression: {e!r}")


def _pretty_cont(t) -> str:
    # continuation of a prefix: parenthesize anything that is not a prefix
    if isinstance(t, (Par, Sum, Restrict, Ite)):
        return f"({pretty(t)})"
    return pretty(t)


def pretty(t) -> str:
    if isinstance(t, Nil):
        if not t.discards:
            return "nil"
        return f"disc({', '.join(pretty_expr(e) for e in t.discards)})"
    if isinstance(t, Tau):
        return f"tau.{_pretty_cont(t.cont)}"
    if isinstance(t, ApplyOp):
        return f"{t.op}({', '.join(pretty_expr(e) for e in t.args)}).{_pretty_cont(t.cont)}"
    if isinstance(t, Measure):
        args = ", ".join(pretty_expr(e) for e in t.args)
        return f"{t.op}({args} |> {t.var}).{_pretty_cont(t.cont)}"
    if isinstance(t, Recv):
        pat = t.vars[0] if len(t.vars) == 1 else "(" + ", ".join(t.vars) + ")"
        return f"{t.chan}?{pat}.{_pretty_cont(t.cont)}"
    if isinstance(t, Send):
        if len(t.payload) == 1:
            return f"{t.chan}!{_pretty_payload(t.payload[0])}"
        return f"{t.chan}!({', '.join(pretty_expr(e) for e in t.payload)})"
    if isinstance(t, Sum):
        return f"{_pretty_sum_side(t.left)} + {_pretty_sum_side(t.right)}"
    if isinstance(t, Par):
        return f"{_pretty_par_side(t.left)} || {_pretty_par_side(t.right)}"
    if isinstance(t, Restrict):
        body = pretty(t.body)
        if isinstance(t.body, (Par, Ite)):
            body = f"({body})"
        return f"{body} \\ {t.chan}"
    if isinstance(t, Ite):
        return f"if {pretty_expr(t.cond)} then {_pretty_par_side(t.then)} else {_pretty_par_side(t.els)}"
    if isinstance(t, RandBit):
        return f"randbit({t.var}).{_pretty_cont(t.cont)}"
    raise TypeError(f"not a term: {t!r}")


def _pretty_payload(e) -> str:
    s = pretty_expr(e)
    # `c!x + y` would parse as a sum of processes; keep payload atomic
    if isinstance(e, (BinOp, Not)):
        return s if s.startswith("(") else f"({s})"
    return s


def _pretty_sum_side(t) -> str:
    if isinstance(t, (Par, Restrict, Ite, Sum)):
        return f"({pretty(t)})"
    return pretty(t)


def _pretty_par_side(t) -> str:
    if isinstance(t, (Par, Ite)):
        return f"({pretty(t)})"
    return pretty(t)
