"""Linear typing of processes and observers.

The judgment assigns each term the unique set of qubit names it owns:
discards and qubit sends introduce qubits, parallel composition demands
disjoint ownership, sums and conditional branches must agree, and a
received qubit must be used by the continuation. Inference is
syntax-directed and bottom-up; `order` picks the traversal direction of
binary nodes so order-independence can be tested.
"""

from __future__ import annotations

from .errors import ChannelTypeError, LinearityError, TypingError
from .ops import resolve_measurement, resolve_operator
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
)


def expr_type(e, env: dict, sig: Signature) -> str:
    if isinstance(e, Var):
        t = env.get(e.name)
        if t is None:
            raise TypingError(f"undeclared variable {e.name!r}")
        return t
    if isinstance(e, QubitLit):
        return QUBIT
    if isinstance(e, NatLit):
        return NAT
    if isinstance(e, BoolLit):
        return BOOL
    if isinstance(e, Not):
        if expr_type(e.arg, env, sig) != BOOL:
            raise TypingError("'not' expects a boolean")
        return BOOL
    if isinstance(e, BinOp):
        lt = expr_type(e.left, env, sig)
        rt = expr_type(e.right, env, sig)
        if e.op in ("or", "and"):
            if lt != BOOL or rt != BOOL:
                raise TypingError(f"{e.op!r} expects booleans, got {lt}, {rt}")
            return BOOL
        if e.op == "=":
            if lt != rt or lt == QUBIT:
                raise TypingError(f"'=' expects equal classical types, got {lt}, {rt}")
            return BOOL
        if lt != NAT or rt != NAT:
            raise TypingError(f"{e.op!r} expects naturals, got {lt}, {rt}")
        return BOOL if e.op == "<=" else NAT
    raise TypingError(f"not an expression: {e!r}")


def _qubit_name(e, env: dict) -> str:
    if isinstance(e, QubitLit):
        return e.name
    if isinstance(e, Var) and env.get(e.name) == QUBIT:
        return e.name
    raise LinearityError(f"{e!r} is not a qubit name")


def _qubit_tuple(exprs, env, what: str) -> frozenset:
    names = [_qubit_name(e, env) for e in exprs]
    if len(set(names)) != len(names):
        raise LinearityError(f"duplicate qubit in {what}: {names}")
    return frozenset(names)


def typecheck(sig: Signature, term, order: str = "lr") -> frozenset:
    """Infer the qubit context of a closed-enough term; raises on failure."""
    return _check(term, dict(sig.variables), sig, order)


def _pair(a, b, order):
    return (a, b) if order == "lr" else (b, a)


def _check(term, env, sig, order) -> frozenset:
    if isinstance(term, Nil):
        return _qubit_tuple(term.discards, env, "discard")
    if isinstance(term, Tau):
        return _check(term.cont, env, sig, order)
    if isinstance(term, ApplyOp):
        used = _qubit_tuple(term.args, env, f"{term.op} arguments")
        resolve_operator(term.op, len(term.args), sig)
        inner = _check(term.cont, env, sig, order)
        if not used <= inner:
            raise LinearityError(
                f"{term.op} acts on {sorted(used - inner)} not owned by its continuation"
            )
        return inner
    if isinstance(term, Measure):
        used = _qubit_tuple(term.args, env, f"{term.op} arguments")
        resolve_measurement(term.op, len(term.args), sig)
        env2 = dict(env)
        env2[term.var] = NAT
        inner = _check(term.cont, env2, sig, order)
        if not used <= inner:
            raise LinearityError(
                f"{term.op} measures {sorted(used - inner)} not owned by its continuation"
            )
        return inner
    if isinstance(term, Recv):
        ct = sig.channel_type(term.chan)
        if ct is None:
            raise ChannelTypeError(f"undeclared channel {term.chan!r}")
        if len(ct) != len(term.vars):
            raise ChannelTypeError(
                f"channel {term.chan!r} carries {len(ct)} values, pattern binds {len(term.vars)}"
            )
        if len(set(term.vars)) != len(term.vars):
            raise LinearityError(f"duplicate names in reception pattern {term.vars}")
        env2 = dict(env)
        qvars = []
        for v, t in zip(term.vars, ct):
            env2[v] = t
            if t == QUBIT:
                qvars.append(v)
        inner = _check(term.cont, env2, sig, order)
        for v in qvars:
            if v not in inner:
                raise LinearityError(
                    f"qubit {v!r} received on {term.chan!r} is neither sent nor discarded"
                )
        return inner - frozenset(qvars)
    if isinstance(term, Send):
        ct = sig.channel_type(term.chan)
        if ct is None:
            raise ChannelTypeError(f"undeclared channel {term.chan!r}")
        if len(ct) != len(term.payload):
            raise ChannelTypeError(
                f"channel {term.chan!r} carries {len(ct)} values, payload has {len(term.payload)}"
            )
        owned = []
        for e, t in zip(term.payload, ct):
            et = expr_type(e, env, sig)
            if et != t:
                raise ChannelTypeError(
                    f"channel {term.chan!r} expects {t}, payload {e!r} has type {et}"
                )
            if t == QUBIT:
                owned.append(_qubit_name(e, env))
        if len(set(owned)) != len(owned):
            raise LinearityError(f"qubit sent twice in one payload on {term.chan!r}")
        return frozenset(owned)
    if isinstance(term, Sum):
        first, second = _pair(term.left, term.right, order)
        s1 = _check(first, env, sig, order)
        s2 = _check(second, env, sig, order)
        if s1 != s2:
            raise LinearityError(
                f"sum alternatives own different qubits: {sorted(s1)} vs {sorted(s2)}"
            )
        return s1
    if isinstance(term, Par):
        first, second = _pair(term.left, term.right, order)
        s1 = _check(first, env, sig, order)
        s2 = _check(second, env, sig, order)
        if s1 & s2:
            raise LinearityError(f"qubits shared across parallel components: {sorted(s1 & s2)}")
        return s1 | s2
    if isinstance(term, Restrict):
        return _check(term.body, env, sig, order)
    if isinstance(term, Ite):
        if expr_type(term.cond, env, sig) != BOOL:
            raise TypingError("conditional guard must be boolean")
        first, second = _pair(term.then, term.els, order)
        s1 = _check(first, env, sig, order)
        s2 = _check(second, env, sig, order)
        if s1 != s2:
            raise LinearityError(
                f"conditional branches own different qubits: {sorted(s1)} vs {sorted(s2)}"
            )
        return s1 if order == "lr" else s2
    if isinstance(term, RandBit):
        env2 = dict(env)
        env2[term.var] = NAT
        return _check(term.cont, env2, sig, order)
    raise TypingError(f"not a term: {term!r}")


def typecheck_unique_property(sig: Signature, term) -> frozenset:
    """Re-run inference with both traversal orders and insist they agree."""
    lr = typecheck(sig, term, "lr")
    rl = typecheck(sig, term, "rl")
    if lr != rl:
        raise TypingError(f"typing depends on traversal order: {sorted(lr)} vs {sorted(rl)}")
    return lr
