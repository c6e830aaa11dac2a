"""Expression evaluation, substitution, and structural congruence.

`normalize` computes the canonical representative of a process term's
congruence class: closed classical expressions are evaluated, literal
conditionals resolved, parallel and sum children flattened and sorted in
a fixed total order, inert components dropped, restrictions pushed inward
past components that do not use the channel (and dropped when the channel
is not free at all), and discard tuples sorted. `normalize_observer` does
the same for the observer congruence, which keeps the shape of parallel
composition intact.
"""

from __future__ import annotations

from functools import lru_cache

from .errors import EvalError, QubitCaptureError
from .parser import pretty, pretty_expr
from .syntax import (
    ApplyOp,
    BinOp,
    BoolLit,
    Ite,
    Measure,
    NatLit,
    Nil,
    NIL,
    Not,
    Par,
    QubitLit,
    RandBit,
    Recv,
    Restrict,
    Send,
    Sum,
    Tau,
    Var,
    free_channels,
    par_all,
    par_components,
    qubit_atoms,
    sum_all,
    sum_guards,
)

# --- evaluation -------------------------------------------------------------


def eval_expr(e, env=None):
    """Big-step evaluation; qubit names evaluate to themselves."""
    env = env or {}
    if isinstance(e, Var):
        if e.name not in env:
            raise EvalError(f"unbound variable {e.name!r}")
        return env[e.name]
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, NatLit):
        return e.value
    if isinstance(e, QubitLit):
        return e
    if isinstance(e, Not):
        v = eval_expr(e.arg, env)
        if not isinstance(v, bool):
            raise EvalError(f"'not' applied to {v!r}")
        return not v
    if isinstance(e, BinOp):
        lv = eval_expr(e.left, env)
        rv = eval_expr(e.right, env)
        op = e.op
        if op in ("or", "and"):
            if not (isinstance(lv, bool) and isinstance(rv, bool)):
                raise EvalError(f"{op!r} applied to {lv!r}, {rv!r}")
            return (lv or rv) if op == "or" else (lv and rv)
        if op == "=":
            if isinstance(lv, bool) != isinstance(rv, bool):
                raise EvalError(f"'=' applied to {lv!r}, {rv!r}")
            if isinstance(lv, QubitLit) or isinstance(rv, QubitLit):
                raise EvalError("'=' is not defined on qubits")
            return lv == rv
        if isinstance(lv, bool) or isinstance(rv, bool) or \
                isinstance(lv, QubitLit) or isinstance(rv, QubitLit):
            raise EvalError(f"{op!r} applied to {lv!r}, {rv!r}")
        if op == "<=":
            return lv <= rv
        if op == "+":
            return lv + rv
        if op == "-":
            return lv - rv
        if op == "*":
            return lv * rv
    raise EvalError(f"cannot evaluate {e!r}")


def value_to_expr(v):
    if isinstance(v, QubitLit):
        return v
    if isinstance(v, bool):
        return BoolLit(v)
    if isinstance(v, int):
        return NatLit(v)
    raise EvalError(f"not a value: {v!r}")


def expr_is_closed(e, bound=frozenset()) -> bool:
    if isinstance(e, Var):
        return e.name in bound
    if isinstance(e, Not):
        return expr_is_closed(e.arg, bound)
    if isinstance(e, BinOp):
        return expr_is_closed(e.left, bound) and expr_is_closed(e.right, bound)
    return True


def _norm_expr(e):
    """Evaluate closed classical subexpressions to literals."""
    if isinstance(e, (Var, BoolLit, NatLit, QubitLit)):
        return e
    if isinstance(e, Not):
        arg = _norm_expr(e.arg)
        out = Not(arg)
    else:
        out = BinOp(e.op, _norm_expr(e.left), _norm_expr(e.right))
    if expr_is_closed(out):
        return value_to_expr(eval_expr(out))
    return out


# --- generic walkers --------------------------------------------------------


def map_free_vars(term, f):
    """Rewrite every free Var leaf with f; binders shadow."""

    def on_expr(e, bound):
        if isinstance(e, Var):
            return e if e.name in bound else f(e)
        if isinstance(e, Not):
            return Not(on_expr(e.arg, bound))
        if isinstance(e, BinOp):
            return BinOp(e.op, on_expr(e.left, bound), on_expr(e.right, bound))
        return e

    def walk(t, bound):
        if isinstance(t, Nil):
            return Nil(tuple(on_expr(e, bound) for e in t.discards))
        if isinstance(t, Tau):
            return Tau(walk(t.cont, bound))
        if isinstance(t, ApplyOp):
            return ApplyOp(t.op, tuple(on_expr(e, bound) for e in t.args), walk(t.cont, bound))
        if isinstance(t, Measure):
            return Measure(
                t.op,
                tuple(on_expr(e, bound) for e in t.args),
                t.var,
                walk(t.cont, bound | {t.var}),
            )
        if isinstance(t, Recv):
            return Recv(t.chan, t.vars, walk(t.cont, bound | set(t.vars)))
        if isinstance(t, Send):
            return Send(t.chan, tuple(on_expr(e, bound) for e in t.payload))
        if isinstance(t, Sum):
            return Sum(walk(t.left, bound), walk(t.right, bound))
        if isinstance(t, Par):
            return Par(walk(t.left, bound), walk(t.right, bound))
        if isinstance(t, Restrict):
            return Restrict(walk(t.body, bound), t.chan)
        if isinstance(t, Ite):
            return Ite(on_expr(t.cond, bound), walk(t.then, bound), walk(t.els, bound))
        if isinstance(t, RandBit):
            return RandBit(t.var, walk(t.cont, bound | {t.var}))
        raise TypeError(f"not a term: {t!r}")

    return walk(term, frozenset())


def infer_free_qubits(term):
    """Classify free names in qubit positions (op args, discards) as qubits."""
    names = set()

    def collect(t, bound):
        if isinstance(t, (ApplyOp, Measure, Nil)):
            exprs = t.args if not isinstance(t, Nil) else t.discards
            for e in exprs:
                if isinstance(e, Var) and e.name not in bound:
                    names.add(e.name)
        if isinstance(t, (Tau, ApplyOp)):
            collect(t.cont, bound)
        elif isinstance(t, Measure):
            collect(t.cont, bound | {t.var})
        elif isinstance(t, Recv):
            collect(t.cont, bound | set(t.vars))
        elif isinstance(t, RandBit):
            collect(t.cont, bound | {t.var})
        elif isinstance(t, (Sum, Par)):
            collect(t.left, bound)
            collect(t.right, bound)
        elif isinstance(t, Restrict):
            collect(t.body, bound)
        elif isinstance(t, Ite):
            collect(t.then, bound)
            collect(t.els, bound)

    collect(term, frozenset())
    if not names:
        return term
    return map_free_vars(term, lambda v: QubitLit(v.name) if v.name in names else v)


def substitute(term, var: str, value):
    """Capture-avoiding substitution of a value (or literal node) for a
    free variable. Substituting a qubit name into a term that already
    owns it is rejected."""
    node = value if isinstance(value, (QubitLit, BoolLit, NatLit)) else value_to_expr(value)
    if isinstance(node, QubitLit) and node.name in qubit_atoms(term):
        raise QubitCaptureError(
            f"substituting qubit {node.name!r} into a term that already uses it"
        )
    return map_free_vars(term, lambda v: node if v.name == var else v)


def substitute_many(term, pairs):
    for var, value in pairs:
        term = substitute(term, var, value)
    return term


# --- process congruence -----------------------------------------------------


def term_key(t) -> str:
    """Total order on terms used for canonical sorting."""
    return pretty(t)


@lru_cache(maxsize=None)
def normalize(t):
    if isinstance(t, Nil):
        discards = sorted((_norm_expr(e) for e in t.discards), key=pretty_key)
        return Nil(tuple(discards))
    if isinstance(t, Tau):
        return Tau(normalize(t.cont))
    if isinstance(t, ApplyOp):
        return ApplyOp(t.op, tuple(_norm_expr(e) for e in t.args), normalize(t.cont))
    if isinstance(t, Measure):
        return Measure(t.op, tuple(_norm_expr(e) for e in t.args), t.var, normalize(t.cont))
    if isinstance(t, Recv):
        return Recv(t.chan, t.vars, normalize(t.cont))
    if isinstance(t, Send):
        return Send(t.chan, tuple(_norm_expr(e) for e in t.payload))
    if isinstance(t, Sum):
        guards = []
        for g in sum_guards(t):
            g = normalize(g)
            if g == NIL:
                continue
            guards.extend(sum_guards(g))
        if not guards:
            return NIL
        guards.sort(key=term_key)
        return sum_all(guards)
    if isinstance(t, Par):
        comps = []
        for c in par_components(t):
            c = normalize(c)
            if c == NIL:
                continue
            comps.extend(par_components(c))
        if not comps:
            return NIL
        comps.sort(key=term_key)
        return par_all(comps)
    if isinstance(t, Restrict):
        return _normalize_restrict(normalize(t.body), t.chan)
    if isinstance(t, Ite):
        cond = _norm_expr(t.cond)
        if isinstance(cond, BoolLit):
            return normalize(t.then if cond.value else t.els)
        return Ite(cond, normalize(t.then), normalize(t.els))
    if isinstance(t, RandBit):
        return RandBit(t.var, normalize(t.cont))
    raise TypeError(f"not a term: {t!r}")


def _normalize_restrict(body, chan):
    """body is already normalized; compute the canonical form of the whole
    restriction chain rooted here. Component-level restrictions whose
    scope may legally extend over their siblings are pulled up first, then
    every channel is pushed back inward in a fixed order, so congruent
    nestings canonicalize alike."""
    chans = {chan}
    core = body
    while isinstance(core, Restrict):
        chans.add(core.chan)
        core = core.body
    comps = par_components(core)
    changed = True
    while changed:
        changed = False
        for i, c in enumerate(comps):
            if not isinstance(c, Restrict):
                continue
            inner_chans = set()
            cc = c
            while isinstance(cc, Restrict):
                inner_chans.add(cc.chan)
                cc = cc.body
            siblings = [x for j, x in enumerate(comps) if j != i]
            sibling_fc = frozenset().union(*map(free_channels, siblings)) if siblings else frozenset()
            if inner_chans & sibling_fc or inner_chans & chans:
                continue  # extension would capture or shadow: keep opaque
            comps = siblings + par_components(cc)
            chans |= inner_chans
            changed = True
            break
    for c in sorted(chans):
        using = [x for x in comps if c in free_channels(x)]
        if not using:
            continue  # channel never used: restriction is inert
        rest = [x for x in comps if c not in free_channels(x)]
        blob = Restrict(par_all(sorted(using, key=term_key)), c)
        comps = rest + [blob]
    if not comps:
        return NIL
    comps.sort(key=term_key)
    return par_all(comps)


def pretty_key(e) -> str:
    return pretty_expr(e)


def congruent(p, q, env=None) -> bool:
    """Structural congruence via canonical forms."""
    if env:
        for var, value in env.items():
            p = substitute(p, var, value)
            q = substitute(q, var, value)
    return normalize(p) == normalize(q)


# --- observer congruence ----------------------------------------------------


@lru_cache(maxsize=None)
def normalize_observer(t):
    """Observer congruence has no rules for parallel composition, so the
    Par tree keeps its shape; only sums, conditionals, and expressions
    are canonicalized."""
    if isinstance(t, Nil):
        return Nil(tuple(sorted((_norm_expr(e) for e in t.discards), key=pretty_key)))
    if isinstance(t, ApplyOp):
        return ApplyOp(t.op, tuple(_norm_expr(e) for e in t.args), normalize_observer(t.cont))
    if isinstance(t, Measure):
        return Measure(
            t.op, tuple(_norm_expr(e) for e in t.args), t.var, normalize_observer(t.cont)
        )
    if isinstance(t, Recv):
        return Recv(t.chan, t.vars, normalize_observer(t.cont))
    if isinstance(t, Send):
        return Send(t.chan, tuple(_norm_expr(e) for e in t.payload))
    if isinstance(t, Sum):
        guards = []
        for g in sum_guards(t):
            g = normalize_observer(g)
            if g == NIL:
                continue
            guards.extend(sum_guards(g))
        if not guards:
            return NIL
        guards = sorted(set(guards), key=term_key)
        return sum_all(guards)
    if isinstance(t, Par):
        return Par(normalize_observer(t.left), normalize_observer(t.right))
    if isinstance(t, Ite):
        cond = _norm_expr(t.cond)
        if isinstance(cond, BoolLit):
            return normalize_observer(t.then if cond.value else t.els)
        return Ite(cond, normalize_observer(t.then), normalize_observer(t.els))
    raise TypeError(f"not an observer term: {t!r}")


def congruent_observer(r, s) -> bool:
    return normalize_observer(r) == normalize_observer(s)
