"""Abstract syntax for process terms, observers, and expressions.

Processes and observers share one node set; the observer fragment is the
subset without tau, restriction, and random bits, with sums limited to
receptions on pairwise distinct channels (checked by `observer_violation`).
All nodes are frozen, so terms are hashable and shareable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import SortError

QUBIT = "qubit"
NAT = "nat"
BOOL = "bool"


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class NatLit:
    value: int


@dataclass(frozen=True)
class QubitLit:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of: or and = <= + - *
    left: "Expr"
    right: "Expr"


Expr = Union[Var, BoolLit, NatLit, QubitLit, Not, BinOp]


# --- process / observer terms ---------------------------------------------


@dataclass(frozen=True)
class Nil:
    """Deadlock that keeps ownership of the discarded qubits (empty tuple
    is the plain inert process)."""

    discards: tuple = ()


@dataclass(frozen=True)
class Tau:
    cont: "Term"


@dataclass(frozen=True)
class ApplyOp:
    op: str
    args: tuple  # qubit expressions
    cont: "Term"


@dataclass(frozen=True)
class Measure:
    op: str
    args: tuple
    var: str
    cont: "Term"


@dataclass(frozen=True)
class Recv:
    chan: str
    vars: tuple  # one or more bound names (polyadic)
    cont: "Term"


@dataclass(frozen=True)
class Send:
    chan: str
    payload: tuple  # one or more expressions


@dataclass(frozen=True)
class Sum:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Par:
    left: "Term"
    right: "Term"


@dataclass(frozen=True)
class Restrict:
    body: "Term"
    chan: str


@dataclass(frozen=True)
class Ite:
    cond: Expr
    then: "Term"
    els: "Term"


@dataclass(frozen=True)
class RandBit:
    var: str
    cont: "Term"


Term = Union[Nil, Tau, ApplyOp, Measure, Recv, Send, Sum, Par, Restrict, Ite, RandBit]

NIL = Nil()


def par_all(terms) -> Term:
    terms = list(terms)
    if not terms:
        return NIL
    out = terms[0]
    for t in terms[1:]:
        out = Par(out, t)
    return out


def sum_all(terms) -> Term:
    terms = list(terms)
    out = terms[0]
    for t in terms[1:]:
        out = Sum(out, t)
    return out


def par_components(term: Term) -> list:
    """Flatten nested Par into a component list."""
    if isinstance(term, Par):
        return par_components(term.left) + par_components(term.right)
    return [term]


def sum_guards(term: Term) -> list:
    if isinstance(term, Sum):
        return sum_guards(term.left) + sum_guards(term.right)
    return [term]


def is_guard(term: Term) -> bool:
    """K-sort membership: the alternatives a sum may contain."""
    if isinstance(term, (Nil, Tau, ApplyOp, Measure, Recv, Send, RandBit)):
        return True
    if isinstance(term, Sum):
        return is_guard(term.left) and is_guard(term.right)
    return False


def check_process_sorts(term: Term, where: str = "process"):
    """Reject terms outside the two-level grammar (sums of non-guards)."""
    if isinstance(term, Sum):
        for g in (term.left, term.right):
            if not is_guard(g):
                raise SortError(f"sum alternative {g!r} is not a guarded term")
            check_process_sorts(g, where)
        return
    for child in _children(term):
        check_process_sorts(child, where)


def observer_violation(term: Term) -> Optional[str]:
    """Reason the term is not a valid observer, or None."""
    if isinstance(term, (Tau, RandBit)):
        return f"{type(term).__name__.lower()} is not allowed in observers"
    if isinstance(term, Restrict):
        return "restriction is not allowed in observers"
    if isinstance(term, Sum):
        recvs = sum_guards(term)
        chans = []
        for g in recvs:
            if not isinstance(g, Recv):
                return f"observer sums may only contain receptions, found {type(g).__name__}"
            chans.append(g.chan)
        if len(set(chans)) != len(chans):
            return f"observer reception sum repeats a channel: {chans}"
        for g in recvs:
            v = observer_violation(g.cont)
            if v:
                return v
        return None
    for child in _children(term):
        v = observer_violation(child)
        if v:
            return v
    return None


def check_observer(term: Term):
    v = observer_violation(term)
    if v:
        raise SortError(v)


def _children(term: Term) -> tuple:
    if isinstance(term, (Tau, ApplyOp, Measure, Recv, RandBit)):
        return (term.cont,)
    if isinstance(term, (Sum, Par)):
        return (term.left, term.right)
    if isinstance(term, Restrict):
        return (term.body,)
    if isinstance(term, Ite):
        return (term.then, term.els)
    return ()


def free_channels(term: Term) -> frozenset:
    if isinstance(term, Send):
        return frozenset({term.chan})
    if isinstance(term, Recv):
        return frozenset({term.chan}) | free_channels(term.cont)
    if isinstance(term, Restrict):
        return free_channels(term.body) - {term.chan}
    out = frozenset()
    for child in _children(term):
        out |= free_channels(child)
    return out


def expr_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Not):
        return expr_vars(e.arg)
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    return frozenset()


def expr_qubits(e: Expr) -> frozenset:
    return frozenset({e.name}) if isinstance(e, QubitLit) else frozenset()


def _term_exprs(term: Term) -> tuple:
    if isinstance(term, Nil):
        return term.discards
    if isinstance(term, (ApplyOp, Measure)):
        return term.args
    if isinstance(term, Send):
        return term.payload
    if isinstance(term, Ite):
        return (term.cond,)
    return ()


def free_vars(term: Term) -> frozenset:
    """Free classical variables (bound by receptions, measurements, randbit)."""
    out = frozenset()
    for e in _term_exprs(term):
        out |= expr_vars(e)
    bound = ()
    if isinstance(term, (Measure, RandBit)):
        bound = (term.var,)
    elif isinstance(term, Recv):
        bound = term.vars
    for child in _children(term):
        out |= free_vars(child) - frozenset(bound)
    return out


def qubit_atoms(term: Term) -> frozenset:
    """All qubit names mentioned anywhere in the term."""
    out = frozenset()
    for e in _term_exprs(term):
        out |= expr_qubits(e)
    for child in _children(term):
        out |= qubit_atoms(child)
    return out


# --- declarations ----------------------------------------------------------


@dataclass
class Signature:
    """Channel and variable typing plus the named-operator registry.

    channels maps a name to the tuple of payload base types (len > 1 for
    polyadic channels); variables maps classical/qubit variable names to a
    base type; qubits is the declared register order for programs.
    """

    channels: dict = field(default_factory=dict)
    variables: dict = field(default_factory=dict)
    qubits: tuple = ()
    operators: dict = field(default_factory=dict)  # name -> Superoperator (fixed arity)
    measurements: dict = field(default_factory=dict)  # name -> Measurement

    def copy(self) -> "Signature":
        return Signature(
            dict(self.channels),
            dict(self.variables),
            tuple(self.qubits),
            dict(self.operators),
            dict(self.measurements),
        )

    def channel_type(self, chan: str):
        return self.channels.get(chan)

    def declare_channel(self, chan: str, types):
        self.channels[chan] = tuple(types)

    def is_qubit_name(self, name: str) -> bool:
        return name in self.qubits or self.variables.get(name) == QUBIT
