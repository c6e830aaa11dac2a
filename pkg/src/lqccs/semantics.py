"""Configurations, distributions, the probabilistic reduction relation,
and barbs.

A configuration pairs a normalized quantum state with a process (and an
observer, used by the enhanced semantics; the plain semantics keeps it
inert). The absorbing deadlock configuration BOT stands in for stuck
configurations when transitions are lifted to distributions.
"""

from __future__ import annotations

import itertools

from .errors import ChoiceExplosion, EvalError
from .ops import resolve_measurement, resolve_operator
from .qcore import TOL_PROB, DensityMatrix, apply_superop, measure
from .rewrite import normalize, normalize_observer, substitute_many
from .syntax import (
    NIL,
    ApplyOp,
    Measure,
    Nil,
    Par,
    QubitLit,
    RandBit,
    Recv,
    Restrict,
    Send,
    Sum,
    Tau,
    free_channels,
    par_all,
    par_components,
    qubit_atoms,
    sum_guards,
)

BOT_BARB = "⊥"
DEFAULT_CHOICE_CAP = 100_000


class Configuration:
    """Either BOT or a triple (state, process, observer)."""

    __slots__ = ("rho", "proc", "obs", "_eqkey", "_hash", "_sortkey")

    def __init__(self, rho, proc, obs=NIL):
        self.rho = rho
        self.proc = proc
        self.obs = obs
        if rho is None:
            self._eqkey = ("bot",)
        else:
            self._eqkey = (rho.key(), proc, obs)
        self._hash = hash(self._eqkey)
        self._sortkey = None

    @property
    def is_bot(self) -> bool:
        return self.rho is None

    def key(self):
        """Hashable, totally ordered fingerprint (used to sort supports)."""
        if self._sortkey is None:
            if self.rho is None:
                self._sortkey = ("bot", (), b"", "", "")
            else:
                from .parser import pretty

                names, data = self.rho.key()
                self._sortkey = ("cfg", names, data, pretty(self.proc), pretty(self.obs))
        return self._sortkey

    def __eq__(self, other):
        return isinstance(other, Configuration) and self._eqkey == other._eqkey

    def __hash__(self):
        return self._hash

    def __repr__(self):
        if self.is_bot:
            return "<bot>"
        from .parser import pretty

        reg = ",".join(str(q) for q in self.rho.register.names)
        s = f"<[{reg}], {pretty(self.proc)}"
        if self.obs != NIL:
            s += f" | {pretty(self.obs)}"
        return s + ">"

    def with_observer(self, obs) -> "Configuration":
        return Configuration(self.rho, self.proc, obs)


BOT = Configuration(None, None, None)


def make_config(rho: DensityMatrix, proc, obs=NIL) -> Configuration:
    """Canonical configuration: process and observer normalized."""
    return Configuration(rho, normalize(proc), normalize_observer(obs))


class Distribution:
    """Finite-support probability distribution over configurations."""

    __slots__ = ("support", "_key")

    def __init__(self, pairs, renormalize: bool = False):
        acc: dict = {}
        total = 0.0
        for cfg, p in pairs:
            if p <= TOL_PROB:
                continue
            acc[cfg] = acc.get(cfg, 0.0) + p
            total += p
        if renormalize and acc and abs(total - 1.0) > TOL_PROB:
            acc = {c: p / total for c, p in acc.items()}
            total = 1.0
        if not acc:
            raise ValueError("empty distribution")
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}, not 1")
        self.support = acc
        self._key = None

    @staticmethod
    def point(cfg: Configuration) -> "Distribution":
        return Distribution([(cfg, 1.0)])

    def items(self):
        return self.support.items()

    def __len__(self):
        return len(self.support)

    def key(self):
        if self._key is None:
            self._key = tuple(
                sorted((c.key(), round(p, 9)) for c, p in self.support.items())
            )
        return self._key

    def __eq__(self, other):
        return isinstance(other, Distribution) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        parts = ", ".join(f"{p:.4f}*{c!r}" for c, p in sorted(
            self.support.items(), key=lambda kv: kv[0].key()))
        return f"{{{parts}}}"

    def map(self, f) -> "Distribution":
        """Push each configuration through f (BOT maps to BOT)."""
        return Distribution([(f(c), p) for c, p in self.support.items()])

    def bot_mass(self) -> float:
        return self.support.get(BOT, 0.0)

    @staticmethod
    def convex(parts) -> "Distribution":
        """Mixture sum_i p_i * dist_i."""
        pairs = []
        for p, dist in parts:
            for c, q in dist.items():
                pairs.append((c, p * q))
        return Distribution(pairs)


def mixture(d1: Distribution, d2: Distribution, p: float) -> Distribution:
    if p >= 1.0 - TOL_PROB:
        return d1
    if p <= TOL_PROB:
        return d2
    return Distribution.convex([(p, d1), (1 - p, d2)])


# --- execution view ---------------------------------------------------------


def exec_view(proc):
    """Flatten a normalized process into parallel components under one
    top restriction set. Restricted blobs merge when scope extension over
    the siblings is legal (no free-channel capture); otherwise they stay
    opaque components that only step internally."""
    comps = par_components(proc)
    fcs = [free_channels(c) for c in comps]
    out = []
    restricted: set = set()
    for i, comp in enumerate(comps):
        if isinstance(comp, Restrict):
            chain = set()
            inner = comp
            while isinstance(inner, Restrict):
                chain.add(inner.chan)
                inner = inner.body
            inner_comps, inner_restr = exec_view(inner)
            all_restr = chain | set(inner_restr)
            sibling_fc = frozenset().union(*(fcs[j] for j in range(len(comps)) if j != i)) \
                if len(comps) > 1 else frozenset()
            if all_restr & sibling_fc or all_restr & restricted:
                out.append(comp)
            else:
                out.extend(inner_comps)
                restricted |= all_restr
        else:
            out.append(comp)
    return out, frozenset(restricted)


def _rebuild(comps, restricted) -> object:
    term = par_all([c for c in comps if c != NIL]) if comps else NIL
    for c in sorted(restricted):
        term = Restrict(term, c)
    return normalize(term)


def _payload_values(payload):
    vals = []
    for e in payload:
        if isinstance(e, QubitLit):
            vals.append(e)
        else:
            from .rewrite import eval_expr, value_to_expr

            try:
                vals.append(value_to_expr(eval_expr(e)))
            except EvalError:
                return None  # open payload cannot be communicated
    return vals


def _qubit_args(args):
    names = []
    for e in args:
        if not isinstance(e, QubitLit):
            raise EvalError(f"operator argument {e!r} is not a qubit at runtime")
        names.append(e.name)
    return names


# --- the reduction relation -------------------------------------------------


def step(config: Configuration, sig=None) -> list:
    """All distributions reachable in one reduction; stuck configurations
    (and BOT itself) step to the point distribution on BOT."""
    if config.is_bot:
        return [Distribution.point(BOT)]
    moves = step_genuine(config, sig)
    return moves if moves else [Distribution.point(BOT)]


def step_genuine(config: Configuration, sig=None) -> list:
    """Reductions derivable by the actual rules (no deadlock augmentation)."""
    if config.is_bot:
        return []
    rho = config.rho
    obs = config.obs
    results = []
    for dist in _proc_moves(rho, normalize(config.proc), sig):
        results.append(dist.map(lambda c: c if c.is_bot else c.with_observer(obs)))
    return _dedupe(results)


def _dedupe(dists):
    seen = {}
    for d in dists:
        seen.setdefault(d.key(), d)
    return list(seen.values())


def _proc_moves(rho: DensityMatrix, proc, sig) -> list:
    comps, restricted = exec_view(proc)
    moves = []

    def succ(new_rho, new_comps):
        return Distribution.point(Configuration(new_rho, _rebuild(new_comps, restricted)))

    for i, comp in enumerate(comps):
        others = comps[:i] + comps[i + 1 :]
        if isinstance(comp, Restrict):
            # opaque blob: steps internally, composed back by the Par rule
            for dist in _proc_moves(rho, comp, sig):
                moves.append(
                    Distribution(
                        [
                            (Configuration(c.rho, _rebuild(others + [c.proc], restricted)), p)
                            for c, p in dist.items()
                        ]
                    )
                )
            continue
        for g in sum_guards(comp):
            if isinstance(g, Tau):
                moves.append(succ(rho, others + [g.cont]))
            elif isinstance(g, ApplyOp):
                targets = _qubit_args(g.args)
                op = resolve_operator(g.op, len(targets), sig)
                moves.append(succ(apply_superop(op, targets, rho), others + [g.cont]))
            elif isinstance(g, Measure):
                targets = _qubit_args(g.args)
                m = resolve_measurement(g.op, len(targets), sig)
                branches = []
                for outcome, p, post in measure(m, targets, rho):
                    cont = substitute_many(g.cont, [(g.var, outcome)])
                    branches.append(
                        (Configuration(post, _rebuild(others + [cont], restricted)), p)
                    )
                moves.append(Distribution(branches))
            elif isinstance(g, RandBit):
                branches = []
                for bit in (0, 1):
                    cont = substitute_many(g.cont, [(g.var, bit)])
                    branches.append(
                        (Configuration(rho, _rebuild(others + [cont], restricted)), 0.5)
                    )
                moves.append(Distribution(branches))
    # communication between two distinct components
    for i, sender in enumerate(comps):
        if isinstance(sender, Restrict):
            continue
        for gs in sum_guards(sender):
            if not isinstance(gs, Send):
                continue
            vals = _payload_values(gs.payload)
            if vals is None:
                continue
            for j, receiver in enumerate(comps):
                if i == j or isinstance(receiver, Restrict):
                    continue
                for gr in sum_guards(receiver):
                    if not isinstance(gr, Recv) or gr.chan != gs.chan:
                        continue
                    if len(gr.vars) != len(vals):
                        continue
                    cont = substitute_many(gr.cont, list(zip(gr.vars, vals)))
                    rest = [c for k, c in enumerate(comps) if k not in (i, j)]
                    moves.append(succ(rho, rest + [cont]))
    return _dedupe(moves)


def lift_step(dist: Distribution, sig=None, cap: int = DEFAULT_CHOICE_CAP) -> list:
    """Lift the reduction relation: every per-element choice of moves,
    linearly combined. Stuck elements contribute the BOT point."""
    elems = list(dist.items())
    per_elem = [step(c, sig) for c, _ in elems]
    total = 1
    for m in per_elem:
        total *= len(m)
        if total > cap:
            raise ChoiceExplosion(f"{total}+ move combinations exceed the cap {cap}")
    out = []
    for combo in itertools.product(*per_elem):
        out.append(Distribution.convex([(p, d) for (_, p), d in zip(elems, combo)]))
    return _dedupe(out)


# --- barbs -------------------------------------------------------------------


def proc_barbs(proc) -> frozenset:
    """Channels on which the process is ready to send (not restricted)."""
    comps, restricted = exec_view(normalize(proc))
    barbs = set()
    for comp in comps:
        if isinstance(comp, Restrict):
            barbs |= proc_barbs(comp)
        else:
            for g in sum_guards(comp):
                if isinstance(g, Send):
                    barbs.add(g.chan)
    return frozenset(barbs - restricted)


def config_barbs(config: Configuration) -> frozenset:
    """Barbs of a (possibly extended) configuration: process sends plus
    observer parallel components that are sends (full congruence applies
    to the observer here, so its parallel structure is flattened)."""
    if config.is_bot:
        return frozenset()
    barbs = set(proc_barbs(config.proc))
    if config.obs != NIL:
        for comp in par_components(normalize(config.obs)):
            if isinstance(comp, Send):
                barbs.add(comp.chan)
    return frozenset(barbs)


def dist_barbs(dist: Distribution) -> dict:
    """Per-channel probability mass of elements exhibiting the barb, with
    the deadlock mass under BOT_BARB."""
    out: dict = {}
    for cfg, p in dist.items():
        if cfg.is_bot:
            out[BOT_BARB] = out.get(BOT_BARB, 0.0) + p
            continue
        for b in config_barbs(cfg):
            out[b] = out.get(b, 0.0) + p
    return out


def barbs_equal(b1: dict, b2: dict, tol: float = TOL_PROB) -> bool:
    for k in set(b1) | set(b2):
        if abs(b1.get(k, 0.0) - b2.get(k, 0.0)) > tol:
            return False
    return True


def barb_mismatch(b1: dict, b2: dict, tol: float = TOL_PROB):
    """First differing channel, or None."""
    for k in sorted(set(b1) | set(b2)):
        p1, p2 = b1.get(k, 0.0), b2.get(k, 0.0)
        if abs(p1 - p2) > tol:
            return (k, p1, p2)
    return None


# --- typing of configurations ------------------------------------------------


def config_typing(config: Configuration, sig):
    """(register names, owned qubits) of a well-typed configuration."""
    from .typecheck import typecheck

    if config.is_bot:
        return None
    sp = typecheck(sig, config.proc)
    sr = typecheck(sig, config.obs) if config.obs != NIL else frozenset()
    if sp & sr:
        from .errors import TypingError

        raise TypingError(f"process and observer share qubits {sorted(sp & sr)}")
    reg = frozenset(config.rho.register.names)
    if not (sp | sr) <= reg:
        from .errors import TypingError

        raise TypingError(f"owned qubits {sorted((sp | sr) - reg)} missing from the state")
    return (frozenset(config.rho.register.names), sp | sr)


def typing_preserved(config: Configuration, dist: Distribution, sig) -> bool:
    """Every element of a successor distribution carries the source typing."""
    src = config_typing(config, sig)
    for c, _ in dist.items():
        if c.is_bot:
            continue
        if config_typing(c, sig) != src:
            return False
    return True
