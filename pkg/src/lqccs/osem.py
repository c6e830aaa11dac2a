"""Enhanced semantics over triples (state, process, observer).

Moves carry an index naming the observer position that fired: the
diamond for process-only steps, or a string over {l, r} locating the
active position in the observer's parallel tree (empty string for a
top-level observer action). Lifting to distributions requires every
element to move at the same index; elements that cannot contribute the
deadlock point.
"""

from __future__ import annotations

import itertools

from .errors import ChoiceExplosion, TypingError
from .ops import resolve_measurement, resolve_operator
from .qcore import apply_superop, measure
from .rewrite import normalize, normalize_observer, substitute_many
from .semantics import (
    BOT,
    DEFAULT_CHOICE_CAP,
    Configuration,
    Distribution,
    _dedupe,
    _payload_values,
    _qubit_args,
    _rebuild,
    exec_view,
    step_genuine,
)
from .syntax import (
    NIL,
    ApplyOp,
    Measure,
    Nil,
    Par,
    Recv,
    Restrict,
    Send,
    Sum,
    qubit_atoms,
    sum_guards,
)

DIAMOND = "⋄"
L = "ℓ"
R = "r"


def is_path(index: str) -> bool:
    return index != DIAMOND


def estep(config: Configuration, sig=None) -> list:
    """Indexed moves of a triple. A stuck process still yields the
    diamond move to the deadlock point (the process side of the semantics
    is the deadlock-augmented reduction)."""
    if config.is_bot:
        return [(DIAMOND, Distribution.point(BOT))]
    moves = estep_genuine(config, sig)
    if not any(idx == DIAMOND for idx, _ in moves):
        moves.append((DIAMOND, Distribution.point(BOT)))
    return moves


def estep_genuine(config: Configuration, sig=None) -> list:
    """Moves derivable by the actual rules (no deadlock augmentation)."""
    if config.is_bot:
        return []
    moves = [(DIAMOND, d) for d in step_genuine(config, sig)]
    obs = normalize_observer(config.obs)
    proc = normalize(config.proc)
    for idx, dist in _observer_moves(config.rho, proc, obs, sig):
        moves.append((idx, dist))
    out = []
    seen = set()
    for idx, d in moves:
        k = (idx, d.key())
        if k not in seen:
            seen.add(k)
            out.append((idx, d))
    return out


def _observer_moves(rho, proc, obs, sig) -> list:
    if isinstance(obs, Par):
        out = []
        for idx, dist in _observer_moves(rho, proc, obs.left, sig):
            out.append(
                (L + idx, dist.map(lambda c: c if c.is_bot else c.with_observer(Par(c.obs, obs.right))))
            )
        for idx, dist in _observer_moves(rho, proc, obs.right, sig):
            out.append(
                (R + idx, dist.map(lambda c: c if c.is_bot else c.with_observer(Par(obs.left, c.obs))))
            )
        return out
    # leaf position: fires with the empty index
    moves = []
    if isinstance(obs, ApplyOp):
        targets = _qubit_args(obs.args)
        op = resolve_operator(obs.op, len(targets), sig)
        moves.append(
            ("", Distribution.point(Configuration(apply_superop(op, targets, rho), proc, obs.cont)))
        )
    elif isinstance(obs, Measure):
        targets = _qubit_args(obs.args)
        m = resolve_measurement(obs.op, len(targets), sig)
        branches = []
        for outcome, p, post in measure(m, targets, rho):
            cont = normalize_observer(substitute_many(obs.cont, [(obs.var, outcome)]))
            branches.append((Configuration(post, proc, cont), p))
        moves.append(("", Distribution(branches)))
    elif isinstance(obs, Send):
        vals = _payload_values(obs.payload)
        if vals is not None:
            comps, restricted = exec_view(proc)
            if obs.chan not in restricted:
                for j, receiver in enumerate(comps):
                    if isinstance(receiver, Restrict):
                        continue
                    for g in sum_guards(receiver):
                        if not isinstance(g, Recv) or g.chan != obs.chan:
                            continue
                        if len(g.vars) != len(vals):
                            continue
                        cont = substitute_many(g.cont, list(zip(g.vars, vals)))
                        rest = [c for k, c in enumerate(comps) if k != j]
                        new_proc = _rebuild(rest + [cont], restricted)
                        moves.append(
                            ("", Distribution.point(Configuration(rho, new_proc, NIL)))
                        )
    elif isinstance(obs, (Recv, Sum)):
        receptions = [g for g in sum_guards(obs) if isinstance(g, Recv)]
        comps, restricted = exec_view(proc)
        for g in receptions:
            for i, sender in enumerate(comps):
                if isinstance(sender, Restrict):
                    continue
                for gs in sum_guards(sender):
                    if not isinstance(gs, Send) or gs.chan != g.chan:
                        continue
                    if gs.chan in restricted:
                        continue
                    vals = _payload_values(gs.payload)
                    if vals is None or len(vals) != len(g.vars):
                        continue
                    cont = normalize_observer(substitute_many(g.cont, list(zip(g.vars, vals))))
                    rest = [c for k, c in enumerate(comps) if k != i]
                    new_proc = _rebuild(rest, restricted)
                    moves.append(
                        ("", Distribution.point(Configuration(rho, new_proc, cont)))
                    )
    return moves


def lift_estep(dist: Distribution, sig=None, cap: int = DEFAULT_CHOICE_CAP) -> list:
    """Indexed lifting: for each index enabled by some element, the
    product of per-element choices at that index, with deadlock points
    filling in for elements that lack the index."""
    elems = list(dist.items())
    per_elem = [estep(c, sig) for c, _ in elems]
    indices = []
    for mv in per_elem:
        for idx, _ in mv:
            if idx not in indices:
                indices.append(idx)
    out = []
    for idx in indices:
        options = []
        total = 1
        for mv in per_elem:
            here = [d for i, d in mv if i == idx]
            if not here:
                here = [Distribution.point(BOT)]
            options.append(here)
            total *= len(here)
            if total > cap:
                raise ChoiceExplosion(f"{total}+ move combinations exceed the cap {cap}")
        for combo in itertools.product(*options):
            out.append((idx, Distribution.convex(
                [(p, d) for (_, p), d in zip(elems, combo)])))
    seen = set()
    uniq = []
    for idx, d in out:
        k = (idx, d.key())
        if k not in seen:
            seen.add(k)
            uniq.append((idx, d))
    return uniq


def moves_at(dist: Distribution, index: str, sig=None, cap: int = DEFAULT_CHOICE_CAP) -> list:
    """Successors of the lifted relation at one index; the deadlock point
    when no element enables it."""
    found = [d for idx, d in lift_estep(dist, sig, cap) if idx == index]
    return found if found else [Distribution.point(BOT)]


def ext_barbs(x) -> dict:
    """Barb map of an extended configuration or distribution (observer
    sends count, matched through the full congruence on the observer)."""
    from .semantics import dist_barbs

    if isinstance(x, Configuration):
        x = Distribution.point(x)
    return dist_barbs(x)


def apply_context(dist: Distribution, frame, sig=None) -> Distribution:
    """Compose an observer frame (on the right) with every element's
    observer; the frame fills the hole of a configuration whose observer
    is inert. Frame qubits must be free in every element."""
    frame = normalize_observer(frame)
    if frame == NIL:
        return dist
    frame_qubits = qubit_atoms(frame)

    def attach(c: Configuration) -> Configuration:
        if c.is_bot:
            return c
        owned = qubit_atoms(c.proc) | qubit_atoms(c.obs)
        if frame_qubits & owned:
            raise TypingError(
                f"context qubits {sorted(frame_qubits & owned)} already owned by the configuration"
            )
        if not frame_qubits <= set(c.rho.register.names):
            raise TypingError(
                f"context qubits {sorted(frame_qubits - set(c.rho.register.names))} not in the state"
            )
        new_obs = frame if c.obs == NIL else Par(c.obs, frame)
        return Configuration(c.rho, c.proc, new_obs)

    return dist.map(attach)


def apply_process_context(dist: Distribution, frame, sig=None) -> Distribution:
    """Parallel process context for the plain semantics."""
    frame = normalize(frame)
    frame_qubits = qubit_atoms(frame)

    def attach(c: Configuration) -> Configuration:
        if c.is_bot:
            return c
        owned = qubit_atoms(c.proc) | qubit_atoms(c.obs)
        if frame_qubits & owned:
            raise TypingError(
                f"context qubits {sorted(frame_qubits & owned)} already owned by the configuration"
            )
        if not frame_qubits <= set(c.rho.register.names):
            raise TypingError(
                f"context qubits {sorted(frame_qubits - set(c.rho.register.names))} not in the state"
            )
        return Configuration(c.rho, normalize(Par(c.proc, frame)), c.obs)

    return dist.map(attach)
