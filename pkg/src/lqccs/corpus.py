"""Executable corpus: the six-row comparison table and the three
protocols (teleportation, superdense coding, quantum coin flipping),
each packaged with its program source, initial states, bounds, and an
expected-verdict check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .equiv import (
    CONSTRAINED,
    SATURATED,
    CertifiedBisimilar,
    Distinguished,
    SearchBounds,
    advance_scheduled,
    advance_unique,
    config_partial_trace,
    density_quotient_equiv,
    distinguish,
)
from .osem import apply_context, lift_estep, moves_at
from .parser import parse_process, parse_program
from .qcore import TOL_PROB
from .semantics import Distribution, dist_barbs, make_config
from .syntax import Signature


@dataclass
class CorpusEntry:
    name: str
    source: str
    states: str
    mode: str
    expected: str
    bounds: SearchBounds
    check: object = field(repr=False, default=None)

    def run(self):
        """-> (ok, detail)"""
        return self.check()


def _point(state, proc, obs=None):
    from .syntax import NIL

    return Distribution.point(make_config(state, proc, obs if obs is not None else NIL))


# ---------------------------------------------------------------------------
# Table rows


_ROW2_SRC = """
channel c : qubit;
process Left = c?x.H(x).disc(x);
process Right = c?x.X(x).disc(x);
"""


def build_row2() -> CorpusEntry:
    bounds = SearchBounds(context_size=12, depth=4, fresh_channels=2, ancillas=0)

    def check():
        sig, defs = parse_program(_ROW2_SRC)
        sig.qubits = ("anc0",)
        anc = qcore.pure_state(qcore.KET0, ("anc0",))
        dl = _point(anc, defs["Left"])
        dr = _point(anc, defs["Right"])
        for mode in (SATURATED, CONSTRAINED):
            v = distinguish(dl, dr, mode, bounds, sig)
            if isinstance(v, Distinguished):
                return False, f"unexpected distinguisher in {mode} mode"
        # equivalence evidence: after any preparation is delivered and the
        # qubit discarded, tracing out the discard equates both sides
        for prep in ("c!anc0", "H(anc0).c!anc0", "X(anc0).c!anc0"):
            frame = parse_process(prep, sig)
            ctx_l = apply_context(dl, frame)
            ctx_r = apply_context(dr, frame)
            fin_l = advance_unique(moves_at(ctx_l, "", sig)[0], sig)[-1]
            fin_r = advance_unique(moves_at(ctx_r, "", sig)[0], sig)[-1]
            red_l = config_partial_trace(fin_l, ("anc0",))
            red_r = config_partial_trace(fin_r, ("anc0",))
            cert = density_quotient_equiv(red_l, red_r, bounds, sig)
            if not isinstance(cert, CertifiedBisimilar):
                return False, f"trace-reduction certificate failed for prep {prep}"
        return True, "no distinguisher at bounds; certified after discard tracing"

    return CorpusEntry(
        name="table1-row2",
        source=_ROW2_SRC,
        states="one |0> ancilla",
        mode="both",
        expected="equivalent in both modes (certificate after discard tracing)",
        bounds=bounds,
        check=check,
    )


_ROW3_SRC = """
channel c : qubit;
channel d : qubit;
process Left = c?x.H(x).d!x;
process Right = c?x.X(x).d!x;
"""


def build_row3() -> CorpusEntry:
    bounds = SearchBounds(context_size=14, depth=5, fresh_channels=2, ancillas=0)

    def check():
        sig, defs = parse_program(_ROW3_SRC)
        anc = qcore.pure_state(qcore.KET0, ("anc0",))
        dl = _point(anc, defs["Left"])
        dr = _point(anc, defs["Right"])
        for mode in (SATURATED, CONSTRAINED):
            v = distinguish(dl, dr, mode, bounds, sig)
            if not isinstance(v, Distinguished):
                return False, f"not distinguished in {mode} mode: {v.verdict}"
        return True, "distinguished in both modes"

    return CorpusEntry(
        name="table1-row3",
        source=_ROW3_SRC,
        states="one |0> ancilla",
        mode="both",
        expected="distinguished in both modes",
        bounds=bounds,
        check=check,
    )


_ROW4_SRC = """
channel c : qubit;
qubit q1, q2;
process Left = SetMaxMix(q1,q2).(c!q1 || c!q2);
process Right = SetPhiP(q1,q2).(c!q1 || c!q2);
"""


def build_row4() -> CorpusEntry:
    bounds = SearchBounds(context_size=14, depth=5, fresh_channels=2, ancillas=0)

    def check():
        sig, defs = parse_program(_ROW4_SRC)
        st = qcore.pure_state(qcore.kron(qcore.KET0, qcore.KET0), ("q1", "q2"))
        dl = _point(st, defs["Left"])
        dr = _point(st, defs["Right"])
        for mode in (SATURATED, CONSTRAINED):
            v = distinguish(dl, dr, mode, bounds, sig)
            if not isinstance(v, Distinguished):
                return False, f"not distinguished in {mode} mode: {v.verdict}"
        return True, "distinguished in both modes (entangled pair detected)"

    return CorpusEntry(
        name="table1-row4",
        source=_ROW4_SRC,
        states="|00>",
        mode="both",
        expected="distinguished in both modes",
        bounds=bounds,
        check=check,
    )


_ROW5_SRC = """
channel c : qubit;
qubit q;
process Left = SetPlus(q).M01(q |> x).c!q;
process Right = Set0(q).Mpm(q |> x).c!q;
"""

_BROKEN_NONDET_CTX = (
    "c?x.(M01(x |> y).((if y = 0 then flag0!0 else flag1!0) || disc(x))"
    " + Mpm(x |> y).((if y = 0 then flag2!0 else flag3!0) || disc(x)))"
)


def build_row5() -> CorpusEntry:
    def check():
        sig, defs = parse_program(_ROW5_SRC)
        st = qcore.pure_state(qcore.KET0, ("q",))
        dl = _point(st, defs["Left"])
        dr = _point(st, defs["Right"])
        hint = parse_process(_BROKEN_NONDET_CTX, sig)
        sat_bounds = SearchBounds(
            context_size=14, depth=6, fresh_channels=4, ancillas=0, hint_contexts=(hint,)
        )
        v = distinguish(dl, dr, SATURATED, sat_bounds, sig)
        if not isinstance(v, Distinguished):
            return False, f"saturated mode: {v.verdict}"
        if v.witness.context != hint:
            return False, "saturated witness is not the two-basis reception context"
        cs_bounds = SearchBounds(context_size=14, depth=6, fresh_channels=4, ancillas=0)
        v2 = distinguish(dl, dr, CONSTRAINED, cs_bounds, sig)
        if not isinstance(v2, CertifiedBisimilar):
            return False, f"constrained mode: {v2.verdict}"
        if v2.certificate[0] != "density-quotient":
            return False, f"unexpected certificate {v2.certificate[0]}"
        return True, "distinguished saturated (two-basis context), certified constrained"

    return CorpusEntry(
        name="table1-row5",
        source=_ROW5_SRC,
        states="|0>",
        mode="both",
        expected="distinguished saturated / certified bisimilar constrained",
        bounds=SearchBounds(context_size=14, depth=6, fresh_channels=4, ancillas=0),
        check=check,
    )


_ROW6_SRC = """
channel c : qubit;
channel d : qubit;
qubit q;
process Left = SetPlus(q).M01(q |> x).(c!q + d!q);
process Right = Set0(q).Mpm(q |> x).(c!q + d!q);
"""

_NONDETPROC_CTX = (
    "c?x.M01(x |> y).((if y = 0 then flag0!0 else flag1!0) || disc(x))"
    " + d?x.I(x).disc(x)"
)


def build_row6() -> CorpusEntry:
    def check():
        sig, defs = parse_program(_ROW6_SRC)
        st = qcore.pure_state(qcore.KET0, ("q",))
        dl = _point(st, defs["Left"])
        dr = _point(st, defs["Right"])
        hint = parse_process(_NONDETPROC_CTX, sig)
        bounds = SearchBounds(
            context_size=14, depth=6, fresh_channels=2, ancillas=0, hint_contexts=(hint,)
        )
        v = distinguish(dl, dr, CONSTRAINED, bounds, sig)
        if not isinstance(v, Distinguished):
            return False, f"constrained mode: {v.verdict}"
        if v.witness.context != hint:
            return False, "witness is not the reception-sum context"
        return True, "distinguished constrained (measurement-correlated choice)"

    return CorpusEntry(
        name="table1-row6",
        source=_ROW6_SRC,
        states="|0>",
        mode="constrained",
        expected="distinguished in constrained mode",
        bounds=SearchBounds(context_size=14, depth=6, fresh_channels=2, ancillas=0),
        check=check,
    )


def build_table1():
    return [build_row2(), build_row3(), build_row4(), build_row5(), build_row6()]


# ---------------------------------------------------------------------------
# teleportation


TELEPORT_SRC = """
channel m : nat;
channel out : qubit;
qubit q0, q1, q2;
process Bob = m?y.(if y = 0 then I(q2).out!q2
              else (if y = 1 then X(q2).out!q2
              else (if y = 2 then Z(q2).out!q2 else ZX(q2).out!q2)));
process Alice = CNOT(q0,q1).H(q0).M01(q0,q1 |> x).(m!x || disc(q0,q1));
process Tel = (Alice || Bob) \\ m;
process Spec = SWAP(q0,q2).tau.tau.tau.tau.(out!q2 || disc(q0,q1));
"""


def teleport_states():
    return [
        ("ket0", np.array([[1.0], [0.0]], dtype=complex)),
        ("ket+", (1 / math.sqrt(2)) * np.array([[1.0], [1.0]], dtype=complex)),
        ("3/5,4/5", np.array([[0.6], [0.8]], dtype=complex)),
    ]


def build_teleportation() -> CorpusEntry:
    bounds = SearchBounds(depth=8)

    def check():
        sig, defs = parse_program(TELEPORT_SRC)
        out_send = parse_process("out!q2", sig)
        for name, psi in teleport_states():
            st = qcore.pure_state(qcore.kron(psi, qcore.PHI_P), ("q0", "q1", "q2"))
            run = advance_unique(_point(st, defs["Tel"]), sig)
            if len(run) - 1 != 5:
                return False, f"{name}: expected 5 forced steps, got {len(run) - 1}"
            reduced = config_partial_trace(run[-1], ("q0", "q1"))
            target = _point(qcore.pure_state(psi, ("q2",)), out_send)
            cert = density_quotient_equiv(reduced, target, bounds, sig)
            if not isinstance(cert, CertifiedBisimilar):
                return False, f"{name}: output not certified equal to the input state"
            spec_run = advance_unique(_point(st, defs["Spec"]), sig)
            if len(spec_run) - 1 != 5:
                return False, f"{name}: spec chain is {len(spec_run) - 1} steps, not 5"
            spec_red = config_partial_trace(spec_run[-1], ("q0", "q1"))
            cert2 = density_quotient_equiv(reduced, spec_red, bounds, sig)
            if not isinstance(cert2, CertifiedBisimilar):
                return False, f"{name}: protocol and specification not certified equal"
        return True, "output state certified for all sampled inputs; spec matched in lockstep"

    return CorpusEntry(
        name="teleportation",
        source=TELEPORT_SRC,
        states="|psi> x |Phi+> for psi in {|0>, |+>, 3/5|0>+4/5|1>}",
        mode="constrained",
        expected="after 5 steps and tracing the discards, output = |psi><psi|",
        bounds=bounds,
        check=check,
    )


# ---------------------------------------------------------------------------
# superdense coding


SUPERDENSE_SRC = """
channel c : qubit;
channel a : qubit;
channel b : qubit;
channel success : qubit;
channel fail : qubit;
qubit q0, q1;
process Alice = PauliMix(q0).c!q0;
process Bob = c?x.CNOT(x,q1).H(x).M01(x,q1 |> y).((a!x + b!x) || disc(q1));
process Rob = c?x.CNOT(x,q1).H(x).tau.((a!x + b!x) || disc(q1));
process SDCBob = (Alice || Bob) \\ c;
process SDCRob = (Alice || Rob) \\ c;
"""

_SUPERDENSE_CTX = (
    "a?z.M01(z |> res).(if res = 0 then success!z else fail!z)"
    " + b?z.I(z).disc(z)"
)


def _reachable_barbmaps(dist, sig, depth, cap=100_000):
    """All barb maps reachable through the indexed lifting."""
    seen = set()
    out = []
    frontier = [dist]
    for _ in range(depth):
        nxt = []
        for d in frontier:
            for _, succ in lift_estep(d, sig, cap):
                k = succ.key()
                if k in seen:
                    continue
                seen.add(k)
                out.append(dist_barbs(succ))
                nxt.append(succ)
        frontier = nxt
    return out


def build_superdense() -> CorpusEntry:
    def check():
        sig, defs = parse_program(SUPERDENSE_SRC)
        st = qcore.pure_state(qcore.PSI_P, ("q0", "q1"))
        dbob = _point(st, defs["SDCBob"])
        drob = _point(st, defs["SDCRob"])
        # forced decode prefixes; Rob passes through the maximally mixed pair
        run_b = advance_unique(dbob, sig)
        run_r = advance_unique(drob, sig)
        if len(run_b) - 1 != 5 or len(run_r) - 1 != 5:
            return False, "decode prefixes are not 5 forced steps"
        (rob_cfg, _), = run_r[-1].items()
        if not np.allclose(rob_cfg.rho.mat, np.eye(4) / 4, atol=1e-9):
            return False, "Rob's decoded state is not the maximally mixed pair"
        frame = parse_process(_SUPERDENSE_CTX, sig)
        bob_maps = _reachable_barbmaps(apply_context(run_b[-1], frame), sig, 3)
        rob_maps = _reachable_barbmaps(apply_context(run_r[-1], frame), sig, 3)
        hit = any(
            abs(m.get("success", 0.0) - 0.5) <= TOL_PROB
            and m.get("fail", 0.0) <= TOL_PROB
            for m in bob_maps
        )
        if not hit:
            return False, "Bob cannot reach success 1/2 with fail 0"
        for m in rob_maps:
            s, f = m.get("success", 0.0), m.get("fail", 0.0)
            if abs(s - f) > TOL_PROB or (abs(s) > TOL_PROB and abs(s - 0.5) > TOL_PROB):
                return False, f"Rob reached success {s}, fail {f}"
        hint = frame
        bounds = SearchBounds(depth=8, ancillas=0, fresh_channels=2, hint_contexts=(hint,))
        v = distinguish(dbob, drob, CONSTRAINED, bounds, sig)
        if not isinstance(v, Distinguished):
            return False, f"constrained mode: {v.verdict}"
        return True, "Bob reaches success 1/2, fail 0; Rob both-or-neither; distinguished"

    return CorpusEntry(
        name="superdense",
        source=SUPERDENSE_SRC,
        states="|Psi+> on (q0, q1)",
        mode="constrained",
        expected="Bob and Rob distinguished; barb profile success 1/2 / fail 0 vs both-or-neither",
        bounds=SearchBounds(depth=8, ancillas=0, fresh_channels=2),
        check=check,
    )


# ---------------------------------------------------------------------------
# quantum coin flipping


def _bit_expr(n: int, i: int, var: str) -> str:
    """Boolean expression for bit i (leading bit first) of the n-qubit
    measurement outcome held in `var`."""
    if n == 1:
        return f"({var} = 1)"
    if i == 1:
        return f"(2 <= {var})"
    return f"(({var} = 1) or ({var} = 3))"


def qcf_source(n: int) -> str:
    if n not in (1, 2):
        raise ValueError("coin flipping corpus supports n in {1, 2}")
    qs = [f"q{i+1}" for i in range(n)]
    decls = [
        "channel atob : " + " * ".join(["qubit"] * n) + ";",
        "channel guess : nat;",
        "channel secret : nat;",
        "channel witness : nat;",
        "channel a : nat;",
        "channel b : nat;",
        "channel cheat : nat;",
    ]
    for i in range(1, n + 1):
        decls.append(f"channel base{i} : nat;")
        decls.append(f"channel bit{i} : nat;")
    decls.append("qubit " + ", ".join(qs) + ";")

    qtuple = ", ".join(qs)
    zvars = [f"z{i}" for i in range(1, n + 1)]

    alice_tail = (
        "(atob!(" + qtuple + ") || guess?g.(a!AWIN || secret!SEC || witness!w))"
    )
    a01_tail = alice_tail.replace("AWIN", "((1 - g) * 1 + g * 0)").replace("SEC", "0")
    apm_tail = alice_tail.replace("AWIN", "((1 - g) * 0 + g * 1)").replace("SEC", "1")
    alice01 = f"H({qtuple}).M01({qtuple} |> w).{a01_tail}"
    alicepm = f"I({qtuple}).Mpm({qtuple} |> w).{apm_tail}"

    servers = []
    for i in range(1, n + 1):
        z = zvars[i - 1]
        servers.append(
            f"process Server{i} = randbit(sb{i}).(if sb{i} = 0 "
            f"then M01({z} |> x{i}).(base{i}!sb{i} || bit{i}!x{i} || disc({z})) "
            f"else Mpm({z} |> x{i}).(base{i}!sb{i} || bit{i}!x{i} || disc({z})));"
        )
    bob_recv = "".join(f"base{i}?b{i}." for i in range(1, n + 1)) + "".join(
        f"bit{i}?x{i}." for i in range(1, n + 1)
    )
    # a server outcome disagrees with the revealed witness bit only under
    # a matching basis; the bit values are compared as booleans
    cheats = " || ".join(
        f"(if (b{i} = g2) and (not ((x{i} = 1) = {_bit_expr(n, i, 'v')})) "
        "then cheat!0 else nil)"
        for i in range(1, n + 1)
    )
    bob_tail = (
        f"secret?g2.witness?v.(b!((1 - g) * (1 - g2) + g * g2) || {cheats})"
    )
    bob2 = f"{bob_recv}randbit(g).(guess!g || {bob_tail})"
    hide = "".join(f" \\ base{i} \\ bit{i}" for i in range(1, n + 1))
    srv_par = " || ".join(f"Server{i}" for i in range(1, n + 1))

    lines = decls + servers + [
        f"process Alice01 = {alice01};",
        f"process AlicePM = {alicepm};",
        "process Alice = randbit(sv).(if sv = 0 then Alice01 else AlicePM);",
        f"process Bob = atob?({', '.join(zvars)}).(({srv_par} || {bob2}){hide});",
        "process QCF = (Alice || Bob) \\ atob \\ guess \\ secret \\ witness;",
        "process FairCoin = "
        + "tau." * (4 * n + 5)
        + "randbit(x).(a!x || tau.tau.b!x || disc(" + qtuple + "));",
    ]
    return "\n".join(lines)


def build_qcf(n: int = 1) -> CorpusEntry:
    src = qcf_source(n)
    bounds = SearchBounds(depth=6, fresh_channels=4, ancillas=0)

    def check():
        sig, defs = parse_program(src)
        zeros = qcore.pure_state(
            qcore.kron_all([qcore.KET0] * n) if n > 1 else qcore.KET0,
            tuple(f"q{i+1}" for i in range(n)),
        )
        # fairness: run the protocol and the specification in lockstep
        run = advance_scheduled(_point(zeros, defs["QCF"]), sig, max_steps=16 * n + 16)
        spec = advance_scheduled(_point(zeros, defs["FairCoin"]), sig, max_steps=16 * n + 16)
        if len(run) != len(spec):
            return False, f"step counts differ: protocol {len(run)-1}, spec {len(spec)-1}"
        for k, (dp, ds) in enumerate(zip(run, spec)):
            bp = {c: p for c, p in dist_barbs(dp).items()}
            bs = {c: p for c, p in dist_barbs(ds).items()}
            if set(bp) != set(bs) or any(abs(bp[c] - bs[c]) > TOL_PROB for c in bp):
                return False, f"barbs diverge from the specification at step {k}"
        final = run[-1]
        masses = {0: 0.0, 1: 0.0}
        for cfg, p in final.items():
            barbs = sorted(dist_barbs(Distribution.point(cfg)))
            if barbs != ["a", "b"]:
                return False, f"final element with barbs {barbs}"
            sends = _outcome_payloads(cfg.proc)
            if sends.get("a") != sends.get("b"):
                return False, "a and b carry different bits"
            masses[sends["a"]] = masses.get(sends["a"], 0.0) + p
        if abs(masses[0] - 0.5) > TOL_PROB or abs(masses[1] - 0.5) > TOL_PROB:
            return False, f"outcome masses {masses} are not a fair coin"
        if any("cheat" in dist_barbs(d) for d in run):
            return False, "honest run expressed the cheat barb"
        # dishonest Bob: the sent prefixes are certified equal, yet
        # distinguishable under unconstrained contexts
        ok, why = _qcf_dishonest_bob(sig, n)
        if not ok:
            return False, why
        ok, why = _qcf_dishonest_alice(n)
        if not ok:
            return False, why
        return True, "fair outcome; Bob cannot cheat (certified); Alison always wins"

    return CorpusEntry(
        name=f"qcf-n{n}",
        source=src,
        states="|0...0>",
        mode="constrained",
        expected="fair coin; message prefixes certified; Alison wins undetected",
        bounds=bounds,
        check=check,
    )


def _outcome_payloads(proc) -> dict:
    from .syntax import Send, par_components

    out = {}
    for comp in par_components(proc):
        if isinstance(comp, Send) and len(comp.payload) == 1:
            val = comp.payload[0]
            if hasattr(val, "value"):
                out[comp.chan] = int(val.value)
    return out


def _qcf_dishonest_bob(sig: Signature, n: int):
    send = parse_process("atob!(" + ", ".join(f"q{i+1}" for i in range(n)) + ")", sig)
    names = tuple(f"q{i+1}" for i in range(n))
    dim = 1 << n
    pairs_01 = []
    pairs_pm = []
    h = qcore.kron_all([qcore.H] * n) if n > 1 else qcore.H
    for j in range(dim):
        v = np.zeros((dim, 1), dtype=complex)
        v[j, 0] = 1.0
        pairs_01.append((make_config(qcore.pure_state(v, names), send), 1.0 / dim))
        pairs_pm.append((make_config(qcore.pure_state(h @ v, names), send), 1.0 / dim))
    a01 = Distribution(pairs_01)
    apm = Distribution(pairs_pm)
    cert = density_quotient_equiv(a01, apm, SearchBounds(), sig)
    if not isinstance(cert, CertifiedBisimilar):
        return False, "message prefixes not certified equal"
    ys = ", ".join(f"y{i}" for i in range(n))
    hint = parse_process(
        f"atob?({ys})."
        f"(M01(y0 |> r).((if r = 0 then flag0!0 else flag1!0) || disc({ys}))"
        f" + Mpm(y0 |> r).((if r = 0 then flag2!0 else flag3!0) || disc({ys})))",
        sig,
    )
    v = distinguish(
        a01, apm, SATURATED,
        SearchBounds(depth=4, fresh_channels=4, ancillas=0, hint_contexts=(hint,)),
        sig,
    )
    if not isinstance(v, Distinguished):
        return False, f"prefixes not distinguished in saturated mode: {v.verdict}"
    return True, None


def alison_source(n: int) -> str:
    base = qcf_source(n)
    qs = [f"q{i+1}" for i in range(n)]
    qps = [f"qp{i+1}" for i in range(n)]
    prep = "".join(f"SetPhiP({q},{qp})." for q, qp in zip(qs, qps))
    qptuple = ", ".join(qps)
    tail = f"(witness!u || disc({qptuple}))"
    alison2 = (
        "guess?g.(a!0 || secret!(1 - g) || "
        f"(if (1 - g) = 0 then M01({qptuple} |> u).{tail} "
        f"else Mpm({qptuple} |> u).{tail}))"
    )
    lines = [
        f"qubit {qptuple};",
        base,
        f"process Alison = {prep}(atob!({', '.join(qs)}) || {alison2});",
        "process QCFAlison = (Alison || Bob) \\ atob \\ guess \\ secret \\ witness;",
        "process UnfairCoin = "
        + "tau." * (5 * n + 3)
        + "(a!0 || tau.tau.tau.b!0 || disc(" + ", ".join(qs) + ") || disc("
        + qptuple + "));",
    ]
    return "\n".join(lines)


def _qcf_dishonest_alice(n: int):
    sig, defs = parse_program(alison_source(n))
    names = tuple([f"q{i+1}" for i in range(n)] + [f"qp{i+1}" for i in range(n)])
    zeros = qcore.pure_state(
        qcore.kron_all([qcore.KET0] * (2 * n)) if 2 * n > 1 else qcore.KET0, names
    )
    run = advance_scheduled(_point(zeros, defs["QCFAlison"]), sig, max_steps=16 * n + 16)
    spec = advance_scheduled(_point(zeros, defs["UnfairCoin"]), sig, max_steps=16 * n + 16)
    if len(run) != len(spec):
        return False, f"Alison step counts differ: {len(run)-1} vs {len(spec)-1}"
    for k, (dp, ds) in enumerate(zip(run, spec)):
        bp = dist_barbs(dp)
        bs = dist_barbs(ds)
        if set(bp) != set(bs) or any(abs(bp[c] - bs[c]) > TOL_PROB for c in bp):
            return False, f"Alison diverges from UnfairCoin at step {k}: {bp} vs {bs}"
    final = run[-1]
    for cfg, p in final.items():
        sends = _outcome_payloads(cfg.proc)
        if sends.get("a") != 0 or sends.get("b") != 0:
            return False, "Alison did not force outcome 0 on both channels"
    if any("cheat" in dist_barbs(d) for d in run):
        return False, "Alison was caught cheating"
    return True, None


# ---------------------------------------------------------------------------


def all_entries():
    return build_table1() + [build_teleportation(), build_superdense(), build_qcf(1)]


def suite(name: str):
    if name == "table1":
        return build_table1()
    if name == "protocols":
        return [build_teleportation(), build_superdense(), build_qcf(1)]
    if name == "all":
        return all_entries()
    for entry in all_entries():
        if entry.name == name:
            return [entry]
    raise KeyError(f"unknown suite or entry {name!r}")
