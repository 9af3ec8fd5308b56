"""Perfect channel systems and their encodings as TSO programs.

Channels are stored oldest first, like store buffers: a send appends, a
receive consumes index 0.  The encodings let process P1 simulate the
channel system with its own store buffer while a helper process P2 copies
committed messages from ``x_w`` to ``x_r`` one at a time.

In the A-variant helper the per-message state ``q_<m>`` follows ``q1``'s
read of ``x_w = m``, and ``q3`` (after the copy to ``x_r``) is shared by all
messages.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

from .program import Process, Program, ProgramError, Transition, fence, read, skip, write
from .tso import TSOConfig

SEND, RECV, NOP = "send", "recv", "nop"
XW, XR, Y = "x_w", "x_r", "y"
BOT, TOP = "bot", "top"
DEAD = "hD"  # A-variant P1 state after a refused receive


@dataclass(frozen=True)
class PCS:
    states: tuple
    messages: tuple
    transitions: tuple  # (src, op, msg or "", dst)
    finals: frozenset
    initial: str

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "transitions", tuple(tuple(t) for t in self.transitions))
        object.__setattr__(self, "finals", frozenset(self.finals))
        st, ms = set(self.states), set(self.messages)
        if len(st) != len(self.states) or len(ms) != len(self.messages):
            raise ValueError("duplicate state or message")
        if self.initial not in st or not self.finals <= st:
            raise ValueError("unknown initial or final state")
        for src, op, m, dst in self.transitions:
            if src not in st or dst not in st:
                raise ValueError(f"unknown state in transition {(src, op, m, dst)}")
            if op not in (SEND, RECV, NOP):
                raise ValueError(f"unknown operation {op}")
            if op != NOP and m not in ms:
                raise ValueError(f"undeclared message {m}")


class PCSConfig(NamedTuple):
    state: str
    channel: tuple  # oldest first


def pcs_from_json(data):
    trans = [(t["from"], t["op"], t.get("msg", ""), t["to"]) for t in data["transitions"]]
    return PCS(tuple(data["states"]), tuple(data["messages"]), tuple(trans),
               frozenset(data.get("finals", ())), data["initial"])


def pcs_to_json(pcs):
    trans = []
    for src, op, m, dst in pcs.transitions:
        t = {"from": src, "op": op, "to": dst}
        if op != NOP:
            t["msg"] = m
        trans.append(t)
    return {"states": list(pcs.states), "messages": list(pcs.messages), "transitions": trans,
            "finals": sorted(pcs.finals), "initial": pcs.initial}


def pcs_successors(pcs, c, bound=None):
    """``(transition, PCSConfig)`` pairs; sends are disabled at ``bound``."""
    out = []
    for t in pcs.transitions:
        src, op, m, dst = t
        if src != c.state:
            continue
        if op == NOP:
            out.append((t, PCSConfig(dst, c.channel)))
        elif op == SEND:
            if bound is None or len(c.channel) < bound:
                out.append((t, PCSConfig(dst, c.channel + (m,))))
        elif c.channel and c.channel[0] == m:
            out.append((t, PCSConfig(dst, c.channel[1:])))
    return out


def pcs_reachable_bounded(pcs, c0, targets, bound):
    """BFS over channel contents up to ``bound``.  Returns ``(found, witness)``."""
    if len(c0.channel) > bound:
        raise ValueError("initial channel exceeds bound")
    targets = {targets} if isinstance(targets, str) else set(targets)
    parent = {c0: None}
    queue = deque([c0])
    while queue:
        c = queue.popleft()
        if c.state in targets:
            path = []
            while parent[c] is not None:
                c, t = parent[c]
                path.append(t)
            return True, path[::-1]
        for t, d in pcs_successors(pcs, c, bound):
            if d not in parent:
                parent[d] = (c, t)
                queue.append(d)
    return False, []


class Reduction(NamedTuple):
    program: Program
    finals: frozenset
    initial: TSOConfig
    turn: str  # who moves first


def _domain(pcs, extra):
    for m in pcs.messages:
        if m in ("0", "1", BOT, TOP):
            raise ProgramError(f"message name {m!r} clashes with a reserved value")
    return tuple(pcs.messages) + extra


def _op_name(op, m):
    return NOP if op == NOP else f"{op}_{m}"


def _aux_names(pcs, taken, src, op, m, k):
    """Fresh names ``<src>__<op>__h1..hk`` for one channel transition."""
    base = f"{src}__{_op_name(op, m)}"
    stem, n = base, 2
    while any(f"{stem}__h{j}" in taken for j in range(1, k + 1)):
        stem, n = f"{base}_{n}", n + 1
    names = [f"{stem}__h{j}" for j in range(1, k + 1)]
    taken.update(names)
    return names


def _p1_atso(pcs, escape=True):
    states, trans = list(pcs.states), []
    if escape and DEAD in pcs.states:
        raise ProgramError(f"channel state name {DEAD!r} is reserved")
    taken = set(states) | {DEAD}
    dead = []
    for src, op, m, dst in pcs.transitions:
        if op == NOP:
            (h1,) = _aux_names(pcs, taken, src, op, m, 1)
            trans += [Transition(src, skip(), h1), Transition(h1, skip(), dst)]
            states.append(h1)
        elif op == SEND:
            (h1,) = _aux_names(pcs, taken, src, op, m, 1)
            trans += [Transition(src, write(XW, m), h1), Transition(h1, write(Y, "1"), dst)]
            states.append(h1)
        else:
            hs = _aux_names(pcs, taken, src, op, m, 6)
            h1, h2, h3, h4, h5, h6 = hs
            trans += [
                Transition(src, skip(), h1),
                Transition(h1, read(XR, m), h2),
                Transition(h2, read(XR, BOT), h3),
                Transition(h3, skip(), dst),
                Transition(h1, fence(), h4),
                Transition(h4, skip(), h5),
                Transition(h5, read(XW, BOT), h6),
            ]
            states += hs
            if escape:
                # a rotated head other than m means the receive is disabled:
                # A parks P1 in a dead state instead of being forced to lose
                dead += [Transition(h1, read(XR, m2), DEAD) for m2 in pcs.messages if m2 != m]
    if dead:
        states.append(DEAD)
        trans += dead
    return Process("P1", states, pcs.initial, trans)


def _p2_atso(pcs):
    ms = pcs.messages
    qm = {m: f"q_{m}" for m in ms}
    states = ["q1", *qm.values(), "q3", "q4", "q5", "q6", "q7", "q8", "q9", "q10", "qF"]
    t = []
    for m in ms:
        t.append(Transition("q1", read(XW, m), qm[m]))
        t.append(Transition(qm[m], write(XR, m), "q3"))
    t += [
        Transition("q3", write(XW, BOT), "q4"),
        Transition("q4", fence(), "q5"),
        Transition("q5", skip(), "q6"),
        Transition("q6", read(Y, "1"), "q7"),
        Transition("q7", write(Y, "0"), "q8"),
        Transition("q8", fence(), "q9"),
        Transition("q9", write(XR, BOT), "q10"),
        Transition("q10", fence(), "q1"),
    ]
    t += [Transition("q1", read(XW, m), "qF") for m in ms]
    t += [
        Transition("q3", read(Y, "1"), "qF"),
        Transition("q4", skip(), "qF"),
        Transition("q5", read(Y, "1"), "qF"),
    ]
    t += [Transition("q9", read(XW, m), "qF") for m in ms]
    return Process("P2", states, "q1", t)


def _p3_atso():
    t = [
        Transition("rho1", skip(), "rho2"),
        Transition("rho2", skip(), "rho3"),
        Transition("rho2", skip(), "rhoF"),
        Transition("rho3", skip(), "rho3"),
        Transition("rhoF", skip(), "rhoF"),
    ]
    return Process("P3", ["rho1", "rho2", "rho3", "rhoF"], "rho1", t)


def _memory(program):
    return program.memory({XW: BOT, XR: BOT, Y: "0"})


def generate_atso_program(pcs, escape=True):
    """Encoding for the game where only A updates (before and after her moves).

    ``escape=False`` gives the literal encoding, in which B also wins by
    starting a receive whose message is not at the channel head.
    """
    p1 = _p1_atso(pcs, escape)
    program = Program(_domain(pcs, ("0", "1", BOT)), (XW, XR, Y), (p1, _p2_atso(pcs), _p3_atso()))
    finals = frozenset({("P1", s) for s in pcs.finals} | {("P2", "qF"), ("P3", "rhoF")})
    c0 = TSOConfig(program.init_states, ((), (), ()), _memory(program))
    return Reduction(program, finals, c0, "B")


def _p1_btso(pcs):
    states, trans = list(pcs.states), []
    for s in ("hL", "hF"):
        if s in pcs.states:
            raise ProgramError(f"channel state name {s!r} is reserved")
    taken = set(states) | {"hL", "hF"}
    lose = []
    for src, op, m, dst in pcs.transitions:
        if op == RECV:
            h1, = _aux_names(pcs, taken, src, op, m, 1)
            trans += [Transition(src, read(XR, m), h1), Transition(h1, read(XR, BOT), dst)]
            states.append(h1)
            continue
        (h1,) = _aux_names(pcs, taken, src, op, m, 1)
        states.append(h1)
        if op == NOP:
            trans += [Transition(src, skip(), h1), Transition(h1, skip(), dst)]
        else:
            trans += [Transition(src, write(XW, m), h1), Transition(h1, write(Y, "1"), dst)]
        lose += [Transition(h1, read(XR, m2), "hL") for m2 in pcs.messages]
    trans += lose
    trans += [Transition(s, write(XW, TOP), "hF") for s in pcs.states if s in pcs.finals]
    states += ["hL", "hF"]
    trans += [Transition("hL", skip(), "hL"), Transition("hF", skip(), "hF")]
    return Process("P1", states, pcs.initial, trans)


def _escape(t, q, h):
    t += [Transition(q, skip(), h), Transition(h, skip(), "qF"), Transition(h, skip(), q)]


def _p2_btso(pcs):
    ms = pcs.messages
    qm = {m: f"q_{m}" for m in ms}
    cycle = ["q1", *qm.values()] + [f"q{k}" for k in range(3, 15)]
    states = cycle + ["h1", "h2", "h3", "h4", "h5", "qF", "qL"]
    t = []
    for m in ms:
        t.append(Transition("q1", read(XW, m), qm[m]))
        t.append(Transition(qm[m], write(XR, m), "q3"))
    t += [
        Transition("q3", fence(), "q4"),
        Transition("q4", write(XW, BOT), "q5"),
        Transition("q5", skip(), "q6"),
        Transition("q6", fence(), "q7"),
        Transition("q7", read(Y, "0"), "q8"),
        Transition("q8", read(Y, "1"), "q9"),
        Transition("q9", write(Y, "0"), "q10"),
        Transition("q10", fence(), "q11"),
        Transition("q11", read(XW, BOT), "q12"),
        Transition("q12", write(XR, BOT), "q13"),
        Transition("q13", skip(), "q14"),
        Transition("q14", fence(), "q1"),
    ]
    for q, h in (("q1", "h1"), ("q3", "h2"), ("q8", "h3"), ("q10", "h4"), ("q14", "h5")):
        _escape(t, q, h)
    t += [Transition("q1", read(XW, m), "qL") for m in ms]
    t += [Transition(qm[m], skip(), "qF") for m in ms]
    t += [
        Transition("q3", skip(), "qL"),
        Transition("q4", skip(), "qF"),
        Transition("q6", skip(), "qL"),
        Transition("q7", read(Y, "1"), "qL"),
    ]
    t += [Transition("q11", read(XW, m), "qL") for m in ms]
    t += [Transition("q14", read(XW, m), "qL") for m in ms]
    t.append(Transition("q1", read(XW, TOP), "qF"))
    t += [Transition("qF", skip(), "qF"), Transition("qL", skip(), "qL")]
    return Process("P2", states, "q1", t)


def generate_btso_program(pcs):
    """Encoding for the game where only B updates."""
    program = Program(_domain(pcs, ("0", "1", BOT, TOP)), (XW, XR, Y), (_p1_btso(pcs), _p2_btso(pcs)))
    c0 = TSOConfig(program.init_states, ((), ()), _memory(program))
    return Reduction(program, frozenset({("P2", "qF")}), c0, "B")


def _p2_abtso(pcs, escape=True):
    ms = pcs.messages
    qm = {m: f"q_{m}" for m in ms}
    cycle = ["q1", "q2", *qm.values()] + [f"q{k}" for k in range(4, 13)]
    states = cycle + ["qF", "qL"]
    t = [Transition("q1", skip(), "q2")]
    for m in ms:
        t.append(Transition("q2", read(XW, m), qm[m]))
        t.append(Transition(qm[m], write(XR, m), "q4"))
    t += [
        Transition("q4", write(XW, BOT), "q5"),
        Transition("q5", skip(), "q6"),
        Transition("q6", fence(), "q7"),
        Transition("q7", skip(), "q8"),
        Transition("q8", write(Y, "0"), "q9"),
        Transition("q9", skip(), "q10"),
        Transition("q10", fence(), "q11"),
        Transition("q11", write(XR, BOT), "q12"),
        Transition("q12", skip(), "q1"),
    ]
    # branches to the final sink
    t += [Transition("q2", skip(), "qF"), Transition("q4", skip(), "qF")]
    t += [Transition("q1", read(XW, m), "qF") for m in ms]
    t += [Transition(qm[m], read(Y, "1"), "qF") for m in ms]
    t += [Transition("q5", read(Y, "1"), "qF"), Transition("q6", read(Y, "1"), "qF")]
    t.append(Transition("q8", read(Y, "0"), "qF"))
    t += [Transition("q8", read(XW, m), "qF") for m in ms]
    t += [Transition("q10", read(XW, m), "qF") for m in ms]
    t += [Transition("q12", read(XW, m), "qF") for m in ms]
    t.append(Transition("q1", read(XW, TOP), "qF"))
    # branches to the losing sink
    t += [Transition(qm[m], skip(), "qL") for m in ms]
    t += [Transition("q6", skip(), "qL"), Transition("q10", skip(), "qL")]
    t += [Transition("q1", read(XW, m), "qL") for m in ms]
    t += [Transition("q2", read(XW, BOT), "qL"), Transition("q2", read(Y, "1"), "qL")]
    t += [Transition("q4", read(Y, "1"), "qL"), Transition("q5", read(Y, "1"), "qL"),
          Transition("q7", read(Y, "1"), "qL")]
    t += [Transition("q9", read(XW, m), "qL") for m in ms]
    t += [Transition("q11", read(XW, m), "qL") for m in ms]
    if escape:
        # q12 can be reached with A to move after B flushed extra messages
        # following the receive; let the mover pick a sink, as at q1 and q5
        t += [Transition("q12", read(XW, m), "qL") for m in ms]
    t += [Transition("qF", skip(), "qF"), Transition("qL", skip(), "qL")]
    return Process("P2", states, "q1", t)


def generate_abtso_program(pcs, escape=True):
    """Encoding for the game where both players update after their moves.

    ``escape=False`` drops the extra q12 branch to the losing sink, which
    lets B flush surplus messages right after completing a receive.
    """
    p2 = _p2_abtso(pcs, escape)
    program = Program(_domain(pcs, ("0", "1", BOT, TOP)), (XW, XR, Y), (_p1_btso(pcs), p2))
    c0 = TSOConfig(program.init_states, ((), ()), _memory(program))
    return Reduction(program, frozenset({("P2", "qF")}), c0, "B")


GENERATORS = {"A": generate_atso_program, "B": generate_btso_program, "AB": generate_abtso_program}
POLICIES = {"A": ("always", "never"), "B": ("never", "always"), "AB": ("after", "after")}
HARNESS_LIMIT = 3_000_000


def reduction_harness(pcs, variant, capacity=6, limit=HARNESS_LIMIT, escape=True):
    """Compare bounded channel reachability with the bounded game winner.

    The channel bound is ``(capacity - 2) // 2``: every simulated message
    costs P1 two buffer entries plus slack for the flag write.  Neither
    answer is a proof about the unbounded systems.  ``escape=False`` runs
    the literal A and AB encodings without the extra sink branches.
    """
    from .tsogame import CAVEAT, UpdatePolicy, solve_bounded

    red = GENERATORS[variant](pcs) if escape or variant == "B" else GENERATORS[variant](pcs, escape=False)
    bound = max(0, (capacity - 2) // 2)
    reach, witness = pcs_reachable_bounded(pcs, PCSConfig(pcs.initial, ()), pcs.finals, bound)
    policy = UpdatePolicy(*POLICIES[variant])
    v = solve_bounded(red.program, red.finals, red.initial, policy, capacity, turn=red.turn,
                      truncate_finals=True, limit=limit)
    return {
        "variant": variant,
        "capacity": capacity,
        "channelBound": bound,
        "pcsReachable": reach,
        "gameWinnerAtBound": v.winner,
        "agree": reach == (v.winner == "B"),
        "configs": v.stats["configs"],
        "caveat": CAVEAT,
    }
