"""SC games and the alternating Turing machine reduction."""
from __future__ import annotations

import json
from dataclasses import dataclass

from .game import Node, Sink, build_game
from .program import Process, Program, ProgramError, Transition, read, skip, write
from .sc import SCConfig, sc_successors


def finals_predicate(program, finals):
    mask = program.final_mask(finals)

    def is_final(node):
        if node.turn != "A" or isinstance(node.config, Sink):
            return False
        return any(q in m for q, m in zip(node.config.states, mask))

    return is_final


def describe_config(program, c):
    """Canonical JSON label (sorted keys) for an SC/TSO configuration."""
    if isinstance(c, Sink):
        return f"sink:{c.winner}-wins"
    d = {
        "S": {p.name: q for p, q in zip(program.processes, c.states)},
        "M": dict(zip(program.vars, c.memory)),
    }
    if hasattr(c, "buffers"):
        d["B"] = {p.name: [f"{x}={v}" for x, v in b] for p, b in zip(program.processes, c.buffers)}
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def node_describer(program, describe_conf=describe_config):
    def describe(node):
        if isinstance(node.config, Sink):
            return f"sink:{node.config.winner}-wins"
        return f"{node.turn}:{describe_conf(program, node.config)}"

    return describe


def build_sc_game(program, finals, c0, turn="A", deadlock="lose", keep_labels=False, truncate_finals=False):
    """SC game: players alternate, each move executes one instruction."""

    def expand(node):
        nxt = "B" if node.turn == "A" else "A"
        return [(lab, Node(nxt, d)) for lab, d in sc_successors(program, node.config)]

    return build_game(
        [Node(turn, c0)],
        expand,
        finals_predicate(program, finals),
        deadlock=deadlock,
        truncate_finals=truncate_finals,
        describe=node_describer(program),
        keep_labels=keep_labels,
    )


# ---------------------------------------------------------------------------
# alternating Turing machines

LEFT, RIGHT = "L", "R"


@dataclass(frozen=True)
class ATM:
    alphabet: tuple  # includes the blank
    states: tuple
    existential: frozenset
    initial: str
    accepting: str
    transitions: tuple  # (q, a, q', b, "L"|"R")
    space_bound: int
    blank: str = "_"

    def __post_init__(self):
        for f in ("alphabet", "states", "transitions"):
            object.__setattr__(self, f, tuple(tuple(t) if f == "transitions" else t for t in getattr(self, f)))
        object.__setattr__(self, "existential", frozenset(self.existential))
        st, al = set(self.states), set(self.alphabet)
        if self.blank not in al:
            raise ValueError("alphabet must contain the blank")
        if self.initial not in st or self.accepting not in st:
            raise ValueError("unknown initial or accepting state")
        if not self.existential <= st:
            raise ValueError("unknown existential state")
        if self.accepting in self.existential:
            raise ValueError("accepting state must be universal")
        for q, a, q2, b, d in self.transitions:
            if q not in st or q2 not in st or a not in al or b not in al or d not in (LEFT, RIGHT):
                raise ValueError(f"bad transition {(q, a, q2, b, d)}")
            if q == self.accepting:
                raise ValueError("accepting state has outgoing transitions")
        if self.space_bound < 1:
            raise ValueError("space bound must be at least 1")

    def moves(self, q, a):
        return [(q2, b, d) for (p, c, q2, b, d) in self.transitions if p == q and c == a]


def atm_from_json(data):
    trans = []
    for t in data["transitions"]:
        if isinstance(t, dict):
            trans.append((t["from"], t["read"], t["to"], t["write"], t["move"]))
        else:
            trans.append(tuple(t))
    return ATM(
        alphabet=tuple(data["alphabet"]),
        states=tuple(data["states"]),
        existential=frozenset(data.get("existential", ())),
        initial=data["initial"],
        accepting=data["accepting"],
        transitions=tuple(trans),
        space_bound=int(data["spaceBound"]),
        blank=data.get("blank", "_"),
    )


def atm_to_json(atm, word=None):
    d = {
        "alphabet": list(atm.alphabet),
        "blank": atm.blank,
        "states": list(atm.states),
        "existential": sorted(atm.existential),
        "initial": atm.initial,
        "accepting": atm.accepting,
        "transitions": [{"from": q, "read": a, "to": q2, "write": b, "move": m} for q, a, q2, b, m in atm.transitions],
        "spaceBound": atm.space_bound,
    }
    if word is not None:
        d["word"] = list(word)
    return d


MAX_ATM_CONFIGS = 2_000_000


def _initial_tape(atm, word):
    p = atm.space_bound
    if len(word) > p:
        raise ValueError(f"word length {len(word)} exceeds space bound {p}")
    for a in word:
        if a not in atm.alphabet:
            raise ValueError(f"letter {a!r} not in alphabet")
    tape = [atm.blank] * (2 * p + 1)
    for k, a in enumerate(word, 1):
        tape[k + p] = a
    return tuple(tape)


def atm_accepts(atm, word):
    """Least fixpoint of the accepting-configuration sets over the bounded tape.

    A configuration is ``(q, i, tape)`` with ``i`` in ``[-p, p]``.  Moves
    leaving the bounded tape lead nowhere accepting.
    """
    p = atm.space_bound
    size = len(atm.states) * (2 * p + 1) * len(atm.alphabet) ** (2 * p + 1)
    if size > MAX_ATM_CONFIGS:
        raise ValueError(f"configuration space too large ({size})")
    c0 = (atm.initial, 1, _initial_tape(atm, word))
    # forward exploration; None stands for "fell off the tape"
    post, stack, seen = {}, [c0], {c0}
    while stack:
        c = stack.pop()
        q, i, tape = c
        out = []
        for q2, b, d in atm.moves(q, tape[i + p]):
            j = i + (1 if d == RIGHT else -1)
            if not -p <= j <= p:
                out.append(None)
                continue
            c2 = (q2, j, tape[: i + p] + (b,) + tape[i + p + 1:])
            out.append(c2)
            if c2 not in seen:
                seen.add(c2)
                stack.append(c2)
        post[c] = out
    accepted = {c for c in seen if c[0] == atm.accepting}
    changed = True
    while changed:
        changed = False
        for c in seen:
            if c in accepted:
                continue
            succ = post[c]
            if c[0] in atm.existential:
                ok = any(s in accepted for s in succ)
            else:
                ok = all(s in accepted for s in succ)  # vacuous without moves
            if ok:
                accepted.add(c)
                changed = True
    return c0 in accepted


def _pos(i):
    return f"m{-i}" if i < 0 else str(i)


def cell_var(i):
    """Variable name for tape cell ``i`` (``cell_m2`` for -2)."""
    return f"cell_{_pos(i)}"


def atm_to_program(atm, word):
    """Single-process program whose SC game B wins iff the machine accepts.

    One ATM step takes four game moves: A reads the cell under the head,
    the owner of the branch (B for existential, A for universal states)
    picks a transition, and the write plus head move complete the step.
    Returns ``(program, finals, memory)``.
    """
    p = atm.space_bound
    tape = _initial_tape(atm, word)
    cells = range(-p, p + 1)
    states, trans = [], []
    seen = set()

    def st(name):
        if name not in seen:
            seen.add(name)
            states.append(name)
        return name

    def head(q, i):
        return st(f"h__{q}__{_pos(i)}")

    stuck = "out_of_tape"
    check_identifiers(atm)
    init = head(atm.initial, 1)
    for q in atm.states:
        for i in cells:
            head(q, i)
    tails = {}  # tail state -> (q', i, b', D, side)

    def tail(q2, i, b2, d, side):
        name = st(f"w__{q2}__{_pos(i)}__{b2}__{d}__{side}")
        tails[name] = (q2, i, b2, d, side)
        return name

    for q in atm.states:
        if q == atm.accepting:
            continue
        for i in cells:
            for b in atm.alphabet:
                rb = st(f"r__{q}__{_pos(i)}__{b}__B")
                trans.append(Transition(head(q, i), read(cell_var(i), b), rb))
                if q in atm.existential:
                    # B picks the transition, A passes
                    for q2, b2, d in atm.moves(q, b):
                        trans.append(Transition(rb, skip(), tail(q2, i, b2, d, "A")))
                else:
                    # B passes, A picks the transition
                    ra = st(f"r__{q}__{_pos(i)}__{b}__A")
                    trans.append(Transition(rb, skip(), ra))
                    for q2, b2, d in atm.moves(q, b):
                        trans.append(Transition(ra, skip(), tail(q2, i, b2, d, "B")))
    for name, (q2, i, b2, d, side) in list(tails.items()):
        if side == "A":
            trans.append(Transition(name, skip(), tail(q2, i, b2, d, "B")))
    for name, (q2, i, b2, d, side) in tails.items():
        if side == "B":
            j = i + (1 if d == RIGHT else -1)
            dst = head(q2, j) if -p <= j <= p else st(stuck)
            trans.append(Transition(name, write(cell_var(i), b2), dst))
    if stuck in seen:
        trans.append(Transition(stuck, skip(), stuck))
    # dedupe while keeping order (shared tails may be reached twice)
    trans = list(dict.fromkeys(trans))
    proc = Process("P", states, init, trans)
    program = Program(tuple(atm.alphabet), tuple(cell_var(i) for i in cells), (proc,))
    finals = frozenset(("P", head(atm.accepting, i)) for i in cells)
    memory = {cell_var(i): tape[i + p] for i in cells}
    return program, finals, memory


def atm_game(atm, word, **kw):
    program, finals, memory = atm_to_program(atm, word)
    c0 = SCConfig(program.init_states, program.memory(memory))
    return build_sc_game(program, finals, c0, **kw), Node("A", c0)


def check_identifiers(atm):
    for name in (*atm.states, *atm.alphabet):
        if "__" in name:
            raise ProgramError(f"identifier {name!r} must not contain '__'")
