"""TSO games under the sixteen update policies, and the deciders.

Each player may update buffers never, before her own move, after it, or
always (both).  A move is an instruction of any process, optionally
preceded and/or followed by any number of updates according to the mover's
rights.  Groups I, II and IV reduce to finite games; group III is
undecidable and only gets an explicitly non-authoritative bounded analysis.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import NamedTuple

from .game import Node, build_game, naive_solve, solve as solve_game
from .scgame import finals_predicate, node_describer
from .tso import instr_successors, up_star, view_of, view_successors

NEVER, BEFORE, AFTER, ALWAYS = "never", "before", "after", "always"
RIGHTS = (ALWAYS, BEFORE, AFTER, NEVER)  # table order
CAVEAT = "bounded analysis: not sound in either direction (the unbounded game is undecidable)"


class UpdatePolicy(NamedTuple):
    a: str
    b: str

    def right(self, player):
        return self.a if player == "A" else self.b

    def pre(self, player):
        return self.right(player) in (BEFORE, ALWAYS)

    def post(self, player):
        return self.right(player) in (AFTER, ALWAYS)

    def __str__(self):
        return f"A={self.a},B={self.b}"

    def as_json(self):
        return {"A": self.a, "B": self.b}


def parse_policy(text):
    """Parse ``A=always,B=never``."""
    got = {}
    for part in text.split(","):
        key, sep, val = part.strip().partition("=")
        key, val = key.strip().upper(), val.strip().lower()
        if not sep or key not in ("A", "B") or key in got or val not in RIGHTS:
            raise ValueError(f"malformed policy {text!r}")
        got[key] = val
    if set(got) != {"A", "B"}:
        raise ValueError(f"malformed policy {text!r}")
    return UpdatePolicy(got["A"], got["B"])


ALL_POLICIES = tuple(UpdatePolicy(a, b) for b in RIGHTS for a in RIGHTS)


def classify(policy):
    a, b = policy
    if (a, b) == (BEFORE, BEFORE):
        return "II"
    if (a, b) == (NEVER, NEVER):
        return "IV"
    if (a, b) == (AFTER, AFTER) or (a == NEVER) != (b == NEVER):
        return "III"
    return "I"


def group1_roles(policy):
    """``(X, Y)``: X may update after its move, Y before; X = A when both fit."""
    for x, y in (("A", "B"), ("B", "A")):
        if policy.post(x) and policy.pre(y):
            return x, y
    raise ValueError(f"policy {policy} is not in group I")


class Composed(NamedTuple):
    """Witness of one game move: updates before, the instruction, updates after."""

    pre: tuple
    step: object
    post: tuple

    def show(self, program):
        name = lambda i: program.processes[i].name  # noqa: E731
        parts = [f"up_{name(i)}" for i in self.pre] + [self.step.show(program)] + [f"up_{name(i)}" for i in self.post]
        return ";".join(parts)


def tso_expander(program, policy, capacity=None):
    """Move function of the TSO game (``capacity`` bounds each buffer)."""
    closure = {}

    def ups(c):
        r = closure.get(c)
        if r is None:
            r = closure[c] = up_star(program, c)
        return r

    def expand(node):
        c, turn = node.config, node.turn
        nxt = "B" if turn == "A" else "A"
        starts = ups(c) if policy.pre(turn) else {c: ()}
        out = []
        for c1, w1 in starts.items():
            for lab, c2 in instr_successors(program, c1, capacity):
                ends = ups(c2) if policy.post(turn) else {c2: ()}
                for c3, w2 in ends.items():
                    out.append((Composed(w1, lab, w2), Node(nxt, c3)))
        return out

    return expand


def build_tso_game_bounded(program, finals, policy, c0, capacity, turn="A", deadlock="lose",
                           truncate_finals=False, keep_labels=False, limit=None):
    """Explicit TSO game in which writes are disabled at ``capacity``."""
    if capacity is None or capacity < 0:
        raise ValueError("capacity must be a non-negative integer")
    if any(len(b) > capacity for b in c0.buffers):
        raise ValueError("initial configuration exceeds capacity")
    return build_game(
        [Node(turn, c0)],
        tso_expander(program, policy, capacity),
        finals_predicate(program, finals),
        deadlock=deadlock,
        truncate_finals=truncate_finals,
        describe=node_describer(program),
        keep_labels=keep_labels,
        limit=limit,
    )


@dataclass
class GameVerdict:
    policy: UpdatePolicy
    group: str
    decidable: bool
    winner: str | None = None
    game: object = None
    solution: object = None
    initial: object = None
    bounded: dict | None = None
    stats: dict = field(default_factory=dict)

    def strategy(self, player):
        """Positional strategy of ``player`` on the finite game that was solved."""
        return self.solution.strategy_for(player)

    def as_json(self):
        d = {"policy": self.policy.as_json(), "group": self.group, "decidable": self.decidable}
        if self.winner is not None:
            d["winner"] = self.winner
        if self.bounded is not None:
            d["boundedAnalysis"] = self.bounded
        d["stats"] = self.stats
        return d


def _verdict(policy, game, start, solver=solve_game):
    t = time.perf_counter()
    sol = solver(game)
    ms = (time.perf_counter() - t) * 1000
    stats = {"configs": game.n, "edges": game.m, "solveMs": round(ms, 3)}
    return GameVerdict(policy, classify(policy), True, sol.winner(start), game, sol, start, stats=stats)


def solve_group1(program, finals, c0, policy, turn="A", deadlock="lose", truncate_finals=False, limit=None,
                 keep_labels=False):
    """Finite game where Y only ever faces at most one buffered message.

    X (update-after rights) can always flush once it has moved, so X moves
    into Y-configurations with more than one message can be dropped;
    Y moves are kept in full, so X-configurations hold up to two messages.
    """
    if classify(policy) != "I":
        raise ValueError(f"policy {policy} is not in group I")
    x, _ = group1_roles(policy)
    expand = tso_expander(program, policy)
    start = Node(turn, c0)

    def restricted(node):
        out = expand(node)
        if node.turn == x:
            out = [(lab, v) for lab, v in out if v.config.n_buffered() <= 1 or v == start]
        return out

    game = build_game([start], restricted, finals_predicate(program, finals), deadlock=deadlock,
                      truncate_finals=truncate_finals, describe=node_describer(program), limit=limit,
                      keep_labels=keep_labels)
    return _verdict(policy, game, start)


def group2_bound(c0):
    return max(1, c0.n_buffered())


def solve_group2(program, finals, c0, turn="A", deadlock="lose", truncate_finals=False, limit=None,
                 keep_labels=False):
    """Finite game over configurations with at most ``max(1, |B(c0)|)`` messages."""
    policy = UpdatePolicy(BEFORE, BEFORE)
    bound = group2_bound(c0)
    expand = tso_expander(program, policy)

    def restricted(node):
        return [(lab, v) for lab, v in expand(node) if v.config.n_buffered() <= bound]

    start = Node(turn, c0)
    game = build_game([start], restricted, finals_predicate(program, finals), deadlock=deadlock,
                      truncate_finals=truncate_finals, describe=node_describer(program), limit=limit,
                      keep_labels=keep_labels)
    v = _verdict(policy, game, start)
    v.stats["bound"] = bound
    return v


def describe_view(program, v):

    d = {
        "S": {p.name: q for p, q in zip(program.processes, v.states)},
        "V": {p.name: dict(zip(program.vars, vals)) for p, vals in zip(program.processes, v.values)},
        "F": {p.name: f for p, f in zip(program.processes, v.fencable)},
        "Buf": {p.name: [x for x, b in zip(program.vars, bs) if b] for p, bs in zip(program.processes, v.buffered)},
    }
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def view_expander(program):
    def expand(node):
        nxt = "B" if node.turn == "A" else "A"
        return [(lab, Node(nxt, w)) for lab, w in view_successors(program, node.config)]

    return expand


def build_view_game(program, finals, c0, turn="A", deadlock="lose", truncate_finals=False, limit=None,
                    keep_labels=False):
    start = Node(turn, view_of(program, c0))
    game = build_game([start], view_expander(program), finals_predicate(program, finals), deadlock=deadlock,
                      truncate_finals=truncate_finals, describe=node_describer(program, describe_view),
                      limit=limit, keep_labels=keep_labels)
    return game, start


def solve_group4(program, finals, c0, turn="A", deadlock="lose", truncate_finals=False, limit=None,
                 keep_labels=False):
    """Nobody updates: solve the finite game over views.

    A strategy on views is played on a concrete configuration ``c`` by
    looking up ``view_of(c)``.
    """
    game, start = build_view_game(program, finals, c0, turn, deadlock, truncate_finals, limit, keep_labels)
    return _verdict(UpdatePolicy(NEVER, NEVER), game, start)


def solve_bounded(program, finals, c0, policy, capacity, turn="A", deadlock="lose",
                  truncate_finals=False, solver=solve_game, limit=None, keep_labels=False):
    """Winner of the capacity-bounded game (any policy)."""
    game = build_tso_game_bounded(program, finals, policy, c0, capacity, turn, deadlock,
                                  truncate_finals=truncate_finals, limit=limit, keep_labels=keep_labels)
    return _verdict(policy, game, Node(turn, c0), solver)


def naive_bounded_winner(program, finals, c0, policy, capacity, turn="A", truncate_finals=False):
    """Exhaustive bounded minimax via Kleene iteration (test oracle)."""
    game = build_tso_game_bounded(program, finals, policy, c0, capacity, turn, truncate_finals=truncate_finals)
    win_b = naive_solve(game)
    return "B" if win_b[game.index[Node(turn, c0)]] else "A"


def solve(program, finals, c0, policy, turn="A", deadlock="lose", bounded_capacity=None,
          truncate_finals=False, limit=None, keep_labels=False):
    """Dispatch on the group of ``policy``."""
    group = classify(policy)
    kw = dict(turn=turn, deadlock=deadlock, truncate_finals=truncate_finals, limit=limit, keep_labels=keep_labels)
    if group == "I":
        return solve_group1(program, finals, c0, policy, **kw)
    if group == "II":
        return solve_group2(program, finals, c0, **kw)
    if group == "IV":
        return solve_group4(program, finals, c0, **kw)
    verdict = GameVerdict(policy, group, False)
    if bounded_capacity is not None:
        b = solve_bounded(program, finals, c0, policy, bounded_capacity, **kw)
        verdict.bounded = {"bound": bounded_capacity, "winnerAtBound": b.winner, "caveat": CAVEAT}
        verdict.stats = b.stats
        verdict.game, verdict.solution, verdict.initial = b.game, b.solution, b.initial
    return verdict
