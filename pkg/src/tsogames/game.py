"""Finite safety games: representation, solver, plays, bisimulation, export.

Player B tries to reach a final configuration, player A tries to stay out
forever.  Finals are A-owned.  Graphs are stored in CSR form with
successor lists sorted by node index; the node order is the canonical
order used for tie-breaking.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)


class GameError(ValueError):
    pass


class StrategyError(LookupError):
    pass


class Node(NamedTuple):
    """A position: whose turn it is (``"A"``/``"B"``) and the configuration."""

    turn: str
    config: object


class Sink(NamedTuple):
    winner: str


# deadlocked A loses: absorbing final; deadlocked B loses: absorbing non-final
SINK_B_WINS = Node("A", Sink("B"))
SINK_A_WINS = Node("A", Sink("A"))


class Game:
    """Explicit game over ``n`` nodes.

    ``owner_a[i]`` tells who moves at node ``i``; ``ptr``/``idx`` hold the
    successors of ``i`` in ``idx[ptr[i]:ptr[i+1]]``.
    """

    def __init__(self, nodes, owner_a, ptr, idx, final, describe=None, edge_labels=None):
        self.nodes = nodes
        self.owner_a = np.asarray(owner_a, dtype=bool)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.idx = np.asarray(idx, dtype=np.int64)
        self.final = np.asarray(final, dtype=bool)
        self.describe = describe or str
        self.edge_labels = edge_labels or {}
        self._index = None

    @classmethod
    def from_edges(cls, nodes, owner_a, src, dst, final, **kw):
        n = len(owner_a)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if len(src):
            if src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n:
                raise GameError("edge endpoint out of range")
            key = np.unique(src * n + dst)  # sorted, deduplicated
            src, dst = key // n, key % n
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=ptr[1:])
        return cls(nodes, owner_a, ptr, dst, final, **kw)

    @classmethod
    def from_lists(cls, nodes, owner_a, succ, final, **kw):
        src = np.repeat(np.arange(len(succ), dtype=np.int64), [len(s) for s in succ])
        dst = np.fromiter((v for s in succ for v in s), dtype=np.int64, count=len(src))
        return cls.from_edges(nodes, owner_a, src, dst, final, **kw)

    @property
    def n(self):
        return len(self.owner_a)

    @property
    def m(self):
        return len(self.idx)

    @property
    def index(self):
        if self._index is None:
            self._index = {v: i for i, v in enumerate(self.nodes)}
        return self._index

    def succ(self, i):
        return self.idx[self.ptr[i]:self.ptr[i + 1]].tolist()

    # node-level interface (shared with LazyGame)
    def successors(self, node):
        return [self.nodes[j] for j in self.succ(self.index[node])]

    def owner(self, node):
        return "A" if self.owner_a[self.index[node]] else "B"

    def is_final(self, node):
        return bool(self.final[self.index[node]])

    def edges(self):
        src = np.repeat(np.arange(self.n), np.diff(self.ptr))
        return list(zip(src.tolist(), self.idx.tolist()))

    def validate(self):
        n = self.n
        if not (len(self.final) == n and len(self.ptr) == n + 1 and (self.nodes is None or len(self.nodes) == n)):
            raise GameError("inconsistent sizes")
        if len(self.idx) and (self.idx.min() < 0 or self.idx.max() >= n):
            raise GameError("edge endpoint out of range")
        if np.any(self.final & ~self.owner_a):
            raise GameError("final configuration owned by B")
        dead = np.flatnonzero(np.diff(self.ptr) == 0)
        if len(dead):
            raise GameError(f"deadlocked configuration {self._name(int(dead[0]))}")

    def _name(self, i):
        return self.describe(self.nodes[i]) if self.nodes is not None else str(i)


class Solution:
    """Winning regions, attractor ranks and positional strategies.

    ``rank[i]`` is the attractor layer of ``i`` (0 for finals) or -1 when A
    wins.  ``strategy[i]`` is the successor chosen by the owner of ``i``:
    a winning move inside the owner's winning region, otherwise the move
    that delays the loss longest (A) or the lowest-index move (B).  It is
    -1 only at nodes without successors.
    """

    def __init__(self, game, rank, strategy):
        self.game = game
        self.rank = rank
        self.strategy = strategy
        self.win_b = rank >= 0

    def winner(self, node):
        return "B" if self.win_b[self.game.index[node]] else "A"

    def region(self, player):
        mask = self.win_b if player == "B" else ~self.win_b
        return {self.game.nodes[i] for i in np.flatnonzero(mask)}

    def strategy_for(self, player, region_only=False):
        """Node-level strategy dict for ``player`` (optionally only where it wins)."""
        g = self.game
        mine = g.owner_a if player == "A" else ~g.owner_a
        if region_only:
            mine = mine & (self.win_b if player == "B" else ~self.win_b)
        ids = np.flatnonzero(mine & (self.strategy >= 0))
        return {g.nodes[i]: g.nodes[self.strategy[i]] for i in ids.tolist()}


SMALL_LAYER = 8  # frontiers below this size are processed element by element


def solve(game):
    """Backward induction in O(n + m).

    Every node starts with a counter: 1 for B nodes, the out-degree for A
    nodes.  The attractor grows layer by layer from the finals; each node of
    the current layer decrements the counters of its predecessors, and a
    counter reaching zero puts its node into the next layer.  Every edge is
    visited once.  Large layers are handled with array operations.
    """
    game.validate()
    n, ptr, idx = game.n, game.ptr, game.idx
    deg = np.diff(ptr)
    src = np.repeat(np.arange(n, dtype=np.int64), deg)
    pred = src[_group_order(idx, n)]
    pptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(idx, minlength=n), out=pptr[1:])
    count = np.where(game.owner_a, deg, 1)
    rank = np.full(n, -1, dtype=np.int64)
    slot = np.zeros(n, dtype=np.int64)  # scratch for deduplication
    layer = np.flatnonzero(game.final)
    rank[layer] = 0
    r = 0
    while len(layer):
        r += 1
        if len(layer) < SMALL_LAYER:
            nxt = []
            for v in layer.tolist():
                for u in pred[pptr[v]:pptr[v + 1]].tolist():
                    if rank[u] < 0:
                        count[u] -= 1
                        if count[u] == 0:
                            rank[u] = r
                            nxt.append(u)
            layer = np.array(nxt, dtype=np.int64)
            continue
        starts = pptr[layer]
        lens = pptr[layer + 1] - starts
        total = int(lens.sum())
        offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens) + np.arange(total)
        cand = pred[offsets]
        cand = cand[rank[cand] < 0]
        np.subtract.at(count, cand, 1)
        hit = cand[count[cand] <= 0]
        # keep one copy of each hit node
        slot[hit] = np.arange(len(hit))
        layer = hit[slot[hit] == np.arange(len(hit))]
        rank[layer] = r
    strategy = _extract(game, rank, src)
    return Solution(game, rank, strategy)


def _group_order(keys, n):
    """Stable order of ``keys`` (values below ``n``) in linear time.

    NumPy's stable sort is a radix sort for 16-bit keys, so larger keys
    are sorted one 16-bit digit at a time, least significant first.
    """
    keys = np.asarray(keys, dtype=np.int64)
    order = np.argsort((keys & 0xFFFF).astype(np.uint16), kind="stable")
    shift = 16
    while n > 1 << shift:
        digit = ((keys[order] >> shift) & 0xFFFF).astype(np.uint16)
        order = order[np.argsort(digit, kind="stable")]
        shift += 16
    return order


def _extract(game, rank, src):
    """Positional strategies; ties go to the lowest successor index."""
    rs, rd = rank[src], rank[game.idx]
    own_a = game.owner_a[src]
    good_b = ~own_a & (rs > 0) & (rd >= 0) & (rd < rs)
    good_a = own_a & (rs < 0) & (rd < 0)
    # outside their region: A stalls on a successor of maximal rank, B moves anywhere
    stall = own_a & (rs >= 0)
    best = np.full(game.n, -1, dtype=np.int64)
    np.maximum.at(best, src[stall], rd[stall])
    stall &= rd == best[src]
    lost_b = ~own_a & (rs < 0)
    strategy = np.full(game.n, -1, dtype=np.int64)
    for good in (stall, lost_b, good_a, good_b):
        e = np.flatnonzero(good)
        s = src[e]  # sorted, since edges are stored by source
        first = np.flatnonzero(np.r_[True, s[1:] != s[:-1]]) if len(s) else e
        strategy[s[first]] = game.idx[e[first]]
    return strategy


def naive_solve(game):
    """Reference solver: Kleene iteration of the attractor operator.

    Much slower than :func:`solve` (a full sweep over all edges per round)
    and shares no code with it; used as an oracle in tests.
    """
    game.validate()
    starts = game.ptr[:-1]
    nonempty = np.diff(game.ptr) > 0
    win = game.final.copy()
    while True:
        hit = win[game.idx]
        any_hit = np.zeros(game.n, dtype=bool)
        all_hit = np.zeros(game.n, dtype=bool)
        any_hit[nonempty] = np.logical_or.reduceat(hit, starts[nonempty]) if len(hit) else False
        all_hit[nonempty] = np.logical_and.reduceat(hit, starts[nonempty]) if len(hit) else False
        new = win | np.where(game.owner_a, all_hit, any_hit)
        if (new == win).all():
            return new
        win = new


class Play(NamedTuple):
    prefix: list  # visited nodes
    outcome: str  # "B" if a final was visited, else "A"
    hit_step: int  # index in prefix of the first final, or -1


def play(game, strat_a, strat_b, c0, horizon):
    """Replay two positional strategies (dicts node -> node) from ``c0``."""
    prefix, c = [c0], c0
    for step in range(horizon + 1):
        if game.is_final(c):
            return Play(prefix, "B", step)
        if step == horizon:
            break
        strat = strat_a if game.owner(c) == "A" else strat_b
        if c not in strat:
            raise StrategyError(f"strategy of {game.owner(c)} undefined at {game.describe(c)}")
        nxt = strat[c]
        if nxt not in game.successors(c):
            raise StrategyError(f"strategy of {game.owner(c)} picks a non-successor at {game.describe(c)}")
        c = nxt
        prefix.append(c)
    return Play(prefix, "A", -1)


class LazyGame:
    """Game given by functions, explored on demand (possibly infinite)."""

    def __init__(self, expand, owner, is_final, describe=str):
        self._expand = expand
        self._owner = owner
        self._final = is_final
        self.describe = describe
        self._cache = {}

    def successors(self, node):
        if node not in self._cache:
            self._cache[node] = list(dict.fromkeys(self._expand(node)))
        return self._cache[node]

    def owner(self, node):
        return self._owner(node)

    def is_final(self, node):
        return self._final(node)


@dataclass
class BisimResult:
    ok: bool
    relation: set
    failure: tuple | None = None  # (pair, unmatched edge, reason)
    checked: int = 0


def check_bisimulation(g, h, rel, domain=None):
    """Check the zig-zag conditions for every pair in ``domain`` (default
    ``rel``).  Successor pairs are looked up in ``rel``.  ``g``/``h`` need
    ``successors``, ``owner`` and ``is_final``.
    """
    rel = set(rel)
    partners = {}
    for a, b in rel:
        partners.setdefault(a, set()).add(b)
    back = {}
    for a, b in rel:
        back.setdefault(b, set()).add(a)
    todo = rel if domain is None else domain
    checked = 0
    for a, b in sorted(todo, key=repr):
        checked += 1
        if g.owner(a) != h.owner(b):
            return BisimResult(False, rel, ((a, b), None, "owner differs"), checked)
        if g.is_final(a) != h.is_final(b):
            return BisimResult(False, rel, ((a, b), None, "finality differs"), checked)
        hs = h.successors(b)
        for a2 in g.successors(a):
            if not partners.get(a2, set()).intersection(hs):
                return BisimResult(False, rel, ((a, b), (a, a2), "unmatched left edge"), checked)
        gs = g.successors(a)
        for b2 in hs:
            if not back.get(b2, set()).intersection(gs):
                return BisimResult(False, rel, ((a, b), (b, b2), "unmatched right edge"), checked)
    return BisimResult(True, rel, None, checked)


@dataclass
class Explored:
    """Raw result of exploring a game from some start nodes."""

    nodes: list
    succ: list
    labels: dict = field(default_factory=dict)


def build_game(
    starts,
    expand,
    is_final,
    deadlock="lose",
    truncate_finals=False,
    describe=str,
    keep_labels=False,
    limit=None,
):
    """Explore from ``starts`` and return a normalized, canonically ordered Game.

    ``expand(node)`` yields ``(label, successor)`` pairs.  Nodes without
    successors are either sent to a sink where their owner loses
    (``deadlock="lose"``) or rejected (``deadlock="reject"``).  With
    ``truncate_finals`` finals are not expanded and get a self-loop, which
    keeps every winner unchanged and shrinks the graph.
    """
    if deadlock not in ("lose", "reject"):
        raise ValueError(f"unknown deadlock policy {deadlock}")
    index, nodes, succ = {}, [], []
    labels = {} if keep_labels else None
    for s in starts:
        if s not in index:
            index[s] = len(nodes)
            nodes.append(s)
    queue = deque(range(len(nodes)))
    finals = set()
    while queue:
        i = queue.popleft()
        u = nodes[i]
        if is_final(u):
            finals.add(i)
            if truncate_finals:
                succ.append(None)
                continue
        out = []
        for lab, v in expand(u):
            j = index.get(v)
            if j is None:
                j = index[v] = len(nodes)
                nodes.append(v)
                queue.append(j)
                if limit is not None and len(nodes) > limit:
                    raise GameError(f"game exceeds {limit} configurations")
            out.append(j)
            if labels is not None:
                labels.setdefault((u, v), []).append(lab)
        while len(succ) <= i:
            succ.append(None)
        succ[i] = out
    # canonical order: sorted configurations, sinks last
    order = sorted(range(len(nodes)), key=nodes.__getitem__)
    pos = [0] * len(nodes)
    for k, i in enumerate(order):
        pos[i] = k
    new_nodes = [nodes[i] for i in order]
    new_succ = []
    dead_a = dead_b = False
    for i in order:
        out = succ[i]
        if out is None:  # truncated final
            new_succ.append([pos[i]])
            continue
        if not out:
            if deadlock == "reject":
                raise GameError(f"deadlocked configuration {describe(nodes[i])}")
            if nodes[i].turn == "A":
                dead_a = True
            else:
                dead_b = True
            new_succ.append(None)
            continue
        new_succ.append([pos[j] for j in out])
    extra = []
    if dead_a:
        extra.append(SINK_B_WINS)
    if dead_b:
        extra.append(SINK_A_WINS)
    sink_id = {s: len(new_nodes) + k for k, s in enumerate(extra)}
    for k, i in enumerate(order):
        if new_succ[k] is None:
            new_succ[k] = [sink_id[SINK_B_WINS if nodes[i].turn == "A" else SINK_A_WINS]]
    for s in extra:
        new_succ.append([sink_id[s]])
    all_nodes = new_nodes + extra
    owner_a = [v.turn == "A" for v in all_nodes]
    final = [False] * len(all_nodes)
    for i in finals:
        final[pos[i]] = True
    if dead_a:
        final[sink_id[SINK_B_WINS]] = True
    return Game.from_lists(all_nodes, owner_a, new_succ, final, describe=describe, edge_labels=labels)


def _dot_escape(s):
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(game, labels=None, edge_text=None):
    """DOT text with nodes ordered by label.  Finals are double circles,
    A nodes ellipses and B nodes boxes.  ``edge_text(u, v)`` may label edges.
    """
    labels = labels or game.describe
    names = [labels(v) if game.nodes is not None else str(i) for i, v in enumerate(game.nodes or range(game.n))]
    order = sorted(range(game.n), key=lambda i: names[i])
    lines = ["digraph game {", "  node [fontname=monospace];"]
    for k, i in enumerate(order):
        shape = "doublecircle" if game.final[i] else ("ellipse" if game.owner_a[i] else "box")
        lines.append(f'  n{k} [label="{_dot_escape(names[i])}", shape={shape}];')
    rank = {i: k for k, i in enumerate(order)}
    edges = sorted(((rank[u], rank[v], u, v) for u, v in game.edges()))
    for a, b, u, v in edges:
        a, b = f"n{a}", f"n{b}"
        extra = ""
        if edge_text is not None:
            t = edge_text(game.nodes[u], game.nodes[v])
            if t:
                extra = f' [label="{_dot_escape(t)}"]'
        lines.append(f"  {a} -> {b}{extra};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def solution_json(game, sol, labels=None):
    """JSON-ready dump of winning regions and strategies."""
    labels = labels or game.describe
    name = [labels(v) for v in game.nodes]
    out = {"winA": sorted(name[i] for i in np.flatnonzero(~sol.win_b)),
           "winB": sorted(name[i] for i in np.flatnonzero(sol.win_b))}
    for player, mine in (("A", game.owner_a), ("B", ~game.owner_a)):
        ids = np.flatnonzero(mine & (sol.strategy >= 0)).tolist()
        out[f"strategy{player}"] = {name[i]: name[sol.strategy[i]] for i in sorted(ids, key=name.__getitem__)}
    return out
