"""Sequentially consistent semantics and SC state reachability."""
from __future__ import annotations

import math
from collections import deque
from typing import NamedTuple

from .program import ARW, FENCE, READ, SKIP, WRITE


class SCConfig(NamedTuple):
    states: tuple  # local state per process
    memory: tuple  # value per variable (program.vars order)


class Step(NamedTuple):
    """Label of a transition: process ``proc`` (index) executes ``instr``
    and moves to local state ``dst``."""

    proc: int
    instr: object
    dst: str = ""

    def show(self, program):
        return f"{self.instr.short()}_{program.processes[self.proc].name}"


def sc_initial(pf):
    """Initial SC configuration of a parsed :class:`ProgramFile`."""
    return SCConfig(pf.program.init_states, pf.initial_memory())


def sc_successors(program, c):
    """List of ``(Step, SCConfig)`` in process/declaration order."""
    out = []
    vi = program.var_index
    states, mem = c
    for i, table in enumerate(program.outgoing):
        for ins, dst in table[states[i]]:
            op = ins.op
            s2 = states[:i] + (dst,) + states[i + 1:]
            if op == SKIP or op == FENCE:
                m2 = mem
            elif op == READ:
                if mem[vi[ins.var]] != ins.value:
                    continue
                m2 = mem
            elif op == WRITE:
                k = vi[ins.var]
                m2 = mem[:k] + (ins.value,) + mem[k + 1:]
            elif op == ARW:
                k = vi[ins.var]
                if mem[k] != ins.value:
                    continue
                m2 = mem[:k] + (ins.value2,) + mem[k + 1:]
            else:  # pragma: no cover - validated at construction
                raise ValueError(op)
            out.append((Step(i, ins, dst), SCConfig(s2, m2)))
    return out


def state_target(program, targets, mode="all"):
    """Build a predicate over global states.

    ``targets`` is an iterable of ``(process name, local state)``.  With
    ``mode="all"`` every listed process must be in (one of) its listed
    states; with ``mode="any"`` one match suffices.
    """
    want = {}
    for name, q in targets:
        want.setdefault(program.proc_index[name], set()).add(q)
    items = list(want.items())
    if mode == "all":
        return lambda s: all(s[i] in qs for i, qs in items)
    if mode == "any":
        return lambda s: any(s[i] in qs for i, qs in items)
    raise ValueError(mode)


class Reach(NamedTuple):
    found: bool
    witness: list  # labels from the initial configuration to the target
    explored: int


def bfs_reach(c0, successors, hit, limit=None):
    """Generic BFS.  ``hit(c)`` tests a configuration.  Shortest witness."""
    if hit(c0):
        return Reach(True, [], 1)
    parent = {c0: None}
    queue = deque([c0])
    while queue:
        c = queue.popleft()
        for label, d in successors(c):
            if d in parent:
                continue
            parent[d] = (c, label)
            if hit(d):
                path = []
                while parent[d] is not None:
                    d, lab = parent[d]
                    path.append(lab)
                return Reach(True, path[::-1], len(parent))
            if limit is not None and len(parent) > limit:
                raise RuntimeError(f"exploration exceeded {limit} configurations")
            queue.append(d)
    return Reach(False, [], len(parent))


def sc_state_bound(program):
    return math.prod(len(p.states) for p in program.processes) * len(program.domain) ** len(program.vars)


def sc_reachable(program, c0, target):
    """Is a configuration whose global state satisfies ``target`` reachable?"""
    res = bfs_reach(c0, lambda c: sc_successors(program, c), lambda c: target(c.states))
    assert res.explored <= sc_state_bound(program)
    return res


def witness_json(program, witness):
    return [{"proc": program.processes[s.proc].name, "instr": str(s.instr), "to": s.dst} for s in witness]
