"""TSO semantics: store buffers, update closure, bounded reachability, views.

Buffers are stored oldest first: a write appends, an update pops index 0
into memory.  A read looks at the newest entry for its variable in the
reader's own buffer and falls back to memory.
"""
from __future__ import annotations

from collections import deque
from typing import NamedTuple

from .program import ARW, FENCE, READ, SKIP, WRITE
from .sc import Reach, Step, bfs_reach


class TSOConfig(NamedTuple):
    states: tuple
    buffers: tuple  # per process: tuple of (var, value), oldest first
    memory: tuple

    def n_buffered(self):
        return sum(len(b) for b in self.buffers)


class Update(NamedTuple):
    proc: int

    def show(self, program):
        return f"up_{program.processes[self.proc].name}"


def tso_initial(pf, buffers=None):
    n = len(pf.program.processes)
    return TSOConfig(pf.program.init_states, tuple(buffers or ((),) * n), pf.initial_memory())


def _read_value(buf, mem, k, x):
    for y, d in reversed(buf):
        if y == x:
            return d
    return mem[k]


def instr_successors(program, c, capacity=None):
    """Instruction steps only (no updates).  Writes are disabled when the
    writer's buffer already holds ``capacity`` entries."""
    out = []
    vi = program.var_index
    states, bufs, mem = c
    for i, table in enumerate(program.outgoing):
        buf = bufs[i]
        for ins, dst in table[states[i]]:
            op = ins.op
            s2 = states[:i] + (dst,) + states[i + 1:]
            if op == SKIP:
                out.append((Step(i, ins, dst), TSOConfig(s2, bufs, mem)))
            elif op == READ:
                if _read_value(buf, mem, vi[ins.var], ins.var) == ins.value:
                    out.append((Step(i, ins, dst), TSOConfig(s2, bufs, mem)))
            elif op == WRITE:
                if capacity is not None and len(buf) >= capacity:
                    continue
                b2 = bufs[:i] + (buf + ((ins.var, ins.value),),) + bufs[i + 1:]
                out.append((Step(i, ins, dst), TSOConfig(s2, b2, mem)))
            elif op == FENCE:
                if not buf:
                    out.append((Step(i, ins, dst), TSOConfig(s2, bufs, mem)))
            elif op == ARW:
                k = vi[ins.var]
                if not buf and mem[k] == ins.value:
                    m2 = mem[:k] + (ins.value2,) + mem[k + 1:]
                    out.append((Step(i, ins, dst), TSOConfig(s2, bufs, m2)))
    return out


def update(program, c, i):
    """Commit the oldest entry of process ``i``'s buffer."""
    states, bufs, mem = c
    (x, d), rest = bufs[i][0], bufs[i][1:]
    k = program.var_index[x]
    return TSOConfig(states, bufs[:i] + (rest,) + bufs[i + 1:], mem[:k] + (d,) + mem[k + 1:])


def update_successors(program, c):
    return [(Update(i), update(program, c, i)) for i, b in enumerate(c.buffers) if b]


def tso_successors(program, c, capacity=None):
    """All instruction and update steps from ``c``."""
    return instr_successors(program, c, capacity) + update_successors(program, c)


def up_star(program, c):
    """Configurations reachable by zero or more updates.

    Returns a dict ``config -> tuple of process indices`` (one witness
    update sequence per configuration), in BFS order.
    """
    seen = {c: ()}
    queue = deque([c])
    while queue:
        d = queue.popleft()
        for lab, e in update_successors(program, d):
            if e not in seen:
                seen[e] = seen[d] + (lab.proc,)
                queue.append(e)
    return seen


def flush_all(program, c):
    """Configurations with all buffers empty reachable by updates only."""
    return {d for d in up_star(program, c) if not any(d.buffers)}


def tso_reachable_bounded(program, c0, target, capacity):
    """Bounded TSO reachability: writes are disabled at ``capacity``.

    A positive answer is a genuine TSO run; a negative one says nothing
    about larger buffers.
    """
    if capacity < 0 or any(len(b) > capacity for b in c0.buffers):
        raise ValueError("initial buffers exceed capacity")
    return bfs_reach(c0, lambda c: tso_successors(program, c, capacity), lambda c: target(c.states))


def replay(program, c0, witness, capacity=None):
    """Follow a label sequence; raise if a step is not enabled."""
    c = c0
    for lab in witness:
        nxt = [d for l2, d in tso_successors(program, c, capacity) if l2 == lab]
        if not nxt:
            raise ValueError(f"step {lab} not enabled")
        c = nxt[0]
    return c


def witness_json(program, witness):
    out = []
    for lab in witness:
        name = program.processes[lab.proc].name
        if isinstance(lab, Update):
            out.append({"proc": name, "instr": "update"})
        else:
            out.append({"proc": name, "instr": str(lab.instr), "to": lab.dst})
    return out


class View(NamedTuple):
    """Finite abstraction of a TSO configuration when nobody updates.

    ``values[i][k]`` is what process i reads for variable k, ``fencable[i]``
    says its buffer is empty and ``buffered[i][k]`` that its buffer holds an
    entry for variable k (so memory changes are invisible to it).
    """

    states: tuple
    values: tuple
    fencable: tuple
    buffered: tuple


def view_of(program, c):
    values, fencable, buffered = [], [], []
    for buf in c.buffers:
        newest = {}
        for x, d in buf:
            newest[x] = d
        values.append(tuple(newest.get(x, c.memory[k]) for k, x in enumerate(program.vars)))
        fencable.append(not buf)
        buffered.append(tuple(x in newest for x in program.vars))
    return View(c.states, tuple(values), tuple(fencable), tuple(buffered))


def view_successors(program, v):
    """Successors of a view when no process ever updates."""
    out = []
    vi = program.var_index
    states, values, fencable, buffered = v
    n = len(states)
    for i, table in enumerate(program.outgoing):
        vals = values[i]
        for ins, dst in table[states[i]]:
            op = ins.op
            s2 = states[:i] + (dst,) + states[i + 1:]
            if op == SKIP:
                out.append((Step(i, ins, dst), View(s2, values, fencable, buffered)))
            elif op == READ:
                if vals[vi[ins.var]] == ins.value:
                    out.append((Step(i, ins, dst), View(s2, values, fencable, buffered)))
            elif op == FENCE:
                if fencable[i]:
                    out.append((Step(i, ins, dst), View(s2, values, fencable, buffered)))
            elif op == WRITE:
                k = vi[ins.var]
                v2 = values[:i] + (vals[:k] + (ins.value,) + vals[k + 1:],) + values[i + 1:]
                bi = buffered[i]
                b2 = buffered[:i] + (bi[:k] + (True,) + bi[k + 1:],) + buffered[i + 1:]
                f2 = fencable[:i] + (False,) + fencable[i + 1:]
                out.append((Step(i, ins, dst), View(s2, v2, f2, b2)))
            elif op == ARW:
                k = vi[ins.var]
                if not fencable[i] or vals[k] != ins.value:
                    continue
                # memory changes: every process not shadowing x by its own
                # buffer now reads the new value (process i itself included)
                v2 = tuple(
                    values[j][:k] + (ins.value2,) + values[j][k + 1:] if not buffered[j][k] else values[j]
                    for j in range(n)
                )
                out.append((Step(i, ins, dst), View(s2, v2, fencable, buffered)))
    return out
