"""Concurrent programs: data model, text format and the ownership gadget.

A program is a tuple of processes, each a finite labelled transition
system over instructions that act on a finite set of shared variables
ranging over a finite domain.  Everything here is immutable.

Text format (one item per line, ``#`` starts a comment)::

    domain 0 1
    vars x y
    process P1
      state q1 init
      state q2
      q1 -> q2 : write x 1
      q2 -> q2 : skip
    finals P1.q2
    memory x=0 y=0
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

READ, WRITE, ARW, SKIP, FENCE = "read", "write", "arw", "skip", "fence"
_ARITY = {READ: 2, WRITE: 2, ARW: 3, SKIP: 0, FENCE: 0}
_IDENT = re.compile(r"^\w+$", re.ASCII)


class ProgramError(ValueError):
    """Raised for malformed programs or program text."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True, order=True)
class Instr:
    """One instruction.  ``value2`` is only used by ARW (the new value)."""

    op: str
    var: str = ""
    value: str = ""
    value2: str = ""

    def __str__(self):
        if self.op in (SKIP, FENCE):
            return self.op
        if self.op == ARW:
            return f"arw {self.var} {self.value} {self.value2}"
        return f"{self.op} {self.var} {self.value}"

    def short(self):
        """Compact form used in traces, e.g. ``write(x,1)``."""
        if self.op in (SKIP, FENCE):
            return self.op
        args = [self.var, self.value] + ([self.value2] if self.op == ARW else [])
        return f"{self.op}({','.join(args)})"


def read(x, d):
    return Instr(READ, x, d)


def write(x, d):
    return Instr(WRITE, x, d)


def arw(x, d, d2):
    return Instr(ARW, x, d, d2)


def skip():
    return Instr(SKIP)


def fence():
    return Instr(FENCE)


class Transition(NamedTuple):
    src: str
    instr: Instr
    dst: str


@dataclass(frozen=True)
class Process:
    name: str
    states: tuple
    init: str
    transitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(Transition(*t) for t in self.transitions))


@dataclass(frozen=True)
class Program:
    """A validated concurrent program.

    Local states, variables and values are strings.  Global states are
    tuples of local states in process order, memories are tuples of values
    in ``vars`` order.
    """

    domain: tuple
    vars: tuple
    processes: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "processes", tuple(self.processes))
        self._validate()

    def _validate(self):
        if not self.processes:
            raise ProgramError("empty program")
        if not self.domain:
            raise ProgramError("empty domain")
        _unique("value", self.domain)
        _unique("variable", self.vars)
        _unique("process", [p.name for p in self.processes])
        for name in (*self.domain, *self.vars, *(p.name for p in self.processes)):
            _check_ident(name)
        dom, xs = set(self.domain), set(self.vars)
        for p in self.processes:
            _unique(f"state in process {p.name}", p.states)
            for q in p.states:
                _check_ident(q)
            states = set(p.states)
            if p.init not in states:
                raise ProgramError(f"undeclared state {p.init} in process {p.name}")
            for t in p.transitions:
                for q in (t.src, t.dst):
                    if q not in states:
                        raise ProgramError(f"undeclared state {q} in process {p.name}")
                ins = t.instr
                if ins.op not in _ARITY:
                    raise ProgramError(f"unknown instruction {ins.op}")
                if _ARITY[ins.op] and ins.var not in xs:
                    raise ProgramError(f"undeclared variable {ins.var}")
                vals = [ins.value, ins.value2][: max(0, _ARITY[ins.op] - 1)]
                for d in vals:
                    if d not in dom:
                        raise ProgramError(f"undeclared value {d}")

    @cached_property
    def var_index(self):
        return {x: i for i, x in enumerate(self.vars)}

    @cached_property
    def proc_index(self):
        return {p.name: i for i, p in enumerate(self.processes)}

    @cached_property
    def outgoing(self):
        """Per process: local state -> tuple of (instr, dst), in declaration order."""
        out = []
        for p in self.processes:
            table = {q: [] for q in p.states}
            for t in p.transitions:
                table[t.src].append((t.instr, t.dst))
            out.append({q: tuple(v) for q, v in table.items()})
        return tuple(out)

    @property
    def init_states(self):
        return tuple(p.init for p in self.processes)

    def memory(self, mapping):
        """Memory tuple from a ``{var: value}`` mapping (must be total)."""
        missing = [x for x in self.vars if x not in mapping]
        if missing:
            raise ProgramError(f"missing initial memory entry for {missing[0]}")
        extra = [x for x in mapping if x not in self.var_index]
        if extra:
            raise ProgramError(f"undeclared variable {extra[0]}")
        for x, d in mapping.items():
            if d not in self.domain:
                raise ProgramError(f"undeclared value {d}")
        return tuple(mapping[x] for x in self.vars)

    def final_mask(self, finals):
        """Per process, the frozenset of final local states."""
        per = [set() for _ in self.processes]
        for name, q in finals:
            if name not in self.proc_index:
                raise ProgramError(f"unknown process {name}")
            i = self.proc_index[name]
            if q not in self.processes[i].states:
                raise ProgramError(f"undeclared state {q} in process {name}")
            per[i].add(q)
        return tuple(frozenset(s) for s in per)

    def n_states(self):
        return sum(len(p.states) for p in self.processes)

    def n_transitions(self):
        return sum(len(p.transitions) for p in self.processes)


def _unique(kind, names):
    seen = set()
    for n in names:
        if n in seen:
            raise ProgramError(f"duplicate {kind} {n}")
        seen.add(n)


def _check_ident(name):
    if not isinstance(name, str) or not _IDENT.match(name):
        raise ProgramError(f"bad identifier {name!r}")


class ProgramFile(NamedTuple):
    """Result of parsing: the program plus its finals and initial memory."""

    program: Program
    finals: frozenset  # of (process name, local state)
    memory: dict

    def initial_memory(self):
        return self.program.memory(self.memory)


def _tokens(line):
    """Split into (col, token) pairs, 1-based columns."""
    return [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]


def parse_program(text):
    """Parse program text.  Returns a :class:`ProgramFile`."""
    domain = vars_ = None
    procs = []  # [name, states, init, transitions]
    finals = []
    memory = None
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        col, head = toks[0]
        words = [t for _, t in toks]

        def err(msg, c=col):
            return ProgramError(msg, lineno, c)

        def ident(i):
            c, w = toks[i]
            if not _IDENT.match(w):
                raise err(f"bad identifier {w!r}", c)
            return w

        if head == "domain":
            if domain is not None:
                raise err("duplicate domain section")
            domain = [ident(i) for i in range(1, len(toks))]
        elif head == "vars":
            if vars_ is not None:
                raise err("duplicate vars section")
            vars_ = [ident(i) for i in range(1, len(toks))]
        elif head == "process":
            if len(toks) != 2:
                raise err("expected: process NAME")
            cur = [ident(1), [], [], []]
            procs.append(cur)
        elif head == "state":
            if cur is None:
                raise err("state outside of a process")
            if len(toks) not in (2, 3) or (len(toks) == 3 and words[2] != "init"):
                raise err("expected: state NAME [init]")
            q = ident(1)
            if q in cur[1]:
                raise err(f"duplicate state {q}", toks[1][0])
            cur[1].append(q)
            if len(toks) == 3:
                cur[2].append(q)
        elif head == "finals":
            for c, w in toks[1:]:
                m = re.match(r"^(\w+)\.(\w+)$", w, re.ASCII)
                if not m:
                    raise err(f"expected PROCESS.STATE, got {w!r}", c)
                finals.append((m.group(1), m.group(2), lineno, c))
        elif head == "memory":
            if memory is not None:
                raise err("duplicate memory section")
            memory = {}
            for c, w in toks[1:]:
                m = re.match(r"^(\w+)=(\w+)$", w, re.ASCII)
                if not m:
                    raise err(f"expected VAR=VALUE, got {w!r}", c)
                if m.group(1) in memory:
                    raise err(f"duplicate memory entry {m.group(1)}", c)
                memory[m.group(1)] = m.group(2)
        elif len(words) >= 4 and words[1] == "->" and words[3] == ":":
            if cur is None:
                raise err("transition outside of a process")
            src, dst = ident(0), ident(2)
            if len(words) < 5:
                raise err("missing instruction", toks[3][0])
            op, args = words[4], words[5:]
            if op not in _ARITY:
                raise err(f"unknown instruction {op!r}", toks[4][0])
            if len(args) != _ARITY[op]:
                raise err(f"{op} takes {_ARITY[op]} argument(s)", toks[4][0])
            for i in range(5, len(toks)):
                ident(i)
            for q, c in ((src, toks[0][0]), (dst, toks[2][0])):
                if q not in cur[1]:
                    raise err(f"undeclared state {q}", c)
            if _ARITY[op]:
                if vars_ is None or args[0] not in vars_:
                    raise err(f"undeclared variable {args[0]}", toks[5][0])
                for k, d in enumerate(args[1:], 6):
                    if domain is None or d not in domain:
                        raise err(f"undeclared value {d}", toks[k][0])
            cur[3].append(Transition(src, Instr(op, *args), dst))
        else:
            raise err(f"unexpected {head!r}")

    if not procs:
        raise ProgramError("empty program")
    if domain is None:
        raise ProgramError("missing domain section")
    vars_ = vars_ or []
    processes = []
    for name, states, inits, trans in procs:
        if len(inits) != 1:
            raise ProgramError(f"process {name} needs exactly one init state")
        processes.append(Process(name, states, inits[0], trans))
    program = Program(domain, vars_, processes)
    fin = set()
    for pname, q, lineno, c in finals:
        if pname not in program.proc_index:
            raise ProgramError(f"unknown process {pname}", lineno, c)
        if q not in program.processes[program.proc_index[pname]].states:
            raise ProgramError(f"undeclared state {q}", lineno, c)
        fin.add((pname, q))
    memory = memory or {}
    program.memory(memory)  # totality check
    return ProgramFile(program, frozenset(fin), memory)


def print_program(program, finals=(), memory=None, header=()):
    """Canonical text for a program.  ``header`` lines become comments."""
    out = [f"# {h}" for h in header]
    out.append(" ".join(["domain", *program.domain]))
    out.append(" ".join(["vars", *program.vars]))
    for p in program.processes:
        out.append(f"process {p.name}")
        for q in p.states:
            out.append(f"  state {q}" + (" init" if q == p.init else ""))
        for t in p.transitions:
            out.append(f"  {t.src} -> {t.dst} : {t.instr}")
    order = {(p.name, q): (i, j) for i, p in enumerate(program.processes) for j, q in enumerate(p.states)}
    fins = sorted(finals, key=lambda f: order.get(tuple(f), (len(order), 0)))
    if fins:
        out.append(" ".join(["finals", *(f"{a}.{b}" for a, b in fins)]))
    if memory is not None:
        if not isinstance(memory, dict):
            memory = dict(zip(program.vars, memory))
        out.append(" ".join(["memory", *(f"{x}={memory[x]}" for x in program.vars)]))
    return "\n".join(out) + "\n"


def fresh_name(base, taken):
    """``base`` if free, else ``base_2``, ``base_3``...  Adds the result to ``taken``."""
    name, k = base, 2
    while name in taken:
        name, k = f"{base}_{k}", k + 1
    taken.add(name)
    return name


def apply_ownership_gadget(program, owned):
    """Let player B own the given local states.

    Every transition ``q1 -i-> q2`` leaving an owned state becomes
    ``q1 -i-> q2'``, ``q2' -skip-> q2`` and ``q2' -skip-> qF``.  If A moves
    out of an owned state, B answers by entering qF and wins; so A never
    profits from it.  One qF (with a skip self-loop) is added per affected
    process, since a local state belongs to exactly one process.

    Returns ``(program, extra_finals)``.
    """
    owned_by = {}
    for name, q in owned:
        if name not in program.proc_index:
            raise ProgramError(f"unknown process {name}")
        if q not in program.processes[program.proc_index[name]].states:
            raise ProgramError(f"undeclared state {q} in process {name}")
        owned_by.setdefault(name, set()).add(q)
    procs, extra = [], set()
    for p in program.processes:
        mine = owned_by.get(p.name, set())
        if not any(t.src in mine for t in p.transitions):
            procs.append(p)
            continue
        taken = set(p.states)
        states, trans = list(p.states), []
        qf = fresh_name("own_F", taken)
        for k, t in enumerate(p.transitions):
            if t.src not in mine:
                trans.append(t)
                continue
            mid = fresh_name(f"{t.dst}__own{k}", taken)
            states.append(mid)
            trans += [Transition(t.src, t.instr, mid), Transition(mid, skip(), t.dst), Transition(mid, skip(), qf)]
        states.append(qf)
        trans.append(Transition(qf, skip(), qf))
        procs.append(Process(p.name, states, p.init, trans))
        extra.add((p.name, qf))
    return Program(program.domain, program.vars, procs), frozenset(extra)
