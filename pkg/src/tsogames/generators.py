"""Seeded random instances for property tests and the CLI suites."""
from __future__ import annotations

import random

from .program import ARW, FENCE, READ, SKIP, WRITE, Instr, Process, Program
from .reductions import PCS
from .scgame import ATM


def random_program(rng, procs=(1, 3), states=(1, 4), nvars=(1, 2), nvals=2,
                   ops=(READ, WRITE, SKIP, FENCE, ARW), fanout=(1, 2), acyclic=False):
    """Random program plus finals and initial memory (dict).

    Sizes are drawn uniformly from the given inclusive ranges.  With
    ``acyclic`` every transition goes from state k to a state with a larger
    index, so every run is finite.
    """
    domain = tuple(str(d) for d in range(nvals))
    xs = tuple(f"x{k}" for k in range(rng.randint(*nvars)))
    processes, finals = [], set()
    for i in range(rng.randint(*procs)):
        n = rng.randint(*states)
        qs = [f"s{i}_{k}" for k in range(n)]
        trans = []
        for k, q in enumerate(qs):
            targets = qs[k + 1:] if acyclic else qs
            if not targets:
                continue
            for _ in range(rng.randint(*fanout)):
                op = rng.choice(ops)
                x = rng.choice(xs) if xs else None
                if x is None:
                    op = SKIP
                if op in (READ, WRITE):
                    ins = Instr(op, x, rng.choice(domain))
                elif op == ARW:
                    ins = Instr(op, x, rng.choice(domain), rng.choice(domain))
                else:
                    ins = Instr(op)
                trans.append((q, ins, rng.choice(targets)))
        processes.append(Process(f"P{i + 1}", qs, qs[0], list(dict.fromkeys(trans))))
        for q in qs[1:]:
            if rng.random() < 0.25:
                finals.add((f"P{i + 1}", q))
    program = Program(domain, xs, processes)
    memory = {x: rng.choice(domain) for x in xs}
    return program, frozenset(finals), memory


def random_atm(rng, nstates=(2, 4), letters=(1, 2), space=(1, 3), ntrans=(1, 6)):
    """Random machine and word.  The alphabet is the letters plus blank."""
    alphabet = ("_",) + tuple("ab"[: rng.randint(*letters)])
    qs = tuple(f"q{k}" for k in range(rng.randint(*nstates)))
    qf = qs[-1]
    existential = frozenset(q for q in qs[:-1] if rng.random() < 0.5)
    trans = set()
    for _ in range(rng.randint(*ntrans)):
        trans.add((rng.choice(qs[:-1]), rng.choice(alphabet), rng.choice(qs), rng.choice(alphabet), rng.choice("LR")))
    p = rng.randint(*space)
    word = tuple(rng.choice(alphabet[1:]) for _ in range(rng.randint(0, p)))
    atm = ATM(alphabet, qs, existential, qs[0], qf, tuple(sorted(trans)), p)
    return atm, word


def random_pcs(rng, nstates=(2, 4), nmsgs=(1, 2), ntrans=(1, 5)):
    qs = tuple(f"s{k}" for k in range(rng.randint(*nstates)))
    ms = tuple(f"m{k}" for k in range(rng.randint(*nmsgs)))
    trans = set()
    for _ in range(rng.randint(*ntrans)):
        op = rng.choice(("send", "recv", "nop"))
        trans.add((rng.choice(qs), op, "" if op == "nop" else rng.choice(ms), rng.choice(qs)))
    return PCS(qs, ms, tuple(sorted(trans)), frozenset({qs[-1]}), qs[0])


def rng_for(seed):
    return random.Random(seed)
