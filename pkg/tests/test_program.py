import pytest
from hypothesis import given, settings, strategies as st

from tsogames.game import Node, build_game, solve
from tsogames.generators import random_program, rng_for
from tsogames.program import (
    ProgramError,
    Process,
    Program,
    apply_ownership_gadget,
    parse_program,
    print_program,
    read,
    skip,
    write,
)
from tsogames.sc import SCConfig, sc_successors
from tsogames.scgame import build_sc_game, finals_predicate, node_describer

from conftest import DATA, GOLDEN


def test_parse_flag_race(flag_race):
    p = flag_race.program
    assert [q.name for q in p.processes] == ["P1", "P2"]
    assert [len(q.states) for q in p.processes] == [2, 2]
    assert p.vars == ("x",)
    assert p.domain == ("0", "1")
    assert flag_race.finals == {("P2", "r2")}
    assert flag_race.initial_memory() == ("0",)


def test_empty_program():
    with pytest.raises(ProgramError, match="empty program"):
        parse_program("domain 0 1\nvars x\nmemory x=0\n")


def test_undeclared_state_named():
    text = "domain 0\nprocess P\n  state q1 init\n  q1 -> q9 : skip\n"
    with pytest.raises(ProgramError, match="q9") as e:
        parse_program(text)
    assert e.value.line == 4


@pytest.mark.parametrize("text, msg", [
    ("domain 0\nvars x\nprocess P\n  state q init\n  q -> q : read y 0\nmemory x=0\n", "undeclared variable y"),
    ("domain 0\nvars x\nprocess P\n  state q init\n  q -> q : write x 5\nmemory x=0\n", "undeclared value 5"),
    ("domain 0\nvars x\nprocess P\n  state q init\n  state q\nmemory x=0\n", "duplicate state q"),
    ("domain 0\nvars x\nprocess P\n  state q init\n", "missing initial memory entry for x"),
    ("domain 0\nprocess P\n  state q\n", "exactly one init"),
    ("domain 0\nprocess P\n  state q init\n  q -> q : jump\n", "unknown instruction"),
    ("domain 0\nprocess P\n  state q init\n  q -> q : skip 1\n", "takes 0 argument"),
    ("domain 0\nprocess P\n  state q init\nfinals P.r\n", "undeclared state r"),
    ("domain 0\nprocess P\n  state q init\nprocess P\n  state q init\n", "duplicate process P"),
    ("bogus\n", "unexpected 'bogus'"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ProgramError, match=msg):
        parse_program(text)


def test_syntax_error_has_column():
    with pytest.raises(ProgramError) as e:
        parse_program("domain 0\nprocess P\n  state q init\n  q -> q : write x\n")
    assert e.value.line == 4 and e.value.col is not None


def test_comments_and_whitespace():
    pf = parse_program("# hi\n domain   0 1 # values\n\nprocess P\n state q init\n q -> q : skip\n")
    assert pf.program.processes[0].transitions[0].instr == skip()


def test_single_skip_loop_prints_one_transition():
    p = Program(("0",), (), [Process("P", ["q"], "q", [("q", skip(), "q")])])
    lines = [ln for ln in print_program(p).splitlines() if "->" in ln]
    assert lines == ["  q -> q : skip"]


@pytest.mark.parametrize("path", [DATA / "flag_race.prog", GOLDEN / "dekker.prog"])
def test_roundtrip_files(path):
    pf = parse_program(path.read_text())
    again = parse_program(print_program(pf.program, pf.finals, pf.memory))
    assert again == pf


def test_dekker_golden_is_canonical(dekker):
    text = (GOLDEN / "dekker.prog").read_text()
    body = "".join(ln for ln in text.splitlines(keepends=True) if not ln.startswith("#"))
    assert print_program(dekker.program, dekker.finals, dekker.memory) == body


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_roundtrip_random(seed):
    prog, finals, memory = random_program(rng_for(seed), procs=(1, 3), states=(1, 5), nvars=(0, 2), nvals=3)
    pf = parse_program(print_program(prog, finals, memory))
    assert pf.program == prog
    assert pf.finals == finals
    assert pf.memory == memory


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_accepted_programs_are_valid(seed):
    prog, finals, memory = random_program(rng_for(seed), nvals=3)
    pf = parse_program(print_program(prog, finals, memory))
    p = pf.program
    xs, dom = set(p.vars), set(p.domain)
    for proc in p.processes:
        assert proc.init in proc.states
        assert len(set(proc.states)) == len(proc.states)
        for t in proc.transitions:
            assert t.src in proc.states and t.dst in proc.states
            if t.instr.op in ("read", "write", "arw"):
                assert t.instr.var in xs and t.instr.value in dom


# ownership gadget

def _one_edge_program():
    return Program(("0", "1"), ("x",), [Process("P", ["a", "b"], "a", [("a", write("x", "1"), "b"), ("b", skip(), "b")])])


def test_gadget_single_transition():
    p = _one_edge_program()
    out, extra = apply_ownership_gadget(p, {("P", "a")})
    assert out.n_states() == p.n_states() + 2
    # the owned edge is replaced by three edges, plus the sink loop
    assert out.n_transitions() == p.n_transitions() - 1 + 3 + 1
    (qf,) = {q for _, q in extra}
    proc = out.processes[0]
    mid = next(t.dst for t in proc.transitions if t.src == "a")
    assert set(t for t in proc.transitions if t.src == mid) == {(mid, skip(), "b"), (mid, skip(), qf)}
    assert (qf, skip(), qf) in proc.transitions


def test_gadget_identity():
    p = _one_edge_program()
    out, extra = apply_ownership_gadget(p, set())
    assert out == p and extra == frozenset()


def test_gadget_unknown_state():
    with pytest.raises(ProgramError, match="zz"):
        apply_ownership_gadget(_one_edge_program(), {("P", "zz")})


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32), st.data())
def test_gadget_counts(seed, data):
    prog, _, _ = random_program(rng_for(seed))
    all_states = [(p.name, q) for p in prog.processes for q in p.states]
    owned = set(data.draw(st.lists(st.sampled_from(all_states), max_size=4)))
    out, extra = apply_ownership_gadget(prog, owned)
    for p, q in zip(prog.processes, out.processes):
        t = sum(1 for tr in p.transitions if (p.name, tr.src) in owned)
        loop = 1 if t else 0
        assert len(q.states) == len(p.states) + t + loop
        assert len(q.transitions) == len(p.transitions) + 2 * t + loop
    assert len(extra) == sum(1 for p in prog.processes if any((p.name, t.src) in owned for t in p.transitions))


def _forbid_moves(program, owned):
    """Drop the transitions leaving owned states (A may not use them)."""
    procs = []
    for p in program.processes:
        keep = [t for t in p.transitions if (p.name, t.src) not in owned]
        procs.append(Process(p.name, p.states, p.init, keep))
    return Program(program.domain, program.vars, procs)


def _sc_winner(program, finals, memory):
    c0 = SCConfig(program.init_states, program.memory(memory))
    g = build_sc_game(program, finals, c0)
    return solve(g).winner(Node("A", c0))


def test_gadget_owned_r1_flag_race(flag_race):
    owned = {("P2", "r1")}
    prog, extra = apply_ownership_gadget(flag_race.program, owned)
    gadget = _sc_winner(prog, flag_race.finals | extra, flag_race.memory)
    # reference: A simply may not move out of r1 (B keeps its moves there)
    forbid = _forbid_moves(flag_race.program, owned)
    c0 = SCConfig(flag_race.program.init_states, flag_race.initial_memory())

    def expand(node):
        prog_ = forbid if node.turn == "A" else flag_race.program
        nxt = "B" if node.turn == "A" else "A"
        return [(lab, Node(nxt, d)) for lab, d in sc_successors(prog_, node.config)]

    g = build_game([Node("A", c0)], expand, finals_predicate(flag_race.program, flag_race.finals),
                   describe=node_describer(flag_race.program))
    assert gadget == solve(g).winner(Node("A", c0))
