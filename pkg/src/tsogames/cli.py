"""Command-line interface.

Exit codes: 0 decided / success, 1 undecidable (or harness disagreement),
2 input error.  Set ``TSOGAMES_LOG`` (e.g. ``DEBUG``) for log output.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from importlib import resources

from . import tsogame as T
from .game import GameError, Node, StrategyError, export_dot, play, solution_json, solve as solve_game
from .program import ProgramError, apply_ownership_gadget, parse_program, print_program
from .generators import random_pcs, rng_for
from .reductions import GENERATORS, POLICIES, pcs_from_json, pcs_to_json, reduction_harness
from .sc import SCConfig, sc_reachable, state_target, witness_json as sc_witness_json
from .scgame import atm_from_json, atm_to_program, build_sc_game
from .tso import TSOConfig, tso_reachable_bounded, witness_json as tso_witness_json

log = logging.getLogger("tsogames")


class InputError(Exception):
    pass


def _load_program(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    try:
        return parse_program(text)
    except ProgramError as e:
        raise InputError(f"{path}: {e}") from e


def _load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON: {e}") from e


def _policy(text):
    try:
        return T.parse_policy(text)
    except ValueError as e:
        raise InputError(str(e)) from e


def _state_list(pf, text):
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, dot, q = item.partition(".")
        if not dot:
            raise InputError(f"expected PROCESS.STATE, got {item!r}")
        out.append((name, q))
    try:
        pf.program.final_mask(out)
    except ProgramError as e:
        raise InputError(str(e)) from e
    return frozenset(out)


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _build(args, pf, keep_labels=False):
    """Game for ``solve``/``replay``/``export-dot``: returns (game, start, verdict json)."""
    finals = _state_list(pf, args.finals) if args.finals else pf.finals
    prog = pf.program
    if args.sc:
        c0 = SCConfig(prog.init_states, pf.initial_memory())
        g = build_sc_game(prog, finals, c0, args.turn, args.deadlock, keep_labels=keep_labels)
        start = Node(args.turn, c0)
        t = time.perf_counter()
        sol = solve_game(g)
        ms = round((time.perf_counter() - t) * 1000, 3)
        out = {"semantics": "sc", "decidable": True, "winner": sol.winner(start),
               "stats": {"configs": g.n, "edges": g.m, "solveMs": ms}}
        return g, sol, start, out
    policy = _policy(args.policy)
    c0 = TSOConfig(prog.init_states, ((),) * len(prog.processes), pf.initial_memory())
    v = T.solve(prog, finals, c0, policy, turn=args.turn, deadlock=args.deadlock,
                bounded_capacity=args.capacity, limit=args.limit, keep_labels=keep_labels)
    out = {"semantics": "tso", **v.as_json()}
    return v.game, v.solution, v.initial, out


def cmd_solve(args):
    pf = _load_program(args.program)
    game, sol, start, out = _build(args, pf)
    _emit(out)
    if args.dump_strategies and sol is not None:
        with open(args.dump_strategies, "w") as f:
            json.dump(solution_json(game, sol), f, indent=2, sort_keys=True)
    return 0 if out["decidable"] else 1


def cmd_classify(args):
    if args.all:
        for p in T.ALL_POLICIES:
            print(f"A={p.a:<6} B={p.b:<6} {T.classify(p)}")
        return 0
    if not args.policy:
        raise InputError("give --policy or --all")
    print(T.classify(_policy(args.policy)))
    return 0


def cmd_generate(args):
    kind = args.kind
    if kind == "ownership":
        pf = _load_program(args.input)
        owned = _state_list(pf, args.owned or "")
        prog, extra = apply_ownership_gadget(pf.program, owned)
        sys.stdout.write(print_program(prog, pf.finals | extra, pf.memory))
        return 0
    data = _load_json(args.input)
    try:
        if kind == "atm":
            atm = atm_from_json(data)
            word = args.word.replace(",", " ").split() if args.word is not None else list(data.get("word", []))
            prog, finals, memory = atm_to_program(atm, word)
            header = [f"generated from an alternating Turing machine, word: {' '.join(word) or '(empty)'}",
                      "start turn: A; semantics: sc"]
        else:
            variant = {"pcs-a": "A", "pcs-b": "B", "pcs-ab": "AB"}[kind]
            red = GENERATORS[variant](pcs_from_json(data))
            prog, finals = red.program, red.finals
            memory = dict(zip(prog.vars, red.initial.memory))
            a, b = POLICIES[variant]
            header = [f"generated from a channel system ({variant} variant)",
                      f"start turn: {red.turn}; policy: A={a},B={b}"]
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{args.input}: invalid machine description: {e}") from e
    sys.stdout.write(print_program(prog, finals, memory, header=header))
    return 0


def cmd_export_dot(args):
    pf = _load_program(args.program)
    prog = pf.program
    finals = _state_list(pf, args.finals) if args.finals else pf.finals
    if args.sc:
        c0 = SCConfig(prog.init_states, pf.initial_memory())
        g = build_sc_game(prog, finals, c0, args.turn, args.deadlock, keep_labels=True)
    else:
        policy = _policy(args.policy)
        c0 = TSOConfig(prog.init_states, ((),) * len(prog.processes), pf.initial_memory())
        g = T.build_tso_game_bounded(prog, finals, policy, c0, args.capacity, args.turn, args.deadlock,
                                     keep_labels=True, limit=args.limit)

    def edge_text(u, v):
        labs = g.edge_labels.get((u, v), [])
        return " | ".join(sorted({lab.show(prog) for lab in labs}))

    sys.stdout.write(export_dot(g, edge_text=edge_text))
    return 0


def _read_strategies(args):
    strat = {"A": {}, "B": {}}
    if args.strategies:
        data = _load_json(args.strategies)
        strat["A"].update(data.get("strategyA", {}))
        strat["B"].update(data.get("strategyB", {}))
    for player, path in (("A", args.strategy_a), ("B", args.strategy_b)):
        if path:
            strat[player].update(_load_json(path))
    return strat


def cmd_replay(args):
    pf = _load_program(args.program)
    game, sol, start, out = _build(args, pf, keep_labels=True)
    if game is None:
        raise InputError("undecidable policy: pass --capacity for a bounded game to replay on")
    by_label = {game.describe(v): v for v in game.nodes}
    strat = {}
    for player, table in _read_strategies(args).items():
        mapping = {}
        for k, v in table.items():
            if k not in by_label or v not in by_label:
                raise InputError(f"strategy of {player} mentions an unknown configuration: {k if k not in by_label else v}")
            mapping[by_label[k]] = by_label[v]
        strat[player] = mapping
    try:
        result = play(game, strat["A"], strat["B"], start, args.horizon)
    except StrategyError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    prog = pf.program
    print(f"0 {game.describe(result.prefix[0])}")
    for k, (u, v) in enumerate(zip(result.prefix, result.prefix[1:]), 1):
        labs = game.edge_labels.get((u, v), [])
        how = labs[0].show(prog) if labs else "deadlock"
        print(f"{k} [{u.turn}: {how}] {game.describe(v)}")
    if result.outcome == "B":
        print(f"outcome: B reached a final configuration at step {result.hit_step}")
    else:
        print(f"outcome: A avoided the finals for {args.horizon} steps")
    return 0


def cmd_reach(args):
    pf = _load_program(args.program)
    prog = pf.program
    target = state_target(prog, _state_list(pf, args.target), "any" if args.any else "all")
    if args.mode == "sc":
        c0 = SCConfig(prog.init_states, pf.initial_memory())
        res = sc_reachable(prog, c0, target)
        wit = sc_witness_json(prog, res.witness)
    else:
        c0 = TSOConfig(prog.init_states, ((),) * len(prog.processes), pf.initial_memory())
        res = tso_reachable_bounded(prog, c0, target, args.capacity)
        wit = tso_witness_json(prog, res.witness)
    out = {"mode": args.mode, "reachable": res.found, "witness": wit, "explored": res.explored}
    if args.mode == "tso":
        out["capacity"] = args.capacity
    _emit(out)
    return 0


def schema(name):
    """Published JSON schema for the output of a subcommand."""
    with resources.files("tsogames").joinpath(f"data/schemas/{name}.schema.json").open() as f:
        return json.load(f)


def builtin_corpus():
    with resources.files("tsogames").joinpath("data/pcs_corpus.json").open() as f:
        return json.load(f)


def _harness_one(job):
    name, data, variant, capacity = job
    rep = reduction_harness(pcs_from_json(data), variant, capacity)
    rep["name"] = name
    return rep


def cmd_harness(args):
    if args.random:
        rng = rng_for(args.seed)
        corpus = {"instances": [{"name": f"random_{args.seed}_{k}", "pcs": pcs_to_json(random_pcs(rng, ntrans=(1, 5)))}
                                for k in range(args.random)]}
    else:
        corpus = _load_json(args.corpus) if args.corpus else builtin_corpus()
    variants = ["A", "B", "AB"] if args.variant == "all" else [args.variant]
    jobs = [(inst["name"], inst["pcs"], v, args.capacity) for v in variants for inst in corpus["instances"]]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(args.jobs) as ex:
            reports = list(ex.map(_harness_one, jobs))
    else:
        reports = [_harness_one(j) for j in jobs]
    agree = sum(r["agree"] for r in reports)
    if args.json:
        _emit({"capacity": args.capacity, "agreement": agree, "total": len(reports), "caveat": T.CAVEAT,
               "reports": reports})
        return 0 if agree == len(reports) else 1
    for r in reports:
        print(f"{r['variant']:<2} {r['name']:<24} pcsReachable={r['pcsReachable']!s:<5} "
              f"gameWinner={r['gameWinnerAtBound']} agree={r['agree']} configs={r['configs']}")
    print(f"agreement: {agree}/{len(reports)} at capacity {args.capacity}")
    print(f"caveat: {T.CAVEAT}")
    return 0 if agree == len(reports) else 1


def _add_game_args(p, capacity_default=None):
    p.add_argument("program")
    p.add_argument("--policy", default="A=always,B=always", help="update rights, e.g. A=always,B=never")
    p.add_argument("--sc", action="store_true", help="play under SC instead of TSO")
    p.add_argument("--finals", help="override finals, e.g. P2.r2,P1.q3")
    p.add_argument("--turn", choices=["A", "B"], default="A", help="who moves first")
    p.add_argument("--deadlock", choices=["lose", "reject"], default="lose")
    p.add_argument("--capacity", type=_nonneg, default=capacity_default,
                   help="per-process buffer bound (bounded analysis for undecidable policies)")
    p.add_argument("--limit", type=int, default=2_000_000, help="configuration ceiling")


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def make_parser():
    ap = argparse.ArgumentParser(prog="tsogames", description="Safety games on concurrent programs under SC and TSO.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("solve", help="decide the winner of a game")
    _add_game_args(p)
    p.add_argument("--dump-strategies", metavar="FILE", help="write winning regions and strategies as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("classify", help="group of an update policy")
    p.add_argument("--policy")
    p.add_argument("--all", action="store_true", help="print all sixteen cells")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("generate", help="emit a generated program")
    p.add_argument("kind", choices=["atm", "pcs-a", "pcs-b", "pcs-ab", "ownership"])
    p.add_argument("input")
    p.add_argument("--word", help="input word for atm (letters separated by spaces or commas)")
    p.add_argument("--owned", help="states owned by B for ownership, e.g. P2.r1")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("export-dot", help="render a game fragment as DOT")
    _add_game_args(p, capacity_default=1)
    p.set_defaults(func=cmd_export_dot)

    p = sub.add_parser("replay", help="replay strategies and print the play")
    _add_game_args(p)
    p.add_argument("--strategies", help="JSON from solve --dump-strategies")
    p.add_argument("--strategy-a", help="JSON map configuration -> successor for A")
    p.add_argument("--strategy-b", help="JSON map configuration -> successor for B")
    p.add_argument("--horizon", type=_nonneg, default=100)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("reach", help="state reachability under SC or bounded TSO")
    p.add_argument("program")
    p.add_argument("--target", required=True, help="e.g. P1.q3,P2.r3")
    p.add_argument("--any", action="store_true", help="one listed state suffices (default: all)")
    p.add_argument("--mode", choices=["sc", "tso"], default="sc")
    p.add_argument("--capacity", type=_nonneg, default=1)
    p.set_defaults(func=cmd_reach)

    p = sub.add_parser("harness", help="channel-system reduction agreement suite")
    p.add_argument("--corpus", help="JSON corpus (default: built-in)")
    p.add_argument("--variant", choices=["A", "B", "AB", "all"], default="all")
    p.add_argument("--capacity", type=_nonneg, default=6)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true", help="print one JSON report")
    p.add_argument("--random", type=_nonneg, default=0, metavar="N",
                   help="run N seeded random channel systems instead of a corpus")
    p.add_argument("--seed", type=int, default=0, help="seed for --random")
    p.set_defaults(func=cmd_harness)
    return ap


def main(argv=None):
    level = os.environ.get("TSOGAMES_LOG")
    if level:
        logging.basicConfig(level=level.upper(), format="%(levelname)s %(name)s: %(message)s")
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ProgramError, GameError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
