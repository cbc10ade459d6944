"""wmrobust command line.

Exit codes: 0 clean, 1 findings reported, 2 usage or parse error,
3 inconclusive (budget or depth cap hit).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .bm import UnsupportedFragment
from .graph import CONSISTENT, ExecutionGraph, GraphError, check_rc20, check_sc
from .interp import (DEFAULT_NODE_BUDGET, FixedScheduler, Machine, Options, explore, run_many, run_once)
from .lang import DEFAULT_LOOP_BOUND, AnalysisError, Compiled, DslError, parse
from .oracle import DEFAULT_BUDGET, find_witness_sc, is_robust

EXIT_CLEAN, EXIT_FINDINGS, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load_program(path: str) -> Compiled:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    return Compiled.of(parse(text))


def _load_trace(path: str) -> list:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load trace {path}: {exc}") from exc
    if not isinstance(data, list):
        raise UsageError("trace must be a JSON array")
    return data


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _fmt_violation(v) -> str:
    what = f"{v.access} of {v.loc} by {v.thread} at line {v.source_line}"
    stale = ""
    if v.stale_write_event is not None:
        where = "initial value" if v.stale_write_line is None else f"line {v.stale_write_line}"
        stale = f"; stale write e{v.stale_write_event} ({where})"
    sched = " ".join(f"{r['thread']}:{r['event']}" for r in v.schedule) or "(initial state)"
    tag = "robustness violation" if v.kind == "robustness" else "BM violation"
    return f"{tag}: {what} (hb {v.hb_ts} vs sc {v.sc_ts}){stale}\n  schedule: {sched}"


def _fmt_race(r, conditional: bool) -> str:
    a, b = r.access1, r.access2
    note = " [conditional: atomics not robust]" if conditional else ""
    return (f"data race on {r.loc}: {a.kind} by {a.thread} (line {a.line}) vs "
            f"{b.kind} by {b.thread} (line {b.line}){note}")


def _options(args, build_graph: bool = False) -> Options:
    return Options(loop_bound=args.loop_bound, bm=getattr(args, "bm", False),
                   continue_on_violation=getattr(args, "continue_on_violation", True),
                   build_graph=build_graph)


# -- subcommands ------------------------------------------------------------

def cmd_run(args) -> int:
    comp = _load_program(args.file)
    out = run_many(comp, args.seeds, _options(args), base_seed=args.seed, preempt=args.preempt)
    lines = [f"{args.seeds} runs, {out.runs_with_violation} with a robustness violation"]
    for f in out.findings:
        lines.append(_fmt_violation(f.violation))
        lines.append(f"  first hit in run {f.first_hit}, hit in {f.hits} runs")
    for r in out.races:
        lines.append(_fmt_race(r, bool(out.findings)))
    if not out.findings and not out.races:
        lines.append("no findings")
    _emit(args, out.to_json(), "\n".join(lines))
    return EXIT_FINDINGS if out.findings or out.races else EXIT_CLEAN


def cmd_explore(args) -> int:
    comp = _load_program(args.file)
    opts = _options(args)
    if args.trace:
        r = run_once(comp, FixedScheduler(_load_trace(args.trace)), opts)
        found = r.violations or r.bm_violations
        lines = [_fmt_violation(v) for v in r.violations + r.bm_violations] or ["clean on this schedule"]
        payload = dict(r.to_json(), verdict="findings" if r.violations else "clean")
        _emit(args, payload, "\n".join(lines))
        return EXIT_FINDINGS if found else EXIT_CLEAN
    out = explore(comp, args.depth_cap, opts, node_budget=args.node_budget)
    lines = [f"explored {out.nodes} configurations: {out.verdict}"]
    lines += [_fmt_violation(v) for v in out.violations + out.bm_violations]
    _emit(args, out.to_json(), "\n".join(lines))
    if out.violations or out.bm_violations:
        return EXIT_FINDINGS
    return EXIT_INCONCLUSIVE if out.verdict == "inconclusive" else EXIT_CLEAN


def cmd_oracle(args) -> int:
    comp = _load_program(args.file)
    res = is_robust(comp, args.bound, args.budget)
    payload = res.to_json()
    lines = [res.verdict]
    if res.witness is not None:
        lines.append(res.witness.ascii())
    if args.witness_sc:
        w = find_witness_sc(comp, args.bound, args.budget)
        payload["scWitness"] = None if w is None else w.to_json()
        lines.append("SC witness: none" if w is None else
                     f"SC witness ({w.kind}): {w.access} of {w.loc} by {w.thread} after {' '.join(w.trace) or '(start)'}")
    _emit(args, payload, "\n".join(lines))
    return {"robust": EXIT_CLEAN, "nonRobust": EXIT_FINDINGS}.get(res.verdict, EXIT_INCONCLUSIVE)


def cmd_race(args) -> int:
    comp = _load_program(args.file)
    opts = _options(args)
    if args.exhaustive:
        out = explore(comp, args.depth_cap, opts, node_budget=args.node_budget)
        races, robust_found = out.races, bool(out.violations)
        inconclusive = out.verdict == "inconclusive"
    else:
        many = run_many(comp, args.seeds, opts, base_seed=args.seed)
        races, robust_found = many.races, bool(many.findings)
        inconclusive = False
    lines = [_fmt_race(r, robust_found) for r in races] or ["no data races"]
    payload = {"races": [dict(r.to_json(), conditional=robust_found) for r in races],
               "robustnessViolations": robust_found}
    _emit(args, payload, "\n".join(lines))
    if races:
        return EXIT_FINDINGS
    return EXIT_INCONCLUSIVE if inconclusive else EXIT_CLEAN


def cmd_replay(args) -> int:
    comp = _load_program(args.file)
    trace = _load_trace(args.trace)
    opts = Options(loop_bound=args.loop_bound, bm=args.bm)
    steps = []

    def dump(m: Machine, st) -> None:
        rec = {"step": len(steps), "lc": m.lc.dump(), "race": m.race.dump()}
        if st is not None:
            rec["thread"] = m.names[st.tid]
            rec["event"] = m.trace[-1][2][1]
        if m.bm is not None:
            rec["bm"] = m.bm.dump()
        steps.append(rec)

    r = run_once(comp, FixedScheduler(trace), opts, on_step=dump)
    payload = {"steps": steps, "violations": [v.to_json() for v in r.violations],
               "bmViolations": [v.to_json() for v in r.bm_violations]}
    lines = []
    for s in steps:
        head = f"step {s['step']}" + (f": {s['thread']} {s['event']}" if "thread" in s else " (initial)")
        lines.append(head)
        for fam in ("hbTc", "hbW", "scT", "scW", "scM"):
            body = ", ".join(k + "={" + ", ".join(f"{y}@{t}" for y, t in v.items()) + "}"
                             for k, v in s["lc"][fam].items())
            lines.append(f"  {fam}: {body}")
        if "bm" in s:
            for fam, rows in s["bm"].items():
                lines.append(f"  {fam}: " + ", ".join(f"{k}={{{','.join(v)}}}" for k, v in rows.items()))
    lines += [_fmt_violation(v) for v in r.violations + r.bm_violations]
    _emit(args, payload, "\n".join(lines))
    return EXIT_FINDINGS if r.violations or r.bm_violations else EXIT_CLEAN


def cmd_check_graph(args) -> int:
    try:
        g = ExecutionGraph.load(args.graph)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load graph {args.graph}: {exc}") from exc
    verdict = check_rc20(g) if args.model == "rc20" else check_sc(g)
    word = "consistent" if verdict == CONSISTENT else "inconsistent"
    payload = {"model": args.model, "verdict": word}
    if verdict != CONSISTENT:
        payload["violated"] = verdict
    _emit(args, payload, word if verdict == CONSISTENT else f"{word} ({verdict})")
    return EXIT_CLEAN if verdict == CONSISTENT else EXIT_FINDINGS


# -- argument parsing ---------------------------------------------------------

def _default_seed() -> int:
    raw = os.environ.get("WMROBUST_SEED")
    try:
        return int(raw) if raw else 0
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wmrobust", description="Robustness sanitizer and litmus harness for RC20 atomics")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, loop=True):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if loop:
            p.add_argument("--loop-bound", type=int, default=DEFAULT_LOOP_BOUND)

    p = sub.add_parser("run", help="seeded random sanitizer runs")
    p.add_argument("file")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, default=_default_seed(), help="first seed (default $WMROBUST_SEED or 0)")
    p.add_argument("--preempt", type=float, default=0.0, help="per-step preemption probability")
    p.add_argument("--bm", action="store_true", help="also run the boolean-matrix monitor")
    p.add_argument("--continue-on-violation", action="store_true", help="keep running after the first violation")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("explore", help="exhaustive schedule exploration")
    p.add_argument("file")
    p.add_argument("--depth-cap", type=int, default=200)
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--trace", help="analyse only this fixed schedule (JSON array)")
    p.add_argument("--bm", action="store_true")
    common(p)
    p.set_defaults(func=cmd_explore, continue_on_violation=True)

    p = sub.add_parser("oracle", help="brute-force robustness verdict")
    p.add_argument("file")
    p.add_argument("--bound", type=int, default=2, help="loop bound")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--witness-sc", action="store_true", help="also search SC runs for a witness")
    common(p, loop=False)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("race", help="data-race report for non-atomic locations")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--seeds", type=int, default=100)
    g.add_argument("--exhaustive", action="store_true")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--depth-cap", type=int, default=200)
    p.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    common(p)
    p.set_defaults(func=cmd_race, continue_on_violation=True)

    p = sub.add_parser("replay", help="replay a schedule and dump clock states per step")
    p.add_argument("file")
    p.add_argument("--trace", required=True)
    p.add_argument("--bm", action="store_true")
    common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("check-graph", help="consistency verdict for a serialized graph")
    p.add_argument("graph")
    p.add_argument("--model", choices=("rc20", "sc"), default="rc20")
    common(p, loop=False)
    p.set_defaults(func=cmd_check_graph)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except DslError as exc:
        print(f"{args.file}:{exc}", file=sys.stderr)
    except (UsageError, GraphError, UnsupportedFragment, AnalysisError, ValueError) as exc:
        print(f"wmrobust: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
